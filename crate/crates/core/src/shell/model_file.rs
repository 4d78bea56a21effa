//! The TOML model file: states, parameters with boxes and priors, per-action
//! rows, queries and an optional ground-truth block.
//!
//! Probabilities are strings (`"0.05"`, `"1/20"`) parsed to exact rationals.
//! A row entry is `"remainder"`, a number, or a parameter name.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use super::ShellError;
use crate::dtmc::{ActionEntry, ActionLabel, ActionRow, Dtmc, DtmcError, LayerTag, State, StateId};
use crate::estimators::PriorSpec;
use crate::interval::Interval;
use crate::monitor::{Direction, QueryRole, QuerySpec, Stage, Threshold};
use crate::paramcheck::{PathForm, ReachQuery};
use crate::ratfunc::{ParamId, Valuation};
use crate::rational::{self, Rational};
use crate::simulator::GroundTruth;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub model: ModelMeta,
    #[serde(default)]
    pub states: Vec<StateDecl>,
    #[serde(default)]
    pub params: Vec<ParamDecl>,
    #[serde(default)]
    pub rows: Vec<RowDecl>,
    #[serde(default)]
    pub queries: Vec<QueryDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<BTreeMap<String, String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub name: String,
    pub initial: String,
    /// State whose two-action policy weight varies per mission.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_state: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Normal,
    Unsafe,
    Failure,
    Catastrophic,
}

impl From<Layer> for LayerTag {
    fn from(l: Layer) -> Self {
        match l {
            Layer::Normal => LayerTag::Normal,
            Layer::Unsafe => LayerTag::Unsafe,
            Layer::Failure => LayerTag::Failure { catastrophic: false },
            Layer::Catastrophic => LayerTag::Failure { catastrophic: true },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDecl {
    pub name: Spanned<String>,
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDecl {
    pub name: Spanned<String>,
    /// Declared box `[lo, hi]`.
    pub range: [String; 2],
    pub prior: PriorSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDecl {
    pub state: Spanned<String>,
    pub actions: Vec<ActionDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDecl {
    pub action: String,
    pub weight: String,
    pub to: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormDecl {
    Until,
    Bounded,
    Next,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDecl {
    pub id: Spanned<String>,
    pub stage: Stage,
    pub role: QueryRole,
    pub target: String,
    pub form: FormDecl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    /// `">= 0.85"` or `"<= 0.01"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<String>,
}

/// A parsed, validated model with everything the commands need.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub name: String,
    pub dtmc: Dtmc,
    pub priors: BTreeMap<ParamId, PriorSpec>,
    pub queries: Vec<QuerySpec>,
    pub truth: Option<GroundTruth>,
    pub state_names: BTreeMap<StateId, String>,
    /// SHA-256 of the canonical serialization.
    pub hash: String,
    pub canonical: String,
}

impl LoadedModel {
    pub fn state_named(&self, name: &str) -> Option<StateId> {
        self.dtmc.state_by_name(name).map(|s| s.id)
    }

    pub fn declared_box(&self) -> crate::paramcheck::ParamBox {
        self.dtmc.params().iter().map(|(p, iv)| (p.clone(), iv.clone())).collect()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err<T>(&self, span: Option<std::ops::Range<usize>>, message: impl Into<String>) -> Result<T, ShellError> {
        Err(ShellError::Parse {
            line: span.map(|s| line_of(self.text, s.start)),
            message: message.into(),
        })
    }

    fn number(&self, span: std::ops::Range<usize>, what: &str, text: &str) -> Result<Rational, ShellError> {
        rational::parse_rational(text).or_else(|_| self.err(Some(span), format!("{what}: `{text}` is not a number")))
    }
}

pub fn parse_threshold(text: &str) -> Option<Threshold> {
    let t = text.trim();
    let (direction, rest) = match t.strip_prefix(">=") {
        Some(r) => (Direction::AtLeast, r),
        None => (Direction::AtMost, t.strip_prefix("<=")?),
    };
    let bound = rational::parse_rational(rest).ok()?;
    Some(Threshold { bound, direction })
}

fn render_threshold(t: &Threshold) -> String {
    let op = match t.direction {
        Direction::AtLeast => ">=",
        Direction::AtMost => "<=",
    };
    format!("{op} {}", rational::to_fraction_string(&t.bound))
}

pub fn parse_model(text: &str) -> Result<LoadedModel, ShellError> {
    let file: ModelFile = toml::from_str(text).map_err(|e| ShellError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    build(&file, text)
}

pub fn load_model(path: &Path) -> Result<LoadedModel, ShellError> {
    let text = super::read_text(path)?;
    parse_model(&text).map_err(|e| e.in_file(path))
}

fn build(file: &ModelFile, text: &str) -> Result<LoadedModel, ShellError> {
    let cx = Ctx { text };
    let mut ids: BTreeMap<String, StateId> = BTreeMap::new();
    let mut states = Vec::new();
    for (i, s) in file.states.iter().enumerate() {
        let id = StateId(i as u32 + 1);
        if ids.insert(s.name.get_ref().clone(), id).is_some() {
            return cx.err(Some(s.name.span()), format!("duplicate state `{}`", s.name.get_ref()));
        }
        states.push(State {
            id,
            name: s.name.get_ref().clone(),
            labels: s.labels.iter().cloned().collect(),
            layer: s.layer.into(),
        });
    }
    let lookup = |name: &str, span: Option<std::ops::Range<usize>>| -> Result<StateId, ShellError> {
        match ids.get(name) {
            Some(id) => Ok(*id),
            None => cx.err(span, format!("unknown state `{name}`")),
        }
    };
    let initial = lookup(&file.model.initial, None)?;

    let mut params = BTreeMap::new();
    let mut priors = BTreeMap::new();
    for p in &file.params {
        let name = p.name.get_ref();
        if !ParamId::is_valid_name(name) {
            return cx.err(Some(p.name.span()), format!("`{name}` is not a valid parameter name"));
        }
        let lo = cx.number(p.name.span(), "range", &p.range[0])?;
        let hi = cx.number(p.name.span(), "range", &p.range[1])?;
        let Some(iv) = Interval::try_new(lo, hi) else {
            return cx.err(Some(p.name.span()), format!("parameter `{name}`: empty range"));
        };
        if !rational::in_unit_interval(&iv.lo) || !rational::in_unit_interval(&iv.hi) {
            return cx.err(Some(p.name.span()), format!("parameter `{name}`: range must lie in [0, 1]"));
        }
        if let Err(e) = p.prior.validate() {
            return cx.err(Some(p.name.span()), format!("parameter `{name}`: {e}"));
        }
        if params.insert(ParamId::new(name.as_str()), iv).is_some() {
            return cx.err(Some(p.name.span()), format!("duplicate parameter `{name}`"));
        }
        priors.insert(ParamId::new(name.as_str()), p.prior.clone());
    }

    let mut actions: BTreeMap<StateId, Vec<ActionRow>> = BTreeMap::new();
    let mut row_lines: BTreeMap<StateId, usize> = BTreeMap::new();
    for r in &file.rows {
        let span = r.state.span();
        let sid = lookup(r.state.get_ref(), Some(span.clone()))?;
        if actions.contains_key(&sid) {
            return cx.err(Some(span), format!("state `{}` has two row blocks", r.state.get_ref()));
        }
        row_lines.insert(sid, line_of(text, span.start));
        let mut rows = Vec::new();
        for a in &r.actions {
            let weight = cx.number(span.clone(), "weight", &a.weight)?;
            let mut entries = BTreeMap::new();
            for (dest, e) in &a.to {
                let to = lookup(dest, Some(span.clone()))?;
                let entry = if e.trim() == "remainder" {
                    ActionEntry::Remainder
                } else if let Ok(q) = rational::parse_rational(e) {
                    ActionEntry::Constant(q)
                } else if ParamId::is_valid_name(e.trim()) {
                    ActionEntry::Param(ParamId::new(e.trim()))
                } else {
                    return cx.err(Some(span.clone()), format!("entry `{e}` is neither a number, a parameter nor `remainder`"));
                };
                entries.insert(to, entry);
            }
            rows.push(ActionRow {
                action: ActionLabel::new(a.action.as_str()),
                weight,
                entries,
            });
        }
        actions.insert(sid, rows);
    }

    let dtmc = Dtmc::new(states, initial, actions, params).map_err(|e| match e {
        DtmcError::UnknownState(_) | DtmcError::UndeclaredParameter(_) => ShellError::Parse {
            line: None,
            message: e.to_string(),
        },
        other => ShellError::Validation(other.to_string()),
    })?;
    let violations = dtmc.validate(&dtmc.default_reference_valuations());
    if !violations.is_empty() {
        let name_of = |s: StateId| dtmc.state(s).map(|st| st.name.clone()).unwrap_or_else(|| s.to_string());
        let lines: Vec<String> = violations
            .iter()
            .map(|v| {
                let state = match v {
                    crate::dtmc::Violation::RowSum { state, .. } => Some(*state),
                    crate::dtmc::Violation::OutOfRange { from, .. } => Some(*from),
                    crate::dtmc::Violation::NotAbsorbing { state, .. } => Some(*state),
                    _ => None,
                };
                match state.and_then(|s| row_lines.get(&s).map(|l| (s, l))) {
                    Some((s, l)) => format!("line {l} (state {}): {v}", name_of(s)),
                    None => v.to_string(),
                }
            })
            .collect();
        return Err(ShellError::Validation(lines.join("\n")));
    }

    let mut queries = Vec::new();
    for q in &file.queries {
        let span = q.id.span();
        let form = match q.form {
            FormDecl::Until => PathForm::Until {
                constraint: q.constraint.clone(),
            },
            FormDecl::Next => PathForm::Next,
            FormDecl::Bounded => match q.steps {
                Some(steps) => PathForm::BoundedUntil {
                    steps,
                    constraint: q.constraint.clone(),
                },
                None => return cx.err(Some(span), "bounded query needs `steps`"),
            },
        };
        let init = match &q.initial {
            Some(n) => lookup(n, Some(span.clone()))?,
            None => initial,
        };
        let threshold = match &q.threshold {
            Some(t) => match parse_threshold(t) {
                Some(th) => Some(th),
                None => return cx.err(Some(span), format!("threshold `{t}` must look like `>= 0.85` or `<= 0.01`")),
            },
            None => None,
        };
        queries.push(QuerySpec {
            id: q.id.get_ref().clone(),
            stage: q.stage,
            role: q.role,
            query: ReachQuery {
                initial: init,
                target: q.target.clone(),
                form,
            },
            threshold,
        });
    }

    let truth = match &file.truth {
        Some(values) => {
            let mut v = Valuation::new();
            for (k, text) in values {
                let q = rational::parse_rational(text)
                    .or_else(|_| cx.err(None, format!("truth `{k}`: `{text}` is not a number")))?;
                v.insert(ParamId::new(k.as_str()), q);
            }
            let policy_state = match &file.model.policy_state {
                Some(n) => Some(lookup(n, None)?),
                None => None,
            };
            Some(GroundTruth {
                values: v,
                policy_state,
            })
        }
        None => None,
    };

    let canonical_file = canonicalize(file, &dtmc, &queries, truth.as_ref());
    let canonical = toml::to_string(&canonical_file).map_err(|e| ShellError::Other(e.to_string()))?;
    let hash: String = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(LoadedModel {
        name: file.model.name.clone(),
        state_names: dtmc.states().map(|s| (s.id, s.name.clone())).collect(),
        dtmc,
        priors,
        queries,
        truth,
        hash,
        canonical,
    })
}

fn canon_num(text: &str) -> String {
    rational::parse_rational(text)
        .map(|q| rational::to_fraction_string(&q))
        .unwrap_or_else(|_| text.trim().to_string())
}

/// The file with every number in fraction form, so two spellings of one
/// model serialize (and hash) identically.
fn canonicalize(file: &ModelFile, dtmc: &Dtmc, queries: &[QuerySpec], truth: Option<&GroundTruth>) -> ModelFile {
    let mut out = file.clone();
    for p in &mut out.params {
        p.range = [canon_num(&p.range[0]), canon_num(&p.range[1])];
    }
    for r in &mut out.rows {
        for a in &mut r.actions {
            a.weight = canon_num(&a.weight);
            for v in a.to.values_mut() {
                *v = if v.trim() == "remainder" || rational::parse_rational(v).is_err() {
                    v.trim().to_string()
                } else {
                    canon_num(v)
                };
            }
        }
    }
    for (decl, spec) in out.queries.iter_mut().zip(queries) {
        decl.threshold = spec.threshold.as_ref().map(render_threshold);
        decl.initial = Some(
            dtmc.state(spec.query.initial)
                .map(|s| s.name.clone())
                .unwrap_or_default(),
        );
    }
    out.truth = truth.map(|t| {
        t.values
            .iter()
            .map(|(p, v)| (p.to_string(), rational::to_fraction_string(v)))
            .collect()
    });
    out
}

/// A valuation file: `param = "value"` lines.
pub fn parse_valuation(text: &str) -> Result<Valuation, ShellError> {
    let raw: BTreeMap<String, String> = toml::from_str(text).map_err(|e| ShellError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    raw.into_iter()
        .map(|(k, v)| {
            rational::parse_rational(&v)
                .map(|q| (ParamId::new(k.as_str()), q))
                .map_err(|e| ShellError::Parse {
                    line: None,
                    message: format!("`{k}`: {e}"),
                })
        })
        .collect()
}

/// A box file: `param = ["lo", "hi"]` lines.
pub fn parse_box(text: &str) -> Result<crate::paramcheck::ParamBox, ShellError> {
    let raw: BTreeMap<String, [String; 2]> = toml::from_str(text).map_err(|e| ShellError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    raw.into_iter()
        .map(|(k, [lo, hi])| {
            let bad = |m: String| ShellError::Parse { line: None, message: m };
            let lo = rational::parse_rational(&lo).map_err(|e| bad(format!("`{k}`: {e}")))?;
            let hi = rational::parse_rational(&hi).map_err(|e| bad(format!("`{k}`: {e}")))?;
            let iv = Interval::try_new(lo, hi).ok_or_else(|| bad(format!("`{k}`: empty interval")))?;
            Ok((ParamId::new(k.as_str()), iv))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
[model]
name = "tiny"
initial = "S1"

[[states]]
name = "S1"
layer = "normal"

[[states]]
name = "S2"
layer = "normal"
labels = ["goal"]

[[states]]
name = "S3"
layer = "catastrophic"

[[params]]
name = "p"
range = ["0.01", "0.4"]
prior = { kind = "interval", pseudo = { lo = "10", hi = "20" }, expectation = { lo = "0.1", hi = "0.2" } }

[[params]]
name = "q"
range = ["0.01", "0.4"]
prior = { kind = "cbi", theta = "0.9" }

[[rows]]
state = "S1"
actions = [{ action = "go", weight = "1", to = { S1 = "remainder", S2 = "p", S3 = "q" } }]

[[queries]]
id = "goal"
stage = "premission"
role = "completion"
target = "goal"
form = "until"
threshold = ">= 0.5"
"#;

    #[test]
    fn parses_and_round_trips() {
        let m = parse_model(TINY).unwrap();
        assert_eq!(m.dtmc.num_states(), 3);
        assert_eq!(m.queries[0].threshold.as_ref().unwrap().bound, Rational::new(1.into(), 2.into()));
        let again = parse_model(&m.canonical).unwrap();
        assert_eq!(again.canonical, m.canonical);
        assert_eq!(again.hash, m.hash);
        assert_eq!(again.dtmc, m.dtmc);
    }

    #[test]
    fn spelling_does_not_change_the_hash() {
        let m = parse_model(TINY).unwrap();
        let other = parse_model(&TINY.replace(r#"range = ["0.01", "0.4"]"#, r#"range = ["1/100", "2/5"]"#)).unwrap();
        assert_eq!(m.hash, other.hash);
    }

    #[test]
    fn diagnostics_carry_lines() {
        let bad = TINY.replace(r#"state = "S1""#, r#"state = "S9""#);
        match parse_model(&bad) {
            Err(ShellError::Parse { line: Some(l), message }) => {
                assert!(message.contains("S9"));
                assert!(bad.lines().nth(l - 1).unwrap().contains("S9"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let syntax = TINY.replace("layer = \"normal\"\nlabels", "layer = normal\nlabels");
        assert!(matches!(parse_model(&syntax), Err(ShellError::Parse { line: Some(_), .. })));
    }

    #[test]
    fn row_sum_is_a_validation_error() {
        let bad = TINY.replace(r#"S1 = "remainder""#, r#"S1 = "0.9""#);
        match parse_model(&bad) {
            Err(ShellError::Validation(msg)) => assert!(msg.contains("sums to"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
