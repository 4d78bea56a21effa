//! Pre-mission verification and the runtime monitor.
//!
//! Before a mission every query is eliminated once per initial state it can
//! be asked from, giving a [`ClosedFormCache`]. At runtime each observed
//! transition updates the estimators of its row, and every runtime query is
//! re-bounded by substituting the new parameter box into the cached closed
//! form for the current state. No elimination happens after the cache is
//! built.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmc::{ActionEntry, ActionLabel, Dtmc, StateId};
use crate::estimators::{
    cbi_bound, cbi_bound_upper, imprecise_update, CbiPrior, EstimatorError, ImprecisePrior, PosteriorInterval, PriorSpec,
    TransitionCounts,
};
use crate::interval::Interval;
use crate::paramcheck::{
    analyze_monotonicity, bound_evaluate, BoundOptions, CheckError, Checker, ClosedForm, ParamBox, PathForm,
    ReachQuery,
};
use crate::ratfunc::ParamId;
use crate::rational::{self, int, Rational};
use crate::simulator::{Tallies, TraceEvent};

/// Significant digits kept when rounding a CBI bound up for substitution.
const CBI_DIGITS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("parameter `{0}` has no prior")]
    MissingPrior(ParamId),
    #[error("parameter `{param}` must appear in exactly one action row, found {found}")]
    Binding { param: ParamId, found: usize },
    #[error("parameter `{0}` feeds a catastrophic failure state and needs a CBI prior (or vice versa)")]
    EstimatorRouting(ParamId),
    #[error("query `{0}` has a form that cannot be cached; only until and next are verified from the cache")]
    Uncacheable(String),
    #[error("cache has no closed form for query `{0}` from {1}")]
    CacheMiss(String, StateId),
    #[error("cache was built for model {found}, but the model hashes to {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("event at step {step} leaves {from}, but the monitor is in {current}")]
    ChainBreak { step: u64, from: StateId, current: StateId },
    #[error("event at step {step}: {what}")]
    UnknownTransition { step: u64, what: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Threshold {
    #[serde(with = "rational::serde_text")]
    pub bound: Rational,
    pub direction: Direction,
}

/// What a query measures, which decides the protective action on violation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryRole {
    Completion,
    Catastrophic,
    Other,
}

/// `Premission` queries are asked once from a fixed initial state;
/// `Runtime` ones are re-asked from the current state after every event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Premission,
    Runtime,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub id: String,
    pub stage: Stage,
    pub role: QueryRole,
    /// The query; its initial state is used for pre-mission queries.
    pub query: ReachQuery,
    pub threshold: Option<Threshold>,
}

/// Where a CBI-estimated parameter's box comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CbiBoxPolicy {
    /// The bound itself, as a point.
    #[default]
    Point,
    /// `[0, bound]`.
    ZeroToBound,
}

/// Where a parameter sits in the model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBinding {
    pub param: ParamId,
    pub state: StateId,
    pub action: ActionLabel,
    pub dest: StateId,
    pub catastrophic: bool,
}

/// Locates each parameter's unique `(state, action, destination)` and checks
/// the estimator routing: catastrophic destinations take CBI priors and
/// nothing else does.
pub fn bind_parameters(model: &Dtmc, priors: &BTreeMap<ParamId, PriorSpec>) -> Result<Vec<ParamBinding>, MonitorError> {
    let mut found: BTreeMap<ParamId, Vec<ParamBinding>> = BTreeMap::new();
    for s in model.states() {
        for row in model.actions(s.id) {
            for (dest, e) in &row.entries {
                if let ActionEntry::Param(p) = e {
                    let catastrophic = model.state(*dest).is_some_and(|d| d.layer.is_catastrophic());
                    found.entry(p.clone()).or_default().push(ParamBinding {
                        param: p.clone(),
                        state: s.id,
                        action: row.action.clone(),
                        dest: *dest,
                        catastrophic,
                    });
                }
            }
        }
    }
    let mut out = Vec::new();
    for p in model.params().keys() {
        let mut sites = found.remove(p).unwrap_or_default();
        if sites.len() != 1 {
            return Err(MonitorError::Binding {
                param: p.clone(),
                found: sites.len(),
            });
        }
        let b = sites.pop().expect("one site");
        let prior = priors.get(p).ok_or_else(|| MonitorError::MissingPrior(p.clone()))?;
        prior.validate()?;
        if b.catastrophic != matches!(prior, PriorSpec::Cbi { .. }) {
            return Err(MonitorError::EstimatorRouting(p.clone()));
        }
        out.push(b);
    }
    Ok(out)
}

/// Closed forms per `(query id, initial state)`, stamped with the model hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedFormCache {
    pub model_hash: String,
    pub entries: Vec<CacheEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub query_id: String,
    pub closed_form: ClosedForm,
}

impl ClosedFormCache {
    /// Eliminates every query from each state it may be asked from and
    /// proves monotonicity over the model's declared box.
    pub fn build(model: &Dtmc, queries: &[QuerySpec], model_hash: &str, opts: &BoundOptions) -> Result<Self, MonitorError> {
        let checker = Checker::new(model)?;
        let declared: ParamBox = model.params().iter().map(|(p, iv)| (p.clone(), iv.clone())).collect();
        let mut entries = Vec::new();
        for q in queries {
            let initials: Vec<StateId> = match q.stage {
                Stage::Premission => vec![q.query.initial],
                Stage::Runtime => model.states().map(|s| s.id).collect(),
            };
            for s in initials {
                let query = q.query.with_initial(s);
                let mut cf = match &query.form {
                    PathForm::Until { .. } => checker.eliminate(&query)?,
                    PathForm::Next => checker.check_next(&query)?,
                    PathForm::BoundedUntil { .. } => return Err(MonitorError::Uncacheable(q.id.clone())),
                };
                analyze_monotonicity(&mut cf, &declared, opts)?;
                entries.push(CacheEntry {
                    query_id: q.id.clone(),
                    closed_form: cf,
                });
            }
        }
        Ok(ClosedFormCache {
            model_hash: model_hash.to_string(),
            entries,
        })
    }

    pub fn get(&self, query_id: &str, initial: StateId) -> Option<&ClosedForm> {
        self.entries
            .iter()
            .find(|e| e.query_id == query_id && e.closed_form.query.initial == initial)
            .map(|e| &e.closed_form)
    }

    pub fn check_hash(&self, expected: &str) -> Result<(), MonitorError> {
        if self.model_hash == expected {
            Ok(())
        } else {
            Err(MonitorError::HashMismatch {
                expected: expected.to_string(),
                found: self.model_hash.clone(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Posterior {
    Interval(PosteriorInterval),
    Cbi {
        n: u64,
        #[serde(with = "rational::serde_text")]
        bound: Rational,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub binding: ParamBinding,
    pub prior: PriorSpec,
    pub posterior: Posterior,
}

impl ParamEstimate {
    /// The interval this estimate contributes to the parameter box.
    pub fn box_interval(&self, policy: CbiBoxPolicy) -> Interval {
        match &self.posterior {
            Posterior::Interval(p) => p.interval(),
            Posterior::Cbi { bound, .. } => {
                let hi = rational::round_up_sig(bound, CBI_DIGITS);
                match policy {
                    CbiBoxPolicy::Point => Interval::point(hi),
                    CbiBoxPolicy::ZeroToBound => Interval::new(Rational::from_integer(0.into()), hi),
                }
            }
        }
    }
}

fn estimate(binding: &ParamBinding, prior: &PriorSpec, counts: &TransitionCounts) -> Result<Posterior, MonitorError> {
    Ok(match prior {
        PriorSpec::Cbi { theta } => {
            let p = CbiPrior::new(theta.clone())?;
            let failures = counts.count(binding.dest);
            if failures > 0 {
                return Err(EstimatorError::CbiRegimeViolated { failures }.into());
            }
            Posterior::Cbi {
                n: counts.total,
                bound: cbi_bound(&p, counts.total),
            }
        }
        other => Posterior::Interval(imprecise_update(
            &other.as_imprecise().expect("non-CBI prior"),
            counts,
            binding.dest,
        )),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBound {
    pub id: String,
    pub interval: Interval,
    pub conservative: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremissionReport {
    pub estimates: Vec<ParamEstimate>,
    pub param_box: ParamBox,
    pub bounds: Vec<QueryBound>,
    /// Per-row sample sizes used, for runtime prior construction.
    pub row_counts: BTreeMap<String, u64>,
}

fn row_key(state: StateId, action: &ActionLabel) -> String {
    format!("{state}/{action}")
}

/// Posterior table and pre-mission query bounds from previous missions'
/// tallies.
pub fn premission_verify(
    model: &Dtmc,
    priors: &BTreeMap<ParamId, PriorSpec>,
    queries: &[QuerySpec],
    cache: &ClosedFormCache,
    previous: &Tallies,
    policy: CbiBoxPolicy,
    opts: &BoundOptions,
) -> Result<PremissionReport, MonitorError> {
    let bindings = bind_parameters(model, priors)?;
    let empty = TransitionCounts::new();
    let mut estimates = Vec::new();
    let mut row_counts = BTreeMap::new();
    for b in bindings {
        let counts = previous.action(b.state, &b.action).unwrap_or(&empty);
        row_counts.insert(row_key(b.state, &b.action), counts.total);
        let prior = priors[&b.param].clone();
        let posterior = estimate(&b, &prior, counts)?;
        estimates.push(ParamEstimate {
            binding: b,
            prior,
            posterior,
        });
    }
    let param_box: ParamBox = estimates
        .iter()
        .map(|e| (e.binding.param.clone(), e.box_interval(policy)))
        .collect();
    let mut bounds = Vec::new();
    for q in queries.iter().filter(|q| q.stage == Stage::Premission) {
        let cf = cache
            .get(&q.id, q.query.initial)
            .ok_or_else(|| MonitorError::CacheMiss(q.id.clone(), q.query.initial))?;
        let r = bound_evaluate(cf, &param_box, opts)?;
        bounds.push(QueryBound {
            id: q.id.clone(),
            interval: r.interval,
            conservative: r.conservative,
        });
    }
    Ok(PremissionReport {
        estimates,
        param_box,
        bounds,
        row_counts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
    Indeterminate,
    /// No threshold configured: the bound is reported only.
    Reported,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionHint {
    Continue,
    Abort,
    Restart,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub step: u64,
    pub state: StateId,
    pub query: String,
    pub interval: Interval,
    pub conservative: bool,
    pub status: Status,
    pub hint: ActionHint,
}

/// Satisfied only if the whole interval meets the threshold, violated only
/// if the whole interval fails it.
pub fn judge(interval: &Interval, threshold: Option<&Threshold>) -> Status {
    let Some(t) = threshold else {
        return Status::Reported;
    };
    let (all_ok, all_bad) = match t.direction {
        Direction::AtLeast => (interval.lo >= t.bound, interval.hi < t.bound),
        Direction::AtMost => (interval.hi <= t.bound, interval.lo > t.bound),
    };
    if all_ok {
        Status::Satisfied
    } else if all_bad {
        Status::Violated
    } else {
        Status::Indeterminate
    }
}

pub fn hint(role: QueryRole, status: Status) -> ActionHint {
    match (role, status) {
        (QueryRole::Catastrophic, Status::Violated) => ActionHint::Abort,
        (QueryRole::Completion, Status::Violated) => ActionHint::Restart,
        _ => ActionHint::Continue,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlarmConfig {
    /// Consecutive row updates an alarm-grade conflict must persist.
    pub window: u32,
    /// Binomial z-score against the nearest prior bound above which a raw
    /// conflict is alarm-grade.
    pub z_threshold: f64,
}

impl Default for AlarmConfig {
    fn default() -> Self {
        AlarmConfig {
            window: 10,
            z_threshold: 3.0,
        }
    }
}

/// Distance of the observed frequency from the prior expectation interval,
/// in binomial standard errors at the violated bound; 0 when inside.
pub fn conflict_z(n: u64, k: u64, expectation: &Interval) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let freq = Rational::new(k.into(), n.into());
    let bound = if freq < expectation.lo {
        &expectation.lo
    } else if freq > expectation.hi {
        &expectation.hi
    } else {
        return 0.0;
    };
    let p = rational::to_f64(bound);
    if p <= 0.0 || p >= 1.0 {
        return f64::INFINITY;
    }
    let n = n as f64;
    (k as f64 - n * p).abs() / (n * p * (1.0 - p)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamConflict {
    /// Observed frequency outside the prior expectation interval.
    pub raw: bool,
    pub z: f64,
    /// Consecutive row updates with an alarm-grade conflict.
    pub streak: u32,
    /// Least-squares slope of the interval width over the last window.
    pub width_trend: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Classification {
    None,
    KnownUnknown(Vec<ParamId>),
    UnknownUnknown(Vec<ParamId>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub step: u64,
    pub flags: BTreeMap<ParamId, ParamConflict>,
    pub classification: Classification,
}

/// A parameter is in persistent conflict once its streak reaches `window`.
/// If every tracked parameter of some state's rows (at least two of them) is
/// persistent at once, the robot is likely wrong about where it is; any other
/// persistent conflict is an environment change it knows it is learning.
pub fn classify_conflict(
    flags: &BTreeMap<ParamId, ParamConflict>,
    groups: &BTreeMap<StateId, BTreeSet<ParamId>>,
    window: u32,
) -> Classification {
    let persistent: BTreeSet<&ParamId> = flags.iter().filter(|(_, f)| f.streak >= window).map(|(p, _)| p).collect();
    if persistent.is_empty() {
        return Classification::None;
    }
    let unknown: BTreeSet<ParamId> = groups
        .values()
        .filter(|g| g.len() >= 2 && g.iter().all(|p| persistent.contains(p)))
        .flatten()
        .cloned()
        .collect();
    if !unknown.is_empty() {
        Classification::UnknownUnknown(unknown.into_iter().collect())
    } else {
        Classification::KnownUnknown(persistent.into_iter().cloned().collect())
    }
}

fn slope(ys: &VecDeque<f64>) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let mx = (n - 1) as f64 / 2.0;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// The estimator behind one runtime parameter.
#[derive(Clone, Debug)]
enum Runtime {
    Imprecise(ImprecisePrior),
    Cbi { prior: CbiPrior, n_pre: u64 },
}

#[derive(Clone, Debug)]
struct Tracked {
    binding: ParamBinding,
    runtime: Runtime,
    interval: Interval,
    conflict: ParamConflict,
    widths: VecDeque<f64>,
    /// A catastrophic transition was observed; the CBI bound no longer applies.
    regime_violated: bool,
}

/// Everything observed after one event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub state: StateId,
    pub estimates: BTreeMap<ParamId, Interval>,
    pub verdicts: Vec<Verdict>,
    pub conflict: ConflictReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub alarm: AlarmConfig,
    pub cbi_box: CbiBoxPolicy,
}

/// Runtime monitor for one mission.
///
/// The pre-mission posteriors become the runtime priors: a posterior
/// `[lo, hi]` learned from `n_pre` transitions is carried as expectation
/// `[lo, hi]` with pseudo-counts shifted by `n_pre`. Conflict is judged on
/// this mission's data alone.
pub struct Monitor {
    queries: Vec<QuerySpec>,
    cache: BTreeMap<(String, StateId), ClosedForm>,
    tracked: BTreeMap<ParamId, Tracked>,
    rows: BTreeMap<(StateId, ActionLabel), Vec<ParamId>>,
    groups: BTreeMap<StateId, BTreeSet<ParamId>>,
    counts: Tallies,
    valid: BTreeMap<StateId, BTreeSet<ActionLabel>>,
    states: BTreeSet<StateId>,
    current: StateId,
    step: u64,
    config: MonitorConfig,
    opts: BoundOptions,
}

impl Monitor {
    pub fn new(
        model: &Dtmc,
        queries: &[QuerySpec],
        cache: &ClosedFormCache,
        premission: &PremissionReport,
        config: MonitorConfig,
        opts: BoundOptions,
    ) -> Result<Self, MonitorError> {
        let mut table = BTreeMap::new();
        for q in queries.iter().filter(|q| q.stage == Stage::Runtime) {
            for s in model.states() {
                let cf = cache.get(&q.id, s.id).ok_or_else(|| MonitorError::CacheMiss(q.id.clone(), s.id))?;
                table.insert((q.id.clone(), s.id), cf.clone());
            }
        }
        let mut tracked = BTreeMap::new();
        let mut rows: BTreeMap<(StateId, ActionLabel), Vec<ParamId>> = BTreeMap::new();
        let mut groups: BTreeMap<StateId, BTreeSet<ParamId>> = BTreeMap::new();
        for e in &premission.estimates {
            let b = &e.binding;
            let n_pre = premission.row_counts.get(&row_key(b.state, &b.action)).copied().unwrap_or(0);
            let runtime = match (&e.prior, &e.posterior) {
                (PriorSpec::Cbi { theta }, _) => Runtime::Cbi {
                    prior: CbiPrior::new(theta.clone())?,
                    n_pre,
                },
                (prior, Posterior::Interval(post)) => {
                    let p = prior.as_imprecise().expect("non-CBI prior");
                    let shift = int(n_pre as i64);
                    Runtime::Imprecise(ImprecisePrior {
                        pseudo_count: Interval::new(&p.pseudo_count.lo + &shift, &p.pseudo_count.hi + &shift),
                        expectation: post.interval(),
                    })
                }
                (_, Posterior::Cbi { .. }) => return Err(MonitorError::EstimatorRouting(b.param.clone())),
            };
            if matches!(runtime, Runtime::Imprecise(_)) {
                groups.entry(b.state).or_default().insert(b.param.clone());
            }
            rows.entry((b.state, b.action.clone())).or_default().push(b.param.clone());
            tracked.insert(
                b.param.clone(),
                Tracked {
                    binding: b.clone(),
                    runtime,
                    interval: e.box_interval(config.cbi_box),
                    conflict: ParamConflict {
                        raw: false,
                        z: 0.0,
                        streak: 0,
                        width_trend: 0.0,
                    },
                    widths: VecDeque::new(),
                    regime_violated: false,
                },
            );
        }
        let valid = model
            .states()
            .map(|s| (s.id, model.actions(s.id).iter().map(|r| r.action.clone()).collect()))
            .collect();
        Ok(Monitor {
            queries: queries.to_vec(),
            cache: table,
            tracked,
            rows,
            groups,
            counts: Tallies::default(),
            valid,
            states: model.states().map(|s| s.id).collect(),
            current: model.initial(),
            step: 0,
            config,
            opts,
        })
    }

    pub fn current(&self) -> StateId {
        self.current
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Runtime counts observed so far.
    pub fn counts(&self) -> &Tallies {
        &self.counts
    }

    pub fn param_box(&self) -> ParamBox {
        self.tracked.iter().map(|(p, t)| (p.clone(), t.interval.clone())).collect()
    }

    pub fn queries(&self) -> impl Iterator<Item = &QuerySpec> {
        self.queries.iter().filter(|q| q.stage == Stage::Runtime)
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamId> {
        self.tracked.keys()
    }

    /// Bounds of a runtime query from `state` at the current estimates.
    pub fn bound_from(&self, query_id: &str, state: StateId) -> Result<QueryBound, MonitorError> {
        let cf = self
            .cache
            .get(&(query_id.to_string(), state))
            .ok_or_else(|| MonitorError::CacheMiss(query_id.to_string(), state))?;
        let r = bound_evaluate(cf, &self.param_box(), &self.opts)?;
        Ok(QueryBound {
            id: query_id.to_string(),
            interval: r.interval,
            conservative: r.conservative,
        })
    }

    fn verdicts(&self) -> Result<Vec<Verdict>, MonitorError> {
        self.queries()
            .map(|q| {
                let b = self.bound_from(&q.id, self.current)?;
                let status = judge(&b.interval, q.threshold.as_ref());
                Ok(Verdict {
                    step: self.step,
                    state: self.current,
                    query: q.id.clone(),
                    interval: b.interval,
                    conservative: b.conservative,
                    status,
                    hint: hint(q.role, status),
                })
            })
            .collect()
    }

    fn conflict_report(&self) -> ConflictReport {
        let flags: BTreeMap<ParamId, ParamConflict> = self
            .tracked
            .iter()
            .filter(|(_, t)| matches!(t.runtime, Runtime::Imprecise(_)))
            .map(|(p, t)| (p.clone(), t.conflict.clone()))
            .collect();
        ConflictReport {
            step: self.step,
            classification: classify_conflict(&flags, &self.groups, self.config.alarm.window),
            flags,
        }
    }

    /// The report before any event: pre-mission estimates, bounds from the
    /// initial state.
    pub fn snapshot(&self) -> Result<StepReport, MonitorError> {
        Ok(StepReport {
            step: self.step,
            state: self.current,
            estimates: self.tracked.iter().map(|(p, t)| (p.clone(), t.interval.clone())).collect(),
            verdicts: self.verdicts()?,
            conflict: self.conflict_report(),
            warnings: Vec::new(),
        })
    }

    /// Consumes one observed transition.
    pub fn ingest(&mut self, event: &TraceEvent) -> Result<StepReport, MonitorError> {
        if event.from != self.current {
            return Err(MonitorError::ChainBreak {
                step: event.step,
                from: event.from,
                current: self.current,
            });
        }
        if !self.states.contains(&event.to) {
            return Err(MonitorError::UnknownTransition {
                step: event.step,
                what: format!("unknown destination {}", event.to),
            });
        }
        if !self.valid.get(&event.from).is_some_and(|a| a.contains(&event.action)) {
            return Err(MonitorError::UnknownTransition {
                step: event.step,
                what: format!("state {} has no action `{}`", event.from, event.action),
            });
        }
        self.counts.record(event);
        self.step += 1;
        self.current = event.to;
        let key = (event.from, event.action.clone());
        let counts = self.counts.per_action[&key].clone();
        let mut warnings = Vec::new();
        let window = self.config.alarm.window as usize;
        for p in self.rows.get(&key).cloned().unwrap_or_default() {
            let t = self.tracked.get_mut(&p).expect("tracked parameter");
            match &t.runtime {
                Runtime::Imprecise(prior) => {
                    let post = imprecise_update(prior, &counts, t.binding.dest);
                    let z = conflict_z(counts.total, counts.count(t.binding.dest), &prior.expectation);
                    let alarm = post.conflict && z > self.config.alarm.z_threshold;
                    t.conflict.streak = if alarm { t.conflict.streak + 1 } else { 0 };
                    t.conflict.raw = post.conflict;
                    t.conflict.z = z;
                    t.widths.push_back(rational::to_f64(&post.width()));
                    if t.widths.len() > window {
                        t.widths.pop_front();
                    }
                    t.conflict.width_trend = slope(&t.widths);
                    t.interval = post.interval();
                }
                Runtime::Cbi { prior, n_pre } => {
                    let failures = counts.count(t.binding.dest);
                    if failures > 0 {
                        if !t.regime_violated {
                            warnings.push(EstimatorError::CbiRegimeViolated { failures }.to_string());
                        }
                        t.regime_violated = true;
                    } else {
                        let hi = cbi_bound_upper(prior, n_pre + counts.total, CBI_DIGITS);
                        t.interval = match self.config.cbi_box {
                            CbiBoxPolicy::Point => Interval::point(hi),
                            CbiBoxPolicy::ZeroToBound => Interval::new(int(0), hi),
                        };
                    }
                }
            }
        }
        let mut report = self.snapshot()?;
        report.warnings = warnings;
        Ok(report)
    }
}

/// Per-step CSV: `step,state,<param>_lo,<param>_hi,...,<query>_lo,<query>_hi`,
/// numbers with six significant digits.
pub fn emit_series(reports: &[StepReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    let params: Vec<&ParamId> = first.estimates.keys().collect();
    let queries: Vec<&str> = first.verdicts.iter().map(|v| v.query.as_str()).collect();
    let mut header = vec!["step".to_string(), "state".to_string()];
    for p in &params {
        header.push(format!("{p}_lo"));
        header.push(format!("{p}_hi"));
    }
    for q in &queries {
        header.push(format!("{q}_lo"));
        header.push(format!("{q}_hi"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{},{}", r.step, r.state);
        for p in &params {
            let iv = &r.estimates[*p];
            let _ = write!(out, ",{},{}", rational::format_sig(&iv.lo), rational::format_sig(&iv.hi));
        }
        for v in &r.verdicts {
            let _ = write!(
                out,
                ",{},{}",
                rational::format_sig(&v.interval.lo),
                rational::format_sig(&v.interval.hi)
            );
        }
        out.push('\n');
    }
    out
}
