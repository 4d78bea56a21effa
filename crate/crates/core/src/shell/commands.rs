//! `check`, `simulate`, `premission` and `monitor`.
//!
//! Each command returns the text to print and an exit code; files go under
//! the given output path.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model_file::{parse_box, parse_valuation, LoadedModel};
use super::trace::{parse_trace, render_trace};
use super::{exit, load_cache, read_text, save_cache, write_text, RunConfig, ShellError};
use crate::monitor::{
    emit_series, judge, premission_verify, Classification, ClosedFormCache, Monitor, MonitorConfig, Posterior,
    PremissionReport, QuerySpec, StepReport, Status,
};
use crate::paramcheck::{analyze_monotonicity, bound_evaluate, BoundOptions, Checker, ClosedForm, ParamBox, PathForm};
use crate::ratfunc::{ParamId, Valuation};
use crate::interval::Interval;
use crate::rational::{self, Rational};
use crate::estimators::PriorSpec;
use crate::simulator::{
    count_events, generate_campaign, showcase_mission, simulate_with_mislabel, CampaignHeader, MislabelFault, SimConfig,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, code: exit::OK }
    }
}

/// What `check` evaluates the queries over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckInput {
    /// The model's declared parameter box.
    Declared,
    Valuation(Valuation),
    Box(ParamBox),
}

impl CheckInput {
    pub fn from_valuation_file(path: &Path) -> Result<Self, ShellError> {
        Ok(CheckInput::Valuation(parse_valuation(&read_text(path)?).map_err(|e| e.in_file(path))?))
    }

    pub fn from_box_file(path: &Path) -> Result<Self, ShellError> {
        Ok(CheckInput::Box(parse_box(&read_text(path)?).map_err(|e| e.in_file(path))?))
    }
}

fn closed_form(checker: &Checker, q: &QuerySpec) -> Result<Option<ClosedForm>, ShellError> {
    Ok(match q.query.form {
        PathForm::Until { .. } => Some(checker.eliminate(&q.query)?),
        PathForm::Next => Some(checker.check_next(&q.query)?),
        PathForm::BoundedUntil { .. } => None,
    })
}

fn violated(q: &QuerySpec, iv: &Interval) -> bool {
    judge(iv, q.threshold.as_ref()) == Status::Violated
}

pub fn cmd_check(model: &LoadedModel, input: &CheckInput, exact: bool) -> Result<Outcome, ShellError> {
    let checker = Checker::new(&model.dtmc)?;
    let opts = BoundOptions::default();
    let mut out = String::new();
    let mut any_violation = false;
    let num = |q: &Rational| rational::render(q, exact);
    for q in &model.queries {
        let _ = writeln!(out, "{}: {}", q.id, q.query);
        match input {
            CheckInput::Valuation(v) => {
                let value = match closed_form(&checker, q)? {
                    Some(cf) => cf.evaluate(v).map_err(|e| ShellError::Validation(e.to_string()))?,
                    None => checker.check_bounded(&q.query, v)?,
                };
                any_violation |= violated(q, &Interval::point(value.clone()));
                let _ = writeln!(out, "  = {}", num(&value));
            }
            CheckInput::Declared | CheckInput::Box(_) => {
                let bx = match input {
                    CheckInput::Box(b) => b.clone(),
                    _ => model.declared_box(),
                };
                let Some(mut cf) = closed_form(&checker, q)? else {
                    let _ = writeln!(out, "  skipped: bounded until is evaluated at a point valuation only");
                    continue;
                };
                analyze_monotonicity(&mut cf, &bx, &opts)?;
                let r = bound_evaluate(&cf, &bx, &opts)?;
                any_violation |= violated(q, &r.interval);
                let _ = writeln!(
                    out,
                    "  in [{}, {}]{}",
                    num(&r.interval.lo),
                    num(&r.interval.hi),
                    if r.conservative { " (conservative enclosure)" } else { "" }
                );
                let _ = writeln!(out, "  closed form: {}", cf.function);
                for (p, m) in &cf.monotonicity {
                    let _ = writeln!(out, "  {p}: {}", format!("{m:?}").to_lowercase());
                }
            }
        }
        for w in &closed_form(&checker, q)?.map(|c| c.warnings).unwrap_or_default() {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    Ok(Outcome {
        stdout: out,
        code: if any_violation { exit::THRESHOLD } else { exit::OK },
    })
}

/// Options of `simulate` beyond the run configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimulateOptions {
    /// Write the single longest of `candidates` missions at the configured
    /// mission policy weight, numbered after the campaign.
    pub showcase: bool,
    /// Truth overrides, e.g. a changed environment.
    pub overrides: Vec<(ParamId, Rational)>,
    /// Inject a sensor fault into the showcase mission.
    pub mislabel: Option<MislabelFault>,
}

pub fn cmd_simulate(model: &LoadedModel, cfg: &RunConfig, opts: &SimulateOptions, out: &Path) -> Result<Outcome, ShellError> {
    let mut truth = model
        .truth
        .clone()
        .ok_or_else(|| ShellError::Validation("the model has no [truth] block".into()))?;
    for (p, v) in &opts.overrides {
        truth.values.insert(p.clone(), v.clone());
    }
    let sim = SimConfig { step_cap: cfg.step_cap };
    let missions = if opts.showcase {
        let id = cfg.n_missions + 1;
        let m = match &opts.mislabel {
            Some(f) => simulate_with_mislabel(&model.dtmc, &truth, id, Some(&cfg.mission_gamma), f, &sim, cfg.seed)?,
            None => showcase_mission(&model.dtmc, &truth, &cfg.mission_gamma, id, cfg.candidates, &sim, cfg.seed)?,
        };
        vec![m]
    } else {
        generate_campaign(&model.dtmc, &truth, cfg.n_missions, &cfg.gamma_range, &sim, cfg.seed)?
    };
    let header = CampaignHeader::new(cfg.seed, &truth, &sim, &missions);
    write_text(out, &render_trace(Some(&header), &missions)?)?;
    let events: usize = missions.iter().map(|m| m.events.len()).sum();
    let truncated = missions.iter().filter(|m| m.truncated).count();
    Ok(Outcome::ok(format!(
        "{} mission(s), {events} events, {truncated} truncated -> {}\n",
        missions.len(),
        out.display()
    )))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremissionFile {
    pub model_hash: String,
    pub report: PremissionReport,
}

fn prior_cells(p: &PriorSpec) -> (String, String) {
    let iv = |i: &Interval| format!("[{}, {}]", rational::format_sig(&i.lo), rational::format_sig(&i.hi));
    match p {
        PriorSpec::Point { pseudo, expectation } => (rational::format_sig(pseudo), rational::format_sig(expectation)),
        PriorSpec::Interval { pseudo, expectation } => (iv(pseudo), iv(expectation)),
        PriorSpec::Cbi { theta } => ("N/A".into(), format!("CBI θ={}", rational::format_sig(theta))),
    }
}

/// Pre-mission table: one column per parameter, rows for pseudo-count,
/// prior estimate and posterior estimate.
pub fn render_table(report: &PremissionReport) -> String {
    let mut cols: Vec<[String; 4]> = vec![[
        "param".into(),
        "pse. cou.".into(),
        "pri. est.".into(),
        "post. est.".into(),
    ]];
    for e in &report.estimates {
        let (pc, pe) = prior_cells(&e.prior);
        let post = match &e.posterior {
            Posterior::Interval(p) => format!("[{}, {}]", rational::format_sig(&p.lower), rational::format_sig(&p.upper)),
            Posterior::Cbi { bound, .. } => rational::format_sig(bound),
        };
        cols.push([e.binding.param.to_string(), pc, pe, post]);
    }
    let widths: Vec<usize> = cols.iter().map(|c| c.iter().map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in 0..4 {
        let line: Vec<String> = cols
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{:<w$}", c[row], w = *w))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn cmd_premission(model: &LoadedModel, trace_path: &Path, cfg: &RunConfig, out: &Path) -> Result<Outcome, ShellError> {
    let trace = parse_trace(&read_text(trace_path)?).map_err(|e| e.in_file(trace_path))?;
    let tallies = count_events(&trace.events)?;
    let opts = BoundOptions::default();
    let cache = ClosedFormCache::build(&model.dtmc, &model.queries, &model.hash, &opts)?;
    let report = premission_verify(&model.dtmc, &model.priors, &model.queries, &cache, &tallies, cfg.cbi_box, &opts)?;
    save_cache(&out.join("cache.json"), &cache)?;
    let file = PremissionFile {
        model_hash: model.hash.clone(),
        report: report.clone(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| ShellError::Other(e.to_string()))?;
    write_text(&out.join("premission.json"), &(json + "\n"))?;

    let mut text = render_table(&report);
    let mut any_violation = false;
    for b in &report.bounds {
        let q = model.queries.iter().find(|q| q.id == b.id).expect("query of report");
        any_violation |= violated(q, &b.interval);
        let _ = writeln!(
            text,
            "{} in [{}, {}]{}",
            b.id,
            rational::format_sig(&b.interval.lo),
            rational::format_sig(&b.interval.hi),
            if b.conservative { " (conservative)" } else { "" }
        );
    }
    let _ = writeln!(text, "cache -> {}", out.join("cache.json").display());
    Ok(Outcome {
        stdout: text,
        code: if any_violation { exit::THRESHOLD } else { exit::OK },
    })
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String, ShellError> {
    let mut out = String::new();
    for i in items {
        out.push_str(&serde_json::to_string(&i).map_err(|e| ShellError::Other(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// Replays one mission through the monitor; returns the per-step reports,
/// starting with the pre-event snapshot.
pub fn replay(
    model: &LoadedModel,
    cache: &ClosedFormCache,
    premission: &PremissionReport,
    events: &[crate::simulator::TraceEvent],
    config: MonitorConfig,
) -> Result<Vec<StepReport>, ShellError> {
    cache.check_hash(&model.hash)?;
    let mut monitor = Monitor::new(&model.dtmc, &model.queries, cache, premission, config, BoundOptions::default())?;
    let mut reports = vec![monitor.snapshot()?];
    for e in events {
        reports.push(monitor.ingest(e)?);
    }
    Ok(reports)
}

pub fn cmd_monitor(
    model: &LoadedModel,
    cache_path: &Path,
    premission_path: &Path,
    trace_path: &Path,
    mission: Option<u64>,
    cfg: &RunConfig,
    out: &Path,
) -> Result<Outcome, ShellError> {
    let cache = load_cache(cache_path)?;
    let pre: PremissionFile = serde_json::from_str(&read_text(premission_path)?).map_err(|e| {
        ShellError::Parse {
            line: Some(e.line()),
            message: e.to_string(),
        }
        .in_file(premission_path)
    })?;
    if pre.model_hash != model.hash {
        return Err(ShellError::Validation(format!(
            "{} was computed for a different model",
            premission_path.display()
        )));
    }
    let trace = parse_trace(&read_text(trace_path)?).map_err(|e| e.in_file(trace_path))?;
    let id = match mission {
        Some(id) => id,
        None => *trace
            .mission_ids()
            .last()
            .ok_or_else(|| ShellError::Chain("trace has no events".into()))?,
    };
    let events = trace.events_of(id);
    let config = MonitorConfig {
        alarm: cfg.alarm.clone(),
        cbi_box: cfg.cbi_box,
    };
    let reports = replay(model, &cache, &pre.report, &events, config)?;

    write_text(&out.join("series.csv"), &emit_series(&reports))?;
    write_text(&out.join("verdicts.jsonl"), &jsonl(reports.iter().flat_map(|r| r.verdicts.iter()))?)?;
    write_text(&out.join("conflicts.jsonl"), &jsonl(reports.iter().map(|r| &r.conflict))?)?;

    let last = reports.last().expect("snapshot present");
    let mut text = format!("mission {id}: {} events, final state {}\n", events.len(), model.state_names[&last.state]);
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &reports {
        let k = match r.conflict.classification {
            Classification::None => "none",
            Classification::KnownUnknown(_) => "known-unknown",
            Classification::UnknownUnknown(_) => "unknown-unknown",
        };
        *tally.entry(k).or_default() += 1;
    }
    for (k, n) in &tally {
        let _ = writeln!(text, "conflict {k}: {n} step(s)");
    }
    for w in reports.iter().flat_map(|r| &r.warnings) {
        let _ = writeln!(text, "warning: {w}");
    }
    let mut violated = false;
    for v in &last.verdicts {
        violated |= v.status == Status::Violated;
        let _ = writeln!(
            text,
            "{} in [{}, {}]: {:?}, {:?}",
            v.query,
            rational::format_sig(&v.interval.lo),
            rational::format_sig(&v.interval.hi),
            v.status,
            v.hint
        );
    }
    let _ = writeln!(text, "series -> {}", out.join("series.csv").display());
    Ok(Outcome {
        stdout: text,
        code: if violated { exit::THRESHOLD } else { exit::OK },
    })
}
