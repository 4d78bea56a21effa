//! Simulator and runtime monitor: trace well-formedness, determinism, and
//! the monitor's per-event contract.

mod common;

use proptest::prelude::*;

use common::*;
use paraguard::dtmc::ActionLabel;
use paraguard::interval::Interval;
use paraguard::monitor::{
    premission_verify, ActionHint, ClosedFormCache, Monitor, MonitorConfig, MonitorError, PremissionReport, Status,
};
use paraguard::paramcheck::{elimination_count, BoundOptions};
use paraguard::rational::int;
use paraguard::shell::trace::{parse_trace, render_trace};
use paraguard::shell::{LoadedModel, RunConfig};
use paraguard::simulator::{
    check_chain, count_transitions, generate_campaign, simulate_mission, simulate_with_mislabel, CampaignHeader,
    MislabelFault, SimConfig, TraceEvent,
};

fn sim() -> SimConfig {
    SimConfig {
        step_cap: RunConfig::default().step_cap,
    }
}

struct Fixture {
    model: LoadedModel,
    cache: ClosedFormCache,
    report: PremissionReport,
}

impl Fixture {
    fn uuv(missions: u64) -> Self {
        let model = uuv();
        let cfg = RunConfig::default();
        let truth = model.truth.clone().unwrap();
        let campaign = generate_campaign(&model.dtmc, &truth, missions, &cfg.gamma_range, &sim(), cfg.seed).unwrap();
        let opts = BoundOptions::default();
        let cache = ClosedFormCache::build(&model.dtmc, &model.queries, &model.hash, &opts).unwrap();
        let report = premission_verify(
            &model.dtmc,
            &model.priors,
            &model.queries,
            &cache,
            &count_transitions(&campaign).unwrap(),
            cfg.cbi_box,
            &opts,
        )
        .unwrap();
        Fixture { model, cache, report }
    }

    fn monitor(&self) -> Monitor {
        Monitor::new(
            &self.model.dtmc,
            &self.model.queries,
            &self.cache,
            &self.report,
            MonitorConfig::default(),
            BoundOptions::default(),
        )
        .unwrap()
    }

    fn event(&self, step: u64, from: &str, action: &str, to: &str) -> TraceEvent {
        TraceEvent {
            mission: 1,
            step,
            from: self.model.state_named(from).unwrap(),
            action: ActionLabel::new(action),
            to: self.model.state_named(to).unwrap(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn missions_are_chained_and_follow_the_support(seed in any::<u64>(), id in 1u64..1000) {
        let model = uuv();
        let truth = model.truth.clone().unwrap();
        let m = simulate_mission(&model.dtmc, &truth, id, None, &sim(), seed).unwrap();
        prop_assert!(check_chain(&m.events).is_ok());
        prop_assert_eq!(m.events.first().map(|e| e.from), Some(model.dtmc.initial()));
        for (i, e) in m.events.iter().enumerate() {
            prop_assert_eq!(e.step, i as u64 + 1);
            let row = model.dtmc.action(e.from, &e.action).expect("a declared action");
            prop_assert!(row.entries.contains_key(&e.to), "{} -> {} is not in the row", e.from, e.to);
        }
        prop_assert_eq!(m.truncated, !model.dtmc.is_absorbing(m.terminal));
    }

    #[test]
    fn simulation_is_a_function_of_seed_and_mission(seed in any::<u64>(), id in 1u64..1000) {
        let model = uuv();
        let truth = model.truth.clone().unwrap();
        let a = simulate_mission(&model.dtmc, &truth, id, None, &sim(), seed).unwrap();
        let b = simulate_mission(&model.dtmc, &truth, id, None, &sim(), seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn traces_round_trip_through_json_lines(seed in any::<u64>()) {
        let model = uuv();
        let truth = model.truth.clone().unwrap();
        let cfg = RunConfig::default();
        let missions = generate_campaign(&model.dtmc, &truth, 3, &cfg.gamma_range, &sim(), seed).unwrap();
        let header = CampaignHeader::new(seed, &truth, &sim(), &missions);
        let text = render_trace(Some(&header), &missions).unwrap();
        let back = parse_trace(&text).unwrap();
        let events: Vec<TraceEvent> = missions.iter().flat_map(|m| m.events.clone()).collect();
        prop_assert_eq!(back.mission_ids(), vec![1, 2, 3]);
        prop_assert_eq!(back.events, events);
    }
}

#[test]
fn campaigns_depend_on_the_seed() {
    let model = uuv();
    let truth = model.truth.clone().unwrap();
    let cfg = RunConfig::default();
    let a = generate_campaign(&model.dtmc, &truth, 5, &cfg.gamma_range, &sim(), 1).unwrap();
    let b = generate_campaign(&model.dtmc, &truth, 5, &cfg.gamma_range, &sim(), 1).unwrap();
    let c = generate_campaign(&model.dtmc, &truth, 5, &cfg.gamma_range, &sim(), 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.iter().all(|m| cfg.gamma_range.contains(&m.gamma)));
}

#[test]
fn mislabelled_missions_loop_on_the_believed_state() {
    let model = uuv();
    let truth = model.truth.clone().unwrap();
    let (s1, s4) = (model.state_named("S1").unwrap(), model.state_named("S4").unwrap());
    let fault = MislabelFault {
        believed: s1,
        actual: s4,
        duration: 50,
    };
    let m = simulate_with_mislabel(&model.dtmc, &truth, 1, None, &fault, &sim(), 5).unwrap();
    assert!(check_chain(&m.events).is_ok());
    // the vehicle sees only S1 self-loops for the fault's duration
    let longest_loop = m
        .events
        .split(|e| !(e.from == s1 && e.to == s1))
        .map(|run| run.len())
        .max()
        .unwrap_or(0);
    assert!(longest_loop >= 50, "longest S1 self-loop run {longest_loop}");
}

#[test]
fn reaching_success_satisfies_the_completion_query() {
    let f = Fixture::uuv(5);
    let mut m = f.monitor();
    m.ingest(&f.event(1, "S1", "speed-1", "S2")).unwrap();
    let r = m.ingest(&f.event(2, "S2", "finish", "S3")).unwrap();
    let r3 = r.verdicts.iter().find(|v| v.query == "R3").unwrap();
    assert_eq!(r3.interval, Interval::point(int(1)));
    assert_eq!(r3.status, Status::Satisfied);
}

#[test]
fn reaching_catastrophe_violates_and_aborts() {
    let f = Fixture::uuv(5);
    let mut m = f.monitor();
    m.ingest(&f.event(1, "S1", "speed-1", "S4")).unwrap();
    let r = m.ingest(&f.event(2, "S4", "safe-speed", "S6")).unwrap();
    let r4 = r.verdicts.iter().find(|v| v.query == "R4").unwrap();
    assert_eq!(r4.interval, Interval::point(int(1)));
    assert_eq!((r4.status, r4.hint), (Status::Violated, ActionHint::Abort));
}

#[test]
fn broken_chains_and_unknown_actions_are_rejected() {
    let f = Fixture::uuv(5);
    let mut m = f.monitor();
    let err = m.ingest(&f.event(1, "S2", "finish", "S3")).unwrap_err();
    assert!(matches!(err, MonitorError::ChainBreak { step: 1, .. }));
    let err = m.ingest(&f.event(1, "S1", "full-speed", "S2")).unwrap_err();
    assert!(matches!(err, MonitorError::UnknownTransition { step: 1, .. }));
    // a rejected event leaves the monitor where it was
    assert_eq!(m.current(), f.model.state_named("S1").unwrap());
    assert_eq!(m.step(), 0);
}

#[test]
fn replay_is_deterministic_and_needs_no_elimination() {
    let f = Fixture::uuv(10);
    let truth = f.model.truth.clone().unwrap();
    let mission = simulate_mission(&f.model.dtmc, &truth, 11, None, &sim(), 2019).unwrap();
    let before = elimination_count();
    let run = || {
        let mut m = f.monitor();
        mission.events.iter().map(|e| m.ingest(e).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(elimination_count(), before);
    assert_eq!(a, b);
    assert_eq!(a.len(), mission.len());
}

#[test]
fn a_cache_for_another_model_is_refused() {
    let f = Fixture::uuv(5);
    let mut stale = f.cache.clone();
    stale.model_hash = "0".repeat(64);
    assert!(matches!(stale.check_hash(&f.model.hash), Err(MonitorError::HashMismatch { .. })));
}
