//! Ground-truth trace generation: single missions, seeded campaigns and the
//! per-row transition tallies that feed the estimators.
//!
//! Each mission draws from its own ChaCha20 stream (`seed`, stream =
//! mission id), so missions are independent and any one of them can be
//! regenerated on its own.

use std::collections::BTreeMap;

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmc::{ActionLabel, Dtmc, DtmcError, StateId};
use crate::estimators::TransitionCounts;
use crate::interval::Interval;
use crate::ratfunc::{ParamId, Valuation};
use crate::rational::{self, Rational};

/// Identifier recorded in campaign headers.
pub const GENERATOR_ID: &str = "chacha20/stream=mission";

pub const DEFAULT_STEP_CAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] DtmcError),
    #[error("ground truth does not give a stochastic chain: {0}")]
    InvalidTruth(String),
    #[error("ground truth is missing parameter `{0}`")]
    MissingTruth(ParamId),
    #[error("policy weight {0} is outside [0, 1]")]
    InvalidGamma(String),
    #[error("a policy weight was given but the truth names no randomized-policy state")]
    NoPolicyState,
    #[error("broken event chain in mission {mission} at step {step}")]
    BrokenChain { mission: u64, step: u64 },
}

/// True parameter values and the state whose two-action policy is
/// parameterized by the per-mission weight `gamma`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub values: Valuation,
    pub policy_state: Option<StateId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub mission: u64,
    pub step: u64,
    pub from: StateId,
    pub action: ActionLabel,
    pub to: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mission {
    pub id: u64,
    #[serde(with = "rational::serde_text")]
    pub gamma: Rational,
    pub events: Vec<TraceEvent>,
    pub terminal: StateId,
    pub truncated: bool,
}

impl Mission {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub step_cap: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

type Choice = (ActionLabel, Vec<(StateId, f64)>);

/// Float sampling tables of one concrete chain: per state, the cumulative
/// action weights and each action's cumulative destination distribution.
struct Sampler {
    initial: StateId,
    absorbing: BTreeMap<StateId, bool>,
    table: BTreeMap<StateId, (Vec<f64>, Vec<Choice>)>,
}

fn cumulative<T>(items: impl IntoIterator<Item = (T, f64)>) -> (Vec<f64>, Vec<T>) {
    let mut acc = 0.0;
    let mut cum = Vec::new();
    let mut out = Vec::new();
    for (item, p) in items {
        if p > 0.0 {
            acc += p;
            cum.push(acc);
            out.push(item);
        }
    }
    (cum, out)
}

fn pick(cum: &[f64], u: f64) -> usize {
    let total = cum.last().copied().unwrap_or(1.0);
    cum.iter().position(|c| u * total < *c).unwrap_or(cum.len().saturating_sub(1))
}

impl Sampler {
    fn new(model: &Dtmc, values: &Valuation) -> Result<Self, SimError> {
        let violations = model.validate(std::slice::from_ref(values));
        if !violations.is_empty() {
            let text = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
            return Err(SimError::InvalidTruth(text));
        }
        let mut table = BTreeMap::new();
        let mut absorbing = BTreeMap::new();
        for s in model.states() {
            absorbing.insert(s.id, model.is_absorbing(s.id));
            let mut choices = Vec::new();
            for row in model.actions(s.id) {
                let dist = row.distribution(values).map_err(|e| SimError::InvalidTruth(e.to_string()))?;
                let (cum, dests) = cumulative(dist.iter().map(|(to, p)| (*to, rational::to_f64(p))));
                choices.push(((row.action.clone(), dests.into_iter().zip(cum).collect()), rational::to_f64(&row.weight)));
            }
            let (cum, rows) = cumulative(choices);
            table.insert(s.id, (cum, rows));
        }
        Ok(Sampler {
            initial: model.initial(),
            absorbing,
            table,
        })
    }

    fn step(&self, from: StateId, rng: &mut ChaCha20Rng) -> (ActionLabel, StateId) {
        let (cum, rows) = &self.table[&from];
        let (action, dests) = &rows[pick(cum, rng.random::<f64>())];
        let cum: Vec<f64> = dests.iter().map(|d| d.1).collect();
        let to = dests[pick(&cum, rng.random::<f64>())].0;
        (action.clone(), to)
    }

    fn run(&self, id: u64, gamma: Rational, cap: u64, rng: &mut ChaCha20Rng) -> Mission {
        let mut events = Vec::new();
        let mut at = self.initial;
        while !self.absorbing[&at] && (events.len() as u64) < cap {
            let (action, to) = self.step(at, rng);
            events.push(TraceEvent {
                mission: id,
                step: events.len() as u64 + 1,
                from: at,
                action,
                to,
            });
            at = to;
        }
        Mission {
            id,
            gamma,
            truncated: !self.absorbing[&at],
            events,
            terminal: at,
        }
    }
}

fn mission_rng(seed: u64, mission: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(mission);
    rng
}

fn concrete(model: &Dtmc, truth: &GroundTruth, gamma: Option<&Rational>) -> Result<Dtmc, SimError> {
    if let Some(p) = model.params().keys().find(|p| !truth.values.contains_key(*p)) {
        return Err(SimError::MissingTruth(p.clone()));
    }
    let Some(g) = gamma else {
        return Ok(model.clone());
    };
    if !rational::in_unit_interval(g) {
        return Err(SimError::InvalidGamma(rational::to_fraction_string(g)));
    }
    let state = truth.policy_state.ok_or(SimError::NoPolicyState)?;
    Ok(model.with_policy_weights(state, &[g.clone(), Rational::one() - g])?)
}

/// The policy weight of the randomized state as declared in the model, or 1
/// when there is none.
fn declared_gamma(model: &Dtmc, truth: &GroundTruth) -> Rational {
    truth
        .policy_state
        .and_then(|s| model.actions(s).first().map(|r| r.weight.clone()))
        .unwrap_or_else(Rational::one)
}

/// Samples one path from the initial state until absorption or the step cap.
/// `gamma` overrides the randomized policy's first action weight.
pub fn simulate_mission(
    model: &Dtmc,
    truth: &GroundTruth,
    mission: u64,
    gamma: Option<&Rational>,
    config: &SimConfig,
    seed: u64,
) -> Result<Mission, SimError> {
    let m = concrete(model, truth, gamma)?;
    let sampler = Sampler::new(&m, &truth.values)?;
    let g = gamma.cloned().unwrap_or_else(|| declared_gamma(model, truth));
    Ok(sampler.run(mission, g, config.step_cap, &mut mission_rng(seed, mission)))
}

/// Exact rational drawn uniformly from a 2^32-point grid on `range`.
fn draw_gamma(range: &Interval, rng: &mut ChaCha20Rng) -> Rational {
    let k = Rational::from_integer(rng.random::<u32>().into());
    let scale = Rational::from_integer((1u64 << 32).into());
    &range.lo + range.width() * k / scale
}

/// Missions `1..=n`, each with its own uniformly drawn policy weight.
pub fn generate_campaign(
    model: &Dtmc,
    truth: &GroundTruth,
    n_missions: u64,
    gamma_range: &Interval,
    config: &SimConfig,
    seed: u64,
) -> Result<Vec<Mission>, SimError> {
    if !rational::in_unit_interval(&gamma_range.lo) || !rational::in_unit_interval(&gamma_range.hi) {
        return Err(SimError::InvalidGamma(gamma_range.to_string()));
    }
    (1..=n_missions)
        .map(|id| {
            let mut rng = mission_rng(seed, id);
            let gamma = draw_gamma(gamma_range, &mut rng);
            let m = concrete(model, truth, Some(&gamma))?;
            Ok(Sampler::new(&m, &truth.values)?.run(id, gamma, config.step_cap, &mut rng))
        })
        .collect()
}

/// The mission with the most events (earliest id on ties).
pub fn select_longest(missions: &[Mission]) -> Option<&Mission> {
    missions.iter().rev().max_by_key(|m| m.events.len())
}

/// Simulates `candidates` missions with fixed `gamma` and ids starting at
/// `first_id`, and keeps the longest one, renumbered to `first_id`.
pub fn showcase_mission(
    model: &Dtmc,
    truth: &GroundTruth,
    gamma: &Rational,
    first_id: u64,
    candidates: u64,
    config: &SimConfig,
    seed: u64,
) -> Result<Mission, SimError> {
    let missions = (0..candidates.max(1))
        .map(|k| simulate_mission(model, truth, first_id + k, Some(gamma), config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = select_longest(&missions).expect("at least one candidate").clone();
    best.id = first_id;
    for e in &mut best.events {
        e.mission = first_id;
    }
    Ok(best)
}

/// Observed transition tallies, per `(state, action)` and pooled per state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tallies {
    pub per_action: BTreeMap<(StateId, ActionLabel), TransitionCounts>,
    pub pooled: BTreeMap<StateId, TransitionCounts>,
}

impl Tallies {
    pub fn record(&mut self, e: &TraceEvent) {
        self.per_action.entry((e.from, e.action.clone())).or_default().add(e.to);
        self.pooled.entry(e.from).or_default().add(e.to);
    }

    pub fn action(&self, state: StateId, action: &ActionLabel) -> Option<&TransitionCounts> {
        self.per_action.get(&(state, action.clone()))
    }

    pub fn is_empty(&self) -> bool {
        self.pooled.is_empty()
    }
}

/// Checks that consecutive events chain within each mission.
pub fn check_chain(events: &[TraceEvent]) -> Result<(), SimError> {
    for w in events.windows(2) {
        if w[0].mission == w[1].mission && w[0].to != w[1].from {
            return Err(SimError::BrokenChain {
                mission: w[1].mission,
                step: w[1].step,
            });
        }
    }
    Ok(())
}

/// Tallies of one ordered event stream, checking that it chains.
pub fn count_events(events: &[TraceEvent]) -> Result<Tallies, SimError> {
    check_chain(events)?;
    let mut t = Tallies::default();
    events.iter().for_each(|e| t.record(e));
    Ok(t)
}

pub fn count_transitions(missions: &[Mission]) -> Result<Tallies, SimError> {
    let mut t = Tallies::default();
    for m in missions {
        check_chain(&m.events)?;
        if let Some(bad) = m.events.iter().find(|e| e.mission != m.id) {
            return Err(SimError::BrokenChain {
                mission: m.id,
                step: bad.step,
            });
        }
        m.events.iter().for_each(|e| t.record(e));
    }
    Ok(t)
}

/// A sensor fault: once the mission first moves into `actual`, the robot
/// keeps believing it is in `believed` for `duration` steps. It acts with
/// `believed`'s policy and only ever sees itself loop; afterwards the sensor
/// recovers and reports the move into `actual`, and the mission continues
/// from there with the true dynamics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MislabelFault {
    pub believed: StateId,
    pub actual: StateId,
    pub duration: u64,
}

/// [`simulate_mission`] with a [`MislabelFault`] injected into the trace.
pub fn simulate_with_mislabel(
    model: &Dtmc,
    truth: &GroundTruth,
    mission: u64,
    gamma: Option<&Rational>,
    fault: &MislabelFault,
    config: &SimConfig,
    seed: u64,
) -> Result<Mission, SimError> {
    let m = concrete(model, truth, gamma)?;
    let sampler = Sampler::new(&m, &truth.values)?;
    let mut rng = mission_rng(seed, mission);
    let (weights, actions) = &sampler.table[&fault.believed];
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut at = sampler.initial;
    let mut faulted = false;
    let push = |events: &mut Vec<TraceEvent>, from, action, to| {
        events.push(TraceEvent {
            mission,
            step: events.len() as u64 + 1,
            from,
            action,
            to,
        })
    };
    while !sampler.absorbing[&at] && (events.len() as u64) < config.step_cap {
        let (action, to) = sampler.step(at, &mut rng);
        if !faulted && at == fault.believed && to == fault.actual {
            faulted = true;
            push(&mut events, at, action, fault.believed);
            for _ in 1..fault.duration {
                let a = actions[pick(weights, rng.random::<f64>())].0.clone();
                push(&mut events, fault.believed, a, fault.believed);
            }
            let a = actions[pick(weights, rng.random::<f64>())].0.clone();
            push(&mut events, fault.believed, a, fault.actual);
        } else {
            push(&mut events, at, action, to);
        }
        at = to;
    }
    Ok(Mission {
        id: mission,
        gamma: gamma.cloned().unwrap_or_else(|| declared_gamma(model, truth)),
        truncated: !sampler.absorbing[&at],
        events,
        terminal: at,
    })
}

/// Campaign header: everything needed to regenerate the trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignHeader {
    pub seed: u64,
    pub generator: String,
    pub gamma_distribution: String,
    pub step_cap: u64,
    pub gammas: BTreeMap<u64, String>,
    pub truth: BTreeMap<String, String>,
}

impl CampaignHeader {
    pub fn new(seed: u64, truth: &GroundTruth, config: &SimConfig, missions: &[Mission]) -> Self {
        CampaignHeader {
            seed,
            generator: GENERATOR_ID.to_string(),
            gamma_distribution: "uniform".to_string(),
            step_cap: config.step_cap,
            gammas: missions
                .iter()
                .map(|m| (m.id, rational::to_fraction_string(&m.gamma)))
                .collect(),
            truth: truth
                .values
                .iter()
                .map(|(p, v)| (p.to_string(), rational::to_fraction_string(v)))
                .collect(),
        }
    }
}
