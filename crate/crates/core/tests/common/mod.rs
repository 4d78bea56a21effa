//! Shared fixtures and oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paraguard::dtmc::{ActionEntry, ActionLabel, Dtmc, LayerTag, State, StateId};
use paraguard::interval::Interval;
use paraguard::ratfunc::{ParamId, RationalFunction, Valuation};
use paraguard::rational::{ratio, to_f64};
use paraguard::shell::{load_model, LoadedModel};

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/models").join(name)
}

pub fn uuv() -> LoadedModel {
    load_model(&model_path("uuv-fig1.toml")).expect("uuv model loads")
}

pub fn tiny() -> LoadedModel {
    load_model(&model_path("tiny.toml")).expect("tiny model loads")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest value a random-chain parameter may take; three explicit entries
/// never exceed a row.
pub const PARAM_HI: (i64, i64) = (1, 4);

/// A random validating parametric chain: states `1..=n`, state `n - 1`
/// absorbing with label `goal`, state `n` an absorbing sink. Every other
/// state has one action with one or two explicit entries (parameters or
/// constants) and a remainder, so at most three successors.
pub fn random_chain(rng: &mut impl Rng, n_states: u32, n_params: usize) -> Dtmc {
    random_chain_with(rng, n_states, n_params, 2)
}

/// [`random_chain`] with up to `max_explicit` explicit entries per row.
pub fn random_chain_with(rng: &mut impl Rng, n_states: u32, n_params: usize, max_explicit: usize) -> Dtmc {
    assert!(n_states >= 3 && n_params >= 1);
    let params: Vec<ParamId> = (0..n_params).map(|i| ParamId::new(format!("p{i}"))).collect();
    let goal = n_states - 1;
    let states: Vec<State> = (1..=n_states)
        .map(|i| State {
            id: StateId(i),
            name: format!("S{i}"),
            labels: if i == goal { BTreeSet::from(["goal".to_string()]) } else { BTreeSet::new() },
            layer: if i == n_states { LayerTag::Failure { catastrophic: false } } else { LayerTag::Normal },
        })
        .collect();
    let mut actions = BTreeMap::new();
    for s in 1..goal {
        let mut entries = BTreeMap::new();
        let explicit = rng.random_range(1..=max_explicit);
        for _ in 0..explicit {
            let to = StateId(rng.random_range(1..=n_states));
            let e = if rng.random_bool(0.6) {
                ActionEntry::Param(params[rng.random_range(0..n_params)].clone())
            } else {
                ActionEntry::Constant(ratio(rng.random_range(1..=5), 20))
            };
            entries.insert(to, e);
        }
        let rest = loop {
            let to = StateId(rng.random_range(1..=n_states));
            if !entries.contains_key(&to) {
                break to;
            }
        };
        entries.insert(rest, ActionEntry::Remainder);
        actions.insert(
            StateId(s),
            vec![paraguard::dtmc::ActionRow {
                action: ActionLabel::new("go"),
                weight: ratio(1, 1),
                entries,
            }],
        );
    }
    let range = Interval::new(ratio(1, 100), ratio(PARAM_HI.0, PARAM_HI.1));
    let declared = params.iter().map(|p| (p.clone(), range.clone())).collect();
    Dtmc::new(states, StateId(1), actions, declared).expect("random chain builds")
}

/// A valuation on a 1/1000 grid inside every declared range.
pub fn random_valuation(rng: &mut impl Rng, model: &Dtmc) -> Valuation {
    let mut v = Valuation::new();
    for (p, iv) in model.params() {
        let lo = (to_f64(&iv.lo) * 1000.0).ceil() as i64;
        let hi = (to_f64(&iv.hi) * 1000.0).floor() as i64;
        v.insert(p.clone(), ratio(rng.random_range(lo..=hi), 1000));
    }
    v
}

/// Reachability of `target` by Gauss-Seidel value iteration on the concrete
/// chain at `valuation`, after removing the states that cannot reach it.
pub fn value_iteration(model: &Dtmc, valuation: &Valuation, target: &BTreeSet<StateId>) -> BTreeMap<StateId, f64> {
    IterationOracle::new(model, target).solve(valuation)
}

/// [`value_iteration`] with the parametric matrix built once, for evaluating
/// one chain at many valuations.
pub struct IterationOracle {
    states: Vec<StateId>,
    rows: Vec<Vec<(usize, RationalFunction)>>,
    target: Vec<bool>,
}

impl IterationOracle {
    pub fn new(model: &Dtmc, target: &BTreeSet<StateId>) -> Self {
        let matrix = model.to_parametric_matrix().expect("matrix");
        let states: Vec<StateId> = matrix.rows.keys().copied().collect();
        let index = |s: &StateId| states.binary_search(s).expect("state in matrix");
        let rows = matrix
            .rows
            .values()
            .map(|r| r.iter().map(|(t, f)| (index(t), f.clone())).collect())
            .collect();
        let target = states.iter().map(|s| target.contains(s)).collect();
        IterationOracle { states, rows, target }
    }

    pub fn solve(&self, valuation: &Valuation) -> BTreeMap<StateId, f64> {
        let lookup = |p: &ParamId| to_f64(&valuation[p]);
        let rows: Vec<Vec<(usize, f64)>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|(t, f)| (*t, f.evaluate_f64(&lookup))).filter(|(_, p)| *p > 0.0).collect())
            .collect();
        // backward reachability through positive edges
        let mut can = self.target.clone();
        loop {
            let mut changed = false;
            for (s, r) in rows.iter().enumerate() {
                if !can[s] && r.iter().any(|(t, _)| can[*t]) {
                    can[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut x: Vec<f64> = self.target.iter().map(|t| if *t { 1.0 } else { 0.0 }).collect();
        for _ in 0..1_000_000 {
            let mut delta: f64 = 0.0;
            for (s, r) in rows.iter().enumerate() {
                if self.target[s] || !can[s] {
                    continue;
                }
                let v: f64 = r.iter().map(|(t, p)| p * x[*t]).sum();
                delta = delta.max((v - x[s]).abs());
                x[s] = v;
            }
            if delta < 1e-15 {
                break;
            }
        }
        self.states.iter().copied().zip(x).collect()
    }
}

/// Empirical frequency check: `k` of `n` within `sigmas` binomial standard
/// errors of `p`.
pub fn within_se(k: u64, n: u64, p: f64, sigmas: f64) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    ((k as f64 / n as f64) - p).abs() <= sigmas * se
}
