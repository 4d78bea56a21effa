//! Parametric discrete-time Markov chains induced by a fixed policy.
//!
//! A model is declared per state as a list of actions, each with a policy
//! weight and its own next-state distribution. The induced chain mixes the
//! per-action probabilities by the policy weights. Keeping the per-action
//! rows around lets the simulator sample actions and lets the estimators
//! learn per-action parameters such as `a1` (speed-1) and `a2` (speed-2).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::ratfunc::{ParamId, RatFuncError, RationalFunction, Valuation};
use crate::rational::{self, Rational};

/// 1-based state index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionLabel(pub String);

impl ActionLabel {
    pub fn new(s: impl Into<String>) -> Self {
        ActionLabel(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerTag {
    Normal,
    Unsafe,
    Failure { catastrophic: bool },
}

impl LayerTag {
    pub fn is_catastrophic(&self) -> bool {
        matches!(self, LayerTag::Failure { catastrophic: true })
    }
}

/// A per-action probability: a known constant or an unknown parameter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Constant(Rational),
    Param(ParamId),
}

impl Atom {
    pub fn to_rational_function(&self) -> RationalFunction {
        match self {
            Atom::Constant(c) => RationalFunction::constant(c.clone()),
            Atom::Param(p) => RationalFunction::param(p.clone()),
        }
    }
}

/// An entry of an induced row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TransitionExpr {
    Constant(Rational),
    Param(ParamId),
    /// `Σ weight · atom`, the policy-induced mix.
    PolicyMix(Vec<(Rational, Atom)>),
    /// `1 - Σ siblings`.
    Complement(Vec<TransitionExpr>),
}

impl TransitionExpr {
    pub fn to_rational_function(&self) -> RationalFunction {
        match self {
            TransitionExpr::Constant(c) => RationalFunction::constant(c.clone()),
            TransitionExpr::Param(p) => RationalFunction::param(p.clone()),
            TransitionExpr::PolicyMix(terms) => terms.iter().fold(RationalFunction::zero(), |acc, (w, a)| {
                acc.add(&a.to_rational_function().scale(w))
            }),
            TransitionExpr::Complement(siblings) => siblings
                .iter()
                .fold(RationalFunction::one(), |acc, s| acc.sub(&s.to_rational_function())),
        }
    }

    pub fn evaluate(&self, valuation: &Valuation) -> Result<Rational, RatFuncError> {
        self.to_rational_function().evaluate(valuation)
    }

    pub fn params(&self) -> BTreeSet<ParamId> {
        self.to_rational_function().variables()
    }
}

/// An entry of a per-action row as written in a model.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ActionEntry {
    Constant(Rational),
    Param(ParamId),
    /// Whatever probability the other entries of the row leave over.
    Remainder,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionRow {
    pub action: ActionLabel,
    pub weight: Rational,
    pub entries: BTreeMap<StateId, ActionEntry>,
}

impl ActionRow {
    /// Probabilities of this action's next states at a valuation, with the
    /// remainder filled in.
    pub fn distribution(&self, valuation: &Valuation) -> Result<BTreeMap<StateId, Rational>, RatFuncError> {
        let mut out = BTreeMap::new();
        let mut used = Rational::zero();
        let mut remainder = None;
        for (to, e) in &self.entries {
            let p = match e {
                ActionEntry::Constant(c) => c.clone(),
                ActionEntry::Param(p) => valuation
                    .get(p)
                    .cloned()
                    .ok_or_else(|| RatFuncError::MissingParameter(p.clone()))?,
                ActionEntry::Remainder => {
                    remainder = Some(*to);
                    continue;
                }
            };
            used += &p;
            out.insert(*to, p);
        }
        if let Some(to) = remainder {
            out.insert(to, Rational::one() - used);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub id: StateId,
    pub name: String,
    pub labels: BTreeSet<String>,
    pub layer: LayerTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtmcError {
    #[error("policy has no actions")]
    EmptyPolicy,
    #[error("policy weights sum to {0}, not 1")]
    WeightSum(String),
    #[error("negative policy weight")]
    NegativeWeight,
    #[error("{policy} policy weights but {probs} per-action probabilities")]
    LengthMismatch { policy: usize, probs: usize },
    #[error("duplicate state {0}")]
    DuplicateState(StateId),
    #[error("state {0} is not declared")]
    UnknownState(StateId),
    #[error("state {0}: action `{1}` has more than one remainder entry")]
    MultipleRemainders(StateId, ActionLabel),
    #[error("state {state}: destination {to} is a remainder for some actions but not others")]
    MixedRemainder { state: StateId, to: StateId },
    #[error("parameter `{0}` is used but not declared")]
    UndeclaredParameter(ParamId),
    #[error("model does not validate: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Policy-induced transition `Σ_a π_a · Pr(s_j | s_i, a)`.
pub fn induce_transition(policy: &[(ActionLabel, Rational)], per_action: &[Atom]) -> Result<TransitionExpr, DtmcError> {
    if policy.is_empty() {
        return Err(DtmcError::EmptyPolicy);
    }
    if policy.len() != per_action.len() {
        return Err(DtmcError::LengthMismatch {
            policy: policy.len(),
            probs: per_action.len(),
        });
    }
    if policy.iter().any(|(_, w)| w < &Rational::zero()) {
        return Err(DtmcError::NegativeWeight);
    }
    let total: Rational = policy.iter().map(|(_, w)| w.clone()).sum();
    if !total.is_one() {
        return Err(DtmcError::WeightSum(rational::to_fraction_string(&total)));
    }
    let terms: Vec<(Rational, Atom)> = policy
        .iter()
        .zip(per_action)
        .filter(|((_, w), _)| !w.is_zero())
        .map(|((_, w), a)| (w.clone(), a.clone()))
        .collect();
    if terms.len() == 1 && terms[0].0.is_one() {
        return Ok(match &terms[0].1 {
            Atom::Constant(c) => TransitionExpr::Constant(c.clone()),
            Atom::Param(p) => TransitionExpr::Param(p.clone()),
        });
    }
    if terms.iter().all(|(_, a)| matches!(a, Atom::Constant(_))) {
        let sum = terms
            .iter()
            .map(|(w, a)| match a {
                Atom::Constant(c) => w * c,
                Atom::Param(_) => unreachable!(),
            })
            .sum();
        return Ok(TransitionExpr::Constant(sum));
    }
    Ok(TransitionExpr::PolicyMix(terms))
}

/// A structural or stochastic defect found by [`Dtmc::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingInitial(StateId),
    RowSum { state: StateId, valuation: usize, sum: Rational },
    OutOfRange { from: StateId, to: StateId, valuation: usize, value: Rational },
    NotAbsorbing { state: StateId, to: StateId },
    Evaluation { from: StateId, to: StateId, error: RatFuncError },
    EmptyBox(ParamId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingInitial(s) => write!(f, "initial state {s} does not exist"),
            Violation::RowSum { state, valuation, sum } => write!(
                f,
                "row {state} sums to {} at reference valuation #{valuation}",
                rational::to_fraction_string(sum)
            ),
            Violation::OutOfRange { from, to, valuation, value } => write!(
                f,
                "P({from}, {to}) = {} is outside [0, 1] at reference valuation #{valuation}",
                rational::to_fraction_string(value)
            ),
            Violation::NotAbsorbing { state, to } => {
                write!(f, "failure state {state} is not absorbing (edge to {to})")
            }
            Violation::Evaluation { from, to, error } => write!(f, "P({from}, {to}): {error}"),
            Violation::EmptyBox(p) => write!(f, "parameter `{p}` has an empty box"),
        }
    }
}

pub type Row = BTreeMap<StateId, TransitionExpr>;

/// A parametric DTMC with its policy-level structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dtmc {
    states: BTreeMap<StateId, State>,
    initial: StateId,
    actions: BTreeMap<StateId, Vec<ActionRow>>,
    rows: BTreeMap<StateId, Row>,
    params: BTreeMap<ParamId, Interval>,
}

impl Dtmc {
    /// Builds the induced chain. States without actions become absorbing
    /// (a single `stay` action with a self-loop of 1). Every state also gets
    /// the label `s=<index>`.
    pub fn new(
        states: Vec<State>,
        initial: StateId,
        actions: BTreeMap<StateId, Vec<ActionRow>>,
        params: BTreeMap<ParamId, Interval>,
    ) -> Result<Self, DtmcError> {
        let mut by_id = BTreeMap::new();
        for mut s in states {
            s.labels.insert(format!("s={}", s.id.0));
            let id = s.id;
            if by_id.insert(id, s).is_some() {
                return Err(DtmcError::DuplicateState(id));
            }
        }
        let mut actions = actions;
        for (s, rows) in &actions {
            if !by_id.contains_key(s) {
                return Err(DtmcError::UnknownState(*s));
            }
            for row in rows {
                let remainders = row.entries.values().filter(|e| **e == ActionEntry::Remainder).count();
                if remainders > 1 {
                    return Err(DtmcError::MultipleRemainders(*s, row.action.clone()));
                }
                for (to, e) in &row.entries {
                    if !by_id.contains_key(to) {
                        return Err(DtmcError::UnknownState(*to));
                    }
                    if let ActionEntry::Param(p) = e {
                        if !params.contains_key(p) {
                            return Err(DtmcError::UndeclaredParameter(p.clone()));
                        }
                    }
                }
            }
        }
        for id in by_id.keys() {
            actions.entry(*id).or_insert_with(|| {
                vec![ActionRow {
                    action: ActionLabel::new("stay"),
                    weight: Rational::one(),
                    entries: BTreeMap::from([(*id, ActionEntry::Constant(Rational::one()))]),
                }]
            });
        }
        let mut rows = BTreeMap::new();
        for (s, acts) in &actions {
            rows.insert(*s, induce_row(*s, acts)?);
        }
        Ok(Dtmc {
            states: by_id,
            initial,
            actions,
            rows,
            params,
        })
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.states.values()
    }

    pub fn state(&self, id: StateId) -> Option<&State> {
        self.states.get(&id)
    }

    pub fn state_by_name(&self, name: &str) -> Option<&State> {
        self.states.values().find(|s| s.name == name)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn row(&self, id: StateId) -> Option<&Row> {
        self.rows.get(&id)
    }

    pub fn rows(&self) -> &BTreeMap<StateId, Row> {
        &self.rows
    }

    pub fn actions(&self, id: StateId) -> &[ActionRow] {
        self.actions.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn action(&self, id: StateId, label: &ActionLabel) -> Option<&ActionRow> {
        self.actions(id).iter().find(|a| &a.action == label)
    }

    pub fn params(&self) -> &BTreeMap<ParamId, Interval> {
        &self.params
    }

    pub fn has_label(&self, id: StateId, label: &str) -> bool {
        self.states.get(&id).is_some_and(|s| s.labels.contains(label))
    }

    pub fn states_with_label(&self, label: &str) -> BTreeSet<StateId> {
        self.states.values().filter(|s| s.labels.contains(label)).map(|s| s.id).collect()
    }

    /// A state whose only successor is itself (checked structurally).
    pub fn is_absorbing(&self, id: StateId) -> bool {
        self.rows.get(&id).is_some_and(|row| {
            row.iter().all(|(to, e)| {
                if *to == id {
                    true
                } else {
                    matches!(e, TransitionExpr::Constant(c) if c.is_zero())
                }
            }) && row.get(&id).is_some_and(|e| e.to_rational_function().as_constant() == Some(Rational::one()))
        })
    }

    /// Same model with every weight of a two-action randomized policy at
    /// `state` replaced by `(gamma, 1 - gamma)`.
    pub fn with_policy_weights(&self, state: StateId, weights: &[Rational]) -> Result<Dtmc, DtmcError> {
        let mut actions = self.actions.clone();
        let rows = actions.get_mut(&state).ok_or(DtmcError::UnknownState(state))?;
        if rows.len() != weights.len() {
            return Err(DtmcError::LengthMismatch {
                policy: weights.len(),
                probs: rows.len(),
            });
        }
        for (row, w) in rows.iter_mut().zip(weights) {
            row.weight = w.clone();
        }
        let states = self.states.values().cloned().collect();
        Dtmc::new(states, self.initial, actions, self.params.clone())
    }

    /// Box corners plus the box midpoint, the default validation points.
    /// Corners are enumerated only up to 12 parameters; beyond that the
    /// lower corner, upper corner and midpoint are used.
    pub fn default_reference_valuations(&self) -> Vec<Valuation> {
        let params: Vec<(&ParamId, &Interval)> = self.params.iter().collect();
        let mut out = Vec::new();
        if params.len() <= 12 {
            for mask in 0u32..(1 << params.len()) {
                out.push(
                    params
                        .iter()
                        .enumerate()
                        .map(|(i, (p, iv))| {
                            let v = if mask & (1 << i) == 0 { iv.lo.clone() } else { iv.hi.clone() };
                            ((*p).clone(), v)
                        })
                        .collect(),
                );
            }
        } else {
            out.push(params.iter().map(|(p, iv)| ((*p).clone(), iv.lo.clone())).collect());
            out.push(params.iter().map(|(p, iv)| ((*p).clone(), iv.hi.clone())).collect());
        }
        out.push(params.iter().map(|(p, iv)| ((*p).clone(), iv.midpoint())).collect());
        out
    }

    /// Collects every defect; an empty list means the chain is stochastic at
    /// each reference valuation.
    pub fn validate(&self, reference_valuations: &[Valuation]) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.states.contains_key(&self.initial) {
            out.push(Violation::MissingInitial(self.initial));
        }
        for (p, iv) in &self.params {
            if iv.lo > iv.hi {
                out.push(Violation::EmptyBox(p.clone()));
            }
        }
        for (s, row) in &self.rows {
            let layer = self.states[s].layer;
            if matches!(layer, LayerTag::Failure { .. }) {
                for (to, e) in row {
                    if to != s && e.to_rational_function().as_constant() != Some(Rational::zero()) {
                        out.push(Violation::NotAbsorbing { state: *s, to: *to });
                    }
                }
            }
            let funcs: Vec<(StateId, RationalFunction)> =
                row.iter().map(|(to, e)| (*to, e.to_rational_function())).collect();
            let mut reported_sum = false;
            let mut reported_range = BTreeSet::new();
            let mut reported_eval = BTreeSet::new();
            for (k, val) in reference_valuations.iter().enumerate() {
                let mut sum = Rational::zero();
                let mut ok = true;
                for (to, f) in &funcs {
                    match f.evaluate(val) {
                        Ok(x) => {
                            if !rational::in_unit_interval(&x) && reported_range.insert(*to) {
                                out.push(Violation::OutOfRange {
                                    from: *s,
                                    to: *to,
                                    valuation: k,
                                    value: x.clone(),
                                });
                            }
                            sum += x;
                        }
                        Err(error) => {
                            ok = false;
                            if reported_eval.insert(*to) {
                                out.push(Violation::Evaluation { from: *s, to: *to, error });
                            }
                        }
                    }
                }
                if ok && !sum.is_one() && !reported_sum {
                    reported_sum = true;
                    out.push(Violation::RowSum { state: *s, valuation: k, sum });
                }
            }
        }
        out
    }

    /// Renders every row as rational functions after validating at the
    /// default reference valuations.
    pub fn to_parametric_matrix(&self) -> Result<ParametricMatrix, DtmcError> {
        let violations = self.validate(&self.default_reference_valuations());
        if !violations.is_empty() {
            return Err(DtmcError::Invalid(violations));
        }
        Ok(self.parametric_matrix_unchecked())
    }

    pub(crate) fn parametric_matrix_unchecked(&self) -> ParametricMatrix {
        ParametricMatrix {
            rows: self
                .rows
                .iter()
                .map(|(s, row)| {
                    let r = row
                        .iter()
                        .map(|(to, e)| (*to, e.to_rational_function()))
                        .filter(|(_, f)| !f.is_zero())
                        .collect();
                    (*s, r)
                })
                .collect(),
        }
    }
}

fn induce_row(state: StateId, acts: &[ActionRow]) -> Result<Row, DtmcError> {
    let policy: Vec<(ActionLabel, Rational)> = acts.iter().map(|a| (a.action.clone(), a.weight.clone())).collect();
    let dests: BTreeSet<StateId> = acts.iter().flat_map(|a| a.entries.keys().copied()).collect();
    let mut row = Row::new();
    let mut complement = None;
    for to in dests {
        let remainder_count = acts
            .iter()
            .filter(|a| a.entries.get(&to) == Some(&ActionEntry::Remainder))
            .count();
        if remainder_count == acts.len() {
            complement = Some(to);
            continue;
        }
        if remainder_count > 0 {
            return Err(DtmcError::MixedRemainder { state, to });
        }
        let atoms: Vec<Atom> = acts
            .iter()
            .map(|a| match a.entries.get(&to) {
                Some(ActionEntry::Constant(c)) => Atom::Constant(c.clone()),
                Some(ActionEntry::Param(p)) => Atom::Param(p.clone()),
                Some(ActionEntry::Remainder) => unreachable!(),
                None => Atom::Constant(Rational::zero()),
            })
            .collect();
        row.insert(to, induce_transition(&policy, &atoms)?);
    }
    if let Some(to) = complement {
        let siblings = row.values().cloned().collect();
        row.insert(to, TransitionExpr::Complement(siblings));
    }
    Ok(row)
}

/// Rows of rational functions, zero entries omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParametricMatrix {
    pub rows: BTreeMap<StateId, BTreeMap<StateId, RationalFunction>>,
}

impl ParametricMatrix {
    pub fn get(&self, from: StateId, to: StateId) -> RationalFunction {
        self.rows
            .get(&from)
            .and_then(|r| r.get(&to))
            .cloned()
            .unwrap_or_else(RationalFunction::zero)
    }

    /// Concrete matrix at a valuation.
    pub fn substitute(&self, valuation: &Valuation) -> Result<BTreeMap<StateId, BTreeMap<StateId, Rational>>, RatFuncError> {
        self.rows
            .iter()
            .map(|(s, row)| {
                let r = row
                    .iter()
                    .map(|(to, f)| Ok((*to, f.evaluate(valuation)?)))
                    .collect::<Result<BTreeMap<_, _>, RatFuncError>>()?;
                Ok((*s, r))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn label(s: &str) -> ActionLabel {
        ActionLabel::new(s)
    }

    fn state(i: u32, layer: LayerTag) -> State {
        State {
            id: StateId(i),
            name: format!("S{i}"),
            labels: BTreeSet::new(),
            layer,
        }
    }

    fn p(name: &str) -> ParamId {
        ParamId::new(name)
    }

    fn unit_box(names: &[&str]) -> BTreeMap<ParamId, Interval> {
        names
            .iter()
            .map(|n| (p(n), Interval::new(ratio(1, 100), ratio(1, 5))))
            .collect()
    }

    #[test]
    fn induce_speed_mix() {
        let policy = [(label("speed-1"), ratio(3, 4)), (label("speed-2"), ratio(1, 4))];
        let e = induce_transition(&policy, &[Atom::Param(p("a1")), Atom::Param(p("a2"))]).unwrap();
        assert_eq!(e.to_rational_function().to_string(), "3/4*a1 + 1/4*a2");
        let val = Valuation::from([(p("a1"), ratio(5, 100)), (p("a2"), ratio(3, 100))]);
        assert_eq!(e.evaluate(&val).unwrap(), ratio(45, 1000));
    }

    #[test]
    fn induce_deterministic_and_constant() {
        let det = induce_transition(&[(label("safe"), int(1))], &[Atom::Param(p("v"))]).unwrap();
        assert_eq!(det, TransitionExpr::Param(p("v")));
        let policy = [(label("a"), ratio(1, 2)), (label("b"), ratio(1, 2))];
        let c = induce_transition(&policy, &[Atom::Constant(ratio(1, 5)), Atom::Constant(ratio(2, 5))]).unwrap();
        assert_eq!(c, TransitionExpr::Constant(ratio(3, 10)));
    }

    #[test]
    fn induce_errors() {
        assert_eq!(induce_transition(&[], &[]), Err(DtmcError::EmptyPolicy));
        let bad = [(label("a"), ratio(1, 2)), (label("b"), ratio(1, 4))];
        assert!(matches!(
            induce_transition(&bad, &[Atom::Param(p("x")), Atom::Param(p("y"))]),
            Err(DtmcError::WeightSum(_))
        ));
        assert!(matches!(
            induce_transition(&[(label("a"), int(1))], &[]),
            Err(DtmcError::LengthMismatch { .. })
        ));
    }

    fn row(action: &str, weight: Rational, entries: Vec<(u32, ActionEntry)>) -> ActionRow {
        ActionRow {
            action: label(action),
            weight,
            entries: entries.into_iter().map(|(s, e)| (StateId(s), e)).collect(),
        }
    }

    #[test]
    fn row_sum_violation() {
        let states = vec![
            state(1, LayerTag::Normal),
            state(2, LayerTag::Normal),
            state(3, LayerTag::Normal),
        ];
        let acts = BTreeMap::from([(
            StateId(1),
            vec![row(
                "go",
                int(1),
                vec![(2, ActionEntry::Constant(ratio(3, 5))), (3, ActionEntry::Constant(ratio(3, 5)))],
            )],
        )]);
        let m = Dtmc::new(states, StateId(1), acts, BTreeMap::new()).unwrap();
        let v = m.validate(&m.default_reference_valuations());
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::RowSum { state: StateId(1), .. }));
    }

    #[test]
    fn failure_state_must_absorb() {
        let states = vec![state(1, LayerTag::Normal), state(2, LayerTag::Failure { catastrophic: true })];
        let acts = BTreeMap::from([
            (StateId(1), vec![row("go", int(1), vec![(2, ActionEntry::Constant(int(1)))])]),
            (
                StateId(2),
                vec![row(
                    "stuck",
                    int(1),
                    vec![(1, ActionEntry::Constant(ratio(1, 10))), (2, ActionEntry::Remainder)],
                )],
            ),
        ]);
        let m = Dtmc::new(states, StateId(1), acts, BTreeMap::new()).unwrap();
        let v = m.validate(&m.default_reference_valuations());
        assert_eq!(v, vec![Violation::NotAbsorbing { state: StateId(2), to: StateId(1) }]);
    }

    #[test]
    fn missing_initial_is_reported() {
        let m = Dtmc::new(vec![state(1, LayerTag::Normal)], StateId(9), BTreeMap::new(), BTreeMap::new()).unwrap();
        assert_eq!(m.validate(&[]), vec![Violation::MissingInitial(StateId(9))]);
    }

    fn s1_model() -> Dtmc {
        let states = vec![
            state(1, LayerTag::Normal),
            state(2, LayerTag::Normal),
            state(4, LayerTag::Unsafe),
        ];
        let acts = BTreeMap::from([(
            StateId(1),
            vec![
                row(
                    "speed-1",
                    ratio(3, 4),
                    vec![
                        (1, ActionEntry::Remainder),
                        (2, ActionEntry::Param(p("a1"))),
                        (4, ActionEntry::Param(p("b1"))),
                    ],
                ),
                row(
                    "speed-2",
                    ratio(1, 4),
                    vec![
                        (1, ActionEntry::Remainder),
                        (2, ActionEntry::Param(p("a2"))),
                        (4, ActionEntry::Param(p("b2"))),
                    ],
                ),
            ],
        )]);
        Dtmc::new(states, StateId(1), acts, unit_box(&["a1", "a2", "b1", "b2"])).unwrap()
    }

    #[test]
    fn complement_expands_to_one_minus_siblings() {
        let m = s1_model();
        let pm = m.to_parametric_matrix().unwrap();
        assert_eq!(pm.get(StateId(1), StateId(2)).to_string(), "3/4*a1 + 1/4*a2");
        assert_eq!(
            pm.get(StateId(1), StateId(1)).to_string(),
            "1 - 3/4*a1 - 1/4*a2 - 3/4*b1 - 1/4*b2"
        );
        assert_eq!(pm.get(StateId(2), StateId(2)), RationalFunction::one());
        assert!(m.is_absorbing(StateId(2)));
        assert!(!m.is_absorbing(StateId(1)));
        assert!(m.has_label(StateId(4), "s=4"));
    }

    #[test]
    fn mixed_remainder_rejected() {
        let states = vec![state(1, LayerTag::Normal), state(2, LayerTag::Normal)];
        let acts = BTreeMap::from([(
            StateId(1),
            vec![
                row("a", ratio(1, 2), vec![(1, ActionEntry::Remainder), (2, ActionEntry::Constant(ratio(1, 2)))]),
                row("b", ratio(1, 2), vec![(1, ActionEntry::Constant(ratio(1, 2))), (2, ActionEntry::Remainder)]),
            ],
        )]);
        assert!(matches!(
            Dtmc::new(states, StateId(1), acts, BTreeMap::new()),
            Err(DtmcError::MixedRemainder { .. })
        ));
    }

    #[test]
    fn policy_weights_can_be_overridden() {
        let m = s1_model().with_policy_weights(StateId(1), &[ratio(5, 8), ratio(3, 8)]).unwrap();
        let f = m.to_parametric_matrix().unwrap().get(StateId(1), StateId(2));
        assert_eq!(f.to_string(), "5/8*a1 + 3/8*a2");
    }
}
