//! Parametric model checking of reachability properties.
//!
//! Unbounded until is solved symbolically by state elimination and yields a
//! [`ClosedForm`]: one rational function of the parameters that later needs
//! only substitution. Next is read off the initial row. Bounded until is
//! evaluated numerically at a single valuation.

mod bounds;
mod sign;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmc::{Dtmc, DtmcError, ParametricMatrix, StateId};
use crate::interval::{FloatInterval, Interval};
use crate::ratfunc::{ParamId, Polynomial, RatFuncError, RationalFunction, Valuation};
use crate::rational::Rational;

pub use bounds::{analyze_monotonicity, bound_evaluate, BoundOptions, BoundResult};
pub use sign::{prove_ratfunc_sign, prove_sign, Sign};

static ELIMINATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of symbolic elimination runs performed by this process so far.
pub fn elimination_count() -> u64 {
    ELIMINATIONS.load(Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathForm {
    /// `constraint U target`; `None` means `true U target`.
    Until { constraint: Option<String> },
    BoundedUntil { steps: u64, constraint: Option<String> },
    Next,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReachQuery {
    pub initial: StateId,
    pub target: String,
    pub form: PathForm,
}

impl ReachQuery {
    pub fn eventually(initial: StateId, target: impl Into<String>) -> Self {
        ReachQuery {
            initial,
            target: target.into(),
            form: PathForm::Until { constraint: None },
        }
    }

    pub fn next(initial: StateId, target: impl Into<String>) -> Self {
        ReachQuery {
            initial,
            target: target.into(),
            form: PathForm::Next,
        }
    }

    pub fn bounded(initial: StateId, target: impl Into<String>, steps: u64) -> Self {
        ReachQuery {
            initial,
            target: target.into(),
            form: PathForm::BoundedUntil { steps, constraint: None },
        }
    }

    pub fn with_initial(&self, initial: StateId) -> Self {
        ReachQuery {
            initial,
            ..self.clone()
        }
    }
}

impl fmt::Display for ReachQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let target = format!("({})", self.target);
        let lhs = |c: &Option<String>| c.as_ref().map(|c| format!("({c})")).unwrap_or_else(|| "true".into());
        match &self.form {
            PathForm::Until { constraint } => write!(f, "P=? [ {} U {} ] from {}", lhs(constraint), target, self.initial),
            PathForm::BoundedUntil { steps, constraint } => {
                write!(f, "P=? [ {} U<={} {} ] from {}", lhs(constraint), steps, target, self.initial)
            }
            PathForm::Next => write!(f, "P=? [ X {} ] from {}", target, self.initial),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    Indeterminate,
}

/// A box of closed parameter intervals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamBox(pub BTreeMap<ParamId, Interval>);

impl ParamBox {
    pub fn new() -> Self {
        ParamBox::default()
    }

    pub fn insert(&mut self, p: ParamId, iv: Interval) {
        self.0.insert(p, iv);
    }

    pub fn get(&self, p: &ParamId) -> Option<&Interval> {
        self.0.get(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Interval)> {
        self.0.iter()
    }

    pub fn point(valuation: &Valuation) -> Self {
        ParamBox(valuation.iter().map(|(p, v)| (p.clone(), Interval::point(v.clone()))).collect())
    }

    pub fn midpoint(&self) -> Valuation {
        self.0.iter().map(|(p, iv)| (p.clone(), iv.midpoint())).collect()
    }

    pub fn contains(&self, valuation: &Valuation) -> bool {
        self.0
            .iter()
            .all(|(p, iv)| valuation.get(p).is_some_and(|v| iv.contains(v)))
    }

    /// Every parameter of `other` also in `self` with a containing interval.
    pub fn contains_box(&self, other: &ParamBox) -> bool {
        other
            .0
            .iter()
            .all(|(p, iv)| self.0.get(p).is_some_and(|mine| mine.contains_interval(iv)))
    }

    pub(crate) fn to_float_box(&self) -> sign::FloatBox {
        self.0.iter().map(|(p, iv)| (p.clone(), iv.to_f64())).collect()
    }
}

impl FromIterator<(ParamId, Interval)> for ParamBox {
    fn from_iter<T: IntoIterator<Item = (ParamId, Interval)>>(iter: T) -> Self {
        ParamBox(iter.into_iter().collect())
    }
}

/// Result of symbolic model checking: the reachability probability as a
/// function of the parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub query: ReachQuery,
    pub function: RationalFunction,
    #[serde(default)]
    pub monotonicity: BTreeMap<ParamId, Monotonicity>,
    /// Box over which `monotonicity` (and denominator sign) was proven.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_box: Option<ParamBox>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ClosedForm {
    pub fn new(query: ReachQuery, function: RationalFunction) -> Self {
        ClosedForm {
            query,
            function,
            monotonicity: BTreeMap::new(),
            analysis_box: None,
            warnings: Vec::new(),
        }
    }

    pub fn evaluate(&self, valuation: &Valuation) -> Result<Rational, RatFuncError> {
        self.function.evaluate(valuation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Model(#[from] DtmcError),
    #[error(transparent)]
    Function(#[from] RatFuncError),
    #[error("query form {0:?} is not supported by this operation")]
    WrongForm(PathForm),
    #[error("initial state {0} is not in the model")]
    UnknownInitial(StateId),
    #[error("parameter `{0}` value lies outside its declared box")]
    OutsideBox(ParamId),
    #[error("elimination hit an identically-zero pivot at state {0}")]
    SingularPivot(StateId),
    #[error("singular at boundary: the denominator may vanish inside box {0}")]
    SingularAtBoundary(String),
}

/// A validated model ready for repeated queries.
pub struct Checker<'a> {
    model: &'a Dtmc,
    matrix: ParametricMatrix,
}

impl<'a> Checker<'a> {
    pub fn new(model: &'a Dtmc) -> Result<Self, CheckError> {
        let matrix = model.to_parametric_matrix()?;
        Ok(Checker { model, matrix })
    }

    pub fn model(&self) -> &Dtmc {
        self.model
    }

    pub fn matrix(&self) -> &ParametricMatrix {
        &self.matrix
    }

    fn allowed_set(&self, constraint: &Option<String>) -> BTreeSet<StateId> {
        match constraint {
            None => self.model.states().map(|s| s.id).collect(),
            Some(label) => self.model.states_with_label(label),
        }
    }

    /// Closed-form probability of `constraint U target`.
    pub fn eliminate(&self, query: &ReachQuery) -> Result<ClosedForm, CheckError> {
        let PathForm::Until { constraint } = &query.form else {
            return Err(CheckError::WrongForm(query.form.clone()));
        };
        if self.model.state(query.initial).is_none() {
            return Err(CheckError::UnknownInitial(query.initial));
        }
        ELIMINATIONS.fetch_add(1, Ordering::Relaxed);
        let targets = self.model.states_with_label(&query.target);
        let mut cf = ClosedForm::new(query.clone(), RationalFunction::zero());
        if targets.is_empty() {
            cf.warnings.push(format!("target label `{}` matches no state", query.target));
            return Ok(cf);
        }
        let allowed = self.allowed_set(constraint);
        cf.function = reach_by_elimination(&self.matrix, query.initial, &targets, &allowed)?;
        Ok(cf)
    }

    /// One-step probability of moving into a target state.
    pub fn check_next(&self, query: &ReachQuery) -> Result<ClosedForm, CheckError> {
        if query.form != PathForm::Next {
            return Err(CheckError::WrongForm(query.form.clone()));
        }
        let row = self
            .matrix
            .rows
            .get(&query.initial)
            .ok_or(CheckError::UnknownInitial(query.initial))?;
        let targets = self.model.states_with_label(&query.target);
        let mut cf = ClosedForm::new(query.clone(), RationalFunction::zero());
        if targets.is_empty() {
            cf.warnings.push(format!("target label `{}` matches no state", query.target));
        }
        cf.function = row
            .iter()
            .filter(|(to, _)| targets.contains(to))
            .fold(RationalFunction::zero(), |acc, (_, f)| acc.add(f));
        Ok(cf)
    }

    /// `constraint U<=t target` at one valuation, by `t` rounds of backward
    /// iteration on the concrete chain.
    pub fn check_bounded(&self, query: &ReachQuery, valuation: &Valuation) -> Result<Rational, CheckError> {
        let PathForm::BoundedUntil { steps, constraint } = &query.form else {
            return Err(CheckError::WrongForm(query.form.clone()));
        };
        if self.model.state(query.initial).is_none() {
            return Err(CheckError::UnknownInitial(query.initial));
        }
        for (p, iv) in self.model.params() {
            match valuation.get(p) {
                Some(v) if iv.contains(v) => {}
                Some(_) => return Err(CheckError::OutsideBox(p.clone())),
                None => return Err(RatFuncError::MissingParameter(p.clone()).into()),
            }
        }
        let concrete = self.matrix.substitute(valuation)?;
        let targets = self.model.states_with_label(&query.target);
        let allowed = self.allowed_set(constraint);
        let mut x: BTreeMap<StateId, Rational> = concrete
            .keys()
            .map(|s| (*s, if targets.contains(s) { Rational::one() } else { Rational::zero() }))
            .collect();
        for _ in 0..*steps {
            let next = concrete
                .iter()
                .map(|(s, row)| {
                    let v = if targets.contains(s) {
                        Rational::one()
                    } else if !allowed.contains(s) {
                        Rational::zero()
                    } else {
                        row.iter().map(|(to, p)| p * &x[to]).sum()
                    };
                    (*s, v)
                })
                .collect();
            if next == x {
                break;
            }
            x = next;
        }
        Ok(x[&query.initial].clone())
    }
}

/// Closed form for `true U target` (or constrained until).
pub fn eliminate(model: &Dtmc, query: &ReachQuery) -> Result<ClosedForm, CheckError> {
    Checker::new(model)?.eliminate(query)
}

pub fn check_next(model: &Dtmc, query: &ReachQuery) -> Result<ClosedForm, CheckError> {
    Checker::new(model)?.check_next(query)
}

pub fn check_bounded(model: &Dtmc, query: &ReachQuery, valuation: &Valuation) -> Result<Rational, CheckError> {
    Checker::new(model)?.check_bounded(query, valuation)
}

/// States (outside `targets`, inside `allowed`) with a path of non-zero
/// edges to a target through allowed states.
fn states_reaching(matrix: &ParametricMatrix, targets: &BTreeSet<StateId>, allowed: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let mut preds: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for (from, row) in &matrix.rows {
        for (to, f) in row {
            if !f.is_zero() && from != to {
                preds.entry(*to).or_default().push(*from);
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<StateId> = targets.iter().copied().collect();
    while let Some(s) = queue.pop_front() {
        for p in preds.get(&s).into_iter().flatten() {
            if !targets.contains(p) && allowed.contains(p) && seen.insert(*p) {
                queue.push_back(*p);
            }
        }
    }
    seen
}

/// The states of `reaching` that can move, within `reaching`, into a state
/// outside it that is not a target (a zero-probability state).
fn states_avoiding_one(matrix: &ParametricMatrix, targets: &BTreeSet<StateId>, reaching: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let mut bad: BTreeSet<StateId> = BTreeSet::new();
    loop {
        let before = bad.len();
        for s in reaching {
            if bad.contains(s) {
                continue;
            }
            let row = matrix.rows.get(s);
            let leaks = row.into_iter().flatten().any(|(to, f)| {
                !f.is_zero() && (bad.contains(to) || (!reaching.contains(to) && !targets.contains(to)))
            });
            if leaks {
                bad.insert(*s);
            }
        }
        if bad.len() == before {
            return bad;
        }
    }
}

/// Multiplies a row of rational functions through by a common denominator.
fn clear_row(entries: &BTreeMap<StateId, RationalFunction>) -> (Polynomial, BTreeMap<StateId, Polynomial>) {
    let mut common = Polynomial::one();
    for f in entries.values() {
        let d = f.denominator();
        if common.div_exact(d).is_none() {
            common = &common * d;
        }
    }
    let polys = entries
        .iter()
        .map(|(s, f)| {
            let k = common.div_exact(f.denominator()).expect("denominator divides the common multiple");
            (*s, f.numerator() * &k)
        })
        .collect();
    (common, polys)
}

/// Fraction-free state elimination on `(I - Q) x = b` over the states that
/// can still reach a target.
///
/// Eliminating state `k` rewrites every remaining entry as
/// `(A_kk A_ij - A_ik A_kj) / prev`, the division by the previous pivot being
/// exact. This is the `1/(1 - p_loop)` rescaling of classical state
/// elimination with the denominators kept implicit. A row with `A_ik = 0`
/// only changes by the factor `pivot / prev`, so rows are stored lazily:
/// `stored = current * pivots[lag] / pivots[now]`, and only the
/// predecessors of `k` are touched. States are eliminated in order of fewest
/// incident transitions, the initial state last.
fn reach_by_elimination(
    matrix: &ParametricMatrix,
    initial: StateId,
    targets: &BTreeSet<StateId>,
    allowed: &BTreeSet<StateId>,
) -> Result<RationalFunction, CheckError> {
    if targets.contains(&initial) {
        return Ok(RationalFunction::one());
    }
    let reaching = states_reaching(matrix, targets, allowed);
    if !reaching.contains(&initial) {
        return Ok(RationalFunction::zero());
    }
    // states that cannot stray into a zero-probability state reach the target
    // almost surely; their closed form is identically one, so they join the
    // targets and the system shrinks
    let unknown = states_avoiding_one(matrix, targets, &reaching);
    if !unknown.contains(&initial) {
        return Ok(RationalFunction::one());
    }
    let extended: BTreeSet<StateId> = targets.iter().chain(reaching.difference(&unknown)).copied().collect();
    let targets = &extended;

    let mut a: BTreeMap<StateId, BTreeMap<StateId, Polynomial>> = BTreeMap::new();
    let mut b: BTreeMap<StateId, Polynomial> = BTreeMap::new();
    for s in &unknown {
        let row = matrix.rows.get(s).cloned().unwrap_or_default();
        let (common, polys) = clear_row(&row);
        let mut arow = BTreeMap::new();
        let mut rhs = Polynomial::zero();
        arow.insert(*s, common);
        for (to, p) in polys {
            if targets.contains(&to) {
                rhs = &rhs + &p;
            } else if unknown.contains(&to) {
                let e = arow.entry(to).or_insert_with(Polynomial::zero);
                *e = &*e - &p;
            }
        }
        arow.retain(|_, p| !p.is_zero());
        // integer coefficients keep every later Bareiss entry integral,
        // which avoids rational normalisation in the inner loop
        let lcm = arow
            .values()
            .chain(std::iter::once(&rhs))
            .fold(BigInt::one(), |acc, p| acc.lcm(&p.content_parts().0));
        if !lcm.is_one() {
            let f = Rational::from_integer(lcm);
            for p in arow.values_mut() {
                *p = p.scale(&f);
            }
            rhs = rhs.scale(&f);
        }
        a.insert(*s, arow);
        b.insert(*s, rhs);
    }

    let mut pivots = vec![Polynomial::one()];
    let mut lag: BTreeMap<StateId, usize> = unknown.iter().map(|s| (*s, 0)).collect();
    let mut remaining: BTreeSet<StateId> = unknown.clone();
    let exact = |p: Polynomial, d: &Polynomial| p.div_exact(d).expect("Bareiss step divides exactly");
    while remaining.len() > 1 {
        let k = *remaining
            .iter()
            .filter(|s| **s != initial)
            .min_by_key(|s| {
                let out = a[s].len();
                let inc = remaining.iter().filter(|i| *i != *s && a[i].contains_key(s)).count();
                (out + inc, **s)
            })
            .expect("a non-initial state remains");
        let now = pivots.len() - 1;
        let mut row_k = a.remove(&k).expect("row present");
        let mut b_k = b.remove(&k).expect("rhs present");
        remaining.remove(&k);
        let since = lag[&k];
        if since != now {
            for e in row_k.values_mut() {
                *e = exact(&*e * &pivots[now], &pivots[since]);
            }
            b_k = exact(&b_k * &pivots[now], &pivots[since]);
        }
        let pivot = row_k.get(&k).cloned().unwrap_or_default();
        if pivot.is_zero() {
            return Err(CheckError::SingularPivot(k));
        }
        for i in &remaining {
            let row_i = a.get_mut(i).expect("row present");
            let Some(a_ik) = row_i.remove(&k) else {
                continue;
            };
            let prev = &pivots[lag[i]];
            let cols: BTreeSet<StateId> = row_i.keys().chain(row_k.keys()).copied().filter(|j| *j != k).collect();
            for j in cols {
                let a_ij = row_i.get(&j).cloned().unwrap_or_default();
                let a_kj = row_k.get(&j).cloned().unwrap_or_default();
                let value = exact(&(&pivot * &a_ij) - &(&a_ik * &a_kj), prev);
                if value.is_zero() {
                    row_i.remove(&j);
                } else {
                    row_i.insert(j, value);
                }
            }
            let b_i = b.get_mut(i).expect("rhs present");
            *b_i = exact(&(&pivot * &*b_i) - &(&a_ik * &b_k), prev);
            lag.insert(*i, now + 1);
        }
        pivots.push(pivot);
    }
    // the initial row's lag scales numerator and denominator alike
    let denom = a[&initial].get(&initial).cloned().unwrap_or_default();
    if denom.is_zero() {
        return Err(CheckError::SingularPivot(initial));
    }
    Ok(RationalFunction::new(b.remove(&initial).unwrap_or_default(), denom)?)
}

/// Float enclosure of a closed form over a box, if its denominator can be
/// bounded away from zero.
pub fn enclose(cf: &ClosedForm, bx: &ParamBox) -> Option<FloatInterval> {
    sign::enclose_ratfunc(&cf.function, &bx.to_float_box())
}
