//! Bayesian learners for transition parameters: the conjugate Dirichlet point
//! estimate, the sets-of-priors interval estimate with prior-data conflict,
//! and the conservative bound for catastrophic-failure parameters.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmc::StateId;
use crate::interval::Interval;
use crate::rational::{self, int, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimatorError {
    #[error("CBI regime violated: {failures} catastrophic transition(s) observed; the model must be revised")]
    CbiRegimeViolated { failures: u64 },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
}

/// Outgoing transition tallies of one row.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub total: u64,
    pub to: BTreeMap<StateId, u64>,
}

impl TransitionCounts {
    pub fn new() -> Self {
        TransitionCounts::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (StateId, u64)>) -> Self {
        let mut c = TransitionCounts::new();
        for (s, n) in pairs {
            c.add_many(s, n);
        }
        c
    }

    pub fn add(&mut self, to: StateId) {
        self.add_many(to, 1);
    }

    pub fn add_many(&mut self, to: StateId, n: u64) {
        if n > 0 {
            *self.to.entry(to).or_insert(0) += n;
            self.total += n;
        }
    }

    pub fn count(&self, to: StateId) -> u64 {
        self.to.get(&to).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &TransitionCounts) {
        for (s, n) in &other.to {
            self.add_many(*s, *n);
        }
    }

    pub fn frequency(&self, to: StateId) -> Option<Rational> {
        (self.total > 0).then(|| Rational::new(self.count(to).into(), self.total.into()))
    }
}

/// A Dirichlet prior over one row: strength and expected distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirichletPrior {
    pub pseudo_count: Rational,
    pub expectations: BTreeMap<StateId, Rational>,
}

/// Conjugate update: the strength grows by the sample size and each
/// expectation moves to the count-weighted mix of prior and frequency.
///
/// With no data (and a zero pseudo-count) the prior is returned unchanged.
pub fn dirichlet_update(prior: &DirichletPrior, counts: &TransitionCounts) -> (DirichletPrior, BTreeMap<StateId, Rational>) {
    let n = int(counts.total as i64);
    let strength = &prior.pseudo_count + &n;
    if strength.is_zero() {
        return (prior.clone(), prior.expectations.clone());
    }
    let mut dests: Vec<StateId> = prior.expectations.keys().copied().collect();
    dests.extend(counts.to.keys().copied());
    dests.sort();
    dests.dedup();
    let estimates: BTreeMap<StateId, Rational> = dests
        .into_iter()
        .map(|j| {
            let p0 = prior.expectations.get(&j).cloned().unwrap_or_else(Rational::zero);
            let nij = int(counts.count(j) as i64);
            (j, (&prior.pseudo_count * p0 + nij) / &strength)
        })
        .collect();
    let posterior = DirichletPrior {
        pseudo_count: strength,
        expectations: estimates.clone(),
    };
    (posterior, estimates)
}

/// Interval prior for one transition parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprecisePrior {
    pub pseudo_count: Interval,
    pub expectation: Interval,
}

impl ImprecisePrior {
    pub fn new(pseudo_count: Interval, expectation: Interval) -> Result<Self, EstimatorError> {
        if pseudo_count.lo <= Rational::zero() {
            return Err(EstimatorError::InvalidPrior("pseudo-count must be positive".into()));
        }
        if !rational::in_unit_interval(&expectation.lo) || !rational::in_unit_interval(&expectation.hi) {
            return Err(EstimatorError::InvalidPrior("expectation must lie in [0, 1]".into()));
        }
        Ok(ImprecisePrior { pseudo_count, expectation })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosteriorInterval {
    #[serde(with = "rational::serde_text")]
    pub lower: Rational,
    #[serde(with = "rational::serde_text")]
    pub upper: Rational,
    pub conflict: bool,
    pub sample_size: u64,
}

impl PosteriorInterval {
    pub fn interval(&self) -> Interval {
        Interval::new(self.lower.clone(), self.upper.clone())
    }

    pub fn width(&self) -> Rational {
        &self.upper - &self.lower
    }
}

/// Posterior bounds over the whole set of priors, given `n_ij` of `n_i`
/// transitions to the tracked destination.
///
/// Each bound takes the large pseudo-count while the observed frequency sits
/// on the prior side of that bound and switches to the small one once the
/// data has moved past it, which is what widens the interval under
/// prior-data conflict.
pub fn imprecise_bounds(prior: &ImprecisePrior, n_i: u64, n_ij: u64) -> PosteriorInterval {
    let (n_lo, n_hi) = (&prior.pseudo_count.lo, &prior.pseudo_count.hi);
    let (p_lo, p_hi) = (&prior.expectation.lo, &prior.expectation.hi);
    if n_i == 0 {
        return PosteriorInterval {
            lower: p_lo.clone(),
            upper: p_hi.clone(),
            conflict: false,
            sample_size: 0,
        };
    }
    let n = int(n_i as i64);
    let k = int(n_ij as i64);
    let freq = &k / &n;
    let mix = |n0: &Rational, p0: &Rational| (n0 * p0 + &k) / (n0 + &n);
    let lower = if &freq >= p_lo { mix(n_hi, p_lo) } else { mix(n_lo, p_lo) };
    let upper = if &freq <= p_hi { mix(n_hi, p_hi) } else { mix(n_lo, p_hi) };
    PosteriorInterval {
        lower,
        upper,
        conflict: !prior.expectation.contains(&freq),
        sample_size: n_i,
    }
}

pub fn imprecise_update(prior: &ImprecisePrior, counts: &TransitionCounts, j: StateId) -> PosteriorInterval {
    imprecise_bounds(prior, counts.total, counts.count(j))
}

/// Partial prior knowledge `Pr(x = 0) = theta` about a catastrophic parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbiPrior {
    #[serde(with = "rational::serde_text")]
    pub theta: Rational,
}

impl CbiPrior {
    pub fn new(theta: Rational) -> Result<Self, EstimatorError> {
        if theta <= Rational::zero() || theta >= Rational::one() {
            return Err(EstimatorError::InvalidPrior("theta must lie strictly between 0 and 1".into()));
        }
        Ok(CbiPrior { theta })
    }
}

/// Worst-case posterior expectation of a catastrophic parameter after `n_i`
/// failure-free transitions: `(1-θ)/(θ(n+1)) · (n/(n+1))^n`, exact.
pub fn cbi_bound(prior: &CbiPrior, n_i: u64) -> Rational {
    let n1 = int(n_i as i64 + 1);
    let head = (Rational::one() - &prior.theta) / (&prior.theta * &n1);
    let base = int(n_i as i64) / n1;
    head * rational::pow(&base, n_i)
}

/// [`cbi_bound`] after checking that no catastrophic transition was seen in
/// `counts`, the row of the catastrophic destination `j`.
pub fn cbi_update(prior: &CbiPrior, counts: &TransitionCounts, j: StateId) -> Result<Rational, EstimatorError> {
    match counts.count(j) {
        0 => Ok(cbi_bound(prior, counts.total)),
        failures => Err(EstimatorError::CbiRegimeViolated { failures }),
    }
}

/// Posterior expectation under the two-point prior with mass `θ` at 0 and
/// `1-θ` at `q`, after `n` failure-free transitions.
fn two_point_posterior(theta: f64, n: u64, q: f64) -> f64 {
    let survive = (n as f64 * (-q).ln_1p()).exp();
    (1.0 - theta) * q * survive / (theta + (1.0 - theta) * survive)
}

/// An upper bound on [`cbi_bound`] with about `digits` significant digits,
/// without the exact power: evaluated in floating point, inflated by a
/// relative margin far above the rounding error, then rounded up.
pub fn cbi_bound_upper(prior: &CbiPrior, n_i: u64, digits: u32) -> Rational {
    let theta = rational::to_f64(&prior.theta);
    let n = n_i as f64;
    let head = (1.0 - theta) / (theta * (n + 1.0));
    // (n / (n + 1))^n = exp(-n ln(1 + 1/n))
    let tail = if n_i == 0 { 1.0 } else { (-n * (1.0 / n).ln_1p()).exp() };
    let approx = head * tail * (1.0 + 1e-11);
    rational::round_up_sig(&rational::from_f64(approx), digits)
}

/// The worst-case posterior expectation found by maximizing the two-point
/// posterior over `q` directly (golden-section search, tolerance 1e-12).
///
/// Never exceeds [`cbi_bound`], which relaxes this objective twice.
pub fn cbi_bound_numeric(prior: &CbiPrior, n_i: u64) -> f64 {
    let theta = rational::to_f64(&prior.theta);
    let f = |q: f64| two_point_posterior(theta, n_i, q);
    // bracket the peak on a log grid; the objective is unimodal in q
    let grid: Vec<f64> = (0..=400).map(|i| 10f64.powf(-12.0 + 12.0 * i as f64 / 400.0)).collect();
    let best = (0..grid.len())
        .max_by(|a, b| f(grid[*a]).total_cmp(&f(grid[*b])))
        .expect("non-empty grid");
    let mut lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let mut hi = if best + 1 == grid.len() { 1.0 } else { grid[best + 1] };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-12 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    [fc, fd, f(lo), f(hi), f(grid[best])].into_iter().fold(0.0, f64::max)
}

/// Per-parameter prior as declared in a model file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Point {
        #[serde(with = "rational::serde_text")]
        pseudo: Rational,
        #[serde(with = "rational::serde_text")]
        expectation: Rational,
    },
    Interval {
        pseudo: Interval,
        expectation: Interval,
    },
    Cbi {
        #[serde(with = "rational::serde_text")]
        theta: Rational,
    },
}

impl PriorSpec {
    /// The imprecise prior this spec induces; a point prior is the
    /// degenerate interval.
    pub fn as_imprecise(&self) -> Option<ImprecisePrior> {
        match self {
            PriorSpec::Point { pseudo, expectation } => Some(ImprecisePrior {
                pseudo_count: Interval::point(pseudo.clone()),
                expectation: Interval::point(expectation.clone()),
            }),
            PriorSpec::Interval { pseudo, expectation } => Some(ImprecisePrior {
                pseudo_count: pseudo.clone(),
                expectation: expectation.clone(),
            }),
            PriorSpec::Cbi { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        match self {
            PriorSpec::Cbi { theta } => CbiPrior::new(theta.clone()).map(|_| ()),
            other => {
                let p = other.as_imprecise().expect("non-CBI prior");
                ImprecisePrior::new(p.pseudo_count, p.expectation).map(|_| ())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn iv(lo: Rational, hi: Rational) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn dirichlet_examples() {
        let prior = DirichletPrior {
            pseudo_count: int(100),
            expectations: BTreeMap::from([(StateId(2), ratio(1, 20)), (StateId(1), ratio(19, 20))]),
        };
        let counts = TransitionCounts::from_pairs([(StateId(2), 10), (StateId(1), 90)]);
        let (post, est) = dirichlet_update(&prior, &counts);
        assert_eq!(est[&StateId(2)], ratio(3, 40));
        assert_eq!(post.pseudo_count, int(200));

        let (_, none) = dirichlet_update(&prior, &TransitionCounts::new());
        assert_eq!(none, prior.expectations);

        let mle = DirichletPrior {
            pseudo_count: int(0),
            ..prior
        };
        assert_eq!(dirichlet_update(&mle, &counts).1[&StateId(2)], ratio(1, 10));
    }

    #[test]
    fn imprecise_examples() {
        let wide = ImprecisePrior::new(iv(int(100), int(300)), iv(ratio(1, 10), ratio(1, 2))).unwrap();
        let r = imprecise_bounds(&wide, 100, 30);
        assert_eq!((r.lower, r.upper, r.conflict), (ratio(3, 20), ratio(9, 20), false));

        let narrow = ImprecisePrior::new(iv(int(100), int(300)), iv(ratio(1, 10), ratio(1, 5))).unwrap();
        let r = imprecise_bounds(&narrow, 100, 50);
        assert_eq!((r.lower, r.upper, r.conflict), (ratio(1, 5), ratio(7, 20), true));

        let r = imprecise_bounds(&wide, 0, 0);
        assert_eq!((r.lower, r.upper, r.conflict), (ratio(1, 10), ratio(1, 2), false));
    }

    #[test]
    fn prior_endpoint_is_not_conflict() {
        let p = ImprecisePrior::new(iv(int(10), int(20)), iv(ratio(1, 10), ratio(1, 5))).unwrap();
        assert!(!imprecise_bounds(&p, 10, 1).conflict);
        assert!(!imprecise_bounds(&p, 10, 2).conflict);
        assert!(imprecise_bounds(&p, 10, 3).conflict);
    }

    #[test]
    fn cbi_examples() {
        let p = CbiPrior::new(ratio(9, 10)).unwrap();
        assert_eq!(cbi_bound(&p, 0), ratio(1, 9));
        let b = rational::to_f64(&cbi_bound(&p, 1276));
        assert!((b - 3.2e-5).abs() < 0.05 * 3.2e-5, "{b}");
        assert!((cbi_bound_numeric(&p, 0) - 0.1).abs() < 1e-9);
        for n in [0, 1, 7, 300, 1276, 4000] {
            let exact = cbi_bound(&p, n);
            let upper = cbi_bound_upper(&p, n, 12);
            assert!(upper >= exact, "n = {n}");
            assert!(rational::to_f64(&(&upper - &exact)) <= 1e-10 * rational::to_f64(&exact), "n = {n}");
        }
        for (theta, n) in [(ratio(9, 10), 100), (ratio(1, 2), 10)] {
            let p = CbiPrior::new(theta).unwrap();
            assert!(cbi_bound_numeric(&p, n) <= rational::to_f64(&cbi_bound(&p, n)));
        }
    }

    #[test]
    fn catastrophic_observation_is_an_error() {
        let p = CbiPrior::new(ratio(9, 10)).unwrap();
        let counts = TransitionCounts::from_pairs([(StateId(6), 1), (StateId(1), 9)]);
        assert_eq!(
            cbi_update(&p, &counts, StateId(6)),
            Err(EstimatorError::CbiRegimeViolated { failures: 1 })
        );
        assert_eq!(cbi_update(&p, &counts, StateId(5)).unwrap(), cbi_bound(&p, 10));
    }

    #[test]
    fn invalid_priors_are_rejected() {
        assert!(CbiPrior::new(int(1)).is_err());
        assert!(ImprecisePrior::new(iv(int(0), int(1)), iv(int(0), int(1))).is_err());
        assert!(ImprecisePrior::new(iv(int(1), int(2)), iv(int(0), int(2))).is_err());
    }
}
