//! Properties of the Dirichlet, sets-of-priors and CBI estimators.

use std::collections::BTreeMap;

use proptest::prelude::*;

use paraguard::dtmc::StateId;
use paraguard::estimators::{
    cbi_bound, cbi_bound_numeric, cbi_bound_upper, cbi_update, dirichlet_update, imprecise_bounds, CbiPrior,
    DirichletPrior, EstimatorError, ImprecisePrior, TransitionCounts,
};
use paraguard::interval::Interval;
use paraguard::rational::{int, ratio, to_f64, Rational};

/// `(n0_lo, n0_hi, p_lo, p_hi)` with `n0` in whole counts and `p` in percent.
fn prior_box() -> impl Strategy<Value = ImprecisePrior> {
    (1i64..=50, 0i64..=250, 0i64..=90, 1i64..=10).prop_map(|(n_lo, dn, p_lo, dp)| {
        ImprecisePrior::new(
            Interval::new(int(n_lo), int(n_lo + dn)),
            Interval::new(ratio(p_lo, 100), ratio(p_lo + dp, 100)),
        )
        .unwrap()
    })
}

fn counts() -> impl Strategy<Value = (u64, u64)> {
    (0u64..=2000).prop_flat_map(|n| (Just(n), 0..=n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_prior_in_the_set_lands_inside_the_bounds(prior in prior_box(), (n, k) in counts(), s in 0i64..=10, t in 0i64..=10) {
        let b = imprecise_bounds(&prior, n, k);
        let n0 = &prior.pseudo_count.lo + prior.pseudo_count.width() * ratio(s, 10);
        let p0 = &prior.expectation.lo + prior.expectation.width() * ratio(t, 10);
        let one = DirichletPrior {
            pseudo_count: n0,
            expectations: BTreeMap::from([(StateId(2), p0)]),
        };
        let (_, est) = dirichlet_update(&one, &TransitionCounts::from_pairs([(StateId(2), k), (StateId(1), n - k)]));
        let mean = &est[&StateId(2)];
        prop_assert!(&b.lower <= mean && mean <= &b.upper);
    }

    #[test]
    fn bounds_are_attained_by_corner_priors(prior in prior_box(), (n, k) in counts()) {
        let b = imprecise_bounds(&prior, n, k);
        let corners: Vec<Rational> = [&prior.pseudo_count.lo, &prior.pseudo_count.hi]
            .into_iter()
            .flat_map(|n0| [&prior.expectation.lo, &prior.expectation.hi].map(|p0| {
                if n == 0 { p0.clone() } else { (n0 * p0 + int(k as i64)) / (n0 + int(n as i64)) }
            }))
            .collect();
        prop_assert!(corners.contains(&b.lower) && corners.contains(&b.upper));
    }

    #[test]
    fn conflict_means_the_data_left_the_prior_interval(prior in prior_box(), (n, k) in counts()) {
        let b = imprecise_bounds(&prior, n, k);
        let outside = n > 0 && !prior.expectation.contains(&ratio(k as i64, n as i64));
        prop_assert_eq!(b.conflict, outside);
    }

    #[test]
    fn dirichlet_posterior_is_a_distribution(n0 in 1i64..=100, counts in prop::collection::vec(0u64..=500, 3)) {
        let prior = DirichletPrior {
            pseudo_count: int(n0),
            expectations: BTreeMap::from([(StateId(1), ratio(1, 2)), (StateId(2), ratio(1, 3)), (StateId(3), ratio(1, 6))]),
        };
        let c = TransitionCounts::from_pairs(counts.iter().enumerate().map(|(i, n)| (StateId(i as u32 + 1), *n)));
        let (post, est) = dirichlet_update(&prior, &c);
        prop_assert_eq!(est.values().sum::<Rational>(), int(1));
        prop_assert_eq!(post.pseudo_count, int(n0 + counts.iter().sum::<u64>() as i64));
    }

    #[test]
    fn cbi_bound_shrinks_with_evidence(theta in 1i64..=99, n in 0u64..=400) {
        let prior = CbiPrior::new(ratio(theta, 100)).unwrap();
        let now = cbi_bound(&prior, n);
        prop_assert!(cbi_bound(&prior, n + 1) < now);
        prop_assert!(cbi_bound_numeric(&prior, n) <= to_f64(&now) * (1.0 + 1e-12));
    }

    #[test]
    fn runtime_cbi_bound_is_a_tight_upper_bound(theta in 1i64..=99, n in 0u64..=3000) {
        let prior = CbiPrior::new(ratio(theta, 100)).unwrap();
        let exact = cbi_bound(&prior, n);
        let upper = cbi_bound_upper(&prior, n, 12);
        prop_assert!(upper >= exact);
        prop_assert!(to_f64(&((&upper - &exact) / &exact)) < 1e-10);
    }
}

#[test]
fn cbi_refuses_observed_catastrophes() {
    let prior = CbiPrior::new(ratio(9, 10)).unwrap();
    let ok = TransitionCounts::from_pairs([(StateId(1), 100)]);
    assert_eq!(cbi_update(&prior, &ok, StateId(6)).unwrap(), cbi_bound(&prior, 100));
    let bad = TransitionCounts::from_pairs([(StateId(1), 100), (StateId(6), 2)]);
    assert!(matches!(cbi_update(&prior, &bad, StateId(6)), Err(EstimatorError::CbiRegimeViolated { failures: 2 })));
}

#[test]
fn invalid_priors_are_rejected() {
    assert!(CbiPrior::new(int(0)).is_err());
    assert!(CbiPrior::new(int(1)).is_err());
    assert!(ImprecisePrior::new(Interval::new(int(0), int(5)), Interval::new(ratio(1, 10), ratio(2, 10))).is_err());
    assert!(ImprecisePrior::new(Interval::new(int(1), int(5)), Interval::new(ratio(1, 10), ratio(11, 10))).is_err());
}
