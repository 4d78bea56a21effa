//! The three transition estimators on hand-sized counts.

use std::collections::BTreeMap;

use paraguard::dtmc::StateId;
use paraguard::estimators::{
    cbi_bound, cbi_bound_numeric, dirichlet_update, imprecise_update, CbiPrior, DirichletPrior, ImprecisePrior,
    TransitionCounts,
};
use paraguard::interval::Interval;
use paraguard::rational::{format_sig, int, ratio, to_fraction_string};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (stay, go, fail) = (StateId(1), StateId(2), StateId(3));
    let counts = TransitionCounts::from_pairs([(stay, 75), (go, 20), (fail, 5)]);

    // conjugate Dirichlet update with a precise prior
    let prior = DirichletPrior {
        pseudo_count: int(10),
        expectations: BTreeMap::from([(stay, ratio(7, 10)), (go, ratio(2, 10)), (fail, ratio(1, 10))]),
    };
    let (_, estimates) = dirichlet_update(&prior, &counts);
    for (s, e) in &estimates {
        println!("Dirichlet posterior mean to {s}: {}", to_fraction_string(e));
    }

    // sets of priors: pseudo-count and expectation known only up to intervals
    let imprecise = ImprecisePrior::new(Interval::new(int(5), int(20)), Interval::new(ratio(1, 10), ratio(3, 10)))?;
    let post = imprecise_update(&imprecise, &counts, go);
    println!(
        "imprecise posterior to {go}: [{}, {}], prior-data conflict: {}",
        format_sig(&post.lower),
        format_sig(&post.upper),
        post.conflict
    );

    // conservative Bayesian bound for a catastrophic transition never observed
    let cbi = CbiPrior::new(ratio(9, 10))?;
    for n in [0, 10, 100, 1276] {
        println!(
            "CBI bound after {n:>4} failure-free transitions: {} (direct numeric worst case {:.6e})",
            format_sig(&cbi_bound(&cbi, n)),
            cbi_bound_numeric(&cbi, n)
        );
    }
    Ok(())
}
