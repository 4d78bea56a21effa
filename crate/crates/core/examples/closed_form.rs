//! Closed-form reachability of a parametric chain, point evaluation, and
//! sound bounds over a parameter box.

use std::path::Path;

use paraguard::paramcheck::{analyze_monotonicity, bound_evaluate, BoundOptions, Checker, PathForm};
use paraguard::rational::{format_sig, to_fraction_string};
use paraguard::shell::load_model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/models/uuv-fig1.toml"))?;
    let checker = Checker::new(&model.dtmc)?;
    let truth = model.truth.as_ref().expect("model has a [truth] block");
    let bx = model.declared_box();
    let opts = BoundOptions::default();

    for q in model.queries.iter().filter(|q| matches!(q.query.form, PathForm::Until { .. })) {
        let mut cf = checker.eliminate(&q.query)?;
        println!("{}: P(reach {}) = {}", q.id, q.query.target, cf.function);
        println!("  at truth: {}", to_fraction_string(&cf.evaluate(&truth.values)?));
        analyze_monotonicity(&mut cf, &bx, &opts)?;
        for (p, m) in &cf.monotonicity {
            println!("  {p}: {m:?}");
        }
        let b = bound_evaluate(&cf, &bx, &opts)?;
        println!(
            "  over the declared box: [{}, {}]{}",
            format_sig(&b.interval.lo),
            format_sig(&b.interval.hi),
            if b.conservative { " (conservative)" } else { "" }
        );
    }
    Ok(())
}
