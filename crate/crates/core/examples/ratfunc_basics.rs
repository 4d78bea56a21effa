//! Exact rational functions: parse, combine, differentiate, evaluate.

use paraguard::ratfunc::{parse_rational_function, ParamId, Valuation};
use paraguard::rational::{ratio, to_fraction_string};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = parse_rational_function("p / (p + q)")?;
    let g = parse_rational_function("1 - p - q")?;
    println!("f        = {f}");
    println!("g        = {g}");
    println!("f * g    = {}", f.mul(&g));
    println!("f + g    = {}", f.add(&g));
    println!("df/dp    = {}", f.partial_derivative(&ParamId::new("p")));

    let mut v = Valuation::new();
    v.insert(ParamId::new("p"), ratio(1, 5));
    v.insert(ParamId::new("q"), ratio(1, 20));
    println!("f(p=1/5, q=1/20) = {}", to_fraction_string(&f.evaluate(&v)?));
    Ok(())
}
