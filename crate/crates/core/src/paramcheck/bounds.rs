//! Monotonicity analysis and interval bounds of closed forms over boxes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::sign::{enclose_ratfunc, prove_sign, FloatBox, Sign};
use super::{CheckError, ClosedForm, Monotonicity, ParamBox};
use crate::interval::{FloatInterval, Interval};
use crate::ratfunc::{ParamId, Polynomial, RatFuncError, RationalFunction, Valuation};
use crate::rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundOptions {
    /// Maximum number of cells visited by one sign proof.
    pub sign_budget: usize,
    /// Bisection depth per indeterminate parameter in the fallback search.
    pub fallback_depth: u32,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            sign_budget: 4096,
            fallback_depth: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundResult {
    pub interval: Interval,
    /// `true` when some parameter was indeterminate and the bound is an
    /// outer enclosure rather than attained at a corner.
    pub conservative: bool,
    pub monotonicity: BTreeMap<ParamId, Monotonicity>,
}

fn require_denominator_sign(f: &RationalFunction, fb: &FloatBox, bx: &ParamBox, budget: usize) -> Result<(), CheckError> {
    if prove_sign(f.denominator(), fb, budget).is_strict() {
        Ok(())
    } else {
        let text = bx
            .iter()
            .map(|(p, iv)| format!("{p}={iv}"))
            .collect::<Vec<_>>()
            .join(", ");
        Err(CheckError::SingularAtBoundary(text))
    }
}

fn check_coverage(f: &RationalFunction, bx: &ParamBox) -> Result<(), CheckError> {
    match f.variables().into_iter().find(|p| bx.get(p).is_none()) {
        Some(p) => Err(RatFuncError::MissingParameter(p).into()),
        None => Ok(()),
    }
}

/// Proves, per parameter, the sign of the partial derivative of the closed
/// form over `bx` and records the result (and the box) on `cf`.
///
/// With `f = N/D`, the derivative's sign is that of `N'D - ND'` because the
/// denominator is first proven free of zeros on the box.
pub fn analyze_monotonicity(cf: &mut ClosedForm, bx: &ParamBox, opts: &BoundOptions) -> Result<(), CheckError> {
    cf.monotonicity = monotonicity_over(&cf.function, bx, opts)?;
    cf.analysis_box = Some(bx.clone());
    Ok(())
}

fn monotonicity_over(
    f: &RationalFunction,
    bx: &ParamBox,
    opts: &BoundOptions,
) -> Result<BTreeMap<ParamId, Monotonicity>, CheckError> {
    check_coverage(f, bx)?;
    let fb = bx.to_float_box();
    require_denominator_sign(f, &fb, bx, opts.sign_budget)?;
    let (n, d) = (f.numerator(), f.denominator());
    let mut out = BTreeMap::new();
    for (p, _) in bx.iter() {
        let g = &(&n.partial_derivative(p) * d) - &(n * &d.partial_derivative(p));
        let m = match prove_sign(&g, &fb, opts.sign_budget) {
            Sign::Zero => Monotonicity::Constant,
            Sign::Positive | Sign::NonNegative => Monotonicity::Increasing,
            Sign::Negative | Sign::NonPositive => Monotonicity::Decreasing,
            Sign::Unknown => Monotonicity::Indeterminate,
        };
        out.insert(p.clone(), m);
    }
    Ok(out)
}

/// Sound lower and upper bounds of the closed form over `bx`.
///
/// Monotone parameters are fixed at the bound-attaining corner, so with no
/// indeterminate parameter both ends are exact values of the function. Any
/// remaining indeterminate parameters are handled by branch-and-bound on
/// interval enclosures, which yields an outer (conservative) bound.
///
/// The monotonicity recorded on `cf` is reused when `bx` lies inside its
/// analysis box; otherwise it is recomputed for `bx`.
pub fn bound_evaluate(cf: &ClosedForm, bx: &ParamBox, opts: &BoundOptions) -> Result<BoundResult, CheckError> {
    check_coverage(&cf.function, bx)?;
    let cached = cf
        .analysis_box
        .as_ref()
        .filter(|a| a.contains_box(bx) && cf.function.variables().iter().all(|p| cf.monotonicity.contains_key(p)));
    let mono = match cached {
        Some(_) => cf.monotonicity.clone(),
        None => monotonicity_over(&cf.function, bx, opts)?,
    };
    let relevant = |p: &ParamId| mono.get(p).copied().unwrap_or(Monotonicity::Constant);

    let corner = |upper: bool| -> Valuation {
        bx.iter()
            .filter(|(p, _)| relevant(p) != Monotonicity::Indeterminate)
            .map(|(p, iv)| {
                let take_hi = match relevant(p) {
                    Monotonicity::Increasing => upper,
                    Monotonicity::Decreasing => !upper,
                    _ => false,
                };
                (p.clone(), if take_hi { iv.hi.clone() } else { iv.lo.clone() })
            })
            .collect()
    };
    let indeterminate: Vec<ParamId> = cf
        .function
        .variables()
        .into_iter()
        .filter(|p| relevant(p) == Monotonicity::Indeterminate)
        .collect();

    if indeterminate.is_empty() {
        let lo = cf.function.evaluate(&corner(false))?;
        let hi = cf.function.evaluate(&corner(true))?;
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        return Ok(BoundResult {
            interval: Interval::new(lo, hi),
            conservative: false,
            monotonicity: mono,
        });
    }

    let sub_box: FloatBox = indeterminate.iter().map(|p| (p.clone(), bx.get(p).expect("covered").to_f64())).collect();
    let lower_fn = substitute(&cf.function, &corner(false));
    let upper_fn = substitute(&cf.function, &corner(true)).neg();
    let lo = branch_and_bound_min(&lower_fn, &sub_box, opts.fallback_depth);
    let hi = -branch_and_bound_min(&upper_fn, &sub_box, opts.fallback_depth);
    let lo = rational::from_f64(lo.max(0.0));
    let hi = rational::from_f64(hi.min(1.0));
    Ok(BoundResult {
        interval: Interval::new(lo.clone().min(hi.clone()), hi.max(lo)),
        conservative: true,
        monotonicity: mono,
    })
}

fn substitute(f: &RationalFunction, v: &Valuation) -> RationalFunction {
    let n = f.numerator().substitute(v);
    let d = f.denominator().substitute(v);
    RationalFunction::new(n, d).unwrap_or_else(|_| RationalFunction::new(Polynomial::zero(), Polynomial::one()).expect("valid"))
}

struct Cell {
    lower: f64,
    depth: u32,
    bx: FloatBox,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.lower.total_cmp(&o.lower) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    // min-heap on the enclosure's lower end
    fn cmp(&self, o: &Self) -> Ordering {
        o.lower.total_cmp(&self.lower)
    }
}

fn enclosure_lo(f: &RationalFunction, b: &FloatBox) -> f64 {
    enclose_ratfunc(f, b).map(|e: FloatInterval| e.lo).unwrap_or(f64::NEG_INFINITY)
}

/// Guaranteed lower bound of `min f` over `b`.
fn branch_and_bound_min(f: &RationalFunction, b: &FloatBox, depth_per_dim: u32) -> f64 {
    let max_depth = depth_per_dim * b.len().max(1) as u32;
    let midpoint_value = |cell: &FloatBox| f.evaluate_f64(&|p: &ParamId| {
        let iv = cell[p];
        0.5 * (iv.lo + iv.hi)
    });
    let mut best = midpoint_value(b);
    let mut heap = BinaryHeap::from([Cell {
        lower: enclosure_lo(f, b),
        depth: 0,
        bx: b.clone(),
    }]);
    let mut settled = f64::INFINITY;
    while let Some(cell) = heap.pop() {
        if cell.lower >= best || cell.depth >= max_depth {
            settled = settled.min(cell.lower);
            continue;
        }
        let (p, iv) = cell
            .bx
            .iter()
            .max_by(|a, b| (a.1.hi - a.1.lo).total_cmp(&(b.1.hi - b.1.lo)))
            .map(|(p, iv)| (p.clone(), *iv))
            .expect("non-empty box");
        let mid = 0.5 * (iv.lo + iv.hi);
        for half in [FloatInterval::new(iv.lo, mid), FloatInterval::new(mid, iv.hi)] {
            let mut child = cell.bx.clone();
            child.insert(p.clone(), half);
            best = best.min(midpoint_value(&child));
            heap.push(Cell {
                lower: enclosure_lo(f, &child),
                depth: cell.depth + 1,
                bx: child,
            });
        }
    }
    settled.min(best)
}
