//! Interval enclosures of polynomials over parameter boxes and sign proofs by
//! bisection.

use std::collections::BTreeMap;

use crate::interval::FloatInterval;
use crate::ratfunc::{ParamId, Polynomial, RationalFunction};

pub(crate) type FloatBox = BTreeMap<ParamId, FloatInterval>;

/// Proven sign of a polynomial over a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
    /// `>= 0` everywhere, possibly touching zero.
    NonNegative,
    /// `<= 0` everywhere, possibly touching zero.
    NonPositive,
    Zero,
    Unknown,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            Sign::NonNegative => Sign::NonPositive,
            Sign::NonPositive => Sign::NonNegative,
            s => s,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Sign::Positive | Sign::Negative)
    }
}

pub(crate) fn enclose_poly(p: &Polynomial, b: &FloatBox) -> FloatInterval {
    let mut acc = FloatInterval::point(0.0);
    for (m, c) in p.terms() {
        let mut t = FloatInterval::enclose(c);
        for (param, e) in m.exponents() {
            let iv = b.get(param).copied().unwrap_or(FloatInterval::new(f64::NEG_INFINITY, f64::INFINITY));
            t = t * iv.powi(e);
        }
        acc = acc + t;
    }
    acc
}

/// Enclosure of `f` over `b`, or `None` if the denominator enclosure
/// contains zero.
pub(crate) fn enclose_ratfunc(f: &RationalFunction, b: &FloatBox) -> Option<FloatInterval> {
    let n = enclose_poly(f.numerator(), b);
    let d = enclose_poly(f.denominator(), b);
    if d.contains_zero() {
        return None;
    }
    Some(n * d.recip())
}

fn widest(b: &FloatBox, vars: &[ParamId]) -> Option<ParamId> {
    vars.iter()
        .filter_map(|p| b.get(p).map(|iv| (p, iv.hi - iv.lo)))
        .filter(|(_, w)| *w > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p.clone())
}

/// Tries to prove a constant sign of `p` over `b` by recursive bisection,
/// visiting at most `budget` cells.
pub fn prove_sign(p: &Polynomial, b: &FloatBox, budget: usize) -> Sign {
    if p.is_zero() {
        return Sign::Zero;
    }
    let vars: Vec<ParamId> = p.variables().into_iter().collect();
    let mut positive = true;
    let mut negative = true;
    let mut strict_pos = true;
    let mut strict_neg = true;
    let mut stack = vec![b.clone()];
    let mut visited = 0usize;
    while let Some(cell) = stack.pop() {
        visited += 1;
        let e = enclose_poly(p, &cell);
        if e.lo > 0.0 {
            negative = false;
            strict_neg = false;
            continue;
        }
        if e.hi < 0.0 {
            positive = false;
            strict_pos = false;
            continue;
        }
        if e.lo >= 0.0 {
            negative = false;
            strict_pos = false;
            strict_neg = false;
            continue;
        }
        if e.hi <= 0.0 {
            positive = false;
            strict_pos = false;
            strict_neg = false;
            continue;
        }
        if visited >= budget {
            return Sign::Unknown;
        }
        let Some(param) = widest(&cell, &vars) else {
            return Sign::Unknown;
        };
        let iv = cell[&param];
        let mid = 0.5 * (iv.lo + iv.hi);
        let mut left = cell.clone();
        left.insert(param.clone(), FloatInterval::new(iv.lo, mid));
        let mut right = cell;
        right.insert(param, FloatInterval::new(mid, iv.hi));
        stack.push(left);
        stack.push(right);
        if !positive && !negative {
            return Sign::Unknown;
        }
    }
    match (positive, negative) {
        (true, false) if strict_pos => Sign::Positive,
        (true, false) => Sign::NonNegative,
        (false, true) if strict_neg => Sign::Negative,
        (false, true) => Sign::NonPositive,
        _ => Sign::Unknown,
    }
}

/// Sign of a rational function: sign(numerator) combined with a strictly
/// proven sign of the denominator.
pub fn prove_ratfunc_sign(f: &RationalFunction, b: &FloatBox, budget: usize) -> Sign {
    let ns = prove_sign(f.numerator(), b, budget);
    if ns == Sign::Zero {
        return Sign::Zero;
    }
    match prove_sign(f.denominator(), b, budget) {
        Sign::Positive => ns,
        Sign::Negative => ns.flip(),
        _ => Sign::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfunc::parse_rational_function;

    fn fbox(pairs: &[(&str, f64, f64)]) -> FloatBox {
        pairs
            .iter()
            .map(|(p, lo, hi)| (ParamId::new(*p), FloatInterval::new(*lo, *hi)))
            .collect()
    }

    fn poly(s: &str) -> Polynomial {
        parse_rational_function(s).unwrap().numerator().clone()
    }

    #[test]
    fn proves_dependency_heavy_positivity() {
        // p - p^2 + 0.01 > 0 on [0, 1] but naive enclosure is [-0.99, 1.01]
        let b = fbox(&[("p", 0.0, 1.0)]);
        assert_eq!(prove_sign(&poly("p - p^2 + 1/100"), &b, 4096), Sign::Positive);
    }

    #[test]
    fn sign_change_is_unknown() {
        let b = fbox(&[("p", 0.0, 1.0)]);
        assert_eq!(prove_sign(&poly("1 - 2*p"), &b, 4096), Sign::Unknown);
    }

    #[test]
    fn touching_zero_is_weak() {
        let b = fbox(&[("p", 0.0, 1.0)]);
        assert_eq!(prove_sign(&poly("p"), &b, 4096), Sign::NonNegative);
        let b = fbox(&[("p", 0.1, 1.0)]);
        assert_eq!(prove_sign(&poly("-p"), &b, 4096), Sign::Negative);
    }
}
