//! Closed intervals of exact rationals and the float interval arithmetic used
//! for sign proofs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};

/// A closed interval `[lo, hi]` with exact endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "rational::serde_text")]
    pub lo: Rational,
    #[serde(with = "rational::serde_text")]
    pub hi: Rational,
}

impl Interval {
    /// Panics if `lo > hi`; use [`Interval::try_new`] for untrusted input.
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "interval lower bound exceeds upper bound");
        Interval { lo, hi }
    }

    pub fn try_new(lo: Rational, hi: Rational) -> Option<Self> {
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(x: Rational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / rational::int(2)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Outward float enclosure.
    pub fn to_f64(&self) -> FloatInterval {
        FloatInterval::new(FloatInterval::enclose(&self.lo).lo, FloatInterval::enclose(&self.hi).hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", rational::format_sig(&self.lo), rational::format_sig(&self.hi))
    }
}

/// Float interval with directed outward rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloatInterval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

/// `(round-down, round-up)` of `a + b`, exact when the float sum is.
fn add_dir(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    if !s.is_finite() {
        return (s, s);
    }
    // two-sum error term
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err > 0.0 {
        (s, up(s))
    } else if err < 0.0 {
        (down(s), s)
    } else {
        (s, s)
    }
}

/// `(round-down, round-up)` of `a * b`, exact when the float product is.
fn mul_dir(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if !p.is_finite() || p == 0.0 && (a == 0.0 || b == 0.0) {
        return (p, p);
    }
    let err = a.mul_add(b, -p);
    if err > 0.0 {
        (p, up(p))
    } else if err < 0.0 {
        (down(p), p)
    } else if p == 0.0 {
        // underflow with a zero residual still hides a tiny non-zero product
        (down(p), up(p))
    } else {
        (p, p)
    }
}

impl FloatInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        FloatInterval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        FloatInterval { lo: x, hi: x }
    }

    /// Encloses an exact rational; a point when the value is a float.
    pub fn enclose(q: &Rational) -> Self {
        let x = rational::to_f64(q);
        if x.is_finite() && rational::from_f64(x) == *q {
            FloatInterval::point(x)
        } else {
            FloatInterval { lo: down(x), hi: up(x) }
        }
    }

    /// Reciprocal of an interval not containing zero.
    pub fn recip(self) -> Self {
        debug_assert!(!self.contains_zero());
        FloatInterval::new(down(1.0 / self.hi), up(1.0 / self.lo))
    }

    /// `self^n`, tight for even powers straddling zero.
    pub fn powi(self, n: u32) -> Self {
        if n == 0 {
            return FloatInterval::point(1.0);
        }
        let mut acc = self;
        for _ in 1..n {
            acc = acc * self;
        }
        if n.is_multiple_of(2) {
            acc.lo = acc.lo.max(0.0);
        }
        acc
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    pub fn strictly_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn strictly_negative(&self) -> bool {
        self.hi < 0.0
    }
}

impl std::ops::Add for FloatInterval {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        FloatInterval::new(add_dir(self.lo, o.lo).0, add_dir(self.hi, o.hi).1)
    }
}

impl std::ops::Mul for FloatInterval {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        let c = [
            mul_dir(self.lo, o.lo),
            mul_dir(self.lo, o.hi),
            mul_dir(self.hi, o.lo),
            mul_dir(self.hi, o.hi),
        ];
        let lo = c.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        FloatInterval::new(lo, hi)
    }
}

impl std::ops::Neg for FloatInterval {
    type Output = Self;

    fn neg(self) -> Self {
        FloatInterval::new(-self.hi, -self.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn membership_is_closed() {
        let i = Interval::new(ratio(1, 10), ratio(1, 2));
        assert!(i.contains(&ratio(1, 10)));
        assert!(i.contains(&ratio(1, 2)));
        assert!(!i.contains(&ratio(51, 100)));
        assert_eq!(i.width(), ratio(2, 5));
        assert_eq!(i.midpoint(), ratio(3, 10));
    }

    #[test]
    fn float_ops_enclose() {
        let a = FloatInterval::new(-1.0, 2.0);
        let sq = a.powi(2);
        assert!(sq.lo <= 0.0 && sq.hi >= 4.0);
        let p = a * FloatInterval::new(3.0, 4.0);
        assert!(p.lo <= -4.0 && p.hi >= 8.0);
        assert!((FloatInterval::new(0.1, 0.2) + FloatInterval::point(0.3)).strictly_positive());
    }
}
