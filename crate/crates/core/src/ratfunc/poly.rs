//! Sparse multivariate polynomials over exact rationals.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{ParamId, RatFuncError, Valuation};
use crate::rational::Rational;

/// A power product of parameters. The empty monomial is the constant `1`.
///
/// The derived ordering (lexicographic on parameter identifiers, then on
/// exponent) is the storage and printing order. It is not compatible with
/// multiplication, so division uses [`GrLex`] instead.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<(ParamId, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(p: ParamId) -> Self {
        Monomial(vec![(p, 1)])
    }

    pub fn from_exponents<I: IntoIterator<Item = (ParamId, u32)>>(it: I) -> Self {
        let mut m: BTreeMap<ParamId, u32> = BTreeMap::new();
        for (p, e) in it {
            if e > 0 {
                *m.entry(p).or_insert(0) += e;
            }
        }
        Monomial(m.into_iter().collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, p: &ParamId) -> u32 {
        self.0
            .binary_search_by(|(q, _)| q.cmp(p))
            .map_or(0, |i| self.0[i].1)
    }

    pub fn exponents(&self) -> impl Iterator<Item = (&ParamId, u32)> {
        self.0.iter().map(|(p, e)| (p, *e))
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut m = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    m.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    m.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    m.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        m.extend_from_slice(&a[i..]);
        m.extend_from_slice(&b[j..]);
        Monomial(m)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut m = Vec::with_capacity(self.0.len());
        let mut rest = other.0.iter().peekable();
        for (p, e) in &self.0 {
            match rest.peek() {
                Some((q, f)) if q == p => {
                    match e.cmp(f) {
                        Ordering::Less => return None,
                        Ordering::Equal => {}
                        Ordering::Greater => m.push((p.clone(), e - f)),
                    }
                    rest.next();
                }
                Some((q, _)) if q < p => return None,
                _ => m.push((p.clone(), *e)),
            }
        }
        if rest.next().is_some() {
            return None;
        }
        Some(Monomial(m))
    }

    /// Componentwise minimum (the monomial gcd).
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|(p, e)| {
                    let f = other.exponent(p);
                    (f > 0).then(|| (p.clone(), (*e).min(f)))
                })
                .collect(),
        )
    }

    /// Derivative of the power product: `(exponent, reduced monomial)`.
    fn derive(&self, p: &ParamId) -> Option<(u32, Monomial)> {
        let i = self.0.binary_search_by(|(q, _)| q.cmp(p)).ok()?;
        let e = self.0[i].1;
        let mut m = self.0.clone();
        if e == 1 {
            m.remove(i);
        } else {
            m[i].1 = e - 1;
        }
        Some((e, Monomial(m)))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (p, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Graded lexicographic order, admissible for multiplication.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GrLex(Monomial);

impl Ord for GrLex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.degree().cmp(&other.0.degree()).then_with(|| {
            // lex: the first variable (by name) where exponents differ decides,
            // a larger exponent being the larger monomial
            let mut a = self.0 .0.iter().peekable();
            let mut b = other.0 .0.iter().peekable();
            loop {
                match (a.peek(), b.peek()) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Greater,
                    (None, Some(_)) => return Ordering::Less,
                    (Some((pa, ea)), Some((pb, eb))) => match pa.cmp(pb) {
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => match ea.cmp(eb) {
                            Ordering::Equal => {
                                a.next();
                                b.next();
                            }
                            o => return o,
                        },
                    },
                }
            }
        })
    }
}

impl PartialOrd for GrLex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A canonical sparse polynomial: no zero coefficients are ever stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Polynomial::from_terms([(Monomial::one(), c)])
    }

    pub fn var(p: ParamId) -> Self {
        Polynomial::from_terms([(Monomial::var(p), Rational::one())])
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(it: I) -> Self {
        let mut poly = Polynomial::zero();
        for (m, c) in it {
            poly.add_term(m, c);
        }
        poly
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    /// First term in storage order; the constant term whenever there is one.
    pub fn first_term(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next()
    }

    pub fn variables(&self) -> std::collections::BTreeSet<ParamId> {
        self.terms
            .keys()
            .flat_map(|m| m.exponents().map(|(p, _)| p.clone()))
            .collect()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, p: &ParamId) -> u32 {
        self.terms.keys().map(|m| m.exponent(p)).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(t, k)| (t.mul(m), k * c)).collect(),
        }
    }

    pub fn pow(&self, exp: u32) -> Polynomial {
        let mut result = Polynomial::one();
        for _ in 0..exp {
            result = &result * self;
        }
        result
    }

    /// Exact value at `valuation`. Works over integers: each value is written
    /// as `a/D` with a common `D`, and every term is scaled to `D^degree`, so
    /// only the final quotient is reduced.
    pub fn evaluate(&self, valuation: &Valuation) -> Result<Rational, RatFuncError> {
        let mut denom = BigInt::one();
        for m in self.terms.keys() {
            for (p, _) in m.exponents() {
                let v = valuation.get(p).ok_or_else(|| RatFuncError::MissingParameter(p.clone()))?;
                denom = denom.lcm(v.denom());
            }
        }
        let (coef_lcm, _) = self.content_parts();
        let degree = self.total_degree();
        let mut powers: BTreeMap<(&ParamId, u32), BigInt> = BTreeMap::new();
        let mut denom_powers: Vec<BigInt> = vec![BigInt::one()];
        for k in 1..=degree {
            let next = &denom_powers[k as usize - 1] * &denom;
            denom_powers.push(next);
        }
        let mut sum = BigInt::zero();
        for (m, c) in &self.terms {
            let mut term = c.numer() * (&coef_lcm / c.denom());
            for (p, e) in m.exponents() {
                let pw = powers.entry((p, e)).or_insert_with(|| {
                    let v = &valuation[p];
                    num_traits::pow(v.numer() * (&denom / v.denom()), e as usize)
                });
                term *= &*pw;
            }
            sum += term * &denom_powers[(degree - m.degree()) as usize];
        }
        Ok(Rational::new(sum, coef_lcm * &denom_powers[degree as usize]))
    }

    /// Float evaluation for sampling-heavy callers; `lookup` must cover every
    /// variable.
    pub fn evaluate_f64(&self, lookup: &impl Fn(&ParamId) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = crate::rational::to_f64(c);
                for (p, e) in m.exponents() {
                    t *= lookup(p).powi(e as i32);
                }
                t
            })
            .sum()
    }

    /// Substitutes exact values for some variables.
    pub fn substitute(&self, valuation: &Valuation) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            let mut rest = Vec::new();
            for (p, e) in m.exponents() {
                match valuation.get(p) {
                    Some(v) => coef *= crate::rational::pow(v, u64::from(e)),
                    None => rest.push((p.clone(), e)),
                }
            }
            out.add_term(Monomial::from_exponents(rest), coef);
        }
        out
    }

    pub fn partial_derivative(&self, p: &ParamId) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            if let Some((e, reduced)) = m.derive(p) {
                out.add_term(reduced, c * Rational::from_integer(BigInt::from(e)));
            }
        }
        out
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a
    /// remainder.
    pub fn div_exact(&self, divisor: &Polynomial) -> Option<Polynomial> {
        if divisor.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Polynomial::zero());
        }
        if let Some(c) = divisor.as_constant() {
            return Some(self.scale(&(Rational::one() / c)));
        }
        let (lead_m, lead_c) = divisor.grlex_lead();
        let divisor_rest: Vec<(GrLex, Rational)> = divisor
            .terms
            .iter()
            .filter(|(m, _)| **m != lead_m)
            .map(|(m, c)| (GrLex(m.clone()), c.clone()))
            .collect();
        let mut rem: BTreeMap<GrLex, Rational> = self
            .terms
            .iter()
            .map(|(m, c)| (GrLex(m.clone()), c.clone()))
            .collect();
        let mut quotient = Polynomial::zero();
        while let Some((top, top_c)) = rem.pop_last() {
            // lead(divisor) must divide lead(remainder) for an exact quotient
            let q_m = top.0.div(&lead_m)?;
            let q_c = top_c / &lead_c;
            for (m, c) in &divisor_rest {
                let delta = c * &q_c;
                match rem.entry(GrLex(m.0.mul(&q_m))) {
                    Entry::Vacant(v) => {
                        v.insert(-delta);
                    }
                    Entry::Occupied(mut o) => {
                        *o.get_mut() -= delta;
                        if o.get().is_zero() {
                            o.remove();
                        }
                    }
                }
            }
            quotient.add_term(q_m, q_c);
        }
        Some(quotient)
    }

    fn grlex_lead(&self) -> (Monomial, Rational) {
        let (m, c) = self
            .terms
            .iter()
            .max_by(|a, b| GrLex(a.0.clone()).cmp(&GrLex(b.0.clone())))
            .expect("non-zero polynomial");
        (m.clone(), c.clone())
    }

    /// `(lcm of coefficient denominators, gcd of coefficient numerators)`.
    pub(crate) fn content_parts(&self) -> (BigInt, BigInt) {
        let mut lcm = BigInt::one();
        let mut gcd = BigInt::zero();
        for c in self.terms.values() {
            lcm = lcm.lcm(c.denom());
            gcd = gcd.gcd(c.numer());
        }
        (lcm, gcd)
    }

    /// Gcd of all monomials (the largest monomial factor).
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |acc, m| acc.gcd(m))
    }

    pub fn div_monomial(&self, m: &Monomial) -> Option<Polynomial> {
        let mut out = BTreeMap::new();
        for (t, c) in &self.terms {
            out.insert(t.div(m)?, c.clone());
        }
        Some(Polynomial { terms: out })
    }

    pub(crate) fn first_coefficient_negative(&self) -> bool {
        self.first_term().is_some_and(|(_, c)| c.is_negative())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let negative = c.is_negative();
            let abs = c.abs();
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let coef = crate::rational::to_fraction_string(&abs);
            if m.is_one() {
                write!(f, "{coef}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{coef}*{m}")?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                (&self).$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
