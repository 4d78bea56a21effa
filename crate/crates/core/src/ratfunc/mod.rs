//! Exact rational functions of the model parameters.
//!
//! A [`RationalFunction`] is kept in a normal form: the denominator is a
//! primitive integer polynomial whose first term (constant term when present)
//! is positive, common monomial factors are cancelled, and a denominator that
//! exactly divides the numerator (or vice versa) is divided out. Full
//! multivariate gcd cancellation is not attempted.

mod parse;
mod poly;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

pub use parse::parse_rational_function;
pub use poly::{Monomial, Polynomial};

/// Name of an unknown transition parameter, e.g. `a1` or `x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamId(Arc<str>);

impl ParamId {
    pub fn new(name: impl Into<String>) -> Self {
        ParamId(Arc::from(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Identifiers are `[A-Za-z_][A-Za-z0-9_]*` so the infix text form can be
    /// parsed back unambiguously.
    pub fn is_valid_name(name: &str) -> bool {
        let mut chars = name.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ParamId {
    fn from(s: &str) -> Self {
        ParamId::new(s)
    }
}

pub type Valuation = BTreeMap<ParamId, Rational>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatFuncError {
    #[error("parameter `{0}` has no value in the valuation")]
    MissingParameter(ParamId),
    #[error("denominator evaluates to zero")]
    ZeroDenominator,
    #[error("division by the zero function")]
    DivisionByZero,
    #[error("cannot parse rational function at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    numerator: Polynomial,
    denominator: Polynomial,
}

impl RationalFunction {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self, RatFuncError> {
        if denominator.is_zero() {
            return Err(RatFuncError::DivisionByZero);
        }
        Ok(Self::normalized(numerator, denominator))
    }

    pub fn zero() -> Self {
        RationalFunction {
            numerator: Polynomial::zero(),
            denominator: Polynomial::one(),
        }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        RationalFunction {
            numerator: Polynomial::constant(c),
            denominator: Polynomial::one(),
        }
    }

    pub fn param(p: ParamId) -> Self {
        RationalFunction {
            numerator: Polynomial::var(p),
            denominator: Polynomial::one(),
        }
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        RationalFunction {
            numerator: p,
            denominator: Polynomial::one(),
        }
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        let n = self.numerator.as_constant()?;
        let d = self.denominator.as_constant()?;
        Some(n / d)
    }

    pub fn variables(&self) -> BTreeSet<ParamId> {
        let mut v = self.numerator.variables();
        v.extend(self.denominator.variables());
        v
    }

    fn normalized(num: Polynomial, den: Polynomial) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        let (mut num, mut den) = (num, den);

        let common = num.monomial_content().gcd(&den.monomial_content());
        if !common.is_one() {
            num = num.div_monomial(&common).expect("monomial content divides");
            den = den.div_monomial(&common).expect("monomial content divides");
        }

        if den.as_constant().is_none() {
            if let Some(q) = num.div_exact(&den) {
                num = q;
                den = Polynomial::one();
            } else if num.as_constant().is_none() {
                if let Some(q) = den.div_exact(&num) {
                    num = Polynomial::one();
                    den = q;
                }
            }
        }

        let (lcm, gcd) = den.content_parts();
        let mut factor = Rational::new(lcm, gcd);
        if den.first_coefficient_negative() {
            factor = -factor;
        }
        if !factor.is_one() {
            num = num.scale(&factor);
            den = den.scale(&factor);
        }
        RationalFunction {
            numerator: num,
            denominator: den,
        }
    }

    /// Re-applies the normal form; a no-op on values built by this module.
    pub fn normalize(&self) -> Self {
        Self::normalized(self.numerator.clone(), self.denominator.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.denominator == other.denominator {
            return Self::normalized(&self.numerator + &other.numerator, self.denominator.clone());
        }
        if let Some(k) = other.denominator.div_exact(&self.denominator) {
            let num = &(&self.numerator * &k) + &other.numerator;
            return Self::normalized(num, other.denominator.clone());
        }
        if let Some(k) = self.denominator.div_exact(&other.denominator) {
            let num = &self.numerator + &(&other.numerator * &k);
            return Self::normalized(num, self.denominator.clone());
        }
        let num = &(&self.numerator * &other.denominator) + &(&other.numerator * &self.denominator);
        Self::normalized(num, &self.denominator * &other.denominator)
    }

    pub fn neg(&self) -> Self {
        RationalFunction {
            numerator: -&self.numerator,
            denominator: self.denominator.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        // cross-cancel before multiplying out
        let (mut n1, mut d2) = (self.numerator.clone(), other.denominator.clone());
        if let Some(q) = n1.div_exact(&d2) {
            n1 = q;
            d2 = Polynomial::one();
        }
        let (mut n2, mut d1) = (other.numerator.clone(), self.denominator.clone());
        if let Some(q) = n2.div_exact(&d1) {
            n2 = q;
            d1 = Polynomial::one();
        }
        Self::normalized(&n1 * &n2, &d1 * &d2)
    }

    pub fn div(&self, other: &Self) -> Result<Self, RatFuncError> {
        if other.is_zero() {
            return Err(RatFuncError::DivisionByZero);
        }
        let inverse = RationalFunction {
            numerator: other.denominator.clone(),
            denominator: other.numerator.clone(),
        };
        Ok(self.mul(&inverse))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::normalized(self.numerator.scale(c), self.denominator.clone())
    }

    pub fn evaluate(&self, valuation: &Valuation) -> Result<Rational, RatFuncError> {
        let d = self.denominator.evaluate(valuation)?;
        if d.is_zero() {
            return Err(RatFuncError::ZeroDenominator);
        }
        Ok(self.numerator.evaluate(valuation)? / d)
    }

    pub fn evaluate_f64(&self, lookup: &impl Fn(&ParamId) -> f64) -> f64 {
        self.numerator.evaluate_f64(lookup) / self.denominator.evaluate_f64(lookup)
    }

    /// Quotient-rule derivative `(N'D - ND') / D^2`.
    pub fn partial_derivative(&self, p: &ParamId) -> Self {
        let dn = self.numerator.partial_derivative(p);
        let dd = self.denominator.partial_derivative(p);
        if dd.is_zero() {
            return Self::normalized(dn, self.denominator.clone());
        }
        let num = &(&dn * &self.denominator) - &(&self.numerator * &dd);
        Self::normalized(num, &self.denominator * &self.denominator)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator.is_one() {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "({}) / ({})", self.numerator, self.denominator)
        }
    }
}

impl FromStr for RationalFunction {
    type Err = RatFuncError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational_function(s)
    }
}

impl Serialize for RationalFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RationalFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn v(name: &str) -> RationalFunction {
        RationalFunction::param(ParamId::new(name))
    }

    fn c(n: i64, d: i64) -> RationalFunction {
        RationalFunction::constant(ratio(n, d))
    }

    fn one_minus(name: &str) -> RationalFunction {
        RationalFunction::one().sub(&v(name))
    }

    fn valuation(pairs: &[(&str, Rational)]) -> Valuation {
        pairs.iter().map(|(k, q)| (ParamId::new(*k), q.clone())).collect()
    }

    #[test]
    fn add_examples() {
        assert_eq!(v("p").add(&v("q")).to_string(), "p + q");
        let inv = RationalFunction::one().div(&v("p")).unwrap();
        assert_eq!(inv.add(&inv.neg()), RationalFunction::zero());
        let f = v("p").div(&one_minus("r")).unwrap();
        let g = v("r").div(&one_minus("r")).unwrap();
        let sum = f.add(&g);
        let expected = v("p").add(&v("r")).div(&one_minus("r")).unwrap();
        assert_eq!(sum, expected);
        assert_eq!(sum.to_string(), "(p + r) / (1 - r)");
    }

    #[test]
    fn mul_div_examples() {
        let inv = RationalFunction::one().div(&v("p")).unwrap();
        assert_eq!(v("p").mul(&inv), RationalFunction::one());
        assert_eq!(v("p").mul(&v("q")).div(&v("q")).unwrap(), v("p"));
        assert_eq!(RationalFunction::zero().mul(&v("p")), RationalFunction::zero());
        assert_eq!(v("p").div(&RationalFunction::zero()), Err(RatFuncError::DivisionByZero));
    }

    #[test]
    fn evaluate_examples() {
        let f = v("a1").scale(&ratio(3, 4)).add(&v("a2").scale(&ratio(1, 4)));
        let val = valuation(&[("a1", ratio(5, 100)), ("a2", ratio(3, 100))]);
        assert_eq!(f.evaluate(&val).unwrap(), ratio(45, 1000));
        assert_eq!(RationalFunction::one().evaluate(&Valuation::new()).unwrap(), int(1));
        let g = v("p").div(&one_minus("r")).unwrap();
        let val = valuation(&[("p", ratio(1, 2)), ("r", ratio(1, 2))]);
        assert_eq!(g.evaluate(&val).unwrap(), int(1));
    }

    #[test]
    fn evaluate_errors() {
        let g = v("p").div(&one_minus("r")).unwrap();
        let missing = valuation(&[("p", ratio(1, 2))]);
        assert_eq!(g.evaluate(&missing), Err(RatFuncError::MissingParameter("r".into())));
        let singular = valuation(&[("p", ratio(1, 2)), ("r", int(1))]);
        assert_eq!(g.evaluate(&singular), Err(RatFuncError::ZeroDenominator));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(v("p").partial_derivative(&"p".into()), RationalFunction::one());
        let f = v("p").div(&one_minus("r")).unwrap();
        assert_eq!(
            f.partial_derivative(&"p".into()),
            RationalFunction::one().div(&one_minus("r")).unwrap()
        );
        let expected = v("p").div(&one_minus("r").mul(&one_minus("r"))).unwrap();
        assert_eq!(f.partial_derivative(&"r".into()), expected);
    }

    #[test]
    fn zero_over_constant_is_zero_over_one() {
        let f = RationalFunction::new(Polynomial::zero(), Polynomial::constant(int(7))).unwrap();
        assert_eq!(f.numerator(), &Polynomial::zero());
        assert_eq!(f.denominator(), &Polynomial::one());
        assert!(RationalFunction::new(Polynomial::one(), Polynomial::zero()).is_err());
    }

    #[test]
    fn constant_denominator_folds_into_numerator() {
        let f = c(1, 2);
        assert_eq!(f.to_string(), "1/2");
        assert!(f.denominator().is_one());
        let g = v("p").div(&c(4, 1)).unwrap();
        assert_eq!(g.to_string(), "1/4*p");
    }

    #[test]
    fn denominator_sign_is_fixed() {
        let f = v("p").div(&v("r").sub(&RationalFunction::one())).unwrap();
        assert_eq!(f.to_string(), "(-p) / (1 - r)");
        let g = RationalFunction::one().div(&v("r").neg()).unwrap();
        assert_eq!(g.to_string(), "(-1) / (r)");
    }

    #[test]
    fn text_round_trip() {
        let f = v("a1")
            .scale(&ratio(3, 4))
            .add(&v("a2").scale(&ratio(1, 4)))
            .div(&one_minus("r"))
            .unwrap();
        assert_eq!(f.to_string(), "(3/4*a1 + 1/4*a2) / (1 - r)");
        let back: RationalFunction = f.to_string().parse().unwrap();
        assert_eq!(back, f);
    }
}
