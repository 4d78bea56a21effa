//! Exact rational numbers and their textual forms.
//!
//! Every probability that enters the library is parsed straight into a
//! [`Rational`]; `"0.05"` becomes `1/20` exactly. Floating point only shows up
//! when printing or when sampling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid number literal `{0}`")]
pub struct NumberError(pub String);

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"3"`, `"-1/4"`, `"0.05"`, `"3.2e-5"` or `"1E3"` into an exact value.
pub fn parse_rational(text: &str) -> Result<Rational, NumberError> {
    let s = text.trim();
    let err = || NumberError(text.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_decimal(n.trim()).ok_or_else(err)?;
        let d = parse_decimal(d.trim()).ok_or_else(err)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{whole}{frac}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(numer);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Canonical text: `"3"`, `"-1/4"`.
pub fn to_fraction_string(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Only reachable for magnitudes outside f64 range.
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Nearest exact rational to a finite float (the float's binary value).
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(Rational::zero)
}

/// Six significant digits, the output-layer rendering of every number.
pub fn format_sig(q: &Rational) -> String {
    format_f64_sig(to_f64(q))
}

pub fn format_f64_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        let decimals = (5 - magnitude).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{x:.5e}");
        match s.split_once('e') {
            Some((m, e)) => format!("{}e{}", trim_zeros(m), e),
            None => s,
        }
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Renders either the exact fraction or the 6-significant-digit decimal.
pub fn render(q: &Rational, exact: bool) -> String {
    if exact {
        to_fraction_string(q)
    } else {
        format_sig(q)
    }
}

pub fn in_unit_interval(q: &Rational) -> bool {
    !q.is_negative() && *q <= Rational::one()
}

/// `base^exp` for a non-negative integer exponent, with `0^0 = 1`.
pub fn pow(base: &Rational, exp: u64) -> Rational {
    // A reduced fraction stays reduced under powers: skip the gcd.
    let e = exp as usize;
    Rational::new_raw(num_traits::pow(base.numer().clone(), e), num_traits::pow(base.denom().clone(), e))
}

/// Smallest decimal with about `digits` significant digits that is `>= q`.
/// Keeps conservative upper bounds cheap to substitute.
pub fn round_up_sig(q: &Rational, digits: u32) -> Rational {
    if q.is_zero() {
        return q.clone();
    }
    let magnitude = to_f64(&q.abs()).log10().floor() as i64;
    let k = digits as i64 - 1 - magnitude;
    let scale = Rational::from_integer(num_traits::pow(BigInt::from(10), k.unsigned_abs() as usize));
    if k >= 0 {
        (q * &scale).ceil() / scale
    } else {
        (q / &scale).ceil() * scale
    }
}

pub mod serde_text {
    //! Serde adapter storing a [`Rational`] as its fraction string.
    use super::{parse_rational, to_fraction_string, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_fraction_string(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_rational("0.05").unwrap(), ratio(1, 20));
        assert_eq!(parse_rational("3.2e-5").unwrap(), ratio(32, 1_000_000));
        assert_eq!(parse_rational("1E3").unwrap(), int(1000));
        assert_eq!(parse_rational("-1/4").unwrap(), ratio(-1, 4));
        assert_eq!(parse_rational(" 25/40 ").unwrap(), ratio(5, 8));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(&ratio(1, 3)), "0.333333");
        assert_eq!(format_sig(&ratio(9, 1000)), "0.009");
        assert_eq!(format_f64_sig(3.2e-5), "3.2e-5");
        assert_eq!(format_f64_sig(0.857216), "0.857216");
        assert_eq!(format_sig(&int(1)), "1");
        assert_eq!(to_fraction_string(&ratio(6, 8)), "3/4");
        assert_eq!(round_up_sig(&ratio(1, 3), 3), ratio(334, 1000));
        assert_eq!(round_up_sig(&ratio(1, 4), 3), ratio(1, 4));
        assert_eq!(round_up_sig(&int(123456), 2), int(130000));
    }

    #[test]
    fn zero_to_the_zero_is_one() {
        assert_eq!(pow(&int(0), 0), int(1));
        assert_eq!(pow(&ratio(1, 2), 3), ratio(1, 8));
    }
}
