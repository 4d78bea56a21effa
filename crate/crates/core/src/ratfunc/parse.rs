//! Parser for the infix text form, e.g. `(3/4*a1 + 1/4*a2) / (1 - r)`.

use super::{ParamId, RatFuncError, RationalFunction};
use crate::rational::parse_rational;

pub fn parse_rational_function(text: &str) -> Result<RationalFunction, RatFuncError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let f = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> RatFuncError {
        RatFuncError::Parse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<RationalFunction, RatFuncError> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == b'+' { acc.add(&rhs) } else { acc.sub(&rhs) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<RationalFunction, RatFuncError> {
        let mut acc = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == b'*' {
                acc.mul(&rhs)
            } else {
                acc.div(&rhs).map_err(|_| self.error("division by zero"))?
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<RationalFunction, RatFuncError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<RationalFunction, RatFuncError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let exp: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| self.error("expected a non-negative integer exponent"))?;
            let mut acc = RationalFunction::one();
            for _ in 0..exp {
                acc = acc.mul(&base);
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<RationalFunction, RatFuncError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                Ok(RationalFunction::param(ParamId::new(name)))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<RationalFunction, RatFuncError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        // scientific exponent only when a digit (optionally signed) follows
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let q = parse_rational(text).map_err(|_| self.error("malformed number"))?;
        Ok(RationalFunction::constant(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn parses_infix_forms() {
        let f = parse_rational_function("0.75*a1 + 0.25 * a2").unwrap();
        assert_eq!(f.to_string(), "3/4*a1 + 1/4*a2");
        let g = parse_rational_function("-(p)/(-1 + r)").unwrap();
        assert_eq!(g.to_string(), "(p) / (1 - r)");
        let h = parse_rational_function("3.2e-5").unwrap();
        assert_eq!(h.as_constant().unwrap(), ratio(32, 1_000_000));
        let k = parse_rational_function("(1 - x)^2").unwrap();
        assert_eq!(k.to_string(), "1 - 2*x + x^2");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rational_function("a +").is_err());
        assert!(parse_rational_function("(a").is_err());
        assert!(parse_rational_function("a / 0").is_err());
        assert!(parse_rational_function("a $ b").is_err());
    }
}
