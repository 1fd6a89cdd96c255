//! Infix syntax for group-ring elements.
//!
//! ```text
//! expr   := [+|-] term ((+|-) term)*
//! term   := factor ([*] factor)*          juxtaposition multiplies
//! factor := atom [^ int]
//! atom   := number | ( expr ) | z[^k]@n | generator | e
//! ```
//!
//! Numbers are integers, fractions `p/q` (exact) or decimals (float).
//! `z^k@n` is the root of unity `ζₙᵏ`. Negative powers are allowed on
//! generators and roots of unity only.

use alloc::string::ToString;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};
use crate::group::Group;
use crate::ring::{Coefficient, RingElement, RingMatrix};

struct Parser<'a> {
    group: &'a Group,
    input: &'a str,
    pos: usize,
    names: Vec<(usize, &'a str)>,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: &str) -> Error {
        Error::Parse { input: self.input.to_string(), offset: self.pos, reason: reason.to_string() }
    }

    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn expr(&mut self) -> Result<RingElement> {
        let mut acc = RingElement::zero(self.group);
        let mut sign = 1;
        match self.peek() {
            Some('-') => {
                sign = -1;
                self.pos += 1;
            }
            Some('+') => self.pos += 1,
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = if sign < 0 { acc.sub(&t)? } else { acc.add(&t)? };
            match self.peek() {
                Some('+') => sign = 1,
                Some('-') => sign = -1,
                _ => return Ok(acc),
            }
            self.pos += 1;
        }
    }

    fn starts_factor(c: char) -> bool {
        c.is_alphanumeric() || c == '(' || c == '.'
    }

    fn term(&mut self) -> Result<RingElement> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some('*') | Some('·') => {
                    self.pos += self.rest().chars().next().unwrap().len_utf8();
                }
                Some(c) if Self::starts_factor(c) => {}
                _ => return Ok(acc),
            }
            let f = self.factor()?;
            acc = acc.convolve(&f)?;
        }
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.input.as_bytes();
        if matches!(bytes.get(self.pos), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        while bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        self.input[start..self.pos].parse().map_err(|_| self.err("expected an integer"))
    }

    fn exponent(&mut self) -> Result<Option<i64>> {
        if self.rest().starts_with("⁻¹") {
            self.pos += "⁻¹".len();
            return Ok(Some(-1));
        }
        if self.rest().starts_with('^') {
            self.pos += 1;
            return self.integer().map(Some);
        }
        Ok(None)
    }

    fn factor(&mut self) -> Result<RingElement> {
        let c = self.peek().ok_or_else(|| self.err("unexpected end of input"))?;
        if c == '(' {
            self.pos += 1;
            let inner = self.expr()?;
            if self.peek() != Some(')') {
                return Err(self.err("expected `)`"));
            }
            self.pos += 1;
            return match self.exponent()? {
                None => Ok(inner),
                Some(k) if k < 0 => Err(self.err("negative power of a ring element")),
                Some(k) => {
                    let mut acc = RingElement::one(self.group);
                    for _ in 0..k {
                        acc = acc.convolve(&inner)?;
                    }
                    Ok(acc)
                }
            };
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if let Some(root) = self.root_of_unity()? {
            return Ok(RingElement::scalar(self.group, Coefficient::Exact(root)));
        }
        let rest = self.rest();
        let matched = self.names.iter().find(|(_, n)| rest.starts_with(n)).copied();
        let element = match matched {
            Some((i, n)) => {
                self.pos += n.len();
                self.group.generators()[i].element.clone()
            }
            None if c == 'e' => {
                self.pos += 1;
                self.group.identity()
            }
            None => return Err(self.err("expected a number, generator or `(`")),
        };
        let k = self.exponent()?.unwrap_or(1);
        Ok(RingElement::monomial(self.group, self.group.pow(&element, k)?, Coefficient::one()))
    }

    fn root_of_unity(&mut self) -> Result<Option<Cyclotomic>> {
        let rest = self.rest();
        if !rest.starts_with('z') {
            return Ok(None);
        }
        let after = &rest[1..];
        let looks_like_root = after.starts_with('@')
            || (after.starts_with('^')
                && after[1..].trim_start_matches(['-', '+']).trim_start_matches(|c: char| c.is_ascii_digit()).starts_with('@'));
        if !looks_like_root {
            return Ok(None);
        }
        self.pos += 1;
        let k = self.exponent()?.unwrap_or(1);
        self.pos += 1; // '@'
        let start = self.pos;
        let n = self.integer()?;
        if n <= 0 || n > u32::MAX as i64 {
            self.pos = start;
            return Err(self.err("conductor must be positive"));
        }
        Ok(Some(Cyclotomic::zeta(n as u32, k)))
    }

    fn number(&mut self) -> Result<RingElement> {
        let start = self.pos;
        let bytes = self.input.as_bytes();
        let digits = |p: &mut usize| {
            while bytes.get(*p).is_some_and(|b| b.is_ascii_digit()) {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        let c = match bytes.get(self.pos) {
            Some(b'.') => {
                self.pos += 1;
                digits(&mut self.pos);
                let v: f64 = self.input[start..self.pos].parse().map_err(|_| self.err("bad decimal"))?;
                Coefficient::real(v)
            }
            Some(b'/') => {
                let p: BigInt = self.input[start..self.pos].parse().map_err(|_| self.err("bad numerator"))?;
                self.pos += 1;
                let s = self.pos;
                digits(&mut self.pos);
                let q: BigInt = self.input[s..self.pos].parse().map_err(|_| self.err("bad denominator"))?;
                if q == BigInt::from(0) {
                    return Err(self.err("zero denominator"));
                }
                Coefficient::Exact(Cyclotomic::rational(BigRational::new(p, q)))
            }
            _ => {
                let p: BigInt = self.input[start..self.pos].parse().map_err(|_| self.err("bad integer"))?;
                Coefficient::Exact(Cyclotomic::rational(BigRational::from_integer(p)))
            }
        };
        Ok(RingElement::scalar(self.group, c))
    }
}

/// Parses an infix group-ring expression such as `(1 - t)(2 - u - u^-1)`.
pub fn parse_element(group: &Group, input: &str) -> Result<RingElement> {
    let mut names: Vec<(usize, &str)> =
        group.generators().iter().enumerate().map(|(i, g)| (i, g.name.as_str())).collect();
    names.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
    let mut p = Parser { group, input, pos: 0, names };
    let x = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(x)
}

/// Parses a square matrix given as rows of expressions.
pub fn parse_matrix<S: AsRef<str>>(group: &Group, rows: &[Vec<S>]) -> Result<RingMatrix> {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|s| parse_element(group, s.as_ref())).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    RingMatrix::from_rows(group, rows)
}
