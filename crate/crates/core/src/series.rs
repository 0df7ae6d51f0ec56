//! Polynomials in a single variable `t` and a small parser for the factored
//! expressions used in published Hilbert-series tables.
//!
//! Grammar (whitespace ignored, juxtaposition multiplies):
//! `expr := term (('+'|'-') term)*`, `term := unary ('*'? unary)*`,
//! `unary := '-' unary | atom ('^' int)?`,
//! `atom := int ('/' int)? | 't' | '(' expr ')' | 'P_t(' name ')'`.

use crate::rational::Rational;

/// Dense coefficients, lowest degree first.
pub type TPoly = Vec<Rational>;

pub fn trim(p: &mut TPoly) {
    while p.last().is_some_and(Rational::is_zero) {
        p.pop();
    }
}

pub fn from_ints(c: &[i64]) -> TPoly {
    let mut p: TPoly = c.iter().map(|&x| Rational::from_int(x)).collect();
    trim(&mut p);
    p
}

/// Integer coefficients, or `None` if some coefficient is fractional.
pub fn to_ints(p: &TPoly) -> Option<Vec<i64>> {
    let mut out = Vec::with_capacity(p.len());
    for c in p {
        if !c.is_integer() {
            return None;
        }
        out.push(c.to_i64()?);
    }
    while out.last() == Some(&0) {
        out.pop();
    }
    Some(out)
}

pub fn add(a: &TPoly, b: &TPoly) -> TPoly {
    let mut out = vec![Rational::zero(); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
    }
    trim(&mut out);
    out
}

pub fn neg(a: &TPoly) -> TPoly {
    a.iter().map(|c| -c.clone()).collect()
}

pub fn mul(a: &TPoly, b: &TPoly) -> TPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += &(x * y);
        }
    }
    trim(&mut out);
    out
}

pub fn pow(a: &TPoly, k: u32) -> TPoly {
    let mut acc = vec![Rational::one()];
    for _ in 0..k {
        acc = mul(&acc, a);
    }
    acc
}

/// Integer-coefficient helpers.
pub mod int {
    pub fn trim(mut v: Vec<i64>) -> Vec<i64> {
        while v.last() == Some(&0) {
            v.pop();
        }
        v
    }

    pub fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
        let mut out = vec![0i64; a.len().max(b.len())];
        for (i, c) in a.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in b.iter().enumerate() {
            out[i] += c;
        }
        trim(out)
    }

    pub fn scale(a: &[i64], k: i64) -> Vec<i64> {
        trim(a.iter().map(|c| c * k).collect())
    }

    pub fn mul(a: &[i64], b: &[i64]) -> Vec<i64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0i64; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        trim(out)
    }

    pub fn pow(a: &[i64], k: u32) -> Vec<i64> {
        let mut acc = vec![1];
        for _ in 0..k {
            acc = mul(&acc, a);
        }
        acc
    }

    /// `(1 + t^k)`.
    pub fn one_plus(k: usize) -> Vec<i64> {
        let mut v = vec![0i64; k + 1];
        v[0] += 1;
        v[k] += 1;
        v
    }

    /// Multiplies by `Π (1 - t^{e_i})` and truncates to `len` coefficients.
    pub fn times_denominator(a: &[i64], exps: &[usize], len: usize) -> Vec<i64> {
        let mut c: Vec<i64> = a.iter().copied().take(len).collect();
        c.resize(len, 0);
        for &e in exps {
            for d in (e..len).rev() {
                c[d] -= c[d - e];
            }
        }
        c
    }

    /// Human-readable form such as `1 + 4t^3 - t^12`.
    pub fn render(a: &[i64]) -> String {
        let mut parts = Vec::new();
        for (d, &c) in a.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mono = match d {
                0 => String::new(),
                1 => "t".to_string(),
                _ => format!("t^{d}"),
            };
            let mag = c.unsigned_abs();
            let body = if mono.is_empty() {
                format!("{mag}")
            } else if mag == 1 {
                mono
            } else {
                format!("{mag}{mono}")
            };
            if parts.is_empty() {
                parts.push(if c < 0 { format!("-{body}") } else { body });
            } else {
                parts.push(format!("{} {body}", if c < 0 { "-" } else { "+" }));
            }
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" ")
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected {found} at offset {pos}")]
    Unexpected { pos: usize, found: String },
    #[error("unknown name {0} in P_t(...)")]
    UnknownName(String),
}

struct Parser<'a, F> {
    s: &'a [u8],
    pos: usize,
    lookup: F,
}

impl<F: Fn(&str) -> Option<TPoly>> Parser<'_, F> {
    fn skip(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.s.get(self.pos).copied()
    }

    fn err<T>(&self) -> Result<T, ParseError> {
        let found = match self.s.get(self.pos) {
            Some(&c) => format!("'{}'", c as char),
            None => "end of input".into(),
        };
        Err(ParseError::Unexpected { pos: self.pos, found })
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err()
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        self.skip();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err();
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().map_err(|_| ParseError::Unexpected {
            pos: start,
            found: "integer overflow".into(),
        })
    }

    fn expr(&mut self) -> Result<TPoly, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = add(&acc, &self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = add(&acc, &neg(&self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn starts_atom(&mut self) -> bool {
        matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b't' || c == b'(' || c == b'P')
    }

    fn term(&mut self) -> Result<TPoly, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.peek() == Some(b'*') {
                self.pos += 1;
                acc = mul(&acc, &self.unary()?);
            } else if self.starts_atom() {
                acc = mul(&acc, &self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<TPoly, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(neg(&self.unary()?));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.int()?;
            return Ok(pow(&base, k as u32));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<TPoly, ParseError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let n = self.int()?;
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    let d = self.int()?;
                    return Ok(vec![Rational::new(n, d)]);
                }
                Ok(vec![Rational::from_int(n)])
            }
            Some(b't') => {
                self.pos += 1;
                Ok(vec![Rational::zero(), Rational::one()])
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'P') => {
                for &c in b"P_t(" {
                    if self.s.get(self.pos) != Some(&c) {
                        return self.err();
                    }
                    self.pos += 1;
                }
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos] != b')' {
                    self.pos += 1;
                }
                let name: String =
                    std::str::from_utf8(&self.s[start..self.pos]).unwrap().chars().filter(|c| !c.is_whitespace()).collect();
                self.expect(b')')?;
                (self.lookup)(&name).ok_or(ParseError::UnknownName(name))
            }
            _ => self.err(),
        }
    }
}

/// Expands an expression; `lookup` resolves `P_t(name)`.
pub fn parse_expr(s: &str, lookup: impl Fn(&str) -> Option<TPoly>) -> Result<TPoly, ParseError> {
    let mut p = Parser { s: s.as_bytes(), pos: 0, lookup };
    let e = p.expr()?;
    p.skip();
    if p.pos != p.s.len() {
        return p.err();
    }
    Ok(e)
}
