//! Sparse multivariate polynomials with rational coefficients.
//!
//! Exponent vectors are indexed by variable; a polynomial of polynomial
//! degree `q` has cohomological degree `2q`.

use std::collections::BTreeMap;
use std::fmt;

use crate::linalg::rref_rows;
use crate::monomial;
use crate::rational::Rational;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rational::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, Rational::one());
        p
    }

    pub fn monomial(exps: Vec<u32>, c: Rational) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    /// The linear form `Σ c_i x_i`.
    pub fn linear(coeffs: &[Rational]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n);
        for (i, c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, c.clone());
        }
        p
    }

    pub fn linear_i64(coeffs: &[i64]) -> Self {
        Self::linear(&coeffs.iter().map(|&c| Rational::from_int(c)).collect::<Vec<_>>())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Rational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: Rational) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += &c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Polynomial degree if homogeneous, `None` for zero or mixed degree.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|e| monomial::degree(e));
        let d = it.next()?;
        it.all(|x| x == d).then_some(d)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), c.clone());
        }
        p
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(&Rational::from_int(-1)))
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut p = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, c1 * c2);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::one(self.nvars);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Substitutes `x_i ↦ images[i]`.
    pub fn compose(&self, images: &[Poly]) -> Poly {
        assert_eq!(images.len(), self.nvars);
        let m = images.first().map_or(0, |p| p.nvars);
        let mut out = Poly::zero(m);
        for (e, c) in &self.terms {
            let mut t = Poly::constant(m, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&images[i].pow(k));
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Coordinates in the canonical monomial basis of polynomial degree `q`.
    pub fn to_dense(&self, q: u32) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); monomial::count(self.nvars, q)];
        for (e, c) in &self.terms {
            assert_eq!(monomial::degree(e), q, "polynomial not homogeneous of degree {q}");
            v[monomial::rank(e)] = c.clone();
        }
        v
    }

    pub fn from_dense(nvars: usize, q: u32, v: &[Rational]) -> Poly {
        let l = monomial::list(nvars, q);
        let mut p = Poly::zero(nvars);
        for (e, c) in l.iter().zip(v) {
            p.add_term(e.clone(), c.clone());
        }
        p
    }

    /// Exact quotient `self / d` for homogeneous inputs, or `None` when `d`
    /// does not divide.
    pub fn divide(&self, d: &Poly) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly::zero(self.nvars));
        }
        let qf = self.homogeneous_degree()?;
        let qd = d.homogeneous_degree()?;
        if qd > qf {
            return None;
        }
        let k = qf - qd;
        let basis = monomial::list(self.nvars, k);
        let rows_n = monomial::count(self.nvars, qf);
        // augmented system: columns are d·m for each monomial m, then the target
        let ncols = basis.len() + 1;
        let mut rows = vec![vec![Rational::zero(); ncols]; rows_n];
        for (j, m) in basis.iter().enumerate() {
            for (e, c) in &d.terms {
                let s: Vec<u32> = e.iter().zip(m.iter()).map(|(a, b)| a + b).collect();
                rows[monomial::rank(&s)][j] = c.clone();
            }
        }
        for (e, c) in &self.terms {
            rows[monomial::rank(e)][basis.len()] = c.clone();
        }
        let pivots = rref_rows(&mut rows, ncols);
        if pivots.last() == Some(&basis.len()) {
            return None;
        }
        let mut sol = vec![Rational::zero(); basis.len()];
        for (i, &p) in pivots.iter().enumerate() {
            sol[p] = rows[i][basis.len()].clone();
        }
        Some(Poly::from_dense(self.nvars, k, &sol))
    }

    /// Constant term.
    pub fn constant_term(&self) -> Rational {
        self.terms.get(&vec![0; self.nvars]).cloned().unwrap_or_default()
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{k}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}
