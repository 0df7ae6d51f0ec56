//! The bigraded algebra `Λ(t*)^{⊗g} ⊗ S(t*)`.
//!
//! Exterior generators have degree 1 and polynomial generators degree 2. A
//! basis monomial is a tuple of `g` subsets of `{1..r}` (one per exterior
//! factor) together with an exponent vector. Exterior tuples are ordered
//! lexicographically by factor, each factor using the order of
//! [`monomial::subsets`]; within one exterior monomial, exponent vectors are
//! in descending lexicographic order. Factors are combined with the Koszul
//! sign rule, so elements of odd total degree anticommute.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::freemod::{BasisElement, FreeModule, ModElem, Piece};
use crate::linalg::Matrix;
use crate::monomial;
use crate::poly::Poly;
use crate::rational::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("ambient mismatch")]
    AmbientMismatch,
    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("invalid ambient: {0}")]
    Invalid(String),
    #[error("coordinate vector has length {got}, piece has dimension {expected}")]
    Length { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AmbientSpec {
    pub rank: usize,
    pub factors: usize,
    pub labels: Vec<String>,
}

impl AmbientSpec {
    pub fn new(rank: usize, factors: usize, labels: Vec<String>) -> Result<Self, AlgebraError> {
        if rank == 0 {
            return Err(AlgebraError::Invalid("rank must be at least 1".into()));
        }
        if labels.len() != rank {
            return Err(AlgebraError::Invalid(format!("{} labels for rank {rank}", labels.len())));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != rank {
            return Err(AlgebraError::Invalid("labels must be distinct".into()));
        }
        Ok(AmbientSpec { rank, factors, labels })
    }

    /// Ambient with labels `x1..xr`.
    pub fn standard(rank: usize, factors: usize) -> Self {
        Self::new(rank, factors, (1..=rank).map(|i| format!("x{i}")).collect()).expect("valid ambient")
    }

    pub fn ext_count(&self) -> usize {
        1usize << (self.rank * self.factors)
    }

    /// The exterior tuple with canonical index `j`.
    pub fn ext_monomial(&self, j: usize) -> Vec<u32> {
        let subs = monomial::subsets(self.rank);
        let base = 1usize << self.rank;
        let mut out = vec![0u32; self.factors];
        let mut k = j;
        for f in (0..self.factors).rev() {
            out[f] = subs[k % base];
            k /= base;
        }
        out
    }

    pub fn ext_index(&self, masks: &[u32]) -> usize {
        let pos = subset_positions(self.rank);
        let base = 1usize << self.rank;
        masks.iter().fold(0, |acc, &m| acc * base + pos[m as usize])
    }

    /// The free `S(t*)`-module with basis the exterior monomials.
    pub fn free_module(&self) -> FreeModule {
        let basis = (0..self.ext_count())
            .map(|j| {
                let masks = self.ext_monomial(j);
                let mut md = vec![0u32; self.rank];
                for m in &masks {
                    for (i, x) in md.iter_mut().enumerate() {
                        *x += m >> i & 1;
                    }
                }
                BasisElement {
                    degree: masks.iter().map(|m| m.count_ones()).sum(),
                    multidegree: md,
                    block: masks.iter().map(|m| m.count_ones()).collect(),
                    label: self.ext_label(&masks),
                }
            })
            .collect();
        FreeModule::new(self.rank, basis)
    }

    fn ext_label(&self, masks: &[u32]) -> String {
        let parts: Vec<String> = masks
            .iter()
            .map(|&m| {
                if m == 0 {
                    "1".to_string()
                } else {
                    monomial::sorted_indices(m).iter().map(|&i| self.labels[i as usize].clone()).collect::<Vec<_>>().join("∧")
                }
            })
            .collect();
        parts.join("⊗")
    }

    pub fn monomial_index(&self, d: u32) -> MonomialIndex {
        MonomialIndex { degree: d, piece: self.free_module().piece(d, None), ambient: self.clone() }
    }

    /// Index of the exterior monomial that is the top wedge in every factor.
    pub fn top_index(&self) -> usize {
        let full = (1u32 << self.rank) - 1;
        self.ext_index(&vec![full; self.factors])
    }

    pub fn top_degree(&self) -> u32 {
        (self.rank * self.factors) as u32
    }

    /// Product of two sparse elements of [`free_module`](Self::free_module).
    pub fn mul_elems(&self, x: &ModElem, y: &ModElem) -> ModElem {
        let mut out = ModElem::zero(x.degree + y.degree);
        let mut cache: HashMap<(usize, usize), Option<(i64, usize)>> = HashMap::new();
        for ((j1, e1), c1) in &x.terms {
            for ((j2, e2), c2) in &y.terms {
                let prod = *cache.entry((*j1, *j2)).or_insert_with(|| self.ext_product(*j1, *j2));
                let Some((sign, j)) = prod else { continue };
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let mut c = c1 * c2;
                if sign < 0 {
                    c = -c;
                }
                out.add_term(j, e, c);
            }
        }
        out
    }

    /// Sign and index of the product of two exterior basis monomials.
    pub fn ext_product(&self, j1: usize, j2: usize) -> Option<(i64, usize)> {
        let a = self.ext_monomial(j1);
        let b = self.ext_monomial(j2);
        let mut sign = 1i64;
        let mut res = vec![0u32; self.factors];
        for k in 0..self.factors {
            let (s, m) = monomial::wedge(a[k], b[k])?;
            sign *= s;
            res[k] = m;
            // b_k moves past a_i for every later factor i
            let later: u32 = a[k + 1..].iter().map(|m| m.count_ones()).sum();
            if (b[k].count_ones() * later) % 2 == 1 {
                sign = -sign;
            }
        }
        Some((sign, self.ext_index(&res)))
    }

    /// Places an element of the `g = 1` ambient into exterior slot `slot`.
    pub fn embed_slot(&self, one: &AmbientSpec, slot: usize, x: &ModElem) -> ModElem {
        assert_eq!(one.factors, 1);
        assert_eq!(one.rank, self.rank);
        let mut out = ModElem::zero(x.degree);
        for ((j, e), c) in &x.terms {
            let m = one.ext_monomial(*j)[0];
            let mut masks = vec![0u32; self.factors];
            masks[slot] = m;
            out.add_term(self.ext_index(&masks), e.clone(), c.clone());
        }
        out
    }

    /// Applies the algebra automorphism induced by `s` on `t*`.
    pub fn substitute_elem(&self, x: &ModElem, s: &LinearSubstitution) -> ModElem {
        let mut sub = SubstitutionAction::new(self, s);
        sub.apply(x)
    }
}

fn subset_positions(r: usize) -> Arc<Vec<usize>> {
    use std::sync::{Mutex, OnceLock};
    static C: OnceLock<Mutex<HashMap<usize, Arc<Vec<usize>>>>> = OnceLock::new();
    let c = C.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = c.lock().unwrap().get(&r) {
        return v.clone();
    }
    let subs = monomial::subsets(r);
    let mut pos = vec![0usize; subs.len()];
    for (i, &m) in subs.iter().enumerate() {
        pos[m as usize] = i;
    }
    let v = Arc::new(pos);
    c.lock().unwrap().insert(r, v.clone());
    v
}

/// `Σ_{e + 2q = d} (#exterior monomials of degree e) · (#monomials of degree q)`.
pub fn piece_dimension(a: &AmbientSpec, d: u32) -> usize {
    let n = a.rank * a.factors;
    (0..=d)
        .filter(|e| (d - e) % 2 == 0 && *e as usize <= n)
        .map(|e| monomial::binomial(n as u64, e as u64) as usize * monomial::count(a.rank, (d - e) / 2))
        .sum()
}

/// Canonical enumeration of the basis monomials of degree `d`.
#[derive(Clone, Debug)]
pub struct MonomialIndex {
    pub degree: u32,
    pub ambient: AmbientSpec,
    pub piece: Piece,
}

impl MonomialIndex {
    pub fn len(&self) -> usize {
        self.piece.len()
    }

    pub fn is_empty(&self) -> bool {
        self.piece.is_empty()
    }

    /// `(exterior tuple, exponent vector)` of entry `i`.
    pub fn entry(&self, i: usize) -> (Vec<u32>, Vec<u32>) {
        let (j, e) = self.piece.entry(i);
        (self.ambient.ext_monomial(j), e)
    }

    pub fn position(&self, masks: &[u32], exps: &[u32]) -> Option<usize> {
        self.piece.index(self.ambient.ext_index(masks), exps)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedElement {
    pub ambient: AmbientSpec,
    pub degree: u32,
    pub coords: Vec<Rational>,
}

impl GradedElement {
    pub fn new(ambient: &AmbientSpec, degree: u32, coords: Vec<Rational>) -> Result<Self, AlgebraError> {
        let n = piece_dimension(ambient, degree);
        if coords.len() != n {
            return Err(AlgebraError::Length { expected: n, got: coords.len() });
        }
        Ok(GradedElement { ambient: ambient.clone(), degree, coords })
    }

    pub fn zero(ambient: &AmbientSpec, degree: u32) -> Self {
        GradedElement { ambient: ambient.clone(), degree, coords: vec![Rational::zero(); piece_dimension(ambient, degree)] }
    }

    pub fn one(ambient: &AmbientSpec) -> Self {
        let mut e = Self::zero(ambient, 0);
        e.coords[0] = Rational::one();
        e
    }

    pub fn from_sparse(ambient: &AmbientSpec, x: &ModElem) -> Self {
        let piece = ambient.free_module().piece(x.degree, None);
        GradedElement { ambient: ambient.clone(), degree: x.degree, coords: x.to_dense(&piece) }
    }

    pub fn to_sparse(&self) -> ModElem {
        let piece = self.ambient.free_module().piece(self.degree, None);
        ModElem::from_dense(&piece, &self.coords)
    }

    /// Builds `ext ⊗ p` from exterior index lists per factor (0-based) and a polynomial.
    pub fn from_parts(ambient: &AmbientSpec, ext: &[&[usize]], p: &Poly) -> Self {
        let mut x = ModElem::zero(0);
        let mut sign = 1i64;
        let mut masks = Vec::new();
        for f in ext {
            let mut m = 0u32;
            for &i in *f {
                match monomial::wedge(m, 1 << i) {
                    Some((s, mm)) => {
                        sign *= s;
                        m = mm;
                    }
                    None => return Self::zero(ambient, 0),
                }
            }
            masks.push(m);
        }
        let j = ambient.ext_index(&masks);
        let fm = ambient.free_module();
        let e = ModElem::from_poly(&fm, j, p);
        x.degree = e.degree;
        x.terms = e.terms;
        Self::from_sparse(ambient, &x.scale(&Rational::from_int(sign)))
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Rational::is_zero)
    }

    pub fn add(&self, other: &GradedElement) -> Result<GradedElement, AlgebraError> {
        if self.ambient != other.ambient || self.degree != other.degree {
            return Err(AlgebraError::AmbientMismatch);
        }
        Ok(GradedElement {
            ambient: self.ambient.clone(),
            degree: self.degree,
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, c: &Rational) -> GradedElement {
        GradedElement { ambient: self.ambient.clone(), degree: self.degree, coords: self.coords.iter().map(|a| a * c).collect() }
    }
}

pub fn multiply(x: &GradedElement, y: &GradedElement) -> Result<GradedElement, AlgebraError> {
    if x.ambient != y.ambient {
        return Err(AlgebraError::AmbientMismatch);
    }
    let p = x.ambient.mul_elems(&x.to_sparse(), &y.to_sparse());
    Ok(GradedElement::from_sparse(&x.ambient, &p))
}

pub fn substitute(x: &GradedElement, s: &LinearSubstitution) -> Result<GradedElement, AlgebraError> {
    if s.rank() != x.ambient.rank {
        return Err(AlgebraError::RankMismatch { expected: x.ambient.rank, got: s.rank() });
    }
    let y = x.ambient.substitute_elem(&x.to_sparse(), s);
    Ok(GradedElement::from_sparse(&x.ambient, &y))
}

/// A linear map on `t*`; column `i` holds the image of the `i`-th basis vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSubstitution {
    pub matrix: Matrix,
    pub involution: bool,
}

impl LinearSubstitution {
    pub fn new(matrix: Matrix) -> Self {
        assert_eq!(matrix.rows(), matrix.cols(), "substitution matrix must be square");
        let sq = matrix.mul(&matrix).expect("square");
        let involution = sq == Matrix::identity(matrix.rows());
        LinearSubstitution { matrix, involution }
    }

    pub fn identity(r: usize) -> Self {
        Self::new(Matrix::identity(r))
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::new(Matrix::from_i64(rows))
    }

    pub fn rank(&self) -> usize {
        self.matrix.rows()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinearSubstitution) -> LinearSubstitution {
        Self::new(self.matrix.mul(&other.matrix).expect("same rank"))
    }

    pub fn inverse(&self) -> Option<LinearSubstitution> {
        let n = self.rank();
        let aug = self.matrix.hstack(&Matrix::identity(n)).ok()?;
        let (r, rank, piv) = crate::linalg::rref(&aug);
        if rank < n || piv[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, r.get(i, n + j).clone());
            }
        }
        Some(Self::new(inv))
    }

    /// Image of basis vector `i` as a linear form.
    pub fn image(&self, i: usize) -> Poly {
        Poly::linear(&self.matrix.column(i))
    }

    /// Image of a linear form given by coefficients.
    pub fn apply_vector(&self, v: &[Rational]) -> Vec<Rational> {
        self.matrix.mul_vec(v)
    }

    pub fn is_integral(&self) -> bool {
        self.matrix.entries().iter().all(Rational::is_integer)
    }
}

/// Memoized action of a substitution on basis monomials.
pub struct SubstitutionAction<'a> {
    ambient: &'a AmbientSpec,
    images: Vec<Poly>,
    ext: Vec<Vec<(u32, Rational)>>,
    sym: HashMap<Vec<u32>, Poly>,
}

impl<'a> SubstitutionAction<'a> {
    pub fn new(ambient: &'a AmbientSpec, s: &LinearSubstitution) -> Self {
        let r = ambient.rank;
        assert_eq!(s.rank(), r);
        let images: Vec<Poly> = (0..r).map(|i| s.image(i)).collect();
        // exterior images via minors: x_I ↦ Σ_J det(M[J, I]) x_J
        let ext = (0..(1u32 << r))
            .map(|mask| {
                let idx = monomial::sorted_indices(mask);
                let mut terms: Vec<(u32, Rational)> = vec![(0, Rational::one())];
                for &i in &idx {
                    let col = s.matrix.column(i as usize);
                    let mut next: Vec<(u32, Rational)> = Vec::new();
                    for (m, c) in &terms {
                        for (k, v) in col.iter().enumerate() {
                            if v.is_zero() {
                                continue;
                            }
                            if let Some((sg, mm)) = monomial::wedge(*m, 1 << k) {
                                let mut val = c * v;
                                if sg < 0 {
                                    val = -val;
                                }
                                match next.iter_mut().find(|(x, _)| *x == mm) {
                                    Some((_, acc)) => *acc += &val,
                                    None => next.push((mm, val)),
                                }
                            }
                        }
                    }
                    next.retain(|(_, c)| !c.is_zero());
                    terms = next;
                }
                terms
            })
            .collect();
        SubstitutionAction { ambient, images, ext, sym: HashMap::new() }
    }

    fn sym_image(&mut self, e: &[u32]) -> Poly {
        if let Some(p) = self.sym.get(e) {
            return p.clone();
        }
        let r = e.len();
        let p = match e.iter().position(|&k| k > 0) {
            None => Poly::one(r),
            Some(i) => {
                let mut f = e.to_vec();
                f[i] -= 1;
                let rest = self.sym_image(&f);
                rest.mul(&self.images[i])
            }
        };
        self.sym.insert(e.to_vec(), p.clone());
        p
    }

    pub fn apply(&mut self, x: &ModElem) -> ModElem {
        let a = self.ambient;
        let mut out = ModElem::zero(x.degree);
        for ((j, e), c) in &x.terms {
            let masks = a.ext_monomial(*j);
            let mut ext_terms: Vec<(Vec<u32>, Rational)> = vec![(Vec::new(), c.clone())];
            for m in &masks {
                let img = &self.ext[*m as usize];
                let mut next = Vec::with_capacity(ext_terms.len() * img.len());
                for (pre, pc) in &ext_terms {
                    for (mm, mc) in img {
                        let mut v = pre.clone();
                        v.push(*mm);
                        next.push((v, pc * mc));
                    }
                }
                ext_terms = next;
            }
            let sp = self.sym_image(e);
            for (ms, ec) in &ext_terms {
                let jj = a.ext_index(ms);
                for (pe, pc) in sp.terms() {
                    out.add_term(jj, pe.clone(), ec * pc);
                }
            }
        }
        out
    }
}
