//! Graded free modules over `A = S(t*)` and their homogeneous elements.
//!
//! A free module is a list of basis elements, each with a cohomological
//! degree, a fine multidegree in `ℕ^r` (used when every datum is homogeneous
//! for the finer grading by exponent vectors) and a block key. Block keys mark
//! summands that the algebra never mixes, such as exterior multidegrees, so
//! slices can be computed one block at a time.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::monomial;
use crate::poly::Poly;
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisElement {
    pub degree: u32,
    pub multidegree: Vec<u32>,
    pub block: Vec<u32>,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FreeModule {
    rank: usize,
    basis: Vec<BasisElement>,
}

impl FreeModule {
    pub fn new(rank: usize, basis: Vec<BasisElement>) -> Self {
        for b in &basis {
            assert_eq!(b.multidegree.len(), rank, "multidegree length");
            let m: u32 = b.multidegree.iter().sum();
            assert!(m <= b.degree, "multidegree exceeds degree");
        }
        FreeModule { rank, basis }
    }

    /// Free module on generators of the given degrees, all in block `[0]`.
    pub fn on_degrees(rank: usize, degrees: &[u32]) -> Self {
        let basis = degrees
            .iter()
            .enumerate()
            .map(|(j, &d)| BasisElement {
                degree: d,
                multidegree: vec![0; rank],
                block: vec![0],
                label: format!("e{j}"),
            })
            .collect();
        FreeModule { rank, basis }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis(&self) -> &[BasisElement] {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.basis.iter().map(|b| b.degree).collect()
    }

    /// Concatenation of bases; labels are prefixed by the summand index.
    pub fn direct_sum(parts: &[&FreeModule]) -> FreeModule {
        let rank = parts.first().map_or(0, |p| p.rank);
        let mut basis = Vec::new();
        for (i, p) in parts.iter().enumerate() {
            assert_eq!(p.rank, rank, "rank mismatch in direct sum");
            for b in &p.basis {
                let mut b = b.clone();
                b.label = format!("{i}:{}", b.label);
                basis.push(b);
            }
        }
        FreeModule { rank, basis }
    }

    /// `self ⊗_A other` with basis pairs in lexicographic order.
    pub fn tensor(&self, other: &FreeModule) -> FreeModule {
        assert_eq!(self.rank, other.rank, "rank mismatch in tensor product");
        let mut basis = Vec::with_capacity(self.len() * other.len());
        for a in &self.basis {
            for b in &other.basis {
                let mut block = a.block.clone();
                block.extend_from_slice(&b.block);
                basis.push(BasisElement {
                    degree: a.degree + b.degree,
                    multidegree: a.multidegree.iter().zip(&b.multidegree).map(|(x, y)| x + y).collect(),
                    block,
                    label: format!("{}⊗{}", a.label, b.label),
                });
            }
        }
        FreeModule { rank: self.rank, basis }
    }

    /// Copy with every block key replaced by `[0]`.
    pub fn single_block(&self) -> FreeModule {
        let mut m = self.clone();
        for b in m.basis.iter_mut() {
            b.block = vec![0];
        }
        m
    }

    /// Copy with all fine multidegrees cleared.
    pub fn without_multidegrees(&self) -> FreeModule {
        let mut m = self.clone();
        for b in m.basis.iter_mut() {
            b.multidegree = vec![0; self.rank];
        }
        m
    }

    /// Distinct block keys in first-appearance order.
    pub fn blocks(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = Vec::new();
        for b in &self.basis {
            if !out.contains(&b.block) {
                out.push(b.block.clone());
            }
        }
        out
    }

    /// Dimension over ℚ of the degree-`d` piece.
    pub fn piece_dimension(&self, d: u32) -> usize {
        self.piece(d, None).len
    }

    /// Coordinate layout of the degree-`d` piece, optionally restricted to one block.
    pub fn piece(&self, d: u32, block: Option<&[u32]>) -> Piece {
        let mut slots = Vec::new();
        let mut pos = vec![None; self.basis.len()];
        let mut offset = 0;
        for (j, b) in self.basis.iter().enumerate() {
            if block.is_some_and(|k| k != b.block.as_slice()) {
                continue;
            }
            if b.degree > d || (d - b.degree) % 2 != 0 {
                continue;
            }
            let q = (d - b.degree) / 2;
            let count = monomial::count(self.rank, q);
            pos[j] = Some(slots.len());
            slots.push(Slot { basis: j, q, offset, count });
            offset += count;
        }
        Piece { degree: d, rank: self.rank, slots, len: offset, pos }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub basis: usize,
    pub q: u32,
    pub offset: usize,
    pub count: usize,
}

/// Coordinates of a degree piece: for each admissible basis element, the
/// monomials of the complementary polynomial degree.
#[derive(Clone, Debug)]
pub struct Piece {
    pub degree: u32,
    pub rank: usize,
    pub slots: Vec<Slot>,
    pub len: usize,
    pos: Vec<Option<usize>>,
}

impl Piece {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn slot_of(&self, basis: usize) -> Option<&Slot> {
        self.pos.get(basis).copied().flatten().map(|i| &self.slots[i])
    }

    pub fn index(&self, basis: usize, exps: &[u32]) -> Option<usize> {
        let s = self.slot_of(basis)?;
        (monomial::degree(exps) == s.q).then(|| s.offset + monomial::rank(exps))
    }

    /// `(basis, exponents)` of a coordinate.
    pub fn entry(&self, i: usize) -> (usize, Vec<u32>) {
        let k = self.slots.partition_point(|s| s.offset + s.count <= i);
        let s = &self.slots[k];
        (s.basis, monomial::list(self.rank, s.q)[i - s.offset].clone())
    }

    /// For each coordinate of `self`, its image under multiplication by `x_var`
    /// in the piece `target` (two degrees up).
    pub fn shift_map(&self, var: usize, target: &Piece) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len);
        for s in &self.slots {
            let t = target.slot_of(s.basis).expect("basis element missing from target piece");
            for e in monomial::list(self.rank, s.q).iter() {
                let mut f = e.clone();
                f[var] += 1;
                out.push(t.offset + monomial::rank(&f));
            }
        }
        out
    }
}

/// A homogeneous element of a free module, stored sparsely.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModElem {
    pub degree: u32,
    pub terms: BTreeMap<(usize, Vec<u32>), Rational>,
}

impl ModElem {
    pub fn zero(degree: u32) -> Self {
        ModElem { degree, terms: BTreeMap::new() }
    }

    /// The basis vector `e_j`.
    pub fn basis_vector(m: &FreeModule, j: usize) -> Self {
        let mut e = Self::zero(m.basis[j].degree);
        e.terms.insert((j, vec![0; m.rank]), Rational::one());
        e
    }

    /// `p · e_j` for a homogeneous polynomial `p`.
    pub fn from_poly(m: &FreeModule, j: usize, p: &Poly) -> Self {
        let q = p.homogeneous_degree().unwrap_or(0);
        let mut e = Self::zero(m.basis[j].degree + 2 * q);
        for (ex, c) in p.terms() {
            e.terms.insert((j, ex.clone()), c.clone());
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, j: usize, exps: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let key = (j, exps);
        let v = self.terms.entry(key.clone()).or_default();
        *v += &c;
        if v.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &ModElem) -> ModElem {
        assert_eq!(self.degree, other.degree, "adding elements of different degree");
        let mut e = self.clone();
        for ((j, ex), c) in &other.terms {
            e.add_term(*j, ex.clone(), c.clone());
        }
        e
    }

    pub fn scale(&self, c: &Rational) -> ModElem {
        if c.is_zero() {
            return ModElem::zero(self.degree);
        }
        ModElem { degree: self.degree, terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect() }
    }

    /// `p · self` for homogeneous `p`.
    pub fn mul_poly(&self, p: &Poly) -> ModElem {
        let q = p.homogeneous_degree().unwrap_or(0);
        let mut out = ModElem::zero(self.degree + 2 * q);
        for ((j, ex), c) in &self.terms {
            for (pe, pc) in p.terms() {
                let s: Vec<u32> = ex.iter().zip(pe).map(|(a, b)| a + b).collect();
                out.add_term(*j, s, c * pc);
            }
        }
        out
    }

    /// Polynomial coefficient of basis element `j`.
    pub fn coefficient(&self, rank: usize, j: usize) -> Poly {
        let mut p = Poly::zero(rank);
        for ((k, ex), c) in &self.terms {
            if *k == j {
                p.add_term(ex.clone(), c.clone());
            }
        }
        p
    }

    pub fn to_dense(&self, piece: &Piece) -> Vec<Rational> {
        assert_eq!(self.degree, piece.degree, "degree mismatch");
        let mut v = vec![Rational::zero(); piece.len];
        for ((j, ex), c) in &self.terms {
            let i = piece.index(*j, ex).expect("term outside piece");
            v[i] = c.clone();
        }
        v
    }

    pub fn from_dense(piece: &Piece, v: &[Rational]) -> ModElem {
        let mut e = ModElem::zero(piece.degree);
        for s in &piece.slots {
            let l = monomial::list(piece.rank, s.q);
            for (k, ex) in l.iter().enumerate() {
                let c = &v[s.offset + k];
                if !c.is_zero() {
                    e.terms.insert((s.basis, ex.clone()), c.clone());
                }
            }
        }
        e
    }

    /// Block key when every term lies in one block.
    pub fn block(&self, m: &FreeModule) -> Option<Vec<u32>> {
        let mut it = self.terms.keys().map(|(j, _)| &m.basis[*j].block);
        let b = it.next()?;
        it.all(|x| x == b).then(|| b.clone())
    }

    /// Fine degree `(multidegree, shift)` when every term shares it; the shift
    /// is `degree - 2|multidegree|`.
    pub fn fine_degree(&self, m: &FreeModule) -> Option<(Vec<u32>, i64)> {
        let mut out: Option<Vec<u32>> = None;
        for (j, ex) in self.terms.keys() {
            let e: Vec<u32> = m.basis[*j].multidegree.iter().zip(ex).map(|(a, b)| a + b).collect();
            match &out {
                None => out = Some(e),
                Some(o) if *o == e => {}
                _ => return None,
            }
        }
        let e = out?;
        let s = self.degree as i64 - 2 * e.iter().sum::<u32>() as i64;
        Some((e, s))
    }

    /// Constant coefficient vector over the basis for a fine-homogeneous element.
    pub fn fine_coefficients(&self, m: &FreeModule) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); m.len()];
        for ((j, _), c) in &self.terms {
            v[*j] = c.clone();
        }
        v
    }
}

pub type SharedModule = Arc<FreeModule>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piece_layout() {
        let m = FreeModule::on_degrees(2, &[0, 1, 2]);
        let p = m.piece(4, None);
        // e0: S_2 (3 monomials), e2: S_1 (2 monomials); e1 has odd parity
        assert_eq!(p.len(), 5);
        assert_eq!(p.entry(3), (2, vec![1, 0]));
        assert_eq!(p.index(2, &[0, 1]), Some(4));
        let up = m.piece(6, None);
        let map = p.shift_map(1, &up);
        assert_eq!(up.entry(map[0]), (0, vec![2, 1]));
    }

    #[test]
    fn dense_roundtrip() {
        let m = FreeModule::on_degrees(2, &[0, 2]);
        let p = m.piece(4, None);
        let v: Vec<Rational> = (0..p.len()).map(|i| Rational::from_int(i as i64 - 2)).collect();
        let e = ModElem::from_dense(&p, &v);
        assert_eq!(e.to_dense(&p), v);
    }
}
