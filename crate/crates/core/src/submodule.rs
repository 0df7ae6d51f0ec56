//! Graded submodules of free `S(t*)`-modules, computed one degree slice at a
//! time up to a truncation degree.
//!
//! Two slice routes are used. The dense route stores an echelon basis of
//! every slice, split by block when all generators are block-homogeneous.
//! The fine route applies when every generator is homogeneous for the
//! multigrading by exponent vectors: then a slice in multidegree `e` only
//! depends on which thresholds `e` has passed, so the whole computation runs
//! on finitely many cells of `ℕ^r`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::AmbientSpec;
use crate::freemod::{FreeModule, ModElem, Piece};
use crate::linalg::{intersect_column_spaces, Echelon, Matrix};
use crate::monomial;
use crate::poly::Poly;
use crate::rational::Rational;

pub const DEFAULT_STABILITY_WINDOW: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SubmoduleError {
    #[error("submodules live in different free modules")]
    AmbientMismatch,
    #[error("generator of degree {0} is not homogeneous for the module grading")]
    Inhomogeneous(u32),
    #[error("operation needs an exterior ambient with g >= 1")]
    NeedsExterior,
    #[error("expected {expected} minimal generators, found {found}")]
    GeneratorCount { expected: usize, found: usize },
}

/// Numerator `Σ c_d t^d = P_M(t)·(1−t²)^r`, exact through `truncation`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertData {
    pub coefficients: Vec<i64>,
    pub truncation: u32,
    pub stable: bool,
    pub window: usize,
}

impl HilbertData {
    pub fn from_dims(dims: &[usize], rank: usize, window: usize) -> Self {
        let truncation = dims.len().saturating_sub(1) as u32;
        let mut c: Vec<i64> = dims.iter().map(|&x| x as i64).collect();
        for _ in 0..rank {
            for d in (2..c.len()).rev() {
                c[d] -= c[d - 2];
            }
        }
        let stable = c.len() >= window && c[c.len() - window..].iter().all(|&x| x == 0);
        HilbertData { coefficients: c, truncation, stable, window }
    }

    /// Coefficients with trailing zeros removed.
    pub fn trimmed(&self) -> Vec<i64> {
        let mut v = self.coefficients.clone();
        while v.last() == Some(&0) {
            v.pop();
        }
        v
    }

    /// Slice dimensions recovered from the numerator.
    pub fn dims(&self, rank: usize) -> Vec<i64> {
        let mut s = self.coefficients.clone();
        for _ in 0..rank {
            for d in 2..s.len() {
                s[d] += s[d - 2];
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Free { degrees: Vec<u32> },
    NotFree { witness_degree: u32, reason: String },
    Inconclusive { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreenessCertificate {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub truncation: u32,
}

impl FreenessCertificate {
    pub fn is_free(&self) -> bool {
        matches!(self.verdict, Verdict::Free { .. })
    }

    pub fn is_not_free(&self) -> bool {
        matches!(self.verdict, Verdict::NotFree { .. })
    }

    /// Decides freeness from numerator coefficients and generator counts.
    pub fn from_counts(h: &HilbertData, gen_degrees: &[u32]) -> Self {
        let truncation = h.truncation;
        if let Some(d) = h.coefficients.iter().position(|&c| c < 0) {
            return FreenessCertificate {
                verdict: Verdict::NotFree { witness_degree: d as u32, reason: "negative numerator coefficient".into() },
                truncation,
            };
        }
        let mut counts = vec![0i64; h.coefficients.len()];
        for &g in gen_degrees {
            if (g as usize) < counts.len() {
                counts[g as usize] += 1;
            }
        }
        if let Some(d) = (0..counts.len()).find(|&d| counts[d] != h.coefficients[d]) {
            return FreenessCertificate {
                verdict: Verdict::NotFree {
                    witness_degree: d as u32,
                    reason: "slice dimension falls short of the free module on the minimal generators".into(),
                },
                truncation,
            };
        }
        if !h.stable {
            return FreenessCertificate {
                verdict: Verdict::Inconclusive {
                    reason: format!("numerator not stable: last {} coefficients are not all zero", h.window),
                },
                truncation,
            };
        }
        let mut degrees = gen_degrees.to_vec();
        degrees.sort_unstable();
        FreenessCertificate { verdict: Verdict::Free { degrees }, truncation }
    }
}

/// Echelon basis of one slice.
#[derive(Clone, Debug)]
pub struct Slice {
    pub piece: Piece,
    pub basis: Echelon,
}

impl Slice {
    pub fn dim(&self) -> usize {
        self.basis.rank()
    }
}

/// Slices of one block for degrees `0..=truncation`.
#[derive(Clone, Debug)]
pub struct BlockTower {
    pub key: Option<Vec<u32>>,
    pub slices: Vec<Slice>,
}

/// All slices of a submodule through a truncation degree.
#[derive(Clone, Debug)]
pub struct Tower {
    pub module: Arc<FreeModule>,
    pub truncation: u32,
    pub blocks: Vec<BlockTower>,
}

impl Tower {
    pub fn dims(&self) -> Vec<usize> {
        (0..=self.truncation as usize).map(|d| self.blocks.iter().map(|b| b.slices[d].dim()).sum()).collect()
    }

    /// Minimal generators, per block and degree, as coset representatives of
    /// `M_d / (A⁺M)_d` chosen greedily from the reduced echelon basis.
    pub fn minimal_generators(&self) -> Vec<ModElem> {
        let rank = self.module.rank();
        let per_block: Vec<Vec<ModElem>> = self
            .blocks
            .par_iter()
            .map(|b| {
                let mut out = Vec::new();
                for d in 0..=self.truncation as usize {
                    let cur = &b.slices[d];
                    let h = cur.dim();
                    if h == 0 {
                        continue;
                    }
                    let pivots = cur.basis.pivots();
                    let mut sub = Echelon::new(h);
                    if d >= 2 {
                        let prev = &b.slices[d - 2];
                        'outer: for k in 0..rank {
                            let map = prev.piece.shift_map(k, &cur.piece);
                            for row in prev.basis.rows() {
                                let mut w = vec![Rational::zero(); cur.piece.len()];
                                for (i, v) in row.iter().enumerate() {
                                    if !v.is_zero() {
                                        w[map[i]] = v.clone();
                                    }
                                }
                                let y: Vec<Rational> = pivots.iter().map(|&p| w[p].clone()).collect();
                                sub.insert(y);
                                if sub.rank() == h {
                                    break 'outer;
                                }
                            }
                        }
                    }
                    for (i, row) in cur.basis.rows().iter().enumerate() {
                        if sub.rank() == h {
                            break;
                        }
                        let mut unit = vec![Rational::zero(); h];
                        unit[i] = Rational::one();
                        if sub.insert(unit) {
                            out.push(ModElem::from_dense(&cur.piece, row));
                        }
                    }
                }
                out
            })
            .collect();
        let mut gens: Vec<ModElem> = per_block.into_iter().flatten().collect();
        gens.sort_by_key(|g| g.degree);
        gens
    }

    /// Columns form a basis of the full degree-`d` slice.
    pub fn slice_matrix(&self, d: u32) -> Matrix {
        let full = self.module.piece(d, None);
        let mut cols = Vec::new();
        for b in &self.blocks {
            let s = &b.slices[d as usize];
            for row in s.basis.rows() {
                cols.push(ModElem::from_dense(&s.piece, row).to_dense(&full));
            }
        }
        Matrix::from_columns(full.len(), &cols)
    }
}

fn block_keys(module: &FreeModule, split: bool) -> Vec<Option<Vec<u32>>> {
    if split {
        module.blocks().into_iter().map(Some).collect()
    } else {
        vec![None]
    }
}

fn scatter(row: &[Rational], map: &[usize], len: usize) -> Vec<Rational> {
    let mut w = vec![Rational::zero(); len];
    for (i, v) in row.iter().enumerate() {
        if !v.is_zero() {
            w[map[i]] = v.clone();
        }
    }
    w
}

/// Dense span tower of the given generators.
pub fn span_tower(module: &Arc<FreeModule>, gens: &[ModElem], truncation: u32, split: bool) -> Tower {
    let rank = module.rank();
    let blocks = block_keys(module, split)
        .into_par_iter()
        .map(|key| {
            let mut slices: Vec<Slice> = Vec::with_capacity(truncation as usize + 1);
            for d in 0..=truncation {
                let piece = module.piece(d, key.as_deref());
                let n = piece.len();
                let mut ech = Echelon::new(n);
                if d >= 2 && n > 0 {
                    let prev = &slices[d as usize - 2];
                    'outer: for k in 0..rank {
                        if prev.dim() == 0 {
                            break;
                        }
                        let map = prev.piece.shift_map(k, &piece);
                        for row in prev.basis.rows() {
                            ech.insert(scatter(row, &map, n));
                            if ech.rank() == n {
                                break 'outer;
                            }
                        }
                    }
                }
                for g in gens.iter().filter(|g| g.degree == d) {
                    if key.as_ref().is_some_and(|k| g.block(module).as_ref().is_some_and(|b| b != k)) {
                        continue;
                    }
                    if g.is_zero() {
                        continue;
                    }
                    ech.insert(g.to_dense(&piece));
                }
                slices.push(Slice { piece, basis: ech });
            }
            BlockTower { key, slices }
        })
        .collect();
    Tower { module: module.clone(), truncation, blocks }
}

/// Slice-wise intersection of towers with identical block layouts.
pub fn intersect_towers(towers: &[&Tower]) -> Tower {
    let first = towers[0];
    let truncation = towers.iter().map(|t| t.truncation).min().unwrap();
    let blocks = (0..first.blocks.len())
        .into_par_iter()
        .map(|bi| {
            let key = first.blocks[bi].key.clone();
            let slices = (0..=truncation as usize)
                .map(|d| {
                    let base = &first.blocks[bi].slices[d];
                    let n = base.piece.len();
                    let mut rows: Vec<Vec<Rational>> = base.basis.rows().to_vec();
                    for t in &towers[1..] {
                        if rows.is_empty() {
                            break;
                        }
                        let other = &t.blocks[bi].slices[d];
                        if other.dim() == n {
                            continue;
                        }
                        if other.dim() == 0 {
                            rows.clear();
                            break;
                        }
                        let a = Matrix::from_columns(n, &rows);
                        let b = Matrix::from_columns(n, other.basis.rows());
                        rows = intersect_column_spaces(&a, &b).expect("same piece").column_vecs();
                    }
                    let mut ech = Echelon::new(n);
                    for r in rows {
                        ech.insert(r);
                    }
                    Slice { piece: base.piece.clone(), basis: ech }
                })
                .collect();
            BlockTower { key, slices }
        })
        .collect();
    Tower { module: first.module.clone(), truncation, blocks }
}

#[derive(Default, Debug)]
struct Cache {
    tower: Option<Arc<Tower>>,
    dims: Option<Vec<usize>>,
    min_gens: Option<(u32, Vec<ModElem>)>,
}

/// A graded `S(t*)`-submodule of a free module, given by homogeneous generators.
#[derive(Clone, Debug)]
pub struct Submodule {
    module: Arc<FreeModule>,
    generators: Vec<ModElem>,
    pub provenance: String,
    cache: Arc<Mutex<Cache>>,
}

impl Submodule {
    pub fn new(module: Arc<FreeModule>, generators: Vec<ModElem>, provenance: impl Into<String>) -> Self {
        let generators = generators.into_iter().filter(|g| !g.is_zero()).collect();
        Submodule { module, generators, provenance: provenance.into(), cache: Default::default() }
    }

    /// The whole free module.
    pub fn full(module: Arc<FreeModule>, provenance: impl Into<String>) -> Self {
        let gens = (0..module.len()).map(|j| ModElem::basis_vector(&module, j)).collect();
        Self::new(module, gens, provenance)
    }

    /// Submodule whose slices through `tower.truncation` are already known.
    pub fn from_tower(tower: Tower, provenance: impl Into<String>) -> Self {
        let gens = tower.minimal_generators();
        let t = tower.truncation;
        let s = Submodule::new(tower.module.clone(), gens.clone(), provenance);
        {
            let mut c = s.cache.lock().unwrap();
            c.dims = Some(tower.dims());
            c.min_gens = Some((t, gens));
            c.tower = Some(Arc::new(tower));
        }
        s
    }

    pub fn module(&self) -> &Arc<FreeModule> {
        &self.module
    }

    pub fn generators(&self) -> &[ModElem] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.module.rank()
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = p.into();
        self
    }

    fn block_homogeneous(&self) -> bool {
        self.generators.iter().all(|g| g.block(&self.module).is_some())
    }

    fn fine_homogeneous(&self) -> bool {
        self.generators.iter().all(|g| g.fine_degree(&self.module).is_some())
    }

    fn cached_truncation(&self) -> Option<u32> {
        let c = self.cache.lock().unwrap();
        c.dims.as_ref().map(|d| d.len() as u32 - 1)
    }

    /// Dense tower through `d` (reusing a cached one when deep enough).
    pub fn tower(&self, d: u32) -> Arc<Tower> {
        self.tower_split(d, self.block_homogeneous())
    }

    fn tower_split(&self, d: u32, split: bool) -> Arc<Tower> {
        {
            let c = self.cache.lock().unwrap();
            if let Some(t) = &c.tower {
                let same_layout = split == t.blocks.iter().all(|b| b.key.is_some()) || t.blocks.len() == 1;
                if t.truncation >= d && same_layout {
                    return t.clone();
                }
            }
        }
        let t = Arc::new(span_tower(&self.module, &self.generators, d, split));
        let mut c = self.cache.lock().unwrap();
        if c.tower.as_ref().is_none_or(|old| old.truncation < d) {
            c.tower = Some(t.clone());
        }
        t
    }

    /// Columns form a basis of `M_d`.
    pub fn degree_slice(&self, d: u32) -> Matrix {
        self.tower(d).slice_matrix(d)
    }

    /// `dim M_d` for `d = 0..=truncation`.
    pub fn slice_dims(&self, truncation: u32) -> Vec<usize> {
        if let Some(c) = self.cache.lock().unwrap().dims.as_ref() {
            if c.len() > truncation as usize {
                return c[..=truncation as usize].to_vec();
            }
        }
        let mut dims = if self.fine_homogeneous() {
            match fine_intersection(&self.module, &[self.generators.as_slice()], truncation) {
                Some(f) => f.dims,
                None => self.tower(truncation).dims(),
            }
        } else {
            self.tower(truncation).dims()
        };
        dims.truncate(truncation as usize + 1);
        let mut c = self.cache.lock().unwrap();
        if c.dims.as_ref().is_none_or(|old| old.len() < dims.len()) {
            c.dims = Some(dims.clone());
        }
        dims
    }

    pub fn hilbert_numerator(&self, truncation: u32) -> HilbertData {
        self.hilbert_numerator_window(truncation, DEFAULT_STABILITY_WINDOW)
    }

    pub fn hilbert_numerator_window(&self, truncation: u32, window: usize) -> HilbertData {
        HilbertData::from_dims(&self.slice_dims(truncation), self.rank(), window)
    }

    /// Minimal generators of degree at most `truncation`.
    pub fn minimal_generators(&self, truncation: u32) -> Vec<ModElem> {
        if let Some((t, g)) = self.cache.lock().unwrap().min_gens.as_ref() {
            if *t >= truncation {
                return g.iter().filter(|x| x.degree <= truncation).cloned().collect();
            }
        }
        let gens = if self.fine_homogeneous() {
            match fine_intersection(&self.module, &[self.generators.as_slice()], truncation) {
                Some(f) => f.generators,
                None => self.tower(truncation).minimal_generators(),
            }
        } else {
            self.tower(truncation).minimal_generators()
        };
        self.cache.lock().unwrap().min_gens = Some((truncation, gens.clone()));
        gens
    }

    pub fn generator_degrees(&self, truncation: u32) -> Vec<u32> {
        let mut d: Vec<u32> = self.minimal_generators(truncation).iter().map(|g| g.degree).collect();
        d.sort_unstable();
        d
    }

    pub fn certify_free(&self, truncation: u32) -> FreenessCertificate {
        let h = self.hilbert_numerator(truncation);
        FreenessCertificate::from_counts(&h, &self.generator_degrees(truncation))
    }

    /// Whether every element lies in the submodule.
    pub fn contains_all(&self, xs: &[ModElem]) -> bool {
        let mut by_degree: BTreeMap<u32, Vec<&ModElem>> = BTreeMap::new();
        for x in xs.iter().filter(|x| !x.is_zero()) {
            by_degree.entry(x.degree).or_default().push(x);
        }
        let Some(&top) = by_degree.keys().last() else { return true };
        let tower = self.tower_split(top, false);
        for (d, group) in by_degree {
            let piece = self.module.piece(d, None);
            let slice = &tower.blocks[0].slices[d as usize];
            if group.iter().any(|x| !slice.basis.contains(&x.to_dense(&piece))) {
                return false;
            }
        }
        true
    }

    /// Places slice data computed elsewhere into the cache.
    pub(crate) fn seed_cache(&self, dims: Vec<usize>, gens_truncation: u32, gens: Vec<ModElem>) {
        let mut c = self.cache.lock().unwrap();
        c.dims = Some(dims);
        c.min_gens = Some((gens_truncation, gens));
    }

    pub fn truncation_hint(&self) -> Option<u32> {
        self.cached_truncation()
    }
}

/// `⋂ ms` through degree `truncation`, minimally generated.
pub fn intersect(ms: &[Submodule], truncation: u32) -> Result<Submodule, SubmoduleError> {
    let Some(first) = ms.first() else { return Err(SubmoduleError::AmbientMismatch) };
    if ms.iter().any(|m| m.module != first.module) {
        return Err(SubmoduleError::AmbientMismatch);
    }
    let provenance = format!("intersection of [{}]", ms.iter().map(|m| m.provenance.as_str()).collect::<Vec<_>>().join("; "));
    if ms.iter().all(|m| m.fine_homogeneous()) {
        let lists: Vec<&[ModElem]> = ms.iter().map(|m| m.generators.as_slice()).collect();
        if let Some(f) = fine_intersection(&first.module, &lists, truncation) {
            let s = Submodule::new(first.module.clone(), f.generators.clone(), provenance);
            s.seed_cache(f.dims, truncation, f.generators);
            return Ok(s);
        }
    }
    let split = ms.iter().all(|m| m.block_homogeneous());
    let towers: Vec<Arc<Tower>> = ms.iter().map(|m| m.tower_split(truncation, split)).collect();
    let refs: Vec<&Tower> = towers.iter().map(|t| t.as_ref()).collect();
    let t = intersect_towers(&refs);
    Ok(Submodule::from_tower(t, provenance))
}

/// Re-spans the minimal generators; useful for checking round trips.
pub fn respan(m: &Submodule, truncation: u32) -> Submodule {
    let s = Submodule::new(m.module.clone(), m.minimal_generators(truncation), m.provenance.clone());
    let _ = s.tower(truncation);
    s
}

/// Result of the fine-graded route.
pub struct FineResult {
    pub dims: Vec<usize>,
    pub generators: Vec<ModElem>,
}

struct FineGen {
    e: Vec<u32>,
    s: i64,
    coeffs: Vec<Rational>,
}

const MAX_CELLS: usize = 400_000;

/// Intersection of fine-homogeneous submodules (a single list is just the
/// submodule itself). Returns `None` when the cell count is too large.
pub fn fine_intersection(module: &FreeModule, lists: &[&[ModElem]], truncation: u32) -> Option<FineResult> {
    let r = module.rank();
    let n = module.len();
    let gens: Vec<Vec<FineGen>> = lists
        .iter()
        .map(|l| {
            l.iter()
                .map(|g| {
                    let (e, s) = g.fine_degree(module).expect("fine homogeneous");
                    FineGen { e, s, coeffs: g.fine_coefficients(module) }
                })
                .collect()
        })
        .collect();
    let basis_md: Vec<&Vec<u32>> = module.basis().iter().map(|b| &b.multidegree).collect();
    let basis_s: Vec<i64> = module
        .basis()
        .iter()
        .map(|b| b.degree as i64 - 2 * b.multidegree.iter().sum::<u32>() as i64)
        .collect();
    let mut thresholds: Vec<Vec<u32>> = vec![vec![0]; r];
    for (i, t) in thresholds.iter_mut().enumerate() {
        for md in &basis_md {
            t.push(md[i]);
        }
        for l in &gens {
            for g in l {
                t.push(g.e[i]);
            }
        }
        t.sort_unstable();
        t.dedup();
    }
    let cells: usize = thresholds.iter().map(|t| t.len()).product();
    if cells > MAX_CELLS {
        return None;
    }
    let mut shifts: Vec<i64> = basis_s.clone();
    shifts.sort_unstable();
    shifts.dedup();
    let min_s = shifts.first().copied().unwrap_or(0);
    let dmax = truncation as i64;

    // enumerate cells whose corner can still reach degree ≤ truncation
    let mut cell_list: Vec<Vec<usize>> = Vec::new();
    let mut idx = vec![0usize; r];
    loop {
        let corner: i64 = (0..r).map(|i| thresholds[i][idx[i]] as i64).sum();
        if 2 * corner + min_s <= dmax {
            cell_list.push(idx.clone());
        }
        let mut k = 0;
        loop {
            if k == r {
                break;
            }
            idx[k] += 1;
            if idx[k] < thresholds[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == r {
            break;
        }
    }
    let cell_pos: BTreeMap<Vec<usize>, usize> = cell_list.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();

    // slice of the intersection at each (cell, shift)
    let slices: Vec<BTreeMap<i64, Echelon>> = cell_list
        .par_iter()
        .map(|cell| {
            let corner: Vec<u32> = (0..r).map(|i| thresholds[i][cell[i]]).collect();
            let mut out = BTreeMap::new();
            for &s in &shifts {
                if 2 * corner.iter().sum::<u32>() as i64 + s > dmax {
                    continue;
                }
                let avail = (0..n).any(|j| basis_s[j] == s && basis_md[j].iter().zip(&corner).all(|(a, b)| a <= b));
                if !avail {
                    continue;
                }
                let mut current: Option<Vec<Vec<Rational>>> = None;
                for l in &gens {
                    let rows: Vec<Vec<Rational>> = l
                        .iter()
                        .filter(|g| g.s == s && g.e.iter().zip(&corner).all(|(a, b)| a <= b))
                        .map(|g| g.coeffs.clone())
                        .collect();
                    current = Some(match current {
                        None => crate::linalg::row_basis(rows, n),
                        Some(prev) => {
                            if prev.is_empty() || rows.is_empty() {
                                Vec::new()
                            } else {
                                let a = Matrix::from_columns(n, &prev);
                                let b = Matrix::from_columns(n, &rows);
                                intersect_column_spaces(&a, &b).expect("same length").column_vecs()
                            }
                        }
                    });
                }
                let mut ech = Echelon::new(n);
                for row in current.unwrap_or_default() {
                    ech.insert(row);
                }
                if ech.rank() > 0 {
                    out.insert(s, ech);
                }
            }
            out
        })
        .collect();

    // Hilbert function: each cell contributes dim · t^s · Π_i Σ_{v in interval_i} t^{2v}
    let len = truncation as usize + 1;
    let mut dims = vec![0usize; len];
    // shifts can be negative, so the unshifted series runs a little further
    let gf_len = len + (-min_s).max(0) as usize;
    for (ci, cell) in cell_list.iter().enumerate() {
        if slices[ci].is_empty() {
            continue;
        }
        let mut gf = vec![0usize; gf_len];
        gf[0] = 1;
        for i in 0..r {
            let lo = thresholds[i][cell[i]] as usize;
            let hi = thresholds[i].get(cell[i] + 1).map(|&x| x as usize);
            let mut next = vec![0usize; gf_len];
            for (a, &c) in gf.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let mut v = lo;
                while a + 2 * v < gf_len && hi.is_none_or(|h| v < h) {
                    next[a + 2 * v] += c;
                    v += 1;
                }
            }
            gf = next;
        }
        for (&s, ech) in &slices[ci] {
            for (a, &c) in gf.iter().enumerate() {
                let d = a as i64 + s;
                if c > 0 && d >= 0 && (d as usize) < len {
                    dims[d as usize] += c * ech.rank();
                }
            }
        }
    }

    // generators live at cell corners
    let mut generators = Vec::new();
    for (ci, cell) in cell_list.iter().enumerate() {
        let corner: Vec<u32> = (0..r).map(|i| thresholds[i][cell[i]]).collect();
        for (&s, ech) in &slices[ci] {
            let degree = 2 * corner.iter().sum::<u32>() as i64 + s;
            if degree < 0 || degree > dmax {
                continue;
            }
            let mut lower = Echelon::new(n);
            for i in 0..r {
                if cell[i] == 0 {
                    continue;
                }
                let mut nb = cell.clone();
                nb[i] -= 1;
                if let Some(&p) = cell_pos.get(&nb) {
                    if let Some(e) = slices[p].get(&s) {
                        for row in e.rows() {
                            lower.insert(row.clone());
                        }
                    }
                }
            }
            for row in ech.rows() {
                if lower.insert(row.clone()) {
                    let mut g = ModElem::zero(degree as u32);
                    for (j, c) in row.iter().enumerate() {
                        if c.is_zero() {
                            continue;
                        }
                        let exps: Vec<u32> = corner.iter().zip(basis_md[j]).map(|(a, b)| a - b).collect();
                        g.add_term(j, exps, c.clone());
                    }
                    generators.push(g);
                }
            }
        }
    }
    generators.sort_by(|a, b| a.degree.cmp(&b.degree).then_with(|| a.terms.keys().cmp(b.terms.keys())));
    Some(FineResult { dims, generators })
}

/// `proj_top`: the coefficient of the top exterior monomial of each
/// generator, as a submodule of the polynomial ring (degree shifted down by
/// the exterior top degree).
pub fn proj_top(m: &Submodule, ambient: &AmbientSpec) -> Result<Submodule, SubmoduleError> {
    if ambient.factors == 0 {
        return Err(SubmoduleError::NeedsExterior);
    }
    if *m.module() != Arc::new(ambient.free_module()) {
        return Err(SubmoduleError::AmbientMismatch);
    }
    let top = ambient.top_index();
    let shift = ambient.top_degree();
    let ring = Arc::new(FreeModule::on_degrees(ambient.rank, &[0]));
    let gens = m
        .generators()
        .iter()
        .filter(|g| g.degree >= shift)
        .map(|g| {
            let p = g.coefficient(ambient.rank, top);
            let mut e = ModElem::zero(g.degree - shift);
            for (ex, c) in p.terms() {
                e.add_term(0, ex.clone(), c.clone());
            }
            e
        })
        .collect();
    Ok(Submodule::new(ring, gens, format!("proj_top({})", m.provenance)))
}

/// Outcome of the pairing test behind maximality of section modules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualityReport {
    pub generator_degrees: Vec<u32>,
    /// Every generator product projects into `(d)`.
    pub containment: bool,
    /// The pairing matrix is block triangular for the degree order and its
    /// constant diagonal blocks are invertible, so normalizing by them makes
    /// it unipotent triangular.
    pub unipotent_triangular: bool,
    pub maximal: bool,
    /// Constant terms of `proj_top(x_i x_{n-1-j}) / d`.
    pub constant_matrix: Vec<Vec<Rational>>,
    pub nondegenerate: bool,
}

/// Orders generators by degree, then by position of the leading coordinate,
/// then by coordinates.
pub fn duality_order(gens: &mut [ModElem]) {
    gens.sort_by(|a, b| {
        a.degree
            .cmp(&b.degree)
            .then_with(|| a.terms.keys().next().cmp(&b.terms.keys().next()))
            .then_with(|| a.terms.iter().cmp(b.terms.iter()))
    });
}

/// Pairing `(1/d)·proj_top(x_i x_{n−1−j})` on the minimal generators.
pub fn duality_pairing_check(
    m: &Submodule,
    ambient: &AmbientSpec,
    d_poly: &Poly,
    truncation: u32,
) -> Result<DualityReport, SubmoduleError> {
    if ambient.factors == 0 {
        return Err(SubmoduleError::NeedsExterior);
    }
    let mut gens = m.minimal_generators(truncation);
    let expected = ambient.ext_count();
    if gens.len() != expected {
        return Err(SubmoduleError::GeneratorCount { expected, found: gens.len() });
    }
    duality_order(&mut gens);
    let n = gens.len();
    let top = ambient.top_index();
    let r = ambient.rank;
    let dq = d_poly.homogeneous_degree().unwrap_or(0) as i64;
    let top_deg = ambient.top_degree() as i64 + 2 * dq;
    let mut containment = true;
    let mut c = vec![vec![Rational::zero(); n]; n];
    let mut q_deg = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let prod = ambient.mul_elems(&gens[i], &gens[n - 1 - j]);
            let p = prod.coefficient(r, top);
            q_deg[i][j] = prod.degree as i64 - top_deg;
            match p.divide(d_poly) {
                Some(q) => c[i][j] = q.constant_term(),
                None => containment = false,
            }
        }
    }
    let degrees: Vec<u32> = gens.iter().map(|g| g.degree).collect();
    // triangularity: entries of negative degree must vanish (automatic for
    // polynomials), and degree-zero entries must form invertible diagonal blocks
    let mut unipotent = containment;
    let mut i = 0;
    while unipotent && i < n {
        let mut k = i;
        while k < n && degrees[k] == degrees[i] {
            k += 1;
        }
        let block: Vec<Vec<Rational>> = (i..k).map(|a| (i..k).map(|b| c[a][b].clone()).collect()).collect();
        if (i..k).any(|a| (i..k).any(|b| q_deg[a][b] != 0)) {
            unipotent = false;
        }
        if crate::linalg::rank(&Matrix::from_rows(k - i, block)) != k - i {
            unipotent = false;
        }
        for a in i..k {
            for b in k..n {
                if q_deg[a][b] > 0 {
                    unipotent = false;
                }
            }
        }
        i = k;
    }
    let nondegenerate = crate::linalg::rank(&Matrix::from_rows(n, c.clone())) == n;
    Ok(DualityReport {
        generator_degrees: degrees,
        containment,
        unipotent_triangular: unipotent,
        maximal: containment && unipotent,
        constant_matrix: c,
        nondegenerate,
    })
}

/// Numerator of a free module with generators in the given degrees.
pub fn free_numerator(degrees: &[u32], truncation: u32) -> Vec<i64> {
    let mut c = vec![0i64; truncation as usize + 1];
    for &d in degrees {
        if d <= truncation {
            c[d as usize] += 1;
        }
    }
    c
}

/// Product submodule generated by pairwise products of generators of
/// factors living in different tensor slots.
pub fn product_module(
    target: &AmbientSpec,
    one: &AmbientSpec,
    factor_gens: &[Vec<ModElem>],
    provenance: impl Into<String>,
) -> Submodule {
    let mut products: Vec<ModElem> = vec![{
        let mut u = ModElem::zero(0);
        u.add_term(0, vec![0; target.rank], Rational::one());
        u
    }];
    for (slot, gens) in factor_gens.iter().enumerate() {
        let embedded: Vec<ModElem> = gens.iter().map(|g| target.embed_slot(one, slot, g)).collect();
        let mut next = Vec::with_capacity(products.len() * embedded.len());
        for p in &products {
            for e in &embedded {
                next.push(target.mul_elems(p, e));
            }
        }
        products = next;
    }
    Submodule::new(Arc::new(target.free_module()), products, provenance)
}

pub fn count_monomials(r: usize, q: u32) -> usize {
    monomial::count(r, q)
}
