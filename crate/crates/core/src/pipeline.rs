//! Global sections of the GKM sheaves attached to representation varieties
//! `Hom(π₁Σ_g, K)`, their Weyl invariants, and table rows.
//!
//! Everything lives in `Λ(t*)^{⊗g} ⊗ S(t*)`. For a positive root `α` and a
//! character `χ` of `T₂`, the edge image at `α` consists of the `f` whose
//! component on which the reflection `s_α` (acting on the exterior factors
//! only) has eigenvalue `−χ(h_α)` is divisible by `α`. Sections are the
//! intersection of these images; slices are computed block by block as the
//! kernel of `f ↦ ev_α(P_α f)`, where `P_α` projects onto that eigenspace
//! and `ev_α` restricts polynomial coefficients to the hyperplane `α = 0`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{AmbientSpec, LinearSubstitution};
use crate::freemod::{FreeModule, ModElem, Piece};
use crate::linalg::{kernel_rows, row_basis, Echelon};
use crate::monomial;
use crate::poly::Poly;
use crate::rational::Rational;
use crate::roots::{CentralElement, RootError, RootSystem};
use crate::series::int;
use crate::sheaf::{MonodromyEdge, MonodromySpec};
use crate::submodule::{
    product_module, BlockTower, FreenessCertificate, HilbertData, Slice, Submodule, Tower, Verdict,
    DEFAULT_STABILITY_WINDOW,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("genus must be at least 1")]
    Genus,
    #[error("character {0:?} has the wrong length")]
    Character(Vec<i64>),
    #[error("{0} is in the extended tier; pass an explicit truncation")]
    NeedsTruncation(String),
    #[error("fundamental invariants of degrees {found:?} do not match {expected:?}")]
    Invariants { expected: Vec<u32>, found: Vec<u32> },
}

/// Groups whose default truncation is expensive.
pub const EXTENDED_TIER: &[&str] = &["B3", "C3", "A4", "B4", "C4", "D4", "F4"];

fn q(n: i64) -> Rational {
    Rational::from_int(n)
}

/// Images of monomials under a linear map `x_i ↦ images[i]`, by degree.
struct SymPowers {
    levels: Vec<Vec<Poly>>,
    r: usize,
}

impl SymPowers {
    fn new(images: Vec<Poly>, qmax: u32) -> Self {
        let r = images.len();
        let n_out = images.first().map_or(0, |p| p.nvars());
        let mut levels: Vec<Vec<Poly>> = vec![vec![Poly::one(n_out)]];
        for qq in 1..=qmax {
            let prev = &levels[qq as usize - 1];
            let cur: Vec<Poly> = monomial::list(r, qq)
                .iter()
                .map(|e| {
                    let i = e.iter().position(|&k| k > 0).unwrap();
                    let mut f = e.clone();
                    f[i] -= 1;
                    prev[monomial::rank(&f)].mul(&images[i])
                })
                .collect();
            levels.push(cur);
        }
        SymPowers { levels, r }
    }

    /// Sparse columns: for each source monomial of degree `q`, its image as
    /// (target monomial index, coefficient) pairs.
    fn columns(&self, q: u32) -> Vec<Vec<(usize, Rational)>> {
        let _ = self.r;
        self.levels[q as usize]
            .iter()
            .map(|p| p.terms().iter().map(|(e, c)| (monomial::rank(e), c.clone())).collect())
            .collect()
    }
}

/// Matrix of an exterior-only action on all basis monomials of the ambient.
fn exterior_matrix(amb: &AmbientSpec, s: &LinearSubstitution) -> Vec<Vec<Rational>> {
    let n = amb.ext_count();
    let mut m = vec![vec![Rational::zero(); n]; n];
    let zero = vec![0u32; amb.rank];
    for j in 0..n {
        let mut x = ModElem::zero(0);
        x.add_term(j, zero.clone(), Rational::one());
        let y = amb.substitute_elem(&x, s);
        for ((jj, _), c) in &y.terms {
            m[*jj][j] = c.clone();
        }
    }
    m
}

/// Applies `Λ ⊗ S` to a vector in block-piece coordinates; `lam` is indexed by
/// ambient exterior indices and `sym` gives columns for the piece's degree.
fn apply_tensor(piece: &Piece, v: &[Rational], lam: &[Vec<Rational>], sym: &[Vec<(usize, Rational)>]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); piece.len()];
    let Some(first) = piece.slots.first() else { return out };
    let c = first.count;
    let mut u: Vec<Vec<Rational>> = Vec::with_capacity(piece.slots.len());
    for s in &piece.slots {
        let mut row = vec![Rational::zero(); c];
        for (e, x) in v[s.offset..s.offset + s.count].iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (e2, k) in &sym[e] {
                row[*e2] += &(x * k);
            }
        }
        u.push(row);
    }
    for t in &piece.slots {
        for (si, s) in piece.slots.iter().enumerate() {
            let l = &lam[t.basis][s.basis];
            if l.is_zero() {
                continue;
            }
            for (e, x) in u[si].iter().enumerate() {
                if !x.is_zero() {
                    out[t.offset + e] += &(l * x);
                }
            }
        }
    }
    out
}

fn echelon_of(rows: Vec<Vec<Rational>>, cols: usize) -> Echelon {
    let rows = row_basis(rows, cols);
    let pivots = rows.iter().map(|r| r.iter().position(|x| !x.is_zero()).unwrap()).collect();
    Echelon::from_rref(cols, rows, pivots)
}

/// Shared data for one group and genus.
pub struct Context {
    pub sys: Arc<RootSystem>,
    pub g: usize,
    pub ambient: AmbientSpec,
    pub module: Arc<FreeModule>,
    /// Per root and tensor factor, the reflection acting on that factor only.
    reflections: Vec<Vec<Vec<Vec<Rational>>>>,
    restrictions: Vec<(usize, Vec<Poly>)>,
}

impl Context {
    pub fn new(sys: Arc<RootSystem>, g: usize) -> Result<Self, PipelineError> {
        if g == 0 {
            return Err(PipelineError::Genus);
        }
        let r = sys.rank();
        let ambient = AmbientSpec::standard(r, g);
        let module = Arc::new(ambient.free_module());
        let one = AmbientSpec::standard(r, 1);
        let reflections = (0..sys.datum.positive_roots.len())
            .map(|a| {
                let m = &sys.datum.reflection(a);
                let rows: Vec<&[i64]> = m.iter().map(|x| x.as_slice()).collect();
                let single = exterior_matrix(&one, &LinearSubstitution::from_i64(&rows));
                (0..g).map(|i| factor_matrix(&ambient, &one, &single, i)).collect()
            })
            .collect();
        let restrictions = sys.datum.positive_roots.iter().map(|a| hyperplane_restriction(a)).collect();
        Ok(Context { sys, g, ambient, module, reflections, restrictions })
    }

    pub fn rank(&self) -> usize {
        self.sys.rank()
    }

    pub fn dim_group(&self) -> u32 {
        (self.rank() + 2 * self.sys.datum.positive_roots.len()) as u32
    }

    /// `g·(r + 2|Δ₊|) + 4`.
    pub fn default_truncation(&self) -> u32 {
        self.g as u32 * self.dim_group() + 4
    }

    /// Truncation for Weyl invariants: room for the invariant denominator.
    pub fn default_weyl_truncation(&self) -> u32 {
        self.g as u32 * self.dim_group() + 2 * self.sys.datum.invariant_degrees.iter().sum::<u32>() + 4
    }

    pub fn weyl_window(&self) -> usize {
        2 * *self.sys.datum.invariant_degrees.iter().max().unwrap() as usize
    }

    /// `∏_{α∈Δ₊} α`.
    pub fn root_product(&self) -> Poly {
        self.sys.datum.positive_roots.iter().fold(Poly::one(self.rank()), |acc, a| acc.mul(&Poly::linear_i64(a)))
    }

    /// For each `k ≥ 1`, rows spanning the image of the projector onto the
    /// part of a block with exactly `k` factors in the `−χ(h_α)` eigenspace.
    fn bad_projector_rows(&self, root: usize, chi: u32, piece: &Piece) -> Vec<(usize, Vec<Vec<Rational>>)> {
        let eps = q(self.sys.eval_char_coroot(chi, root));
        let b = piece.slots.len();
        let half = Rational::new(1, 2);
        // per factor: (good, bad) projectors restricted to the block
        let parts: Vec<[Vec<Vec<Rational>>; 2]> = self.reflections[root]
            .iter()
            .map(|lam| {
                let proj = |sign: &Rational| -> Vec<Vec<Rational>> {
                    piece
                        .slots
                        .iter()
                        .map(|t| {
                            piece
                                .slots
                                .iter()
                                .map(|s| {
                                    let id = if s.basis == t.basis { q(1) } else { q(0) };
                                    (id + sign * &eps * &lam[t.basis][s.basis]) * &half
                                })
                                .collect()
                        })
                        .collect()
                };
                [proj(&q(1)), proj(&q(-1))]
            })
            .collect();
        let mut by_k: Vec<Vec<Vec<Rational>>> = vec![vec![vec![Rational::zero(); b]; b]; self.g + 1];
        for subset in 0u32..(1 << self.g) {
            let mut m: Vec<Vec<Rational>> =
                (0..b).map(|i| (0..b).map(|j| if i == j { q(1) } else { q(0) }).collect()).collect();
            for (i, pr) in parts.iter().enumerate() {
                m = mat_mul(&pr[((subset >> i) & 1) as usize], &m);
            }
            let acc = &mut by_k[subset.count_ones() as usize];
            for (x, y) in acc.iter_mut().zip(&m) {
                for (a, c) in x.iter_mut().zip(y) {
                    *a += c;
                }
            }
        }
        by_k.into_iter()
            .enumerate()
            .skip(1)
            .map(|(k, m)| (k, row_basis(m, b)))
            .filter(|(_, rows)| !rows.is_empty())
            .collect()
    }

    /// Basis of the degree-`d` slice of `H⁰(F_g^χ)` within one block: the
    /// part with `k` bad factors must vanish to order `k` along `α = 0`.
    fn section_slice(&self, chi: u32, piece: &Piece) -> Echelon {
        let n = piece.len();
        if n == 0 {
            return Echelon::new(0);
        }
        let qd = piece.slots[0].q;
        let r = self.rank();
        let mut rows: Vec<Vec<Rational>> = Vec::new();
        for root in 0..self.sys.datum.positive_roots.len() {
            let projs = self.bad_projector_rows(root, chi, piece);
            if projs.is_empty() {
                continue;
            }
            let (kvar, ref images) = self.restrictions[root];
            let ev = SymPowers::new(images.clone(), qd);
            let sources = monomial::list(r, qd);
            for (k, proj) in &projs {
                for j in 0..(*k as u32).min(qd + 1) {
                    // ev ∘ ∂^j along x_kvar, a direction transverse to α = 0
                    let cols = ev.columns(qd - j);
                    let targets = monomial::count(r - 1, qd - j);
                    let deriv: Vec<Vec<(usize, Rational)>> = sources
                        .iter()
                        .map(|e| {
                            if e[kvar] < j {
                                return Vec::new();
                            }
                            let mut f = e.clone();
                            f[kvar] -= j;
                            let fall: i64 = (0..j).map(|t| (e[kvar] - t) as i64).product();
                            cols[monomial::rank(&f)].iter().map(|(m, c)| (*m, c * &q(fall))).collect()
                        })
                        .collect();
                    for rho in proj {
                        let base = rows.len();
                        rows.extend((0..targets).map(|_| vec![Rational::zero(); n]));
                        for (si, s) in piece.slots.iter().enumerate() {
                            if rho[si].is_zero() {
                                continue;
                            }
                            for (e, col) in deriv.iter().enumerate() {
                                for (m, c) in col {
                                    rows[base + m][s.offset + e] = &rho[si] * c;
                                }
                            }
                        }
                    }
                }
            }
        }
        let kernel = if rows.is_empty() {
            (0..n)
                .map(|i| {
                    let mut v = vec![Rational::zero(); n];
                    v[i] = Rational::one();
                    v
                })
                .collect()
        } else {
            kernel_rows(rows, n)
        };
        echelon_of(kernel, n)
    }

    /// `H⁰(F_g^χ)` through degree `truncation`.
    pub fn sections(&self, chi: u32, truncation: u32) -> Submodule {
        let keys = self.module.blocks();
        let jobs: Vec<(usize, u32)> = (0..keys.len()).flat_map(|b| (0..=truncation).map(move |d| (b, d))).collect();
        let slices: Vec<Slice> = jobs
            .par_iter()
            .map(|&(b, d)| {
                let piece = self.module.piece(d, Some(&keys[b]));
                let basis = self.section_slice(chi, &piece);
                Slice { piece, basis }
            })
            .collect();
        let mut it = slices.into_iter();
        let blocks = keys
            .iter()
            .map(|k| BlockTower { key: Some(k.clone()), slices: it.by_ref().take(truncation as usize + 1).collect() })
            .collect();
        let tower = Tower { module: self.module.clone(), truncation, blocks };
        Submodule::from_tower(tower, format!("H0(F_{}^chi) for {}, chi = {:?}", self.g, self.sys.datum.label, self.sys.signs(chi)))
    }

    /// Edge image at one root, generated in the adapted basis.
    pub fn rank_one_image(&self, root: usize, chi: u32) -> Submodule {
        let eps = self.sys.eval_char_coroot(chi, root);
        let basis = self.sys.datum.adapted_basis(root);
        let amb = &self.ambient;
        let r = self.rank();
        let gens: Vec<ModElem> = (0..amb.ext_count())
            .map(|j| {
                let masks = amb.ext_monomial(j);
                let bad = masks.iter().filter(|m| (if *m & 1 == 1 { -1 } else { 1 }) * eps != 1).count() as u32;
                let mut exps = vec![0u32; r];
                exps[0] = bad;
                let mut x = ModElem::zero(masks.iter().map(|m| m.count_ones()).sum::<u32>() + 2 * bad);
                x.add_term(j, exps, Rational::one());
                amb.substitute_elem(&x, &basis)
            })
            .collect();
        Submodule::new(self.module.clone(), gens, format!("image at root {root}"))
    }

    /// `g`-fold products of minimal generators of `H⁰(F_1^χ)`.
    pub fn sections_fg_chi(&self, chi: u32, truncation: u32) -> Result<ProductSections, PipelineError> {
        let one_ctx = Context::new(self.sys.clone(), 1)?;
        let h1 = one_ctx.sections(chi, truncation);
        let cert = h1.certify_free(truncation);
        if self.g == 1 {
            return Ok(ProductSections { module: h1, factor_certificate: cert, label: "sections".into() });
        }
        let gens = h1.minimal_generators(truncation);
        let label = if cert.is_free() {
            "tensor power of free sections".to_string()
        } else {
            "product-module, tensor identification unproven".to_string()
        };
        let factors = vec![gens; self.g];
        let module = product_module(&self.ambient, &one_ctx.ambient, &factors, label.clone());
        Ok(ProductSections { module, factor_certificate: cert, label })
    }

    /// Standard action of a Weyl element on every slice block.
    fn weyl_matrices(&self, w: usize, qmax: u32) -> (Vec<Vec<Rational>>, SymPowers) {
        let s = self.sys.substitution(w);
        let lam = exterior_matrix(&self.ambient, &s);
        let images = (0..self.rank()).map(|i| s.image(i)).collect();
        (lam, SymPowers::new(images, qmax))
    }

    /// Applies the standard action of `w` to a sparse element.
    pub fn act(&self, w: usize, x: &ModElem) -> ModElem {
        self.ambient.substitute_elem(x, &self.sys.substitution(w))
    }

    /// Invariant vectors per block and degree under `τ_w = sign_w · w` for the
    /// given generators.
    fn invariant_slices(&self, tower: &Tower, gens: &[(usize, i64)]) -> Vec<Vec<Vec<Vec<Rational>>>> {
        let qmax = tower.truncation / 2;
        let mats: Vec<(Vec<Vec<Rational>>, SymPowers, i64)> = gens
            .iter()
            .map(|&(w, sign)| {
                let (l, s) = self.weyl_matrices(w, qmax);
                (l, s, sign)
            })
            .collect();
        let jobs: Vec<(usize, usize)> =
            (0..tower.blocks.len()).flat_map(|b| (0..=tower.truncation as usize).map(move |d| (b, d))).collect();
        let out: Vec<Vec<Vec<Rational>>> = jobs
            .par_iter()
            .map(|&(b, d)| {
                let slice = &tower.blocks[b].slices[d];
                let h = slice.dim();
                if h == 0 {
                    return Vec::new();
                }
                let piece = &slice.piece;
                let qd = piece.slots[0].q;
                let pivots = slice.basis.pivots();
                let mut rows: Vec<Vec<Rational>> = Vec::new();
                for (lam, sym, sign) in &mats {
                    let cols = sym.columns(qd);
                    let mut t = vec![vec![Rational::zero(); h]; h];
                    for (i, v) in slice.basis.rows().iter().enumerate() {
                        let img = apply_tensor(piece, v, lam, &cols);
                        for (k, &p) in pivots.iter().enumerate() {
                            t[k][i] = q(*sign) * &img[p];
                        }
                    }
                    for (k, row) in t.iter_mut().enumerate() {
                        row[k] -= &Rational::one();
                    }
                    rows.extend(t);
                }
                let coords = if rows.is_empty() {
                    (0..h)
                        .map(|i| {
                            let mut v = vec![Rational::zero(); h];
                            v[i] = Rational::one();
                            v
                        })
                        .collect()
                } else {
                    kernel_rows(rows, h)
                };
                let vecs: Vec<Vec<Rational>> = coords
                    .iter()
                    .map(|c| {
                        let mut v = vec![Rational::zero(); piece.len()];
                        for (k, ck) in c.iter().enumerate() {
                            if ck.is_zero() {
                                continue;
                            }
                            for (x, y) in v.iter_mut().zip(&slice.basis.rows()[k]) {
                                if !y.is_zero() {
                                    *x += &(ck * y);
                                }
                            }
                        }
                        v
                    })
                    .collect();
                row_basis(vecs, piece.len())
            })
            .collect();
        let mut it = out.into_iter();
        (0..tower.blocks.len()).map(|_| it.by_ref().take(tower.truncation as usize + 1).collect()).collect()
    }

    /// Fundamental invariants of `W` on `S(t*)`, chosen greedily by degree.
    pub fn fundamental_invariants(&self) -> Result<Vec<Poly>, PipelineError> {
        let r = self.rank();
        let expected = self.sys.datum.invariant_degrees.clone();
        let qmax = *expected.iter().max().unwrap();
        let gens: Vec<SymPowers> = self.sys.generators.iter().map(|&w| self.weyl_matrices(w, qmax).1).collect();
        let mut found: Vec<(u32, Poly)> = Vec::new();
        for qq in 1..=qmax {
            let n = monomial::count(r, qq);
            let mut rows: Vec<Vec<Rational>> = Vec::new();
            for s in &gens {
                let cols = s.columns(qq);
                let mut m = vec![vec![Rational::zero(); n]; n];
                for (e, col) in cols.iter().enumerate() {
                    for (e2, c) in col {
                        m[*e2][e] = c.clone();
                    }
                    m[e][e] -= &Rational::one();
                }
                rows.extend(m);
            }
            let inv = kernel_rows(rows, n);
            let mut span = Echelon::new(n);
            for p in products_of_degree(&found, qq, r) {
                span.insert(p.to_dense(qq));
            }
            for v in inv {
                if span.insert(v.clone()) {
                    found.push((qq, Poly::from_dense(r, qq, &v)));
                }
            }
        }
        let degrees: Vec<u32> = found.iter().map(|(d, _)| *d).collect();
        let mut sorted_expected = expected.clone();
        sorted_expected.sort_unstable();
        if degrees != sorted_expected {
            return Err(PipelineError::Invariants { expected: sorted_expected, found: degrees });
        }
        Ok(found.into_iter().map(|(_, p)| p).collect())
    }

    /// `(H⁰(F_g^χ))^{(W_c)_χ}` under the twisted action, as a module over `A^W`.
    pub fn weyl_invariants(
        &self,
        sections: &Submodule,
        c: &CentralElement,
        chi: u32,
        truncation: u32,
    ) -> Result<WeylInvariants, PipelineError> {
        let stab = self.sys.char_stabilizer(chi);
        let gens = self.sys.subgroup_generators(&stab);
        let signed: Vec<(usize, i64)> =
            gens.iter().map(|&w| Ok((w, self.sys.twist_sign(c, w, chi)?))).collect::<Result<_, RootError>>()?;
        let tower = sections.tower(truncation);
        let inv = self.invariant_slices(&tower, &signed);
        let len = truncation as usize + 1;
        let dims: Vec<i64> = (0..len).map(|d| inv.iter().map(|b| b[d].len() as i64).sum()).collect();
        let exps: Vec<usize> = self.sys.datum.invariant_degrees.iter().map(|&d| 2 * d as usize).collect();
        let coefficients = int::times_denominator(&dims, &exps, len);
        let window = self.weyl_window();
        let stable = coefficients.len() >= window && coefficients[len - window..].iter().all(|&x| x == 0);
        let hilbert = HilbertData { coefficients, truncation, stable, window };

        let fis = self.fundamental_invariants()?;
        let mut gen_degrees = Vec::new();
        for (b, per_degree) in inv.iter().enumerate() {
            let key = tower.blocks[b].key.clone();
            for d in 0..len {
                let here = per_degree[d].len();
                if here == 0 {
                    continue;
                }
                let piece = self.module.piece(d as u32, key.as_deref());
                let mut span = Echelon::new(piece.len());
                for f in &fis {
                    let fd = 2 * f.homogeneous_degree().unwrap() as usize;
                    if fd > d {
                        continue;
                    }
                    let lower = self.module.piece((d - fd) as u32, key.as_deref());
                    for v in &per_degree[d - fd] {
                        let x = ModElem::from_dense(&lower, v).mul_poly(f);
                        span.insert(x.to_dense(&piece));
                    }
                }
                for _ in span.rank()..here {
                    gen_degrees.push(d as u32);
                }
            }
        }
        gen_degrees.sort_unstable();
        let certificate = FreenessCertificate::from_counts(&hilbert, &gen_degrees);
        Ok(WeylInvariants {
            stabilizer_order: stab.len(),
            twist_signs: signed.iter().map(|&(_, s)| s).collect(),
            invariant_dims: dims,
            hilbert,
            generator_degrees: gen_degrees,
            certificate,
        })
    }
}

/// Products of already chosen invariants with total polynomial degree `qq`.
fn products_of_degree(found: &[(u32, Poly)], qq: u32, r: usize) -> Vec<Poly> {
    fn rec(found: &[(u32, Poly)], start: usize, rem: u32, acc: Poly, out: &mut Vec<Poly>) {
        if rem == 0 {
            out.push(acc);
            return;
        }
        for i in start..found.len() {
            if found[i].0 <= rem {
                rec(found, i, rem - found[i].0, acc.mul(&found[i].1), out);
            }
        }
    }
    let mut out = Vec::new();
    rec(found, 0, qq, Poly::one(r), &mut out);
    out
}

fn mat_mul(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            let mut out = vec![Rational::zero(); n];
            for (x, brow) in row.iter().zip(b) {
                if x.is_zero() {
                    continue;
                }
                for (o, y) in out.iter_mut().zip(brow) {
                    if !y.is_zero() {
                        *o += &(x * y);
                    }
                }
            }
            out
        })
        .collect()
}

/// Lifts a matrix on `Λ(t*)` to the `i`-th factor of `Λ(t*)^{⊗g}`.
fn factor_matrix(amb: &AmbientSpec, one: &AmbientSpec, single: &[Vec<Rational>], i: usize) -> Vec<Vec<Rational>> {
    let n = amb.ext_count();
    let mut m = vec![vec![Rational::zero(); n]; n];
    for j in 0..n {
        let masks = amb.ext_monomial(j);
        let src = one.ext_index(&[masks[i]]);
        for (t, row) in single.iter().enumerate() {
            if row[src].is_zero() {
                continue;
            }
            let mut out = masks.clone();
            out[i] = one.ext_monomial(t)[0];
            m[amb.ext_index(&out)][j] = row[src].clone();
        }
    }
    m
}

/// Restriction of polynomials to the hyperplane `α = 0`: the eliminated
/// variable and the images of all variables in the remaining coordinates.
fn hyperplane_restriction(alpha: &[i64]) -> (usize, Vec<Poly>) {
    let r = alpha.len();
    let k = (0..r)
        .filter(|&i| alpha[i] != 0)
        .min_by_key(|&i| (alpha[i].abs(), i))
        .expect("nonzero root");
    let pos = |j: usize| if j < k { j } else { j - 1 };
    let images = (0..r)
        .map(|j| {
            if j == k {
                let coeffs: Vec<Rational> =
                    (0..r).filter(|&i| i != k).map(|i| Rational::new(-alpha[i], alpha[k])).collect();
                if r == 1 {
                    Poly::zero(0)
                } else {
                    Poly::linear(&coeffs)
                }
            } else {
                Poly::var(r - 1, pos(j))
            }
        })
        .collect();
    (k, images)
}

/// Result of [`Context::sections_fg_chi`].
pub struct ProductSections {
    pub module: Submodule,
    pub factor_certificate: FreenessCertificate,
    pub label: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylInvariants {
    pub stabilizer_order: usize,
    pub twist_signs: Vec<i64>,
    #[serde(skip)]
    pub invariant_dims: Vec<i64>,
    pub hilbert: HilbertData,
    pub generator_degrees: Vec<u32>,
    pub certificate: FreenessCertificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CSelector {
    Regular,
    Central(String),
}

impl CSelector {
    pub fn parse(s: &str) -> Self {
        if s == "regular" {
            CSelector::Regular
        } else {
            CSelector::Central(s.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            CSelector::Regular => "regular",
            CSelector::Central(l) => l,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharSelection {
    Representatives,
    All,
    One(Vec<i64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineRequest {
    pub group: String,
    pub g: usize,
    pub c: CSelector,
    pub characters: CharSelection,
    pub truncation: Option<u32>,
}

impl PipelineRequest {
    pub fn new(group: &str, g: usize, c: CSelector) -> Self {
        PipelineRequest { group: group.into(), g, c, characters: CharSelection::Representatives, truncation: None }
    }

    pub fn with_truncation(mut self, d: u32) -> Self {
        self.truncation = Some(d);
        self
    }
}

/// Numerator coefficients with the truncation they were certified at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Numerator {
    pub coefficients: Vec<i64>,
    pub truncation: u32,
    pub stable: bool,
}

impl Numerator {
    fn of(h: &HilbertData) -> Self {
        Numerator { coefficients: h.trimmed(), truncation: h.truncation, stable: h.stable }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitRow {
    /// Values `±1` on the cocharacter basis.
    pub representative: Vec<i64>,
    pub orbit_size: usize,
    /// Multiplicity of this term in the total.
    pub multiplicity: usize,
    pub stabilizer_order: usize,
    pub numerator: Numerator,
    pub generator_degrees: Vec<u32>,
    pub certificate: FreenessCertificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub group: String,
    pub g: usize,
    pub c: String,
    pub mode: String,
    pub truncation: u32,
    pub window: usize,
    pub normalization: String,
    pub trivial: Numerator,
    pub orbits: Vec<OrbitRow>,
    pub total: Numerator,
    pub stable: bool,
    pub free: String,
}

impl TableRow {
    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "group {}  g {}  c {}  mode {}  D {}  window {}\n",
            self.group, self.g, self.c, self.mode, self.truncation, self.window
        ));
        s.push_str(&format!("normalization: {}\n", self.normalization));
        let w = self.orbits.iter().map(|o| format!("{:?}", o.representative).len()).max().unwrap_or(0);
        for o in &self.orbits {
            let verdict = match &o.certificate.verdict {
                Verdict::Free { .. } => "free".to_string(),
                Verdict::NotFree { witness_degree, .. } => format!("not free (degree {witness_degree})"),
                Verdict::Inconclusive { .. } => "inconclusive".to_string(),
            };
            s.push_str(&format!(
                "  chi {:<w$}  x{:<3} |W_chi| {:<4} {:<40}  {}{}\n",
                format!("{:?}", o.representative),
                o.multiplicity,
                o.stabilizer_order,
                int::render(&o.numerator.coefficients),
                verdict,
                if o.numerator.stable { "" } else { "  (unstable)" },
                w = w
            ));
        }
        s.push_str(&format!("total: {}\n", int::render(&self.total.coefficients)));
        s.push_str(&format!("free: {}  stable: {}\n", self.free, self.stable));
        s
    }
}

fn verdict_word(certs: &[&FreenessCertificate]) -> String {
    if certs.iter().any(|c| c.is_not_free()) {
        "no".into()
    } else if certs.iter().all(|c| c.is_free()) {
        "yes".into()
    } else {
        "inconclusive".into()
    }
}

/// Computes one table row.
pub fn table_row(req: &PipelineRequest) -> Result<TableRow, PipelineError> {
    let sys = Arc::new(RootSystem::build(&req.group)?);
    table_row_with(sys, req)
}

pub fn table_row_with(sys: Arc<RootSystem>, req: &PipelineRequest) -> Result<TableRow, PipelineError> {
    let ctx = Context::new(sys.clone(), req.g)?;
    let central = match &req.c {
        CSelector::Regular => None,
        CSelector::Central(l) => Some(sys.datum.central(l)?.clone()),
    };
    if req.truncation.is_none() && EXTENDED_TIER.contains(&req.group.as_str()) {
        return Err(PipelineError::NeedsTruncation(req.group.clone()));
    }
    let truncation = req.truncation.unwrap_or_else(|| match central {
        None => ctx.default_truncation(),
        Some(_) => ctx.default_weyl_truncation(),
    });
    let orbits = sys.char_orbits();
    // (character, multiplicity, orbit size, stabilizer order)
    let mut units: Vec<(u32, usize, usize, usize)> = Vec::new();
    match (&req.characters, &central) {
        (CharSelection::One(signs), _) => {
            if signs.len() != sys.rank() {
                return Err(PipelineError::Character(signs.clone()));
            }
            let chi = sys.from_signs(signs);
            let o = orbits.iter().find(|o| o.members.contains(&chi)).unwrap();
            units.push((chi, 1, o.members.len(), sys.char_stabilizer(chi).len()));
        }
        (CharSelection::All, None) => {
            for o in &orbits {
                for &m in &o.members {
                    units.push((m, 1, o.members.len(), o.stabilizer.len()));
                }
            }
        }
        (_, None) => {
            for o in &orbits {
                units.push((o.representative, o.members.len(), o.members.len(), o.stabilizer.len()));
            }
        }
        (_, Some(_)) => {
            for o in &orbits {
                units.push((o.representative, 1, o.members.len(), o.stabilizer.len()));
            }
        }
    }
    let len = truncation as usize + 1;
    let mut rows = Vec::new();
    for &(chi, mult, size, stab) in &units {
        let sections = ctx.sections(chi, truncation);
        let row = match &central {
            None => {
                let h = sections.hilbert_numerator(truncation);
                let gens = sections.generator_degrees(truncation);
                let cert = FreenessCertificate::from_counts(&h, &gens);
                OrbitRow {
                    representative: sys.signs(chi),
                    orbit_size: size,
                    multiplicity: mult,
                    stabilizer_order: stab,
                    numerator: Numerator::of(&h),
                    generator_degrees: gens,
                    certificate: cert,
                }
            }
            Some(c) => {
                let wi = ctx.weyl_invariants(&sections, c, chi, truncation)?;
                OrbitRow {
                    representative: sys.signs(chi),
                    orbit_size: size,
                    multiplicity: mult,
                    stabilizer_order: stab,
                    numerator: Numerator::of(&wi.hilbert),
                    generator_degrees: wi.generator_degrees,
                    certificate: wi.certificate,
                }
            }
        };
        rows.push(row);
    }
    let mut total = vec![0i64; len];
    for o in &rows {
        for (i, c) in o.numerator.coefficients.iter().enumerate() {
            total[i] += c * o.multiplicity as i64;
        }
    }
    let stable = rows.iter().all(|o| o.numerator.stable);
    let trivial = rows
        .iter()
        .find(|o| o.representative.iter().all(|&s| s == 1))
        .map(|o| o.numerator.clone())
        .unwrap_or(Numerator { coefficients: Vec::new(), truncation, stable: true });
    let certs: Vec<&FreenessCertificate> = rows.iter().map(|o| &o.certificate).collect();
    let (mode, window, normalization) = match &central {
        None => ("regular", DEFAULT_STABILITY_WINDOW, "Hilbert series times (1-t^2)^r"),
        Some(_) => ("weyl", ctx.weyl_window(), "Hilbert series of Weyl invariants divided by P_t(BK)"),
    };
    Ok(TableRow {
        group: sys.datum.label.clone(),
        g: req.g,
        c: req.c.label().to_string(),
        mode: mode.into(),
        truncation,
        window,
        normalization: normalization.into(),
        trivial,
        stable,
        free: verdict_word(&certs),
        orbits: rows,
        total: Numerator { coefficients: int::trim(total), truncation, stable },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankOneKind {
    SO3,
    U2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankOneCase {
    Regular,
    Identity,
    /// A non-regular element other than the identity.
    Other,
}

/// Closed-form numerators for the rank-one groups. Regular cases are
/// relative to `(1−t²)^r`, the others relative to `P_t(BZ(c))`.
pub fn closed_form_rank_one(kind: RankOneKind, g: u32, case: RankOneCase) -> Vec<i64> {
    let p3 = int::pow(&int::one_plus(3), g);
    let p1 = int::pow(&int::one_plus(1), g);
    let tt2 = int::pow(&[0, 1, 1], g);
    match (kind, case) {
        (RankOneKind::SO3, RankOneCase::Regular | RankOneCase::Identity) => int::scale(&p3, 2),
        (RankOneKind::SO3, RankOneCase::Other) => int::mul(&p3, &int::one_plus(2)),
        (RankOneKind::U2, RankOneCase::Regular) => int::scale(&int::mul(&p1, &int::add(&p3, &tt2)), 2),
        (RankOneKind::U2, _) => int::mul(&p1, &int::add(&int::scale(&p3, 2), &int::mul(&tt2, &int::one_plus(2)))),
    }
}

/// Report on the pairing of sections against `∏ α` for one character at `g = 1`.
pub fn duality_report(
    ctx: &Context,
    sections: &Submodule,
    truncation: u32,
) -> Result<crate::submodule::DualityReport, crate::submodule::SubmoduleError> {
    crate::submodule::duality_pairing_check(sections, &ctx.ambient, &ctx.root_product(), truncation)
}

/// Sum of numerators over every character of `T₂`.
pub fn character_sum(ctx: &Context, truncation: u32) -> Vec<i64> {
    let mut total = vec![0i64; truncation as usize + 1];
    for chi in 0..ctx.sys.t2_size() {
        for (i, c) in ctx.sections(chi, truncation).hilbert_numerator(truncation).coefficients.iter().enumerate() {
            total[i] += c;
        }
    }
    total
}

/// The genus-one sheaf for a regular `c` as a monodromy sheaf (coroots must
/// be nonzero in `T₂`, so not `SO3`): vertices are
/// the elements of `T₂`, the root `α` joins `v` and `v·exp(πi h_α)`, and the
/// monodromy is the reflection on `Λ(t*)`.
pub fn monodromy_spec(sys: &RootSystem) -> MonodromySpec {
    let r = sys.rank();
    let one = AmbientSpec::standard(r, 1);
    let n = one.ext_count();
    let fiber_degrees = (0..n).map(|j| one.ext_monomial(j)[0].count_ones()).collect();
    let vertices: Vec<String> = (0..sys.t2_size()).map(|v| format!("v{v}")).collect();
    let mut edges = Vec::new();
    for (a, root) in sys.datum.positive_roots.iter().enumerate() {
        let m = sys.datum.reflection(a);
        let rows: Vec<&[i64]> = m.iter().map(|x| x.as_slice()).collect();
        let rho = exterior_matrix(&one, &LinearSubstitution::from_i64(&rows));
        let h = sys.coroot_element(a);
        for v in 0..sys.t2_size() {
            if v < v ^ h {
                edges.push(MonodromyEdge {
                    weight: root.clone(),
                    source: vertices[v as usize].clone(),
                    target: vertices[(v ^ h) as usize].clone(),
                    rho: Some(rho.clone()),
                });
            }
        }
    }
    MonodromySpec { rank: r, vertices, fiber_degrees, edges }
}

/// Map from orbit representative (as signs) to numerator; handy in reports.
pub fn numerators_by_character(row: &TableRow) -> BTreeMap<Vec<i64>, Vec<i64>> {
    row.orbits.iter().map(|o| (o.representative.clone(), o.numerator.coefficients.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series;
    use crate::submodule::intersect;

    fn ctx(k: &str, g: usize) -> Context {
        Context::new(Arc::new(RootSystem::build(k).unwrap()), g).unwrap()
    }

    fn chi_of(c: &Context, signs: &[i64]) -> u32 {
        c.sys.from_signs(signs)
    }

    fn a2_chi3(c: &Context) -> u32 {
        // χ₃ is +1 exactly on h_{α12}; α12 = x1 - x2 in the x_i = α_{i3} coordinates
        let a12 = c.sys.datum.positive_roots.iter().position(|r| *r == vec![1, -1]).unwrap();
        (1..4).find(|&chi| c.sys.eval_char_coroot(chi, a12) == 1).unwrap()
    }

    #[test]
    fn rank_one_generator_degrees() {
        let u2 = ctx("U2", 1);
        let mut plus = u2.rank_one_image(0, 0).generators().iter().map(|g| g.degree).collect::<Vec<_>>();
        plus.sort();
        assert_eq!(plus, vec![0, 1, 3, 4]);
        let minus_chi = u2.sys.from_signs(&[-1, 1]);
        assert_eq!(u2.sys.eval_char_coroot(minus_chi, 0), -1);
        let by_ext: Vec<u32> = u2.rank_one_image(0, minus_chi).generators().iter().map(|g| g.degree).collect();
        let mut sorted = by_ext.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2, 2, 3]);
        let so3 = ctx("SO3", 1);
        let mut d: Vec<u32> = so3.rank_one_image(0, 1).generators().iter().map(|g| g.degree).collect();
        d.sort();
        assert_eq!(d, vec![0, 3]);
    }

    #[test]
    fn a2_sections_match_published_basis() {
        let c = ctx("A2", 1);
        let chi = a2_chi3(&c);
        let s = c.sections(chi, 12);
        assert_eq!(s.generator_degrees(12), vec![3, 4, 4, 5]);
        assert!(s.certify_free(12).is_free());
        // 1⊗x1x2, x1∧x2⊗(x1−x2), x1⊗x2 + x2⊗x1, x1⊗x2(x1−x2) − x2⊗x1(x1−x2)
        let amb = &c.ambient;
        let x1 = Poly::var(2, 0);
        let x2 = Poly::var(2, 1);
        let el = |parts: &[(u32, Poly)]| {
            let mut out: Option<ModElem> = None;
            for (mask, p) in parts {
                let j = amb.ext_index(&[*mask]);
                let deg = mask.count_ones() + 2 * p.homogeneous_degree().unwrap();
                let mut x = ModElem::zero(deg);
                for (e, cc) in p.terms() {
                    x.add_term(j, e.clone(), cc.clone());
                }
                out = Some(match out {
                    None => x,
                    Some(o) => o.add(&x),
                });
            }
            out.unwrap()
        };
        let d = x1.sub(&x2);
        let published = vec![
            el(&[(0, x1.mul(&x2))]),
            el(&[(0b11, d.clone())]),
            el(&[(0b01, x2.clone()), (0b10, x1.clone())]),
            el(&[(0b01, x2.mul(&d)), (0b10, x1.mul(&d).scale(&q(-1)))]),
        ];
        assert!(s.contains_all(&published));
        let m = Submodule::new(c.module.clone(), published, "published");
        assert_eq!(m.slice_dims(12), s.slice_dims(12));
    }

    #[test]
    fn kernel_route_matches_intersection_of_images() {
        for (k, d) in [("A2", 12), ("B2", 14), ("SO3", 10), ("U2", 10)] {
            let c = ctx(k, 1);
            for chi in 0..c.sys.t2_size() {
                let images: Vec<Submodule> =
                    (0..c.sys.datum.positive_roots.len()).map(|a| c.rank_one_image(a, chi)).collect();
                let oracle = intersect(&images, d).unwrap();
                let s = c.sections(chi, d);
                assert_eq!(s.slice_dims(d), oracle.slice_dims(d), "{k} chi {chi}");
            }
        }
        let c = ctx("A2", 2);
        let chi = a2_chi3(&c);
        let images: Vec<Submodule> = (0..3).map(|a| c.rank_one_image(a, chi)).collect();
        assert_eq!(c.sections(chi, 14).slice_dims(14), intersect(&images, 14).unwrap().slice_dims(14));
    }

    #[test]
    fn b2_generator_degrees() {
        let c = ctx("B2", 1);
        let s = c.sections(chi_of(&c, &[-1, -1]), 14);
        assert_eq!(s.generator_degrees(14), vec![3, 4, 6, 7]);
        let s = c.sections(chi_of(&c, &[-1, 1]), 14);
        assert_eq!(s.generator_degrees(14), vec![4, 5, 5, 6]);
    }

    #[test]
    fn trivial_character_gives_poincare_polynomial() {
        for k in ["A2", "B2", "G2", "SO3", "U2"] {
            let c = ctx(k, 1);
            let d = c.default_truncation();
            assert_eq!(c.sections(0, d).hilbert_numerator(d).trimmed(), c.sys.datum.poincare(), "{k}");
        }
        let c = ctx("A2", 2);
        assert_eq!(c.sections(0, 20).hilbert_numerator(20).trimmed(), int::pow(&c.sys.datum.poincare(), 2));
    }

    #[test]
    fn tensor_powers() {
        let c = ctx("A2", 2);
        let chi = a2_chi3(&c);
        let ps = c.sections_fg_chi(chi, 16).unwrap();
        assert!(ps.factor_certificate.is_free());
        let expect = int::pow(&[0, 0, 0, 1, 2, 1], 2);
        assert_eq!(ps.module.hilbert_numerator(16).trimmed(), expect);
        assert_eq!(c.sections(chi, 16).hilbert_numerator(16).trimmed(), expect);
    }

    #[test]
    fn regular_rows() {
        let row = table_row(&PipelineRequest::new("A2", 1, CSelector::Regular)).unwrap();
        assert_eq!(row.total.coefficients, vec![1, 0, 0, 4, 6, 4, 0, 0, 1]);
        assert_eq!(row.free, "yes");
        for g in 1..=3u32 {
            let so3 = table_row(&PipelineRequest::new("SO3", g as usize, CSelector::Regular)).unwrap();
            assert_eq!(so3.total.coefficients, closed_form_rank_one(RankOneKind::SO3, g, RankOneCase::Regular));
            let u2 = table_row(&PipelineRequest::new("U2", g as usize, CSelector::Regular)).unwrap();
            assert_eq!(u2.total.coefficients, closed_form_rank_one(RankOneKind::U2, g, RankOneCase::Regular));
        }
    }

    #[test]
    fn non_regular_rank_one() {
        for g in 1..=2u32 {
            let id = table_row(&PipelineRequest::new("SO3", g as usize, CSelector::Central("identity".into()))).unwrap();
            assert_eq!(id.total.coefficients, closed_form_rank_one(RankOneKind::SO3, g, RankOneCase::Identity));
            let pi = table_row(&PipelineRequest::new("SO3", g as usize, CSelector::Central("pi".into()))).unwrap();
            assert_eq!(pi.total.coefficients, closed_form_rank_one(RankOneKind::SO3, g, RankOneCase::Other));
            for label in ["identity", "minus"] {
                let u2 = table_row(&PipelineRequest::new("U2", g as usize, CSelector::Central(label.into()))).unwrap();
                assert_eq!(u2.total.coefficients, closed_form_rank_one(RankOneKind::U2, g, RankOneCase::Identity), "U2 {label}");
            }
        }
    }

    #[test]
    fn a2_weyl_row() {
        let look = |n: &str| (n == "A2").then(|| series::from_ints(&build_poincare("A2")));
        for g in 1..=2 {
            let row = table_row(&PipelineRequest::new("A2", g, CSelector::Central("identity".into()))).unwrap();
            let expr = format!("P_t(A2)^{g} + (1+t^2+t^4)(t^3+2t^4+t^5)^{g}");
            let expect = series::to_ints(&series::parse_expr(&expr, look).unwrap()).unwrap();
            assert_eq!(row.total.coefficients, expect);
            assert_eq!(row.free, "yes");
        }
    }

    fn build_poincare(k: &str) -> Vec<i64> {
        crate::roots::build_datum(k).unwrap().poincare()
    }

    #[test]
    fn b2_weyl_parity() {
        let ints = |e: &str| series::to_ints(&series::parse_expr(e, |_| None).unwrap()).unwrap();
        for g in 1..=2usize {
            for (label, i) in [("identity", 0), ("eps", 1)] {
                let row = table_row(&PipelineRequest::new("B2", g, CSelector::Central(label.into()))).unwrap();
                let by = numerators_by_character(&row);
                let odd = (g + i) % 2 == 1;
                let shift = if odd { "t^4" } else { "1" };
                assert_eq!(by[&vec![-1, -1]], ints(&format!("{shift}(t^3+t^4+t^6+t^7)^{g}")), "g {g} {label}");
                // the paired orbit picks up a linear factor only when g + i is odd
                let shift = if odd { "t^2" } else { "1" };
                assert_eq!(by[&vec![1, -1]], ints(&format!("{shift}(1+t^4)(t^4+2t^5+t^6)^{g}")), "g {g} {label}");
                assert_eq!(row.free, "yes");
            }
        }
    }

    #[test]
    fn fundamental_invariant_degrees() {
        for k in ["A2", "B2", "G2", "A3", "U2", "SO3"] {
            let c = ctx(k, 1);
            let f = c.fundamental_invariants().unwrap();
            assert_eq!(f.len(), c.rank());
        }
    }

    #[test]
    fn character_sum_matches_whole_sheaf() {
        for (k, d) in [("A1", 8), ("U2", 12), ("A2", 12)] {
            let c = ctx(k, 1);
            let model = crate::sheaf::from_monodromy(&monodromy_spec(&c.sys)).unwrap();
            let whole = crate::sheaf::global_sections(&model, d).hilbert_numerator(d).coefficients;
            assert_eq!(character_sum(&c, d), whole, "{k}");
        }
    }

    #[test]
    fn weyl_elements_permute_isotypical_sections() {
        for (k, d) in [("A2", 10), ("B2", 12), ("G2", 14)] {
            let c = ctx(k, 1);
            let all: Vec<Submodule> = (0..c.sys.t2_size()).map(|chi| c.sections(chi, d)).collect();
            for &w in &c.sys.generators {
                for chi in 0..c.sys.t2_size() {
                    let target = &all[c.sys.act_char(w, chi) as usize];
                    let moved: Vec<ModElem> = all[chi as usize].generators().iter().map(|x| c.act(w, x)).collect();
                    assert!(target.contains_all(&moved), "{k} w {w} chi {chi}");
                    assert_eq!(all[chi as usize].slice_dims(d), target.slice_dims(d));
                }
            }
        }
    }

    #[test]
    fn duality_for_a2() {
        let c = ctx("A2", 1);
        let s = c.sections(a2_chi3(&c), 12);
        let rep = duality_report(&c, &s, 12).unwrap();
        assert!(rep.containment && rep.unipotent_triangular && rep.nondegenerate);
    }
}
