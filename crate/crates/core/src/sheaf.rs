//! GKM-sheaves in normal form: free vertex stalks plus, for each weight and
//! block carrying a restriction, the image of that restriction inside the sum
//! of the block's stalks. Blocks without an entry restrict isomorphically.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::freemod::{BasisElement, FreeModule, ModElem};
use crate::graph::{self, FiniteAction, GkmHypergraph, GraphError, GraphMorphism, ProjectiveWeight};
use crate::linalg::{rank, rref, Matrix};
use crate::rational::Rational;
use crate::submodule::{intersect, Submodule};

#[derive(Debug, thiserror::Error)]
pub enum SheafError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("expected {expected} stalks, found {found}")]
    StalkCount { expected: usize, found: usize },
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("block {block:?} is not a block of weight {weight:?}")]
    BlockNotInGraph { weight: Vec<i64>, block: Vec<usize> },
    #[error("image for weight {0:?} does not live in the block's stalk sum")]
    ImageAmbient(Vec<i64>),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("edge {0}: weight already pairs one of its vertices")]
    NotAGraph(usize),
    #[error("edge {0}: monodromy is singular")]
    Singular(usize),
    #[error("edge {0}: matrix mixes generators of different degrees")]
    Inhomogeneous(usize),
    #[error("edge {0}: edge module is not the stated quotient")]
    NotPure(usize),
    #[error("stalk action is inconsistent: {0}")]
    BadAction(String),
    #[error("stalk action does not preserve the image at weight {0:?}")]
    NotEquivariant(Vec<i64>),
    #[error("character is not a homomorphism to {{1, -1}}")]
    BadCharacter,
    #[error("action must be abelian, free and transitive on vertices")]
    NotFreeTransitive,
    #[error("image at weight {0:?} is not of full rank after inverting the weight")]
    NotLocallyFree(Vec<i64>),
}

#[derive(Clone, Debug)]
pub struct EdgeImage {
    pub weight: ProjectiveWeight,
    /// Sorted vertex indices.
    pub block: Vec<usize>,
    /// Submodule of `block_module(block)`.
    pub image: Submodule,
}

#[derive(Clone, Debug)]
pub struct SheafModel {
    pub graph: GkmHypergraph,
    pub stalks: Vec<Arc<FreeModule>>,
    pub edges: Vec<EdgeImage>,
}

fn block_sum(stalks: &[Arc<FreeModule>], block: &[usize]) -> FreeModule {
    let parts: Vec<&FreeModule> = block.iter().map(|&v| stalks[v].as_ref()).collect();
    FreeModule::direct_sum(&parts)
}

/// Embedding of a block's stalk sum into a larger vertex set's stalk sum.
fn index_map(stalks: &[Arc<FreeModule>], from: &[usize], into: &[usize]) -> Vec<usize> {
    let mut offset = Vec::with_capacity(into.len());
    let mut acc = 0;
    for &v in into {
        offset.push(acc);
        acc += stalks[v].len();
    }
    let mut map = Vec::new();
    for &v in from {
        let pos = into.iter().position(|&u| u == v).expect("vertex outside target");
        map.extend((0..stalks[v].len()).map(|i| offset[pos] + i));
    }
    map
}

fn remap(x: &ModElem, map: &[usize]) -> ModElem {
    let mut out = ModElem::zero(x.degree);
    for ((j, ex), c) in &x.terms {
        out.add_term(map[*j], ex.clone(), c.clone());
    }
    out
}

fn basis_vectors(m: &FreeModule) -> Vec<ModElem> {
    (0..m.len()).map(|j| ModElem::basis_vector(m, j)).collect()
}

impl SheafModel {
    pub fn new(graph: GkmHypergraph, stalks: Vec<Arc<FreeModule>>, edges: Vec<EdgeImage>) -> Result<Self, SheafError> {
        if stalks.len() != graph.vertex_count() {
            return Err(SheafError::StalkCount { expected: graph.vertex_count(), found: stalks.len() });
        }
        if let Some(s) = stalks.iter().find(|s| s.rank() != graph.rank) {
            return Err(SheafError::RankMismatch(graph.rank, s.rank()));
        }
        let model = SheafModel { graph, stalks, edges };
        for e in &model.edges {
            if !model.graph.blocks(&e.weight).contains(&e.block) {
                return Err(SheafError::BlockNotInGraph { weight: e.weight.coords().to_vec(), block: e.block.clone() });
            }
            if **e.image.module() != model.block_module(&e.block) {
                return Err(SheafError::ImageAmbient(e.weight.coords().to_vec()));
            }
        }
        Ok(model)
    }

    /// The sheaf with the given stalks and no restrictions.
    pub fn direct_sum(graph: GkmHypergraph, stalks: Vec<Arc<FreeModule>>) -> Result<Self, SheafError> {
        Self::new(graph, stalks, Vec::new())
    }

    pub fn rank(&self) -> usize {
        self.graph.rank
    }

    pub fn block_module(&self, block: &[usize]) -> FreeModule {
        block_sum(&self.stalks, block)
    }

    pub fn total_module(&self) -> Arc<FreeModule> {
        let all: Vec<usize> = (0..self.stalks.len()).collect();
        Arc::new(self.block_module(&all))
    }

    pub fn supported_weights(&self) -> Vec<ProjectiveWeight> {
        let set: BTreeSet<ProjectiveWeight> = self.edges.iter().map(|e| e.weight.clone()).collect();
        set.into_iter().collect()
    }

    pub fn edge(&self, w: &ProjectiveWeight, block: &[usize]) -> Option<&EdgeImage> {
        self.edges.iter().find(|e| &e.weight == w && e.block == block)
    }

    /// Image of the sections over all hyperedges of weight `w` in the total
    /// stalk sum; vertices outside every listed block contribute their stalk.
    pub fn weight_image(&self, w: &ProjectiveWeight, total: &Arc<FreeModule>) -> Submodule {
        let all: Vec<usize> = (0..self.stalks.len()).collect();
        let mut covered = vec![false; self.stalks.len()];
        let mut gens = Vec::new();
        for e in self.edges.iter().filter(|e| &e.weight == w) {
            let map = index_map(&self.stalks, &e.block, &all);
            gens.extend(e.image.generators().iter().map(|g| remap(g, &map)));
            for &v in &e.block {
                covered[v] = true;
            }
        }
        for v in (0..self.stalks.len()).filter(|&v| !covered[v]) {
            let map = index_map(&self.stalks, &[v], &all);
            gens.extend(basis_vectors(&self.stalks[v]).iter().map(|g| remap(g, &map)));
        }
        Submodule::new(total.clone(), gens, format!("image at weight {:?}", w.coords()))
    }

    /// Smallest `k ≤ max_power` with `α^k F_d ⊆ im` at the probe degree, per edge.
    pub fn localization_powers(&self, probe: Option<u32>, max_power: u32) -> Vec<Option<u32>> {
        self.edges
            .iter()
            .map(|e| {
                let d = probe.unwrap_or_else(|| e.image.generators().iter().map(|g| g.degree).max().unwrap_or(0) + 2);
                let m = e.image.module();
                let piece = m.piece(d, None);
                let elems: Vec<ModElem> = (0..piece.len())
                    .map(|i| {
                        let mut u = vec![Rational::zero(); piece.len()];
                        u[i] = Rational::one();
                        ModElem::from_dense(&piece, &u)
                    })
                    .collect();
                let alpha = e.weight.linear_form();
                let mut p = crate::poly::Poly::one(self.rank());
                for k in 0..=max_power {
                    let moved: Vec<ModElem> = elems.iter().map(|x| x.mul_poly(&p)).collect();
                    if e.image.contains_all(&moved) {
                        return Some(k);
                    }
                    p = p.mul(&alpha);
                }
                None
            })
            .collect()
    }

    /// Spot check of the localization isomorphism at one degree per edge.
    pub fn check_localization(&self) -> Result<(), SheafError> {
        for (e, k) in self.edges.iter().zip(self.localization_powers(None, 4)) {
            if k.is_none() {
                return Err(SheafError::NotLocallyFree(e.weight.coords().to_vec()));
            }
        }
        Ok(())
    }
}

/// `H⁰ = ⋂_α im(F(V ∪ E^α) → F(V))` through degree `truncation`.
pub fn global_sections(s: &SheafModel, truncation: u32) -> Submodule {
    let total = s.total_module();
    let weights = s.supported_weights();
    if weights.is_empty() {
        return Submodule::full(total, "direct sum of stalks");
    }
    let images: Vec<Submodule> = weights.par_iter().map(|w| s.weight_image(w, &total)).collect();
    intersect(&images, truncation).expect("images share the total module").with_provenance("global sections")
}

fn check_degree_preserving(m: &[Vec<Rational>], rows: &FreeModule, cols: &FreeModule) -> bool {
    m.len() == rows.len()
        && m.iter().enumerate().all(|(i, row)| {
            row.len() == cols.len()
                && row.iter().enumerate().all(|(j, c)| c.is_zero() || rows.basis()[i].degree == cols.basis()[j].degree)
        })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonodromyEdge {
    pub weight: Vec<i64>,
    pub source: String,
    pub target: String,
    /// Column `j` is the image of fiber generator `j`; identity when absent.
    #[serde(default)]
    pub rho: Option<Vec<Vec<Rational>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonodromySpec {
    pub rank: usize,
    pub vertices: Vec<String>,
    pub fiber_degrees: Vec<u32>,
    #[serde(default)]
    pub edges: Vec<MonodromyEdge>,
}

fn vertex_of(vertices: &[String], id: &str) -> Result<usize, SheafError> {
    vertices.iter().position(|v| v == id).ok_or_else(|| SheafError::UnknownVertex(id.to_string()))
}

/// Adds the 2-blocks of a list of edges, rejecting weights that would pair a
/// vertex twice.
fn graph_from_edges(rank: usize, vertices: &[String], edges: &[(Vec<i64>, usize, usize)]) -> Result<GkmHypergraph, SheafError> {
    let mut g = GkmHypergraph::discrete(rank, vertices.to_vec());
    for (i, (w, s, t)) in edges.iter().enumerate() {
        let w = ProjectiveWeight::new(w)?;
        if w.rank() != rank {
            return Err(GraphError::RankMismatch { expected: rank, found: w.rank() }.into());
        }
        if s == t || g.nondegenerate(&w).iter().any(|b| b.contains(s) || b.contains(t)) {
            return Err(SheafError::NotAGraph(i));
        }
        g.add_edge(w, &[*s.min(t), *s.max(t)])?;
    }
    Ok(g)
}

/// Columns `(m, ρm)` and `(αm, −αρm)` over the fiber generators.
pub fn from_monodromy(spec: &MonodromySpec) -> Result<SheafModel, SheafError> {
    let fiber = Arc::new(FreeModule::on_degrees(spec.rank, &spec.fiber_degrees));
    let f = fiber.len();
    let mut ends = Vec::new();
    for e in &spec.edges {
        ends.push((e.weight.clone(), vertex_of(&spec.vertices, &e.source)?, vertex_of(&spec.vertices, &e.target)?));
    }
    let graph = graph_from_edges(spec.rank, &spec.vertices, &ends)?;
    let stalks = vec![fiber.clone(); spec.vertices.len()];
    let mut edges = Vec::new();
    for (i, (e, (w, s, t))) in spec.edges.iter().zip(&ends).enumerate() {
        let rho = e.rho.clone().unwrap_or_else(|| {
            (0..f).map(|a| (0..f).map(|b| if a == b { Rational::one() } else { Rational::zero() }).collect()).collect()
        });
        if !check_degree_preserving(&rho, &fiber, &fiber) {
            return Err(SheafError::Inhomogeneous(i));
        }
        if rank(&Matrix::from_rows(f, rho.clone())) != f {
            return Err(SheafError::Singular(i));
        }
        let block = vec![*s.min(t), *s.max(t)];
        let module = Arc::new(block_sum(&stalks, &block));
        let (so, to) = if s < t { (0, f) } else { (f, 0) };
        let alpha = ProjectiveWeight::new(w)?.linear_form();
        let mut gens = Vec::new();
        for j in 0..f {
            let mut plain = ModElem::basis_vector(&module, so + j);
            let mut twisted = ModElem::from_poly(&module, so + j, &alpha);
            let a = ModElem::basis_vector(&module, to);
            for (k, row) in rho.iter().enumerate() {
                let c = &row[j];
                if c.is_zero() {
                    continue;
                }
                plain = plain.add(&ModElem::basis_vector(&module, to + k).scale(c));
                twisted = twisted.add(&ModElem::from_poly(&module, to + k, &alpha).scale(&-c.clone()));
            }
            let _ = a;
            gens.push(plain);
            gens.push(twisted);
        }
        let weight = ProjectiveWeight::new(w)?;
        edges.push(EdgeImage {
            image: Submodule::new(module, gens, format!("monodromy edge {i}")),
            weight,
            block,
        });
    }
    SheafModel::new(graph, stalks, edges)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BMVertex {
    pub id: String,
    pub degrees: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BMEdge {
    pub weight: Vec<i64>,
    pub source: String,
    pub target: String,
    /// `ρ_{v_t,e}`: column `j` is the image of the `j`-th generator of
    /// `M(v_t)` in `M(v_s)/αM(v_s)`, written on the generators of `M(v_s)`.
    pub map: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BMSheafSpec {
    pub rank: usize,
    pub vertices: Vec<BMVertex>,
    #[serde(default)]
    pub edges: Vec<BMEdge>,
}

impl BMSheafSpec {
    fn ends(&self) -> Result<Vec<(Vec<i64>, usize, usize)>, SheafError> {
        let ids: Vec<String> = self.vertices.iter().map(|v| v.id.clone()).collect();
        self.edges
            .iter()
            .map(|e| Ok((e.weight.clone(), vertex_of(&ids, &e.source)?, vertex_of(&ids, &e.target)?)))
            .collect()
    }

    pub fn modules(&self) -> Vec<Arc<FreeModule>> {
        self.vertices.iter().map(|v| Arc::new(FreeModule::on_degrees(self.rank, &v.degrees))).collect()
    }

    /// Validated endpoints `(weight, source, target)`.
    pub fn validated_ends(&self) -> Result<Vec<(ProjectiveWeight, usize, usize)>, SheafError> {
        let ends = self.ends()?;
        let mods = self.modules();
        let mut out = Vec::new();
        for (i, ((w, s, t), e)) in ends.into_iter().zip(&self.edges).enumerate() {
            let (ms, mt) = (&mods[s], &mods[t]);
            if ms.len() != mt.len() || !check_degree_preserving(&e.map, ms, mt) {
                return Err(SheafError::NotPure(i));
            }
            if rank(&Matrix::from_rows(mt.len(), e.map.clone())) != ms.len() {
                return Err(SheafError::NotPure(i));
            }
            out.push((ProjectiveWeight::new(&w)?, s, t));
        }
        Ok(out)
    }
}

/// Sections over an edge are pairs with `m_s ≡ ρ(m_t) mod α`; the image is
/// generated by `(ρ e_j, e_j)` and `(α e_i, 0)`.
pub fn from_bm(spec: &BMSheafSpec) -> Result<SheafModel, SheafError> {
    let ids: Vec<String> = spec.vertices.iter().map(|v| v.id.clone()).collect();
    let ends = spec.validated_ends()?;
    let raw: Vec<(Vec<i64>, usize, usize)> = ends.iter().map(|(w, s, t)| (w.coords().to_vec(), *s, *t)).collect();
    let graph = graph_from_edges(spec.rank, &ids, &raw)?;
    let stalks = spec.modules();
    let mut edges = Vec::new();
    for (i, ((w, s, t), e)) in ends.into_iter().zip(&spec.edges).enumerate() {
        let block = vec![s.min(t), s.max(t)];
        let module = Arc::new(block_sum(&stalks, &block));
        let (ns, nt) = (stalks[s].len(), stalks[t].len());
        let (so, to) = if s < t { (0, ns) } else { (nt, 0) };
        let alpha = w.linear_form();
        let mut gens = Vec::new();
        for j in 0..nt {
            let mut g = ModElem::basis_vector(&module, to + j);
            for (k, row) in e.map.iter().enumerate() {
                if !row[j].is_zero() {
                    g = g.add(&ModElem::basis_vector(&module, so + k).scale(&row[j]));
                }
            }
            gens.push(g);
        }
        for k in 0..ns {
            gens.push(ModElem::from_poly(&module, so + k, &alpha));
        }
        edges.push(EdgeImage { image: Submodule::new(module, gens, format!("BM edge {i}")), weight: w, block });
    }
    SheafModel::new(graph, stalks, edges)
}

/// A finite group acting on a sheaf: vertex action plus constant
/// degree-preserving stalk maps. `maps[g][v]` sends `F(v)` to `F(g·v)`,
/// column `i` being the image of generator `i`.
#[derive(Clone, Debug)]
pub struct StalkAction {
    pub action: FiniteAction,
    pub maps: Vec<Vec<Matrix>>,
}

impl StalkAction {
    /// Vertex permutations with identity stalk maps (stalks must agree along orbits).
    pub fn permutation(action: FiniteAction, stalks: &[Arc<FreeModule>]) -> Self {
        let maps = (0..action.order()).map(|_| stalks.iter().map(|s| Matrix::identity(s.len())).collect()).collect();
        StalkAction { action, maps }
    }

    fn check(&self, s: &SheafModel) -> Result<(), SheafError> {
        let a = &self.action;
        a.check_on(&s.graph)?;
        if a.twist.is_some() {
            return Err(GraphError::Twisted.into());
        }
        if self.maps.len() != a.order() || self.maps.iter().any(|m| m.len() != s.stalks.len()) {
            return Err(SheafError::BadAction("one map per element and vertex required".into()));
        }
        for g in 0..a.order() {
            for v in 0..s.stalks.len() {
                let m = &self.maps[g][v];
                let (src, tgt) = (&s.stalks[v], &s.stalks[a.perms[g][v]]);
                if m.rows() != tgt.len() || m.cols() != src.len() {
                    return Err(SheafError::BadAction(format!("map of element {g} at vertex {v} has the wrong shape")));
                }
                if !check_degree_preserving(&m.row_vecs(), tgt, src) {
                    return Err(SheafError::BadAction(format!("map of element {g} at vertex {v} is not degree preserving")));
                }
            }
        }
        for x in 0..a.order() {
            for y in 0..a.order() {
                for v in 0..s.stalks.len() {
                    let composed = self.maps[x][a.perms[y][v]].mul(&self.maps[y][v]).expect("shapes checked");
                    if composed != self.maps[a.mult[x][y]][v] {
                        return Err(SheafError::BadAction("stalk maps are not multiplicative".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// `g·x` for `x` in the total stalk sum.
    fn apply(&self, s: &SheafModel, g: usize, x: &ModElem, offsets: &[usize], owner: &[(usize, usize)]) -> ModElem {
        let mut out = ModElem::zero(x.degree);
        for ((j, ex), c) in &x.terms {
            let (v, i) = owner[*j];
            let gv = self.action.perms[g][v];
            let m = &self.maps[g][v];
            for k in 0..s.stalks[gv].len() {
                let e = m.get(k, i);
                if !e.is_zero() {
                    out.add_term(offsets[gv] + k, ex.clone(), e * c);
                }
            }
        }
        out
    }
}

fn layout(s: &SheafModel) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut offsets = Vec::new();
    let mut owner = Vec::new();
    let mut acc = 0;
    for (v, st) in s.stalks.iter().enumerate() {
        offsets.push(acc);
        owner.extend((0..st.len()).map(|i| (v, i)));
        acc += st.len();
    }
    (offsets, owner)
}

/// `χ`-isotypical part of the pushforward to the quotient graph, for an
/// abelian action and a `±1`-valued character `chi[g]`.
pub fn isotypical_pushforward(
    s: &SheafModel,
    act: &StalkAction,
    chi: &[i64],
) -> Result<(SheafModel, GraphMorphism), SheafError> {
    isotypical_pushforward_with(s, act, chi, None).map(|(m, p, _)| (m, p))
}

/// As [`isotypical_pushforward`], also transporting a second action that
/// commutes with the first onto the quotient sheaf.
pub fn isotypical_pushforward_with(
    s: &SheafModel,
    act: &StalkAction,
    chi: &[i64],
    residual: Option<&StalkAction>,
) -> Result<(SheafModel, GraphMorphism, Option<StalkAction>), SheafError> {
    act.check(s)?;
    if let Some(res) = residual {
        res.check(s)?;
        let (a, b) = (&act.action.perms, &res.action.perms);
        let commute = a.iter().all(|p| b.iter().all(|q| (0..s.stalks.len()).all(|v| p[q[v]] == q[p[v]])));
        if !commute {
            return Err(SheafError::BadAction("residual action does not commute".into()));
        }
    }
    let a = &act.action;
    let n = a.order();
    if chi.len() != n
        || chi.iter().any(|c| c.abs() != 1)
        || (0..n).any(|x| (0..n).any(|y| chi[a.mult[x][y]] != chi[x] * chi[y]))
    {
        return Err(SheafError::BadCharacter);
    }
    if !a.is_abelian() {
        return Err(SheafError::NotFreeTransitive);
    }
    let (offsets, owner) = layout(s);
    let total = s.total_module();
    let all: Vec<usize> = (0..s.stalks.len()).collect();

    // images must be carried onto images
    for e in &s.edges {
        let emb = index_map(&s.stalks, &e.block, &all);
        for g in 0..n {
            let mut tb: Vec<usize> = e.block.iter().map(|&v| a.perms[g][v]).collect();
            tb.sort_unstable();
            let Some(target) = s.edge(&e.weight, &tb) else { continue };
            let back: Vec<Option<usize>> = {
                let m = index_map(&s.stalks, &tb, &all);
                let mut inv = vec![None; total.len()];
                for (loc, glob) in m.into_iter().enumerate() {
                    inv[glob] = Some(loc);
                }
                inv
            };
            let moved: Vec<ModElem> = e
                .image
                .generators()
                .iter()
                .map(|x| {
                    let y = act.apply(s, g, &remap(x, &emb), &offsets, &owner);
                    let mut out = ModElem::zero(y.degree);
                    for ((j, ex), c) in &y.terms {
                        out.add_term(back[*j].expect("block maps to block"), ex.clone(), c.clone());
                    }
                    out
                })
                .collect();
            if !target.image.contains_all(&moved) {
                return Err(SheafError::NotEquivariant(e.weight.coords().to_vec()));
            }
        }
    }

    let (q, proj) = graph::quotient(&s.graph, a)?;
    let orbits: Vec<Vec<usize>> = (0..q.vertex_count()).map(|o| (0..s.stalks.len()).filter(|&v| proj.vertex_map[v] == o).collect()).collect();

    // averaging projector restricted to each orbit; its RREF expresses every
    // projected generator through the independent ones
    let inv_n = Rational::new(1, n as i64);
    let mut new_stalks = Vec::new();
    let mut conversions: Vec<(Vec<usize>, Matrix, Vec<usize>)> = Vec::new();
    for orb in &orbits {
        let offs = &offsets;
        let idx: Vec<usize> = orb.iter().flat_map(|&v| (0..s.stalks[v].len()).map(move |i| offs[v] + i)).collect();
        let pos = |glob: usize| idx.iter().position(|&x| x == glob).unwrap();
        let mut p = Matrix::zeros(idx.len(), idx.len());
        for (col, &glob) in idx.iter().enumerate() {
            let (v, i) = owner[glob];
            for g in 0..n {
                let gv = a.perms[g][v];
                let m = &act.maps[g][v];
                let w = Rational::from_int(chi[g]) * &inv_n;
                for k in 0..s.stalks[gv].len() {
                    let e = m.get(k, i);
                    if !e.is_zero() {
                        let r = pos(offsets[gv] + k);
                        let cur = p.get(r, col).clone();
                        p.set(r, col, cur + e * &w);
                    }
                }
            }
        }
        let (red, rk, pivots) = rref(&p);
        let mut basis = Vec::new();
        for (k, &c) in pivots.iter().enumerate() {
            let (v, i) = owner[idx[c]];
            let src = &s.stalks[v].basis()[i];
            let support: Vec<&BasisElement> =
                (0..idx.len()).filter(|&r| !p.get(r, c).is_zero()).map(|r| &s.stalks[owner[idx[r]].0].basis()[owner[idx[r]].1]).collect();
            let uniform_md = support.iter().all(|b| b.multidegree == src.multidegree);
            let uniform_block = support.iter().all(|b| b.block == src.block);
            basis.push(BasisElement {
                degree: src.degree,
                multidegree: if uniform_md { src.multidegree.clone() } else { vec![0; s.rank()] },
                block: if uniform_block { src.block.clone() } else { vec![0] },
                label: format!("p{k}"),
            });
        }
        new_stalks.push(Arc::new(FreeModule::new(s.rank(), basis)));
        let rows: Vec<Vec<Rational>> = red.row_vecs().into_iter().take(rk).collect();
        conversions.push((idx, Matrix::from_rows(p.cols(), rows), pivots));
    }

    let mut orbit_pos = vec![(0usize, 0usize); total.len()];
    for (o, (idx, _, _)) in conversions.iter().enumerate() {
        for (j, &glob) in idx.iter().enumerate() {
            orbit_pos[glob] = (o, j);
        }
    }
    let convert = |x: &ModElem, qblock: &[usize]| -> ModElem {
        let mut start = vec![usize::MAX; q.vertex_count()];
        let mut acc = 0;
        for &o in qblock {
            start[o] = acc;
            acc += new_stalks[o].len();
        }
        let mut out = ModElem::zero(x.degree);
        for ((j, ex), c) in &x.terms {
            let (o, col) = orbit_pos[*j];
            let conv = &conversions[o].1;
            for k in 0..conv.rows() {
                let e = conv.get(k, col);
                if !e.is_zero() {
                    out.add_term(start[o] + k, ex.clone(), e * c);
                }
            }
        }
        out
    };

    let mut edges = Vec::new();
    for w in s.supported_weights() {
        for qb in q.blocks(&w) {
            let pre: Vec<usize> = (0..s.stalks.len()).filter(|&v| qb.contains(&proj.vertex_map[v])).collect();
            let listed: Vec<&EdgeImage> = s.edges.iter().filter(|e| e.weight == w && pre.contains(&e.block[0])).collect();
            if listed.is_empty() {
                continue;
            }
            let mut gens = Vec::new();
            let mut covered = BTreeSet::new();
            for e in &listed {
                let emb = index_map(&s.stalks, &e.block, &all);
                gens.extend(e.image.generators().iter().map(|x| convert(&remap(x, &emb), &qb)));
                covered.extend(e.block.iter().copied());
            }
            for &v in pre.iter().filter(|v| !covered.contains(v)) {
                let emb = index_map(&s.stalks, &[v], &all);
                gens.extend(basis_vectors(&s.stalks[v]).iter().map(|x| convert(&remap(x, &emb), &qb)));
            }
            let module = Arc::new(block_sum(&new_stalks, &qb));
            edges.push(EdgeImage { image: Submodule::new(module, gens, "isotypical image"), weight: w.clone(), block: qb });
        }
    }
    let transported = residual.map(|res| {
        let m = res.action.order();
        let perms: Vec<Vec<usize>> = (0..m)
            .map(|h| (0..q.vertex_count()).map(|o| proj.vertex_map[res.action.perms[h][orbits[o][0]]]).collect())
            .collect();
        let maps = (0..m)
            .map(|h| {
                (0..q.vertex_count())
                    .map(|o| {
                        let o2 = perms[h][o];
                        let (idx, _, pivots) = &conversions[o];
                        let conv = &conversions[o2].1;
                        let mut mat = Matrix::zeros(new_stalks[o2].len(), new_stalks[o].len());
                        for (k, &c) in pivots.iter().enumerate() {
                            let (v, i) = owner[idx[c]];
                            let hv = res.action.perms[h][v];
                            let mv = &res.maps[h][v];
                            for kk in 0..s.stalks[hv].len() {
                                let e = mv.get(kk, i);
                                if e.is_zero() {
                                    continue;
                                }
                                let (oo, col) = orbit_pos[offsets[hv] + kk];
                                debug_assert_eq!(oo, o2);
                                for row in 0..conv.rows() {
                                    let x = conv.get(row, col);
                                    if !x.is_zero() {
                                        let cur = mat.get(row, k).clone();
                                        mat.set(row, k, cur + x * e);
                                    }
                                }
                            }
                        }
                        mat
                    })
                    .collect()
            })
            .collect();
        StalkAction { action: FiniteAction { mult: res.action.mult.clone(), perms, twist: None }, maps }
    });
    Ok((SheafModel::new(q, new_stalks, edges)?, proj, transported))
}

fn tensor_elem(x: &ModElem, y: &ModElem, index: impl Fn(usize, usize) -> usize) -> ModElem {
    let mut out = ModElem::zero(x.degree + y.degree);
    for ((i, ex), a) in &x.terms {
        for ((j, ey), b) in &y.terms {
            let e: Vec<u32> = ex.iter().zip(ey).map(|(p, q)| p + q).collect();
            out.add_term(index(*i, *j), e, a * b);
        }
    }
    out
}

/// `F₁ ⊠ F₂` over the product graph.
pub fn exterior_product(s1: &SheafModel, s2: &SheafModel) -> Result<SheafModel, SheafError> {
    if s1.rank() != s2.rank() {
        return Err(SheafError::RankMismatch(s1.rank(), s2.rank()));
    }
    let graph = graph::product(&s1.graph, &s2.graph)?;
    let n2 = s2.stalks.len();
    let stalks: Vec<Arc<FreeModule>> =
        s1.stalks.iter().flat_map(|a| s2.stalks.iter().map(move |b| Arc::new(a.tensor(b)))).collect();
    let weights: BTreeSet<ProjectiveWeight> = s1.supported_weights().into_iter().chain(s2.supported_weights()).collect();
    let gens_of = |s: &SheafModel, w: &ProjectiveWeight, b: &[usize]| -> Option<Vec<ModElem>> {
        s.edge(w, b).map(|e| e.image.generators().to_vec())
    };
    let mut edges = Vec::new();
    for w in weights {
        for b1 in s1.graph.blocks(&w) {
            for b2 in s2.graph.blocks(&w) {
                let (g1, g2) = (gens_of(s1, &w, &b1), gens_of(s2, &w, &b2));
                if g1.is_none() && g2.is_none() {
                    continue;
                }
                let g1 = g1.unwrap_or_else(|| basis_vectors(&s1.block_module(&b1)));
                let g2 = g2.unwrap_or_else(|| basis_vectors(&s2.block_module(&b2)));
                let owner1: Vec<(usize, usize)> = b1.iter().enumerate().flat_map(|(p, &v)| (0..s1.stalks[v].len()).map(move |i| (p, i))).collect();
                let owner2: Vec<(usize, usize)> = b2.iter().enumerate().flat_map(|(p, &v)| (0..s2.stalks[v].len()).map(move |i| (p, i))).collect();
                let block: Vec<usize> = b1.iter().flat_map(|&x| b2.iter().map(move |&y| x * n2 + y)).collect();
                let mut start = Vec::new();
                let mut acc = 0;
                for &v in &block {
                    start.push(acc);
                    acc += stalks[v].len();
                }
                let index = |i: usize, j: usize| {
                    let (p1, i1) = owner1[i];
                    let (p2, i2) = owner2[j];
                    let len2 = s2.stalks[b2[p2]].len();
                    start[p1 * b2.len() + p2] + i1 * len2 + i2
                };
                let gens: Vec<ModElem> = g1.iter().flat_map(|x| g2.iter().map(|y| tensor_elem(x, y, index)).collect::<Vec<_>>()).collect();
                let module = Arc::new(block_sum(&stalks, &block));
                edges.push(EdgeImage { image: Submodule::new(module, gens, "exterior product image"), weight: w.clone(), block });
            }
        }
    }
    SheafModel::new(graph, stalks, edges)
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut m = Matrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let x = a.get(i, j);
            if x.is_zero() {
                continue;
            }
            for k in 0..b.rows() {
                for l in 0..b.cols() {
                    m.set(i * b.rows() + k, j * b.cols() + l, x * b.get(k, l));
                }
            }
        }
    }
    m
}

/// Moves a sheaf onto a graph with the same shape via the vertex bijection
/// `sigma` (old index to new index).
fn relabel(s: &SheafModel, graph: GkmHypergraph, sigma: &[usize]) -> Result<SheafModel, SheafError> {
    let mut stalks = vec![None; sigma.len()];
    for (old, &new) in sigma.iter().enumerate() {
        stalks[new] = Some(s.stalks[old].clone());
    }
    let stalks: Vec<Arc<FreeModule>> = stalks.into_iter().map(|x| x.expect("bijection")).collect();
    let mut edges = Vec::new();
    for e in &s.edges {
        let mut block: Vec<usize> = e.block.iter().map(|&v| sigma[v]).collect();
        block.sort_unstable();
        let old_in_new: Vec<usize> = e.block.iter().map(|&v| sigma[v]).collect();
        let map = {
            let mut starts = Vec::new();
            let mut acc = 0;
            for &v in &block {
                starts.push(acc);
                acc += stalks[v].len();
            }
            let starts = &starts;
            old_in_new
                .iter()
                .flat_map(|nv| {
                    let p = block.iter().position(|x| x == nv).unwrap();
                    (0..stalks[*nv].len()).map(move |i| starts[p] + i).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        let module = Arc::new(block_sum(&stalks, &block));
        let gens = e.image.generators().iter().map(|x| remap(x, &map)).collect();
        edges.push(EdgeImage { image: Submodule::new(module, gens, e.image.provenance.clone()), weight: e.weight.clone(), block });
    }
    SheafModel::new(graph, stalks, edges)
}

/// `F * G`: invariants of `F ⊠ G` under the anti-diagonal action, carried
/// back to the original graph by `(g v*, h v*) ↦ gh v*`. The base vertex
/// defaults to the least vertex id.
pub fn convolution(
    s1: &SheafModel,
    a1: &StalkAction,
    s2: &SheafModel,
    a2: &StalkAction,
    base: Option<&str>,
) -> Result<(SheafModel, StalkAction), SheafError> {
    let act = &a1.action;
    if s1.graph != s2.graph || act.mult != a2.action.mult || act.perms != a2.action.perms {
        return Err(SheafError::BadAction("convolution factors must share graph and action".into()));
    }
    let nv = s1.stalks.len();
    let n = act.order();
    let e = act.identity();
    let free = (0..n).all(|g| g == e || (0..nv).all(|v| act.perms[g][v] != v));
    if !act.is_abelian() || !free || act.orbits(nv).len() != 1 {
        return Err(SheafError::NotFreeTransitive);
    }
    let b = match base {
        Some(id) => s1.graph.vertex_index(id).ok_or_else(|| SheafError::UnknownVertex(id.into()))?,
        None => (0..nv).min_by_key(|&v| &s1.graph.vertices[v]).unwrap(),
    };
    let prod = exterior_product(s1, s2)?;
    let perms: Vec<Vec<usize>> = (0..n)
        .map(|g| {
            let gi = act.inverse(g);
            (0..nv * nv).map(|i| act.perms[g][i / nv] * nv + act.perms[gi][i % nv]).collect()
        })
        .collect();
    let maps: Vec<Vec<Matrix>> = (0..n)
        .map(|g| {
            let gi = act.inverse(g);
            (0..nv * nv).map(|i| kron(&a1.maps[g][i / nv], &a2.maps[gi][i % nv])).collect()
        })
        .collect();
    let anti = StalkAction { action: FiniteAction { mult: act.mult.clone(), perms, twist: None }, maps };
    let left_perms: Vec<Vec<usize>> =
        (0..n).map(|g| (0..nv * nv).map(|i| act.perms[g][i / nv] * nv + i % nv).collect()).collect();
    let left_maps: Vec<Vec<Matrix>> = (0..n)
        .map(|g| (0..nv * nv).map(|i| kron(&a1.maps[g][i / nv], &Matrix::identity(s2.stalks[i % nv].len()))).collect())
        .collect();
    let left = StalkAction { action: FiniteAction { mult: act.mult.clone(), perms: left_perms, twist: None }, maps: left_maps };
    let (push, proj, res) = isotypical_pushforward_with(&prod, &anti, &vec![1; n], Some(&left))?;
    let res = res.expect("residual requested");
    let elem_at = |v: usize| (0..n).find(|&g| act.perms[g][b] == v).unwrap();
    let mut sigma = vec![usize::MAX; push.stalks.len()];
    for i in 0..nv * nv {
        let (x, y) = (i / nv, i % nv);
        sigma[proj.vertex_map[i]] = act.perms[act.mult[elem_at(x)][elem_at(y)]][b];
    }
    let out = relabel(&push, s1.graph.clone(), &sigma)?;
    let mut maps = vec![vec![Matrix::zeros(0, 0); nv]; n];
    for g in 0..n {
        for o in 0..nv {
            maps[g][sigma[o]] = res.maps[g][o].clone();
        }
    }
    let moved = StalkAction { action: act.clone(), maps };
    moved.check(&out)?;
    Ok((out, moved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kernel_basis;
    use crate::submodule::free_numerator;

    fn r(n: i64) -> Rational {
        Rational::from_int(n)
    }

    fn monodromy(rank: usize, fiber: &[u32], edges: &[(Vec<i64>, &str, &str, Option<Vec<Vec<i64>>>)], verts: &[&str]) -> SheafModel {
        let spec = MonodromySpec {
            rank,
            vertices: verts.iter().map(|s| s.to_string()).collect(),
            fiber_degrees: fiber.to_vec(),
            edges: edges
                .iter()
                .map(|(w, s, t, rho)| MonodromyEdge {
                    weight: w.clone(),
                    source: s.to_string(),
                    target: t.to_string(),
                    rho: rho.as_ref().map(|m| m.iter().map(|row| row.iter().map(|&x| r(x)).collect()).collect()),
                })
                .collect(),
        };
        from_monodromy(&spec).unwrap()
    }

    /// Fiber `Λ(x)` on two vertices with `x ↦ −x` along a single edge.
    fn su2() -> SheafModel {
        monodromy(1, &[0, 1], &[(vec![1], "v0", "v1", Some(vec![vec![1, 0], vec![0, -1]]))], &["v0", "v1"])
    }

    fn swap_action(s: &SheafModel) -> StalkAction {
        StalkAction::permutation(FiniteAction::abelian(&[2], &[vec![1, 0]]).unwrap(), &s.stalks)
    }

    fn numerator(s: &SheafModel, d: u32) -> Vec<i64> {
        let h = global_sections(s, d).hilbert_numerator(d);
        assert!(h.stable, "truncation {d} too small");
        h.trimmed()
    }

    #[test]
    fn no_edges_gives_direct_sum() {
        let s = monodromy(2, &[0, 3], &[], &["a", "b"]);
        assert_eq!(numerator(&s, 12), vec![2, 0, 0, 2]);
    }

    #[test]
    fn toric_edge() {
        let s = monodromy(1, &[0], &[(vec![1], "a", "b", None)], &["a", "b"]);
        assert_eq!(numerator(&s, 10), vec![1, 0, 1]);
        assert!(s.check_localization().is_ok());
    }

    #[test]
    fn singular_monodromy_rejected() {
        let spec = MonodromySpec {
            rank: 1,
            vertices: vec!["a".into(), "b".into()],
            fiber_degrees: vec![0, 0],
            edges: vec![MonodromyEdge {
                weight: vec![1],
                source: "a".into(),
                target: "b".into(),
                rho: Some(vec![vec![r(1), r(1)], vec![r(1), r(1)]]),
            }],
        };
        assert!(matches!(from_monodromy(&spec), Err(SheafError::Singular(0))));
    }

    fn franz_puppe(r: usize) -> SheafModel {
        let edges: Vec<(Vec<i64>, &str, &str, Option<Vec<Vec<i64>>>)> = (0..=r)
            .map(|k| {
                let mut w = vec![0; r + 1];
                w[k] = 1;
                (w, "a", "b", None)
            })
            .collect();
        monodromy(r + 1, &[0, r as u32 - 1], &edges, &["a", "b"])
    }

    #[test]
    fn franz_puppe_numerators() {
        for r in [2usize, 4, 8] {
            let s = franz_puppe(r);
            let d = 3 * r as u32 + 1 + 10;
            let mut expected = vec![0i64; 3 * r + 2];
            for e in [0, r - 1, 2 * r + 2, 3 * r + 1] {
                expected[e] += 1;
            }
            assert_eq!(numerator(&s, d), expected, "r = {r}");
        }
    }

    #[test]
    fn su2_sections_and_isotypical_parts() {
        let s = su2();
        assert_eq!(numerator(&s, 10), vec![1, 1, 1, 1]);
        let act = swap_action(&s);
        let (triv, _) = isotypical_pushforward(&s, &act, &[1, 1]).unwrap();
        assert_eq!(triv.graph.vertex_count(), 1);
        assert_eq!(numerator(&triv, 10), vec![1, 0, 0, 1]);
        let (sign, _) = isotypical_pushforward(&s, &act, &[1, -1]).unwrap();
        assert_eq!(numerator(&sign, 10), vec![0, 1, 1]);
        assert!(isotypical_pushforward(&s, &act, &[-1, 1]).is_err());
    }

    #[test]
    fn trivial_group_pushforward_is_identity() {
        let s = franz_puppe(2);
        let act = StalkAction::permutation(FiniteAction::trivial(2), &s.stalks);
        let (p, _) = isotypical_pushforward(&s, &act, &[1]).unwrap();
        assert_eq!(numerator(&p, 16), numerator(&s, 16));
    }

    #[test]
    fn pushforward_preserves_sections() {
        // summing over characters recovers the whole
        let s = su2();
        let act = swap_action(&s);
        let mut sum = vec![0i64; 4];
        for chi in [[1, 1], [1, -1]] {
            let (p, _) = isotypical_pushforward(&s, &act, &chi).unwrap();
            for (i, c) in numerator(&p, 10).iter().enumerate() {
                sum[i] += c;
            }
        }
        assert_eq!(sum, numerator(&s, 10));
    }

    #[test]
    fn non_equivariant_action_rejected() {
        let s = su2();
        let mut act = swap_action(&s);
        // swapping without the stalk twist is fine; a scaling that breaks the image is not
        act.maps[1][0] = Matrix::from_i64(&[&[1, 0], &[0, 2]]);
        act.maps[1][1] = Matrix::from_i64(&[&[1, 0], &[0, 1]]);
        assert!(isotypical_pushforward(&s, &act, &[1, 1]).is_err());
    }

    #[test]
    fn exterior_products() {
        let unit = monodromy(1, &[0], &[], &["*"]);
        let s = su2();
        let p = exterior_product(&s, &unit).unwrap();
        assert_eq!(numerator(&p, 10), numerator(&s, 10));
        let t = monodromy(1, &[0], &[(vec![1], "a", "b", None)], &["a", "b"]);
        let tt = exterior_product(&t, &t).unwrap();
        assert_eq!(numerator(&tt, 14), vec![1, 0, 2, 0, 1]);
        // different weights on a rank-2 lattice
        let a = monodromy(2, &[0], &[(vec![1, 0], "a", "b", None)], &["a", "b"]);
        let b = monodromy(2, &[0], &[(vec![0, 1], "c", "d", None)], &["c", "d"]);
        let ab = exterior_product(&a, &b).unwrap();
        assert_eq!(ab.supported_weights().len(), 2);
        assert_eq!(ab.edges.len(), 4);
        assert!(ab.edges.iter().all(|e| e.block.len() == 2));
        assert_eq!(numerator(&ab, 14), vec![1, 0, 2, 0, 1]);
        assert!(exterior_product(&a, &s).is_err());
    }

    #[test]
    fn convolution_of_su2_sheaves() {
        let s = su2();
        let act = swap_action(&s);
        let (c, cact) = convolution(&s, &act, &s, &act, None).unwrap();
        assert_eq!(c.graph, s.graph);
        // (1 + t³)² + (t + t²)²
        assert_eq!(numerator(&c, 16), vec![1, 0, 1, 4, 1, 0, 1]);
        for chi in [[1, 1], [1, -1]] {
            let (one, _) = isotypical_pushforward(&s, &act, &chi).unwrap();
            let (two, _) = isotypical_pushforward(&c, &cact, &chi).unwrap();
            let p = numerator(&one, 12);
            let sq = crate::series::int::mul(&p, &p);
            assert_eq!(numerator(&two, 16), sq);
        }
    }

    #[test]
    fn convolution_with_unit() {
        let s = su2();
        let act = swap_action(&s);
        let unit = monodromy(1, &[0], &[(vec![1], "v0", "v1", None)], &["v0", "v1"]);
        let unit = SheafModel::direct_sum(s.graph.clone(), vec![unit.stalks[0].clone(); 2]).unwrap();
        let (c, _) = convolution(&s, &act, &unit, &StalkAction::permutation(act.action.clone(), &unit.stalks), None).unwrap();
        assert_eq!(numerator(&c, 12), numerator(&s, 12));
    }

    fn bm_spec(rank: usize, ds: &[u32], dt: &[u32], map: Vec<Vec<i64>>, w: Vec<i64>) -> BMSheafSpec {
        BMSheafSpec {
            rank,
            vertices: vec![BMVertex { id: "s".into(), degrees: ds.to_vec() }, BMVertex { id: "t".into(), degrees: dt.to_vec() }],
            edges: vec![BMEdge {
                weight: w,
                source: "s".into(),
                target: "t".into(),
                map: map.into_iter().map(|row| row.into_iter().map(r).collect()).collect(),
            }],
        }
    }

    /// Sections `{(m_v) : m_s − ρ m_t ∈ α M(v_s)}` solved degree by degree.
    fn bm_oracle(spec: &BMSheafSpec, d: u32) -> Vec<usize> {
        let mods = spec.modules();
        let ends = spec.validated_ends().unwrap();
        (0..=d)
            .map(|deg| {
                let pieces: Vec<_> = mods.iter().map(|m| m.piece(deg, None)).collect();
                let mut cols = 0;
                let mut m_off = Vec::new();
                for p in &pieces {
                    m_off.push(cols);
                    cols += p.len();
                }
                let m_cols = cols;
                let mut y_off = Vec::new();
                let mut y_pieces = Vec::new();
                for (_, s, _) in &ends {
                    let p = if deg >= 2 { mods[*s].piece(deg - 2, None) } else { mods[*s].piece(0, Some(&[u32::MAX])) };
                    y_off.push(cols);
                    cols += p.len();
                    y_pieces.push(p);
                }
                let mut rows = Vec::new();
                for (ei, ((w, s, t), e)) in ends.iter().zip(&spec.edges).enumerate() {
                    let ps = &pieces[*s];
                    let mut block = vec![vec![Rational::zero(); cols]; ps.len()];
                    for i in 0..ps.len() {
                        block[i][m_off[*s] + i] += &r(1);
                    }
                    let pt = &pieces[*t];
                    for c in 0..pt.len() {
                        let (j, ex) = pt.entry(c);
                        for (k, row) in e.map.iter().enumerate() {
                            if !row[j].is_zero() {
                                let rrow = ps.index(k, &ex).unwrap();
                                block[rrow][m_off[*t] + c] -= &row[j];
                            }
                        }
                    }
                    let py = &y_pieces[ei];
                    for c in 0..py.len() {
                        let (k, ex) = py.entry(c);
                        for (var, &a) in w.coords().iter().enumerate() {
                            if a != 0 {
                                let mut e2 = ex.clone();
                                e2[var] += 1;
                                let rrow = ps.index(k, &e2).unwrap();
                                block[rrow][y_off[ei] + c] -= &r(a);
                            }
                        }
                    }
                    rows.extend(block);
                }
                if rows.is_empty() {
                    return m_cols;
                }
                let k = kernel_basis(&Matrix::from_rows(cols, rows));
                let proj: Vec<Vec<Rational>> = k.column_vecs().into_iter().map(|v| v[..m_cols].to_vec()).collect();
                if proj.is_empty() {
                    0
                } else {
                    rank(&Matrix::from_columns(m_cols, &proj))
                }
            })
            .collect()
    }

    #[test]
    fn bm_single_edge() {
        let spec = bm_spec(1, &[0], &[0], vec![vec![1]], vec![1]);
        let s = from_bm(&spec).unwrap();
        assert_eq!(s.edges[0].image.generator_degrees(8), vec![0, 2]);
        assert_eq!(global_sections(&s, 8).slice_dims(8), bm_oracle(&spec, 8));
    }

    #[test]
    fn bm_rank_two_fibers() {
        let spec = bm_spec(2, &[0, 3], &[0, 3], vec![vec![2, 0], vec![0, -1]], vec![1, 1]);
        let s = from_bm(&spec).unwrap();
        assert_eq!(s.edges[0].image.generator_degrees(12), vec![0, 2, 3, 5]);
        assert_eq!(global_sections(&s, 12).slice_dims(12), bm_oracle(&spec, 12));
        assert!(s.check_localization().is_ok());
    }

    #[test]
    fn bm_rejects_impure_data() {
        let spec = bm_spec(1, &[0], &[2], vec![vec![1]], vec![1]);
        assert!(matches!(from_bm(&spec), Err(SheafError::NotPure(0))));
        let spec = bm_spec(1, &[0, 0], &[0, 0], vec![vec![1, 1], vec![1, 1]], vec![1]);
        assert!(matches!(from_bm(&spec), Err(SheafError::NotPure(0))));
    }

    #[test]
    fn bm_no_edges() {
        let spec = BMSheafSpec { rank: 1, vertices: vec![BMVertex { id: "s".into(), degrees: vec![0, 2] }], edges: vec![] };
        let s = from_bm(&spec).unwrap();
        assert_eq!(numerator(&s, 10), free_numerator(&[0, 2], 10).into_iter().take(3).collect::<Vec<_>>());
    }

    #[test]
    fn localization_fails_for_a_small_image() {
        let s = monodromy(1, &[0], &[(vec![1], "a", "b", None)], &["a", "b"]);
        let e = &s.edges[0];
        let m = e.image.module().clone();
        // only the diagonal: never full rank
        let thin = Submodule::new(m.clone(), vec![ModElem::basis_vector(&m, 0).add(&ModElem::basis_vector(&m, 1))], "thin");
        let bad = SheafModel::new(
            s.graph.clone(),
            s.stalks.clone(),
            vec![EdgeImage { weight: e.weight.clone(), block: e.block.clone(), image: thin }],
        )
        .unwrap();
        assert!(bad.check_localization().is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn bm_conversion_matches_direct_sections(
            degs in proptest::collection::vec(0u32..3, 1..3),
            scales in proptest::collection::vec(proptest::prelude::prop_oneof![-2i64..0, 1i64..3], 4),
            w1 in proptest::collection::vec(-1i64..2, 2),
            w2 in proptest::collection::vec(-1i64..2, 2),
        ) {
            proptest::prop_assume!(w1.iter().any(|&x| x != 0) && w2.iter().any(|&x| x != 0));
            let diag = |k: usize| -> Vec<Vec<Rational>> {
                (0..degs.len()).map(|i| (0..degs.len()).map(|j| if i == j { r(scales[(k + i) % 4]) } else { Rational::zero() }).collect()).collect()
            };
            let verts = ["a", "b", "c"].iter().map(|id| BMVertex { id: id.to_string(), degrees: degs.clone() }).collect();
            let spec = BMSheafSpec {
                rank: 2,
                vertices: verts,
                edges: vec![
                    BMEdge { weight: w1.clone(), source: "a".into(), target: "b".into(), map: diag(0) },
                    BMEdge { weight: w2.clone(), source: "c".into(), target: "b".into(), map: diag(1) },
                ],
            };
            let s = match from_bm(&spec) {
                Ok(s) => s,
                Err(SheafError::NotAGraph(_)) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            proptest::prop_assert!(s.check_localization().is_ok());
            proptest::prop_assert_eq!(global_sections(&s, 8).slice_dims(8), bm_oracle(&spec, 8));
        }
    }
}
