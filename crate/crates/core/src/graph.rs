//! GKM-hypergraphs: a finite vertex set with one partition per projective
//! weight. Weights that are not listed carry the discrete partition.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::poly::Poly;
use crate::rational::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("weight must be nonzero")]
    ZeroWeight,
    #[error("weight has length {found}, expected {expected}")]
    RankMismatch { expected: usize, found: usize },
    #[error("unknown vertex id {0}")]
    UnknownVertex(String),
    #[error("action is twisted; only untwisted quotients are supported")]
    Twisted,
    #[error("invalid group data: {0}")]
    BadGroup(String),
    #[error("action does not respect the partition of weight {0:?}")]
    NotEquivariant(Vec<i64>),
    #[error("map is not a morphism at weight {0:?}")]
    NotMorphism(Vec<i64>),
}

/// Primitive integer vector up to sign; the first nonzero entry is positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct ProjectiveWeight(Vec<i64>);

impl ProjectiveWeight {
    pub fn new(v: &[i64]) -> Result<Self, GraphError> {
        let g = v.iter().fold(0i64, |a, &b| a.gcd(&b));
        if g == 0 {
            return Err(GraphError::ZeroWeight);
        }
        let lead = v.iter().find(|&&x| x != 0).copied().unwrap();
        let s = if lead < 0 { -g } else { g };
        Ok(ProjectiveWeight(v.iter().map(|x| x / s).collect()))
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    /// The linear form `Σ a_i x_i`.
    pub fn linear_form(&self) -> Poly {
        Poly::linear_i64(&self.0)
    }

    /// Image under an integer matrix acting on coordinates (column `i` is the
    /// image of `x_i`).
    pub fn transform(&self, m: &[Vec<i64>]) -> Result<Self, GraphError> {
        let r = self.0.len();
        let mut out = vec![0i64; r];
        for (i, &a) in self.0.iter().enumerate() {
            for (k, o) in out.iter_mut().enumerate() {
                *o += m[k][i] * a;
            }
        }
        Self::new(&out)
    }
}

impl TryFrom<Vec<i64>> for ProjectiveWeight {
    type Error = GraphError;
    fn try_from(v: Vec<i64>) -> Result<Self, GraphError> {
        Self::new(&v)
    }
}

impl From<ProjectiveWeight> for Vec<i64> {
    fn from(w: ProjectiveWeight) -> Vec<i64> {
        w.0
    }
}

/// Partition data keyed by weight. Blocks hold vertex indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GkmHypergraph {
    pub rank: usize,
    pub vertices: Vec<String>,
    pub partitions: BTreeMap<ProjectiveWeight, Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionDescriptor {
    pub weight: Vec<i64>,
    pub blocks: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDescriptor {
    pub rank: usize,
    pub vertices: Vec<String>,
    #[serde(default)]
    pub partitions: Vec<PartitionDescriptor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validation {
    Ok,
    Violation { weight: Vec<i64>, reason: String },
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }
}

fn normalize_blocks(mut blocks: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for b in blocks.iter_mut() {
        b.sort_unstable();
    }
    blocks.sort();
    blocks
}

impl GkmHypergraph {
    /// Graph with no listed weights.
    pub fn discrete(rank: usize, vertices: Vec<String>) -> Self {
        GkmHypergraph { rank, vertices, partitions: BTreeMap::new() }
    }

    /// The one-vertex graph.
    pub fn point(rank: usize) -> Self {
        Self::discrete(rank, vec!["*".into()])
    }

    /// Adds (or replaces) the partition of one weight, given by vertex index
    /// blocks. Vertices left out are not filled in; see [`validate`].
    pub fn set_partition(&mut self, w: ProjectiveWeight, blocks: Vec<Vec<usize>>) -> Result<(), GraphError> {
        if w.rank() != self.rank {
            return Err(GraphError::RankMismatch { expected: self.rank, found: w.rank() });
        }
        self.partitions.insert(w, normalize_blocks(blocks));
        Ok(())
    }

    /// Adds a weight whose only nondegenerate block is `block`; every other
    /// vertex becomes a singleton.
    pub fn add_edge(&mut self, w: ProjectiveWeight, block: &[usize]) -> Result<(), GraphError> {
        let mut blocks = self.partitions.get(&w).cloned().unwrap_or_else(|| (0..self.vertices.len()).map(|v| vec![v]).collect());
        blocks.retain(|b| !b.iter().any(|v| block.contains(v)));
        blocks.push(block.to_vec());
        self.set_partition(w, blocks)
    }

    pub fn from_descriptor(d: &GraphDescriptor) -> Result<Self, GraphError> {
        let index: BTreeMap<&str, usize> = d.vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut g = Self::discrete(d.rank, d.vertices.clone());
        for p in &d.partitions {
            let w = ProjectiveWeight::new(&p.weight)?;
            let mut blocks = Vec::new();
            for b in &p.blocks {
                let mut blk = Vec::new();
                for id in b {
                    blk.push(*index.get(id.as_str()).ok_or_else(|| GraphError::UnknownVertex(id.clone()))?);
                }
                blocks.push(blk);
            }
            g.set_partition(w, blocks)?;
        }
        Ok(g)
    }

    pub fn to_descriptor(&self) -> GraphDescriptor {
        GraphDescriptor {
            rank: self.rank,
            vertices: self.vertices.clone(),
            partitions: self
                .partitions
                .iter()
                .map(|(w, bs)| PartitionDescriptor {
                    weight: w.coords().to_vec(),
                    blocks: bs.iter().map(|b| b.iter().map(|&v| self.vertices[v].clone()).collect()).collect(),
                })
                .collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == id)
    }

    /// Partition of `w`, discrete when unlisted.
    pub fn blocks(&self, w: &ProjectiveWeight) -> Vec<Vec<usize>> {
        self.partitions.get(w).cloned().unwrap_or_else(|| (0..self.vertices.len()).map(|v| vec![v]).collect())
    }

    /// Blocks of size at least two.
    pub fn nondegenerate(&self, w: &ProjectiveWeight) -> Vec<Vec<usize>> {
        self.partitions.get(w).map(|bs| bs.iter().filter(|b| b.len() > 1).cloned().collect()).unwrap_or_default()
    }

    /// Weights with at least one nondegenerate block.
    pub fn support(&self) -> Vec<ProjectiveWeight> {
        self.partitions.iter().filter(|(_, bs)| bs.iter().any(|b| b.len() > 1)).map(|(w, _)| w.clone()).collect()
    }

    /// Index of the block of `w` containing `v`.
    pub fn block_of(&self, w: &ProjectiveWeight, v: usize) -> Vec<usize> {
        self.blocks(w).into_iter().find(|b| b.contains(&v)).unwrap_or_else(|| vec![v])
    }
}

/// Checks that every listed partition covers the vertex set exactly once.
pub fn validate(h: &GkmHypergraph) -> Validation {
    let n = h.vertices.len();
    for (w, blocks) in &h.partitions {
        let mut seen = vec![0u32; n];
        for b in blocks {
            if b.is_empty() {
                return Validation::Violation { weight: w.coords().to_vec(), reason: "empty block".into() };
            }
            for &v in b {
                if v >= n {
                    return Validation::Violation { weight: w.coords().to_vec(), reason: format!("vertex index {v} out of range") };
                }
                seen[v] += 1;
            }
        }
        if let Some(v) = seen.iter().position(|&c| c == 0) {
            return Validation::Violation {
                weight: w.coords().to_vec(),
                reason: format!("vertex {} is not covered", h.vertices[v]),
            };
        }
        if let Some(v) = seen.iter().position(|&c| c > 1) {
            return Validation::Violation {
                weight: w.coords().to_vec(),
                reason: format!("vertex {} lies in more than one block", h.vertices[v]),
            };
        }
    }
    Validation::Ok
}

/// Cartesian product; ids are joined with `|`.
pub fn product(h1: &GkmHypergraph, h2: &GkmHypergraph) -> Result<GkmHypergraph, GraphError> {
    if h1.rank != h2.rank {
        return Err(GraphError::RankMismatch { expected: h1.rank, found: h2.rank });
    }
    let n2 = h2.vertices.len();
    let vertices = h1.vertices.iter().flat_map(|a| h2.vertices.iter().map(move |b| format!("{a}|{b}"))).collect();
    let mut g = GkmHypergraph::discrete(h1.rank, vertices);
    let weights: BTreeSet<ProjectiveWeight> = h1.partitions.keys().chain(h2.partitions.keys()).cloned().collect();
    for w in weights {
        let mut blocks = Vec::new();
        for b1 in h1.blocks(&w) {
            for b2 in h2.blocks(&w) {
                blocks.push(b1.iter().flat_map(|&x| b2.iter().map(move |&y| x * n2 + y)).collect());
            }
        }
        g.set_partition(w, blocks)?;
    }
    Ok(g)
}

/// Vertex map between graphs on the same weight lattice together with the
/// induced block maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphMorphism {
    pub vertex_map: Vec<usize>,
    /// For each weight listed in either graph: source block index → target block index.
    pub block_maps: BTreeMap<ProjectiveWeight, Vec<usize>>,
}

impl GraphMorphism {
    pub fn new(src: &GkmHypergraph, tgt: &GkmHypergraph, vertex_map: Vec<usize>) -> Result<Self, GraphError> {
        let weights: BTreeSet<ProjectiveWeight> = src.partitions.keys().chain(tgt.partitions.keys()).cloned().collect();
        let mut block_maps = BTreeMap::new();
        for w in weights {
            let tb = tgt.blocks(&w);
            let mut map = Vec::new();
            for b in src.blocks(&w) {
                let targets: BTreeSet<usize> =
                    b.iter().map(|&v| tb.iter().position(|blk| blk.contains(&vertex_map[v])).unwrap()).collect();
                if targets.len() != 1 {
                    return Err(GraphError::NotMorphism(w.coords().to_vec()));
                }
                map.push(*targets.iter().next().unwrap());
            }
            block_maps.insert(w, map);
        }
        Ok(GraphMorphism { vertex_map, block_maps })
    }

    /// Source blocks over a target block of `w`; these are the basic open
    /// sets whose disjoint union is the preimage of `U_(w, block)`.
    pub fn preimage_blocks(&self, src: &GkmHypergraph, tgt: &GkmHypergraph, w: &ProjectiveWeight, tgt_block: usize) -> Vec<Vec<usize>> {
        let sb = src.blocks(w);
        match self.block_maps.get(w) {
            Some(m) => sb.into_iter().zip(m).filter(|(_, &t)| t == tgt_block).map(|(b, _)| b).collect(),
            None => {
                let tb = &tgt.blocks(w)[tgt_block];
                sb.into_iter().filter(|b| tb.contains(&self.vertex_map[b[0]])).collect()
            }
        }
    }

    /// Checks that every preimage of a basic open set is the disjoint union
    /// of the basic open sets of its source blocks.
    pub fn preimages_are_disjoint_unions(&self, src: &GkmHypergraph, tgt: &GkmHypergraph) -> bool {
        for w in self.block_maps.keys() {
            for (ti, tb) in tgt.blocks(w).iter().enumerate() {
                let pre: BTreeSet<usize> = (0..src.vertices.len()).filter(|&v| tb.contains(&self.vertex_map[v])).collect();
                let parts = self.preimage_blocks(src, tgt, w, ti);
                let mut union = BTreeSet::new();
                for p in &parts {
                    for &v in p {
                        if !union.insert(v) {
                            return false;
                        }
                    }
                }
                if union != pre {
                    return false;
                }
            }
        }
        true
    }
}

/// A finite group acting on the vertices, optionally twisting weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAction {
    /// `mult[a][b]` is the index of `a·b`.
    pub mult: Vec<Vec<usize>>,
    /// `perms[g][v]` is `g·v`.
    pub perms: Vec<Vec<usize>>,
    /// Per-element integer matrices acting on weights (column `i` = image of `x_i`).
    pub twist: Option<Vec<Vec<Vec<i64>>>>,
}

impl FiniteAction {
    pub fn order(&self) -> usize {
        self.mult.len()
    }

    pub fn identity(&self) -> usize {
        (0..self.order()).find(|&e| (0..self.order()).all(|g| self.mult[e][g] == g)).unwrap_or(0)
    }

    pub fn inverse(&self, g: usize) -> usize {
        let e = self.identity();
        (0..self.order()).find(|&h| self.mult[g][h] == e).unwrap_or(e)
    }

    pub fn trivial(n_vertices: usize) -> Self {
        FiniteAction { mult: vec![vec![0]], perms: vec![(0..n_vertices).collect()], twist: None }
    }

    /// Cyclic or elementary abelian groups given by generators of a product
    /// of cyclic factors `orders`, acting through `gen_perms`.
    pub fn abelian(orders: &[usize], gen_perms: &[Vec<usize>]) -> Result<Self, GraphError> {
        let n: usize = orders.iter().product();
        let decode = |mut i: usize| -> Vec<usize> {
            let mut v = vec![0; orders.len()];
            for k in (0..orders.len()).rev() {
                v[k] = i % orders[k];
                i /= orders[k];
            }
            v
        };
        let encode = |v: &[usize]| v.iter().zip(orders).fold(0, |acc, (x, o)| acc * o + x);
        let mult = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let (va, vb) = (decode(a), decode(b));
                        let s: Vec<usize> = va.iter().zip(&vb).zip(orders).map(|((x, y), o)| (x + y) % o).collect();
                        encode(&s)
                    })
                    .collect()
            })
            .collect();
        let nv = gen_perms.first().map_or(0, |p| p.len());
        let perms = (0..n)
            .map(|g| {
                let v = decode(g);
                let mut p: Vec<usize> = (0..nv).collect();
                for (k, &times) in v.iter().enumerate() {
                    for _ in 0..times {
                        p = p.iter().map(|&x| gen_perms[k][x]).collect();
                    }
                }
                p
            })
            .collect();
        let a = FiniteAction { mult, perms, twist: None };
        a.check_group()?;
        Ok(a)
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order()).all(|a| (0..self.order()).all(|b| self.mult[a][b] == self.mult[b][a]))
    }

    pub fn check_group(&self) -> Result<(), GraphError> {
        let n = self.order();
        if n == 0 || self.mult.iter().any(|r| r.len() != n || r.iter().any(|&x| x >= n)) {
            return Err(GraphError::BadGroup("multiplication table is not square".into()));
        }
        let e = self.identity();
        if (0..n).any(|g| self.mult[e][g] != g || self.mult[g][e] != g) {
            return Err(GraphError::BadGroup("no identity".into()));
        }
        for a in 0..n {
            if !(0..n).any(|b| self.mult[a][b] == e) {
                return Err(GraphError::BadGroup(format!("element {a} has no inverse")));
            }
            for b in 0..n {
                for c in 0..n {
                    if self.mult[self.mult[a][b]][c] != self.mult[a][self.mult[b][c]] {
                        return Err(GraphError::BadGroup("not associative".into()));
                    }
                }
            }
        }
        if self.perms.len() != n {
            return Err(GraphError::BadGroup("one permutation per element required".into()));
        }
        for a in 0..n {
            for b in 0..n {
                let ab = self.mult[a][b];
                for v in 0..self.perms[a].len() {
                    if self.perms[ab][v] != self.perms[a][self.perms[b][v]] {
                        return Err(GraphError::BadGroup("vertex permutations are not a homomorphism".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks equivariance of the partitions (and weight twist if present).
    pub fn check_on(&self, h: &GkmHypergraph) -> Result<(), GraphError> {
        self.check_group()?;
        for (w, blocks) in &h.partitions {
            for g in 0..self.order() {
                let tw = match &self.twist {
                    Some(t) => w.transform(&t[g])?,
                    None => w.clone(),
                };
                let target = h.blocks(&tw);
                for b in blocks {
                    let mut img: Vec<usize> = b.iter().map(|&v| self.perms[g][v]).collect();
                    img.sort_unstable();
                    if !target.contains(&img) {
                        return Err(GraphError::NotEquivariant(w.coords().to_vec()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Orbits ordered by their least vertex.
    pub fn orbits(&self, n_vertices: usize) -> Vec<Vec<usize>> {
        let mut seen = vec![false; n_vertices];
        let mut out = Vec::new();
        for v in 0..n_vertices {
            if seen[v] {
                continue;
            }
            let mut orb: Vec<usize> = self.perms.iter().map(|p| p[v]).collect();
            orb.sort_unstable();
            orb.dedup();
            for &u in &orb {
                seen[u] = true;
            }
            out.push(orb);
        }
        out
    }

    /// Stabilizer of a set of vertices.
    pub fn set_stabilizer(&self, set: &[usize]) -> Vec<usize> {
        let mut s = set.to_vec();
        s.sort_unstable();
        (0..self.order())
            .filter(|&g| {
                let mut img: Vec<usize> = set.iter().map(|&v| self.perms[g][v]).collect();
                img.sort_unstable();
                img == s
            })
            .collect()
    }
}

/// Quotient by an untwisted action, with the projection morphism.
pub fn quotient(h: &GkmHypergraph, a: &FiniteAction) -> Result<(GkmHypergraph, GraphMorphism), GraphError> {
    if a.twist.is_some() {
        return Err(GraphError::Twisted);
    }
    a.check_on(h)?;
    let orbits = a.orbits(h.vertices.len());
    let mut orbit_of = vec![0usize; h.vertices.len()];
    for (i, o) in orbits.iter().enumerate() {
        for &v in o {
            orbit_of[v] = i;
        }
    }
    let vertices = orbits
        .iter()
        .map(|o| if o.len() == 1 { h.vertices[o[0]].clone() } else { format!("[{}]", o.iter().map(|&v| h.vertices[v].as_str()).collect::<Vec<_>>().join(",")) })
        .collect();
    let mut q = GkmHypergraph::discrete(h.rank, vertices);
    for (w, blocks) in &h.partitions {
        let mut qb: Vec<Vec<usize>> = Vec::new();
        for b in blocks {
            let orbit_of = &orbit_of;
            let sat: BTreeSet<usize> = b.iter().flat_map(|&v| a.perms.iter().map(move |p| orbit_of[p[v]])).collect();
            let sat: Vec<usize> = sat.into_iter().collect();
            if !qb.contains(&sat) {
                qb.push(sat);
            }
        }
        q.set_partition(w.clone(), qb)?;
    }
    let m = GraphMorphism::new(h, &q, orbit_of)?;
    Ok((q, m))
}

/// `G ×_H Γ` with its left `G`-action. `hom[h]` is the image of `h` in `G`.
pub fn induce(
    h: &GkmHypergraph,
    a: &FiniteAction,
    hom: &[usize],
    g_mult: &[Vec<usize>],
) -> Result<(GkmHypergraph, FiniteAction), GraphError> {
    a.check_on(h)?;
    let ng = g_mult.len();
    let g_group = FiniteAction { mult: g_mult.to_vec(), perms: vec![Vec::new(); ng], twist: None };
    g_group.check_group()?;
    for x in 0..a.order() {
        for y in 0..a.order() {
            if hom[a.mult[x][y]] != g_mult[hom[x]][hom[y]] {
                return Err(GraphError::BadGroup("map H -> G is not a homomorphism".into()));
            }
        }
    }
    let n = h.vertices.len();
    let big_vertices: Vec<String> = (0..ng).flat_map(|g| h.vertices.iter().map(move |v| format!("g{g}|{v}"))).collect();
    let mut big = GkmHypergraph::discrete(h.rank, big_vertices);
    for (w, blocks) in &h.partitions {
        let bs = (0..ng).flat_map(|g| blocks.iter().map(move |b| b.iter().map(|&v| g * n + v).collect())).collect();
        big.set_partition(w.clone(), bs)?;
    }
    // h·(g, x) = (g φ(h)⁻¹, h·x)
    let perms: Vec<Vec<usize>> = (0..a.order())
        .map(|x| {
            let inv = g_group.inverse(hom[x]);
            (0..ng * n).map(|i| g_mult[i / n][inv] * n + a.perms[x][i % n]).collect()
        })
        .collect();
    let anti = FiniteAction { mult: a.mult.clone(), perms, twist: None };
    let (q, proj) = quotient(&big, &anti)?;
    // left multiplication descends to the quotient
    let gperms = (0..ng)
        .map(|g| {
            (0..q.vertices.len())
                .map(|o| {
                    let rep = (0..ng * n).find(|&i| proj.vertex_map[i] == o).unwrap();
                    let moved = g_mult[g][rep / n] * n + rep % n;
                    proj.vertex_map[moved]
                })
                .collect()
        })
        .collect();
    let ga = FiniteAction { mult: g_mult.to_vec(), perms: gperms, twist: None };
    ga.check_on(&q)?;
    Ok((q, ga))
}

/// Rational vector of a weight, used when building sheaf generators.
pub fn weight_rationals(w: &ProjectiveWeight) -> Vec<Rational> {
    w.coords().iter().map(|&c| Rational::from_int(c)).collect()
}
