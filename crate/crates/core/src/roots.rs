//! Root data, Weyl groups and the 2-torsion subgroup `T₂ ⊂ T`.
//!
//! Roots are integer vectors in a fixed basis `x_1..x_r` of `t*` (the
//! polynomial variables). A coroot `h` is stored through its pairing vector
//! `(⟨x_1, h⟩, …, ⟨x_r, h⟩)`. `T₂` is identified with `Λ^∨ / 2Λ^∨` for the
//! cocharacter lattice `Λ^∨`, whose basis is stored as pairing vectors; an
//! element is a bit mask in that basis and so is a character (`χ(t) = (−1)^{χ·t}`).

use std::collections::{HashMap, VecDeque};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::algebra::LinearSubstitution;
use crate::linalg::{kernel_basis, rref, Matrix};
use crate::rational::Rational;
use crate::series::int;

pub type IMat = Vec<Vec<i64>>;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RootError {
    #[error("unsupported group {0}; known keys: {1}")]
    Unsupported(String, String),
    #[error("invalid root datum: {0}")]
    Invalid(String),
    #[error("unknown central element {0} for {1}")]
    UnknownCentral(String, String),
    #[error("Weyl element does not fix the character")]
    OutsideStabilizer,
}

/// Keys accepted by [`build_datum`] and advertised by the CLI.
pub const REGISTRY: &[&str] = &["A2", "B2", "G2", "A3", "B3", "C3", "A4", "B4", "C4", "D4", "F4", "SO3", "U2"];

/// `exp(πiμ)` is a chosen square root of the element `exp(2πiμ)`; `mu` is
/// the pairing vector of the coweight `μ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentralElement {
    pub label: String,
    pub mu: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootDatum {
    pub label: String,
    pub rank: usize,
    pub positive_roots: Vec<Vec<i64>>,
    /// Indices of the simple roots in `positive_roots`.
    pub simple: Vec<usize>,
    /// Pairing vector of `h_α` for each positive root.
    pub coroots: Vec<Vec<i64>>,
    /// Pairing vectors of a basis of the cocharacter lattice.
    pub cochar_basis: Vec<Vec<i64>>,
    /// Degrees of the fundamental invariants.
    pub invariant_degrees: Vec<u32>,
    #[serde(default)]
    pub centrals: Vec<CentralElement>,
}

type QVec = Vec<Rational>;

fn q(n: i64) -> Rational {
    Rational::from_int(n)
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

fn e(n: usize, i: usize) -> QVec {
    (0..n).map(|k| if k == i { q(1) } else { q(0) }).collect()
}

fn lin(terms: &[(i64, &QVec)]) -> QVec {
    let n = terms[0].1.len();
    let mut v = vec![q(0); n];
    for (c, x) in terms {
        for (a, b) in v.iter_mut().zip(x.iter()) {
            *a += &(q(*c) * b);
        }
    }
    v
}

/// Solves `Σ c_i cols_i = target`, if possible.
fn solve(cols: &[QVec], target: &[Rational]) -> Option<QVec> {
    let n = target.len();
    let k = cols.len();
    let rows: Vec<Vec<Rational>> = (0..n).map(|i| cols.iter().map(|c| c[i].clone()).chain([target[i].clone()]).collect()).collect();
    let (red, rank, pivots) = rref(&Matrix::from_rows(k + 1, rows));
    if pivots.contains(&k) {
        return None;
    }
    let mut x = vec![q(0); k];
    for (i, &p) in pivots.iter().enumerate().take(rank) {
        x[p] = red.get(i, k).clone();
    }
    Some(x)
}

fn to_int(v: &[Rational]) -> Option<Vec<i64>> {
    v.iter().map(|x| if x.is_integer() { x.to_i64() } else { None }).collect()
}

/// Root system from Euclidean simple roots, with `t*` basis vectors `basis`.
fn from_euclid(
    label: &str,
    simple: Vec<QVec>,
    basis: Vec<QVec>,
    cochar: Option<Vec<Vec<i64>>>,
    degrees: Vec<u32>,
) -> RootDatum {
    let refl = |a: &QVec, v: &QVec| -> QVec {
        let c = q(2) * dot(v, a) / dot(a, a);
        v.iter().zip(a).map(|(x, y)| x.clone() - c.clone() * y).collect()
    };
    let mut roots: Vec<QVec> = simple.clone();
    let mut queue: VecDeque<QVec> = simple.iter().cloned().collect();
    while let Some(v) = queue.pop_front() {
        for a in &simple {
            let w = refl(a, &v);
            if !roots.contains(&w) {
                roots.push(w.clone());
                queue.push_back(w);
            }
        }
    }
    let mut positive: Vec<(Vec<i64>, QVec)> = roots
        .into_iter()
        .filter_map(|v| {
            let c = solve(&simple, &v).expect("roots lie in the span of simple roots");
            c.iter().all(|x| !x.is_negative()).then(|| (to_int(&c).expect("integral root"), v))
        })
        .collect();
    positive.sort_by(|(a, _), (b, _)| {
        let (ha, hb): (i64, i64) = (a.iter().sum(), b.iter().sum());
        ha.cmp(&hb).then_with(|| b.cmp(a))
    });
    let r = basis.len();
    let coords: Vec<Vec<i64>> = positive
        .iter()
        .map(|(_, v)| to_int(&solve(&basis, v).expect("root in span of basis")).expect("integral in basis"))
        .collect();
    let coroots: Vec<Vec<i64>> = positive
        .iter()
        .map(|(_, v)| {
            let nn = dot(v, v);
            let p: QVec = basis.iter().map(|x| q(2) * dot(x, v) / nn.clone()).collect();
            to_int(&p).expect("integral coroot pairing")
        })
        .collect();
    let simple_idx: Vec<usize> = simple.iter().map(|s| positive.iter().position(|(_, v)| v == s).unwrap()).collect();
    let cochar_basis = cochar.unwrap_or_else(|| simple_idx.iter().map(|&i| coroots[i].clone()).collect());
    assert_eq!(cochar_basis.len(), r);
    RootDatum {
        label: label.to_string(),
        rank: r,
        positive_roots: coords,
        simple: simple_idx,
        coroots,
        cochar_basis,
        invariant_degrees: degrees,
        centrals: vec![CentralElement { label: "identity".into(), mu: vec![q(0); r] }],
    }
}

fn half(n: i64) -> Rational {
    Rational::new(n, 2)
}

/// Builds a datum from a registry key such as `"A3"`, `"SO3"` or `"U2"`.
pub fn build_datum(key: &str) -> Result<RootDatum, RootError> {
    let unsupported = || RootError::Unsupported(key.to_string(), REGISTRY.join(", "));
    let key_n = if key == "PSU3" { "A2" } else { key };
    let mut d = match key_n {
        "SO3" => {
            let mut d = from_euclid("SO3", vec![vec![q(1)]], vec![vec![q(1)]], Some(vec![vec![1]]), vec![2]);
            d.centrals.push(CentralElement { label: "pi".into(), mu: vec![half(1)] });
            d
        }
        "U2" => {
            let r2 = |a, b| vec![q(a), q(b)];
            let mut d = from_euclid("U2", vec![r2(1, -1)], vec![r2(1, 0), r2(0, 1)], Some(vec![vec![1, 0], vec![0, 1]]), vec![1, 2]);
            d.centrals.push(CentralElement { label: "minus".into(), mu: vec![half(1), half(1)] });
            d
        }
        "B2" => {
            let mut d = from_euclid(
                "B2",
                vec![vec![q(2), q(0)], vec![q(-1), q(1)]],
                vec![e(2, 0), e(2, 1)],
                Some(vec![vec![1, 0], vec![0, 1]]),
                vec![2, 4],
            );
            d.centrals.push(CentralElement { label: "eps".into(), mu: vec![half(1), half(1)] });
            d
        }
        "G2" => {
            let a = vec![q(1), q(-1), q(0)];
            let b = vec![q(-2), q(1), q(1)];
            let x = lin(&[(1, &a), (1, &b)]);
            let y = lin(&[(2, &a), (1, &b)]);
            from_euclid("G2", vec![a, b], vec![x, y], None, vec![2, 6])
        }
        "F4" => {
            let s = vec![
                vec![q(0), q(1), q(-1), q(0)],
                vec![q(0), q(0), q(1), q(-1)],
                vec![q(0), q(0), q(0), q(1)],
                vec![half(1), half(-1), half(-1), half(-1)],
            ];
            from_euclid("F4", s.clone(), s, None, vec![2, 6, 8, 12])
        }
        _ => {
            let (t, n) = key_n.split_at(1);
            let n: usize = n.parse().map_err(|_| unsupported())?;
            match (t, n) {
                ("A", 1..=8) => {
                    let m = n + 1;
                    let simple = (0..n).map(|i| lin(&[(1, &e(m, i)), (-1, &e(m, i + 1))])).collect();
                    let basis = (0..n).map(|i| lin(&[(1, &e(m, i)), (-1, &e(m, n))])).collect();
                    let mut d = from_euclid(key_n, simple, basis, None, (2..=n as u32 + 1).collect());
                    for k in 1..=n {
                        let mut mu = vec![q(0); n];
                        mu[0] = q(k as i64);
                        let label = if k == 1 { "eps".to_string() } else { format!("eps{k}") };
                        d.centrals.push(CentralElement { label, mu });
                    }
                    d
                }
                ("B", 3..=8) | ("C", 3..=8) | ("D", 4..=8) => {
                    let mut simple: Vec<QVec> = (0..n - 1).map(|i| lin(&[(1, &e(n, i)), (-1, &e(n, i + 1))])).collect();
                    let degrees: Vec<u32> = match t {
                        "B" => {
                            simple.push(e(n, n - 1));
                            (1..=n as u32).map(|i| 2 * i).collect()
                        }
                        "C" => {
                            simple.push(lin(&[(2, &e(n, n - 1))]));
                            (1..=n as u32).map(|i| 2 * i).collect()
                        }
                        _ => {
                            simple.push(lin(&[(1, &e(n, n - 2)), (1, &e(n, n - 1))]));
                            let mut v: Vec<u32> = (1..n as u32).map(|i| 2 * i).collect();
                            v.push(n as u32);
                            v.sort_unstable();
                            v
                        }
                    };
                    let basis = (0..n).map(|i| e(n, i)).collect();
                    from_euclid(key_n, simple, basis, None, degrees)
                }
                _ => return Err(unsupported()),
            }
        }
    };
    if key == "PSU3" {
        d.label = "PSU3".into();
    }
    d.validate()?;
    Ok(d)
}

fn mat_mul(a: &IMat, b: &IMat) -> IMat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn identity(n: usize) -> IMat {
    (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
}

impl RootDatum {
    /// Reflection in a positive root: `x ↦ x − ⟨x, h_α⟩ α`; column `k` is the image of `x_k`.
    pub fn reflection(&self, root: usize) -> IMat {
        let a = &self.positive_roots[root];
        let p = &self.coroots[root];
        (0..self.rank).map(|i| (0..self.rank).map(|k| i64::from(i == k) - p[k] * a[i]).collect()).collect()
    }

    pub fn pairing(&self, x: &[i64], coroot: usize) -> i64 {
        x.iter().zip(&self.coroots[coroot]).map(|(a, b)| a * b).sum()
    }

    pub fn validate(&self) -> Result<(), RootError> {
        let bad = |s: String| Err(RootError::Invalid(s));
        let r = self.rank;
        if self.positive_roots.iter().chain(&self.coroots).chain(&self.cochar_basis).any(|v| v.len() != r) {
            return bad("vector length differs from rank".into());
        }
        if self.coroots.len() != self.positive_roots.len() {
            return bad("one coroot per positive root required".into());
        }
        for i in 0..self.positive_roots.len() {
            if self.pairing(&self.positive_roots[i], i) != 2 {
                return bad(format!("root {i} does not pair to 2 with its coroot"));
            }
        }
        for &s in &self.simple {
            let m = self.reflection(s);
            for a in &self.positive_roots {
                let img: Vec<i64> = (0..r).map(|i| (0..r).map(|k| m[i][k] * a[k]).sum()).collect();
                let neg: Vec<i64> = img.iter().map(|x| -x).collect();
                if !self.positive_roots.contains(&img) && !self.positive_roots.contains(&neg) {
                    return bad(format!("simple reflection {s} does not permute the roots"));
                }
            }
        }
        let c = self.cochar_matrix();
        if crate::linalg::rank(&c) != r {
            return bad("cocharacter basis is singular".into());
        }
        for (i, h) in self.coroots.iter().enumerate() {
            if self.cochar_coords(&h.iter().map(|&x| q(x)).collect::<Vec<_>>()).is_none() {
                return bad(format!("coroot {i} is not in the cocharacter lattice"));
            }
        }
        Ok(())
    }

    fn cochar_matrix(&self) -> Matrix {
        let cols: Vec<QVec> = self.cochar_basis.iter().map(|v| v.iter().map(|&x| q(x)).collect()).collect();
        Matrix::from_columns(self.rank, &cols)
    }

    /// Coordinates of a coweight in the cocharacter basis, if integral.
    pub fn cochar_coords(&self, pairing: &[Rational]) -> Option<Vec<i64>> {
        let cols = self.cochar_matrix().column_vecs();
        to_int(&solve(&cols, pairing)?)
    }

    /// Poincaré polynomial `∏ (1 + t^{2d−1})`.
    pub fn poincare(&self) -> Vec<i64> {
        self.invariant_degrees.iter().fold(vec![1], |acc, &d| int::mul(&acc, &int::one_plus(2 * d as usize - 1)))
    }

    pub fn central(&self, label: &str) -> Result<&CentralElement, RootError> {
        self.centrals.iter().find(|c| c.label == label).ok_or_else(|| RootError::UnknownCentral(label.into(), self.label.clone()))
    }

    /// Basis `{α, β_1, …}` of `t*` with each `β_i` fixed by the reflection in
    /// `α`, as a substitution (column `i` is the `i`-th basis vector).
    pub fn adapted_basis(&self, root: usize) -> LinearSubstitution {
        let r = self.rank;
        let p: Vec<Rational> = self.coroots[root].iter().map(|&x| q(x)).collect();
        let k = kernel_basis(&Matrix::from_rows(r, vec![p]));
        let mut cols: Vec<QVec> = vec![self.positive_roots[root].iter().map(|&x| q(x)).collect()];
        for v in k.column_vecs() {
            let den = v.iter().fold(num_bigint::BigInt::from(1), |acc, x| acc.lcm(&x.denom()));
            let scaled: Vec<Rational> = v.iter().map(|x| x.clone() * Rational::from_big(den.clone(), 1.into())).collect();
            let g = scaled.iter().fold(num_bigint::BigInt::from(0), |acc, x| acc.gcd(&x.numer()));
            cols.push(scaled.iter().map(|x| Rational::from_big(x.numer(), g.clone())).collect());
        }
        LinearSubstitution::new(Matrix::from_columns(r, &cols))
    }
}

/// A root datum with its Weyl group and `T₂` action tabulated.
#[derive(Clone, Debug)]
pub struct RootSystem {
    pub datum: RootDatum,
    /// Weyl group elements as matrices on `t*`; the identity comes first.
    pub elements: Vec<IMat>,
    pub inverse: Vec<usize>,
    /// Indices of the simple reflections.
    pub generators: Vec<usize>,
    index: HashMap<IMat, usize>,
    /// Per element, the images of the `T₂` basis bits.
    t2_action: Vec<Vec<u32>>,
    coroot_t2: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CharOrbit {
    pub representative: u32,
    pub members: Vec<u32>,
    pub stabilizer: Vec<usize>,
    pub stabilizer_generators: Vec<usize>,
}

fn parity(x: u32) -> u32 {
    x.count_ones() & 1
}

impl RootSystem {
    pub fn new(datum: RootDatum) -> Result<Self, RootError> {
        datum.validate()?;
        let r = datum.rank;
        let gens: Vec<IMat> = datum.simple.iter().map(|&s| datum.reflection(s)).collect();
        let mut elements = vec![identity(r)];
        let mut index: HashMap<IMat, usize> = HashMap::from([(identity(r), 0)]);
        let mut i = 0;
        while i < elements.len() {
            for g in &gens {
                let m = mat_mul(g, &elements[i]);
                if !index.contains_key(&m) {
                    index.insert(m.clone(), elements.len());
                    elements.push(m);
                }
            }
            i += 1;
            if elements.len() > 100_000 {
                return Err(RootError::Invalid("Weyl group too large".into()));
            }
        }
        let inverse: Vec<usize> = (0..elements.len())
            .map(|a| (0..elements.len()).find(|&b| mat_mul(&elements[a], &elements[b]) == identity(r)).unwrap())
            .collect();
        let generators = gens.iter().map(|g| index[g]).collect();
        let mut sys = RootSystem { datum, elements, inverse, generators, index, t2_action: Vec::new(), coroot_t2: Vec::new() };
        sys.t2_action = (0..sys.elements.len())
            .map(|w| {
                (0..r)
                    .map(|j| {
                        let p: Vec<Rational> = sys.datum.cochar_basis[j].iter().map(|&x| q(x)).collect();
                        let moved = sys.act_coweight(w, &p);
                        let c = sys.datum.cochar_coords(&moved).expect("Weyl group preserves the cocharacter lattice");
                        c.iter().enumerate().fold(0u32, |m, (k, &x)| m | ((x.rem_euclid(2) as u32) << k))
                    })
                    .collect()
            })
            .collect();
        sys.coroot_t2 = (0..sys.datum.coroots.len())
            .map(|i| {
                let p: Vec<Rational> = sys.datum.coroots[i].iter().map(|&x| q(x)).collect();
                let c = sys.datum.cochar_coords(&p).expect("validated");
                c.iter().enumerate().fold(0u32, |m, (k, &x)| m | ((x.rem_euclid(2) as u32) << k))
            })
            .collect();
        Ok(sys)
    }

    pub fn build(key: &str) -> Result<Self, RootError> {
        Self::new(build_datum(key)?)
    }

    pub fn rank(&self) -> usize {
        self.datum.rank
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.index[&mat_mul(&self.elements[a], &self.elements[b])]
    }

    /// The element as a substitution on `t*`.
    pub fn substitution(&self, w: usize) -> LinearSubstitution {
        let m = &self.elements[w];
        let rows: Vec<&[i64]> = m.iter().map(|r| r.as_slice()).collect();
        LinearSubstitution::from_i64(&rows)
    }

    /// Pairing vector of `w·μ`: `⟨x, wμ⟩ = ⟨w⁻¹x, μ⟩`.
    pub fn act_coweight(&self, w: usize, mu: &[Rational]) -> Vec<Rational> {
        let inv = &self.elements[self.inverse[w]];
        (0..self.rank()).map(|k| (0..self.rank()).fold(Rational::zero(), |acc, i| acc + q(inv[i][k]) * &mu[i])).collect()
    }

    /// Image of a positive root under `w`, with its sign.
    pub fn act_root(&self, w: usize, root: usize) -> (i64, usize) {
        let m = &self.elements[w];
        let a = &self.datum.positive_roots[root];
        let img: Vec<i64> = (0..self.rank()).map(|i| (0..self.rank()).map(|k| m[i][k] * a[k]).sum()).collect();
        if let Some(j) = self.datum.positive_roots.iter().position(|x| *x == img) {
            return (1, j);
        }
        let neg: Vec<i64> = img.iter().map(|x| -x).collect();
        (-1, self.datum.positive_roots.iter().position(|x| *x == neg).expect("roots are permuted"))
    }

    pub fn t2_size(&self) -> u32 {
        1 << self.rank()
    }

    pub fn act_t2(&self, w: usize, t: u32) -> u32 {
        (0..self.rank()).filter(|&j| t >> j & 1 == 1).fold(0, |acc, j| acc ^ self.t2_action[w][j])
    }

    /// `(w·χ)(t) = χ(w⁻¹t)`.
    pub fn act_char(&self, w: usize, chi: u32) -> u32 {
        let inv = self.inverse[w];
        (0..self.rank()).fold(0, |acc, j| acc | (parity(chi & self.t2_action[inv][j]) << j))
    }

    /// Image of `exp(πi h_α)` in `T₂`.
    pub fn coroot_element(&self, root: usize) -> u32 {
        self.coroot_t2[root]
    }

    pub fn eval_char(&self, chi: u32, t: u32) -> i64 {
        if parity(chi & t) == 1 {
            -1
        } else {
            1
        }
    }

    /// `χ(exp(πi h_α))`.
    pub fn eval_char_coroot(&self, chi: u32, root: usize) -> i64 {
        self.eval_char(chi, self.coroot_t2[root])
    }

    /// Bit vector of a mask, first basis element first.
    pub fn bits(&self, chi: u32) -> Vec<u8> {
        (0..self.rank()).map(|j| (chi >> j & 1) as u8).collect()
    }

    /// `±1` values on the cocharacter basis.
    pub fn signs(&self, chi: u32) -> Vec<i64> {
        (0..self.rank()).map(|j| if chi >> j & 1 == 1 { -1 } else { 1 }).collect()
    }

    pub fn from_signs(&self, signs: &[i64]) -> u32 {
        signs.iter().enumerate().fold(0, |m, (j, &s)| m | (u32::from(s < 0) << j))
    }

    /// Small generating set of a subgroup given by its elements.
    pub fn subgroup_generators(&self, members: &[usize]) -> Vec<usize> {
        let mut ordered: Vec<usize> = members.to_vec();
        ordered.sort_by_key(|m| (!self.generators.contains(m), *m));
        let mut gens = Vec::new();
        let mut span = vec![0usize];
        for &m in &ordered {
            if span.contains(&m) {
                continue;
            }
            gens.push(m);
            let mut i = 0;
            while i < span.len() {
                for &g in &gens {
                    let x = self.mul(g, span[i]);
                    if !span.contains(&x) {
                        span.push(x);
                    }
                }
                i += 1;
            }
        }
        gens
    }

    pub fn char_stabilizer(&self, chi: u32) -> Vec<usize> {
        (0..self.order()).filter(|&w| self.act_char(w, chi) == chi).collect()
    }

    /// Characters grouped into Weyl orbits; representatives are the least
    /// bit vectors in lexicographic order.
    pub fn char_orbits(&self) -> Vec<CharOrbit> {
        let mut seen = vec![false; self.t2_size() as usize];
        let mut out = Vec::new();
        for chi in 0..self.t2_size() {
            if seen[chi as usize] {
                continue;
            }
            let mut members: Vec<u32> = (0..self.order()).map(|w| self.act_char(w, chi)).collect();
            members.sort_unstable();
            members.dedup();
            for &m in &members {
                seen[m as usize] = true;
            }
            let rep = *members.iter().min_by_key(|&&m| self.bits(m)).unwrap();
            let stabilizer = self.char_stabilizer(rep);
            let stabilizer_generators = self.subgroup_generators(&stabilizer);
            out.push(CharOrbit { representative: rep, members, stabilizer, stabilizer_generators });
        }
        out.sort_by_key(|o| self.bits(o.representative));
        out
    }

    /// `t_w ∈ T₂` with `w·s = s·t_w` for `s = exp(πiμ)`.
    pub fn twist_element(&self, c: &CentralElement, w: usize) -> Result<u32, RootError> {
        let moved = self.act_coweight(w, &c.mu);
        let diff: Vec<Rational> = moved.iter().zip(&c.mu).map(|(a, b)| a.clone() - b).collect();
        let coords = self
            .datum
            .cochar_coords(&diff)
            .ok_or_else(|| RootError::Invalid(format!("{} is not fixed by the Weyl group", c.label)))?;
        Ok(coords.iter().enumerate().fold(0, |m, (k, &x)| m | ((x.rem_euclid(2) as u32) << k)))
    }

    /// `χ(t_w)` for `w` in the stabilizer of `χ`.
    pub fn twist_sign(&self, c: &CentralElement, w: usize, chi: u32) -> Result<i64, RootError> {
        if self.act_char(w, chi) != chi {
            return Err(RootError::OutsideStabilizer);
        }
        Ok(self.eval_char(chi, self.twist_element(c, w)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(k: &str) -> RootSystem {
        RootSystem::build(k).unwrap()
    }

    #[test]
    fn sizes() {
        for (k, np, w) in [
            ("A2", 3, 6),
            ("B2", 4, 8),
            ("G2", 6, 12),
            ("A3", 6, 24),
            ("B3", 9, 48),
            ("C3", 9, 48),
            ("A4", 10, 120),
            ("D4", 12, 192),
            ("F4", 24, 1152),
            ("SO3", 1, 2),
            ("U2", 1, 2),
        ] {
            let s = sys(k);
            assert_eq!(s.datum.positive_roots.len(), np, "{k}");
            assert_eq!(s.order(), w, "{k}");
            let prod: u32 = s.datum.invariant_degrees.iter().product();
            assert_eq!(prod as usize, w, "{k}");
        }
        assert!(matches!(build_datum("E6"), Err(RootError::Unsupported(..))));
        assert_eq!(build_datum("PSU3").unwrap().positive_roots, build_datum("A2").unwrap().positive_roots);
    }

    #[test]
    fn b2_coroots_match_coordinates() {
        let d = build_datum("B2").unwrap();
        let mut roots = d.positive_roots.clone();
        roots.sort();
        assert_eq!(roots, vec![vec![-1, 1], vec![0, 2], vec![1, 1], vec![2, 0]]);
        let mut cor = d.coroots.clone();
        cor.sort();
        assert_eq!(cor, vec![vec![-1, 1], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn coxeter_relations() {
        for k in ["A2", "B2", "G2", "A3", "B3", "C3", "D4", "F4"] {
            let s = sys(k);
            let g = &s.generators;
            for (i, &a) in g.iter().enumerate() {
                for &b in &g[i..] {
                    let ab = s.mul(a, b);
                    let mut p = ab;
                    let mut m = 1;
                    while p != 0 {
                        p = s.mul(p, ab);
                        m += 1;
                    }
                    // orders of products of simple reflections
                    assert!(matches!(m, 1 | 2 | 3 | 4 | 6), "{k}: m = {m}");
                }
            }
        }
    }

    #[test]
    fn orbit_sizes() {
        let sizes = |k: &str| {
            let mut v: Vec<usize> = sys(k).char_orbits().iter().map(|o| o.members.len()).collect();
            v.sort();
            v
        };
        assert_eq!(sizes("A2"), vec![1, 3]);
        assert_eq!(sizes("B2"), vec![1, 1, 2]);
        assert_eq!(sizes("A3"), vec![1, 3, 4]);
        for k in ["G2", "B3", "C3", "A4", "D4", "F4", "U2", "SO3"] {
            let s = sys(k);
            assert_eq!(sizes(k).iter().sum::<usize>(), s.t2_size() as usize);
        }
    }

    #[test]
    fn b2_orbits_swap_mixed_signs() {
        let s = sys("B2");
        for o in s.char_orbits() {
            let signs: Vec<Vec<i64>> = o.members.iter().map(|&m| s.signs(m)).collect();
            if o.members.len() == 2 {
                assert!(signs.contains(&vec![1, -1]) && signs.contains(&vec![-1, 1]));
            }
        }
    }

    #[test]
    fn a2_character_rule() {
        // χ_k(h_{ij}) = 1 iff i, j, k distinct
        let s = sys("A2");
        let d = &s.datum;
        let root_of = |i: i64, j: i64| -> usize {
            let mut v = vec![0i64; 2];
            let x = |k: i64, v: &mut Vec<i64>, c: i64| {
                if k < 3 {
                    v[k as usize - 1] += c;
                }
            };
            x(i, &mut v, 1);
            x(j, &mut v, -1);
            d.positive_roots.iter().position(|r| *r == v).unwrap()
        };
        let pairs = [(1, 2), (1, 3), (2, 3)];
        for chi in 1..4u32 {
            let ones: Vec<(i64, i64)> = pairs.iter().copied().filter(|&(i, j)| s.eval_char_coroot(chi, root_of(i, j)) == 1).collect();
            assert_eq!(ones.len(), 1);
            let (i, j) = ones[0];
            let k = 6 - i - j;
            for &(a, b) in &pairs {
                let distinct = a != k && b != k;
                assert_eq!(s.eval_char_coroot(chi, root_of(a, b)) == 1, distinct);
            }
        }
    }

    #[test]
    fn rank_one_exp_values() {
        let so3 = sys("SO3");
        assert_eq!(so3.coroot_element(0), 0);
        assert!((0..2).all(|chi| so3.eval_char_coroot(chi, 0) == 1));
        let u2 = sys("U2");
        assert_eq!(u2.coroot_element(0), 0b11);
        let su2 = sys("A1");
        assert_eq!(su2.coroot_element(0), 1);
    }

    #[test]
    fn g2_character_fixing_two_coroots() {
        let s = sys("G2");
        let d = &s.datum;
        // α short simple, β long simple; 3α+2β is long
        let alpha = d.simple[0];
        let long_top = d.positive_roots.iter().position(|r| *r == vec![1, 1]).unwrap();
        let hits: Vec<u32> =
            (1..4).filter(|&chi| s.eval_char_coroot(chi, alpha) == 1 && s.eval_char_coroot(chi, long_top) == 1).collect();
        assert_eq!(hits.len(), 1);
    }

    #[test]
    fn adapted_bases() {
        for k in ["A2", "B2", "G2", "A3", "U2", "SO3"] {
            let s = sys(k);
            for root in 0..s.datum.positive_roots.len() {
                let b = s.datum.adapted_basis(root);
                assert!(b.inverse().is_some());
                let refl = s.datum.reflection(root);
                for col in 1..s.rank() {
                    let v = b.matrix.column(col);
                    let img: Vec<Rational> =
                        (0..s.rank()).map(|i| (0..s.rank()).fold(Rational::zero(), |a, kk| a + q(refl[i][kk]) * &v[kk])).collect();
                    assert_eq!(img, v, "{k} root {root}");
                }
            }
        }
        let b2 = build_datum("B2").unwrap();
        let root = b2.positive_roots.iter().position(|r| *r == vec![-1, 1]).unwrap();
        assert_eq!(b2.adapted_basis(root).matrix.column(1), vec![q(1), q(1)]);
    }

    #[test]
    fn equivariance_of_coroot_evaluation() {
        for k in ["A2", "B2", "G2", "A3", "C3"] {
            let s = sys(k);
            for w in 0..s.order() {
                for chi in 0..s.t2_size() {
                    for root in 0..s.datum.positive_roots.len() {
                        let (_, wr) = s.act_root(w, root);
                        assert_eq!(s.eval_char_coroot(s.act_char(w, chi), wr), s.eval_char_coroot(chi, root));
                    }
                }
            }
        }
    }

    #[test]
    fn twist_signs() {
        let s = sys("A2");
        for c in &s.datum.centrals {
            for o in s.char_orbits() {
                for &w in &o.stabilizer {
                    assert_eq!(s.twist_sign(c, w, o.representative).unwrap(), 1, "A2 {}", c.label);
                }
            }
        }
        let b2 = sys("B2");
        let id = b2.datum.central("identity").unwrap();
        let eps = b2.datum.central("eps").unwrap();
        let chi = b2.from_signs(&[-1, -1]);
        // the reflection in 2e_1 moves (1/2, 1/2) by e_1; the swap fixes it
        let long = b2.index[&b2.datum.reflection(b2.datum.simple[0])];
        let short = b2.index[&b2.datum.reflection(b2.datum.simple[1])];
        assert_eq!(b2.twist_element(eps, long).unwrap(), 0b01);
        assert_eq!(b2.twist_element(eps, short).unwrap(), 0);
        for &g in &b2.generators {
            assert_eq!(b2.twist_sign(id, g, chi).unwrap(), 1);
        }
        assert_eq!(b2.twist_sign(eps, long, chi).unwrap(), -1);
        assert_eq!(b2.twist_sign(eps, short, chi).unwrap(), 1);
        let mixed = b2.from_signs(&[-1, 1]);
        let outside = b2.generators.iter().find(|&&g| b2.act_char(g, mixed) != mixed).unwrap();
        assert_eq!(b2.twist_sign(eps, *outside, mixed), Err(RootError::OutsideStabilizer));
        let so3 = sys("SO3");
        let pi = so3.datum.central("pi").unwrap();
        assert_eq!(so3.twist_sign(pi, 1, 1).unwrap(), -1);
        assert_eq!(so3.twist_sign(pi, 1, 0).unwrap(), 1);
    }

    #[test]
    fn poincare_polynomials() {
        assert_eq!(build_datum("A2").unwrap().poincare(), vec![1, 0, 0, 1, 0, 1, 0, 0, 1]);
        assert_eq!(build_datum("U2").unwrap().poincare(), vec![1, 1, 0, 1, 1]);
        assert_eq!(build_datum("SO3").unwrap().poincare(), vec![1, 0, 0, 1]);
    }

    #[test]
    fn custom_datum_round_trip() {
        let d = build_datum("G2").unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: RootDatum = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        let mut broken = d.clone();
        broken.coroots[0][0] += 1;
        assert!(broken.validate().is_err());
    }
}
