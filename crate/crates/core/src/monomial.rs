//! Monomials of a polynomial ring in `n` variables and subsets for exterior
//! monomials.
//!
//! Symmetric monomials of a fixed degree are listed in descending lexicographic
//! order of their exponent vectors (`x1^q` first). Exterior subsets of one
//! factor are listed by size, then lexicographically by sorted indices.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Number of monomials of degree `deg` in `n` variables.
pub fn count(n: usize, deg: u32) -> usize {
    if n == 0 {
        return usize::from(deg == 0);
    }
    binomial(deg as u64 + n as u64 - 1, n as u64 - 1) as usize
}

fn generate(n: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(count(n, deg));
    let mut cur = vec![0u32; n];
    fn rec(i: usize, rem: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let n = cur.len();
        if i + 1 == n {
            cur[i] = rem;
            out.push(cur.clone());
            return;
        }
        for e in (0..=rem).rev() {
            cur[i] = e;
            rec(i + 1, rem - e, cur, out);
        }
        cur[i] = 0;
    }
    if n == 0 {
        if deg == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, deg, &mut cur, &mut out);
    out
}

type Table = Arc<Vec<Vec<u32>>>;

fn cache() -> &'static Mutex<HashMap<(usize, u32), Table>> {
    static C: OnceLock<Mutex<HashMap<(usize, u32), Table>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// All monomials of degree `deg` in `n` variables, in canonical order.
pub fn list(n: usize, deg: u32) -> Table {
    if let Some(t) = cache().lock().unwrap().get(&(n, deg)) {
        return t.clone();
    }
    let t = Arc::new(generate(n, deg));
    cache().lock().unwrap().insert((n, deg), t.clone());
    t
}

/// Position of `exps` in `list(exps.len(), |exps|)`.
pub fn rank(exps: &[u32]) -> usize {
    let n = exps.len();
    let mut rem: u32 = exps.iter().sum();
    let mut pos = 0usize;
    for i in 0..n.saturating_sub(1) {
        // monomials with a larger exponent in slot i come first
        let a = exps[i];
        for v in (a + 1)..=rem {
            pos += count(n - i - 1, rem - v);
        }
        rem -= a;
    }
    pos
}

/// Exponent vector of total degree.
pub fn degree(exps: &[u32]) -> u32 {
    exps.iter().sum()
}

/// Subsets of `{0..r}` as bitmasks, ordered by size then lexicographically.
pub fn subsets(r: usize) -> Arc<Vec<u32>> {
    static C: OnceLock<Mutex<HashMap<usize, Arc<Vec<u32>>>>> = OnceLock::new();
    let c = C.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = c.lock().unwrap().get(&r) {
        return v.clone();
    }
    let mut v: Vec<u32> = (0..(1u32 << r)).collect();
    v.sort_by_key(|&m| (m.count_ones(), sorted_indices(m)));
    let v = Arc::new(v);
    c.lock().unwrap().insert(r, v.clone());
    v
}

pub fn sorted_indices(mask: u32) -> Vec<u32> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// Sign and product of two exterior monomials in one factor, or `None` when
/// they share an index.
pub fn wedge(a: u32, b: u32) -> Option<(i64, u32)> {
    if a & b != 0 {
        return None;
    }
    // count pairs (i in a, j in b) with i > j
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    Some((if inversions % 2 == 0 { 1 } else { -1 }, a | b))
}
