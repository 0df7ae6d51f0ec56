//! Dense exact linear algebra over [`Rational`].

use crate::rational::Rational;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("row count mismatch: {0} vs {1}")]
    RowMismatch(usize, usize),
    #[error("dimension mismatch for product: {0}x{1} times {2}x{3}")]
    ProductMismatch(usize, usize, usize, usize),
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, entries: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    /// Builds a matrix from rows; every row must have `cols` entries.
    pub fn from_rows(cols: usize, rows: Vec<Vec<Rational>>) -> Self {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            entries.extend(r);
        }
        Matrix { rows: n, cols, entries }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_rows(
            cols,
            rows.iter().map(|r| r.iter().map(|&x| Rational::from_int(x)).collect()).collect(),
        )
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, cols: &[Vec<Rational>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn column_vecs(&self) -> Vec<Vec<Rational>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::ProductMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let v = out.get(i, j) + &(a * b);
                        out.set(i, j, v);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = Rational::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc += &(a * b);
                    }
                }
                acc
            })
            .collect()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.rows != other.rows {
            return Err(LinalgError::RowMismatch(self.rows, other.rows));
        }
        let rows = (0..self.rows)
            .map(|i| {
                let mut r = self.row(i).to_vec();
                r.extend_from_slice(other.row(i));
                r
            })
            .collect();
        Ok(Matrix::from_rows(self.cols + other.cols, rows))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Rational::is_zero)
    }
}

/// In-place Gauss–Jordan elimination on a list of rows. Returns pivot columns;
/// afterwards the first `pivots.len()` rows are the nonzero RREF rows.
pub(crate) fn rref_rows(rows: &mut Vec<Vec<Rational>>, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    let n = rows.len();
    for c in 0..cols {
        if r == n {
            break;
        }
        let Some(p) = (r..n).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        if !inv.is_one() {
            for x in rows[r][c..].iter_mut() {
                if !x.is_zero() {
                    *x *= &inv;
                }
            }
        }
        let nz: Vec<usize> = (c..cols).filter(|&j| !rows[r][j].is_zero()).collect();
        let (before, rest) = rows.split_at_mut(r);
        let (prow, after) = rest.split_first_mut().unwrap();
        for other in before.iter_mut().chain(after.iter_mut()) {
            let f = other[c].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &nz {
                other[j].sub_mul(&f, &prow[j]);
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

/// Reduced row-echelon form, rank and pivot columns.
pub fn rref(m: &Matrix) -> (Matrix, usize, Vec<usize>) {
    let mut rows = m.row_vecs();
    let pivots = rref_rows(&mut rows, m.cols);
    let rank = pivots.len();
    rows.resize(m.rows, vec![Rational::zero(); m.cols]);
    (Matrix::from_rows(m.cols, rows), rank, pivots)
}

pub fn rank(m: &Matrix) -> usize {
    let mut rows = m.row_vecs();
    rref_rows(&mut rows, m.cols).len()
}

/// Null-space vectors from RREF rows with the given pivots.
pub(crate) fn kernel_from_rref(rows: &[Vec<Rational>], pivots: &[usize], cols: usize) -> Vec<Vec<Rational>> {
    let mut is_pivot = vec![false; cols];
    for &p in pivots {
        is_pivot[p] = true;
    }
    (0..cols)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = vec![Rational::zero(); cols];
            v[f] = Rational::one();
            for (i, &p) in pivots.iter().enumerate() {
                let e = &rows[i][f];
                if !e.is_zero() {
                    v[p] = -e;
                }
            }
            v
        })
        .collect()
}

/// Kernel vectors of a matrix given as rows.
pub(crate) fn kernel_rows(mut rows: Vec<Vec<Rational>>, cols: usize) -> Vec<Vec<Rational>> {
    let pivots = rref_rows(&mut rows, cols);
    kernel_from_rref(&rows, &pivots, cols)
}

/// Columns form a basis of `{x : m x = 0}`.
pub fn kernel_basis(m: &Matrix) -> Matrix {
    let k = kernel_rows(m.row_vecs(), m.cols);
    Matrix::from_columns(m.cols, &k)
}

/// Columns form a basis of `col(a) ∩ col(b)`, via the kernel of `[a | -b]`.
pub fn intersect_column_spaces(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    if a.rows != b.rows {
        return Err(LinalgError::RowMismatch(a.rows, b.rows));
    }
    let mut negb = b.clone();
    for x in negb.entries.iter_mut() {
        *x = -&*x;
    }
    let block = a.hstack(&negb)?;
    let k = kernel_rows(block.row_vecs(), block.cols);
    let images: Vec<Vec<Rational>> = k.iter().map(|v| a.mul_vec(&v[..a.cols])).collect();
    let basis = row_basis(images, a.rows);
    Ok(Matrix::from_columns(a.rows, &basis))
}

/// RREF basis of the span of the given vectors.
pub(crate) fn row_basis(mut rows: Vec<Vec<Rational>>, cols: usize) -> Vec<Vec<Rational>> {
    rref_rows(&mut rows, cols);
    rows
}

/// Fully reduced echelon basis that grows one vector at a time.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    cols: usize,
    rows: Vec<Vec<Rational>>,
    pivots: Vec<usize>,
}

impl Echelon {
    pub fn new(cols: usize) -> Self {
        Echelon { cols, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn from_rref(cols: usize, rows: Vec<Vec<Rational>>, pivots: Vec<usize>) -> Self {
        Echelon { cols, rows, pivots }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Reduces `v` against the basis in place.
    pub fn reduce(&self, v: &mut [Rational]) {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let f = v[p].clone();
            if f.is_zero() {
                continue;
            }
            for (x, y) in v.iter_mut().zip(row) {
                if !y.is_zero() {
                    x.sub_mul(&f, y);
                }
            }
        }
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(Rational::is_zero)
    }

    /// Adds `v` to the span; returns whether the rank grew.
    pub fn insert(&mut self, mut v: Vec<Rational>) -> bool {
        debug_assert_eq!(v.len(), self.cols);
        self.reduce(&mut v);
        let Some(p) = v.iter().position(|x| !x.is_zero()) else { return false };
        let inv = v[p].recip();
        for x in v.iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        for row in self.rows.iter_mut() {
            let f = row[p].clone();
            if f.is_zero() {
                continue;
            }
            for (x, y) in row.iter_mut().zip(&v) {
                if !y.is_zero() {
                    x.sub_mul(&f, y);
                }
            }
        }
        let at = self.pivots.partition_point(|&q| q < p);
        self.pivots.insert(at, p);
        self.rows.insert(at, v);
        true
    }

    pub fn into_rows(self) -> Vec<Vec<Rational>> {
        self.rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    #[test]
    fn rref_basic_cases() {
        let (_, r, p) = rref(&Matrix::identity(3));
        assert_eq!((r, p), (3, vec![0, 1, 2]));
        let (_, r, p) = rref(&Matrix::zeros(2, 2));
        assert_eq!((r, p), (0, vec![]));
        let (m, r, p) = rref(&Matrix::from_i64(&[&[1, 2], &[2, 4]]));
        assert_eq!((r, p), (1, vec![0]));
        assert_eq!(m.row(0), &[q(1), q(2)]);
        assert!(m.row(1).iter().all(Rational::is_zero));
    }

    #[test]
    fn kernel_cases() {
        assert_eq!(kernel_basis(&Matrix::identity(3)).cols(), 0);
        assert_eq!(kernel_basis(&Matrix::zeros(2, 3)).cols(), 3);
        let m = Matrix::from_i64(&[&[1, 1, 0]]);
        let k = kernel_basis(&m);
        assert_eq!(k.cols(), 2);
        assert!(m.mul(&k).unwrap().is_zero());
    }

    #[test]
    fn intersect_cases() {
        let i = Matrix::identity(4);
        assert_eq!(intersect_column_spaces(&i, &i).unwrap().cols(), 4);
        let a = Matrix::from_i64(&[&[1, 0], &[0, 1], &[0, 0], &[0, 0]]);
        let b = Matrix::from_i64(&[&[0, 0], &[0, 0], &[1, 0], &[0, 1]]);
        assert_eq!(intersect_column_spaces(&a, &b).unwrap().cols(), 0);
        assert!(intersect_column_spaces(&a, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn echelon_matches_rref() {
        let m = Matrix::from_i64(&[&[2, 4, 1, 0], &[1, 2, 0, 1], &[3, 6, 1, 1], &[0, 0, 5, -5]]);
        let mut e = Echelon::new(4);
        for r in m.row_vecs() {
            e.insert(r);
        }
        let (rr, rank, piv) = rref(&m);
        assert_eq!(e.rank(), rank);
        assert_eq!(e.pivots(), &piv[..]);
        for i in 0..rank {
            assert_eq!(&e.rows()[i][..], rr.row(i));
        }
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-3i64..=3, rows * cols).prop_map(move |v| {
            Matrix::from_rows(cols, v.chunks(cols).map(|c| c.iter().map(|&x| q(x)).collect()).collect())
        })
    }

    proptest! {
        #[test]
        fn rank_transpose(m in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| small_matrix(r, c))) {
            prop_assert_eq!(rank(&m), rank(&m.transpose()));
        }

        #[test]
        fn rank_nullity(m in (1usize..6, 1usize..7).prop_flat_map(|(r, c)| small_matrix(r, c))) {
            let k = kernel_basis(&m);
            prop_assert_eq!(k.cols() + rank(&m), m.cols());
            prop_assert!(m.mul(&k).unwrap().is_zero());
        }

        #[test]
        fn intersection_dimension(a in small_matrix(6, 3), b in small_matrix(6, 4)) {
            let i = intersect_column_spaces(&a, &b).unwrap();
            let expected = rank(&a) + rank(&b) - rank(&a.hstack(&b).unwrap());
            prop_assert_eq!(i.cols(), expected);
            let j = intersect_column_spaces(&b, &a).unwrap();
            prop_assert_eq!(rank(&i.hstack(&j).unwrap()), i.cols());
            for c in i.column_vecs() {
                let ext = a.hstack(&Matrix::from_columns(6, &[c.clone()])).unwrap();
                prop_assert_eq!(rank(&ext), rank(&a));
                let ext = b.hstack(&Matrix::from_columns(6, &[c])).unwrap();
                prop_assert_eq!(rank(&ext), rank(&b));
            }
        }
    }
}
