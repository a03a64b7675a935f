//! Dense matrices, index sets, the matrix norms used by the estimator, and
//! normalized error metrics.
//!
//! Storage is row-major. Spectral quantities go through a full SVD
//! (nalgebra); all sizes handled here are desk scale.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cut-off below which a singular value counts as zero for rank.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes,
    /// length mismatches and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("empty matrix shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix shape");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..rows {
            for k in 0..cols {
                m.data[j * cols + k] = f(j, k);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |j, k| if j == k { values[j] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |j| self.data[j * self.cols + k])
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (acc, v) in sq.iter_mut().zip(row) {
                *acc += v * v;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |j, k| self[(k, j)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims(), other.dims(), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Trace inner product ⟨A, B⟩ = tr(AᵀB).
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims(), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn count_nonzero_columns(&self) -> usize {
        (0..self.cols)
            .filter(|&k| self.column(k).any(|v| v != 0.0))
            .count()
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |j, k| m[(j, k)])
    }

    /// Full thin SVD, singular values sorted in decreasing order.
    pub fn svd(&self) -> Result<Svd> {
        let svd = nalgebra::SVD::try_new(self.to_nalgebra(), true, true, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
        match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => Ok(Svd {
                u,
                singular_values: svd.singular_values.iter().copied().collect(),
                v_t,
            }),
            _ => Err(Error::Numerical("SVD returned no singular vectors".into())),
        }
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let svd = nalgebra::SVD::new(self.to_nalgebra(), false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Numerical rank: singular values above `RANK_TOL` times the largest.
    pub fn rank(&self) -> usize {
        let s = self.singular_values();
        let top = s.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        s.iter().filter(|&&v| v > RANK_TOL * top).count()
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm(self, kind)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    /// Parses the `rows,cols` header followed by one comma-separated line per row.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse(format!("bad header {header:?}")));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for (i, line) in lines.enumerate() {
            let before = data.len();
            for tok in line.split(',') {
                let v = tok
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {i}: {tok:?}: {e}")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, expected {cols}",
                    data.len() - before
                )));
            }
        }
        if data.len() != rows * cols {
            return Err(Error::Parse(format!(
                "expected {rows} rows, found {}",
                data.len() / cols.max(1)
            )));
        }
        Self::new(rows, cols, data)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{},{}\n", self.rows, self.cols);
        for row in self.data.chunks_exact(self.cols) {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                // `{:?}` on f64 is the shortest exact round-trip form.
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (j, k): (usize, usize)) -> &f64 {
        assert!(j < self.rows && k < self.cols, "index ({j}, {k}) out of range");
        &self.data[j * self.cols + k]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (j, k): (usize, usize)) -> &mut f64 {
        assert!(j < self.rows && k < self.cols, "index ({j}, {k}) out of range");
        &mut self.data[j * self.cols + k]
    }
}

/// Thin SVD `A = U diag(s) Vᵀ`, singular values decreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl Svd {
    /// `U diag(f(s)) Vᵀ`.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let (m1, m2) = (self.u.nrows(), self.v_t.ncols());
        let mut out = DenseMatrix::zeros(m1, m2);
        for (i, &s) in self.singular_values.iter().enumerate() {
            let w = f(s);
            if w == 0.0 {
                continue;
            }
            let data = out.as_mut_slice();
            for j in 0..m1 {
                let uj = w * self.u[(j, i)];
                if uj == 0.0 {
                    continue;
                }
                let row = &mut data[j * m2..(j + 1) * m2];
                for (k, x) in row.iter_mut().enumerate() {
                    *x += uj * self.v_t[(i, k)];
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Sum of singular values.
    Nuclear,
    /// Largest singular value.
    Operator,
    /// Largest absolute entry.
    Sup,
    L1,
    /// Sum of column ℓ2 norms.
    L21,
    /// Largest column ℓ2 norm.
    L2Inf,
    Frobenius,
}

impl NormKind {
    pub const ALL: [NormKind; 7] = [
        NormKind::Nuclear,
        NormKind::Operator,
        NormKind::Sup,
        NormKind::L1,
        NormKind::L21,
        NormKind::L2Inf,
        NormKind::Frobenius,
    ];
}

pub fn norm(a: &DenseMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Nuclear => a.singular_values().iter().sum(),
        NormKind::Operator => a.singular_values().first().copied().unwrap_or(0.0),
        NormKind::Sup => a.max_abs(),
        NormKind::L1 => a.as_slice().iter().map(|v| v.abs()).sum(),
        NormKind::L21 => a.column_norms().iter().sum(),
        NormKind::L2Inf => a.column_norms().into_iter().fold(0.0, f64::max),
        NormKind::Frobenius => a.frobenius_sq().sqrt(),
    }
}

/// A set of matrix positions, stored as a dense membership mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
    len: usize,
}

impl IndexSet {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            mask: vec![false; rows * cols],
            len: 0,
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            mask: vec![true; rows * cols],
            len: rows * cols,
        }
    }

    pub fn from_members(
        rows: usize,
        cols: usize,
        members: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut set = Self::empty(rows, cols);
        for (j, k) in members {
            if j >= rows || k >= cols {
                return Err(Error::invalid(format!(
                    "index ({j}, {k}) outside {rows}x{cols}"
                )));
            }
            set.insert(j, k);
        }
        Ok(set)
    }

    /// All rows of the given columns: `{0..m₁} × J`.
    pub fn columns(rows: usize, cols: usize, columns: &[usize]) -> Result<Self> {
        Self::from_members(
            rows,
            cols,
            columns
                .iter()
                .flat_map(|&k| (0..rows).map(move |j| (j, k))),
        )
    }

    /// Positions where `a` is nonzero.
    pub fn support_of(a: &DenseMatrix) -> Self {
        let mask: Vec<bool> = a.as_slice().iter().map(|v| *v != 0.0).collect();
        let len = mask.iter().filter(|b| **b).count();
        Self {
            rows: a.rows(),
            cols: a.cols(),
            mask,
            len,
        }
    }

    pub fn insert(&mut self, j: usize, k: usize) {
        let cell = &mut self.mask[j * self.cols + k];
        if !*cell {
            *cell = true;
            self.len += 1;
        }
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        j < self.rows && k < self.cols && self.mask[j * self.cols + k]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            mask: self.mask.iter().map(|b| !b).collect(),
            len: self.rows * self.cols - self.len,
        }
    }

    /// Members in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(p, _)| (p / cols, p % cols))
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Columns with at least one member.
    pub fn occupied_columns(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|&k| (0..self.rows).any(|j| self.mask[j * self.cols + k]))
            .collect()
    }
}

/// `A_I`: entries outside `I` set to zero.
pub fn restrict(a: &DenseMatrix, set: &IndexSet) -> Result<DenseMatrix> {
    if a.dims() != set.dims() {
        return Err(Error::Dimension {
            expected: a.dims(),
            got: set.dims(),
        });
    }
    let data = a
        .as_slice()
        .iter()
        .zip(set.mask())
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    Ok(DenseMatrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// ‖L̂ − L₀‖₂² / (m₁m₂)
    pub normalized_frob_l: f64,
    /// ‖Ŝ − S₀‖₂² / (m₁m₂)
    pub normalized_frob_s: f64,
    /// ‖Ŝ_I‖₂² / |I|, zero when `I` is empty.
    pub noncorrupted_s_error: f64,
}

/// Normalized estimation errors. `noncorrupted` is the complement of the
/// corruption support.
pub fn error_report(
    l_hat: &DenseMatrix,
    s_hat: &DenseMatrix,
    l0: &DenseMatrix,
    s0: &DenseMatrix,
    noncorrupted: &IndexSet,
) -> Result<ErrorReport> {
    let dims = l0.dims();
    for got in [l_hat.dims(), s_hat.dims(), s0.dims(), noncorrupted.dims()] {
        if got != dims {
            return Err(Error::Dimension {
                expected: dims,
                got,
            });
        }
    }
    let cells = (dims.0 * dims.1) as f64;
    let s_on_i = restrict(s_hat, noncorrupted)?.frobenius_sq();
    Ok(ErrorReport {
        normalized_frob_l: l_hat.sub(l0).frobenius_sq() / cells,
        normalized_frob_s: s_hat.sub(s0).frobenius_sq() / cells,
        noncorrupted_s_error: if noncorrupted.is_empty() {
            0.0
        } else {
            s_on_i / noncorrupted.len() as f64
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn norms_of_small_matrices() {
        let d = DenseMatrix::diag(&[3.0, 4.0]);
        assert!((norm(&d, NormKind::Nuclear) - 7.0).abs() < 1e-12);
        assert!((norm(&d, NormKind::Operator) - 4.0).abs() < 1e-12);
        assert!((norm(&d, NormKind::Frobenius).powi(2) - 25.0).abs() < 1e-12);
        let a = DenseMatrix::from_rows(&[&[3.0, 0.0], &[4.0, 0.0]]).unwrap();
        assert_eq!(norm(&a, NormKind::L21), 5.0);
        assert_eq!(norm(&a, NormKind::L2Inf), 5.0);
        assert_eq!(norm(&a, NormKind::Sup), 4.0);
        assert_eq!(norm(&a, NormKind::L1), 7.0);
    }

    #[test]
    fn rank_uses_relative_threshold() {
        let a = DenseMatrix::from_fn(4, 3, |j, k| (j + 1) as f64 * (k as f64 - 1.5));
        assert_eq!(a.rank(), 1);
        assert_eq!(DenseMatrix::diag(&[1.0, 1e-13]).rank(), 1);
        assert_eq!(DenseMatrix::zeros(3, 3).rank(), 0);
    }

    #[test]
    fn restrict_examples() {
        let ones = DenseMatrix::from_fn(2, 2, |_, _| 1.0);
        let single = IndexSet::from_members(2, 2, [(0, 0)]).unwrap();
        let r = restrict(&ones, &single).unwrap();
        assert_eq!(r.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(restrict(&ones, &IndexSet::full(2, 2)).unwrap(), ones);
        assert!(restrict(&ones, &IndexSet::full(3, 2)).is_err());
    }

    #[test]
    fn index_set_bounds_and_complement() {
        assert!(IndexSet::from_members(2, 2, [(2, 0)]).is_err());
        let set = IndexSet::columns(3, 4, &[1, 3]).unwrap();
        assert_eq!(set.len(), 6);
        assert_eq!(set.occupied_columns(), vec![1, 3]);
        assert_eq!(set.complement().len(), 6);
        assert_eq!(set.complement().complement(), set);
    }

    #[test]
    fn error_report_examples() {
        let l0 = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let s0 = DenseMatrix::zeros(2, 2);
        let i = IndexSet::full(2, 2);
        let same = error_report(&l0, &s0, &l0, &s0, &i).unwrap();
        assert_eq!(
            (same.normalized_frob_l, same.normalized_frob_s, same.noncorrupted_s_error),
            (0.0, 0.0, 0.0)
        );
        let mut l_hat = l0.clone();
        l_hat[(0, 0)] += 1.0;
        let r = error_report(&l_hat, &s0, &l0, &s0, &i).unwrap();
        assert_eq!(r.normalized_frob_l, 0.25);
        assert!(error_report(&l0, &s0, &l0, &s0, &IndexSet::full(2, 3)).is_err());
    }

    #[test]
    fn error_report_matches_double_loop() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (m1, m2) = (5, 7);
        let [lh, sh, l0, s0] = [0; 4].map(|_| random(m1, m2, &mut rng));
        let i = IndexSet::from_members(m1, m2, (0..m1).flat_map(|j| (0..4).map(move |k| (j, k))))
            .unwrap();
        let r = error_report(&lh, &sh, &l0, &s0, &i).unwrap();
        let (mut el, mut es, mut ei) = (0.0, 0.0, 0.0);
        for j in 0..m1 {
            for k in 0..m2 {
                el += (lh[(j, k)] - l0[(j, k)]).powi(2);
                es += (sh[(j, k)] - s0[(j, k)]).powi(2);
                if k < 4 {
                    ei += sh[(j, k)].powi(2);
                }
            }
        }
        let cells = (m1 * m2) as f64;
        assert!((r.normalized_frob_l - el / cells).abs() < 1e-14);
        assert!((r.normalized_frob_s - es / cells).abs() < 1e-14);
        assert!((r.noncorrupted_s_error - ei / (m1 * 4) as f64).abs() < 1e-14);
    }

    /// Cyclic Jacobi eigenvalues of a symmetric matrix.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
                .map(|(p, q)| a[p][q] * a[p][q])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn nuclear_norm_matches_gram_eigenvalues() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = random(5, 4, &mut rng);
            let gram: Vec<Vec<f64>> = (0..4)
                .map(|p| (0..4).map(|q| a.column(p).zip(a.column(q)).map(|(x, y)| x * y).sum()).collect())
                .collect();
            let oracle: f64 = jacobi_eigenvalues(gram).iter().map(|e| e.max(0.0).sqrt()).sum();
            assert!((norm(&a, NormKind::Nuclear) - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = random(3, 4, &mut rng).scale(1e-7);
        let back = DenseMatrix::parse_csv(&a.to_csv_string()).unwrap();
        assert_eq!(a, back);
        assert!(DenseMatrix::parse_csv("2,2\n1,2\n3\n").is_err());
        assert!(DenseMatrix::parse_csv("2,2\n1,2\n").is_err());
        assert!(DenseMatrix::parse_csv("2;2\n").is_err());
        let e = DenseMatrix::parse_csv("1,2\n1e-3,2.5E2\n").unwrap();
        assert_eq!(e.as_slice(), &[1e-3, 250.0]);
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
        prop::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |v| DenseMatrix::new(rows, cols, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_axioms(a in arb_matrix(4, 3), b in arb_matrix(4, 3), c in -5.0f64..5.0) {
            for kind in NormKind::ALL {
                let na = norm(&a, kind);
                prop_assert!(na >= 0.0);
                prop_assert!((norm(&a.scale(c), kind) - c.abs() * na).abs() <= 1e-9 * (1.0 + na));
                prop_assert!(norm(&a.add(&b), kind) <= na + norm(&b, kind) + 1e-9);
            }
            prop_assert!(norm(&a, NormKind::Operator) <= norm(&a, NormKind::Nuclear) + 1e-12);
        }

        #[test]
        fn dual_norm_sandwich(a in arb_matrix(3, 5), b in arb_matrix(3, 5)) {
            let ip = a.dot(&b);
            prop_assert!(ip <= norm(&a, NormKind::Nuclear) * norm(&b, NormKind::Operator) + 1e-9);
            prop_assert!(ip <= norm(&a, NormKind::L21) * norm(&b, NormKind::L2Inf) + 1e-9);
            prop_assert!(ip <= norm(&a, NormKind::L1) * norm(&b, NormKind::Sup) + 1e-9);
        }

        #[test]
        fn absolute_norms_are_monotone(a in arb_matrix(3, 4), t in prop::collection::vec(0.0f64..1.0, 12)) {
            let shrunk = DenseMatrix::new(3, 4, a.as_slice().iter().zip(&t).map(|(v, w)| v * w).collect()).unwrap();
            for kind in [NormKind::L1, NormKind::L21, NormKind::Sup, NormKind::L2Inf] {
                prop_assert!(norm(&shrunk, kind) <= norm(&a, kind) + 1e-12);
            }
        }

        #[test]
        fn restrict_is_a_linear_idempotent_partition(
            a in arb_matrix(3, 3),
            b in arb_matrix(3, 3),
            bits in prop::collection::vec(any::<bool>(), 9),
            c in -3.0f64..3.0,
        ) {
            let set = IndexSet::from_members(3, 3, (0..9).filter(|p| bits[*p]).map(|p| (p / 3, p % 3))).unwrap();
            let ra = restrict(&a, &set).unwrap();
            prop_assert_eq!(&restrict(&ra, &set).unwrap(), &ra);
            let sum = ra.add(&restrict(&a, &set.complement()).unwrap());
            prop_assert_eq!(&sum, &a);
            let lhs = restrict(&a.scale(c).add(&b), &set).unwrap();
            let rhs = ra.scale(c).add(&restrict(&b, &set).unwrap());
            prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        }
    }
}
