//! Compressed-row sparse matrices, direct solves and 2-norm condition numbers.
//!
//! Factorizations and dense spectral decompositions are delegated to `faer`.

use faer::prelude::*;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{invalid, Error, Result};

/// Largest dimension accepted by [`condition_number_2`].
pub const DENSE_LIMIT: usize = 20_000;

/// Coordinate-list staging buffer; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct CooMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    /// Adds every entry of `other` shifted by `(row_offset, col_offset)`.
    pub fn push_block(&mut self, other: &SparseMatrix, row_offset: usize, col_offset: usize, scale: f64) {
        for i in 0..other.n_rows {
            for (j, v) in other.row(i) {
                self.push(i + row_offset, j + col_offset, scale * v);
            }
        }
    }

    pub fn extend(&mut self, other: CooMatrix) {
        self.entries.extend(other.entries);
    }

    pub fn to_csr(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CooMatrix::new(n_rows, n_cols).to_csr()
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut coo = CooMatrix::new(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            coo.push(i, i, v);
        }
        coo.to_csr()
    }

    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut coo = CooMatrix::new(n_rows, n_cols);
        for &(i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(invalid(format!("entry ({i}, {j}) outside {n_rows}x{n_cols}")));
            }
            coo.push(i, j, v);
        }
        Ok(coo.to_csr())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "dimension mismatch");
        (0..self.n_rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut coo = CooMatrix::new(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                coo.push(j, i, v);
            }
        }
        coo.to_csr()
    }

    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &SparseMatrix, c: f64) -> SparseMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut coo = CooMatrix::new(self.n_rows, self.n_cols);
        coo.push_block(self, 0, 0, 1.0);
        coo.push_block(other, 0, 0, c);
        coo.to_csr()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max |A - Aᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.add_scaled(&self.transpose(), -1.0).max_abs()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect() <= rel_tol * self.max_abs()
    }

    /// Rows `rows` and columns `cols` (both given as index lists) of the matrix.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut coo = CooMatrix::new(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if col_map[j] != usize::MAX {
                    coo.push(r, col_map[j], v);
                }
            }
        }
        coo.to_csr()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> = (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &triplets)
            .map_err(|e| Error::Backend(format!("{e:?}")))
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sparse LU factorization with partial pivoting, reusable for many right-hand sides.
pub struct LuFactorization {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactorization").field("n", &self.n).finish()
    }
}

impl LuFactorization {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(invalid(format!("cannot factor a {}x{} matrix", a.n_rows, a.n_cols)));
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::SingularMatrix { pivot: Some(index) },
            LuError::Generic(e) => Error::Backend(format!("{e:?}")),
        })?;
        Ok(Self { n: a.n_rows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(invalid(format!("right-hand side of length {} for dimension {}", b.len(), self.n)));
        }
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        let x: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { pivot: None });
        }
        Ok(x)
    }
}

/// Solves `A x = b` by sparse LU; fails if the residual check
/// `‖Ax − b‖ ≤ 1e-8 (‖A‖_F ‖x‖ + ‖b‖)` is violated.
pub fn solve_direct(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let x = LuFactorization::new(a)?.solve(b)?;
    let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, b)| ax - b).collect();
    if norm2(&r) > 1e-8 * (a.frobenius_norm() * norm2(&x) + norm2(b)) {
        return Err(Error::SingularMatrix { pivot: None });
    }
    Ok(x)
}

/// `σ_max / σ_min`; `f64::INFINITY` when `σ_min < 1e-14 σ_max`.
pub fn condition_number_2(a: &SparseMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(invalid("condition number of a non-square matrix"));
    }
    let n = a.n_rows();
    if n > DENSE_LIMIT {
        return Err(Error::UnsupportedSize { dim: n, limit: DENSE_LIMIT });
    }
    if n == 0 {
        return Err(invalid("condition number of an empty matrix"));
    }
    let dense = a.to_dense();
    let (smax, smin) = if a.is_symmetric(1e-14) {
        let ev = dense
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        let abs = ev.iter().map(|v| v.abs());
        (abs.clone().fold(0.0, f64::max), abs.fold(f64::INFINITY, f64::min))
    } else {
        let sv = dense.singular_values().map_err(|e| Error::Backend(format!("{e:?}")))?;
        (sv.iter().copied().fold(0.0, f64::max), sv.iter().copied().fold(f64::INFINITY, f64::min))
    };
    if smax == 0.0 || smin < 1e-14 * smax {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}
