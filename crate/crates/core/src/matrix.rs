//! Matrix carriers and the dense linear-algebra kernels the solver is built on.
//!
//! The user-item matrix is stored sparse (row and column compressed indices over
//! the same entry set). Everything the solver iterates on is dense: the proximal
//! step of the rank surrogate fills in the whole item-item matrix.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use rand::Rng;

use crate::error::{Error, Result};

/// Dense real matrix with finite entries.
///
/// Constructors reject NaN and infinities. Arithmetic on finite inputs can still
/// overflow, so long-running callers check [`DenseMatrix::is_finite`] on their
/// iterates.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    mat: Mat<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            mat: Mat::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: Mat::identity(n, n),
        }
    }

    /// Square matrix with `diag` on the diagonal.
    ///
    /// # Panics
    /// If any diagonal value is not finite.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(diag.iter().all(|v| v.is_finite()), "non-finite diagonal");
        let n = diag.len();
        Self {
            mat: Mat::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
        }
    }

    /// Builds a matrix from row-major values.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite value at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self {
            mat: Mat::from_fn(rows, cols, |i, j| values[i * cols + j]),
        })
    }

    /// # Panics
    /// If `f` returns a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mat = Mat::from_fn(rows, cols, |i, j| {
            let v = f(i, j);
            assert!(v.is_finite(), "non-finite value at ({i}, {j})");
            v
        });
        Self { mat }
    }

    /// Entries drawn uniformly from `[0, 1)`, filled column by column.
    pub fn random_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            for v in out.mat.col_as_slice_mut(j) {
                *v = rng.gen::<f64>();
            }
        }
        out
    }

    pub(crate) fn from_mat(mat: Mat<f64>) -> Self {
        Self { mat }
    }

    /// Borrow as a `faer` view for callers that need other kernels.
    pub fn as_faer(&self) -> MatRef<'_, f64> {
        self.mat.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    /// # Panics
    /// If `value` is not finite.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(value.is_finite(), "non-finite value at ({i}, {j})");
        self.mat[(i, j)] = value;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.mat.col_as_slice(j)
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let (r, c) = self.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose().to_owned(),
        }
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Self {
        assert_eq!(self.cols(), rhs.rows(), "matmul dimension mismatch");
        Self {
            mat: &self.mat * &rhs.mat,
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut out = self.clone();
        for j in 0..out.cols() {
            for v in out.mat.col_as_slice_mut(j) {
                *v = f(*v);
            }
        }
        out
    }

    pub fn zip_map(&self, other: &DenseMatrix, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        let mut out = self.clone();
        for j in 0..out.cols() {
            let rhs = other.mat.col_as_slice(j);
            for (v, &b) in out.mat.col_as_slice_mut(j).iter_mut().zip(rhs) {
                *v = f(*v, b);
            }
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|a| a * s)
    }

    /// `self += s * other`
    pub fn add_scaled_in_place(&mut self, s: f64, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        for j in 0..self.cols() {
            let rhs = other.mat.col_as_slice(j);
            for (v, &b) in self.mat.col_as_slice_mut(j).iter_mut().zip(rhs) {
                *v += s * b;
            }
        }
    }

    fn fold(&self, init: f64, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut acc = init;
        for j in 0..self.cols() {
            for &v in self.mat.col_as_slice(j) {
                acc = f(acc, v);
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.fold(0.0, |acc, v| acc + v * v).sqrt()
    }

    /// Largest absolute entry (zero for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Smallest entry (zero for an empty matrix).
    pub fn min_entry(&self) -> f64 {
        if self.rows() == 0 || self.cols() == 0 {
            return 0.0;
        }
        self.fold(f64::INFINITY, f64::min)
    }

    /// Entrywise l1 norm.
    pub fn sum_abs(&self) -> f64 {
        self.fold(0.0, |acc, v| acc + v.abs())
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        let mut acc = 0.0f64;
        for j in 0..self.cols() {
            for (&a, &b) in self
                .mat
                .col_as_slice(j)
                .iter()
                .zip(other.mat.col_as_slice(j))
            {
                acc = acc.max((a - b).abs());
            }
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        (0..self.cols()).all(|j| self.mat.col_as_slice(j).iter().all(|v| v.is_finite()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows().min(self.cols()))
            .map(|i| self.mat[(i, i)])
            .collect()
    }

    pub fn zero_diagonal(&mut self) {
        for i in 0..self.rows().min(self.cols()) {
            self.mat[(i, i)] = 0.0;
        }
    }

    pub fn count_nonzero(&self) -> usize {
        (0..self.cols())
            .map(|j| self.mat.col_as_slice(j).iter().filter(|v| **v != 0.0).count())
            .sum()
    }
}

/// Sparse nonnegative user-item matrix.
///
/// Entries are held twice, once compressed by user and once by item, so that
/// both row scans (ranking) and column scans (item similarity) are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct UserItemMatrix {
    n_users: usize,
    n_items: usize,
    row_ptr: Vec<usize>,
    row_items: Vec<usize>,
    row_values: Vec<f64>,
    col_ptr: Vec<usize>,
    col_users: Vec<usize>,
    col_values: Vec<f64>,
}

impl UserItemMatrix {
    /// Validates and indexes `(user, item, value)` triplets.
    ///
    /// Values must be finite and strictly positive; absent pairs are zeros.
    pub fn new(
        n_users: usize,
        n_items: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = entries.into_iter().collect();
        for &(u, i, v) in &entries {
            if u >= n_users || i >= n_items {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({u}, {i}) outside {n_users}x{n_items}"
                )));
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({u}, {i}) has non-positive or non-finite value {v}"
                )));
            }
        }
        entries.sort_by_key(|&(u, i, _)| (u, i));
        if let Some(w) = entries
            .windows(2)
            .find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
        {
            return Err(Error::InvalidMatrix(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }

        let mut row_ptr = vec![0usize; n_users + 1];
        for &(u, _, _) in &entries {
            row_ptr[u + 1] += 1;
        }
        for u in 0..n_users {
            row_ptr[u + 1] += row_ptr[u];
        }
        let row_items = entries.iter().map(|e| e.1).collect();
        let row_values = entries.iter().map(|e| e.2).collect();

        let mut col_ptr = vec![0usize; n_items + 1];
        for &(_, i, _) in &entries {
            col_ptr[i + 1] += 1;
        }
        for i in 0..n_items {
            col_ptr[i + 1] += col_ptr[i];
        }
        let mut fill = col_ptr.clone();
        let mut col_users = vec![0usize; entries.len()];
        let mut col_values = vec![0.0; entries.len()];
        // Entries are user-sorted, so each column comes out user-sorted too.
        for &(u, i, v) in &entries {
            let slot = fill[i];
            col_users[slot] = u;
            col_values[slot] = v;
            fill[i] += 1;
        }

        Ok(Self {
            n_users,
            n_items,
            row_ptr,
            row_items,
            row_values,
            col_ptr,
            col_users,
            col_values,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn nnz(&self) -> usize {
        self.row_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    pub fn density(&self) -> f64 {
        let cells = self.n_users * self.n_items;
        if cells == 0 {
            0.0
        } else {
            self.nnz() as f64 / cells as f64
        }
    }

    /// Items rated by `user` (ascending) and their values.
    pub fn user_row(&self, user: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[user]..self.row_ptr[user + 1];
        (&self.row_items[r.clone()], &self.row_values[r])
    }

    /// Users who rated `item` (ascending) and their values.
    pub fn item_column(&self, item: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[item]..self.col_ptr[item + 1];
        (&self.col_users[r.clone()], &self.col_values[r])
    }

    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        let (items, values) = self.user_row(user);
        items.binary_search(&item).ok().map(|k| values[k])
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.get(user, item).is_some()
    }

    /// All entries in (user, item) order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_users).flat_map(move |u| {
            let (items, values) = self.user_row(u);
            items.iter().zip(values).map(move |(&i, &v)| (u, i, v))
        })
    }

    /// Same support with every value set to one.
    pub fn binarized(&self) -> Self {
        let mut out = self.clone();
        out.row_values.iter_mut().for_each(|v| *v = 1.0);
        out.col_values.iter_mut().for_each(|v| *v = 1.0);
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_items)
            .map(|i| self.item_column(i).1.iter().sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.row_values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mean of the stored values (zero when empty).
    pub fn mean_value(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.row_values.iter().sum::<f64>() / self.nnz() as f64
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_users, self.n_items);
        for (u, i, v) in self.entries() {
            out.mat[(u, i)] = v;
        }
        out
    }

    /// Dense product `X * rhs`.
    pub fn times_dense(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_items, rhs.rows(), "X*W dimension mismatch");
        let mut out = DenseMatrix::zeros(self.n_users, rhs.cols());
        for j in 0..rhs.cols() {
            let w = rhs.mat.col_as_slice(j);
            let dst = out.mat.col_as_slice_mut(j);
            for (u, slot) in dst.iter_mut().enumerate() {
                let (items, values) = self.user_row(u);
                *slot = items.iter().zip(values).map(|(&k, &x)| x * w[k]).sum();
            }
        }
        out
    }

    /// `||X - X * rhs||_F^2`, computed without materializing the residual.
    pub fn reconstruction_error_sq(&self, rhs: &DenseMatrix) -> f64 {
        assert_eq!((self.n_items, self.n_items), rhs.shape());
        let mut total = 0.0;
        for j in 0..rhs.cols() {
            let w = rhs.mat.col_as_slice(j);
            for u in 0..self.n_users {
                let (items, values) = self.user_row(u);
                let pred: f64 = items.iter().zip(values).map(|(&k, &x)| x * w[k]).sum();
                let actual = self.get(u, j).unwrap_or(0.0);
                total += (actual - pred) * (actual - pred);
            }
        }
        total
    }
}

/// Singular value decomposition `A = U * diag(sigma) * V^T`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `U`, orthonormal columns (rows x rows).
    pub left_vectors: DenseMatrix,
    /// Non-increasing and nonnegative; length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// `V`, orthonormal columns (cols x cols).
    pub right_vectors: DenseMatrix,
}

impl SvdResult {
    /// `U * diag(values) * V^T` over the leading `values.len()` singular triplets.
    pub fn recompose(&self, values: &[f64]) -> DenseMatrix {
        let k = values.len();
        assert!(k <= self.singular_values.len());
        let u = self.left_vectors.as_faer().subcols(0, k);
        let v = self.right_vectors.as_faer().subcols(0, k);
        let mut scaled = u.to_owned();
        for (j, &s) in values.iter().enumerate() {
            for x in scaled.col_as_slice_mut(j) {
                *x *= s;
            }
        }
        DenseMatrix::from_mat(scaled * v.transpose())
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.recompose(&self.singular_values)
    }
}

/// `X^T X` for the sparse user-item matrix.
pub fn gram(x: &UserItemMatrix) -> DenseMatrix {
    let n = x.n_items();
    let mut g = Mat::<f64>::zeros(n, n);
    for u in 0..x.n_users() {
        let (items, values) = x.user_row(u);
        for (a, (&i, &xi)) in items.iter().zip(values).enumerate() {
            for (&j, &xj) in items[a..].iter().zip(&values[a..]) {
                g[(i, j)] += xi * xj;
            }
        }
    }
    // Row items are ascending, so only the upper triangle was filled.
    for j in 0..n {
        for i in (j + 1)..n {
            g[(i, j)] = g[(j, i)];
        }
    }
    DenseMatrix::from_mat(g)
}

/// Solves `A * Z = B` for symmetric positive-definite `A` with one Cholesky
/// factorization shared across all columns of `B`.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != a.cols() || a.rows() != b.rows() {
        return Err(Error::InvalidMatrix(format!(
            "solve_spd: A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let factor = a.mat.llt(Side::Lower).map_err(|e| match e {
        faer::linalg::solvers::LltError::NonPositivePivot { index } => {
            Error::NotPositiveDefinite { pivot: index }
        }
    })?;
    let z = factor.solve(&b.mat);
    let out = DenseMatrix::from_mat(z);
    if !out.is_finite() {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    Ok(out)
}

/// Full singular value decomposition.
pub fn svd(a: &DenseMatrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::InvalidMatrix("svd of non-finite matrix".into()));
    }
    let dec = a.mat.svd().map_err(|_| Error::ConvergenceFailure)?;
    let singular_values: Vec<f64> = dec
        .S()
        .column_vector()
        .iter()
        .map(|&s| s.max(0.0))
        .collect();
    let out = SvdResult {
        left_vectors: DenseMatrix::from_mat(dec.U().to_owned()),
        singular_values,
        right_vectors: DenseMatrix::from_mat(dec.V().to_owned()),
    };
    if !(out.left_vectors.is_finite() && out.right_vectors.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    Ok(out)
}

/// Singular values of a square matrix from the eigenvalues of `A^T A`.
///
/// Cheaper than a full SVD and accurate to about `sqrt(eps) * ||A||` for the
/// smallest values, which is enough for monitoring the rank surrogate.
pub fn singular_values_from_gram(a: &DenseMatrix) -> Result<Vec<f64>> {
    let ata = a.mat.transpose() * &a.mat;
    let mut eig = ata
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::ConvergenceFailure)?;
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig.into_iter().map(|e| e.max(0.0).sqrt()).collect())
}
