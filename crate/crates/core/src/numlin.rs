//! Dense linear algebra: a finite-checked matrix type, symmetric and
//! generalized symmetric eigensolvers, and PCA.
//!
//! Dense products and the symmetric tridiagonal eigensolver run on `faer`
//! (sequential, so every decomposition is bit-reproducible). The generalized
//! problem is reduced to a standard one through a Cholesky factor computed
//! here.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by the symmetric solvers.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// `‖S v − λ v‖ ≤ EIG_RESIDUAL_TOL · max(1, ‖S‖_F)` for [`sym_eig`].
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;
/// Generalized residual and R-orthonormality bound for [`gen_eig`].
pub const GEN_EIG_TOL: f64 = 1e-6;
/// Jitter added to a numerically rank-deficient right-hand matrix:
/// `JITTER_EPS · trace(R) / d · I`.
pub const JITTER_EPS: f64 = 1e-9;

/// Dense real matrix with finite entries.
#[derive(Clone, Debug)]
pub struct Matrix(Mat<f64>);

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
            && (0..self.ncols()).all(|j| self.col(j) == other.col(j))
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix(Mat::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(Mat::identity(n, n))
    }

    pub fn from_diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Builds from row-major data, rejecting NaN/Inf.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_fn(rows, cols, |i, j| data[i * cols + j])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} entries, expected {ncols}",
                rows[bad].len()
            )));
        }
        Self::from_fn(rows.len(), ncols, |i, j| rows[i][j])
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_faer(Mat::from_fn(rows, cols, f))
    }

    pub fn from_faer(m: Mat<f64>) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Matrix(m))
    }

    /// Wraps the result of arithmetic on finite inputs.
    pub(crate) fn wrap(m: Mat<f64>) -> Self {
        debug_assert!(Self::from_faer(m.clone()).is_ok());
        Matrix(m)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_faer(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    /// Column `j` as a contiguous slice (storage is column-major).
    pub fn col(&self, j: usize) -> &[f64] {
        self.0
            .col(j)
            .try_as_col_major()
            .expect("owned faer matrices store columns contiguously")
            .as_slice()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols()).map(|j| self.0[(i, j)]).collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nrows() * self.ncols());
        for i in 0..self.nrows() {
            out.extend((0..self.ncols()).map(|j| self.0[(i, j)]));
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix(self.0.transpose().to_owned())
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        Matrix::wrap(product(self.as_faer(), rhs.as_faer()))
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        Matrix::wrap(product(self.as_faer().transpose(), rhs.as_faer()))
    }

    /// `self · rhsᵀ`.
    pub fn matmul_t(&self, rhs: &Matrix) -> Matrix {
        Matrix::wrap(product(self.as_faer(), rhs.as_faer().transpose()))
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "add: shape mismatch");
        Matrix::wrap(&self.0 + &rhs.0)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "sub: shape mismatch");
        Matrix::wrap(&self.0 - &rhs.0)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::wrap(Mat::from_fn(self.nrows(), self.ncols(), |i, j| s * self.0[(i, j)]))
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Matrix {
        Matrix(self.0.subcols(start, end - start).to_owned())
    }

    /// Rows `start..end` as a new matrix.
    pub fn rows(&self, start: usize, end: usize) -> Matrix {
        Matrix(self.0.subrows(start, end - start).to_owned())
    }

    /// `[self | rhs]`.
    pub fn hstack(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.nrows(), rhs.nrows(), "hstack: row mismatch");
        let split = self.ncols();
        Matrix(Mat::from_fn(self.nrows(), split + rhs.ncols(), |i, j| {
            if j < split {
                self.0[(i, j)]
            } else {
                rhs.0[(i, j - split)]
            }
        }))
    }

    pub fn trace(&self) -> f64 {
        (0..self.nrows().min(self.ncols())).map(|i| self.0[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm_l2()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.ncols() {
            for &x in self.col(j) {
                m = m.max(x.abs());
            }
        }
        m
    }

    /// Largest `|a_ij − a_ji|`; infinite for non-square input.
    pub fn max_asymmetry(&self) -> f64 {
        if self.nrows() != self.ncols() {
            return f64::INFINITY;
        }
        let n = self.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in (j + 1)..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol * self.max_abs().max(1.0)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let n = self.nrows();
        Matrix(Mat::from_fn(n, n, |i, j| 0.5 * (self.0[(i, j)] + self.0[(j, i)])))
    }
}

fn product(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Mat<f64> {
    assert_eq!(lhs.ncols(), rhs.nrows(), "matmul: inner dimension mismatch");
    let mut out = Mat::zeros(lhs.nrows(), rhs.ncols());
    matmul(out.as_mut(), Accum::Replace, lhs, rhs, 1.0, Par::Seq);
    out
}

/// Row-major export used by JSON model files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix> for MatrixData {
    fn from(m: &Matrix) -> Self {
        MatrixData {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.to_row_major(),
        }
    }
}

impl TryFrom<&MatrixData> for Matrix {
    type Error = Error;

    fn try_from(m: &MatrixData) -> Result<Self> {
        Matrix::from_row_major(m.rows, m.cols, &m.data)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit norm; largest-magnitude component positive.
    pub vector: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigOrder {
    Largest,
    Smallest,
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn apply_sign_convention(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `H = I − (1/n) 1 1ᵀ`.
pub fn centering_matrix(n: usize) -> Result<Matrix> {
    if n < 1 {
        return Err(Error::InvalidArgument("centering matrix needs n >= 1".into()));
    }
    let inv = 1.0 / n as f64;
    Matrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// `X H`: subtracts each row's mean across columns. Equivalent to multiplying
/// by [`centering_matrix`] without forming it.
pub fn center_columns(x: &Matrix) -> Matrix {
    let (d, n) = x.shape();
    let means: Vec<f64> = (0..d)
        .map(|i| (0..n).map(|j| x.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    Matrix::wrap(Mat::from_fn(d, n, |i, j| x.get(i, j) - means[i]))
}

fn check_symmetric(s: &Matrix, what: &str) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let asym = s.max_asymmetry();
    if asym > SYMMETRY_TOL * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues ascending with the matching unit eigenvectors as columns.
fn full_decomposition(s: &Matrix) -> Result<(Vec<f64>, Mat<f64>)> {
    let sym = s.symmetrized();
    let evd = sym
        .0
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence)?;
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    Ok((values, evd.U().to_owned()))
}

fn select_order(values: &[f64], order: EigOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let by_value = match order {
            EigOrder::Smallest => values[a].total_cmp(&values[b]),
            EigOrder::Largest => values[b].total_cmp(&values[a]),
        };
        by_value.then(a.cmp(&b))
    });
    idx
}

/// The `k` extreme eigenpairs of a symmetric matrix.
pub fn sym_eig(s: &Matrix, k: usize, order: EigOrder) -> Result<Vec<EigenPair>> {
    check_symmetric(s, "sym_eig input")?;
    let n = s.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let (values, vectors) = full_decomposition(s)?;
    Ok(select_order(&values, order)
        .into_iter()
        .take(k)
        .map(|i| {
            let mut vector: Vec<f64> = vectors.col(i).iter().copied().collect();
            apply_sign_convention(&mut vector);
            EigenPair {
                value: values[i],
                vector,
            }
        })
        .collect())
}

/// Result of the generalized problem `L a = λ R a`.
#[derive(Clone, Debug)]
pub struct GenEig {
    /// `d × k`, columns R-orthonormal.
    pub vectors: Matrix,
    /// Ascending.
    pub values: Vec<f64>,
}

/// Lower Cholesky factor of `a + shift·I`, row-major. Pivots at or below
/// `min_pivot` count as a failure.
fn cholesky(a: &Matrix, shift: f64, min_pivot: f64) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a.get(j, j) + shift;
        for p in 0..j {
            diag -= l[j * n + p] * l[j * n + p];
        }
        if diag <= min_pivot || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `C y = b` in place for lower-triangular row-major `C`.
fn forward_substitute(c: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= c[i * n + p] * b[p];
        }
        b[i] = s / c[i * n + i];
    }
}

/// Solves `Cᵀ y = b` in place for lower-triangular row-major `C`.
fn backward_substitute_transposed(c: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in (i + 1)..n {
            s -= c[p * n + i] * b[p];
        }
        b[i] = s / c[i * n + i];
    }
}

/// `k` smallest generalized eigenpairs of the symmetric pair `(L, R)`,
/// `R` positive semi-definite. `R` is factored as `C Cᵀ` and the problem is
/// solved as the standard eigenproblem of `C⁻¹ L C⁻ᵀ`. When a pivot falls to
/// the jitter level `JITTER_EPS · trace(R)/d` (numerically rank-deficient
/// `R`), the factorization is redone on `R` plus that jitter times `I`.
pub fn gen_eig(l: &Matrix, r: &Matrix, k: usize) -> Result<GenEig> {
    check_symmetric(l, "left-hand matrix")?;
    check_symmetric(r, "right-hand matrix")?;
    if l.shape() != r.shape() {
        return Err(Error::DimensionMismatch(format!(
            "L is {}x{}, R is {}x{}",
            l.nrows(),
            l.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let d = l.nrows();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={d}")));
    }

    let jitter = JITTER_EPS * r.trace() / d as f64;
    let r_sym = Matrix::wrap(Mat::from_fn(d, d, |i, j| 0.5 * (r.get(i, j) + r.get(j, i))));
    let c = match cholesky(&r_sym, 0.0, jitter) {
        Ok(c) => c,
        Err(_) => cholesky(&r_sym, jitter, 0.0)?,
    };

    // Y = C⁻¹ L (column by column), then S = C⁻¹ Yᵀ = C⁻¹ L C⁻ᵀ.
    let mut y = vec![0.0; d * d];
    let mut buf = vec![0.0; d];
    for j in 0..d {
        buf.copy_from_slice(l.col(j));
        forward_substitute(&c, d, &mut buf);
        for i in 0..d {
            y[i * d + j] = buf[i];
        }
    }
    let mut s = vec![0.0; d * d];
    for j in 0..d {
        buf.copy_from_slice(&y[j * d..(j + 1) * d]);
        forward_substitute(&c, d, &mut buf);
        for i in 0..d {
            s[i * d + j] = buf[i];
        }
    }
    let s = Matrix::wrap(Mat::from_fn(d, d, |i, j| 0.5 * (s[i * d + j] + s[j * d + i])));

    let pairs = sym_eig(&s, k, EigOrder::Smallest)?;
    let mut vectors = Mat::zeros(d, k);
    let mut values = Vec::with_capacity(k);
    for (col, pair) in pairs.into_iter().enumerate() {
        buf.copy_from_slice(&pair.vector);
        backward_substitute_transposed(&c, d, &mut buf);
        apply_sign_convention(&mut buf);
        for i in 0..d {
            vectors[(i, col)] = buf[i];
        }
        values.push(pair.value);
    }
    Ok(GenEig {
        vectors: Matrix::from_faer(vectors)?,
        values,
    })
}

#[derive(Clone, Debug)]
pub struct PcaEmbedding {
    /// `d × k`, orthonormal columns: top-k eigenvectors of `X H Xᵀ`.
    pub basis: Matrix,
    /// `k × n`: `basisᵀ · X`.
    pub projected: Matrix,
    /// Eigenvalues of `X H Xᵀ` belonging to the basis columns, descending.
    pub variances: Vec<f64>,
}

/// Trace-maximizing projection: `max tr(Aᵀ X H Xᵀ A)` s.t. `AᵀA = I`.
///
/// `x` is `d × n` with samples as columns. When `d > n` the eigenvectors are
/// recovered from the `n × n` Gram matrix of the centered data, falling back
/// to the covariance route if a requested component has no variance.
pub fn pca_embed(x: &Matrix, k: usize) -> Result<PcaEmbedding> {
    let (d, n) = x.shape();
    if k == 0 || k > d.min(n) {
        return Err(Error::InvalidArgument(format!(
            "PCA dimension {k} outside 1..={}",
            d.min(n)
        )));
    }
    let centered = center_columns(x);
    let (basis, variances) = if d > n {
        match pca_basis_gram(&centered, k)? {
            Some(found) => found,
            None => pca_basis_covariance(&centered, k)?,
        }
    } else {
        pca_basis_covariance(&centered, k)?
    };
    let projected = basis.t_matmul(x);
    Ok(PcaEmbedding {
        basis,
        projected,
        variances,
    })
}

fn pca_basis_covariance(centered: &Matrix, k: usize) -> Result<(Matrix, Vec<f64>)> {
    let cov = centered.matmul_t(centered);
    let pairs = sym_eig(&cov.symmetrized(), k, EigOrder::Largest)?;
    let d = centered.nrows();
    let basis = Matrix::from_fn(d, k, |i, j| pairs[j].vector[i])?;
    Ok((basis, pairs.iter().map(|p| p.value).collect()))
}

fn pca_basis_gram(centered: &Matrix, k: usize) -> Result<Option<(Matrix, Vec<f64>)>> {
    let gram = centered.t_matmul(centered).symmetrized();
    let pairs = sym_eig(&gram, k, EigOrder::Largest)?;
    let top = pairs[0].value;
    if pairs.iter().any(|p| !(p.value > 1e-10 * top)) {
        return Ok(None);
    }
    let u = Matrix::from_fn(gram.nrows(), k, |i, j| pairs[j].vector[i])?;
    let raw = centered.matmul(&u);
    let d = centered.nrows();
    let mut basis = Mat::zeros(d, k);
    for j in 0..k {
        let mut v: Vec<f64> = raw.col(j).to_vec();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        apply_sign_convention(&mut v);
        for i in 0..d {
            basis[(i, j)] = v[i];
        }
    }
    Ok(Some((
        Matrix::from_faer(basis)?,
        pairs.iter().map(|p| p.value).collect(),
    )))
}
