//! The regularized generalized eigenproblem behind the adaptation matrix.
//!
//! Minimizing `(1−λ) Σ_c tr(Aᵀ X M_c Xᵀ A) + λ ‖A‖_F²` subject to
//! `Aᵀ X H Xᵀ A = I` leads to
//! `((1−λ) X M Xᵀ + λ I) A = X H Xᵀ A Λ`, solved for the `k` smallest `Λ`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::numlin::{center_columns, gen_eig, Matrix};

#[derive(Clone, Debug)]
pub struct AdaptationSolution {
    /// `d × k` adaptation matrix.
    pub a: Matrix,
    /// Generalized eigenvalues, ascending.
    pub lambdas: Vec<f64>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must lie strictly inside (0, 1)"
        )));
    }
    Ok(())
}

/// `X H Xᵀ`, the variance constraint matrix.
pub fn scatter_matrix(x_d: &Matrix) -> Matrix {
    let c = center_columns(x_d);
    c.matmul_t(&c).symmetrized()
}

fn regularize(mmd_term: &Matrix, lambda: f64) -> Matrix {
    let d = mmd_term.nrows();
    Matrix::from_fn(d, d, |i, j| {
        let v = (1.0 - lambda) * mmd_term.get(i, j);
        if i == j { v + lambda } else { v }
    })
    .expect("finite")
}

/// Solves for `A` given an explicit `n × n` MMD matrix sum.
pub fn solve_adaptation(x_d: &Matrix, m_sum: &Matrix, lambda: f64, k: usize) -> Result<AdaptationSolution> {
    check_lambda(lambda)?;
    let n = x_d.ncols();
    if m_sum.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "MMD matrix is {}x{}, data has {n} samples",
            m_sum.nrows(),
            m_sum.ncols()
        )));
    }
    let mmd_term = x_d.matmul(m_sum).matmul_t(x_d).symmetrized();
    finish(x_d, &mmd_term, lambda, k)
}

/// Same solve with `M = Σ e eᵀ` given as its weight vectors, so that
/// `X M Xᵀ = Σ (X e)(X e)ᵀ` never forms an `n × n` matrix.
pub fn solve_adaptation_factored(
    x_d: &Matrix,
    factors: &[Vec<f64>],
    lambda: f64,
    k: usize,
) -> Result<AdaptationSolution> {
    check_lambda(lambda)?;
    let (d, n) = x_d.shape();
    let mut mmd_term = Mat::<f64>::zeros(d, d);
    for e in factors {
        if e.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "MMD weight vector of length {}, data has {n} samples",
                e.len()
            )));
        }
        let w = x_d.matmul(&Matrix::from_row_major(n, 1, e)?);
        let w = w.col(0);
        for j in 0..d {
            for i in 0..d {
                mmd_term[(i, j)] += w[i] * w[j];
            }
        }
    }
    finish(x_d, &Matrix::from_faer(mmd_term)?, lambda, k)
}

fn finish(x_d: &Matrix, mmd_term: &Matrix, lambda: f64, k: usize) -> Result<AdaptationSolution> {
    let d = x_d.nrows();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={d}")));
    }
    let l = regularize(mmd_term, lambda);
    let r = scatter_matrix(x_d);
    let g = gen_eig(&l, &r, k)?;
    Ok(AdaptationSolution {
        a: g.vectors,
        lambdas: g.values,
    })
}

/// Squared distance between the column means of `v_s` and `v_t`.
pub fn mmd_distance(v_s: &Matrix, v_t: &Matrix) -> Result<f64> {
    if v_s.ncols() == 0 || v_t.ncols() == 0 {
        return Err(Error::InvalidArgument("MMD of an empty sample set".into()));
    }
    if v_s.nrows() != v_t.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "embeddings of dimension {} and {}",
            v_s.nrows(),
            v_t.nrows()
        )));
    }
    let mean = |v: &Matrix, i: usize| (0..v.ncols()).map(|j| v.get(i, j)).sum::<f64>() / v.ncols() as f64;
    Ok((0..v_s.nrows())
        .map(|i| {
            let diff = mean(v_s, i) - mean(v_t, i);
            diff * diff
        })
        .sum())
}
