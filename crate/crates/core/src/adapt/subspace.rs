//! Subspace alignment: maps the source PCA basis onto the target's. Adapts
//! the marginal distribution only; used as a comparison method.

use crate::error::{Error, Result};
use crate::ingest::DomainDataset;
use crate::numlin::{pca_embed, Matrix};

/// `B_sᵀ B_t`.
pub fn alignment_matrix(b_s: &Matrix, b_t: &Matrix) -> Result<Matrix> {
    if b_s.shape() != b_t.shape() {
        return Err(Error::DimensionMismatch(format!(
            "bases are {}x{} and {}x{}",
            b_s.nrows(),
            b_s.ncols(),
            b_t.nrows(),
            b_t.ncols()
        )));
    }
    Ok(b_s.t_matmul(b_t))
}

#[derive(Clone, Debug)]
pub struct AlignedProjection {
    /// `n_tr × k`: `X_tr B_s (B_sᵀ B_t)`.
    pub train: Matrix,
    /// `n_te × k`: `X_te B_t`.
    pub test: Matrix,
    pub alignment: Matrix,
}

/// Projects both domains after aligning their `k`-dimensional PCA bases.
/// Features are used as given (rows are samples).
pub fn subspace_align(train: &DomainDataset, test: &DomainDataset, k: usize) -> Result<AlignedProjection> {
    let d = train.dim();
    if test.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "train features have dimension {d}, test {}",
            test.dim()
        )));
    }
    let limit = d.min(train.len()).min(test.len());
    if k == 0 || k > limit {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={limit}")));
    }
    let b_s = pca_embed(&train.x.transpose(), k)?.basis;
    let b_t = pca_embed(&test.x.transpose(), k)?.basis;
    let alignment = alignment_matrix(&b_s, &b_t)?;
    Ok(AlignedProjection {
        train: train.x.matmul(&b_s).matmul(&alignment),
        test: test.x.matmul(&b_t),
        alignment,
    })
}
