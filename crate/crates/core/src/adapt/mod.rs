//! Domain adaptation: MMD matrices, the adaptation solve, the pseudo-label
//! refinement loop and subspace alignment.

pub mod joint;
pub mod mmd;
pub mod solve;
pub mod subspace;

pub use joint::{
    adapt_embedding, datf_fit_predict, datf_fit_predict_nn, AdaptationModel, AdaptationParams, IterationRecord,
    IterationSnapshot, JointEmbedding, ModelExport,
};
pub use mmd::{
    joint_mmd_factors, joint_mmd_sum, joint_mmd_sum_with, mmd_conditional_matrix, mmd_conditional_matrix_with,
    mmd_marginal_matrix, ConditionalMmd, CrossTerm, MmdKind, MmdMatrix,
};
pub use solve::{mmd_distance, scatter_matrix, solve_adaptation, solve_adaptation_factored, AdaptationSolution};
pub use subspace::{alignment_matrix, subspace_align, AlignedProjection};

use crate::numlin::Matrix;

/// Scales each row to unit Euclidean norm; all-zero rows stay zero.
pub fn l2_normalize_rows(x: &Matrix) -> Matrix {
    let norms: Vec<f64> = (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if norms[i] > 0.0 {
            x.get(i, j) / norms[i]
        } else {
            0.0
        }
    })
    .expect("finite input")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_rows_and_keeps_zero_rows() {
        let x = Matrix::from_row_major(2, 2, &[3.0, 4.0, 0.0, 0.0]).unwrap();
        let n = l2_normalize_rows(&x);
        assert_eq!(n.row(0), vec![0.6, 0.8]);
        assert_eq!(n.row(1), vec![0.0, 0.0]);
    }
}
