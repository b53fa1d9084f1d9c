//! Marginal and class-conditional MMD coefficient matrices.
//!
//! Samples are indexed source first (`0..n_tr`) then target
//! (`n_tr..n_tr+n_te`). With class-wise cross denominators every matrix here
//! is `e eᵀ` for a signed weight vector `e`, which is how the solver consumes
//! them; the dense builders exist for inspection and testing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::Matrix;
use crate::signal_synth::FaultClass;

/// Denominator of the source/target cross block of a conditional matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossTerm {
    /// `−1/(n_tr^c · n_te^c)`: keeps zero row sums and PSD.
    #[default]
    ClassCounts,
    /// `−1/(n_tr · n_te)` with global domain sizes. Rows no longer sum to
    /// zero unless the class covers both domains entirely.
    GlobalCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmdKind {
    Marginal,
    Conditional(FaultClass),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmdMatrix {
    pub matrix: Matrix,
    pub kind: MmdKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMmd {
    pub mmd: MmdMatrix,
    /// Set when the class has no pseudo-labeled target samples; the matrix is
    /// then all zeros.
    pub skipped: bool,
}

fn outer(e: &[f64]) -> Matrix {
    let n = e.len();
    Matrix::from_fn(n, n, |i, j| e[i] * e[j]).expect("finite weights")
}

/// `e` with `M_m = e eᵀ`: `1/n_tr` on source entries, `−1/n_te` on target.
pub fn marginal_weights(n_tr: usize, n_te: usize) -> Result<Vec<f64>> {
    if n_tr == 0 || n_te == 0 {
        return Err(Error::InvalidArgument(format!(
            "MMD needs non-empty domains, got n_tr = {n_tr}, n_te = {n_te}"
        )));
    }
    let (a, b) = (1.0 / n_tr as f64, -1.0 / n_te as f64);
    Ok((0..n_tr).map(|_| a).chain((0..n_te).map(|_| b)).collect())
}

/// `e` with `M_c = e eᵀ`, or `None` when `class` has no target samples.
pub fn conditional_weights(
    y_tr: &[FaultClass],
    y_te: &[FaultClass],
    class: FaultClass,
) -> Result<Option<Vec<f64>>> {
    if y_tr.is_empty() || y_te.is_empty() {
        return Err(Error::InvalidArgument("label vectors must be non-empty".into()));
    }
    let n_tr_c = y_tr.iter().filter(|&&y| y == class).count();
    if n_tr_c == 0 {
        return Err(Error::ClassAbsent(class));
    }
    let n_te_c = y_te.iter().filter(|&&y| y == class).count();
    if n_te_c == 0 {
        return Ok(None);
    }
    let (a, b) = (1.0 / n_tr_c as f64, -1.0 / n_te_c as f64);
    Ok(Some(
        y_tr.iter()
            .map(|&y| if y == class { a } else { 0.0 })
            .chain(y_te.iter().map(|&y| if y == class { b } else { 0.0 }))
            .collect(),
    ))
}

pub fn mmd_marginal_matrix(n_tr: usize, n_te: usize) -> Result<MmdMatrix> {
    Ok(MmdMatrix {
        matrix: outer(&marginal_weights(n_tr, n_te)?),
        kind: MmdKind::Marginal,
    })
}

pub fn mmd_conditional_matrix(
    y_tr: &[FaultClass],
    y_te_pseudo: &[FaultClass],
    class: FaultClass,
) -> Result<ConditionalMmd> {
    mmd_conditional_matrix_with(y_tr, y_te_pseudo, class, CrossTerm::ClassCounts)
}

pub fn mmd_conditional_matrix_with(
    y_tr: &[FaultClass],
    y_te_pseudo: &[FaultClass],
    class: FaultClass,
    cross: CrossTerm,
) -> Result<ConditionalMmd> {
    let n = y_tr.len() + y_te_pseudo.len();
    let kind = MmdKind::Conditional(class);
    let Some(e) = conditional_weights(y_tr, y_te_pseudo, class)? else {
        return Ok(ConditionalMmd {
            mmd: MmdMatrix {
                matrix: Matrix::zeros(n, n),
                kind,
            },
            skipped: true,
        });
    };
    let mut matrix = outer(&e);
    if cross == CrossTerm::GlobalCounts {
        let n_tr = y_tr.len();
        let global = -1.0 / (n_tr * y_te_pseudo.len()) as f64;
        matrix = Matrix::from_fn(n, n, |i, j| {
            let cross_block = (i < n_tr) != (j < n_tr);
            if cross_block && e[i] != 0.0 && e[j] != 0.0 {
                global
            } else {
                matrix.get(i, j)
            }
        })?;
    }
    Ok(ConditionalMmd {
        mmd: MmdMatrix { matrix, kind },
        skipped: false,
    })
}

/// Weight vectors whose outer products sum to the joint objective matrix:
/// the marginal term, plus one term per training class that has
/// pseudo-labeled target samples.
pub fn joint_mmd_factors(
    y_tr: &[FaultClass],
    n_te: usize,
    y_te_pseudo: Option<&[FaultClass]>,
) -> Result<Vec<Vec<f64>>> {
    let mut factors = vec![marginal_weights(y_tr.len(), n_te)?];
    if let Some(pseudo) = y_te_pseudo {
        check_pseudo_len(pseudo, n_te)?;
        for class in training_classes(y_tr) {
            if let Some(e) = conditional_weights(y_tr, pseudo, class)? {
                factors.push(e);
            }
        }
    }
    Ok(factors)
}

/// `M_m + Σ_c M_c`. Without pseudo-labels this is `M_m` alone.
pub fn joint_mmd_sum(y_tr: &[FaultClass], n_te: usize, y_te_pseudo: Option<&[FaultClass]>) -> Result<Matrix> {
    joint_mmd_sum_with(y_tr, n_te, y_te_pseudo, CrossTerm::ClassCounts)
}

pub fn joint_mmd_sum_with(
    y_tr: &[FaultClass],
    n_te: usize,
    y_te_pseudo: Option<&[FaultClass]>,
    cross: CrossTerm,
) -> Result<Matrix> {
    let mut sum = mmd_marginal_matrix(y_tr.len(), n_te)?.matrix;
    if let Some(pseudo) = y_te_pseudo {
        check_pseudo_len(pseudo, n_te)?;
        for class in training_classes(y_tr) {
            let c = mmd_conditional_matrix_with(y_tr, pseudo, class, cross)?;
            if !c.skipped {
                sum = sum.add(&c.mmd.matrix);
            }
        }
    }
    Ok(sum)
}

fn check_pseudo_len(pseudo: &[FaultClass], n_te: usize) -> Result<()> {
    if pseudo.len() != n_te {
        return Err(Error::DimensionMismatch(format!(
            "{} pseudo-labels for {n_te} target samples",
            pseudo.len()
        )));
    }
    Ok(())
}

fn training_classes(y_tr: &[FaultClass]) -> impl Iterator<Item = FaultClass> + '_ {
    FaultClass::ALL.into_iter().filter(|c| y_tr.contains(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use FaultClass::*;

    fn rows(m: &Matrix) -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i)).collect()
    }

    #[test]
    fn marginal_small_sizes() {
        let m = mmd_marginal_matrix(1, 1).unwrap();
        assert_eq!(rows(&m.matrix), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert_eq!(m.kind, MmdKind::Marginal);

        let m = mmd_marginal_matrix(2, 2).unwrap().matrix;
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i < 2) == (j < 2) { 0.25 } else { -0.25 };
                assert_eq!(m.get(i, j), want);
            }
        }
        assert!(mmd_marginal_matrix(0, 3).is_err());
    }

    #[test]
    fn marginal_rows_sum_to_zero() {
        let m = mmd_marginal_matrix(7, 3).unwrap().matrix;
        for i in 0..10 {
            assert!(m.row(i).iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_hand_cases() {
        let c = mmd_conditional_matrix(&[IF], &[IF], IF).unwrap();
        assert!(!c.skipped);
        assert_eq!(rows(&c.mmd.matrix), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);

        let c = mmd_conditional_matrix(&[IF, IF], &[IF], IF).unwrap().mmd.matrix;
        assert_eq!(c.get(0, 1), 0.25);
        assert_eq!(c.get(2, 2), 1.0);
        assert_eq!(c.get(0, 2), -0.5);
        for i in 0..3 {
            assert!(c.row(i).iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_skip_and_absent() {
        let c = mmd_conditional_matrix(&[IF, OF], &[OF, OF], IF).unwrap();
        assert!(c.skipped);
        assert_eq!(c.mmd.matrix.max_abs(), 0.0);
        assert!(matches!(
            mmd_conditional_matrix(&[IF], &[IF], BF),
            Err(Error::ClassAbsent(BF))
        ));
    }

    #[test]
    fn conditional_only_touches_its_class() {
        let y_tr = [NO, IF, IF, OF];
        let y_te = [IF, NO, OF];
        let m = mmd_conditional_matrix(&y_tr, &y_te, IF).unwrap().mmd.matrix;
        let member = [false, true, true, false, true, false, false];
        for i in 0..7 {
            for j in 0..7 {
                if !(member[i] && member[j]) {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn global_cross_term_uses_domain_sizes() {
        let m = mmd_conditional_matrix_with(&[IF, IF], &[IF], IF, CrossTerm::GlobalCounts)
            .unwrap()
            .mmd
            .matrix;
        assert_eq!(m.get(0, 2), -0.5);
        let m = mmd_conditional_matrix_with(&[IF, NO], &[IF, NO], IF, CrossTerm::GlobalCounts)
            .unwrap()
            .mmd
            .matrix;
        assert_eq!(m.get(0, 2), -0.25);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 3), 0.0);
    }

    #[test]
    fn joint_sum_first_iteration_is_marginal() {
        let y_tr = [NO, IF, OF];
        let j = joint_mmd_sum(&y_tr, 4, None).unwrap();
        assert_eq!(j, mmd_marginal_matrix(3, 4).unwrap().matrix);
    }

    #[test]
    fn joint_sum_single_pseudo_class() {
        let y_tr = [NO, IF, IF, OF];
        let pseudo = [IF, IF];
        let j = joint_mmd_sum(&y_tr, 2, Some(&pseudo)).unwrap();
        let want = mmd_marginal_matrix(4, 2)
            .unwrap()
            .matrix
            .add(&mmd_conditional_matrix(&y_tr, &pseudo, IF).unwrap().mmd.matrix);
        assert_eq!(j, want);
        assert!(joint_mmd_sum(&y_tr, 3, Some(&pseudo)).is_err());
    }

    #[test]
    fn factors_reproduce_dense_sum() {
        let y_tr = [NO, IF, NO, IF, BF];
        let pseudo = [IF, IF, NO, OF];
        let dense = joint_mmd_sum(&y_tr, 4, Some(&pseudo)).unwrap();
        let mut from_factors = Matrix::zeros(9, 9);
        for e in joint_mmd_factors(&y_tr, 4, Some(&pseudo)).unwrap() {
            from_factors = from_factors.add(&outer(&e));
        }
        assert!(dense.sub(&from_factors).max_abs() < 1e-15);
    }
}
