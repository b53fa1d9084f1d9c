//! Joint marginal + conditional adaptation with pseudo-label refinement.
//!
//! Pipeline for one (train, test) pair:
//! 1. L2-normalize every sample, stack them as columns of `X_D`
//!    (train first), and reduce to `pca_dim` principal components.
//! 2. Solve with the marginal term only, project, and pseudo-label the test
//!    columns with a classifier trained on the projected training columns.
//!    This is iteration 0.
//! 3. For each further iteration rebuild the objective from the current
//!    pseudo-labels (marginal + one conditional term per class), re-solve,
//!    re-project and re-label.
//!
//! No randomness is involved; identical inputs give bit-identical models.

use serde::{Deserialize, Serialize};

use super::mmd::{joint_mmd_factors, joint_mmd_sum_with, CrossTerm};
use super::solve::{mmd_distance, solve_adaptation, solve_adaptation_factored, AdaptationSolution};
use super::l2_normalize_rows;
use crate::classify::{LabelPredictor, NnModel};
use crate::error::{Error, Result};
use crate::ingest::DomainDataset;
use crate::numlin::{center_columns, pca_embed, Matrix, MatrixData, PcaEmbedding};
use crate::signal_synth::FaultClass;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationParams {
    /// Dimension of the adapted subspace.
    pub k: usize,
    /// Weight of the `‖A‖_F²` regularizer, strictly inside (0, 1).
    pub lambda: f64,
    /// Refinement rounds after the marginal-only solve.
    pub iterations: usize,
    /// Principal components kept before adaptation.
    pub pca_dim: usize,
    pub cross_term: CrossTerm,
}

impl Default for AdaptationParams {
    fn default() -> Self {
        AdaptationParams {
            k: 100,
            lambda: 0.1,
            iterations: 10,
            pca_dim: 200,
            cross_term: CrossTerm::ClassCounts,
        }
    }
}

impl AdaptationParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.pca_dim == 0 {
            return Err(Error::InvalidArgument("k and pca_dim must be > 0".into()));
        }
        if self.k > self.pca_dim {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds pca_dim = {}",
                self.k, self.pca_dim
            )));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda = {} must lie strictly inside (0, 1)",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Normalized, stacked and PCA-reduced source/target data. Independent of
/// `λ`, `k` and the iteration count, so sweeps can share one.
#[derive(Clone, Debug)]
pub struct JointEmbedding {
    pub pca: PcaEmbedding,
    pub n_tr: usize,
    pub n_te: usize,
}

impl JointEmbedding {
    /// `train` and `test` hold one sample per row.
    pub fn new(train: &Matrix, test: &Matrix, dim: usize) -> Result<Self> {
        if train.ncols() != test.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "train features have dimension {}, test {}",
                train.ncols(),
                test.ncols()
            )));
        }
        let x_d = l2_normalize_rows(train).transpose().hstack(&l2_normalize_rows(test).transpose());
        Ok(JointEmbedding {
            pca: pca_embed(&x_d, dim)?,
            n_tr: train.nrows(),
            n_te: test.nrows(),
        })
    }

    pub fn dim(&self) -> usize {
        self.pca.projected.nrows()
    }

    /// First `dim` components of every sample (`dim × n`).
    pub fn leading(&self, dim: usize) -> Matrix {
        self.pca.projected.rows(0, dim)
    }

    pub fn split(&self, v: &Matrix) -> (Matrix, Matrix) {
        (v.columns(0, self.n_tr), v.columns(self.n_tr, self.n_tr + self.n_te))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub pseudo_labels: Vec<FaultClass>,
    /// `mmd_distance` between projected train and test at this iteration.
    pub marginal_mmd: f64,
}

/// Handed to observers after every solve.
pub struct IterationSnapshot<'a> {
    pub iteration: usize,
    pub v_tr: &'a Matrix,
    pub v_te: &'a Matrix,
    pub y_tr: &'a [FaultClass],
    pub pseudo_labels: &'a [FaultClass],
    pub marginal_mmd: f64,
}

#[derive(Clone, Debug)]
pub struct AdaptationModel {
    pub params: AdaptationParams,
    /// `d × k` with unit-norm columns, mapping L2-normalized input features
    /// to the adapted space.
    pub a: Matrix,
    pub v_tr: Matrix,
    pub v_te: Matrix,
    /// Entry 0 is the marginal-only solve; entry `i` is refinement round `i`.
    pub history: Vec<IterationRecord>,
}

impl AdaptationModel {
    pub fn predictions(&self) -> &[FaultClass] {
        &self.history.last().expect("history is never empty").pseudo_labels
    }

    pub fn export(&self) -> ModelExport {
        ModelExport {
            params: self.params,
            a: MatrixData::from(&self.a),
            history: self.history.clone(),
        }
    }
}

/// JSON model file: parameters, row-major `A`, and the iteration history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub params: AdaptationParams,
    pub a: MatrixData,
    pub history: Vec<IterationRecord>,
}

/// The MMD term `X M Xᵀ` is rescaled to the trace of the scatter matrix
/// `X H Xᵀ` before the solve. With unit-norm samples the raw term is orders
/// of magnitude smaller than `λ I`, which would reduce the problem to plain
/// PCA; matched to the data's total variance it dominates the regularizer
/// for any `λ` well inside (0, 1).
fn solve(
    z: &Matrix,
    y_tr: &[FaultClass],
    n_te: usize,
    pseudo: Option<&[FaultClass]>,
    params: &AdaptationParams,
) -> Result<AdaptationSolution> {
    let total_variance = center_columns(z).frobenius_norm().powi(2);
    match params.cross_term {
        CrossTerm::ClassCounts => {
            let mut factors = joint_mmd_factors(y_tr, n_te, pseudo)?;
            let mmd_trace: f64 = factors.iter().map(|e| weighted_sum_norm2(z, e)).sum();
            let s = mmd_scale(total_variance, mmd_trace).sqrt();
            for e in &mut factors {
                e.iter_mut().for_each(|v| *v *= s);
            }
            solve_adaptation_factored(z, &factors, params.lambda, params.k)
        }
        CrossTerm::GlobalCounts => {
            let m = joint_mmd_sum_with(y_tr, n_te, pseudo, CrossTerm::GlobalCounts)?;
            let mmd_trace = z.matmul(&m).matmul_t(z).trace();
            solve_adaptation(z, &m.scale(mmd_scale(total_variance, mmd_trace)), params.lambda, params.k)
        }
    }
}

/// `‖X e‖²`.
fn weighted_sum_norm2(z: &Matrix, e: &[f64]) -> f64 {
    (0..z.nrows())
        .map(|i| (0..z.ncols()).map(|j| z.get(i, j) * e[j]).sum::<f64>().powi(2))
        .sum()
}

/// Identical domains give a zero MMD term; leave it unscaled.
fn mmd_scale(total_variance: f64, mmd_trace: f64) -> f64 {
    if mmd_trace > f64::MIN_POSITIVE && total_variance > 0.0 {
        total_variance / mmd_trace
    } else {
        1.0
    }
}

/// Generalized eigenvectors come out `R`-orthonormal, which whitens every
/// direction to unit variance; 1-NN then weighs noise directions as heavily
/// as discriminative ones. Rescale each to unit Euclidean length instead.
fn normalize_columns(v: &Matrix) -> Matrix {
    l2_normalize_rows(&v.transpose()).transpose()
}

/// Runs the refinement loop on a precomputed embedding.
pub fn adapt_embedding<P, F>(
    embedding: &JointEmbedding,
    y_tr: &[FaultClass],
    params: &AdaptationParams,
    mut observer: F,
) -> Result<AdaptationModel>
where
    P: LabelPredictor,
    F: FnMut(&IterationSnapshot<'_>),
{
    params.validate()?;
    if y_tr.len() != embedding.n_tr {
        return Err(Error::DimensionMismatch(format!(
            "{} training labels for {} training samples",
            y_tr.len(),
            embedding.n_tr
        )));
    }
    if params.pca_dim > embedding.dim() {
        return Err(Error::InvalidArgument(format!(
            "pca_dim = {} exceeds the {} available components",
            params.pca_dim,
            embedding.dim()
        )));
    }
    let z = embedding.leading(params.pca_dim);
    let mut history: Vec<IterationRecord> = Vec::with_capacity(params.iterations + 1);
    let mut last = None;

    for iteration in 0..=params.iterations {
        let pseudo = history.last().map(|r| r.pseudo_labels.as_slice());
        let sol = solve(&z, y_tr, embedding.n_te, pseudo, params)?;
        let a = normalize_columns(&sol.a);
        let v = a.t_matmul(&z);
        let (v_tr, v_te) = embedding.split(&v);
        let labels = P::fit(&v_tr, y_tr)?.predict(&v_te)?;
        let marginal_mmd = mmd_distance(&v_tr, &v_te)?;
        observer(&IterationSnapshot {
            iteration,
            v_tr: &v_tr,
            v_te: &v_te,
            y_tr,
            pseudo_labels: &labels,
            marginal_mmd,
        });
        history.push(IterationRecord {
            pseudo_labels: labels,
            marginal_mmd,
        });
        last = Some((a, v_tr, v_te));
    }

    let (a, v_tr, v_te) = last.expect("at least one iteration");
    let basis = embedding.pca.basis.columns(0, params.pca_dim);
    Ok(AdaptationModel {
        params: *params,
        a: basis.matmul(&a),
        v_tr,
        v_te,
        history,
    })
}

/// Fits on a labeled training domain and an unlabeled test domain and
/// returns the final test-domain predictions with the fitted model.
pub fn datf_fit_predict<P: LabelPredictor>(
    train: &DomainDataset,
    test: &DomainDataset,
    params: &AdaptationParams,
) -> Result<(Vec<FaultClass>, AdaptationModel)> {
    params.validate()?;
    let y_tr = train
        .labels()
        .ok_or_else(|| Error::InvalidArgument("training domain must be labeled".into()))?;
    let embedding = JointEmbedding::new(&train.x, &test.x, params.pca_dim)?;
    let model = adapt_embedding::<P, _>(&embedding, y_tr, params, |_| {})?;
    Ok((model.predictions().to_vec(), model))
}

/// [`datf_fit_predict`] with the stock 1-NN classifier.
pub fn datf_fit_predict_nn(
    train: &DomainDataset,
    test: &DomainDataset,
    params: &AdaptationParams,
) -> Result<(Vec<FaultClass>, AdaptationModel)> {
    datf_fit_predict::<NnModel>(train, test, params)
}
