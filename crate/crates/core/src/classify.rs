//! Exact 1-nearest-neighbor classification and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::Matrix;
use crate::par::Exec;
use crate::signal_synth::FaultClass;

/// Something that can be trained on labeled columns and label new columns.
/// The adaptation loop is generic over this; 1-NN is the stock choice.
pub trait LabelPredictor: Sized {
    fn fit(points: &Matrix, labels: &[FaultClass]) -> Result<Self>;
    fn predict(&self, queries: &Matrix) -> Result<Vec<FaultClass>>;
}

/// Brute-force Euclidean 1-NN over reference columns.
#[derive(Clone, Debug)]
pub struct NnModel {
    points: Matrix,
    labels: Vec<FaultClass>,
    exec: Exec,
}

/// `points` is `k × n` with one reference per column.
pub fn nn_fit(points: &Matrix, labels: &[FaultClass]) -> Result<NnModel> {
    if points.ncols() == 0 {
        return Err(Error::InvalidArgument("1-NN needs at least one reference point".into()));
    }
    if points.ncols() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reference points, {} labels",
            points.ncols(),
            labels.len()
        )));
    }
    Ok(NnModel {
        points: points.clone(),
        labels: labels.to_vec(),
        exec: Exec::default(),
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl NnModel {
    /// Sets how queries are distributed across threads.
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn labels(&self) -> &[FaultClass] {
        &self.labels
    }

    fn check_queries(&self, queries: &Matrix) -> Result<()> {
        if queries.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "queries have dimension {}, model has {}",
                queries.nrows(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Label of the nearest reference; ties go to the lowest reference index.
    pub fn nn_predict(&self, queries: &Matrix) -> Result<Vec<FaultClass>> {
        self.check_queries(queries)?;
        Ok(self.exec.map_range(queries.ncols(), |q| {
            let query = queries.col(q);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for r in 0..self.points.ncols() {
                let d = squared_distance(self.points.col(r), query);
                if d < best_d {
                    best_d = d;
                    best = r;
                }
            }
            self.labels[best]
        }))
    }

    /// `d_other − d_c`: distance to the nearest non-`class` reference minus
    /// distance to the nearest `class` reference. Positive means `class` wins.
    pub fn nn_scores(&self, queries: &Matrix, class: FaultClass) -> Result<Vec<f64>> {
        self.check_queries(queries)?;
        if !self.labels.contains(&class) {
            return Err(Error::ClassAbsent(class));
        }
        Ok(self.exec.map_range(queries.ncols(), |q| {
            let query = queries.col(q);
            let mut own = f64::INFINITY;
            let mut other = f64::INFINITY;
            for r in 0..self.points.ncols() {
                let d = squared_distance(self.points.col(r), query);
                if self.labels[r] == class {
                    own = own.min(d);
                } else {
                    other = other.min(d);
                }
            }
            // A model holding only `class` has no competitor: score by closeness.
            if other.is_infinite() {
                -own.sqrt()
            } else {
                other.sqrt() - own.sqrt()
            }
        }))
    }
}

impl LabelPredictor for NnModel {
    fn fit(points: &Matrix, labels: &[FaultClass]) -> Result<Self> {
        nn_fit(points, labels).map(|m| m.with_exec(Exec::Sequential))
    }

    fn predict(&self, queries: &Matrix) -> Result<Vec<FaultClass>> {
        self.nn_predict(queries)
    }
}

fn check_lengths(predicted: &[FaultClass], truth: &[FaultClass]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions, {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn accuracy(predicted: &[FaultClass], truth: &[FaultClass]) -> Result<f64> {
    check_lengths(predicted, truth)?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty label set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Rows are truth, columns predicted, both in `FaultClass::ALL` order.
pub type Confusion = [[usize; FaultClass::COUNT]; FaultClass::COUNT];

pub fn confusion(predicted: &[FaultClass], truth: &[FaultClass]) -> Result<Confusion> {
    check_lengths(predicted, truth)?;
    let mut m = [[0usize; FaultClass::COUNT]; FaultClass::COUNT];
    for (p, t) in predicted.iter().zip(truth) {
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps the threshold down through every distinct score; tied scores
/// enter together. Area by the trapezoid rule.
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores, {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("ROC scores must be finite".into()));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidArgument(
            "ROC needs at least one positive and one negative".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n, tp as f64 / p));
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}
