//! Transfer-matrix, λ-sweep and ROC-study drivers.
//!
//! Cells are independent and run through [`Exec`]; each cell's pipeline is
//! single-threaded and results are collected in cell order, so reports do
//! not depend on the degree of parallelism.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{check_lambdas, CellSpec, CorpusSource, ExperimentConfig, Method};
use super::report::{
    DomainSide, IterationSummary, ProjectedPoint, ProjectionDump, RocEntry, SweepEntry, TestResult, TransferReport,
};
use crate::adapt::{adapt_embedding, l2_normalize_rows, subspace_align, AdaptationModel, AdaptationParams, JointEmbedding, ModelExport};
use crate::classify::{accuracy, confusion, nn_fit, roc_curve, NnModel};
use crate::error::{Error, Result};
use crate::ingest::{build_domain_with, load_manifest, DomainDataset, RawCorpus};
use crate::numlin::Matrix;
use crate::par::Exec;
use crate::signal_synth::{synth_dataset_with, FaultClass, FaultSpec};

/// Every recording the config needs: one normal recording per condition
/// plus each faulty class at each size.
pub fn fault_set(sizes: &[f64]) -> Vec<FaultSpec> {
    let mut faults = vec![FaultSpec::normal()];
    for &size in sizes {
        faults.extend(FaultSpec::class_set(size).into_iter().filter(|f| f.class != FaultClass::NO));
    }
    faults
}

pub fn load_corpus(config: &ExperimentConfig, exec: Exec) -> Result<RawCorpus> {
    match &config.corpus {
        CorpusSource::Synthetic(_) => {
            let params = config.synth_params().expect("synthetic corpus");
            synth_dataset_with(
                &config.conditions,
                &fault_set(&config.fault_sizes),
                config.samples_per_class,
                &params,
                exec,
            )
        }
        CorpusSource::Manifest(m) => load_manifest(&m.path, m.sample_rate_hz),
    }
}

/// Labeled feature matrices keyed by (condition id, size index).
pub struct Domains {
    sizes: Vec<f64>,
    map: BTreeMap<(String, usize), DomainDataset>,
}

impl Domains {
    /// Builds the domains touched by `cells`.
    pub fn build(config: &ExperimentConfig, corpus: &RawCorpus, cells: &[CellSpec], exec: Exec) -> Result<Self> {
        let sizes = config.fault_sizes.clone();
        let mut keys: Vec<(String, usize)> = Vec::new();
        for cell in cells {
            let s = size_index(&sizes, cell.fault_size_in)?;
            for id in [&cell.train, &cell.test] {
                let key = (id.clone(), s);
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
        let built = exec.try_map(&keys, |(id, s)| {
            let cond = config.condition(id)?;
            build_domain_with(corpus, cond, sizes[*s], config.windows(), true, Exec::Sequential)
        })?;
        Ok(Domains {
            map: keys.into_iter().zip(built).collect(),
            sizes,
        })
    }

    pub fn get(&self, condition: &str, size: f64) -> Result<&DomainDataset> {
        let s = size_index(&self.sizes, size)?;
        self.map
            .get(&(condition.to_string(), s))
            .ok_or_else(|| Error::Config(format!("no domain for `{condition}` at {size} in")))
    }

    fn pair(&self, cell: &CellSpec) -> Result<(&DomainDataset, &DomainDataset)> {
        Ok((self.get(&cell.train, cell.fault_size_in)?, self.get(&cell.test, cell.fault_size_in)?))
    }
}

fn size_index(sizes: &[f64], size: f64) -> Result<usize> {
    sizes
        .iter()
        .position(|&s| s == size)
        .ok_or_else(|| Error::Config(format!("fault size {size} is not configured")))
}

fn labels(d: &DomainDataset) -> Result<&[FaultClass]> {
    d.labels()
        .ok_or_else(|| Error::InvalidArgument(format!("domain {} is unlabeled", d.condition.id)))
}

/// One-NN trained on the columns of `train`, applied to the columns of
/// `test`.
fn nn_columns(train: &Matrix, y_tr: &[FaultClass], test: &Matrix) -> Result<Vec<FaultClass>> {
    nn_fit(train, y_tr)?.with_exec(Exec::Sequential).nn_predict(test)
}

pub fn baseline_predict(train: &DomainDataset, test: &DomainDataset) -> Result<Vec<FaultClass>> {
    let x_tr = l2_normalize_rows(&train.x).transpose();
    let x_te = l2_normalize_rows(&test.x).transpose();
    nn_columns(&x_tr, labels(train)?, &x_te)
}

/// 1-NN on the leading `k` joint principal components.
pub fn nn_na_predict(embedding: &JointEmbedding, y_tr: &[FaultClass], k: usize) -> Result<Vec<FaultClass>> {
    let (v_tr, v_te) = embedding.split(&embedding.leading(k));
    nn_columns(&v_tr, y_tr, &v_te)
}

/// 1-NN after aligning the normalized domains' `k`-dimensional subspaces.
pub fn nn_sa_predict(train: &DomainDataset, test: &DomainDataset, k: usize) -> Result<Vec<FaultClass>> {
    let y_tr = labels(train)?;
    let tr = DomainDataset::new(l2_normalize_rows(&train.x), Some(y_tr.to_vec()), train.condition.clone())?;
    let te = DomainDataset::new(l2_normalize_rows(&test.x), None, test.condition.clone())?;
    let aligned = subspace_align(&tr, &te, k)?;
    nn_columns(&aligned.train.transpose(), y_tr, &aligned.test.transpose())
}

fn embed(train: &DomainDataset, test: &DomainDataset, params: &AdaptationParams) -> Result<JointEmbedding> {
    JointEmbedding::new(&train.x, &test.x, params.pca_dim)
}

fn datf(embedding: &JointEmbedding, y_tr: &[FaultClass], params: &AdaptationParams) -> Result<AdaptationModel> {
    adapt_embedding::<NnModel, _>(embedding, y_tr, params, |_| {})
}

/// A fitted DATF model with the cell it belongs to.
#[derive(Clone, Debug)]
pub struct CellModel {
    pub cell: CellSpec,
    pub model: ModelExport,
}

/// Output of [`run_transfer_matrix_with`]: the report plus the fitted models
/// when the config asks for them.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: TransferReport,
    pub models: Vec<CellModel>,
}

/// Writes each model as `<size>_<train>_<test>.json` under `dir`.
pub fn write_models(models: &[CellModel], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    models
        .iter()
        .map(|m| {
            let path = dir.join(format!("{}_{}_{}.json", m.cell.fault_size_in, m.cell.train, m.cell.test));
            let json = serde_json::to_string_pretty(&m.model)? + "\n";
            std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

struct CellOutcome {
    tests: Vec<TestResult>,
    projection: Option<ProjectionDump>,
    model: Option<CellModel>,
}

fn run_cell(config: &ExperimentConfig, domains: &Domains, cell: &CellSpec) -> Result<CellOutcome> {
    let (train, test) = domains.pair(cell)?;
    let y_tr = labels(train)?;
    let y_te = labels(test)?;
    let params = &config.adaptation;
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();

    let needs_embedding = methods.iter().any(|m| matches!(m, Method::NnNa | Method::Datf));
    let t0 = Instant::now();
    let embedding = needs_embedding.then(|| embed(train, test, params)).transpose()?;
    let embed_time = t0.elapsed().as_secs_f64();

    let mut out = CellOutcome {
        tests: Vec::with_capacity(methods.len()),
        projection: None,
        model: None,
    };
    for method in methods {
        let start = Instant::now();
        let mut history = Vec::new();
        let predicted = match method {
            Method::Baseline => baseline_predict(train, test)?,
            Method::NnNa => nn_na_predict(embedding.as_ref().expect("embedded"), y_tr, params.k)?,
            Method::NnSa => nn_sa_predict(train, test, params.k)?,
            Method::Datf => {
                let emb = embedding.as_ref().expect("embedded");
                let model = datf(emb, y_tr, params)?;
                for (iteration, rec) in model.history.iter().enumerate() {
                    history.push(IterationSummary {
                        iteration,
                        marginal_mmd: rec.marginal_mmd,
                        pseudo_label_accuracy: accuracy(&rec.pseudo_labels, y_te)?,
                    });
                }
                if config.projection_dump {
                    out.projection = Some(projection_dump(cell, &model, y_tr, y_te));
                }
                if config.export_models {
                    out.model = Some(CellModel {
                        cell: cell.clone(),
                        model: model.export(),
                    });
                }
                model.predictions().to_vec()
            }
        };
        let mut runtime = start.elapsed().as_secs_f64();
        if matches!(method, Method::NnNa | Method::Datf) {
            runtime += embed_time;
        }
        out.tests.push(TestResult {
            train: cell.train.clone(),
            test: cell.test.clone(),
            fault_size_in: cell.fault_size_in,
            method,
            accuracy: accuracy(&predicted, y_te)?,
            confusion: confusion(&predicted, y_te)?,
            runtime_s: config.record_runtime.then_some(runtime),
            history,
        });
    }
    Ok(out)
}

fn projection_dump(cell: &CellSpec, model: &AdaptationModel, y_tr: &[FaultClass], y_te: &[FaultClass]) -> ProjectionDump {
    let comp = |v: &Matrix, c: usize, j: usize| if c < v.nrows() { v.get(c, j) } else { 0.0 };
    let side = |v: &Matrix, y: &[FaultClass], domain: DomainSide| {
        (0..v.ncols())
            .map(|j| ProjectedPoint {
                domain,
                label: y[j],
                c1: comp(v, 0, j),
                c2: comp(v, 1, j),
            })
            .collect::<Vec<_>>()
    };
    let mut points = side(&model.v_tr, y_tr, DomainSide::Train);
    points.extend(side(&model.v_te, y_te, DomainSide::Test));
    ProjectionDump {
        train: cell.train.clone(),
        test: cell.test.clone(),
        fault_size_in: cell.fault_size_in,
        points,
    }
}

pub fn run_transfer_matrix(config: &ExperimentConfig) -> Result<TransferReport> {
    Ok(run_transfer_matrix_with(config, Exec::default())?.report)
}

/// Runs every configured method on every configured cell.
pub fn run_transfer_matrix_with(config: &ExperimentConfig, exec: Exec) -> Result<RunOutput> {
    config.validate()?;
    let cells = config.run_cells()?;
    let corpus = load_corpus(config, exec)?;
    let domains = Domains::build(config, &corpus, &cells, exec)?;
    drop(corpus);
    run_cells_on(config, &domains, &cells, exec)
}

/// [`run_transfer_matrix_with`] on prebuilt domains.
pub fn run_cells_on(config: &ExperimentConfig, domains: &Domains, cells: &[CellSpec], exec: Exec) -> Result<RunOutput> {
    let outcomes = exec.try_map(cells, |cell| run_cell(config, domains, cell))?;
    let mut report = TransferReport::empty(config.clone());
    let mut models = Vec::new();
    for o in outcomes {
        report.tests.extend(o.tests);
        report.projections.extend(o.projection);
        models.extend(o.model);
    }
    Ok(RunOutput { report, models })
}

pub fn lambda_sweep(config: &ExperimentConfig, lambdas: &[f64]) -> Result<TransferReport> {
    lambda_sweep_with(config, lambdas, Exec::default())
}

/// DATF accuracy on every configured cell for each λ; other parameters
/// fixed. Entries are grouped by λ, cells in report order within a group.
pub fn lambda_sweep_with(config: &ExperimentConfig, lambdas: &[f64], exec: Exec) -> Result<TransferReport> {
    check_lambdas(lambdas)?;
    config.validate()?;
    let cells = config.run_cells()?;
    let corpus = load_corpus(config, exec)?;
    let domains = Domains::build(config, &corpus, &cells, exec)?;
    drop(corpus);
    sweep_on(config, &domains, &cells, lambdas, exec)
}

pub fn sweep_on(
    config: &ExperimentConfig,
    domains: &Domains,
    cells: &[CellSpec],
    lambdas: &[f64],
    exec: Exec,
) -> Result<TransferReport> {
    check_lambdas(lambdas)?;
    let per_cell = exec.try_map(cells, |cell| -> Result<Vec<f64>> {
        let (train, test) = domains.pair(cell)?;
        let (y_tr, y_te) = (labels(train)?, labels(test)?);
        let embedding = embed(train, test, &config.adaptation)?;
        lambdas
            .iter()
            .map(|&lambda| {
                let params = AdaptationParams { lambda, ..config.adaptation };
                accuracy(datf(&embedding, y_tr, &params)?.predictions(), y_te)
            })
            .collect()
    })?;
    let mut report = TransferReport::empty(config.clone());
    for (l, &lambda) in lambdas.iter().enumerate() {
        for (cell, accs) in cells.iter().zip(&per_cell) {
            report.sweep.push(SweepEntry {
                lambda,
                train: cell.train.clone(),
                test: cell.test.clone(),
                fault_size_in: cell.fault_size_in,
                accuracy: accs[l],
            });
        }
    }
    Ok(report)
}

pub fn roc_study(config: &ExperimentConfig, iterations: &[usize]) -> Result<TransferReport> {
    roc_study_with(config, iterations, Exec::default())
}

/// One-vs-rest ROC per class on the configured ROC cells, at each requested
/// refinement iteration (0 is the marginal-only solve).
pub fn roc_study_with(config: &ExperimentConfig, iterations: &[usize], exec: Exec) -> Result<TransferReport> {
    config.validate()?;
    let cells = config.roc_cells()?;
    let corpus = load_corpus(config, exec)?;
    let domains = Domains::build(config, &corpus, &cells, exec)?;
    drop(corpus);
    roc_on(config, &domains, &cells, iterations, exec)
}

pub fn roc_on(
    config: &ExperimentConfig,
    domains: &Domains,
    cells: &[CellSpec],
    iterations: &[usize],
    exec: Exec,
) -> Result<TransferReport> {
    let params = &config.adaptation;
    if let Some(&bad) = iterations.iter().find(|&&i| i > params.iterations) {
        return Err(Error::InvalidArgument(format!(
            "iteration {bad} outside 0..={}",
            params.iterations
        )));
    }
    let mut wanted = iterations.to_vec();
    wanted.sort_unstable();
    wanted.dedup();

    let per_cell = exec.try_map(cells, |cell| -> Result<Vec<RocEntry>> {
        let (train, test) = domains.pair(cell)?;
        let (y_tr, y_te) = (labels(train)?, labels(test)?);
        let embedding = embed(train, test, params)?;
        let mut entries = Vec::new();
        let mut failure = None;
        adapt_embedding::<NnModel, _>(&embedding, y_tr, params, |snap| {
            if failure.is_some() || !wanted.contains(&snap.iteration) {
                return;
            }
            match iteration_roc(cell, snap.iteration, snap.v_tr, snap.y_tr, snap.v_te, y_te) {
                Ok(e) => entries.extend(e),
                Err(e) => failure = Some(e),
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(entries),
        }
    })?;
    let mut report = TransferReport::empty(config.clone());
    report.roc = per_cell.into_iter().flatten().collect();
    Ok(report)
}

fn iteration_roc(
    cell: &CellSpec,
    iteration: usize,
    v_tr: &Matrix,
    y_tr: &[FaultClass],
    v_te: &Matrix,
    y_te: &[FaultClass],
) -> Result<Vec<RocEntry>> {
    let model = nn_fit(v_tr, y_tr)?.with_exec(Exec::Sequential);
    let mut entries = Vec::new();
    for class in FaultClass::ALL {
        if !y_tr.contains(&class) || !y_te.contains(&class) {
            continue;
        }
        let scores = model.nn_scores(v_te, class)?;
        let truth: Vec<bool> = y_te.iter().map(|&y| y == class).collect();
        let curve = roc_curve(&scores, &truth)?;
        entries.push(RocEntry {
            train: cell.train.clone(),
            test: cell.test.clone(),
            fault_size_in: cell.fault_size_in,
            iteration,
            class,
            auc: curve.auc,
            points: curve.points,
        });
    }
    Ok(entries)
}
