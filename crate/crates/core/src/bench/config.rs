//! Experiment configuration: one JSON document per run.
//!
//! Every field has a default, so `{}` is a complete config describing the
//! full synthetic 48-test protocol. Unknown keys are rejected by name.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapt::AdaptationParams;
use crate::error::{Error, Result};
use crate::ingest::{WindowSpec, DEFAULT_HOP, DEFAULT_WINDOW_LEN};
use crate::signal_synth::{OperatingCondition, SynthParams, STANDARD_SIZES_IN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// 1-NN on the normalized spectra, no projection.
    Baseline,
    /// 1-NN after joint PCA, no adaptation.
    NnNa,
    /// 1-NN after subspace alignment.
    NnSa,
    Datf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Baseline, Method::NnNa, Method::NnSa, Method::Datf];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::NnNa => "nn_na",
            Method::NnSa => "nn_sa",
            Method::Datf => "datf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSource {
    /// Resolved against the config file's directory when relative.
    pub path: PathBuf,
    pub sample_rate_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Synthetic(SynthParams),
    Manifest(ManifestSource),
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(SynthParams::default())
    }
}

/// One (train, test, size) transfer task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub train: String,
    pub test: String,
    pub fault_size_in: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub conditions: Vec<OperatingCondition>,
    pub fault_sizes: Vec<f64>,
    pub methods: Vec<Method>,
    pub adaptation: AdaptationParams,
    /// Master seed for synthetic corpora; replaces the seed inside the
    /// synthetic parameters.
    pub seed: u64,
    pub formats: Vec<ReportFormat>,
    pub window_len: usize,
    pub hop: usize,
    pub samples_per_class: usize,
    /// Restricts a run to these cells; all of them when absent.
    pub cells: Option<Vec<CellSpec>>,
    /// Grid for `sweep`.
    pub lambdas: Vec<f64>,
    /// Iterations recorded by `roc`; `[0, 1, last]` when absent.
    pub roc_iterations: Option<Vec<usize>>,
    /// Cells studied by `roc`; the second condition to the third at the
    /// first size when absent.
    pub roc_cells: Option<Vec<CellSpec>>,
    /// Dump the first two adapted components of every sample for DATF.
    pub projection_dump: bool,
    /// Wall-clock time per test. Off by default because it makes reports
    /// differ between otherwise identical runs.
    pub record_runtime: bool,
    /// Write each fitted DATF model to `models/` in the output directory.
    pub export_models: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: CorpusSource::default(),
            conditions: OperatingCondition::standard_set(),
            fault_sizes: STANDARD_SIZES_IN.to_vec(),
            methods: Method::ALL.to_vec(),
            adaptation: AdaptationParams::default(),
            seed: 0,
            formats: vec![ReportFormat::Json, ReportFormat::Csv],
            window_len: DEFAULT_WINDOW_LEN,
            hop: DEFAULT_HOP,
            samples_per_class: 200,
            cells: None,
            lambdas: vec![0.05, 0.1, 0.2, 0.5],
            roc_iterations: None,
            roc_cells: None,
            projection_dump: true,
            record_runtime: false,
            export_models: false,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file. A relative manifest path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let CorpusSource::Manifest(m) = &mut config.corpus {
            if m.path.is_relative() {
                if let Some(dir) = path.parent() {
                    m.path = dir.join(&m.path);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn windows(&self) -> WindowSpec {
        WindowSpec {
            window_len: self.window_len,
            hop: self.hop,
            samples_per_class: self.samples_per_class,
        }
    }

    /// Synthetic parameters with the config's seed and window geometry, or
    /// `None` for a manifest corpus.
    pub fn synth_params(&self) -> Option<SynthParams> {
        match &self.corpus {
            CorpusSource::Synthetic(p) => Some(SynthParams {
                seed: self.seed,
                window_len: self.window_len,
                hop: self.hop,
                ..p.clone()
            }),
            CorpusSource::Manifest(_) => None,
        }
    }

    pub fn condition(&self, id: &str) -> Result<&OperatingCondition> {
        self.conditions
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::Config(format!("unknown condition `{id}`")))
    }

    /// Cells of a run in report order: size, then test condition, then
    /// train condition, each in config order.
    pub fn run_cells(&self) -> Result<Vec<CellSpec>> {
        let all = self.all_cells();
        match &self.cells {
            None => Ok(all),
            Some(wanted) => self.ordered_subset(wanted, &all),
        }
    }

    pub fn roc_cells(&self) -> Result<Vec<CellSpec>> {
        let all = self.all_cells();
        match &self.roc_cells {
            Some(wanted) => self.ordered_subset(wanted, &all),
            None => {
                let ids: Vec<&str> = self.conditions.iter().map(|c| c.id.as_str()).collect();
                let (train, test) = match ids.len() {
                    0 => return Ok(Vec::new()),
                    1 => (ids[0], ids[0]),
                    2 => (ids[0], ids[1]),
                    _ => (ids[1], ids[2]),
                };
                Ok(self
                    .fault_sizes
                    .first()
                    .map(|&s| CellSpec {
                        train: train.into(),
                        test: test.into(),
                        fault_size_in: s,
                    })
                    .into_iter()
                    .collect())
            }
        }
    }

    pub fn roc_iterations(&self) -> Vec<usize> {
        self.roc_iterations.clone().unwrap_or_else(|| {
            let mut its = vec![0, 1, self.adaptation.iterations];
            its.dedup();
            its
        })
    }

    fn all_cells(&self) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        for &size in &self.fault_sizes {
            for test in &self.conditions {
                for train in &self.conditions {
                    cells.push(CellSpec {
                        train: train.id.clone(),
                        test: test.id.clone(),
                        fault_size_in: size,
                    });
                }
            }
        }
        cells
    }

    fn ordered_subset(&self, wanted: &[CellSpec], all: &[CellSpec]) -> Result<Vec<CellSpec>> {
        for w in wanted {
            self.condition(&w.train)?;
            self.condition(&w.test)?;
            if !all.iter().any(|c| c == w) {
                return Err(Error::Config(format!(
                    "cell {} -> {} at {} in is not among the configured fault sizes",
                    w.train, w.test, w.fault_size_in
                )));
            }
        }
        Ok(all.iter().filter(|c| wanted.contains(c)).cloned().collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::Config("`conditions` is empty".into()));
        }
        for (i, c) in self.conditions.iter().enumerate() {
            c.validate()?;
            if self.conditions[..i].iter().any(|o| o.id == c.id) {
                return Err(Error::Config(format!("duplicate condition id `{}`", c.id)));
            }
        }
        if self.fault_sizes.is_empty() {
            return Err(Error::Config("`fault_sizes` is empty".into()));
        }
        if let Some(s) = self.fault_sizes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Config(format!("fault size {s} must be > 0")));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("`methods` is empty".into()));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("`formats` is empty".into()));
        }
        if self.window_len == 0 || self.hop == 0 || self.samples_per_class == 0 {
            return Err(Error::Config(
                "`window_len`, `hop` and `samples_per_class` must be > 0".into(),
            ));
        }
        self.adaptation.validate()?;
        check_lambdas(&self.lambdas)?;
        if let Some(it) = self.roc_iterations().iter().find(|&&i| i > self.adaptation.iterations) {
            return Err(Error::Config(format!(
                "ROC iteration {it} exceeds the {} configured iterations",
                self.adaptation.iterations
            )));
        }
        if let Some(p) = self.synth_params() {
            p.validate()?;
        }
        if let CorpusSource::Manifest(m) = &self.corpus {
            if !(m.sample_rate_hz.is_finite() && m.sample_rate_hz > 0.0) {
                return Err(Error::Config("manifest `sample_rate_hz` must be > 0".into()));
            }
        }
        self.run_cells()?;
        self.roc_cells()?;
        Ok(())
    }
}

/// λ must lie strictly inside (0, 1): at 0 the objective has no regularizer
/// and the problem is ill-defined, at 1 the MMD term vanishes.
pub fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    match lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        Some(l) => Err(Error::InvalidArgument(format!(
            "lambda = {l} outside (0, 1); the optimization problem is ill-defined there"
        ))),
        None => Ok(()),
    }
}
