//! Report model and its JSON/CSV serializations.
//!
//! JSON output is one self-describing document (`report.json`) carrying the
//! schema tag, version and the config that produced it. CSV output is one
//! file per table, comma-separated, LF line endings, header row always
//! present, rows in report order. Floats are written in Rust's shortest
//! round-trip form, so identical reports give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, ReportFormat};
use crate::classify::Confusion;
use crate::error::{Error, Result};
use crate::signal_synth::FaultClass;

pub const REPORT_SCHEMA: &str = "bearing-transfer/report";
pub const REPORT_VERSION: u32 = 1;
pub const REPORT_JSON: &str = "report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub marginal_mmd: f64,
    /// Pseudo-label accuracy against the held-back test labels.
    pub pseudo_label_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub train: String,
    pub test: String,
    pub fault_size_in: f64,
    pub method: Method,
    pub accuracy: f64,
    /// Rows truth, columns predicted, classes in NO, IF, OF, BF order.
    pub confusion: Confusion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
    /// DATF only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<IterationSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub train: String,
    pub test: String,
    pub fault_size_in: f64,
    pub accuracy: f64,
}

/// One-vs-rest ROC of one class at one iteration of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocEntry {
    pub train: String,
    pub test: String,
    pub fault_size_in: f64,
    pub iteration: usize,
    pub class: FaultClass,
    pub auc: f64,
    /// `(false positive rate, true positive rate)`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSide {
    Train,
    Test,
}

impl DomainSide {
    fn as_str(self) -> &'static str {
        match self {
            DomainSide::Train => "train",
            DomainSide::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub domain: DomainSide,
    pub label: FaultClass,
    pub c1: f64,
    pub c2: f64,
}

/// First two adapted components of every sample of one DATF cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDump {
    pub train: String,
    pub test: String,
    pub fault_size_in: f64,
    pub points: Vec<ProjectedPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferReport {
    pub schema: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub tests: Vec<TestResult>,
    pub sweep: Vec<SweepEntry>,
    pub roc: Vec<RocEntry>,
    pub projections: Vec<ProjectionDump>,
}

impl TransferReport {
    pub fn empty(config: ExperimentConfig) -> Self {
        TransferReport {
            schema: REPORT_SCHEMA.into(),
            version: REPORT_VERSION,
            config,
            tests: Vec::new(),
            sweep: Vec::new(),
            roc: Vec::new(),
            projections: Vec::new(),
        }
    }

    /// Reads a `report.json`, checking the schema tag and version.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: TransferReport = serde_json::from_str(&text)?;
        if report.schema != REPORT_SCHEMA || report.version != REPORT_VERSION {
            return Err(Error::Config(format!(
                "{}: expected schema {REPORT_SCHEMA} v{REPORT_VERSION}, found {} v{}",
                path.display(),
                report.schema,
                report.version
            )));
        }
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Mean accuracy of `method` over off-diagonal (train ≠ test) tests.
    pub fn mean_off_diagonal(&self, method: Method) -> Option<f64> {
        mean(
            self.tests
                .iter()
                .filter(|t| t.method == method && t.train != t.test)
                .map(|t| t.accuracy),
        )
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Writes the requested formats into `out_dir` and returns the files
/// written, in a fixed order.
pub fn emit_report(report: &TransferReport, out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Json) {
        let path = out_dir.join(REPORT_JSON);
        fs::write(&path, report.to_json()?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    if formats.contains(&ReportFormat::Csv) {
        for (name, table) in csv_tables(report) {
            let path = out_dir.join(name);
            fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn cell_fields(size: f64, test: &str, train: &str) -> Vec<String> {
    vec![size.to_string(), test.to_string(), train.to_string()]
}

/// `(file name, contents)` for every CSV table.
pub fn csv_tables(report: &TransferReport) -> Vec<(&'static str, String)> {
    let accuracy = table(
        &["fault_size_in", "test", "train", "method", "accuracy", "runtime_s"],
        report.tests.iter().map(|t| {
            let mut r = cell_fields(t.fault_size_in, &t.test, &t.train);
            r.push(t.method.to_string());
            r.push(t.accuracy.to_string());
            r.push(t.runtime_s.map(|s| s.to_string()).unwrap_or_default());
            r
        }),
    );
    let confusion = table(
        &["fault_size_in", "test", "train", "method", "truth", "predicted", "count"],
        report.tests.iter().flat_map(|t| {
            FaultClass::ALL.into_iter().flat_map(move |truth| {
                FaultClass::ALL.into_iter().map(move |pred| {
                    let mut r = cell_fields(t.fault_size_in, &t.test, &t.train);
                    r.extend([
                        t.method.to_string(),
                        truth.to_string(),
                        pred.to_string(),
                        t.confusion[truth.index()][pred.index()].to_string(),
                    ]);
                    r
                })
            })
        }),
    );
    let history = table(
        &["fault_size_in", "test", "train", "method", "iteration", "marginal_mmd", "pseudo_label_accuracy"],
        report.tests.iter().flat_map(|t| {
            t.history.iter().map(move |h| {
                let mut r = cell_fields(t.fault_size_in, &t.test, &t.train);
                r.extend([
                    t.method.to_string(),
                    h.iteration.to_string(),
                    h.marginal_mmd.to_string(),
                    h.pseudo_label_accuracy.to_string(),
                ]);
                r
            })
        }),
    );
    let sweep = table(
        &["lambda", "fault_size_in", "test", "train", "accuracy"],
        report.sweep.iter().map(|s| {
            let mut r = vec![s.lambda.to_string()];
            r.extend(cell_fields(s.fault_size_in, &s.test, &s.train));
            r.push(s.accuracy.to_string());
            r
        }),
    );
    let roc = table(
        &["fault_size_in", "test", "train", "iteration", "class", "fpr", "tpr"],
        report.roc.iter().flat_map(|e| {
            e.points.iter().map(move |(fpr, tpr)| {
                let mut r = cell_fields(e.fault_size_in, &e.test, &e.train);
                r.extend([e.iteration.to_string(), e.class.to_string(), fpr.to_string(), tpr.to_string()]);
                r
            })
        }),
    );
    let roc_auc = table(
        &["fault_size_in", "test", "train", "iteration", "class", "auc"],
        report.roc.iter().map(|e| {
            let mut r = cell_fields(e.fault_size_in, &e.test, &e.train);
            r.extend([e.iteration.to_string(), e.class.to_string(), e.auc.to_string()]);
            r
        }),
    );
    let projections = table(
        &["fault_size_in", "test", "train", "domain", "index", "label", "c1", "c2"],
        report.projections.iter().flat_map(|p| {
            let mut per_side = [0usize; 2];
            p.points.iter().map(move |pt| {
                let slot = &mut per_side[pt.domain as usize];
                let index = *slot;
                *slot += 1;
                let mut r = cell_fields(p.fault_size_in, &p.test, &p.train);
                r.extend([
                    pt.domain.as_str().to_string(),
                    index.to_string(),
                    pt.label.to_string(),
                    pt.c1.to_string(),
                    pt.c2.to_string(),
                ]);
                r
            })
        }),
    );
    vec![
        ("accuracy.csv", accuracy),
        ("confusion.csv", confusion),
        ("history.csv", history),
        ("sweep.csv", sweep),
        ("roc.csv", roc),
        ("roc_auc.csv", roc_auc),
        ("projections.csv", projections),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TransferReport {
        let mut r = TransferReport::empty(ExperimentConfig::default());
        r.tests.push(TestResult {
            train: "L0".into(),
            test: "L1".into(),
            fault_size_in: 0.007,
            method: Method::Datf,
            accuracy: 0.75,
            confusion: [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 1, 0]],
            runtime_s: None,
            history: vec![IterationSummary {
                iteration: 0,
                marginal_mmd: 1e-3,
                pseudo_label_accuracy: 0.5,
            }],
        });
        r.projections.push(ProjectionDump {
            train: "L0".into(),
            test: "L1".into(),
            fault_size_in: 0.007,
            points: vec![
                ProjectedPoint { domain: DomainSide::Train, label: FaultClass::NO, c1: 0.1, c2: -0.2 },
                ProjectedPoint { domain: DomainSide::Test, label: FaultClass::IF, c1: 0.3, c2: 0.4 },
                ProjectedPoint { domain: DomainSide::Train, label: FaultClass::OF, c1: 0.0, c2: 1.0 },
            ],
        });
        r
    }

    #[test]
    fn empty_report_has_headers_only() {
        for (name, body) in csv_tables(&TransferReport::empty(ExperimentConfig::default())) {
            assert_eq!(body.lines().count(), 1, "{name}");
            assert!(body.ends_with('\n') && !body.contains('\r'));
        }
    }

    #[test]
    fn tables_have_expected_rows() {
        let tables = csv_tables(&sample());
        let get = |n: &str| tables.iter().find(|(name, _)| *name == n).unwrap().1.clone();
        assert_eq!(get("accuracy.csv"), "fault_size_in,test,train,method,accuracy,runtime_s\n0.007,L1,L0,datf,0.75,\n");
        assert_eq!(get("confusion.csv").lines().count(), 17);
        assert!(get("confusion.csv").contains("0.007,L1,L0,datf,BF,OF,1\n"));
        assert_eq!(get("history.csv").lines().nth(1).unwrap(), "0.007,L1,L0,datf,0,0.001,0.5");
        let proj = get("projections.csv");
        assert!(proj.contains(",train,1,OF,0,1\n"));
        assert!(proj.contains(",test,0,IF,0.3,0.4\n"));
    }

    #[test]
    fn json_round_trips_and_checks_schema() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample();
        let files = emit_report(&report, dir.path(), &[ReportFormat::Json]).unwrap();
        assert_eq!(files, vec![dir.path().join(REPORT_JSON)]);
        assert_eq!(TransferReport::load(&files[0]).unwrap(), report);

        let mut wrong = report;
        wrong.version = 99;
        let path = dir.path().join("wrong.json");
        fs::write(&path, wrong.to_json().unwrap()).unwrap();
        assert!(TransferReport::load(&path).is_err());
    }

    #[test]
    fn emitting_twice_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = emit_report(&sample(), a.path(), &[ReportFormat::Json, ReportFormat::Csv]).unwrap();
        let fb = emit_report(&sample(), b.path(), &[ReportFormat::Json, ReportFormat::Csv]).unwrap();
        assert_eq!(fa.len(), 8);
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn off_diagonal_mean_skips_diagonal() {
        let mut r = sample();
        let mut diag = r.tests[0].clone();
        diag.test = "L0".into();
        diag.accuracy = 1.0;
        r.tests.push(diag);
        assert_eq!(r.mean_off_diagonal(Method::Datf), Some(0.75));
        assert_eq!(r.mean_off_diagonal(Method::Baseline), None);
    }
}
