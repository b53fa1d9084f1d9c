//! Recording I/O, windowing, FFT amplitude features and domain assembly.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::Matrix;
use crate::par::Exec;
use crate::signal_synth::{FaultClass, FaultSpec, OperatingCondition};

pub const DEFAULT_WINDOW_LEN: usize = 4096;
pub const DEFAULT_HOP: usize = DEFAULT_WINDOW_LEN / 2;
/// Fault sizes closer than this are the same size.
const SIZE_MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("time series has no samples".into()));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument("sample rate must be > 0".into()));
        }
        Ok(TimeSeries {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleFormat {
    /// One value per line, '.' decimal separator.
    #[serde(rename = "csv")]
    Csv,
    /// Packed little-endian f32, no header.
    #[serde(rename = "raw-f32le")]
    RawF32Le,
    /// Packed little-endian f64, no header.
    #[serde(rename = "raw-f64le")]
    RawF64Le,
}

impl SampleFormat {
    fn extension(self) -> &'static str {
        match self {
            SampleFormat::Csv => "csv",
            SampleFormat::RawF32Le => "f32",
            SampleFormat::RawF64Le => "f64",
        }
    }
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(SampleFormat::Csv),
            "raw-f32le" => Ok(SampleFormat::RawF32Le),
            "raw-f64le" => Ok(SampleFormat::RawF64Le),
            _ => Err(Error::InvalidArgument(format!("unknown sample format {s:?}"))),
        }
    }
}

pub fn load_timeseries(path: &Path, format: SampleFormat, sample_rate_hz: f64) -> Result<TimeSeries> {
    let malformed = |token: String, location: String| Error::Malformed {
        path: path.to_path_buf(),
        token,
        location,
    };
    let samples = match format {
        SampleFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut out = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let token = line.trim();
                if token.is_empty() {
                    continue;
                }
                match token.parse::<f64>() {
                    Ok(v) if v.is_finite() => out.push(v),
                    _ => return Err(malformed(token.to_string(), format!("line {}", lineno + 1))),
                }
            }
            out
        }
        SampleFormat::RawF32Le | SampleFormat::RawF64Le => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let width = if format == SampleFormat::RawF32Le { 4 } else { 8 };
            let whole = bytes.len() - bytes.len() % width;
            if whole != bytes.len() {
                return Err(malformed(
                    format!("{} trailing bytes", bytes.len() - whole),
                    format!("byte offset {whole}"),
                ));
            }
            let mut out = Vec::with_capacity(bytes.len() / width);
            for (i, chunk) in bytes.chunks_exact(width).enumerate() {
                let v = if width == 4 {
                    f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")) as f64
                } else {
                    f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"))
                };
                if !v.is_finite() {
                    return Err(malformed(v.to_string(), format!("byte offset {}", i * width)));
                }
                out.push(v);
            }
            out
        }
    };
    if samples.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    TimeSeries::new(samples, sample_rate_hz)
}

pub fn write_timeseries(path: &Path, ts: &TimeSeries, format: SampleFormat) -> Result<()> {
    let bytes: Vec<u8> = match format {
        SampleFormat::Csv => {
            let mut s = String::with_capacity(ts.len() * 20);
            for v in ts.samples() {
                s.push_str(&v.to_string());
                s.push('\n');
            }
            s.into_bytes()
        }
        SampleFormat::RawF32Le => ts.samples().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect(),
        SampleFormat::RawF64Le => ts.samples().iter().flat_map(|v| v.to_le_bytes()).collect(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Contiguous windows of `window_len` starting every `hop` samples; the tail
/// that does not fill a window is dropped.
pub fn segment(ts: &TimeSeries, window_len: usize, hop: usize) -> Result<Vec<&[f64]>> {
    if window_len == 0 || hop == 0 {
        return Err(Error::InvalidArgument("window length and hop must be >= 1".into()));
    }
    let len = ts.len();
    if window_len > len {
        return Err(Error::InvalidArgument(format!(
            "window of {window_len} samples is longer than the {len}-sample series"
        )));
    }
    let count = (len - window_len) / hop + 1;
    Ok((0..count)
        .map(|w| &ts.samples()[w * hop..w * hop + window_len])
        .collect())
}

/// One-sided FFT magnitude spectrum of a window (`N/2 + 1` entries).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Reusable FFT plan for a fixed window length.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(window_len: usize) -> Result<Self> {
        if window_len < 2 || !window_len.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "FFT window length must be even and >= 2, got {window_len}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(window_len);
        Ok(SpectrumAnalyzer { len: window_len, fft })
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn feature_dim(&self) -> usize {
        self.len / 2 + 1
    }

    /// Raw magnitudes `|X_k|`, `k = 0..=N/2`; no taper, no scaling.
    pub fn amplitudes(&self, window: &[f64]) -> Result<FeatureVector> {
        if window.len() != self.len {
            return Err(Error::DimensionMismatch(format!(
                "window has {} samples, analyzer expects {}",
                window.len(),
                self.len
            )));
        }
        let mut buf: Vec<Complex<f64>> = window.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        Ok(FeatureVector(buf[..self.feature_dim()].iter().map(|c| c.norm()).collect()))
    }
}

pub fn fft_amplitudes(window: &[f64]) -> Result<FeatureVector> {
    SpectrumAnalyzer::new(window.len())?.amplitudes(window)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainDataset {
    /// `n × d`, one feature vector per row.
    pub x: Matrix,
    pub y: Option<Vec<FaultClass>>,
    pub condition: OperatingCondition,
}

impl DomainDataset {
    pub fn new(x: Matrix, y: Option<Vec<FaultClass>>, condition: OperatingCondition) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("domain dataset has no samples".into()));
        }
        if let Some(labels) = &y {
            if labels.len() != x.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    x.nrows()
                )));
            }
        }
        Ok(DomainDataset { x, y, condition })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn labels(&self) -> Option<&[FaultClass]> {
        self.y.as_deref()
    }

    pub fn without_labels(&self) -> DomainDataset {
        DomainDataset {
            x: self.x.clone(),
            y: None,
            condition: self.condition.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub series: TimeSeries,
    pub condition: OperatingCondition,
    pub fault: FaultSpec,
    /// File the recording was read from, if any.
    pub source: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawCorpus {
    pub recordings: Vec<Recording>,
}

/// One manifest record; the manifest file is a JSON array of these.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub format: SampleFormat,
    pub condition: OperatingCondition,
    pub fault: FaultSpec,
}

/// Loads every recording listed in a manifest. Relative paths resolve
/// against the manifest's directory.
pub fn load_manifest(path: &Path, sample_rate_hz: f64) -> Result<RawCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut recordings = Vec::with_capacity(entries.len());
    for entry in entries {
        entry.condition.validate()?;
        entry.fault.validate()?;
        let file = base.join(&entry.path);
        let series = load_timeseries(&file, entry.format, sample_rate_hz)?;
        recordings.push(Recording {
            series,
            condition: entry.condition,
            fault: entry.fault,
            source: Some(file),
        });
    }
    Ok(RawCorpus { recordings })
}

/// Writes each recording to `dir` and a `manifest.json` describing them.
/// Returns the manifest path.
pub fn write_corpus(corpus: &RawCorpus, dir: &Path, format: SampleFormat) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(corpus.recordings.len());
    for rec in &corpus.recordings {
        let name = format!(
            "{}_{}_{}.{}",
            rec.condition.id,
            rec.fault.class,
            rec.fault.size_in,
            format.extension()
        );
        write_timeseries(&dir.join(&name), &rec.series, format)?;
        entries.push(ManifestEntry {
            path: name,
            format,
            condition: rec.condition.clone(),
            fault: rec.fault,
        });
    }
    let manifest = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&entries)?;
    fs::write(&manifest, json + "\n").map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSpec {
    pub window_len: usize,
    pub hop: usize,
    pub samples_per_class: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            window_len: DEFAULT_WINDOW_LEN,
            hop: DEFAULT_HOP,
            samples_per_class: 200,
        }
    }
}

/// Assembles the four-class dataset for `condition` at `fault_size_in`
/// (the normal class always uses size 0). Rows are grouped by class in
/// `FaultClass::ALL` order; within a class, windows are taken in recording
/// order then window order.
pub fn build_domain(
    corpus: &RawCorpus,
    condition: &OperatingCondition,
    fault_size_in: f64,
    windows: WindowSpec,
    labeled: bool,
) -> Result<DomainDataset> {
    build_domain_with(corpus, condition, fault_size_in, windows, labeled, Exec::default())
}

pub fn build_domain_with(
    corpus: &RawCorpus,
    condition: &OperatingCondition,
    fault_size_in: f64,
    windows: WindowSpec,
    labeled: bool,
    exec: Exec,
) -> Result<DomainDataset> {
    let WindowSpec {
        window_len,
        hop,
        samples_per_class,
    } = windows;
    if samples_per_class == 0 {
        return Err(Error::InvalidArgument("samples_per_class must be > 0".into()));
    }
    let analyzer = SpectrumAnalyzer::new(window_len)?;

    let mut picked: Vec<(&[f64], FaultClass)> = Vec::with_capacity(4 * samples_per_class);
    for class in FaultClass::ALL {
        let want_size = if class == FaultClass::NO { 0.0 } else { fault_size_in };
        let matching: Vec<&Recording> = corpus
            .recordings
            .iter()
            .filter(|r| {
                r.condition.id == condition.id
                    && r.fault.class == class
                    && (r.fault.size_in - want_size).abs() <= SIZE_MATCH_TOL
            })
            .collect();
        if matching.is_empty() {
            return Err(Error::MissingClass {
                class,
                condition: condition.id.clone(),
                size_in: want_size,
            });
        }
        let mut available = 0;
        let mut taken = 0;
        for rec in matching {
            if rec.series.len() < window_len {
                continue;
            }
            let segs = segment(&rec.series, window_len, hop)?;
            available += segs.len();
            for w in segs.into_iter().take(samples_per_class - taken) {
                picked.push((w, class));
                taken += 1;
            }
        }
        if taken < samples_per_class {
            return Err(Error::InsufficientWindows {
                class,
                condition: condition.id.clone(),
                available,
                required: samples_per_class,
            });
        }
    }

    let features = exec.try_map(&picked, |&(w, _)| analyzer.amplitudes(w))?;
    let d = analyzer.feature_dim();
    let x = Matrix::from_fn(features.len(), d, |i, j| features[i].as_slice()[j])?;
    let y = labeled.then(|| picked.iter().map(|&(_, c)| c).collect());
    DomainDataset::new(x, y, condition.clone())
}
