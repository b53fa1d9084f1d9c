//! Synthetic defective-bearing vibration signals.
//!
//! A faulty bearing is modeled as a train of unit impulses at the defect's
//! kinematic rate, each ringing the structure as an exponentially decaying
//! sinusoid at a fixed resonance. Speed moves the impulse rate, load scales
//! impulse amplitude and noise floor. Inner-race impulses are amplitude
//! modulated by shaft rotation and ball impulses by cage rotation.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{RawCorpus, Recording, TimeSeries};
use crate::par::Exec;

/// Smallest defect size of the standard protocol, used to scale amplitude.
pub const REFERENCE_DEFECT_IN: f64 = 0.007;
/// Standard protocol defect sizes (inches).
pub const STANDARD_SIZES_IN: [f64; 3] = [0.007, 0.014, 0.021];
const MODULATION_DEPTH: f64 = 0.5;
const LOAD_GAIN_PER_HP: f64 = 0.1;
/// Ring-down is truncated once the envelope drops below this.
const RINGDOWN_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingCondition {
    pub id: String,
    pub load_hp: f64,
    pub speed_rpm: f64,
}

impl OperatingCondition {
    pub fn new(id: impl Into<String>, load_hp: f64, speed_rpm: f64) -> Result<Self> {
        let c = OperatingCondition {
            id: id.into(),
            load_hp,
            speed_rpm,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_rpm > 0.0 && self.speed_rpm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "condition {}: speed_rpm must be > 0",
                self.id
            )));
        }
        if !(self.load_hp >= 0.0 && self.load_hp.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "condition {}: load_hp must be >= 0",
                self.id
            )));
        }
        Ok(())
    }

    /// The four motor-load/speed settings of the drive-end test protocol.
    pub fn standard_set() -> Vec<OperatingCondition> {
        [(0.0, 1797.0), (1.0, 1772.0), (2.0, 1750.0), (3.0, 1730.0)]
            .iter()
            .enumerate()
            .map(|(i, &(load_hp, speed_rpm))| OperatingCondition {
                id: format!("L{i}"),
                load_hp,
                speed_rpm,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultClass {
    /// Normal bearing.
    NO,
    /// Inner race.
    IF,
    /// Outer race.
    OF,
    /// Ball.
    BF,
}

impl FaultClass {
    pub const ALL: [FaultClass; 4] = [FaultClass::NO, FaultClass::IF, FaultClass::OF, FaultClass::BF];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<FaultClass> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FaultClass::NO => "NO",
            FaultClass::IF => "IF",
            FaultClass::OF => "OF",
            FaultClass::BF => "BF",
        }
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FaultClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fault class {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub class: FaultClass,
    pub size_in: f64,
}

impl FaultSpec {
    pub fn new(class: FaultClass, size_in: f64) -> Result<Self> {
        let f = FaultSpec { class, size_in };
        f.validate()?;
        Ok(f)
    }

    pub fn normal() -> Self {
        FaultSpec {
            class: FaultClass::NO,
            size_in: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.size_in >= 0.0 && self.size_in.is_finite()) {
            return Err(Error::InvalidArgument("fault size must be >= 0".into()));
        }
        if (self.class == FaultClass::NO) != (self.size_in == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fault size {} inconsistent with class {} (size is 0 iff NO)",
                self.size_in, self.class
            )));
        }
        Ok(())
    }

    /// NO plus the three defect classes at `size_in`.
    pub fn class_set(size_in: f64) -> Vec<FaultSpec> {
        FaultClass::ALL
            .iter()
            .map(|&class| FaultSpec {
                class,
                size_in: if class == FaultClass::NO { 0.0 } else { size_in },
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BearingGeometry {
    pub n_balls: u32,
    /// Ball diameter over pitch diameter.
    pub ball_diam_ratio: f64,
    pub contact_angle_rad: f64,
}

impl Default for BearingGeometry {
    /// A 9-ball deep-groove bearing (6205-like proportions).
    fn default() -> Self {
        BearingGeometry {
            n_balls: 9,
            ball_diam_ratio: 0.2034,
            contact_angle_rad: 0.0,
        }
    }
}

impl BearingGeometry {
    pub fn validate(&self) -> Result<()> {
        let r = self.ball_diam_ratio;
        let phi = self.contact_angle_rad;
        if self.n_balls == 0
            || !(r > 0.0 && r < 1.0)
            || !(0.0..PI / 2.0).contains(&phi)
            || r * phi.cos() >= 1.0
        {
            return Err(Error::InvalidArgument(format!("invalid bearing geometry {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicFrequencies {
    pub shaft_hz: f64,
    pub bpfo_hz: f64,
    pub bpfi_hz: f64,
    pub bsf_hz: f64,
}

/// Kinematic defect frequencies for a bearing turning at `speed_rpm`.
pub fn characteristic_frequencies(geometry: &BearingGeometry, speed_rpm: f64) -> CharacteristicFrequencies {
    let shaft_hz = speed_rpm / 60.0;
    let rc = geometry.ball_diam_ratio * geometry.contact_angle_rad.cos();
    let half_balls = geometry.n_balls as f64 / 2.0;
    CharacteristicFrequencies {
        shaft_hz,
        bpfo_hz: half_balls * shaft_hz * (1.0 - rc),
        bpfi_hz: half_balls * shaft_hz * (1.0 + rc),
        bsf_hz: shaft_hz / (2.0 * geometry.ball_diam_ratio) * (1.0 - rc * rc),
    }
}

fn cage_hz(geometry: &BearingGeometry, shaft_hz: f64) -> f64 {
    0.5 * shaft_hz * (1.0 - geometry.ball_diam_ratio * geometry.contact_angle_rad.cos())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub geometry: BearingGeometry,
    pub resonance_hz: f64,
    /// Ring-down rate of each impulse response (1/s).
    pub decay_rate: f64,
    /// Gaussian noise std relative to a unit impulse.
    pub noise_std: f64,
    /// Amplitude of the once-per-revolution component.
    pub shaft_amplitude: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Analysis window used for the minimum-length check and for sizing
    /// dataset recordings.
    pub window_len: usize,
    pub hop: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            geometry: BearingGeometry::default(),
            resonance_hz: 450.0,
            decay_rate: 3000.0,
            noise_std: 0.3,
            shaft_amplitude: 0.2,
            sample_rate_hz: 12_000.0,
            duration_s: 1.0,
            window_len: 4096,
            hop: 2048,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let checks = [
            (self.sample_rate_hz > 0.0, "sample_rate_hz must be > 0"),
            (self.resonance_hz > 0.0, "resonance_hz must be > 0"),
            (
                self.resonance_hz < self.sample_rate_hz / 2.0,
                "resonance_hz must be below Nyquist",
            ),
            (self.decay_rate > 0.0, "decay_rate must be > 0"),
            (self.noise_std >= 0.0, "noise_std must be >= 0"),
            (self.shaft_amplitude >= 0.0, "shaft_amplitude must be >= 0"),
            (self.duration_s > 0.0, "duration_s must be > 0"),
            (self.window_len >= 2, "window_len must be >= 2"),
            (self.hop >= 1, "hop must be >= 1"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidArgument(msg.into()));
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// Order-stable 64-bit mix of the recording identity, so every
/// (condition, fault) pair gets its own stream regardless of generation order.
pub fn recording_seed(master: u64, condition_id: &str, fault: &FaultSpec) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    feed(&master.to_le_bytes());
    feed(condition_id.as_bytes());
    feed(&[0xff, fault.class.index() as u8]);
    feed(&fault.size_in.to_bits().to_le_bytes());
    // splitmix64 finalizer
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One recording for `fault` under `cond`. The stream is seeded with
/// [`recording_seed`] of `params.seed`.
pub fn synth_signal(cond: &OperatingCondition, fault: &FaultSpec, params: &SynthParams) -> Result<TimeSeries> {
    params.validate()?;
    cond.validate()?;
    fault.validate()?;
    let n = params.sample_count();
    if n < params.window_len {
        return Err(Error::InvalidArgument(format!(
            "duration {} s gives {n} samples, shorter than one {}-sample window",
            params.duration_s, params.window_len
        )));
    }

    let fs = params.sample_rate_hz;
    let freqs = characteristic_frequencies(&params.geometry, cond.speed_rpm);
    let load_gain = 1.0 + LOAD_GAIN_PER_HP * cond.load_hp;
    let mut rng = ChaCha8Rng::seed_from_u64(recording_seed(params.seed, &cond.id, fault));

    let shaft_phase = rng.random::<f64>() * 2.0 * PI;
    let mut samples: Vec<f64> = (0..n)
        .map(|i| params.shaft_amplitude * (2.0 * PI * freqs.shaft_hz * i as f64 / fs + shaft_phase).sin())
        .collect();

    let impulse = match fault.class {
        FaultClass::NO => None,
        FaultClass::OF => Some((freqs.bpfo_hz, None)),
        FaultClass::IF => Some((freqs.bpfi_hz, Some(freqs.shaft_hz))),
        FaultClass::BF => Some((2.0 * freqs.bsf_hz, Some(cage_hz(&params.geometry, freqs.shaft_hz)))),
    };
    if let Some((rate_hz, modulation_hz)) = impulse {
        let amplitude = (1.0 + fault.size_in / REFERENCE_DEFECT_IN) * load_gain;
        let period = 1.0 / rate_hz;
        let ring_len = ((-RINGDOWN_FLOOR.ln()) / params.decay_rate * fs).ceil() as usize;
        let omega = 2.0 * PI * params.resonance_hz;
        let mod_phase = rng.random::<f64>() * 2.0 * PI;
        let mut t_hit = rng.random::<f64>() * period;
        let duration = n as f64 / fs;
        while t_hit < duration {
            let a = match modulation_hz {
                Some(fm) => {
                    amplitude
                        * (1.0 - MODULATION_DEPTH + MODULATION_DEPTH * (2.0 * PI * fm * t_hit + mod_phase).cos())
                }
                None => amplitude,
            };
            let start = (t_hit * fs).ceil() as usize;
            for (i, s) in samples.iter_mut().enumerate().skip(start).take(ring_len) {
                let t = i as f64 / fs - t_hit;
                *s += a * (-params.decay_rate * t).exp() * (omega * t).sin();
            }
            t_hit += period;
        }
    }

    if params.noise_std > 0.0 {
        let sigma = params.noise_std * load_gain;
        for s in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += sigma * z;
        }
    }
    TimeSeries::new(samples, fs)
}

/// One recording per (condition, fault) pair, conditions outermost, each
/// long enough for `samples_per_class` windows of `params.window_len`
/// spaced by `params.hop`.
pub fn synth_dataset(
    conds: &[OperatingCondition],
    faults: &[FaultSpec],
    samples_per_class: usize,
    params: &SynthParams,
) -> Result<RawCorpus> {
    synth_dataset_with(conds, faults, samples_per_class, params, Exec::default())
}

pub fn synth_dataset_with(
    conds: &[OperatingCondition],
    faults: &[FaultSpec],
    samples_per_class: usize,
    params: &SynthParams,
    exec: Exec,
) -> Result<RawCorpus> {
    if samples_per_class == 0 {
        return Err(Error::InvalidArgument("samples_per_class must be > 0".into()));
    }
    params.validate()?;
    let needed = params.window_len + (samples_per_class - 1) * params.hop;
    let mut sized = params.clone();
    sized.duration_s = params.duration_s.max(needed as f64 / params.sample_rate_hz);
    while sized.sample_count() < needed {
        sized.duration_s += 1.0 / params.sample_rate_hz;
    }

    let pairs: Vec<(&OperatingCondition, &FaultSpec)> =
        conds.iter().flat_map(|c| faults.iter().map(move |f| (c, f))).collect();
    let recordings = exec.try_map(&pairs, |&(cond, fault)| {
        synth_signal(cond, fault, &sized).map(|series| Recording {
            series,
            condition: cond.clone(),
            fault: *fault,
            source: None,
        })
    })?;
    Ok(RawCorpus { recordings })
}
