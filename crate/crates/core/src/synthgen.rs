//! Synthetic e-nose responses.
//!
//! Each class owns, per sensor channel, an amplitude `A`, a rise time
//! constant `tau`, a drift slope magnitude and a drift sign. A sample's
//! channel trace is
//!
//! ```text
//! x(t) = baseline + A'(1 - exp(-t / tau')) + sign * d' * t + N(0, noise_sigma^2)
//! ```
//!
//! where primed values are the class values scaled by `1 + jitter * u`,
//! `u ~ U(-1, 1)`, drawn per sample. Class parameters come from one RNG
//! stream keyed by the seed; each sample draws from its own counter-indexed
//! stream, so adding samples never changes the classes and generation order
//! does not matter.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalio::{Dataset, ResponseSample, DEFAULT_CHANNELS, DEFAULT_LENGTH};

/// Resting sensor level (conductivity ratio before exposure).
pub const BASELINE: f64 = 1.0;
pub const AMPLITUDE_RANGE: (f64, f64) = (0.5, 1.5);
/// Rise time constants, in time steps.
pub const TAU_RANGE: (f64, f64) = (4.0, 40.0);

pub const PRESETS: [&str; 3] = ["desk", "easy", "hard"];

const SAMPLE_STREAM_KEY: u64 = 0x6f6c_6365_5f73_6d70;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub channels: usize,
    pub length: usize,
    /// Standard deviation of additive white noise (same units as `A`).
    pub noise_sigma: f64,
    /// Upper bound on the drift slope magnitude, per time step.
    pub drift_scale: f64,
    /// Relative per-sample perturbation of the class parameters, in `[0, 1)`.
    pub within_class_jitter: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Named configurations. All use 7 classes x 100 samples of 10 x 120.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            num_classes: 7,
            samples_per_class: 100,
            channels: DEFAULT_CHANNELS,
            length: DEFAULT_LENGTH,
            noise_sigma: 0.0,
            drift_scale: 0.0,
            within_class_jitter: 0.0,
            seed: 2021,
        };
        match name {
            "desk" => Ok(Self {
                noise_sigma: 0.04,
                drift_scale: 0.006,
                within_class_jitter: 0.75,
                ..base
            }),
            "easy" => Ok(Self {
                noise_sigma: 0.02,
                drift_scale: 0.006,
                within_class_jitter: 0.3,
                ..base
            }),
            "hard" => Ok(Self {
                noise_sigma: 0.3,
                drift_scale: 0.006,
                within_class_jitter: 0.6,
                ..base
            }),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; valid presets: {}",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_classes < 2 {
            return bad(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.samples_per_class < 4 {
            return bad(format!(
                "samples_per_class must be at least 4, got {}",
                self.samples_per_class
            ));
        }
        if self.length < 8 {
            return bad(format!("length must be at least 8, got {}", self.length));
        }
        if self.channels < 1 {
            return bad("channels must be at least 1".into());
        }
        if !(self.noise_sigma >= 0.0) || !(self.drift_scale >= 0.0) {
            return bad("noise_sigma and drift_scale must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.within_class_jitter) {
            return bad(format!(
                "within_class_jitter must lie in [0, 1), got {}",
                self.within_class_jitter
            ));
        }
        Ok(())
    }
}

/// Kinetic parameters of one class on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelKinetics {
    pub amplitude: f64,
    pub tau: f64,
    pub drift: f64,
    pub drift_sign: f64,
}

/// Draws the per-class, per-channel kinetics (`[class][channel]`).
pub fn class_kinetics(cfg: &SynthConfig) -> Vec<Vec<ChannelKinetics>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.num_classes)
        .map(|_| {
            (0..cfg.channels)
                .map(|_| ChannelKinetics {
                    amplitude: rng.gen_range(AMPLITUDE_RANGE.0..AMPLITUDE_RANGE.1),
                    tau: rng.gen_range(TAU_RANGE.0..TAU_RANGE.1),
                    drift: rng.gen_range(0.0..=cfg.drift_scale),
                    drift_sign: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                })
                .collect()
        })
        .collect()
}

/// The RNG stream owned by sample `index` of class `class`.
fn sample_rng(cfg: &SynthConfig, class: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SAMPLE_STREAM_KEY);
    rng.set_stream(((class as u64) << 32) | index as u64);
    rng
}

fn render_sample(cfg: &SynthConfig, kinetics: &[ChannelKinetics], class: usize, index: usize) -> Result<ResponseSample> {
    let mut rng = sample_rng(cfg, class, index);
    let j = cfg.within_class_jitter;
    let mut data = Vec::with_capacity(cfg.channels * cfg.length);
    for k in kinetics {
        let mut jitter = || 1.0 + j * rng.gen_range(-1.0..=1.0);
        let a = k.amplitude * jitter();
        let tau = k.tau * jitter();
        let d = k.drift_sign * k.drift * jitter();
        for t in 0..cfg.length {
            let t = t as f64;
            let noise: f64 = rng.sample(StandardNormal);
            data.push(BASELINE + a * (1.0 - (-t / tau).exp()) + d * t + cfg.noise_sigma * noise);
        }
    }
    ResponseSample::new(cfg.channels, cfg.length, data, class, format!("c{class}_s{index:03}"))
}

/// Generates a class-major dataset (`samples_per_class` samples of class 0,
/// then class 1, ...). Values are raw; normalize before training.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let kinetics = class_kinetics(cfg);
    let mut samples = Vec::with_capacity(cfg.num_classes * cfg.samples_per_class);
    for (class, k) in kinetics.iter().enumerate() {
        for index in 0..cfg.samples_per_class {
            samples.push(render_sample(cfg, k, class, index)?);
        }
    }
    let names = (0..cfg.num_classes).map(|c| format!("class{c}")).collect();
    Dataset::new(samples, cfg.num_classes, names)
}
