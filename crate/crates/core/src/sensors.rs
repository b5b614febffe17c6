//! Pose and force sensor models and the scripted patient force source.

use crate::error::ConfigError;
use crate::plant::PoseHistory;
use crate::types::{ForceVector, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSensorParams {
    /// Per-coordinate noise standard deviation (m, m, rad, rad).
    pub noise_sigma: [f64; 4],
    /// Capture rate (Hz); `None` samples continuously.
    pub rate_hz: Option<f64>,
    /// Delay between a capture and its availability (s).
    pub latency: f64,
    pub noise_enabled: bool,
}

impl Default for PoseSensorParams {
    fn default() -> Self {
        Self {
            noise_sigma: [1e-4; 4],
            rate_hz: Some(120.0),
            latency: 0.0083,
            noise_enabled: true,
        }
    }
}

impl PoseSensorParams {
    /// Noise-free, delay-free, continuous.
    pub fn ideal() -> Self {
        Self {
            noise_sigma: [0.0; 4],
            rate_hz: None,
            latency: 0.0,
            noise_enabled: false,
        }
    }
}

/// Tracking-system surrogate: samples the true pose history at a fixed rate,
/// delivers each capture after a latency, with Gaussian noise.
#[derive(Debug, Clone)]
pub struct PoseSensor {
    pub params: PoseSensorParams,
    rng: ChaCha8Rng,
    noise: [Option<Normal<f64>>; 4],
    last_capture: Option<(i64, Pose)>,
}

impl PoseSensor {
    pub fn new(params: PoseSensorParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let noise = std::array::from_fn(|i| {
            let s = params.noise_sigma[i];
            (params.noise_enabled && s > 0.0).then(|| Normal::new(0.0, s).expect("finite sigma"))
        });
        Self {
            params,
            rng,
            noise,
            last_capture: None,
        }
    }

    fn add_noise(&mut self, pose: Pose) -> Pose {
        let mut v = pose.to_array();
        for (i, n) in self.noise.iter().enumerate() {
            if let Some(n) = n {
                v[i] += n.sample(&mut self.rng);
            }
        }
        Pose::new(v[0], v[1], v[2], v[3])
    }

    /// Index of the newest capture available at `t`.
    pub fn capture_index(&self, t: f64) -> Option<i64> {
        let rate = self.params.rate_hz?;
        Some((((t - self.params.latency) * rate + TIME_EPS).floor() as i64).max(0))
    }

    /// Measured pose at time `t`.
    pub fn sense(&mut self, history: &PoseHistory, t: f64) -> Pose {
        match self.params.rate_hz {
            None => {
                let truth = history.at(t - self.params.latency).unwrap_or_default();
                self.add_noise(truth)
            }
            Some(rate) => {
                let k = self.capture_index(t).expect("rate set");
                if let Some((last, pose)) = self.last_capture {
                    if last == k {
                        return pose;
                    }
                }
                let truth = history.at(k as f64 / rate).unwrap_or_default();
                let pose = self.add_noise(truth);
                self.last_capture = Some((k, pose));
                pose
            }
        }
    }

    pub fn reset(&mut self) {
        self.last_capture = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceSensorParams {
    /// Quantization step per channel (N, N, N·m, N·m).
    pub resolution: [f64; 4],
    /// Unloaded noise standard deviation per channel.
    pub noise_sigma: [f64; 4],
    /// Symmetric measuring range per channel.
    pub range: [f64; 4],
    /// Dead zone as a multiple of `noise_sigma`.
    pub dead_zone_sigmas: f64,
}

impl Default for ForceSensorParams {
    fn default() -> Self {
        let resolution = [0.065, 0.125, 0.004, 0.004];
        Self {
            resolution,
            noise_sigma: resolution.map(|r| 2.0 * r),
            range: [330.0, 990.0, 30.0, 30.0],
            dead_zone_sigmas: 3.0,
        }
    }
}

impl ForceSensorParams {
    pub fn dead_zone(&self) -> [f64; 4] {
        self.noise_sigma.map(|s| s * self.dead_zone_sigmas)
    }

    pub fn clamp(&self, f: &ForceVector) -> ForceVector {
        let a = f.to_array();
        ForceVector::from_array(std::array::from_fn(|i| a[i].clamp(-self.range[i], self.range[i])))
    }
}

/// Force/torque sensor: quantization, bounded noise, dead zone, range clamp.
///
/// Noise is uniform with the configured standard deviation. Its bound
/// (`sqrt(3) sigma`) sits inside the `3 sigma` dead zone, so an unloaded
/// sensor always reads exactly zero.
#[derive(Debug, Clone)]
pub struct ForceSensor {
    pub params: ForceSensorParams,
    rng: ChaCha8Rng,
}

impl ForceSensor {
    pub fn new(params: ForceSensorParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Self { params, rng }
    }

    pub fn sense(&mut self, source: &ForceVector) -> ForceVector {
        let p = self.params;
        let dz = p.dead_zone();
        let a = source.to_array();
        let out = std::array::from_fn(|i| {
            let mut v = if p.resolution[i] > 0.0 {
                (a[i] / p.resolution[i]).round() * p.resolution[i]
            } else {
                a[i]
            };
            if p.noise_sigma[i] > 0.0 {
                let bound = 3f64.sqrt() * p.noise_sigma[i];
                v += self.rng.random_range(-bound..bound);
            }
            if v.abs() < dz[i] {
                0.0
            } else {
                v.clamp(-p.range[i], p.range[i])
            }
        });
        ForceVector::from_array(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    Step,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSegment {
    pub start: f64,
    pub duration: f64,
    pub target: ForceVector,
    pub shape: RampShape,
}

impl ForceSegment {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Piecewise force profile. Zero before the first segment; each segment moves
/// from the value held at its start to its target and holds it afterwards.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForceScript {
    pub segments: Vec<ForceSegment>,
}

impl ForceScript {
    pub fn new(segments: Vec<ForceSegment>) -> Result<Self, ConfigError> {
        let s = Self { segments };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut prev_end = f64::NEG_INFINITY;
        for (k, seg) in self.segments.iter().enumerate() {
            let field = format!("force_script[{k}]");
            if !seg.start.is_finite() || !seg.duration.is_finite() || !seg.target.is_finite() {
                return Err(ConfigError::invalid(field, "values must be finite"));
            }
            if seg.start < 0.0 || seg.duration < 0.0 {
                return Err(ConfigError::invalid(field, "start and duration must be non-negative"));
            }
            if seg.start < prev_end {
                return Err(ConfigError::invalid(
                    field,
                    format!("segment starts at {} before the previous one ends at {prev_end}", seg.start),
                ));
            }
            prev_end = seg.end();
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> ForceVector {
        let mut held = ForceVector::ZERO;
        for seg in &self.segments {
            if t < seg.start {
                break;
            }
            if seg.shape == RampShape::Linear && t < seg.end() && seg.duration > 0.0 {
                let w = (t - seg.start) / seg.duration;
                let (a, b) = (held.to_array(), seg.target.to_array());
                return ForceVector::from_array(std::array::from_fn(|i| a[i] + (b[i] - a[i]) * w));
            }
            held = seg.target;
        }
        held
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map(|s| s.end()).unwrap_or(0.0)
    }
}

/// Where the patient's force comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ForceSource {
    Script { segments: Vec<ForceSegment> },
    /// Set from outside between ticks; starts at zero.
    Interactive,
}

impl Default for ForceSource {
    fn default() -> Self {
        ForceSource::Script { segments: Vec::new() }
    }
}

impl ForceSource {
    pub fn script(&self) -> Option<ForceScript> {
        match self {
            ForceSource::Script { segments } => Some(ForceScript {
                segments: segments.clone(),
            }),
            ForceSource::Interactive => None,
        }
    }
}
