//! Acquisition-chain emulation: surface MEMS barometers and tubed pressure taps
//! read by a differential scanner.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::flow::FlowConditions;
use crate::seed;
use crate::series::{block_mean_downsample, integer_rate_ratio, TimeSeries};

/// Surface-mounted absolute barometer array.
///
/// `noise_rms` is the relative accuracy (white noise) and `offset_bound` the
/// absolute accuracy (static per-channel offset drawn uniformly in
/// `[−offset_bound, offset_bound]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemsSpec {
    pub sample_rate: f64,
    pub noise_rms: f64,
    pub offset_bound: f64,
    /// mW per sensor at `sample_rate`.
    pub power_per_sensor: f64,
    /// mm above the blade surface.
    pub height: f64,
    /// Probability per sample of a single-sample glitch (0 disables).
    pub spike_probability: f64,
    pub spike_magnitude: f64,
}

impl Default for MemsSpec {
    fn default() -> Self {
        MemsSpec {
            sample_rate: 100.0,
            noise_rms: 1.5,
            offset_bound: 50.0,
            power_per_sensor: 0.16,
            height: 1.95,
            spike_probability: 0.0,
            spike_magnitude: 2000.0,
        }
    }
}

impl MemsSpec {
    /// Same spec with noise, offsets and glitches disabled.
    pub fn ideal() -> Self {
        MemsSpec {
            noise_rms: 0.0,
            offset_bound: 0.0,
            spike_probability: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::validation("mems.sample_rate", "must be positive"));
        }
        for (field, value) in [
            ("mems.noise_rms", self.noise_rms),
            ("mems.offset_bound", self.offset_bound),
            ("mems.power_per_sensor", self.power_per_sensor),
            ("mems.height", self.height),
            ("mems.spike_magnitude", self.spike_magnitude),
        ] {
            ensure_finite(field, value)?;
            if value < 0.0 {
                return Err(Error::validation(field, "must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.spike_probability) {
            return Err(Error::validation("mems.spike_probability", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Multiplexed differential scanner reading pressure taps through vinyl tubing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScannerSpec {
    pub sample_rate: f64,
    pub noise_rms: f64,
    /// Absolute accuracy quoted for the scanner, Pa.
    pub accuracy_bound: f64,
    /// Static error as a fraction of `full_scale` (0.03 % for the module).
    pub static_error_fraction: f64,
    /// Full-scale range of the module, Pa.
    pub full_scale: f64,
    pub tube_natural_freq: f64,
    pub tube_damping: f64,
    pub characterization_rate: f64,
}

impl Default for ScannerSpec {
    fn default() -> Self {
        ScannerSpec {
            sample_rate: 512.0,
            noise_rms: 1.0,
            accuracy_bound: 7.5,
            static_error_fraction: 3e-4,
            full_scale: 2500.0,
            tube_natural_freq: 250.0,
            tube_damping: 0.25,
            characterization_rate: 1024.0,
        }
    }
}

impl ScannerSpec {
    pub fn ideal() -> Self {
        ScannerSpec {
            noise_rms: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::validation("scanner.sample_rate", "must be positive"));
        }
        for (field, value) in [
            ("scanner.noise_rms", self.noise_rms),
            ("scanner.accuracy_bound", self.accuracy_bound),
            ("scanner.static_error_fraction", self.static_error_fraction),
            ("scanner.full_scale", self.full_scale),
        ] {
            ensure_finite(field, value)?;
            if value < 0.0 {
                return Err(Error::validation(field, "must be non-negative"));
            }
        }
        self.tube().validate()?;
        if !(self.characterization_rate.is_finite()
            && self.tube_natural_freq < self.characterization_rate / 2.0)
        {
            return Err(Error::validation(
                "scanner.tube_natural_freq",
                format!(
                    "must be below half the characterization rate ({} Hz)",
                    self.characterization_rate / 2.0
                ),
            ));
        }
        Ok(())
    }

    pub fn tube(&self) -> TubeModel {
        TubeModel {
            natural_freq: self.tube_natural_freq,
            damping: self.tube_damping,
        }
    }

    /// Largest static error implied by either accuracy figure.
    pub fn static_error_bound(&self) -> f64 {
        self.accuracy_bound.max(self.static_error_fraction * self.full_scale)
    }
}

/// Unity-DC second-order tube/cavity resonance
/// `H(s) = ωn² / (s² + 2ζωn·s + ωn²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeModel {
    pub natural_freq: f64,
    pub damping: f64,
}

impl TubeModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.natural_freq.is_finite() && self.natural_freq > 0.0) {
            return Err(Error::validation("scanner.tube_natural_freq", "must be positive"));
        }
        if !(self.damping.is_finite() && self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::validation(
                "scanner.tube_damping",
                format!("must lie in (0, 1), got {}", self.damping),
            ));
        }
        Ok(())
    }

    /// Step-response overshoot of the continuous system, `exp(−πζ/√(1−ζ²))`.
    pub fn overshoot(&self) -> f64 {
        (-PI * self.damping / (1.0 - self.damping * self.damping).sqrt()).exp()
    }

    /// Time for the envelope to decay by `e⁻⁵`, `5/(ζ·ωn)` seconds.
    pub fn settling_time(&self) -> f64 {
        5.0 / (self.damping * 2.0 * PI * self.natural_freq)
    }

    /// Continuous-time response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let wn = 2.0 * PI * self.natural_freq;
        let s = Complex64::new(0.0, 2.0 * PI * freq);
        wn * wn / (s * s + 2.0 * self.damping * wn * s + wn * wn)
    }

    /// Bilinear discretization at `sample_rate`, prewarped so the resonance stays at `natural_freq`.
    pub fn discretize(&self, sample_rate: f64) -> Result<Biquad> {
        self.validate()?;
        if !(self.natural_freq < sample_rate / 2.0) {
            return Err(Error::validation(
                "scanner.tube_natural_freq",
                format!(
                    "{} Hz is not below the Nyquist frequency of {} Hz",
                    self.natural_freq,
                    sample_rate / 2.0
                ),
            ));
        }
        let t = 1.0 / sample_rate;
        let wn = 2.0 * PI * self.natural_freq;
        let k = wn / (wn * t / 2.0).tan();
        let zeta = self.damping;
        let a0 = k * k + 2.0 * zeta * wn * k + wn * wn;
        let a1 = 2.0 * (wn * wn - k * k);
        let a2 = k * k - 2.0 * zeta * wn * k + wn * wn;
        let g = wn * wn / a0;
        Ok(Biquad {
            b: [g, 2.0 * g, g],
            a: [a1 / a0, a2 / a0],
        })
    }
}

/// Second-order IIR section, `y = (b0 + b1 z⁻¹ + b2 z⁻²)/(1 + a1 z⁻¹ + a2 z⁻²) x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }

    /// Filters `input` in transposed direct form II, starting from the
    /// steady state of the first sample so a constant input produces no transient.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let Some(&x0) = input.first() else {
            return Vec::new();
        };
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let y0 = dc * x0;
        let mut s2 = b2 * x0 - a2 * y0;
        let mut s1 = b1 * x0 - a1 * y0 + s2;
        input
            .iter()
            .map(|&x| {
                let y = b0 * x + s1;
                s1 = b1 * x - a1 * y + s2;
                s2 = b2 * x - a2 * y;
                y
            })
            .collect()
    }
}

/// Draws the static absolute-accuracy offset of one MEMS channel.
pub fn draw_mems_offset(spec: &MemsSpec, seed: u64) -> f64 {
    if spec.offset_bound == 0.0 {
        return 0.0;
    }
    let mut rng = seed::rng(seed::channel_seed(seed, "mems-offset"));
    rng.gen_range(-spec.offset_bound..=spec.offset_bound)
}

fn check_rates(truth: &TimeSeries, target: f64) -> Result<()> {
    integer_rate_ratio(truth.sample_rate(), target)
        .map(|_| ())
        .ok_or_else(|| {
            Error::validation(
                "sample_rate",
                format!(
                    "truth rate {} Hz must be an integer multiple of the sensor rate {} Hz",
                    truth.sample_rate(),
                    target
                ),
            )
        })
}

/// Absolute MEMS readings: `P_atm + truth − β·q∞ + offset + noise`, block-averaged
/// to the sensor rate. Offset and noise both derive from `seed`.
pub fn mems_acquire(
    truth: &TimeSeries,
    spec: &MemsSpec,
    conditions: &FlowConditions,
    seed: u64,
) -> Result<TimeSeries> {
    let offset = draw_mems_offset(spec, seed);
    mems_acquire_with_offset(truth, spec, conditions, offset, seed)
}

/// As [`mems_acquire`] with an explicit channel offset, so that wind-on and
/// wind-off segments of one physical sensor can share it.
pub fn mems_acquire_with_offset(
    truth: &TimeSeries,
    spec: &MemsSpec,
    conditions: &FlowConditions,
    offset: f64,
    noise_seed: u64,
) -> Result<TimeSeries> {
    spec.validate()?;
    ensure_finite("offset", offset)?;
    check_rates(truth, spec.sample_rate)?;
    let down = block_mean_downsample(truth, spec.sample_rate)?;
    let level = conditions.atmospheric_pressure()
        - conditions.stagnation_factor() * conditions.dynamic_pressure()
        + offset;
    let mut rng = seed::rng(seed::channel_seed(noise_seed, "mems-noise"));
    let values = down
        .values()
        .iter()
        .map(|&p| {
            let mut v = level + p;
            if spec.noise_rms > 0.0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                v += spec.noise_rms * e;
            }
            if spec.spike_probability > 0.0 && rng.gen::<f64>() < spec.spike_probability {
                v += if rng.gen::<bool>() { spec.spike_magnitude } else { -spec.spike_magnitude };
            }
            v
        })
        .collect();
    down.with_values(values)
}

/// Differential scanner readings: the truth passed through the tube
/// resonance at the truth rate, block-averaged to the scanner rate, plus white noise.
pub fn scanner_acquire(truth: &TimeSeries, spec: &ScannerSpec, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    check_rates(truth, spec.sample_rate)?;
    let filtered = spec.tube().discretize(truth.sample_rate())?.filter(truth.values());
    let down = block_mean_downsample(&truth.with_values(filtered)?, spec.sample_rate)?;
    if spec.noise_rms == 0.0 {
        return Ok(down);
    }
    let mut rng = seed::rng(seed::channel_seed(seed, "scanner-noise"));
    let values = down
        .values()
        .iter()
        .map(|&v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + spec.noise_rms * e
        })
        .collect();
    down.with_values(values)
}

/// Timestamps of the shared 1 Hz synchronization signal over `duration` seconds.
pub fn sync_pulses(duration: f64) -> Result<Vec<f64>> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::validation("duration", format!("must be positive, got {duration}")));
    }
    let count = duration.floor() as usize + 1;
    Ok((0..count).map(|k| k as f64).collect())
}

/// Total sensing power of `n_sensors` barometers, mW.
pub fn sensing_power(spec: &MemsSpec, n_sensors: usize) -> f64 {
    n_sensors as f64 * spec.power_per_sensor
}
