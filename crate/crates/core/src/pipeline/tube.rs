//! Frequency-domain removal of the tube/cavity resonance from scanner data.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sensor::ScannerSpec;
use crate::series::TimeSeries;

/// Upper bound on the inverse-filter gain.
pub const DEFAULT_MAX_GAIN: f64 = 20.0;

/// Regularized inverse of the tube response at the series rate, with `|1/H|`
/// clamped to `max_gain` (phase kept). The record is extended with a smooth
/// raised-cosine bridge from its last to its first value before the FFT so the
/// circular wrap does not ring into the data.
pub fn compensate_tube_with_gain(series: &TimeSeries, spec: &ScannerSpec, max_gain: f64) -> Result<TimeSeries> {
    if !(spec.tube_damping > 0.0) {
        return Err(Error::validation(
            "scanner.tube_damping",
            format!("must be positive, got {}", spec.tube_damping),
        ));
    }
    if !(max_gain.is_finite() && max_gain >= 1.0) {
        return Err(Error::validation("max_gain", format!("must be at least 1, got {max_gain}")));
    }
    let biquad = spec.tube().discretize(series.sample_rate())?;
    let n = series.len();
    if n < 2 {
        return Ok(series.clone());
    }

    let n_fft = (2 * n).next_power_of_two().max(64);
    let x = series.values();
    let (first, last) = (x[0], x[n - 1]);
    let pad = n_fft - n;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.extend((0..pad).map(|j| {
        let t = (j as f64 + 1.0) / (pad as f64 + 1.0);
        let w = 0.5 - 0.5 * (std::f64::consts::PI * t).cos();
        Complex64::new(last + w * (first - last), 0.0)
    }));

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n_fft).process(&mut buf);
    for k in 0..=n_fft / 2 {
        let omega = 2.0 * std::f64::consts::PI * k as f64 / n_fft as f64;
        let h = biquad.response(omega);
        let mag = h.norm();
        let mut g = if mag * max_gain > 1.0 {
            h.inv()
        } else if mag > 0.0 {
            h.conj() / mag * max_gain
        } else {
            Complex64::new(max_gain, 0.0)
        };
        if k == 0 || 2 * k == n_fft {
            g = Complex64::new(g.re.signum() * g.norm(), 0.0);
        }
        buf[k] *= g;
        if k != 0 && 2 * k != n_fft {
            buf[n_fft - k] *= g.conj();
        }
    }
    planner.plan_fft_inverse(n_fft).process(&mut buf);
    let scale = 1.0 / n_fft as f64;
    series.with_values(buf[..n].iter().map(|c| c.re * scale).collect())
}

pub fn compensate_tube(series: &TimeSeries, spec: &ScannerSpec) -> Result<TimeSeries> {
    compensate_tube_with_gain(series, spec, DEFAULT_MAX_GAIN)
}
