//! Atmospheric referencing of absolute MEMS readings and the transform that
//! makes them comparable with differential scanner readings.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::pipeline::aggregate::StationAggregate;
use crate::series::TimeSeries;

/// Minimum length of a wind-off segment used to estimate atmospheric pressure, s.
pub const MIN_STATIONARY_DURATION: f64 = 10.0;

/// Default angle of attack at which the two systems are aligned, deg.
pub const DEFAULT_REFERENCE_AOA: f64 = 24.0;

/// Stations closer than this (chord fraction) count as co-located.
pub const COLOCATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationParams {
    pub alpha: f64,
    #[serde(default = "default_reference_aoa")]
    pub reference_aoa: f64,
}

fn default_reference_aoa() -> f64 {
    DEFAULT_REFERENCE_AOA
}

impl CalibrationParams {
    pub fn new(alpha: f64, reference_aoa: f64) -> Result<Self> {
        let cal = CalibrationParams { alpha, reference_aoa };
        cal.validate()?;
        Ok(cal)
    }

    /// `α = 1`: the ideal Bernoulli relation.
    pub fn ideal() -> Self {
        CalibrationParams {
            alpha: 1.0,
            reference_aoa: DEFAULT_REFERENCE_AOA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::validation("alpha", format!("must be positive, got {}", self.alpha)));
        }
        ensure_finite("reference_aoa", self.reference_aoa)
    }
}

/// Mean of a wind-off segment of at least ten seconds.
pub fn estimate_atm(stationary: &TimeSeries) -> Result<f64> {
    if stationary.duration() < MIN_STATIONARY_DURATION - 1e-9 {
        return Err(Error::insufficient(format!(
            "stationary segment `{}` covers {:.3} s, need {MIN_STATIONARY_DURATION} s",
            stationary.channel(),
            stationary.duration()
        )));
    }
    let v = stationary.values();
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// `ΔP_MEMS = P_i − P_atm`, sample-wise.
pub fn delta_mems(series: &TimeSeries, p_atm: f64) -> Result<TimeSeries> {
    ensure_finite("p_atm", p_atm)?;
    series.map(|p| p - p_atm)
}

/// `ΔP_MEMS + α·q∞`, sample-wise: MEMS data expressed in the scanner's frame.
pub fn to_scanner_frame(series: &TimeSeries, q_inf: f64, cal: &CalibrationParams) -> Result<TimeSeries> {
    if !(q_inf.is_finite() && q_inf >= 0.0) {
        return Err(Error::validation("q_inf", format!("must be non-negative, got {q_inf}")));
    }
    cal.validate()?;
    let shift = q_inf * cal.alpha;
    series.map(|p| p + shift)
}

/// Estimates `α` as the mean over co-located station pairs at `reference_aoa`
/// of `(scanner_mean − mems_delta_mean) / q∞`.
///
/// `mems` must hold atmosphere-referenced (`ΔP_MEMS`) aggregates.
pub fn calibrate_alpha(
    mems: &[StationAggregate],
    scanner: &[StationAggregate],
    q_inf: f64,
    reference_aoa: f64,
) -> Result<CalibrationParams> {
    if !(q_inf.is_finite() && q_inf > 0.0) {
        return Err(Error::validation(
            "q_inf",
            format!("calibration needs positive dynamic pressure, got {q_inf}"),
        ));
    }
    let at_ref = |a: &&StationAggregate| (a.aoa - reference_aoa).abs() <= 1e-9;
    let ratios: Vec<f64> = mems
        .iter()
        .filter(at_ref)
        .flat_map(|m| {
            scanner
                .iter()
                .filter(at_ref)
                .filter(move |s| (s.station.position - m.station.position).abs() <= COLOCATION_TOLERANCE)
                .map(move |s| (s.mean - m.mean) / q_inf)
        })
        .collect();
    if ratios.is_empty() {
        return Err(Error::insufficient(format!(
            "no co-located MEMS/scanner pair at reference AoA {reference_aoa}"
        )));
    }
    CalibrationParams::new(ratios.iter().sum::<f64>() / ratios.len() as f64, reference_aoa)
}
