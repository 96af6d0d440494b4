//! Processing chain from raw acquisitions to per-station aggregates:
//! outlier filtering, atmospheric referencing, frame transform, tube
//! compensation, synchronization and aggregation.

pub mod aggregate;
pub mod frame;
pub mod outlier;
pub mod sync;
pub mod tube;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate_run, mean_std, StationAggregate};
pub use frame::{
    calibrate_alpha, delta_mems, estimate_atm, to_scanner_frame, CalibrationParams, COLOCATION_TOLERANCE,
    DEFAULT_REFERENCE_AOA, MIN_STATIONARY_DURATION,
};
pub use outlier::{outlier_filter, DEFAULT_OUTLIER_K};
pub use sync::{estimate_clock_offset, synchronize_resample, AlignedFrame, SyncStream};
pub use tube::{compensate_tube, compensate_tube_with_gain, DEFAULT_MAX_GAIN};

use crate::error::{Error, Result};
use crate::flow::{ChordStation, FlowConditions, SensorKind};
use crate::sensor::{sync_pulses, ScannerSpec};
use crate::series::TimeSeries;

/// Whether the blade carried the MEMS array during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BladeState {
    Clean,
    Instrumented,
}

impl BladeState {
    pub fn as_str(self) -> &'static str {
        match self {
            BladeState::Clean => "clean",
            BladeState::Instrumented => "instrumented",
        }
    }
}

impl std::fmt::Display for BladeState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BladeState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clean" => Ok(BladeState::Clean),
            "instrumented" => Ok(BladeState::Instrumented),
            other => Err(Error::validation(
                "blade_state",
                format!("expected `clean` or `instrumented`, got `{other}`"),
            )),
        }
    }
}

/// One recorded channel and where it sits.
#[derive(Debug, Clone)]
pub struct ChannelData {
    pub station: ChordStation,
    /// Acquisition board whose clock stamps `series`.
    pub board: String,
    pub series: TimeSeries,
}

/// Everything recorded for one angle of attack on one blade configuration.
#[derive(Debug, Clone)]
pub struct AcquisitionRun {
    pub run_id: String,
    pub aoa: f64,
    pub conditions: FlowConditions,
    pub blade_state: BladeState,
    /// Wind-off MEMS segments, matched to `channels` by channel name.
    pub stationary: Vec<ChannelData>,
    pub channels: Vec<ChannelData>,
    /// Sync pulses recorded by each board, in that board's clock.
    pub pulses: BTreeMap<String, Vec<f64>>,
}

impl AcquisitionRun {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::insufficient(format!("run `{}` has no channels", self.run_id)));
        }
        for s in &self.stationary {
            if s.series.duration() < MIN_STATIONARY_DURATION - 1e-9 {
                return Err(Error::insufficient(format!(
                    "run `{}`: stationary segment `{}` is {:.3} s, need {MIN_STATIONARY_DURATION} s",
                    self.run_id,
                    s.series.channel(),
                    s.series.duration()
                )));
            }
        }
        for c in &self.channels {
            c.station.validate()?;
            if c.station.kind == SensorKind::Mems && self.stationary_for(c.series.channel()).is_none() {
                return Err(Error::insufficient(format!(
                    "run `{}`: MEMS channel `{}` has no stationary segment",
                    self.run_id,
                    c.series.channel()
                )));
            }
        }
        Ok(())
    }

    pub fn stationary_for(&self, channel: &str) -> Option<&ChannelData> {
        self.stationary.iter().find(|s| s.series.channel() == channel)
    }

    /// Reference pulse train covering the longest channel.
    pub fn reference_pulses(&self) -> Result<Vec<f64>> {
        let span = self
            .channels
            .iter()
            .map(|c| c.series.duration())
            .fold(0.0, f64::max);
        sync_pulses(span.max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingOptions {
    pub outlier_k: f64,
    pub max_gain: f64,
    /// Resampling rate; defaults to the slowest channel rate.
    pub target_rate: Option<f64>,
    pub compensate_tube: bool,
}

impl Default for ProcessingOptions {
    fn default() -> Self {
        ProcessingOptions {
            outlier_k: DEFAULT_OUTLIER_K,
            max_gain: DEFAULT_MAX_GAIN,
            target_rate: None,
            compensate_tube: true,
        }
    }
}

/// Result of processing one run.
#[derive(Debug, Clone)]
pub struct ProcessedRun {
    pub run_id: String,
    pub aoa: f64,
    pub blade_state: BladeState,
    pub q_inf: f64,
    /// `frame.columns[i]` belongs to `stations[i]`.
    pub stations: Vec<ChordStation>,
    pub frame: AlignedFrame,
    pub aggregates: Vec<StationAggregate>,
}

/// Runs the chain on one acquisition.
///
/// MEMS channels are outlier-filtered, referenced to the mean of their own
/// wind-off segment and, when `calibration` is given, moved into the scanner
/// frame. Scanner channels are tube-compensated. All channels are then aligned
/// and aggregated over the common span. With `calibration = None` MEMS
/// aggregates stay in the `ΔP_MEMS` frame, which is what [`calibrate_alpha`] expects.
pub fn process_run(
    run: &AcquisitionRun,
    scanner: &ScannerSpec,
    options: &ProcessingOptions,
    calibration: Option<&CalibrationParams>,
) -> Result<ProcessedRun> {
    run.validate()?;
    let q_inf = run.conditions.dynamic_pressure();
    let reference = run.reference_pulses()?;

    let mut streams = Vec::with_capacity(run.channels.len());
    for c in &run.channels {
        let series = match c.station.kind {
            SensorKind::Mems => {
                let stationary = run.stationary_for(c.series.channel()).expect("checked by validate");
                let p_atm = estimate_atm(&outlier_filter(&stationary.series, options.outlier_k)?)?;
                let delta = delta_mems(&outlier_filter(&c.series, options.outlier_k)?, p_atm)?;
                match calibration {
                    Some(cal) => to_scanner_frame(&delta, q_inf, cal)?,
                    None => delta,
                }
            }
            SensorKind::Tap if options.compensate_tube => {
                compensate_tube_with_gain(&c.series, scanner, options.max_gain)?
            }
            SensorKind::Tap => c.series.clone(),
        };
        let pulses = match run.pulses.get(&c.board) {
            Some(p) => p.clone(),
            None => reference.clone(),
        };
        streams.push(SyncStream { series, pulses });
    }

    let target_rate = options.target_rate.unwrap_or_else(|| {
        run.channels
            .iter()
            .map(|c| c.series.sample_rate())
            .fold(f64::INFINITY, f64::min)
    });
    let frame = synchronize_resample(&streams, &reference, target_rate)?;
    let stations: Vec<ChordStation> = run.channels.iter().map(|c| c.station.clone()).collect();
    let aggregates = stations
        .iter()
        .zip(&frame.columns)
        .map(|(station, column)| {
            let (mean, std) = mean_std(column)?;
            Ok(StationAggregate {
                station: station.clone(),
                aoa: run.aoa,
                mean,
                std,
                n_samples: column.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ProcessedRun {
        run_id: run.run_id.clone(),
        aoa: run.aoa,
        blade_state: run.blade_state,
        q_inf,
        stations,
        frame,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ground_truth_series, FlowModelParams};
    use crate::sensor::{mems_acquire_with_offset, scanner_acquire, MemsSpec};

    fn quiet_flow() -> FlowModelParams {
        FlowModelParams {
            base_std: 0.0,
            peak_std: 0.0,
            stall_std: 0.0,
            ..Default::default()
        }
    }

    fn colocated_run(beta: f64, aoa: f64) -> AcquisitionRun {
        let fc = FlowConditions::new(40.0, 1.225, 101_325.0, beta).unwrap();
        let flow = quiet_flow();
        let mems = MemsSpec::ideal();
        let scanner = ScannerSpec::ideal();
        let mut channels = Vec::new();
        let mut stationary = Vec::new();
        for x in [0.28, 0.55] {
            let ms = ChordStation::new(x, SensorKind::Mems, format!("m{x}")).unwrap();
            let ts = ChordStation::new(x, SensorKind::Tap, format!("t{x}")).unwrap();
            let truth = ground_truth_series(&ms, aoa, &flow, 12.0, 12_800.0, 1).unwrap();
            let m = mems_acquire_with_offset(&truth, &mems, &fc, 0.0, 2).unwrap().with_channel(ms.label.clone());
            let t = scanner_acquire(&truth, &scanner, 3).unwrap().with_channel(ts.label.clone());
            let still = TimeSeries::constant(ms.label.clone(), 100.0, 1000, fc.atmospheric_pressure()).unwrap();
            stationary.push(ChannelData { station: ms.clone(), board: "mems".into(), series: still });
            channels.push(ChannelData { station: ms, board: "mems".into(), series: m });
            channels.push(ChannelData { station: ts, board: "scanner".into(), series: t });
        }
        AcquisitionRun {
            run_id: "r".into(),
            aoa,
            conditions: fc,
            blade_state: BladeState::Instrumented,
            stationary,
            channels,
            pulses: BTreeMap::new(),
        }
    }

    #[test]
    fn noise_free_run_matches_scanner_frame() {
        let run = colocated_run(1.0, 6.0);
        let out = process_run(&run, &ScannerSpec::ideal(), &ProcessingOptions::default(), Some(&CalibrationParams::ideal())).unwrap();
        assert_eq!(out.frame.sample_rate, 100.0);
        for pair in out.frame.columns.chunks(2) {
            let rms = (pair[0].iter().zip(&pair[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pair[0].len() as f64).sqrt();
            assert!(rms < 1e-6, "{rms}");
        }
    }

    #[test]
    fn alpha_is_recovered_from_injected_stagnation_factor() {
        let run = colocated_run(0.9, 24.0);
        let out = process_run(&run, &ScannerSpec::ideal(), &ProcessingOptions::default(), None).unwrap();
        let (mems, taps): (Vec<_>, Vec<_>) = out.aggregates.into_iter().partition(|a| a.station.kind == SensorKind::Mems);
        let cal = calibrate_alpha(&mems, &taps, out.q_inf, 24.0).unwrap();
        assert!((cal.alpha - 0.9).abs() < 1e-6, "{}", cal.alpha);
    }

    #[test]
    fn missing_stationary_segment_is_rejected() {
        let mut run = colocated_run(1.0, 0.0);
        run.stationary.clear();
        assert!(process_run(&run, &ScannerSpec::ideal(), &ProcessingOptions::default(), None).is_err());
    }

    #[test]
    fn blade_state_parsing() {
        assert_eq!("Clean".parse::<BladeState>().unwrap(), BladeState::Clean);
        assert!("dirty".parse::<BladeState>().is_err());
    }
}
