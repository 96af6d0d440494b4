//! Sweep-level analyses: suction and fluctuation curves, separation onset and
//! front detection, angle-of-attack inference, MEMS/scanner comparison and the
//! clean-versus-instrumented impact shift.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::flow::{ChordStation, SensorKind};
use crate::pipeline::{BladeState, StationAggregate};

pub const DEFAULT_ONSET_K: f64 = 3.0;
pub const DEFAULT_ATTACHED_MAX: f64 = 8.0;
pub const DEFAULT_MIN_RELATIVE_SPREAD: f64 = 1.0 / 3.0;
pub const MIN_ATTACHED_POINTS: usize = 4;
/// Default MEMS-to-tap pairing distance, chord fraction.
pub const DEFAULT_PAIRING_DISTANCE: f64 = 0.05;
pub const DEFAULT_LINEAR_WINDOW: (f64, f64) = (-10.0, 8.0);

const AOA_MATCH: f64 = 1e-9;

/// Aggregates of one sensor system over an angle-of-attack sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    blade_state: BladeState,
    system: SensorKind,
    entries: Vec<StationAggregate>,
    aoa_grid: Vec<f64>,
    stations: Vec<ChordStation>,
}

impl SweepSummary {
    /// Every entry must belong to `system`, and each (station, AoA) pair may appear once.
    pub fn new(blade_state: BladeState, system: SensorKind, mut entries: Vec<StationAggregate>) -> Result<Self> {
        for e in &entries {
            e.station.validate()?;
            ensure_finite("aoa", e.aoa)?;
            ensure_finite("mean", e.mean)?;
            ensure_finite("std", e.std)?;
            if e.station.kind != system {
                return Err(Error::validation(
                    "system",
                    format!("{} station at x/c = {} in a {system} sweep", e.station.kind, e.station.position),
                ));
            }
        }
        entries.sort_by(|a, b| {
            a.station
                .position
                .total_cmp(&b.station.position)
                .then(a.aoa.total_cmp(&b.aoa))
        });
        for w in entries.windows(2) {
            if w[0].station.same_site(&w[1].station) && (w[0].aoa - w[1].aoa).abs() <= AOA_MATCH {
                return Err(Error::validation(
                    "entries",
                    format!("duplicate aggregate at x/c = {}, AoA = {}", w[0].station.position, w[0].aoa),
                ));
            }
        }
        let mut aoa_grid: Vec<f64> = entries.iter().map(|e| e.aoa).collect();
        aoa_grid.sort_by(f64::total_cmp);
        aoa_grid.dedup_by(|a, b| (*a - *b).abs() <= AOA_MATCH);
        let mut stations: Vec<ChordStation> = Vec::new();
        for e in &entries {
            if !stations.last().is_some_and(|s| s.same_site(&e.station)) {
                stations.push(e.station.clone());
            }
        }
        Ok(SweepSummary {
            blade_state,
            system,
            entries,
            aoa_grid,
            stations,
        })
    }

    /// Builds a sweep from the entries of `all` that belong to `system`.
    pub fn select(blade_state: BladeState, system: SensorKind, all: &[StationAggregate]) -> Result<Self> {
        let entries = all.iter().filter(|a| a.station.kind == system).cloned().collect();
        Self::new(blade_state, system, entries)
    }

    pub fn blade_state(&self) -> BladeState {
        self.blade_state
    }

    pub fn system(&self) -> SensorKind {
        self.system
    }

    pub fn entries(&self) -> &[StationAggregate] {
        &self.entries
    }

    pub fn aoa_grid(&self) -> &[f64] {
        &self.aoa_grid
    }

    /// Distinct stations, ordered by chord position.
    pub fn stations(&self) -> &[ChordStation] {
        &self.stations
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Aggregates of one station, ordered by AoA.
    pub fn curve(&self, station: &ChordStation) -> Vec<StationAggregate> {
        self.entries
            .iter()
            .filter(|e| e.station.same_site(station))
            .cloned()
            .collect()
    }

    /// Aggregates at one AoA, ordered by chord position.
    pub fn profile(&self, aoa: f64) -> Vec<StationAggregate> {
        self.entries
            .iter()
            .filter(|e| (e.aoa - aoa).abs() <= AOA_MATCH)
            .cloned()
            .collect()
    }
}

/// Threshold rule for separation onset: an AoA is separated once its std exceeds
/// `median + k·max(IQR, min_relative_spread·median)` of the attached window
/// (`AoA ≤ attached_max`). Setting `min_relative_spread` to zero gives the plain
/// median + k·IQR rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnsetParams {
    pub k: f64,
    pub attached_max: f64,
    pub min_relative_spread: f64,
}

impl Default for OnsetParams {
    fn default() -> Self {
        OnsetParams {
            k: DEFAULT_ONSET_K,
            attached_max: DEFAULT_ATTACHED_MAX,
            min_relative_spread: DEFAULT_MIN_RELATIVE_SPREAD,
        }
    }
}

impl OnsetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::validation("k", format!("must be positive, got {}", self.k)));
        }
        ensure_finite("attached_max", self.attached_max)?;
        if !(self.min_relative_spread.is_finite() && self.min_relative_spread >= 0.0) {
            return Err(Error::validation(
                "min_relative_spread",
                format!("must be non-negative, got {}", self.min_relative_spread),
            ));
        }
        Ok(())
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Onset threshold computed from the attached part of a curve.
pub fn onset_threshold(curve: &[StationAggregate], params: &OnsetParams) -> Result<f64> {
    params.validate()?;
    let mut attached: Vec<f64> = curve
        .iter()
        .filter(|a| a.aoa <= params.attached_max + AOA_MATCH)
        .map(|a| a.std)
        .collect();
    if attached.len() < MIN_ATTACHED_POINTS {
        return Err(Error::insufficient(format!(
            "onset detection needs {MIN_ATTACHED_POINTS} points with AoA ≤ {}, got {}",
            params.attached_max,
            attached.len()
        )));
    }
    attached.sort_by(f64::total_cmp);
    let median = quantile(&attached, 0.5);
    let iqr = quantile(&attached, 0.75) - quantile(&attached, 0.25);
    let spread = iqr.max(params.min_relative_spread * median.abs());
    Ok(median + params.k * spread)
}

/// Smallest AoA at which the station's fluctuation std exceeds the onset
/// threshold, or `None` when the sweep never separates.
pub fn detect_separation_aoa(curve: &[StationAggregate], params: &OnsetParams) -> Result<Option<f64>> {
    let threshold = onset_threshold(curve, params)?;
    Ok(curve
        .iter()
        .filter(|a| a.std > threshold)
        .map(|a| a.aoa)
        .min_by(f64::total_cmp))
}

/// Chord position of the maximum fluctuation std at one AoA; ties go to the
/// station closest to the trailing edge.
pub fn separation_point_estimate(profile: &[StationAggregate]) -> Result<f64> {
    if profile.len() < 3 {
        return Err(Error::insufficient(format!(
            "separation point needs at least 3 stations, got {}",
            profile.len()
        )));
    }
    let best = profile
        .iter()
        .max_by(|a, b| {
            a.std
                .total_cmp(&b.std)
                .then(a.station.position.total_cmp(&b.station.position))
        })
        .expect("profile is non-empty");
    Ok(best.station.position)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationOnset {
    pub station: ChordStation,
    pub onset_aoa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontEstimate {
    pub aoa: f64,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationEstimate {
    pub per_station_onset: Vec<StationOnset>,
    pub per_aoa_front: Vec<FrontEstimate>,
    pub method_params: OnsetParams,
}

/// Onset for every station with enough attached points and the front at every
/// AoA covered by at least three stations.
pub fn estimate_separation(sweep: &SweepSummary, params: &OnsetParams) -> Result<SeparationEstimate> {
    params.validate()?;
    let mut per_station_onset = Vec::new();
    for station in sweep.stations() {
        let curve = sweep.curve(station);
        match detect_separation_aoa(&curve, params) {
            Ok(onset_aoa) => per_station_onset.push(StationOnset {
                station: station.clone(),
                onset_aoa,
            }),
            Err(Error::InsufficientData(msg)) => {
                log::debug!("skipping onset at x/c = {}: {msg}", station.position);
            }
            Err(e) => return Err(e),
        }
    }
    let per_aoa_front = sweep
        .aoa_grid()
        .iter()
        .filter_map(|&aoa| {
            separation_point_estimate(&sweep.profile(aoa))
                .ok()
                .map(|position| FrontEstimate { aoa, position })
        })
        .collect();
    Ok(SeparationEstimate {
        per_station_onset,
        per_aoa_front,
        method_params: *params,
    })
}

/// Least-squares affine fit of mean pressure against AoA for one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub station: ChordStation,
    /// Pa/deg.
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the fit error, Pa.
    pub residual: f64,
    pub n_points: usize,
}

impl LinearModel {
    pub fn predict(&self, aoa: f64) -> f64 {
        self.slope * aoa + self.intercept
    }
}

fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>();
    (slope, intercept, (rss / n).sqrt())
}

/// Per-station affine fits over the AoA `window` (inclusive).
pub fn fit_linear_models(sweep: &SweepSummary, window: (f64, f64)) -> Result<Vec<LinearModel>> {
    ensure_finite("window", window.0)?;
    ensure_finite("window", window.1)?;
    if window.0 >= window.1 {
        return Err(Error::validation(
            "window",
            format!("lower bound {} must be below upper bound {}", window.0, window.1),
        ));
    }
    let mut models = Vec::with_capacity(sweep.stations().len());
    for station in sweep.stations() {
        let points: Vec<(f64, f64)> = sweep
            .curve(station)
            .iter()
            .filter(|a| a.aoa >= window.0 - AOA_MATCH && a.aoa <= window.1 + AOA_MATCH)
            .map(|a| (a.aoa, a.mean))
            .collect();
        if points.len() < 3 {
            return Err(Error::insufficient(format!(
                "linear fit at x/c = {} needs 3 AoA points in [{}, {}], got {}",
                station.position,
                window.0,
                window.1,
                points.len()
            )));
        }
        let (slope, intercept, residual) = fit_line(&points);
        models.push(LinearModel {
            station: station.clone(),
            slope,
            intercept,
            residual,
            n_points: points.len(),
        });
    }
    Ok(models)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaInference {
    pub aoa: f64,
    /// RMS of `p − (m·aoa + c)` over the stations used, Pa.
    pub residual: f64,
    pub n_stations: usize,
}

/// Weighted least-squares AoA from a snapshot of station means.
///
/// Stations are matched to models by site. Weights are `1/residual²`, or
/// uniform when every model fits exactly.
pub fn infer_aoa(snapshot: &[(ChordStation, f64)], models: &[LinearModel]) -> Result<AoaInference> {
    let pairs: Vec<(&LinearModel, f64)> = snapshot
        .iter()
        .filter_map(|(station, p)| {
            models
                .iter()
                .find(|m| m.station.same_site(station))
                .map(|m| (m, *p))
        })
        .collect();
    if pairs.len() < 2 {
        return Err(Error::insufficient(format!(
            "AoA inference needs 2 stations with fitted models, got {}",
            pairs.len()
        )));
    }
    for (_, p) in &pairs {
        ensure_finite("snapshot", *p)?;
    }
    let exact = pairs.iter().all(|(m, _)| m.residual <= 1e-9);
    let weight = |m: &LinearModel| if exact { 1.0 } else { 1.0 / m.residual.max(1e-9).powi(2) };
    let num = pairs.iter().map(|(m, p)| weight(m) * m.slope * (p - m.intercept)).sum::<f64>();
    let den = pairs.iter().map(|(m, _)| weight(m) * m.slope * m.slope).sum::<f64>();
    if !(den > 0.0) {
        return Err(Error::validation("models", "all station slopes are zero"));
    }
    let aoa = num / den;
    let residual = (pairs.iter().map(|(m, p)| (p - m.predict(aoa)).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt();
    Ok(AoaInference {
        aoa,
        residual,
        n_stations: pairs.len(),
    })
}

/// Pairs every station in `from` with its nearest station in `to`, if within `max_distance`.
pub fn pair_nearest(from: &[ChordStation], to: &[ChordStation], max_distance: f64) -> Vec<(ChordStation, ChordStation)> {
    from.iter()
        .filter_map(|a| {
            to.iter()
                .map(|b| ((a.position - b.position).abs(), b))
                .filter(|(d, _)| *d <= max_distance + 1e-12)
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map(|(_, b)| (a.clone(), b.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub station_xc: f64,
    pub reference_xc: f64,
    pub mean_error_pct: f64,
    pub std_error_pct: f64,
    pub n_aoa: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Denominator of the error percentages.
    pub normalization: String,
    pub rows: Vec<ComparisonRow>,
}

pub const COMPARISON_NORMALIZATION: &str = "reference_aoa_range";

/// Error of `candidate` against `reference` for each station pair, averaged over
/// the shared AoA grid and expressed as a percentage of the reference's range
/// over that grid (mean and std handled separately).
pub fn compare_systems(
    candidate: &SweepSummary,
    reference: &SweepSummary,
    pairing: &[(ChordStation, ChordStation)],
) -> Result<ComparisonReport> {
    if pairing.is_empty() {
        return Err(Error::validation("pairing", "no station pairs to compare"));
    }
    let mut rows = Vec::with_capacity(pairing.len());
    for (cs, rs) in pairing {
        let c_curve = candidate.curve(cs);
        let r_curve = reference.curve(rs);
        let matched: Vec<(&StationAggregate, &StationAggregate)> = c_curve
            .iter()
            .filter_map(|c| r_curve.iter().find(|r| (r.aoa - c.aoa).abs() <= AOA_MATCH).map(|r| (c, r)))
            .collect();
        if matched.len() < 2 {
            return Err(Error::insufficient(format!(
                "pair x/c = {} / {} shares {} AoA values, need 2",
                cs.position,
                rs.position,
                matched.len()
            )));
        }
        let range = |f: fn(&StationAggregate) -> f64| {
            let (lo, hi) = matched
                .iter()
                .map(|(_, r)| f(r))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        let error_pct = |f: fn(&StationAggregate) -> f64, what: &str| -> Result<f64> {
            let r = range(f);
            if !(r > 0.0) {
                return Err(Error::validation(
                    what,
                    format!("reference {what} at x/c = {} does not vary over the sweep", rs.position),
                ));
            }
            let avg = matched.iter().map(|(c, rf)| (f(c) - f(rf)).abs()).sum::<f64>() / matched.len() as f64;
            Ok(100.0 * avg / r)
        };
        rows.push(ComparisonRow {
            station_xc: cs.position,
            reference_xc: rs.position,
            mean_error_pct: error_pct(|a| a.mean, "mean")?,
            std_error_pct: error_pct(|a| a.std, "std")?,
            n_aoa: matched.len(),
        });
    }
    Ok(ComparisonReport {
        normalization: COMPARISON_NORMALIZATION.to_string(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub station_xc: f64,
    pub clean_onset: Option<f64>,
    pub instrumented_onset: Option<f64>,
    /// Clean minus instrumented onset, deg; absent unless both separate.
    pub onset_shift: Option<f64>,
    pub peak_std_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub rows: Vec<ImpactRow>,
    pub method_params: OnsetParams,
}

impl ImpactReport {
    pub fn shifts(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.onset_shift).collect()
    }
}

/// Onset shift and peak-std ratio at every station present in both sweeps.
pub fn impact_shift(clean: &SweepSummary, instrumented: &SweepSummary, params: &OnsetParams) -> Result<ImpactReport> {
    let mut rows = Vec::new();
    for station in clean.stations() {
        if !instrumented.stations().iter().any(|s| s.same_site(station)) {
            continue;
        }
        let c_curve = clean.curve(station);
        let i_curve = instrumented.curve(station);
        let clean_onset = detect_separation_aoa(&c_curve, params)?;
        let instrumented_onset = detect_separation_aoa(&i_curve, params)?;
        let peak = |curve: &[StationAggregate]| curve.iter().map(|a| a.std).fold(f64::NEG_INFINITY, f64::max);
        let (pc, pi) = (peak(&c_curve), peak(&i_curve));
        let peak_std_ratio = if pc > 0.0 {
            pi / pc
        } else if pi == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        rows.push(ImpactRow {
            station_xc: station.position,
            clean_onset,
            instrumented_onset,
            onset_shift: clean_onset.zip(instrumented_onset).map(|(c, i)| c - i),
            peak_std_ratio,
        });
    }
    if rows.is_empty() {
        return Err(Error::validation("stations", "clean and instrumented sweeps share no station"));
    }
    Ok(ImpactReport {
        rows,
        method_params: *params,
    })
}

/// Median of a non-empty slice (mean of the two central values for even length).
pub fn median_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile(&v, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowModelParams;
    use proptest::prelude::*;

    const GRID: [f64; 18] = [
        -10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 4.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0,
    ];

    fn agg(x: f64, kind: SensorKind, aoa: f64, mean: f64, std: f64) -> StationAggregate {
        StationAggregate {
            station: ChordStation::unlabelled(x, kind).unwrap(),
            aoa,
            mean,
            std,
            n_samples: 12_000,
        }
    }

    fn model_sweep(p: &FlowModelParams, xs: &[f64], grid: &[f64], kind: SensorKind) -> SweepSummary {
        let entries = xs
            .iter()
            .flat_map(|&x| {
                grid.iter()
                    .map(move |&a| agg(x, kind, a, p.mean_pressure_at(x, a), p.fluctuation_std_at(x, a)))
            })
            .collect();
        SweepSummary::new(BladeState::Clean, kind, entries).unwrap()
    }

    fn dense_stations() -> Vec<f64> {
        (0..=33).map(|i| 0.01 + 0.03 * i as f64).collect()
    }

    #[test]
    fn sweep_rejects_duplicates_and_foreign_kinds() {
        let e = vec![agg(0.3, SensorKind::Tap, 0.0, 1.0, 1.0), agg(0.3, SensorKind::Tap, 0.0, 2.0, 1.0)];
        assert!(SweepSummary::new(BladeState::Clean, SensorKind::Tap, e).is_err());
        let e = vec![agg(0.3, SensorKind::Mems, 0.0, 1.0, 1.0)];
        assert!(SweepSummary::new(BladeState::Clean, SensorKind::Tap, e).is_err());
        let e = vec![agg(0.3, SensorKind::Tap, 4.0, 1.0, 1.0), agg(0.2, SensorKind::Tap, -2.0, 1.0, 1.0)];
        let s = SweepSummary::new(BladeState::Clean, SensorKind::Tap, e).unwrap();
        assert_eq!(s.aoa_grid(), &[-2.0, 4.0]);
        assert_eq!(s.stations().len(), 2);
        assert_eq!(s.stations()[0].position, 0.2);
    }

    #[test]
    fn onset_on_synthetic_step() {
        let grid = [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0];
        let curve: Vec<_> = grid
            .iter()
            .map(|&a| agg(0.5, SensorKind::Tap, a, 0.0, if a <= 10.0 { 15.0 } else { 135.0 }))
            .collect();
        let p = OnsetParams::default();
        assert_eq!(detect_separation_aoa(&curve, &p).unwrap(), Some(12.0));
        let plain = OnsetParams { min_relative_spread: 0.0, ..p };
        assert_eq!(detect_separation_aoa(&curve, &plain).unwrap(), Some(12.0));
    }

    #[test]
    fn flat_curve_never_separates() {
        let curve: Vec<_> = GRID.iter().map(|&a| agg(0.5, SensorKind::Tap, a, 0.0, 15.0)).collect();
        assert_eq!(detect_separation_aoa(&curve, &OnsetParams::default()).unwrap(), None);
    }

    #[test]
    fn onset_needs_four_attached_points() {
        let curve: Vec<_> = [0.0, 4.0, 8.0, 12.0].iter().map(|&a| agg(0.5, SensorKind::Tap, a, 0.0, 15.0)).collect();
        assert!(matches!(
            detect_separation_aoa(&curve, &OnsetParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn onset_tracks_front_arrival_at_every_station() {
        let p = FlowModelParams::default();
        let sweep = model_sweep(&p, &dense_stations(), &GRID, SensorKind::Tap);
        let est = estimate_separation(&sweep, &OnsetParams::default()).unwrap();
        for so in &est.per_station_onset {
            let arrival = p.front_arrival_aoa(so.station.position);
            let onset = so.onset_aoa.unwrap();
            assert!((onset - arrival).abs() <= 2.0 + 1e-9, "x {} onset {onset} arrival {arrival}", so.station.position);
            assert!(onset >= GRID[0] && onset <= GRID[GRID.len() - 1]);
        }
    }

    #[test]
    fn separation_point_examples() {
        let xs = [0.28, 0.34, 0.40, 0.44, 0.46, 0.49];
        let profile: Vec<_> = xs
            .iter()
            .map(|&x| agg(x, SensorKind::Tap, 14.0, 0.0, if x == 0.44 { 90.0 } else { 20.0 }))
            .collect();
        assert_eq!(separation_point_estimate(&profile).unwrap(), 0.44);
        let tied: Vec<_> = xs
            .iter()
            .map(|&x| agg(x, SensorKind::Tap, 14.0, 0.0, if x == 0.40 || x == 0.46 { 90.0 } else { 20.0 }))
            .collect();
        assert_eq!(separation_point_estimate(&tied).unwrap(), 0.46);
        assert!(separation_point_estimate(&[]).is_err());
        assert!(separation_point_estimate(&profile[..2]).is_err());
    }

    #[test]
    fn front_estimate_from_model_profile() {
        let p = FlowModelParams::default();
        let xs = dense_stations();
        let sweep = model_sweep(&p, &xs, &[18.0], SensorKind::Tap);
        let x = separation_point_estimate(&sweep.profile(18.0)).unwrap();
        assert!((x - 0.5).abs() <= 0.03, "{x}");
    }

    #[test]
    fn front_estimates_move_forward_with_aoa() {
        let p = FlowModelParams::default();
        let sweep = model_sweep(&p, &dense_stations(), &GRID, SensorKind::Tap);
        let est = estimate_separation(&sweep, &OnsetParams::default()).unwrap();
        let fronts: Vec<_> = est
            .per_aoa_front
            .iter()
            .filter(|f| f.aoa > p.te_separation_aoa && f.aoa < p.full_separation_aoa)
            .collect();
        assert!(fronts.len() >= 7);
        for w in fronts.windows(2) {
            assert!(w[1].position <= w[0].position + 0.03);
        }
    }

    #[test]
    fn exact_linear_fit() {
        let entries: Vec<_> = (-5..=5)
            .map(|i| {
                let a = 2.0 * i as f64;
                agg(0.4, SensorKind::Mems, a, -87.5 * a + 12.25, 3.0)
            })
            .collect();
        let sweep = SweepSummary::new(BladeState::Instrumented, SensorKind::Mems, entries).unwrap();
        let m = &fit_linear_models(&sweep, (-10.0, 10.0)).unwrap()[0];
        assert!((m.slope + 87.5).abs() < 1e-9);
        assert!((m.intercept - 12.25).abs() < 1e-9);
        assert!(m.residual < 1e-9);
        assert!(fit_linear_models(&sweep, (0.0, 1.0)).is_err());
    }

    #[test]
    fn model_slope_is_recovered() {
        let p = FlowModelParams::default();
        let sweep = model_sweep(&p, &[0.28, 0.55], &GRID, SensorKind::Mems);
        let models = fit_linear_models(&sweep, DEFAULT_LINEAR_WINDOW).unwrap();
        let m = &models[0];
        assert!((m.slope / -110.8 - 1.0).abs() < 0.01, "{}", m.slope);
        assert!(models.iter().all(|m| m.residual < 1e-6));
    }

    #[test]
    fn infer_aoa_on_exact_models() {
        let p = FlowModelParams::default();
        let xs = [0.28, 0.34, 0.40, 0.46, 0.55];
        let sweep = model_sweep(&p, &xs, &GRID, SensorKind::Mems);
        let models = fit_linear_models(&sweep, DEFAULT_LINEAR_WINDOW).unwrap();
        let snapshot: Vec<_> = xs
            .iter()
            .map(|&x| (ChordStation::unlabelled(x, SensorKind::Mems).unwrap(), p.mean_pressure_at(x, 5.0)))
            .collect();
        let inf = infer_aoa(&snapshot, &models).unwrap();
        assert!((inf.aoa - 5.0).abs() < 1e-6, "{}", inf.aoa);
        assert_eq!(inf.n_stations, 5);
    }

    #[test]
    fn separated_snapshot_raises_inference_residual() {
        let p = FlowModelParams::default();
        let xs = [0.28, 0.40, 0.55, 0.70, 0.85, 0.94];
        let sweep = model_sweep(&p, &xs, &GRID, SensorKind::Mems);
        let models: Vec<_> = fit_linear_models(&sweep, DEFAULT_LINEAR_WINDOW)
            .unwrap()
            .into_iter()
            .map(|m| LinearModel { residual: 1.0, ..m })
            .collect();
        let snap = |a: f64| -> Vec<(ChordStation, f64)> {
            xs.iter()
                .map(|&x| (ChordStation::unlabelled(x, SensorKind::Mems).unwrap(), p.mean_pressure_at(x, a) + 1.0))
                .collect()
        };
        let attached = infer_aoa(&snap(5.0), &models).unwrap();
        let separated = infer_aoa(&snap(12.0), &models).unwrap();
        assert!(separated.residual > 5.0 * attached.residual.max(1.0), "{separated:?} vs {attached:?}");
    }

    #[test]
    fn infer_aoa_rejects_flat_models() {
        let st = |x| ChordStation::unlabelled(x, SensorKind::Mems).unwrap();
        let models = vec![
            LinearModel { station: st(0.3), slope: 0.0, intercept: 1.0, residual: 0.0, n_points: 5 },
            LinearModel { station: st(0.4), slope: 0.0, intercept: 2.0, residual: 0.0, n_points: 5 },
        ];
        assert!(infer_aoa(&[(st(0.3), 1.0), (st(0.4), 2.0)], &models).is_err());
        assert!(infer_aoa(&[(st(0.3), 1.0)], &models).is_err());
    }

    fn paired_sweeps(offsets: &[(f64, f64, f64)]) -> (SweepSummary, SweepSummary, Vec<(ChordStation, ChordStation)>) {
        // (aoa, scanner mean, mems offset)
        let mut m = Vec::new();
        let mut s = Vec::new();
        for (i, &(a, mean, off)) in offsets.iter().enumerate() {
            s.push(agg(0.28, SensorKind::Tap, a, mean, 10.0 + i as f64));
            m.push(agg(0.28, SensorKind::Mems, a, mean + off, 10.0 + i as f64));
        }
        let ms = SweepSummary::new(BladeState::Instrumented, SensorKind::Mems, m).unwrap();
        let ss = SweepSummary::new(BladeState::Instrumented, SensorKind::Tap, s).unwrap();
        let pairs = pair_nearest(ms.stations(), ss.stations(), DEFAULT_PAIRING_DISTANCE);
        (ms, ss, pairs)
    }

    #[test]
    fn comparison_hand_example() {
        let (ms, ss, pairs) = paired_sweeps(&[(0.0, -100.0, -10.0), (4.0, -200.0, -10.0)]);
        let rep = compare_systems(&ms, &ss, &pairs).unwrap();
        assert!((rep.rows[0].mean_error_pct - 10.0).abs() < 1e-12);
        assert_eq!(rep.rows[0].std_error_pct, 0.0);
        let self_rep = compare_systems(&ss, &ss, &pair_nearest(ss.stations(), ss.stations(), 0.05)).unwrap();
        assert_eq!((self_rep.rows[0].mean_error_pct, self_rep.rows[0].std_error_pct), (0.0, 0.0));
    }

    #[test]
    fn comparison_rejects_flat_reference() {
        let (ms, ss, pairs) = paired_sweeps(&[(0.0, -100.0, 1.0), (4.0, -100.0, 1.0)]);
        assert!(compare_systems(&ms, &ss, &pairs).is_err());
        assert!(compare_systems(&ms, &ss, &[]).is_err());
    }

    #[test]
    fn larger_offset_ramp_gives_larger_error() {
        let grid: Vec<f64> = (0..8).map(|i| -10.0 + 2.5 * i as f64).collect();
        let ramp = |lo: f64, hi: f64| -> Vec<(f64, f64, f64)> {
            grid.iter()
                .enumerate()
                .map(|(i, &a)| (a, -100.0 + -110.8 * a, lo + (hi - lo) * i as f64 / 7.0))
                .collect()
        };
        let (m1, s1, p1) = paired_sweeps(&ramp(110.0, 210.0));
        let (m2, s2, p2) = paired_sweeps(&ramp(35.0, 70.0));
        let e1 = compare_systems(&m1, &s1, &p1).unwrap().rows[0].mean_error_pct;
        let e2 = compare_systems(&m2, &s2, &p2).unwrap().rows[0].mean_error_pct;
        assert!(e1 > e2, "{e1} vs {e2}");
    }

    #[test]
    fn pairing_uses_nearest_within_threshold() {
        let st = |x, k| ChordStation::unlabelled(x, k).unwrap();
        let mems = [st(0.28, SensorKind::Mems), st(0.31, SensorKind::Mems), st(0.415, SensorKind::Mems)];
        let taps = [st(0.25, SensorKind::Tap), st(0.28, SensorKind::Tap), st(0.34, SensorKind::Tap)];
        let pairs = pair_nearest(&mems, &taps, 0.05);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].1.position, 0.28);
        assert_eq!(pairs[1].1.position, 0.28);
    }

    #[test]
    fn impact_examples() {
        let grid = [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 11.0, 12.0, 14.0];
        let curve = |onset: f64, peak: f64| -> Vec<StationAggregate> {
            grid.iter()
                .map(|&a| agg(0.44, SensorKind::Tap, a, 0.0, if a >= onset { peak } else { 15.0 }))
                .collect()
        };
        let clean = SweepSummary::new(BladeState::Clean, SensorKind::Tap, curve(12.0, 120.0)).unwrap();
        let inst = SweepSummary::new(BladeState::Instrumented, SensorKind::Tap, curve(11.0, 150.0)).unwrap();
        let rep = impact_shift(&clean, &inst, &OnsetParams::default()).unwrap();
        assert_eq!(rep.rows[0].onset_shift, Some(1.0));
        assert!((rep.rows[0].peak_std_ratio - 1.25).abs() < 1e-12);
        let same = impact_shift(&clean, &clean, &OnsetParams::default()).unwrap();
        assert_eq!(same.rows[0].onset_shift, Some(0.0));
        assert_eq!(same.rows[0].peak_std_ratio, 1.0);
    }

    #[test]
    fn impact_of_lowered_te_is_quantized_to_sweep_step() {
        let p = FlowModelParams::default();
        let xs = [0.25, 0.28, 0.34, 0.40, 0.44, 0.46, 0.49, 0.55];
        let clean = model_sweep(&p, &xs, &GRID, SensorKind::Tap);
        let inst_entries = model_sweep(&p.with_te_shift(-1.0), &xs, &GRID, SensorKind::Tap).entries().to_vec();
        let inst = SweepSummary::new(BladeState::Instrumented, SensorKind::Tap, inst_entries).unwrap();
        let rep = impact_shift(&clean, &inst, &OnsetParams::default()).unwrap();
        for s in rep.shifts() {
            assert!([0.0, 1.0, 2.0].contains(&s), "{s}");
        }
    }

    #[test]
    fn median_helper() {
        assert_eq!(median_of(&[0.0, 2.0, 2.0, 0.0]), Some(1.0));
        assert_eq!(median_of(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median_of(&[]), None);
    }

    fn arb_sweep() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>)> {
        (
            proptest::collection::vec((-2000.0f64..2000.0, 1.0f64..200.0), 6),
            proptest::collection::vec((-2000.0f64..2000.0, 1.0f64..200.0), 6),
        )
    }

    proptest! {
        #[test]
        fn comparison_shift_invariance_and_offset_linearity((a, b) in arb_sweep(), c in -1e4f64..1e4, off in 0.0f64..500.0) {
            let grid = [-10.0, -6.0, -2.0, 4.0, 8.0, 12.0];
            let build = |vals: &[(f64, f64)], kind, shift: f64| {
                let e = vals.iter().zip(grid).map(|(&(m, s), a)| agg(0.3, kind, a, m + shift, s)).collect();
                SweepSummary::new(BladeState::Instrumented, kind, e).unwrap()
            };
            let s = build(&a, SensorKind::Tap, 0.0);
            let m = build(&b, SensorKind::Mems, 0.0);
            let pairs = pair_nearest(m.stations(), s.stations(), 0.05);
            let base = compare_systems(&m, &s, &pairs).unwrap();
            let shifted = compare_systems(&build(&b, SensorKind::Mems, c), &build(&a, SensorKind::Tap, c), &pairs).unwrap();
            prop_assert!((base.rows[0].mean_error_pct - shifted.rows[0].mean_error_pct).abs() <= 1e-6 * (1.0 + base.rows[0].mean_error_pct));
            // pure offset on one system
            let same = build(&a, SensorKind::Mems, off);
            let r = compare_systems(&same, &s, &pairs).unwrap();
            let range = a.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max) - a.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
            prop_assert!((r.rows[0].mean_error_pct - 100.0 * off / range).abs() <= 1e-6 * (1.0 + r.rows[0].mean_error_pct));
        }

        #[test]
        fn infer_aoa_is_exact_for_any_weights(
            lines in proptest::collection::vec((-200.0f64..-5.0, -500.0f64..500.0, 0.0f64..10.0), 2..8),
            aoa in -10.0f64..8.0,
        ) {
            let models: Vec<_> = lines.iter().enumerate().map(|(i, &(m, c, r))| LinearModel {
                station: ChordStation::unlabelled(0.1 + 0.1 * i as f64, SensorKind::Mems).unwrap(),
                slope: m, intercept: c, residual: r, n_points: 8,
            }).collect();
            let snapshot: Vec<_> = models.iter().map(|m| (m.station.clone(), m.predict(aoa))).collect();
            let inf = infer_aoa(&snapshot, &models).unwrap();
            prop_assert!((inf.aoa - aoa).abs() < 1e-9);
        }

        #[test]
        fn impact_of_identical_sweeps_is_null(stds in proptest::collection::vec(1.0f64..200.0, 12)) {
            let grid = [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0];
            let e: Vec<_> = grid.iter().zip(&stds).map(|(&a, &s)| agg(0.4, SensorKind::Tap, a, 0.0, s)).collect();
            let sw = SweepSummary::new(BladeState::Clean, SensorKind::Tap, e).unwrap();
            let rep = impact_shift(&sw, &sw, &OnsetParams::default()).unwrap();
            for r in &rep.rows {
                prop_assert_eq!(r.peak_std_ratio, 1.0);
                prop_assert!(r.onset_shift.is_none_or(|s| s == 0.0));
            }
        }
    }
}
