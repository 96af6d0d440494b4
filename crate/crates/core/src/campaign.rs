//! Campaign orchestration: simulate runs to disk, process them into aggregates,
//! derive the analysis reports and compare two campaigns.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    compare_systems, estimate_separation, fit_linear_models, impact_shift, ComparisonReport, ImpactReport, LinearModel,
    OnsetParams, SeparationEstimate, SweepSummary, DEFAULT_LINEAR_WINDOW, DEFAULT_PAIRING_DISTANCE,
};
use crate::error::{Error, Result};
use crate::flow::{ground_truth_series, ChordStation, FlowConditions, SensorKind};
use crate::io::{
    read_aggregates_csv, read_json, read_series_csv, write_aggregates_csv, write_json, write_series_csv,
    write_table_csv, AggregateRecord, CampaignManifest, ChannelEntry, RunEntry, RunIndex, COMPARISON_HEADER,
    IMPACT_HEADER, RUN_INDEX_FILE,
};
use crate::pipeline::{
    calibrate_alpha, process_run, AcquisitionRun, BladeState, CalibrationParams, ChannelData, ProcessingOptions,
    StationAggregate,
};
use crate::seed::channel_seed;
use crate::sensor::{draw_mems_offset, mems_acquire_with_offset, scanner_acquire, sync_pulses, ScannerSpec};
use crate::series::TimeSeries;

pub const MEMS_BOARD: &str = "mems";
pub const SCANNER_BOARD: &str = "scanner";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const CALIBRATION_FILE: &str = "calibration.json";

fn truth_key(run_id: &str, x: f64) -> String {
    format!("{run_id}/truth@{x}")
}

/// Simulates one run of `manifest` in memory.
pub fn simulate_run(manifest: &CampaignManifest, state: BladeState, index: usize) -> Result<AcquisitionRun> {
    let aoa = *manifest
        .aoa_list
        .get(index)
        .ok_or_else(|| Error::validation("index", format!("run {index} is outside the AoA list")))?;
    let run_id = manifest.run_id(state, index);
    let conditions = FlowConditions::new(
        manifest.wind_speed,
        manifest.air_density,
        manifest.atmospheric_pressure,
        manifest.stagnation_factor,
    )?;
    let flow = match state {
        BladeState::Instrumented => manifest.flow.with_te_shift(manifest.instrumented_te_shift),
        BladeState::Clean => manifest.flow.clone(),
    };
    let clock = manifest.mems_clock_offset;

    let mut truths: BTreeMap<u64, TimeSeries> = BTreeMap::new();
    let mut channels = Vec::new();
    let mut stationary = Vec::new();
    for station in manifest.stations_for(state) {
        let key = station.position.to_bits();
        if !truths.contains_key(&key) {
            let seed = channel_seed(manifest.seed, &truth_key(&run_id, station.position));
            let truth = ground_truth_series(&station, aoa, &flow, manifest.duration, manifest.master_rate, seed)?;
            truths.insert(key, truth);
        }
        let truth = &truths[&key];
        let noise_seed = channel_seed(manifest.seed, &format!("{run_id}/{}", station.label));
        match station.kind {
            SensorKind::Mems => {
                let offset = draw_mems_offset(&manifest.mems, channel_seed(manifest.seed, &station.label));
                let series = mems_acquire_with_offset(truth, &manifest.mems, &conditions, offset, noise_seed)?
                    .with_channel(station.label.clone())
                    .with_start_time(clock);
                let n_still = (manifest.stationary_duration * manifest.mems.sample_rate).round() as usize;
                let still_truth = TimeSeries::constant("wind-off", manifest.mems.sample_rate, n_still, 0.0)?;
                let still_seed = channel_seed(manifest.seed, &format!("{run_id}/{}/stationary", station.label));
                let still = mems_acquire_with_offset(&still_truth, &manifest.mems, &conditions.wind_off(), offset, still_seed)?
                    .with_channel(station.label.clone());
                stationary.push(ChannelData {
                    station: station.clone(),
                    board: MEMS_BOARD.to_string(),
                    series: still,
                });
                channels.push(ChannelData {
                    station,
                    board: MEMS_BOARD.to_string(),
                    series,
                });
            }
            SensorKind::Tap => {
                let series = scanner_acquire(truth, &manifest.scanner, noise_seed)?.with_channel(station.label.clone());
                channels.push(ChannelData {
                    station,
                    board: SCANNER_BOARD.to_string(),
                    series,
                });
            }
        }
    }

    let reference = sync_pulses(manifest.duration)?;
    let mut pulses = BTreeMap::new();
    if channels.iter().any(|c| c.board == MEMS_BOARD) {
        pulses.insert(MEMS_BOARD.to_string(), reference.iter().map(|p| p + clock).collect());
    }
    if channels.iter().any(|c| c.board == SCANNER_BOARD) {
        pulses.insert(SCANNER_BOARD.to_string(), reference);
    }
    Ok(AcquisitionRun {
        run_id,
        aoa,
        conditions,
        blade_state: state,
        stationary,
        channels,
        pulses,
    })
}

/// All runs of the manifest, blade state by blade state, in AoA order.
pub fn run_plan(manifest: &CampaignManifest) -> Vec<(BladeState, usize)> {
    manifest
        .blade_states
        .iter()
        .flat_map(|&s| (0..manifest.aoa_list.len()).map(move |i| (s, i)))
        .collect()
}

fn channel_entry(run_id: &str, file_channel: &str, data: &ChannelData) -> ChannelEntry {
    ChannelEntry {
        file: format!("{run_id}__{file_channel}.csv"),
        channel: data.series.channel().to_string(),
        station_xc: data.station.position,
        kind: data.station.kind,
        board: data.board.clone(),
        sample_rate: data.series.sample_rate(),
        start_time: data.series.start_time(),
    }
}

/// Simulates every run of `manifest` into `out_dir` and writes the run index.
pub fn simulate_campaign(manifest: &CampaignManifest, out_dir: &Path) -> Result<RunIndex> {
    manifest.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut runs = Vec::new();
    for (state, i) in run_plan(manifest) {
        let run = simulate_run(manifest, state, i)?;
        log::info!("simulated {} (AoA {} deg, {} channels)", run.run_id, run.aoa, run.channels.len());
        let mut stationary = Vec::new();
        for s in &run.stationary {
            let entry = channel_entry(&run.run_id, &format!("stationary_{}", s.series.channel()), s);
            write_series_csv(&out_dir.join(&entry.file), &s.series)?;
            stationary.push(entry);
        }
        let mut channels = Vec::new();
        for c in &run.channels {
            let entry = channel_entry(&run.run_id, c.series.channel(), c);
            write_series_csv(&out_dir.join(&entry.file), &c.series)?;
            channels.push(entry);
        }
        runs.push(RunEntry {
            run_id: run.run_id.clone(),
            aoa_deg: run.aoa,
            wind_speed_mps: manifest.wind_speed,
            air_density_kgm3: manifest.air_density,
            blade_state: state,
            sync_pulses: run.pulses.clone(),
            stationary,
            channels,
        });
    }
    let index = RunIndex {
        campaign_id: manifest.campaign_id.clone(),
        reference_aoa: manifest.reference_aoa,
        scanner: manifest.scanner.clone(),
        runs,
    };
    write_json(&out_dir.join(RUN_INDEX_FILE), &index)?;
    Ok(index)
}

fn load_channel(base: &Path, entry: &ChannelEntry) -> Result<ChannelData> {
    let series = read_series_csv(&base.join(&entry.file), &entry.channel, Some(entry.sample_rate))?;
    Ok(ChannelData {
        station: entry.station()?,
        board: entry.board.clone(),
        series,
    })
}

/// Reads the files of one indexed run.
pub fn load_run(entry: &RunEntry, base: &Path) -> Result<AcquisitionRun> {
    let conditions = FlowConditions::new(
        entry.wind_speed_mps,
        entry.air_density_kgm3,
        FlowConditions::DEFAULT_ATMOSPHERIC_PRESSURE,
        1.0,
    )?;
    Ok(AcquisitionRun {
        run_id: entry.run_id.clone(),
        aoa: entry.aoa_deg,
        conditions,
        blade_state: entry.blade_state,
        stationary: entry.stationary.iter().map(|c| load_channel(base, c)).collect::<Result<_>>()?,
        channels: entry.channels.iter().map(|c| load_channel(base, c)).collect::<Result<_>>()?,
        pulses: entry.sync_pulses.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSource {
    Calibrated,
    Override,
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: String,
    pub error: String,
}

/// Calibration record written next to the aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub alpha: f64,
    pub reference_aoa: f64,
    pub source: AlphaSource,
    /// Blade state of every run in the aggregates.
    pub runs: BTreeMap<String, BladeState>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone)]
pub struct ProcessOutcome {
    pub records: Vec<AggregateRecord>,
    pub calibration: CalibrationRecord,
}

impl ProcessOutcome {
    pub fn failures(&self) -> &[RunFailure] {
        &self.calibration.failures
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProcessConfig {
    pub alpha_override: Option<f64>,
    pub processing: ProcessingOptions,
}

/// Processes runs obtained through `load`, isolating per-run failures.
///
/// Unless overridden, `α` is calibrated first on the instrumented runs at
/// `reference_aoa`; all runs are then processed with it.
pub fn process_runs<F>(
    run_ids: &[(String, BladeState, f64)],
    mut load: F,
    scanner: &ScannerSpec,
    reference_aoa: f64,
    config: &ProcessConfig,
) -> Result<ProcessOutcome>
where
    F: FnMut(&str) -> Result<AcquisitionRun>,
{
    let mut failures: BTreeMap<String, String> = BTreeMap::new();
    let (alpha, source) = match config.alpha_override {
        Some(a) => (CalibrationParams::new(a, reference_aoa)?.alpha, AlphaSource::Override),
        None => {
            let mut mems = Vec::new();
            let mut taps = Vec::new();
            let mut q_inf = None;
            for (id, state, aoa) in run_ids {
                if *state != BladeState::Instrumented || (aoa - reference_aoa).abs() > 1e-9 {
                    continue;
                }
                match load(id).and_then(|run| process_run(&run, scanner, &config.processing, None)) {
                    Ok(p) => {
                        q_inf.get_or_insert(p.q_inf);
                        for a in p.aggregates {
                            match a.station.kind {
                                SensorKind::Mems => mems.push(a),
                                SensorKind::Tap => taps.push(a),
                            }
                        }
                    }
                    Err(e) => {
                        failures.insert(id.clone(), e.to_string());
                    }
                }
            }
            match q_inf.map(|q| calibrate_alpha(&mems, &taps, q, reference_aoa)) {
                Some(Ok(cal)) => (cal.alpha, AlphaSource::Calibrated),
                Some(Err(e)) => {
                    log::warn!("calibration failed ({e}); using alpha = 1");
                    (1.0, AlphaSource::Default)
                }
                None => {
                    log::warn!("no instrumented run at the reference AoA {reference_aoa} deg; using alpha = 1");
                    (1.0, AlphaSource::Default)
                }
            }
        }
    };
    log::info!("alpha = {alpha} ({source:?})");
    let cal = CalibrationParams::new(alpha, reference_aoa)?;

    let mut records = Vec::new();
    let mut runs = BTreeMap::new();
    for (id, state, _) in run_ids {
        if failures.contains_key(id) {
            continue;
        }
        match load(id).and_then(|run| process_run(&run, scanner, &config.processing, Some(&cal))) {
            Ok(p) => {
                runs.insert(id.clone(), *state);
                records.extend(p.aggregates.into_iter().map(|aggregate| AggregateRecord {
                    run_id: id.clone(),
                    aggregate,
                }));
            }
            Err(e) => {
                log::error!("run {id}: {e}");
                failures.insert(id.clone(), e.to_string());
            }
        }
    }
    Ok(ProcessOutcome {
        records,
        calibration: CalibrationRecord {
            alpha,
            reference_aoa,
            source,
            runs,
            failures: failures
                .into_iter()
                .map(|(run_id, error)| RunFailure { run_id, error })
                .collect(),
        },
    })
}

/// Processes the campaign behind `index_path` and writes the aggregates and
/// calibration record into `out_dir`. Per-run failures are listed in the outcome.
pub fn process_campaign(index_path: &Path, out_dir: &Path, config: &ProcessConfig) -> Result<ProcessOutcome> {
    let index = RunIndex::load(index_path)?;
    let base = RunIndex::base_dir(index_path);
    let plan: Vec<(String, BladeState, f64)> = index
        .runs
        .iter()
        .map(|r| (r.run_id.clone(), r.blade_state, r.aoa_deg))
        .collect();
    let by_id: BTreeMap<&str, &RunEntry> = index.runs.iter().map(|r| (r.run_id.as_str(), r)).collect();
    let outcome = process_runs(
        &plan,
        |id| load_run(by_id[id], &base),
        &index.scanner,
        index.reference_aoa,
        config,
    )?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_aggregates_csv(&out_dir.join(AGGREGATES_FILE), &outcome.records)?;
    write_json(&out_dir.join(CALIBRATION_FILE), &outcome.calibration)?;
    Ok(outcome)
}

fn infer_state(run_id: &str) -> Option<BladeState> {
    if run_id.contains("_clean_") {
        Some(BladeState::Clean)
    } else if run_id.contains("_instrumented_") {
        Some(BladeState::Instrumented)
    } else {
        None
    }
}

/// Blade state of each run: from the calibration record beside the aggregates
/// when present, otherwise from the run identifier (unknown runs count as instrumented).
pub fn blade_states_for(aggregates_path: &Path, records: &[AggregateRecord]) -> Result<BTreeMap<String, BladeState>> {
    let cal_path = aggregates_path.with_file_name(CALIBRATION_FILE);
    let known: BTreeMap<String, BladeState> = if cal_path.exists() {
        read_json::<CalibrationRecord>(&cal_path)?.runs
    } else {
        BTreeMap::new()
    };
    let mut out = BTreeMap::new();
    for r in records {
        if out.contains_key(&r.run_id) {
            continue;
        }
        let state = known.get(&r.run_id).copied().or_else(|| infer_state(&r.run_id)).unwrap_or_else(|| {
            log::warn!("blade state of run `{}` unknown; treating it as instrumented", r.run_id);
            BladeState::Instrumented
        });
        out.insert(r.run_id.clone(), state);
    }
    Ok(out)
}

/// Splits aggregates into one sweep per (blade state, sensor kind).
pub fn build_sweeps(
    records: &[AggregateRecord],
    states: &BTreeMap<String, BladeState>,
) -> Result<BTreeMap<(BladeState, SensorKind), SweepSummary>> {
    let mut groups: BTreeMap<(BladeState, SensorKind), Vec<StationAggregate>> = BTreeMap::new();
    for r in records {
        let state = states.get(&r.run_id).copied().unwrap_or(BladeState::Instrumented);
        groups
            .entry((state, r.aggregate.station.kind))
            .or_default()
            .push(r.aggregate.clone());
    }
    groups
        .into_iter()
        .map(|((state, kind), entries)| {
            SweepSummary::new(state, kind, entries)
                .map(|s| ((state, kind), s))
                .map_err(|e| match e {
                    Error::Validation { field, message } => {
                        Error::validation(field, format!("{state} {kind} sweep: {message}"))
                    }
                    other => other,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeparation {
    pub blade_state: BladeState,
    pub kind: SensorKind,
    pub estimate: SeparationEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepModels {
    pub blade_state: BladeState,
    pub kind: SensorKind,
    pub window: (f64, f64),
    pub models: Vec<LinearModel>,
}

/// Index of what `analyze` produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub onset_params: OnsetParams,
    pub pairing_distance: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the plot-ready tables and reports derived from an aggregates file.
pub fn analyze_campaign(aggregates_path: &Path, out_dir: &Path, params: &OnsetParams) -> Result<AnalysisSummary> {
    params.validate()?;
    let records = read_aggregates_csv(aggregates_path)?;
    if records.is_empty() {
        return Err(Error::parse(aggregates_path, "no aggregates"));
    }
    let states = blade_states_for(aggregates_path, &records)?;
    let sweeps = build_sweeps(&records, &states)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Vec::new();
    let mut notes = Vec::new();
    let emit = |name: &str, outputs: &mut Vec<String>| -> PathBuf {
        outputs.push(name.to_string());
        out_dir.join(name)
    };

    let mut curves = Vec::new();
    let mut profiles = Vec::new();
    for ((state, kind), sweep) in &sweeps {
        for e in sweep.entries() {
            curves.push(vec![
                state.to_string(),
                kind.to_string(),
                e.station.position.to_string(),
                e.aoa.to_string(),
                e.mean.to_string(),
                e.std.to_string(),
            ]);
        }
        for &aoa in sweep.aoa_grid() {
            for e in sweep.profile(aoa) {
                profiles.push(vec![
                    state.to_string(),
                    kind.to_string(),
                    aoa.to_string(),
                    e.station.position.to_string(),
                    e.mean.to_string(),
                    e.std.to_string(),
                ]);
            }
        }
    }
    write_table_csv(
        &emit("suction_curves.csv", &mut outputs),
        &["blade_state", "kind", "station_xc", "aoa_deg", "mean_pa", "std_pa"],
        curves,
    )?;
    write_table_csv(
        &emit("chordwise_profiles.csv", &mut outputs),
        &["blade_state", "kind", "aoa_deg", "station_xc", "mean_pa", "std_pa"],
        profiles,
    )?;

    let mut separations = Vec::new();
    let mut models = Vec::new();
    for ((state, kind), sweep) in &sweeps {
        match estimate_separation(sweep, params) {
            Ok(estimate) => separations.push(SweepSeparation {
                blade_state: *state,
                kind: *kind,
                estimate,
            }),
            Err(e) => notes.push(format!("separation for {state} {kind}: {e}")),
        }
        match fit_linear_models(sweep, DEFAULT_LINEAR_WINDOW) {
            Ok(m) => models.push(SweepModels {
                blade_state: *state,
                kind: *kind,
                window: DEFAULT_LINEAR_WINDOW,
                models: m,
            }),
            Err(e) => notes.push(format!("linear models for {state} {kind}: {e}")),
        }
    }
    let onset_rows = separations
        .iter()
        .flat_map(|s| {
            s.estimate.per_station_onset.iter().map(move |o| {
                vec![
                    s.blade_state.to_string(),
                    s.kind.to_string(),
                    o.station.position.to_string(),
                    fmt_opt(o.onset_aoa),
                ]
            })
        })
        .collect();
    write_table_csv(
        &emit("separation_onsets.csv", &mut outputs),
        &["blade_state", "kind", "station_xc", "onset_deg"],
        onset_rows,
    )?;
    let front_rows = separations
        .iter()
        .flat_map(|s| {
            s.estimate.per_aoa_front.iter().map(move |f| {
                vec![
                    s.blade_state.to_string(),
                    s.kind.to_string(),
                    f.aoa.to_string(),
                    f.position.to_string(),
                ]
            })
        })
        .collect();
    write_table_csv(
        &emit("separation_fronts.csv", &mut outputs),
        &["blade_state", "kind", "aoa_deg", "front_xc"],
        front_rows,
    )?;
    write_json(&emit("separation.json", &mut outputs), &separations)?;
    let model_rows = models
        .iter()
        .flat_map(|s| {
            s.models.iter().map(move |m| {
                vec![
                    s.blade_state.to_string(),
                    s.kind.to_string(),
                    m.station.position.to_string(),
                    m.slope.to_string(),
                    m.intercept.to_string(),
                    m.residual.to_string(),
                ]
            })
        })
        .collect();
    write_table_csv(
        &emit("linear_models.csv", &mut outputs),
        &["blade_state", "kind", "station_xc", "slope_pa_per_deg", "intercept_pa", "residual_pa"],
        model_rows,
    )?;

    let inst_mems = sweeps.get(&(BladeState::Instrumented, SensorKind::Mems));
    let inst_taps = sweeps.get(&(BladeState::Instrumented, SensorKind::Tap));
    match (inst_mems, inst_taps) {
        (Some(m), Some(t)) => {
            let pairs = nearest_pairs(m.stations(), t.stations(), DEFAULT_PAIRING_DISTANCE);
            match compare_systems(m, t, &pairs) {
                Ok(report) => {
                    write_comparison(out_dir, &report, &mut outputs)?;
                }
                Err(e) => notes.push(format!("comparison not produced: {e}")),
            }
        }
        _ => notes.push("comparison not produced: needs instrumented MEMS and tap data".to_string()),
    }

    let clean_taps = sweeps.get(&(BladeState::Clean, SensorKind::Tap));
    match (clean_taps, inst_taps) {
        (Some(c), Some(i)) => match impact_shift(c, i, params) {
            Ok(report) => write_impact(out_dir, &report, &mut outputs)?,
            Err(e) => notes.push(format!("impact report not produced: {e}")),
        },
        (None, _) => notes.push("impact report not produced: no clean-blade runs".to_string()),
        (_, None) => notes.push("impact report not produced: no instrumented tap data".to_string()),
    }

    let summary = AnalysisSummary {
        outputs: outputs.clone(),
        notes,
        onset_params: *params,
        pairing_distance: DEFAULT_PAIRING_DISTANCE,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_comparison(out_dir: &Path, report: &ComparisonReport, outputs: &mut Vec<String>) -> Result<()> {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.station_xc.to_string(),
                r.mean_error_pct.to_string(),
                r.std_error_pct.to_string(),
            ]
        })
        .collect();
    write_table_csv(&out_dir.join("comparison.csv"), &COMPARISON_HEADER, rows)?;
    write_json(&out_dir.join("comparison.json"), report)?;
    outputs.push("comparison.csv".to_string());
    outputs.push("comparison.json".to_string());
    Ok(())
}

fn write_impact(out_dir: &Path, report: &ImpactReport, outputs: &mut Vec<String>) -> Result<()> {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.station_xc.to_string(),
                fmt_opt(r.onset_shift),
                r.peak_std_ratio.to_string(),
            ]
        })
        .collect();
    write_table_csv(&out_dir.join("impact.csv"), &IMPACT_HEADER, rows)?;
    write_json(&out_dir.join("impact.json"), report)?;
    outputs.push("impact.csv".to_string());
    outputs.push("impact.json".to_string());
    Ok(())
}

/// Nearest reference station for each candidate within `max_distance`; on equal
/// distance a station of the candidate's own kind wins.
pub fn nearest_pairs(
    candidates: &[ChordStation],
    references: &[ChordStation],
    max_distance: f64,
) -> Vec<(ChordStation, ChordStation)> {
    candidates
        .iter()
        .filter_map(|c| {
            references
                .iter()
                .map(|r| ((c.position - r.position).abs(), r.kind != c.kind, r))
                .filter(|(d, _, _)| *d <= max_distance + 1e-12)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, _, r)| (c.clone(), r.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub max_distance: f64,
    pub blade_state: Option<BladeState>,
    pub candidate_kind: Option<SensorKind>,
    pub reference_kind: Option<SensorKind>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            max_distance: DEFAULT_PAIRING_DISTANCE,
            blade_state: None,
            candidate_kind: None,
            reference_kind: None,
        }
    }
}

fn select_records(
    records: &[AggregateRecord],
    states: &BTreeMap<String, BladeState>,
    state: BladeState,
    kind: Option<SensorKind>,
) -> Vec<StationAggregate> {
    records
        .iter()
        .filter(|r| states.get(&r.run_id) == Some(&state))
        .filter(|r| kind.is_none_or(|k| r.aggregate.station.kind == k))
        .map(|r| r.aggregate.clone())
        .collect()
}

/// Compares the stations of `candidate` with the nearest stations of `reference`.
pub fn compare_campaigns(
    candidate_path: &Path,
    reference_path: &Path,
    out_dir: &Path,
    options: &CompareOptions,
) -> Result<ComparisonReport> {
    if !(options.max_distance.is_finite() && options.max_distance >= 0.0) {
        return Err(Error::validation("max_distance", "must be non-negative"));
    }
    let cand = read_aggregates_csv(candidate_path)?;
    let refr = read_aggregates_csv(reference_path)?;
    let cand_states = blade_states_for(candidate_path, &cand)?;
    let ref_states = blade_states_for(reference_path, &refr)?;
    let state = match options.blade_state {
        Some(s) => s,
        None => [BladeState::Instrumented, BladeState::Clean]
            .into_iter()
            .find(|s| cand_states.values().any(|v| v == s) && ref_states.values().any(|v| v == s))
            .ok_or_else(|| Error::validation("blade_state", "the two campaigns share no blade state"))?,
    };
    let c_entries = select_records(&cand, &cand_states, state, options.candidate_kind);
    let r_entries = select_records(&refr, &ref_states, state, options.reference_kind);

    let mut pairs = Vec::new();
    let mut report = ComparisonReport {
        normalization: crate::analysis::COMPARISON_NORMALIZATION.to_string(),
        rows: Vec::new(),
    };
    for c_kind in [SensorKind::Mems, SensorKind::Tap] {
        let c_kind_entries: Vec<_> = c_entries.iter().filter(|a| a.station.kind == c_kind).cloned().collect();
        if c_kind_entries.is_empty() {
            continue;
        }
        let c_sweep = SweepSummary::new(state, c_kind, c_kind_entries)?;
        let r_sweeps: Vec<SweepSummary> = [SensorKind::Mems, SensorKind::Tap]
            .into_iter()
            .filter_map(|k| {
                let e: Vec<_> = r_entries.iter().filter(|a| a.station.kind == k).cloned().collect();
                (!e.is_empty()).then(|| SweepSummary::new(state, k, e))
            })
            .collect::<Result<_>>()?;
        let r_stations: Vec<ChordStation> = r_sweeps.iter().flat_map(|s| s.stations().to_vec()).collect();
        for (c, r) in nearest_pairs(c_sweep.stations(), &r_stations, options.max_distance) {
            let r_sweep = r_sweeps.iter().find(|s| s.system() == r.kind).expect("station came from a sweep");
            let part = compare_systems(&c_sweep, r_sweep, &[(c.clone(), r.clone())])?;
            report.rows.extend(part.rows);
            pairs.push((c, r));
        }
    }
    if pairs.is_empty() {
        return Err(Error::validation(
            "stations",
            format!("no station pairs within {} chord", options.max_distance),
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Vec::new();
    write_comparison(out_dir, &report, &mut outputs)?;
    Ok(report)
}
