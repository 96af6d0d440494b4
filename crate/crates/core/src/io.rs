//! File formats: per-channel series CSV, aggregates CSV, report tables, the
//! campaign manifest and the run index written by the simulator.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{ChordStation, FlowModelParams, SensorKind};
use crate::pipeline::{BladeState, StationAggregate, DEFAULT_REFERENCE_AOA, MIN_STATIONARY_DURATION};
use crate::sensor::{MemsSpec, ScannerSpec};
use crate::series::TimeSeries;

pub const SERIES_HEADER: [&str; 2] = ["time_s", "pressure_pa"];
pub const AGGREGATES_HEADER: [&str; 7] = ["run_id", "station_xc", "kind", "aoa_deg", "mean_pa", "std_pa", "n"];
pub const COMPARISON_HEADER: [&str; 3] = ["station_xc", "mean_error_pct", "std_error_pct"];
pub const IMPACT_HEADER: [&str; 3] = ["station_xc", "onset_shift_deg", "peak_std_ratio"];

/// Campaign master rate: the smallest rate both default sensors divide.
pub const DEFAULT_CAMPAIGN_MASTER_RATE: f64 = 12_800.0;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::parse(
            path,
            format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(reader)
}

fn parse_f64(path: &Path, line: u64, column: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(path, format!("line {line}: column `{column}`: `{text}` is not a finite number")))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `time_s,pressure_pa` rows with shortest round-trip float formatting.
pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::with_capacity(series.len() * 24 + 32);
    body.push_str("time_s,pressure_pa\n");
    for (i, v) in series.values().iter().enumerate() {
        body.push_str(&format!("{},{}\n", series.time_at(i), v));
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a series CSV. The sample rate is taken from `sample_rate` when given,
/// otherwise inferred from the time column.
pub fn read_series_csv(path: &Path, channel: &str, sample_rate: Option<f64>) -> Result<TimeSeries> {
    let mut reader = open_csv(path, &SERIES_HEADER)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i as u64 + 2;
        if rec.len() != 2 {
            return Err(Error::parse(path, format!("line {line}: expected 2 fields, got {}", rec.len())));
        }
        times.push(parse_f64(path, line, "time_s", &rec[0])?);
        values.push(parse_f64(path, line, "pressure_pa", &rec[1])?);
    }
    if times.is_empty() {
        return Err(Error::parse(path, "no samples"));
    }
    let rate = match sample_rate {
        Some(r) => r,
        None => {
            if times.len() < 2 {
                return Err(Error::parse(path, "cannot infer the sample rate from a single sample"));
            }
            let span = times[times.len() - 1] - times[0];
            if !(span > 0.0) {
                return Err(Error::parse(path, "time column is not increasing"));
            }
            let r = (times.len() - 1) as f64 / span;
            if (r - r.round()).abs() <= 1e-6 * r {
                r.round()
            } else {
                r
            }
        }
    };
    TimeSeries::new(channel, times[0], rate, values).map_err(|e| Error::parse(path, e.to_string()))
}

/// One aggregates row.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub run_id: String,
    pub aggregate: StationAggregate,
}

pub fn write_aggregates_csv(path: &Path, records: &[AggregateRecord]) -> Result<()> {
    write_rows(
        path,
        &AGGREGATES_HEADER,
        records.iter().map(|r| {
            let a = &r.aggregate;
            vec![
                r.run_id.clone(),
                a.station.position.to_string(),
                a.station.kind.to_string(),
                a.aoa.to_string(),
                a.mean.to_string(),
                a.std.to_string(),
                a.n_samples.to_string(),
            ]
        }),
    )
}

pub fn read_aggregates_csv(path: &Path) -> Result<Vec<AggregateRecord>> {
    let mut reader = open_csv(path, &AGGREGATES_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i as u64 + 2;
        if rec.len() != AGGREGATES_HEADER.len() {
            return Err(Error::parse(path, format!("line {line}: expected 7 fields, got {}", rec.len())));
        }
        let kind: SensorKind = rec[2]
            .parse()
            .map_err(|e: Error| Error::parse(path, format!("line {line}: {e}")))?;
        let position = parse_f64(path, line, "station_xc", &rec[1])?;
        let station = ChordStation::unlabelled(position, kind).map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        let n = rec[6]
            .parse::<usize>()
            .map_err(|_| Error::parse(path, format!("line {line}: column `n`: `{}` is not a count", &rec[6])))?;
        let std = parse_f64(path, line, "std_pa", &rec[5])?;
        if std < 0.0 {
            return Err(Error::parse(path, format!("line {line}: negative std_pa")));
        }
        out.push(AggregateRecord {
            run_id: rec[0].to_string(),
            aggregate: StationAggregate {
                station,
                aoa: parse_f64(path, line, "aoa_deg", &rec[3])?,
                mean: parse_f64(path, line, "mean_pa", &rec[4])?,
                std,
                n_samples: n,
            },
        });
    }
    Ok(out)
}

/// Writes a plain table; floats must already be formatted.
pub fn write_table_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    write_rows(path, header, rows)
}

/// Reads a plain table with the given header into string rows.
pub fn read_table_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut reader = open_csv(path, header)?;
    reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()).map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::parse(path, e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

fn default_campaign_id() -> String {
    "campaign".to_string()
}

/// Default sweep: 18 angles from −10° to +28°, 2° apart except for the
/// coarser 4° steps between −2° and 8°.
pub fn default_aoa_list() -> Vec<f64> {
    vec![
        -10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 4.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0,
    ]
}

/// Ten MEMS stations from 0.28 to 0.55 chord plus eight taps between 0.25 and 0.55.
pub fn default_stations() -> Vec<ChordStation> {
    let mut stations: Vec<ChordStation> = (0..10)
        .map(|i| ChordStation {
            position: (28 + 3 * i) as f64 / 100.0,
            kind: SensorKind::Mems,
            label: format!("mems_{i:02}"),
        })
        .collect();
    stations.extend([25, 28, 34, 40, 44, 46, 49, 55].iter().enumerate().map(|(i, &p)| ChordStation {
        position: p as f64 / 100.0,
        kind: SensorKind::Tap,
        label: format!("tap_{i:02}"),
    }));
    stations
}

/// Everything needed to simulate a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignManifest {
    pub campaign_id: String,
    pub aoa_list: Vec<f64>,
    /// m/s.
    pub wind_speed: f64,
    /// Wind-on acquisition length per run, s.
    pub duration: f64,
    /// Wind-off acquisition length per run, s.
    pub stationary_duration: f64,
    pub stations: Vec<ChordStation>,
    pub blade_states: Vec<BladeState>,
    pub seed: u64,
    pub air_density: f64,
    pub atmospheric_pressure: f64,
    /// Simulator β in `P_atm = P∞ + β·q∞`.
    pub stagnation_factor: f64,
    /// Rate of the simulated ground truth; both sensor rates must divide it.
    pub master_rate: f64,
    /// Change of the trailing-edge separation angle on the instrumented blade, deg.
    pub instrumented_te_shift: f64,
    /// Clock offset of the MEMS board against the scanner, s (|offset| < 0.5).
    pub mems_clock_offset: f64,
    pub reference_aoa: f64,
    pub flow: FlowModelParams,
    pub mems: MemsSpec,
    pub scanner: ScannerSpec,
}

impl Default for CampaignManifest {
    fn default() -> Self {
        CampaignManifest {
            campaign_id: default_campaign_id(),
            aoa_list: default_aoa_list(),
            wind_speed: 40.0,
            duration: 120.0,
            stationary_duration: MIN_STATIONARY_DURATION,
            stations: default_stations(),
            blade_states: vec![BladeState::Instrumented, BladeState::Clean],
            seed: 0,
            air_density: 1.225,
            atmospheric_pressure: 101_325.0,
            stagnation_factor: 1.0,
            master_rate: DEFAULT_CAMPAIGN_MASTER_RATE,
            instrumented_te_shift: -1.0,
            mems_clock_offset: 0.0,
            reference_aoa: DEFAULT_REFERENCE_AOA,
            flow: FlowModelParams::default(),
            mems: MemsSpec::default(),
            scanner: ScannerSpec::default(),
        }
    }
}

fn prefix(field: &str, e: Error) -> Error {
    match e {
        Error::Validation { field: f, message } => Error::validation(format!("{field}.{f}"), message),
        other => other,
    }
}

impl CampaignManifest {
    pub fn from_json_str(text: &str, path: &Path) -> Result<Self> {
        let m: CampaignManifest = serde_json::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.campaign_id.is_empty()
            || !self
                .campaign_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
        {
            return Err(Error::validation(
                "campaign_id",
                format!("`{}` must be non-empty and use only ASCII letters, digits, `-` and `.`", self.campaign_id),
            ));
        }
        if self.aoa_list.is_empty() {
            return Err(Error::validation("aoa_list", "must not be empty"));
        }
        for (i, &a) in self.aoa_list.iter().enumerate() {
            if !(a.is_finite() && (-90.0..=90.0).contains(&a)) {
                return Err(Error::validation(format!("aoa_list[{i}]"), format!("{a} deg lies outside [-90, 90]")));
            }
            if i > 0 && a <= self.aoa_list[i - 1] {
                return Err(Error::validation(
                    format!("aoa_list[{i}]"),
                    format!("{a} deg does not follow {} deg in increasing order", self.aoa_list[i - 1]),
                ));
            }
        }
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be positive, got {v}")))
            }
        };
        positive("wind_speed", self.wind_speed)?;
        positive("duration", self.duration)?;
        positive("air_density", self.air_density)?;
        positive("atmospheric_pressure", self.atmospheric_pressure)?;
        positive("stagnation_factor", self.stagnation_factor)?;
        positive("master_rate", self.master_rate)?;
        if !(self.stationary_duration.is_finite() && self.stationary_duration >= MIN_STATIONARY_DURATION) {
            return Err(Error::validation(
                "stationary_duration",
                format!("must be at least {MIN_STATIONARY_DURATION} s, got {}", self.stationary_duration),
            ));
        }
        if self.duration < 2.0 {
            return Err(Error::validation("duration", "runs must span at least two sync pulses (2 s)"));
        }
        if !(self.instrumented_te_shift.is_finite()) {
            return Err(Error::validation("instrumented_te_shift", "must be finite"));
        }
        if !(self.mems_clock_offset.is_finite() && self.mems_clock_offset.abs() < 0.5) {
            return Err(Error::validation(
                "mems_clock_offset",
                format!("must lie within (-0.5, 0.5) s, got {}", self.mems_clock_offset),
            ));
        }
        if !self.reference_aoa.is_finite() {
            return Err(Error::validation("reference_aoa", "must be finite"));
        }
        if self.stations.is_empty() {
            return Err(Error::validation("stations", "must not be empty"));
        }
        for (i, s) in self.stations.iter().enumerate() {
            s.validate().map_err(|e| prefix(&format!("stations[{i}]"), e))?;
            if s.label.is_empty() || !s.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::validation(
                    format!("stations[{i}].label"),
                    format!("`{}` must be non-empty and use only ASCII letters, digits, `_` and `-`", s.label),
                ));
            }
            for (j, t) in self.stations[..i].iter().enumerate() {
                if t.same_site(s) {
                    return Err(Error::validation(
                        format!("stations[{i}]"),
                        format!("duplicates stations[{j}] ({} at x/c = {})", s.kind, s.position),
                    ));
                }
                if t.label == s.label {
                    return Err(Error::validation(
                        format!("stations[{i}].label"),
                        format!("`{}` already used by stations[{j}]", s.label),
                    ));
                }
            }
        }
        if self.blade_states.is_empty() {
            return Err(Error::validation("blade_states", "must not be empty"));
        }
        for (i, b) in self.blade_states.iter().enumerate() {
            if self.blade_states[..i].contains(b) {
                return Err(Error::validation(format!("blade_states[{i}]"), format!("`{b}` listed twice")));
            }
        }
        self.flow.validate().map_err(|e| prefix("flow", e))?;
        self.flow
            .with_te_shift(self.instrumented_te_shift)
            .validate()
            .map_err(|e| prefix("instrumented_te_shift", e))?;
        self.mems.validate()?;
        self.scanner.validate()?;
        for (field, rate) in [("mems.sample_rate", self.mems.sample_rate), ("scanner.sample_rate", self.scanner.sample_rate)] {
            let ratio = self.master_rate / rate;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                return Err(Error::validation(
                    field,
                    format!("{rate} Hz does not divide master_rate {} Hz", self.master_rate),
                ));
            }
        }
        if self.master_rate < 2.0 * self.scanner.tube_natural_freq {
            return Err(Error::validation(
                "master_rate",
                "must exceed twice the scanner tube natural frequency",
            ));
        }
        let samples = self.duration * self.master_rate;
        if samples > crate::flow::MAX_SERIES_SAMPLES as f64 {
            return Err(Error::validation(
                "duration",
                format!("{samples:.0} samples per channel exceed the budget of {}", crate::flow::MAX_SERIES_SAMPLES),
            ));
        }
        Ok(())
    }

    /// Stations carried by a blade in `state`: the clean blade has no MEMS array.
    pub fn stations_for(&self, state: BladeState) -> Vec<ChordStation> {
        self.stations
            .iter()
            .filter(|s| state == BladeState::Instrumented || s.kind == SensorKind::Tap)
            .cloned()
            .collect()
    }

    pub fn run_id(&self, state: BladeState, index: usize) -> String {
        format!("{}_{}_{index:02}", self.campaign_id, state)
    }
}

/// A file written for one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    /// Path relative to the run index.
    pub file: String,
    pub channel: String,
    pub station_xc: f64,
    pub kind: SensorKind,
    pub board: String,
    pub sample_rate: f64,
    pub start_time: f64,
}

impl ChannelEntry {
    pub fn station(&self) -> Result<ChordStation> {
        ChordStation::new(self.station_xc, self.kind, self.channel.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub run_id: String,
    pub aoa_deg: f64,
    pub wind_speed_mps: f64,
    pub air_density_kgm3: f64,
    pub blade_state: BladeState,
    pub sync_pulses: BTreeMap<String, Vec<f64>>,
    pub stationary: Vec<ChannelEntry>,
    pub channels: Vec<ChannelEntry>,
}

/// Index of a simulated (or recorded) campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunIndex {
    pub campaign_id: String,
    pub reference_aoa: f64,
    pub scanner: ScannerSpec,
    pub runs: Vec<RunEntry>,
}

pub const RUN_INDEX_FILE: &str = "run_index.json";

impl RunIndex {
    pub fn load(path: &Path) -> Result<Self> {
        let index: RunIndex = read_json(path)?;
        index.scanner.validate()?;
        for (i, run) in index.runs.iter().enumerate() {
            if index.runs[..i].iter().any(|r| r.run_id == run.run_id) {
                return Err(Error::validation(format!("runs[{i}].run_id"), format!("`{}` listed twice", run.run_id)));
            }
        }
        Ok(index)
    }

    /// Directory the channel file paths are relative to.
    pub fn base_dir(path: &Path) -> PathBuf {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}
