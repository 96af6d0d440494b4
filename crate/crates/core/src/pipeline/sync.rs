//! Multi-rate alignment of streams recorded by boards sharing a 1 Hz sync signal.

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Period of the shared synchronization signal, s.
pub const PULSE_PERIOD: f64 = 1.0;

/// A stream together with the sync pulse times its board recorded, in the board's clock.
#[derive(Debug, Clone)]
pub struct SyncStream {
    pub series: TimeSeries,
    pub pulses: Vec<f64>,
}

/// Streams resampled onto one shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFrame {
    pub start_time: f64,
    pub sample_rate: f64,
    pub channels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl AlignedFrame {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, channel: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .position(|c| c == channel)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn series(&self, channel: &str) -> Option<TimeSeries> {
        let values = self.column(channel)?.to_vec();
        TimeSeries::new(channel, self.start_time, self.sample_rate, values).ok()
    }
}

/// Clock offset of a board: mean difference between its recorded pulses and
/// the nearest reference pulses. Offsets are resolved modulo the pulse
/// period, so they must be smaller than half of it.
pub fn estimate_clock_offset(recorded: &[f64], reference: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::insufficient("empty reference pulse train"));
    }
    if recorded.is_empty() {
        return Err(Error::insufficient("stream recorded no sync pulses"));
    }
    let diffs: Vec<f64> = recorded
        .iter()
        .map(|&p| {
            let idx = reference.partition_point(|&r| r < p);
            let candidates = [idx.checked_sub(1), (idx < reference.len()).then_some(idx)];
            candidates
                .into_iter()
                .flatten()
                .map(|j| p - reference[j])
                .min_by(|a, b| a.abs().total_cmp(&b.abs()))
                .expect("reference is non-empty")
        })
        .collect();
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

fn interpolate(series: &TimeSeries, corrected_start: f64, t: f64) -> f64 {
    let v = series.values();
    let pos = (t - corrected_start) * series.sample_rate();
    if pos <= 0.0 {
        return v[0];
    }
    let i = pos.floor() as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    let frac = pos - i as f64;
    v[i] + frac * (v[i + 1] - v[i])
}

/// Removes each stream's clock offset and linearly interpolates every stream
/// onto a grid at `target_rate` covering the span common to all of them.
pub fn synchronize_resample(streams: &[SyncStream], reference: &[f64], target_rate: f64) -> Result<AlignedFrame> {
    if streams.is_empty() {
        return Err(Error::insufficient("no streams to synchronize"));
    }
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(Error::validation("target_rate", "must be positive"));
    }
    let min_rate = streams
        .iter()
        .map(|s| s.series.sample_rate())
        .fold(f64::INFINITY, f64::min);
    if target_rate > min_rate {
        return Err(Error::validation(
            "target_rate",
            format!("{target_rate} Hz exceeds the slowest stream rate {min_rate} Hz"),
        ));
    }

    let mut starts = Vec::with_capacity(streams.len());
    for s in streams {
        if s.series.len() < 2 {
            return Err(Error::insufficient(format!("stream `{}` has fewer than 2 samples", s.series.channel())));
        }
        let (t0, t1) = (s.series.start_time(), s.series.end_time());
        let within = s.pulses.iter().filter(|&&p| p >= t0 - 1e-9 && p <= t1 + 1e-9).count();
        if within < 2 {
            return Err(Error::insufficient(format!(
                "stream `{}` spans {within} sync pulse(s), need 2",
                s.series.channel()
            )));
        }
        let offset = estimate_clock_offset(&s.pulses, reference)?;
        starts.push(s.series.start_time() - offset);
    }

    let t_start = starts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t_end = streams
        .iter()
        .zip(&starts)
        .map(|(s, &st)| st + (s.series.len() - 1) as f64 / s.series.sample_rate())
        .fold(f64::INFINITY, f64::min);
    if t_end < t_start {
        return Err(Error::validation("streams", "streams do not overlap in time"));
    }
    let n = ((t_end - t_start) * target_rate + 1e-9).floor() as usize + 1;

    let columns = streams
        .iter()
        .zip(&starts)
        .map(|(s, &st)| {
            (0..n)
                .map(|k| interpolate(&s.series, st, t_start + k as f64 / target_rate))
                .collect()
        })
        .collect();
    Ok(AlignedFrame {
        start_time: t_start,
        sample_rate: target_rate,
        channels: streams.iter().map(|s| s.series.channel().to_string()).collect(),
        columns,
    })
}
