//! Uniformly sampled pressure records.

use crate::error::{ensure_finite, Error, Result};

/// A uniformly sampled pressure record for one channel.
///
/// Sample `k` is taken at `start_time + k / sample_rate` seconds in the clock
/// of the board that recorded it.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    channel: String,
    start_time: f64,
    sample_rate: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        channel: impl Into<String>,
        start_time: f64,
        sample_rate: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        ensure_finite("start_time", start_time)?;
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::validation(
                "sample_rate",
                format!("must be positive and finite, got {sample_rate}"),
            ));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                "values",
                format!("sample {idx} is not finite ({})", values[idx]),
            ));
        }
        Ok(TimeSeries {
            channel: channel.into(),
            start_time,
            sample_rate,
            values,
        })
    }

    /// Constant-valued series, mostly useful for tests and wind-off segments.
    pub fn constant(
        channel: impl Into<String>,
        sample_rate: f64,
        len: usize,
        value: f64,
    ) -> Result<Self> {
        Self::new(channel, 0.0, sample_rate, vec![value; len])
    }

    pub fn channel(&self) -> &str {
        &self.channel
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Covered time span, `len / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    /// Time of the last sample (equal to `start_time` for a single sample).
    pub fn end_time(&self) -> f64 {
        self.time_at(self.values.len().saturating_sub(1))
    }

    pub fn with_channel(mut self, channel: impl Into<String>) -> Self {
        self.channel = channel.into();
        self
    }

    pub fn with_start_time(mut self, start_time: f64) -> Self {
        self.start_time = start_time;
        self
    }

    /// Same timing and channel, new values. Values are checked for finiteness.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.channel.clone(), self.start_time, self.sample_rate, values)
    }

    /// Applies `f` sample-wise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Integer ratio `high / low` between two sample rates, if there is one.
pub(crate) fn integer_rate_ratio(high: f64, low: f64) -> Option<usize> {
    if !(high > 0.0 && low > 0.0) || high < low {
        return None;
    }
    let ratio = high / low;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio && rounded >= 1.0 {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Block-mean downsampling to `target_rate`. Each output sample is the mean of
/// one block of `ratio` consecutive input samples; a trailing partial block is
/// dropped.
pub fn block_mean_downsample(series: &TimeSeries, target_rate: f64) -> Result<TimeSeries> {
    let ratio = integer_rate_ratio(series.sample_rate(), target_rate).ok_or_else(|| {
        Error::validation(
            "sample_rate",
            format!(
                "input rate {} Hz is not an integer multiple of {} Hz",
                series.sample_rate(),
                target_rate
            ),
        )
    })?;
    let values: Vec<f64> = series
        .values()
        .chunks_exact(ratio)
        .map(|block| block.iter().sum::<f64>() / ratio as f64)
        .collect();
    TimeSeries::new(series.channel(), series.start_time(), target_rate, values)
}
