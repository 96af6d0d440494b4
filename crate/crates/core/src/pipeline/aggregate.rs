use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::ChordStation;
use crate::series::TimeSeries;

/// Time-mean and standard deviation of one channel for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationAggregate {
    pub station: ChordStation,
    pub aoa: f64,
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
}

/// Arithmetic mean and unbiased (N−1) standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::insufficient(format!(
            "aggregation needs at least 2 samples, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}

pub fn aggregate_run(series: &TimeSeries) -> Result<(f64, f64)> {
    mean_std(series.values())
}
