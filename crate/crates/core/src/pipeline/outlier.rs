//! Differential outlier filter.
//!
//! A glitch is a short run of samples (at most [`MAX_GLITCH_WIDTH`]) entered and
//! left through first differences larger than `k·MAD(first differences)` with
//! opposite signs, after which the signal returns to its prior level. Flagged
//! samples are replaced by linear interpolation between the nearest surviving
//! neighbours. Detection is repeated until nothing more is flagged, so the
//! output is a fixed point of the filter.

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const DEFAULT_OUTLIER_K: f64 = 6.0;
pub const MIN_OUTLIER_LEN: usize = 8;
pub const MAX_GLITCH_WIDTH: usize = 3;
const MAX_PASSES: usize = 16;

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mad(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}

/// Indices flagged by one detection pass.
fn flag_glitches(x: &[f64], threshold: f64) -> Vec<bool> {
    let n = x.len();
    let mut flagged = vec![false; n];
    let exceeds = |d: f64| d.abs() > threshold;

    for width in 1..=MAX_GLITCH_WIDTH {
        // interior runs x[i..i+width], bracketed by x[i-1] and x[i+width]
        for i in 1..n.saturating_sub(width) {
            let before = x[i - 1];
            let after = x[i + width];
            let jump_in = x[i] - before;
            let jump_out = after - x[i + width - 1];
            if !(exceeds(jump_in) && exceeds(jump_out)) || jump_in.signum() == jump_out.signum() {
                continue;
            }
            if exceeds(after - before) {
                continue;
            }
            let all_off = (0..width).all(|j| {
                let t = (j + 1) as f64 / (width + 1) as f64;
                exceeds(x[i + j] - (before + t * (after - before)))
            });
            if all_off {
                flagged[i..i + width].iter_mut().for_each(|f| *f = true);
            }
        }
        if n < width + 2 {
            continue;
        }
        // leading run x[0..width]
        let anchor = x[width];
        if exceeds(anchor - x[width - 1])
            && !exceeds(x[width + 1] - anchor)
            && x[..width].iter().all(|&v| exceeds(v - anchor))
        {
            flagged[..width].iter_mut().for_each(|f| *f = true);
        }
        // trailing run x[n-width..n]
        let anchor = x[n - width - 1];
        if exceeds(x[n - width] - anchor)
            && !exceeds(anchor - x[n - width - 2])
            && x[n - width..].iter().all(|&v| exceeds(v - anchor))
        {
            flagged[n - width..].iter_mut().for_each(|f| *f = true);
        }
    }
    flagged
}

fn interpolate_flagged(x: &mut [f64], flagged: &[bool]) {
    let good: Vec<usize> = (0..x.len()).filter(|&i| !flagged[i]).collect();
    if good.is_empty() {
        return;
    }
    let mut g = 0;
    for i in 0..x.len() {
        if !flagged[i] {
            continue;
        }
        while g + 1 < good.len() && good[g + 1] < i {
            g += 1;
        }
        let left = (good[g] < i).then_some(good[g]);
        let right = good[g..].iter().copied().find(|&j| j > i);
        x[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let t = (i - l) as f64 / (r - l) as f64;
                x[l] + t * (x[r] - x[l])
            }
            (Some(l), None) => x[l],
            (None, Some(r)) => x[r],
            (None, None) => x[i],
        };
    }
}

/// Removes single- and few-sample glitches. Output length equals input length.
pub fn outlier_filter(series: &TimeSeries, k: f64) -> Result<TimeSeries> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::validation("k", format!("must be positive, got {k}")));
    }
    if series.len() < MIN_OUTLIER_LEN {
        return Err(Error::insufficient(format!(
            "outlier filter needs at least {MIN_OUTLIER_LEN} samples, got {}",
            series.len()
        )));
    }
    let mut x = series.values().to_vec();
    for _ in 0..MAX_PASSES {
        let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let threshold = k * mad(&diffs);
        let flagged = flag_glitches(&x, threshold);
        if !flagged.iter().any(|&f| f) {
            break;
        }
        interpolate_flagged(&mut x, &flagged);
    }
    series.with_values(x)
}
