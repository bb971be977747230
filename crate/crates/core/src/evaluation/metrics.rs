use serde::{Deserialize, Serialize};

use super::episode::EpisodeTrace;
use crate::error::{Error, Result};

/// Trailing-window mean of the violation flags; element `i` covers steps
/// `i + 1 ..= i + window`, so the series starts at step `window`.
pub fn violation_moving_average(flags: &[bool], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Config("moving-average window must be at least 1".into()));
    }
    if window > flags.len() {
        return Err(Error::Config(format!(
            "moving-average window {window} exceeds horizon {}",
            flags.len()
        )));
    }
    let mut count: usize = flags[..window].iter().filter(|&&f| f).count();
    let mut out = Vec::with_capacity(flags.len() - window + 1);
    out.push(count as f64 / window as f64);
    for i in window..flags.len() {
        count += flags[i] as usize;
        count -= flags[i - window] as usize;
        out.push(count as f64 / window as f64);
    }
    Ok(out)
}

/// Mean of `E[c | a_t] / E[c | b_t]` over the last `k` steps.
pub fn normalized_constraint_last_k(trace: &EpisodeTrace, k: usize) -> Result<f64> {
    if k == 0 || trace.horizon() < k {
        return Err(Error::Config(format!(
            "need 1 ≤ k ≤ horizon, got k = {k} with horizon {}",
            trace.horizon()
        )));
    }
    let tail = &trace.records[trace.horizon() - k..];
    Ok(tail.iter().map(|r| r.normalized_constraint()).sum::<f64>() / k as f64)
}

/// Mean of the last `ceil(fraction · len)` values.
pub fn tail_mean(values: &[f64], fraction: f64) -> f64 {
    let n = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len().max(1));
    let tail = &values[values.len().saturating_sub(n)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSem {
    pub mean: f64,
    /// `None` below two samples.
    pub sem: Option<f64>,
    pub count: usize,
}

impl MeanSem {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = Welford::default();
        for &s in samples {
            acc.push(s);
        }
        acc.summary()
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean, `s / √n`.
    pub fn sem(&self) -> Option<f64> {
        (self.count >= 2).then(|| {
            let var = (self.m2 / (self.count - 1) as f64).max(0.0);
            (var / self.count as f64).sqrt()
        })
    }

    pub fn summary(&self) -> MeanSem {
        MeanSem {
            mean: self.mean,
            sem: self.sem(),
            count: self.count,
        }
    }
}
