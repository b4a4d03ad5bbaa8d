//! Learning-curve descriptors computed on median-smoothed episode rewards:
//! burn-in point, convergence point, learning speed, maximum reward and
//! volatility. Indices are smoothed-episode indices; the matching
//! environment timesteps are reported alongside.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::RewardTrace;

pub const DEFAULT_WINDOW: usize = 1000;
pub const CONVERGENCE_TOLERANCE: f64 = 0.10;
/// Absolute band used when the final smoothed reward is exactly zero.
pub const ZERO_FINAL_TOLERANCE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescriptorError {
    #[error("reward trace is empty")]
    EmptyTrace,
    #[error("need at least two episodes, got {0}")]
    TooShort(usize),
    #[error("smoothing window must be at least 1")]
    BadWindow,
}

/// Median over a centered window of `window` samples, truncated at the ends.
/// Covers `[t - window/2, t + window - 1 - window/2]`; even counts average the
/// two middle values.
pub fn smooth_median(values: &[f64], window: usize) -> Result<Vec<f64>, DescriptorError> {
    if window == 0 {
        return Err(DescriptorError::BadWindow);
    }
    if values.is_empty() {
        return Err(DescriptorError::EmptyTrace);
    }
    let n = values.len();
    let before = window / 2;
    let after = window - 1 - before;
    let mut sorted: Vec<f64> = Vec::with_capacity(window);
    let mut lo = 0usize;
    let mut hi = 0usize; // exclusive
    let mut out = Vec::with_capacity(n);
    let insert = |sorted: &mut Vec<f64>, x: f64| {
        let k = sorted.partition_point(|&y| y < x);
        sorted.insert(k, x);
    };
    for t in 0..n {
        let want_lo = t.saturating_sub(before);
        let want_hi = (t + after + 1).min(n);
        while hi < want_hi {
            insert(&mut sorted, values[hi]);
            hi += 1;
        }
        while lo < want_lo {
            let x = values[lo];
            let k = sorted.partition_point(|&y| y < x);
            sorted.remove(k);
            lo += 1;
        }
        let m = sorted.len();
        out.push(if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        });
    }
    Ok(out)
}

/// Index of the largest one-step increase; first index on ties.
pub fn burn_in(smoothed: &[f64]) -> Result<usize, DescriptorError> {
    if smoothed.len() < 2 {
        return Err(DescriptorError::TooShort(smoothed.len()));
    }
    let mut best = 0usize;
    let mut best_delta = f64::NEG_INFINITY;
    for t in 0..smoothed.len() - 1 {
        let d = smoothed[t + 1] - smoothed[t];
        if d > best_delta {
            best_delta = d;
            best = t;
        }
    }
    Ok(best)
}

/// Earliest index after which every value stays within `rel_tol · |final|`
/// of the final value (absolute band when the final value is zero).
pub fn convergence(smoothed: &[f64], rel_tol: f64) -> Result<usize, DescriptorError> {
    let Some(&last) = smoothed.last() else {
        return Err(DescriptorError::EmptyTrace);
    };
    let band = if last == 0.0 {
        ZERO_FINAL_TOLERANCE
    } else {
        rel_tol * last.abs()
    };
    let mut t_c = smoothed.len() - 1;
    for t in (0..smoothed.len()).rev() {
        if (smoothed[t] - last).abs() <= band {
            t_c = t;
        } else {
            break;
        }
    }
    Ok(t_c)
}

/// Mean absolute one-step change.
pub fn volatility(smoothed: &[f64]) -> Result<f64, DescriptorError> {
    if smoothed.len() < 2 {
        return Err(DescriptorError::TooShort(smoothed.len()));
    }
    let total: f64 = smoothed.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(total / (smoothed.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningDescriptors {
    pub t_b: usize,
    pub t_c: usize,
    /// Environment timestep at which episode `t_b` ended, when known.
    pub t_b_timestep: Option<u64>,
    pub t_c_timestep: Option<u64>,
    /// `r_max / (t_c - t_b)`; absent when `t_c <= t_b`.
    pub speed: Option<f64>,
    pub r_max: f64,
    pub volatility: f64,
    pub episodes: usize,
}

impl LearningDescriptors {
    /// Speed is undefined because convergence does not follow burn-in.
    pub fn is_degenerate(&self) -> bool {
        self.speed.is_none()
    }
}

pub fn descriptors_from_smoothed(smoothed: &[f64]) -> Result<LearningDescriptors, DescriptorError> {
    let t_b = burn_in(smoothed)?;
    let t_c = convergence(smoothed, CONVERGENCE_TOLERANCE)?;
    let r_max = smoothed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let speed = (t_c > t_b).then(|| r_max / (t_c - t_b) as f64);
    Ok(LearningDescriptors {
        t_b,
        t_c,
        t_b_timestep: None,
        t_c_timestep: None,
        speed,
        r_max,
        volatility: volatility(smoothed)?,
        episodes: smoothed.len(),
    })
}

pub fn descriptors(trace: &RewardTrace, window: usize) -> Result<LearningDescriptors, DescriptorError> {
    let rewards = trace.rewards();
    if rewards.is_empty() {
        return Err(DescriptorError::EmptyTrace);
    }
    let smoothed = smooth_median(&rewards, window)?;
    let mut d = descriptors_from_smoothed(&smoothed)?;
    d.t_b_timestep = trace.episodes.get(d.t_b).map(|e| e.timestep);
    d.t_c_timestep = trace.episodes.get(d.t_c).map(|e| e.timestep);
    Ok(d)
}
