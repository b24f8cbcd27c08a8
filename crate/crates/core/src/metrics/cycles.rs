use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;

/// Crossings closer than this to the previous cycle start are merged into it.
pub const MIN_CYCLE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleCount {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub impacts: usize,
}

/// Upward zero crossings of `x`, linearly interpolated, with crossings
/// closer than [`MIN_CYCLE`] to the previous one dropped. A series that
/// starts exactly at zero and rises counts its first instant as a crossing.
pub fn upward_crossings(tau: &[f64], x: &[f64], v: Option<&[f64]>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let push = |t: f64, out: &mut Vec<f64>| {
        if out.last().is_none_or(|&p| t - p >= MIN_CYCLE) {
            out.push(t);
        }
    };
    if let (Some(&x0), Some(&t0)) = (x.first(), tau.first()) {
        let rising = v.and_then(|v| v.first()).is_some_and(|&v0| v0 > 0.0);
        if x0 == 0.0 && rising {
            push(t0, &mut out);
        }
    }
    for i in 1..x.len().min(tau.len()) {
        let (xa, xb) = (x[i - 1], x[i]);
        if xa < 0.0 && xb >= 0.0 {
            let t = tau[i - 1] + (tau[i] - tau[i - 1]) * (-xa) / (xb - xa);
            push(t, &mut out);
        }
    }
    out
}

/// Counts events in each cycle `[b_k, b_{k+1})`; events outside every cycle are ignored.
pub fn bin_impacts(boundaries: &[f64], events: &[f64]) -> Vec<CycleCount> {
    let mut counts: Vec<CycleCount> = boundaries
        .windows(2)
        .enumerate()
        .map(|(index, w)| CycleCount { index, start: w[0], end: w[1], impacts: 0 })
        .collect();
    for &t in events {
        let k = boundaries.partition_point(|&b| b <= t);
        if k >= 1 && k < boundaries.len() {
            counts[k - 1].impacts += 1;
        }
    }
    counts
}

/// Impacts per LO cycle, cycles being delimited by upward zero crossings of x1.
pub fn impacts_per_cycle(tr: &Trajectory) -> Vec<CycleCount> {
    let tau: Vec<f64> = tr.samples.iter().map(|s| s.state.tau).collect();
    let x1: Vec<f64> = tr.samples.iter().map(|s| s.state.x1).collect();
    let v1: Vec<f64> = tr.samples.iter().map(|s| s.state.v1).collect();
    let b = upward_crossings(&tau, &x1, Some(&v1));
    let events: Vec<f64> = tr.impacts.iter().filter(|e| !e.grazing).map(|e| e.tau).collect();
    bin_impacts(&b, &events)
}
