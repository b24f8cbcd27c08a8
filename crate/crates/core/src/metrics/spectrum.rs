use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{uniform_step, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    None,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// One-sided amplitude spectrum as `(frequency, magnitude)` pairs, frequency
/// in cycles per τ. Magnitudes are corrected for the window's coherent gain,
/// so a sinusoid of amplitude `A` on a bin centre reads `A`.
pub fn amplitude_spectrum(tau: &[f64], signal: &[f64], window: Window) -> Result<Vec<(f64, f64)>, MetricsError> {
    if tau.len() != signal.len() {
        return Err(super::domain("time and signal lengths differ"));
    }
    let dt = uniform_step(tau)?;
    let n = signal.len();
    let w = window.weights(n);
    let gain: f64 = w.iter().sum();
    let mut buf: Vec<Complex<f64>> = signal.iter().zip(&w).map(|(x, w)| Complex::new(x * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    Ok((0..=n / 2)
        .map(|k| {
            let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
            let scale = if edge { 1.0 } else { 2.0 };
            (k as f64 * df, scale * buf[k].norm() / gain)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn zero_signal() {
        let t = grid(64, 0.1);
        let s = amplitude_spectrum(&t, &[0.0; 64], Window::Hann).unwrap();
        assert_eq!(s.len(), 33);
        assert!(s.iter().all(|&(_, m)| m == 0.0));
    }

    #[test]
    fn pure_tone_single_bin() {
        let n = 1000;
        let dt = 0.01;
        let t = grid(n, dt);
        let f = 5.0 / (n as f64 * dt);
        let x: Vec<f64> = t.iter().map(|t| 0.7 * (TAU * f * t).sin()).collect();
        let s = amplitude_spectrum(&t, &x, Window::None).unwrap();
        assert!((s[5].0 - f).abs() < 1e-12);
        assert!((s[5].1 - 0.7).abs() < 1e-9);
        for (k, &(_, m)) in s.iter().enumerate() {
            if k != 5 {
                assert!(m < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_irregular_grid() {
        let mut t = grid(16, 0.1);
        t[3] = 0.35;
        assert!(amplitude_spectrum(&t, &[1.0; 16], Window::Hann).is_err());
    }
}
