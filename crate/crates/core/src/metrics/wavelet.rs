use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{domain, uniform_step, MetricsError};

/// Centre frequency of the Morlet mother wavelet.
pub const MORLET_OMEGA0: f64 = 6.0;

/// Frequency in cycles per τ whose response peaks at `scale`.
pub fn frequency_of_scale(scale: f64) -> f64 {
    MORLET_OMEGA0 / (std::f64::consts::TAU * scale)
}

pub fn scale_of_frequency(freq: f64) -> f64 {
    MORLET_OMEGA0 / (std::f64::consts::TAU * freq)
}

/// `n` scales whose frequencies are log-spaced from `f_max` down to `f_min`.
pub fn log_scales(f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>, MetricsError> {
    if !(f_min > 0.0 && f_max > f_min && f_max.is_finite()) || n < 2 {
        return Err(domain(format!("bad scale range [{f_min}, {f_max}] x {n}")));
    }
    let ratio = (f_min / f_max).ln() / (n - 1) as f64;
    Ok((0..n).map(|k| scale_of_frequency(f_max * (ratio * k as f64).exp())).collect())
}

/// 64 scales spanning 0.01 to 2 cycles per τ.
pub fn default_scales() -> Vec<f64> {
    log_scales(0.01, 2.0, 64).expect("static range")
}

/// Modulus of the Morlet continuous wavelet transform, one row per scale.
///
/// Computed as a spectral product on a zero-padded grid with the analytic
/// (positive-frequency) wavelet, normalized so that a sinusoid of amplitude
/// `A` produces a ridge of height `A` at its matching scale.
pub fn cwt_morlet(tau: &[f64], signal: &[f64], scales: &[f64]) -> Result<Vec<Vec<f64>>, MetricsError> {
    if tau.len() != signal.len() {
        return Err(domain("time and signal lengths differ"));
    }
    let dt = uniform_step(tau)?;
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(domain("scales must be positive"));
    }
    let n = signal.len();
    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);

    let mut spec: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    spec.resize(m, Complex::new(0.0, 0.0));
    fwd.process(&mut spec);

    let dw = std::f64::consts::TAU / (m as f64 * dt);
    let mut out = Vec::with_capacity(scales.len());
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    for &s in scales {
        buf[0] = Complex::new(0.0, 0.0);
        for k in 1..m {
            buf[k] = if k <= m / 2 {
                let u = s * k as f64 * dw - MORLET_OMEGA0;
                spec[k] * (2.0 * (-0.5 * u * u).exp() / m as f64)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        inv.process(&mut buf);
        out.push(buf[..n].iter().map(|c| c.norm()).collect());
    }
    Ok(out)
}
