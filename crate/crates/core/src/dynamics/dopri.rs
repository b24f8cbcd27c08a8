//! Dormand-Prince 5(4) step with the standard continuous extension.
//!
//! The model is autonomous, so stage nodes never enter the right-hand side.

pub(crate) const DIM: usize = 6;
pub(crate) type Vector = [f64; DIM];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: &Vector, terms: &[(f64, &Vector)], h: f64) -> Vector {
    let mut out = *y;
    for i in 0..DIM {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dense {
    pub t0: f64,
    pub h: f64,
    rcont: [Vector; 5],
}

impl Dense {
    pub fn eval(&self, t: f64) -> Vector {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        let mut out = [0.0; DIM];
        for i in 0..DIM {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
        out
    }
}

pub(crate) struct StepResult {
    pub y1: Vector,
    /// f(y1), reused as the first stage of the next step.
    pub k7: Vector,
    /// Scaled RMS error estimate; the step is acceptable when <= 1.
    pub err: f64,
    pub dense: Dense,
}

pub(crate) fn step<F: Fn(&Vector) -> Vector>(
    f: &F,
    t0: f64,
    y0: &Vector,
    k1: &Vector,
    h: f64,
    rtol: f64,
    atol: f64,
) -> StepResult {
    let k2 = f(&axpy(y0, &[(A21, k1)], h));
    let k3 = f(&axpy(y0, &[(A31, k1), (A32, &k2)], h));
    let k4 = f(&axpy(y0, &[(A41, k1), (A42, &k2), (A43, &k3)], h));
    let k5 = f(&axpy(y0, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
    let k6 = f(&axpy(y0, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
    let y1 = axpy(y0, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
    let k7 = f(&y1);

    let mut sum = 0.0;
    for i in 0..DIM {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        sum += (e / sc) * (e / sc);
    }
    let err = (sum / DIM as f64).sqrt();

    let mut rcont = [[0.0; DIM]; 5];
    for i in 0..DIM {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k1[i] - ydiff;
        rcont[0][i] = y0[i];
        rcont[1][i] = ydiff;
        rcont[2][i] = bspl;
        rcont[3][i] = ydiff - h * k7[i] - bspl;
        rcont[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }

    StepResult { y1, k7, err, dense: Dense { t0, h, rcont } }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(y: &Vector) -> Vector {
        [y[1], -y[0], 0.0, 0.0, y[1] * y[1], 0.0]
    }

    #[test]
    fn fifth_order_convergence_on_harmonic_oscillator() {
        let y0 = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let err_at = |h: f64| {
            let mut y = y0;
            let mut t = 0.0;
            let n = (1.0 / h).round() as usize;
            for _ in 0..n {
                let k1 = harmonic(&y);
                let r = step(&harmonic, t, &y, &k1, h, 1e-6, 1e-6);
                y = r.y1;
                t += h;
            }
            (y[0] - t.sin()).abs()
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order}");
    }

    #[test]
    fn dense_output_matches_endpoints_and_interior() {
        let y0 = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let k1 = harmonic(&y0);
        let h = 0.05;
        let r = step(&harmonic, 0.0, &y0, &k1, h, 1e-6, 1e-6);
        assert_eq!(r.dense.eval(0.0), y0);
        let end = r.dense.eval(h);
        for (a, b) in end.iter().zip(&r.y1) {
            assert!((a - b).abs() < 1e-15);
        }
        for k in 1..10 {
            let t = h * k as f64 / 10.0;
            assert!((r.dense.eval(t)[0] - t.sin()).abs() < 1e-9);
        }
    }
}
