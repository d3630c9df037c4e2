//! Dormand-Prince 5(4) with step-size control and the free 4th-order dense output.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-7, atol: 1e-9, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns the state at every
/// requested sample time in `[t0, t1]` (sorted ascending), plus the final state.
pub fn dopri5<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, samples: &[f64], opts: &OdeOptions) -> Result<(Vec<Vec<f64>>, Vec<f64>)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y0.len();
    let mut out = Vec::with_capacity(samples.len());
    let mut next = 0;
    while next < samples.len() && samples[next] <= t0 {
        out.push(y0.to_vec());
        next += 1;
    }
    if t1 <= t0 {
        return Ok((out, y0.to_vec()));
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = f(t, &y)?;
    let scale = |y: &[f64], yn: &[f64], i: usize| opts.atol + opts.rtol * y[i].abs().max(yn[i].abs());
    // initial step (Hairer's heuristic)
    let d0 = (0..n).map(|i| (y[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt() / (n as f64).sqrt();
    let d1 = (0..n).map(|i| (k[0][i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt() / (n as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(opts.max_step).min(t1 - t0);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut steps = 0;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::Stiffness { t, state: y });
        }
        steps += 1;
        let h_min = 1e-12 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Stiffness { t, state: y });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                ytmp[i] = acc;
            }
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
            k[s] = f(t + C[s] * h, &ytmp)?;
        }
        let mut err = 0.0;
        for i in 0..n {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            err += (e / scale(&y, &ynew, i)).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            let tn = t + h;
            while next < samples.len() && samples[next] <= tn + 1e-12 * tn.abs().max(1.0) {
                let th = ((samples[next] - t) / h).clamp(0.0, 1.0);
                let mut v = vec![0.0; n];
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    let r4 = ydiff - h * k[6][i] - bspl;
                    let r5 = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
                    v[i] = y[i] + th * (ydiff + (1.0 - th) * (bspl + th * (r4 + (1.0 - th) * r5)));
                }
                out.push(v);
                next += 1;
            }
            t = tn;
            y.copy_from_slice(&ynew);
            k[0] = k[6].clone();
            if last {
                break;
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.max_step);
    }
    Ok((out, y))
}
