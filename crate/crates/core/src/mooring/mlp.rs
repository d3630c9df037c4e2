//! Fully connected regression network with min-max normalised inputs and outputs,
//! trained by Levenberg-Marquardt with early stopping.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ad::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputTransform {
    Identity,
    /// Network predicts ln(y); requires strictly positive targets.
    Log,
}

impl OutputTransform {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Log => "log",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Self::Identity),
            "log" => Some(Self::Log),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    /// `weights[k]` is row-major `sizes[k+1] x sizes[k]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub in_min: Vec<f64>,
    pub in_max: Vec<f64>,
    pub out_min: Vec<f64>,
    pub out_max: Vec<f64>,
    pub transform: OutputTransform,
}

fn span(lo: f64, hi: f64) -> f64 {
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

impl Mlp {
    pub fn new(sizes: &[usize], transform: OutputTransform) -> Self {
        let weights = sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        let (ni, no) = (sizes[0], *sizes.last().unwrap());
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            in_min: vec![-1.0; ni],
            in_max: vec![1.0; ni],
            out_min: vec![-1.0; no],
            out_max: vec![1.0; no],
            transform,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.extend_from_slice(b);
        }
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let nw = w.len();
            w.copy_from_slice(&p[k..k + nw]);
            k += nw;
            let nb = b.len();
            b.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    /// Network output in normalised coordinates for normalised inputs.
    fn forward_normalized<S: Scalar>(&self, xn: &[S]) -> Vec<S> {
        let mut a: Vec<S> = xn.to_vec();
        let last = self.weights.len() - 1;
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (nin, nout) = (self.sizes[k], self.sizes[k + 1]);
            let mut z = Vec::with_capacity(nout);
            for o in 0..nout {
                let row = &w[o * nin..(o + 1) * nin];
                let mut s = S::cst(b[o]);
                for (i, &wi) in row.iter().enumerate() {
                    s += a[i] * wi;
                }
                z.push(if k == last { s } else { s.tanh() });
            }
            a = z;
        }
        a
    }

    pub fn normalize_input<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.in_min[i]) * (2.0 / span(self.in_min[i], self.in_max[i])) - 1.0)
            .collect()
    }

    fn target_to_normalized(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, &v)| {
                let t = match self.transform {
                    OutputTransform::Identity => v,
                    OutputTransform::Log => v.ln(),
                };
                (t - self.out_min[i]) * 2.0 / span(self.out_min[i], self.out_max[i]) - 1.0
            })
            .collect()
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let xn = self.normalize_input(x);
        let yn = self.forward_normalized(&xn);
        yn.into_iter()
            .enumerate()
            .map(|(i, v)| {
                let t = (v + 1.0) * (0.5 * span(self.out_min[i], self.out_max[i])) + self.out_min[i];
                match self.transform {
                    OutputTransform::Identity => t,
                    OutputTransform::Log => t.exp(),
                }
            })
            .collect()
    }

    /// Per-sample normalised outputs and their Jacobian rows with respect to all parameters.
    fn output_jacobian(&self, xn: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let nl = self.weights.len();
        let mut acts: Vec<Vec<f64>> = vec![xn.to_vec()];
        for k in 0..nl {
            let (nin, nout) = (self.sizes[k], self.sizes[k + 1]);
            let prev = &acts[k];
            let mut z = vec![0.0; nout];
            for o in 0..nout {
                let mut s = self.biases[k][o];
                for i in 0..nin {
                    s += self.weights[k][o * nin + i] * prev[i];
                }
                z[o] = if k == nl - 1 { s } else { s.tanh() };
            }
            acts.push(z);
        }
        let out = acts[nl].clone();
        let np = self.n_params();
        let mut offsets = Vec::with_capacity(nl);
        let mut off = 0;
        for k in 0..nl {
            offsets.push(off);
            off += self.sizes[k] * self.sizes[k + 1] + self.sizes[k + 1];
        }
        let mut rows = Vec::with_capacity(self.n_outputs());
        for oi in 0..self.n_outputs() {
            let mut row = vec![0.0; np];
            // delta = d out_oi / d z_k (pre-activation)
            let mut delta = vec![0.0; self.sizes[nl]];
            delta[oi] = 1.0;
            for k in (0..nl).rev() {
                let (nin, nout) = (self.sizes[k], self.sizes[k + 1]);
                let base = offsets[k];
                for o in 0..nout {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for i in 0..nin {
                        row[base + o * nin + i] = d * acts[k][i];
                    }
                    row[base + nin * nout + o] = d;
                }
                if k > 0 {
                    let mut nd = vec![0.0; nin];
                    for i in 0..nin {
                        let mut s = 0.0;
                        for o in 0..nout {
                            s += self.weights[k][o * nin + i] * delta[o];
                        }
                        let a = acts[k][i];
                        nd[i] = s * (1.0 - a * a);
                    }
                    delta = nd;
                }
            }
            rows.push(row);
        }
        (out, rows)
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Consecutive validation increases tolerated before stopping.
    pub max_fail: usize,
    pub mu_init: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { max_epochs: 150, max_fail: 12, mu_init: 1e-3, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

fn mse(net: &Mlp, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for (x, y) in xs.iter().zip(ys) {
        let o = net.forward_normalized(x);
        for (a, b) in o.iter().zip(y) {
            s += (a - b) * (a - b);
            n += 1;
        }
    }
    s / n.max(1) as f64
}

/// Fits `net` (architecture fixed by `sizes`) to the samples. Normalisation constants
/// are taken from the training inputs/targets; weights start from a seeded
/// Nguyen-Widrow-like initialisation.
pub fn train_mlp(
    sizes: &[usize],
    transform: OutputTransform,
    train_x: &[Vec<f64>],
    train_y: &[Vec<f64>],
    val_x: &[Vec<f64>],
    val_y: &[Vec<f64>],
    cfg: &TrainConfig,
) -> (Mlp, TrainReport) {
    let mut net = Mlp::new(sizes, transform);
    let (ni, no) = (sizes[0], *sizes.last().unwrap());
    for i in 0..ni {
        net.in_min[i] = train_x.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min);
        net.in_max[i] = train_x.iter().map(|x| x[i]).fold(f64::NEG_INFINITY, f64::max);
    }
    let tr = |v: f64| match transform {
        OutputTransform::Identity => v,
        OutputTransform::Log => v.ln(),
    };
    for o in 0..no {
        net.out_min[o] = train_y.iter().map(|y| tr(y[o])).fold(f64::INFINITY, f64::min);
        net.out_max[o] = train_y.iter().map(|y| tr(y[o])).fold(f64::NEG_INFINITY, f64::max);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for (k, w) in net.weights.iter_mut().enumerate() {
        let fan_in = sizes[k] as f64;
        let scale = 1.0 / fan_in.sqrt();
        for v in w.iter_mut() {
            *v = rng.gen_range(-1.0..1.0) * scale;
        }
    }
    for b in net.biases.iter_mut() {
        for v in b.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }

    let txn: Vec<Vec<f64>> = train_x.iter().map(|x| net.normalize_input(x)).collect();
    let tyn: Vec<Vec<f64>> = train_y.iter().map(|y| net.target_to_normalized(y)).collect();
    let vxn: Vec<Vec<f64>> = val_x.iter().map(|x| net.normalize_input(x)).collect();
    let vyn: Vec<Vec<f64>> = val_y.iter().map(|y| net.target_to_normalized(y)).collect();

    let np = net.n_params();
    let mut mu = cfg.mu_init;
    let mut params = net.params();
    let mut cur = mse(&net, &txn, &tyn);
    let mut best = (params.clone(), if vxn.is_empty() { cur } else { mse(&net, &vxn, &vyn) });
    let mut prev_val = best.1;
    let mut fails = 0;
    let mut epochs = 0;
    for _ in 0..cfg.max_epochs {
        epochs += 1;
        let mut jtj = DMatrix::<f64>::zeros(np, np);
        let mut jtr = DVector::<f64>::zeros(np);
        for (x, y) in txn.iter().zip(&tyn) {
            let (o, rows) = net.output_jacobian(x);
            for (k, row) in rows.iter().enumerate() {
                let r = o[k] - y[k];
                let nz: Vec<usize> = (0..np).filter(|&i| row[i] != 0.0).collect();
                for &i in &nz {
                    jtr[i] += row[i] * r;
                    let ri = row[i];
                    for &j in &nz {
                        if j <= i {
                            jtj[(i, j)] += ri * row[j];
                        }
                    }
                }
            }
        }
        for i in 0..np {
            for j in 0..i {
                jtj[(j, i)] = jtj[(i, j)];
            }
        }
        let mut improved = false;
        while mu < 1e10 {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] += mu;
            }
            let Some(ch) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = ch.solve(&(-&jtr));
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            net.set_params(&trial);
            let e = mse(&net, &txn, &tyn);
            if e < cur {
                params = trial;
                cur = e;
                mu = (mu * 0.1).max(1e-20);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        net.set_params(&params);
        if !improved {
            break;
        }
        if !vxn.is_empty() {
            let v = mse(&net, &vxn, &vyn);
            if v < best.1 {
                best = (params.clone(), v);
            }
            if v > prev_val {
                fails += 1;
                if fails >= cfg.max_fail {
                    break;
                }
            } else {
                fails = 0;
            }
            prev_val = v;
        } else {
            best = (params.clone(), cur);
        }
        if cur < 1e-16 {
            break;
        }
    }
    net.set_params(&best.0);
    let train_mse = mse(&net, &txn, &tyn);
    (net, TrainReport { epochs, train_mse, val_mse: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::HyperDual;

    #[test]
    fn constant_target_with_no_hidden_layer() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|_| vec![3.5, -1.0]).collect();
        let (net, rep) = train_mlp(&[2, 2], OutputTransform::Identity, &xs, &ys, &[], &[], &TrainConfig::default());
        assert!(rep.train_mse < 1e-20);
        for x in &xs {
            let y = net.eval(x);
            assert!((y[0] - 3.5).abs() < 1e-9 && (y[1] + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn smooth_fit_and_determinism() {
        let xs: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 59.0, ((i * 7) % 60) as f64 / 59.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![(x[0] * 2.0).sin() + x[1], 1.0 + x[0] * x[1]]).collect();
        let cfg = TrainConfig { max_epochs: 100, ..TrainConfig::default() };
        let (a, ra) = train_mlp(&[2, 6, 2], OutputTransform::Log, &xs, &ys.iter().map(|y| vec![y[0] + 2.0, y[1]]).collect::<Vec<_>>(), &[], &[], &cfg);
        let (b, rb) = train_mlp(&[2, 6, 2], OutputTransform::Log, &xs, &ys.iter().map(|y| vec![y[0] + 2.0, y[1]]).collect::<Vec<_>>(), &[], &[], &cfg);
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(ra.train_mse < 1e-4);
    }

    #[test]
    fn backprop_jacobian_matches_finite_differences() {
        let mut net = Mlp::new(&[2, 3, 2], OutputTransform::Identity);
        let p: Vec<f64> = (0..net.n_params()).map(|i| ((i as f64) * 0.37).sin()).collect();
        net.set_params(&p);
        let x = [0.3, -0.6];
        let (_, rows) = net.output_jacobian(&x);
        let e = 1e-6;
        for k in 0..p.len() {
            let mut pp = p.clone();
            pp[k] += e;
            net.set_params(&pp);
            let up = net.forward_normalized(&x);
            pp[k] -= 2.0 * e;
            net.set_params(&pp);
            let dn = net.forward_normalized(&x);
            for o in 0..2 {
                assert!(((up[o] - dn[o]) / (2.0 * e) - rows[o][k]).abs() < 1e-7);
            }
        }
        net.set_params(&p);
        // hyper-dual forward pass agrees with the f64 pass
        let xs = HyperDual::<2>::vars(&x);
        let yd = net.eval(&xs);
        let yf = net.eval(&x);
        assert_eq!(yd[0].v, yf[0]);
    }
}
