//! Primal-dual interior-point method with a filter line search for sparse NLPs
//!
//! ```text
//! min f(x)  s.t.  c_L <= c(x) <= c_U,  x_L <= x <= x_U
//! ```
//!
//! Rows with `c_L == c_U` are equalities; the others get a slack `s` with
//! `c(x) - s = 0`. The Newton system is condensed onto `(dx, dy)` and factored
//! as a band matrix after reordering unknowns by the stage keys the problem
//! supplies. Negative curvature is handled by the inertia-free curvature test
//! with primal regularisation. A Gauss-Newton feasibility restoration takes
//! over when the line search stalls.

use super::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};

/// Values and first derivatives at one point.
#[derive(Clone, Debug)]
pub struct NlpEval {
    pub f: f64,
    pub grad: Vec<f64>,
    pub c: Vec<f64>,
    /// Values in [`Nlp::jac_structure`] order.
    pub jac: Vec<f64>,
}

pub trait Nlp {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn var_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn con_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn initial_point(&self) -> Vec<f64>;
    /// `(row, col)` of the constraint Jacobian nonzeros.
    fn jac_structure(&self) -> Vec<(usize, usize)>;
    /// `(i, j)` with `i >= j` of the Lagrangian Hessian nonzeros.
    fn hess_structure(&self) -> Vec<(usize, usize)>;
    /// Stage keys used to order `(variables, constraints)` in the KKT matrix so
    /// that it is banded. Defaults to the natural order.
    fn ordering_keys(&self) -> (Vec<usize>, Vec<usize>) {
        ((0..self.n()).collect(), (self.n()..self.n() + self.m()).collect())
    }
    /// Objective and constraint values; non-finite values reject a trial point.
    fn eval_values(&mut self, x: &[f64]) -> (f64, Vec<f64>);
    fn eval_derivatives(&mut self, x: &[f64]) -> Result<NlpEval>;
    /// Hessian of `obj_factor f + lambda^T c` at the point of the last
    /// [`Nlp::eval_derivatives`] call, in [`Nlp::hess_structure`] order. With
    /// `convexify` the problem may return a positive semidefinite approximation.
    fn hessian(&mut self, obj_factor: f64, lambda: &[f64], convexify: bool, out: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpmOptions {
    pub tol: f64,
    pub constr_viol_tol: f64,
    pub acceptable_tol: f64,
    pub acceptable_iter: usize,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Use the problem's convexified Hessian instead of the exact one.
    pub convexify: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tol: 1e-6, constr_viol_tol: 1e-6, acceptable_tol: 1e-4, acceptable_iter: 15, max_iter: 400, mu_init: 0.1, convexify: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Solved,
    Acceptable,
    MaxIterations,
    RestorationFailed,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Solved | SolveStatus::Acceptable)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Acceptable => "acceptable",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::RestorationFailed => "restoration-failed",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub inf_pr: f64,
    pub inf_du: f64,
    pub mu: f64,
    pub step_norm: f64,
    pub reg: f64,
    pub alpha_pr: f64,
    pub alpha_du: f64,
    pub trials: usize,
    /// `f` (Armijo), `h` (filter), `s` (second-order correction), `r` (restoration).
    pub kind: char,
}

#[derive(Clone, Debug)]
pub struct IpmResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Constraint multipliers, sign convention `L = f + y^T c`; positive on an
    /// active upper bound.
    pub y: Vec<f64>,
    pub objective: f64,
    /// Max absolute constraint/bound violation at `x`.
    pub inf_pr: f64,
    /// Scaled dual infeasibility at `x`.
    pub inf_du: f64,
    pub iterations: usize,
    pub log: Vec<IterRecord>,
}

impl IpmResult {
    /// Text log with one line per iteration.
    pub fn log_text(&self) -> String {
        let mut s = String::from("iter,objective,inf_pr,inf_du,mu,step_norm,reg,alpha_pr,alpha_du,trials,kind\n");
        for r in &self.log {
            s.push_str(&format!(
                "{},{:.10e},{:.4e},{:.4e},{:.4e},{:.4e},{:.2e},{:.4e},{:.4e},{},{}\n",
                r.iter, r.objective, r.inf_pr, r.inf_du, r.mu, r.step_norm, r.reg, r.alpha_pr, r.alpha_du, r.trials, r.kind
            ));
        }
        s
    }
}

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const S_MAX: f64 = 100.0;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const ETA_PHI: f64 = 1e-8;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const DELTA_SWITCH: f64 = 1.0;
const KAPPA_SIGMA: f64 = 1e10;
const MAX_SOC: usize = 4;
const KAPPA_SOC: f64 = 0.99;
const BOUND_PUSH: f64 = 1e-2;

/// Band-ordered KKT layout shared by every factorisation.
struct KktLayout {
    n: usize,
    m: usize,
    pos: Vec<usize>,
    bw: usize,
    hess: Vec<(usize, usize)>,
    jac: Vec<(usize, usize)>,
}

impl KktLayout {
    fn new(nlp: &dyn NlpShape) -> Result<Self> {
        let (n, m) = (nlp.n(), nlp.m());
        let (vk, ck) = nlp.keys();
        if vk.len() != n || ck.len() != m {
            return Err(Error::Argument("ordering keys have the wrong length".into()));
        }
        let mut order: Vec<usize> = (0..n + m).collect();
        order.sort_by_key(|&u| (if u < n { vk[u] } else { ck[u - n] }, u));
        let mut pos = vec![0; n + m];
        for (rank, &u) in order.iter().enumerate() {
            pos[u] = rank;
        }
        let hess = nlp.hess();
        let jac = nlp.jac();
        let mut bw = 0;
        for &(i, j) in &hess {
            bw = bw.max(pos[i].abs_diff(pos[j]));
        }
        for &(r, j) in &jac {
            if r >= m || j >= n {
                return Err(Error::Argument(format!("Jacobian entry ({r}, {j}) out of range")));
            }
            bw = bw.max(pos[n + r].abs_diff(pos[j]));
        }
        Ok(Self { n, m, pos, bw: bw.max(1), hess, jac })
    }

    fn assemble(&self, w: &[f64], diag_x: &[f64], jac: &[f64], diag_c: &[f64]) -> BandMatrix {
        let mut k = BandMatrix::zeros(self.n + self.m, self.bw, self.bw);
        for (idx, &(i, j)) in self.hess.iter().enumerate() {
            let (pi, pj) = (self.pos[i], self.pos[j]);
            k.add(pi, pj, w[idx]);
            if i != j {
                k.add(pj, pi, w[idx]);
            }
        }
        for i in 0..self.n {
            let p = self.pos[i];
            k.add(p, p, diag_x[i]);
        }
        for (idx, &(r, j)) in self.jac.iter().enumerate() {
            let (pr, pj) = (self.pos[self.n + r], self.pos[j]);
            k.add(pr, pj, jac[idx]);
            k.add(pj, pr, jac[idx]);
        }
        for r in 0..self.m {
            let p = self.pos[self.n + r];
            k.add(p, p, diag_c[r]);
        }
        k
    }

    /// Solves with two steps of iterative refinement against the unfactored matrix.
    fn solve(&self, mat: &BandMatrix, lu: &BandLu, rx: &[f64], rc: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nn = self.n + self.m;
        let mut b = vec![0.0; nn];
        for i in 0..self.n {
            b[self.pos[i]] = rx[i];
        }
        for r in 0..self.m {
            b[self.pos[self.n + r]] = rc[r];
        }
        let mut sol = b.clone();
        lu.solve(&mut sol);
        for _ in 0..2 {
            let ax = mat.matvec(&sol);
            let mut res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            lu.solve(&mut res);
            for (s, d) in sol.iter_mut().zip(&res) {
                *s += d;
            }
        }
        let dx = (0..self.n).map(|i| sol[self.pos[i]]).collect();
        let dy = (0..self.m).map(|r| sol[self.pos[self.n + r]]).collect();
        (dx, dy)
    }

    fn jt_times(&self, jac: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (idx, &(r, j)) in self.jac.iter().enumerate() {
            out[j] += jac[idx] * y[r];
        }
        out
    }

    fn hess_times(&self, w: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (idx, &(i, j)) in self.hess.iter().enumerate() {
            out[i] += w[idx] * v[j];
            if i != j {
                out[j] += w[idx] * v[i];
            }
        }
        out
    }
}

trait NlpShape {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn keys(&self) -> (Vec<usize>, Vec<usize>);
    fn hess(&self) -> Vec<(usize, usize)>;
    fn jac(&self) -> Vec<(usize, usize)>;
}

impl<T: Nlp> NlpShape for T {
    fn n(&self) -> usize {
        Nlp::n(self)
    }
    fn m(&self) -> usize {
        Nlp::m(self)
    }
    fn keys(&self) -> (Vec<usize>, Vec<usize>) {
        self.ordering_keys()
    }
    fn hess(&self) -> Vec<(usize, usize)> {
        self.hess_structure()
    }
    fn jac(&self) -> Vec<(usize, usize)> {
        self.jac_structure()
    }
}

/// Bounds bookkeeping for the primal variables and the slacks.
#[derive(Clone)]
struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn has_lo(&self, i: usize) -> bool {
        self.lo[i].is_finite()
    }
    fn has_hi(&self, i: usize) -> bool {
        self.hi[i].is_finite()
    }

    fn push_inside(&self, v: &mut [f64]) {
        for i in 0..v.len() {
            let (l, u) = (self.lo[i], self.hi[i]);
            if l.is_finite() && u.is_finite() {
                let pl = (BOUND_PUSH * l.abs().max(1.0)).min(BOUND_PUSH * (u - l));
                let pu = (BOUND_PUSH * u.abs().max(1.0)).min(BOUND_PUSH * (u - l));
                v[i] = v[i].clamp(l + pl, u - pu);
            } else if l.is_finite() {
                v[i] = v[i].max(l + BOUND_PUSH * l.abs().max(1.0));
            } else if u.is_finite() {
                v[i] = v[i].min(u - BOUND_PUSH * u.abs().max(1.0));
            }
        }
    }

    fn barrier(&self, v: &[f64], mu: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..v.len() {
            if self.has_lo(i) {
                acc -= mu * (v[i] - self.lo[i]).ln();
            }
            if self.has_hi(i) {
                acc -= mu * (self.hi[i] - v[i]).ln();
            }
        }
        acc
    }

    fn barrier_slope(&self, v: &[f64], d: &[f64], mu: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..v.len() {
            if self.has_lo(i) {
                acc -= mu * d[i] / (v[i] - self.lo[i]);
            }
            if self.has_hi(i) {
                acc += mu * d[i] / (self.hi[i] - v[i]);
            }
        }
        acc
    }

    /// Largest step in (0, 1] keeping `v + a d` a fraction `tau` away from the bounds.
    fn max_step(&self, v: &[f64], d: &[f64], tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..v.len() {
            if self.has_lo(i) && d[i] < 0.0 {
                a = a.min(-tau * (v[i] - self.lo[i]) / d[i]);
            }
            if self.has_hi(i) && d[i] > 0.0 {
                a = a.min(tau * (self.hi[i] - v[i]) / d[i]);
            }
        }
        a
    }

    fn violation(&self, v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..v.len() {
            worst = worst.max(self.lo[i] - v[i]).max(v[i] - self.hi[i]);
        }
        worst
    }
}

fn max_step_dual(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    let mut a: f64 = 1.0;
    for i in 0..z.len() {
        if dz[i] < 0.0 {
            a = a.min(-tau * z[i] / dz[i]);
        }
    }
    a
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Primal-dual iterate.
#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    vl: Vec<f64>,
    vu: Vec<f64>,
}

struct Solver<'a, P: Nlp> {
    nlp: &'a mut P,
    opts: IpmOptions,
    layout: KktLayout,
    xb: Bounds,
    sb: Bounds,
    cl: Vec<f64>,
    /// Constraint row -> slack index for inequality rows.
    slack_of: Vec<Option<usize>>,
    ineq_rows: Vec<usize>,
    filter: Vec<(f64, f64)>,
    theta_max: f64,
    theta_min: f64,
    last_reg: f64,
}

impl<'a, P: Nlp> Solver<'a, P> {
    /// Constraint residual vector: `c - c_L` on equality rows, `c - s` on inequality rows.
    fn residual(&self, c: &[f64], s: &[f64]) -> Vec<f64> {
        (0..c.len())
            .map(|r| match self.slack_of[r] {
                Some(k) => c[r] - s[k],
                None => c[r] - self.cl[r],
            })
            .collect()
    }

    fn phi(&self, f: f64, x: &[f64], s: &[f64], mu: f64) -> f64 {
        f + self.xb.barrier(x, mu) + self.sb.barrier(s, mu)
    }

    fn filter_ok(&self, theta: f64, phi: f64) -> bool {
        theta <= self.theta_max && self.filter.iter().all(|&(t, p)| theta < t || phi < p)
    }

    fn add_filter(&mut self, theta: f64, phi: f64) {
        let entry = ((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta);
        self.filter.retain(|&(t, p)| !(t >= entry.0 && p >= entry.1));
        self.filter.push(entry);
    }

    fn sigma_x(&self, it: &Iterate) -> Vec<f64> {
        (0..it.x.len())
            .map(|i| {
                let mut s = 0.0;
                if self.xb.has_lo(i) {
                    s += it.zl[i] / (it.x[i] - self.xb.lo[i]);
                }
                if self.xb.has_hi(i) {
                    s += it.zu[i] / (self.xb.hi[i] - it.x[i]);
                }
                s
            })
            .collect()
    }

    fn sigma_s(&self, it: &Iterate) -> Vec<f64> {
        (0..it.s.len())
            .map(|k| {
                let mut s = 0.0;
                if self.sb.has_lo(k) {
                    s += it.vl[k] / (it.s[k] - self.sb.lo[k]);
                }
                if self.sb.has_hi(k) {
                    s += it.vu[k] / (self.sb.hi[k] - it.s[k]);
                }
                s
            })
            .collect()
    }

    /// (scaled dual infeasibility, primal infeasibility, scaled complementarity) at barrier `mu`.
    fn errors(&self, it: &Iterate, ev: &NlpEval, mu: f64) -> (f64, f64, f64) {
        let n = it.x.len();
        let jty = self.layout.jt_times(&ev.jac, &it.y);
        let mut du: f64 = 0.0;
        for i in 0..n {
            du = du.max((ev.grad[i] + jty[i] - it.zl[i] + it.zu[i]).abs());
        }
        for (k, &r) in self.ineq_rows.iter().enumerate() {
            du = du.max((-it.y[r] - it.vl[k] + it.vu[k]).abs());
        }
        let pr = norm_inf(&self.residual(&ev.c, &it.s));
        let mut co: f64 = 0.0;
        let mut zsum = 0.0;
        let mut nb = 0usize;
        for i in 0..n {
            if self.xb.has_lo(i) {
                co = co.max(((it.x[i] - self.xb.lo[i]) * it.zl[i] - mu).abs());
                zsum += it.zl[i];
                nb += 1;
            }
            if self.xb.has_hi(i) {
                co = co.max(((self.xb.hi[i] - it.x[i]) * it.zu[i] - mu).abs());
                zsum += it.zu[i];
                nb += 1;
            }
        }
        for k in 0..it.s.len() {
            if self.sb.has_lo(k) {
                co = co.max(((it.s[k] - self.sb.lo[k]) * it.vl[k] - mu).abs());
                zsum += it.vl[k];
                nb += 1;
            }
            if self.sb.has_hi(k) {
                co = co.max(((self.sb.hi[k] - it.s[k]) * it.vu[k] - mu).abs());
                zsum += it.vu[k];
                nb += 1;
            }
        }
        let s_d = ((norm1(&it.y) + zsum) / ((it.y.len() + nb).max(1) as f64)).max(S_MAX) / S_MAX;
        let s_c = (zsum / (nb.max(1) as f64)).max(S_MAX) / S_MAX;
        (du / s_d, pr, co / s_c)
    }

    fn factor(&self, w: &[f64], diag_x: &[f64], jac: &[f64], diag_c: &[f64]) -> Option<(BandMatrix, BandLu)> {
        let mat = self.layout.assemble(w, diag_x, jac, diag_c);
        let lu = mat.clone().factor()?;
        Some((mat, lu))
    }

    fn run(mut self) -> Result<IpmResult> {
        let n = self.layout.n;
        let m = self.layout.m;
        let mi = self.ineq_rows.len();
        let mut x = self.nlp.initial_point();
        if x.len() != n {
            return Err(Error::Argument("initial point has the wrong length".into()));
        }
        self.xb.push_inside(&mut x);
        let (_, c0) = self.nlp.eval_values(&x);
        let mut s: Vec<f64> = self.ineq_rows.iter().map(|&r| c0[r]).collect();
        for v in s.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
        self.sb.push_inside(&mut s);
        let ones = |b: &Bounds, len: usize, lo: bool| -> Vec<f64> {
            (0..len).map(|i| if (lo && b.has_lo(i)) || (!lo && b.has_hi(i)) { 1.0 } else { 0.0 }).collect()
        };
        let mut it = Iterate {
            zl: ones(&self.xb, n, true),
            zu: ones(&self.xb, n, false),
            vl: ones(&self.sb, mi, true),
            vu: ones(&self.sb, mi, false),
            x,
            s,
            y: vec![0.0; m],
        };
        let mut mu = self.opts.mu_init;
        let mut ev = self.nlp.eval_derivatives(&it.x)?;
        if !ev.f.is_finite() || ev.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("NLP is not finite at the initial point".into()));
        }
        let theta0 = norm1(&self.residual(&ev.c, &it.s));
        self.theta_max = 1e4 * theta0.max(1.0);
        self.theta_min = 1e-4 * theta0.max(1.0);
        let mut log = Vec::new();
        let mut acceptable_count = 0;
        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        let mut w = vec![0.0; self.layout.hess.len()];
        let status;
        let mut iter = 0;
        loop {
            let (du0, pr0, co0) = self.errors(&it, &ev, 0.0);
            let viol = pr0.max(self.xb.violation(&it.x));
            if viol <= self.opts.constr_viol_tol && best.as_ref().map_or(true, |b| ev.f < b.0) {
                best = Some((ev.f, it.x.clone(), it.y.clone()));
            }
            let e0 = du0.max(pr0).max(co0);
            if e0 <= self.opts.tol && pr0 <= self.opts.constr_viol_tol {
                status = SolveStatus::Solved;
                break;
            }
            if e0 <= self.opts.acceptable_tol && pr0 <= self.opts.acceptable_tol {
                acceptable_count += 1;
                if acceptable_count >= self.opts.acceptable_iter {
                    status = SolveStatus::Acceptable;
                    break;
                }
            } else {
                acceptable_count = 0;
            }
            if iter >= self.opts.max_iter {
                status = SolveStatus::MaxIterations;
                break;
            }
            iter += 1;
            // barrier update
            loop {
                let (du, pr, co) = self.errors(&it, &ev, mu);
                if du.max(pr).max(co) > KAPPA_EPS * mu || mu <= self.opts.tol / 10.0 {
                    break;
                }
                mu = (self.opts.tol / 10.0).max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
                self.filter.clear();
            }
            self.nlp.hessian(1.0, &it.y, self.opts.convexify, &mut w);
            let sx = self.sigma_x(&it);
            let ss = self.sigma_s(&it);
            // right-hand side
            let jty = self.layout.jt_times(&ev.jac, &it.y);
            let mut rx = vec![0.0; n];
            for i in 0..n {
                let mut g = ev.grad[i] + jty[i];
                if self.xb.has_lo(i) {
                    g -= mu / (it.x[i] - self.xb.lo[i]);
                }
                if self.xb.has_hi(i) {
                    g += mu / (self.xb.hi[i] - it.x[i]);
                }
                rx[i] = -g;
            }
            let mut rs = vec![0.0; mi];
            for (k, &r) in self.ineq_rows.iter().enumerate() {
                let mut v = it.y[r];
                if self.sb.has_lo(k) {
                    v += mu / (it.s[k] - self.sb.lo[k]);
                }
                if self.sb.has_hi(k) {
                    v -= mu / (self.sb.hi[k] - it.s[k]);
                }
                rs[k] = v;
            }
            let cres = self.residual(&ev.c, &it.s);
            let mut rc: Vec<f64> = cres.iter().map(|v| -v).collect();
            for (k, &r) in self.ineq_rows.iter().enumerate() {
                rc[r] += rs[k] / ss[k];
            }
            // factorise with curvature test
            let mut reg = 0.0;
            let mut delta_c = 0.0;
            let mut attempt = 0;
            let (dx, dy, ds, kkt) = loop {
                attempt += 1;
                if attempt > 60 || reg > 1e40 {
                    return Ok(self.finish(SolveStatus::NumericalFailure, &it, &ev, iter, log, best));
                }
                let diag_x: Vec<f64> = sx.iter().map(|v| v + reg).collect();
                let diag_c: Vec<f64> = (0..m).map(|r| match self.slack_of[r] {
                    Some(k) => -1.0 / ss[k] - delta_c,
                    None => -delta_c,
                }).collect();
                let Some((mat, lu)) = self.factor(&w, &diag_x, &ev.jac, &diag_c) else {
                    delta_c = if delta_c == 0.0 { 1e-8 * mu.powf(0.25) } else { delta_c * 10.0 };
                    reg = next_reg(reg, self.last_reg);
                    continue;
                };
                let (dx, dy) = self.layout.solve(&mat, &lu, &rx, &rc);
                let ds: Vec<f64> = self.ineq_rows.iter().enumerate().map(|(k, &r)| (rs[k] + dy[r]) / ss[k]).collect();
                if !dx.iter().chain(&dy).all(|v| v.is_finite()) {
                    reg = next_reg(reg, self.last_reg);
                    continue;
                }
                if !self.opts.convexify {
                    let wd = self.layout.hess_times(&w, &dx);
                    let mut curv = 0.0;
                    let mut nrm = 0.0;
                    for i in 0..n {
                        curv += dx[i] * (wd[i] + diag_x[i] * dx[i]);
                        nrm += dx[i] * dx[i];
                    }
                    for k in 0..mi {
                        curv += ss[k] * ds[k] * ds[k];
                        nrm += ds[k] * ds[k];
                    }
                    if curv < 1e-10 * nrm {
                        reg = next_reg(reg, self.last_reg);
                        continue;
                    }
                }
                break (dx, dy, ds, (mat, lu, diag_c));
            };
            if reg > 0.0 {
                self.last_reg = reg;
            }
            // bound multiplier steps
            let mut dzl = vec![0.0; n];
            let mut dzu = vec![0.0; n];
            for i in 0..n {
                if self.xb.has_lo(i) {
                    let gap = it.x[i] - self.xb.lo[i];
                    dzl[i] = mu / gap - it.zl[i] - it.zl[i] / gap * dx[i];
                }
                if self.xb.has_hi(i) {
                    let gap = self.xb.hi[i] - it.x[i];
                    dzu[i] = mu / gap - it.zu[i] + it.zu[i] / gap * dx[i];
                }
            }
            let mut dvl = vec![0.0; mi];
            let mut dvu = vec![0.0; mi];
            for k in 0..mi {
                if self.sb.has_lo(k) {
                    let gap = it.s[k] - self.sb.lo[k];
                    dvl[k] = mu / gap - it.vl[k] - it.vl[k] / gap * ds[k];
                }
                if self.sb.has_hi(k) {
                    let gap = self.sb.hi[k] - it.s[k];
                    dvu[k] = mu / gap - it.vu[k] + it.vu[k] / gap * ds[k];
                }
            }
            let tau = TAU_MIN.max(1.0 - mu);
            let alpha_max = self.xb.max_step(&it.x, &dx, tau).min(self.sb.max_step(&it.s, &ds, tau));
            let alpha_du = max_step_dual(&it.zl, &dzl, tau)
                .min(max_step_dual(&it.zu, &dzu, tau))
                .min(max_step_dual(&it.vl, &dvl, tau))
                .min(max_step_dual(&it.vu, &dvu, tau));
            // filter line search
            let theta = norm1(&cres);
            let phi = self.phi(ev.f, &it.x, &it.s, mu);
            let gphi = ev.grad.iter().zip(&dx).map(|(g, d)| g * d).sum::<f64>()
                + self.xb.barrier_slope(&it.x, &dx, mu)
                + self.sb.barrier_slope(&it.s, &ds, mu);
            let alpha_min = if gphi < 0.0 {
                0.05 * GAMMA_THETA.min(GAMMA_PHI * theta / -gphi).min(DELTA_SWITCH * theta.powf(S_THETA) / (-gphi).powf(S_PHI))
            } else {
                0.05 * GAMMA_THETA
            };
            let mut alpha = alpha_max;
            let mut trials = 0;
            let mut accepted: Option<(Vec<f64>, Vec<f64>, f64, char)> = None;
            while alpha >= alpha_min.min(alpha_max) && trials < 60 {
                trials += 1;
                let xt: Vec<f64> = it.x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
                let st: Vec<f64> = it.s.iter().zip(&ds).map(|(a, b)| a + alpha * b).collect();
                let (ft, ct) = self.nlp.eval_values(&xt);
                if ft.is_finite() && ct.iter().all(|v| v.is_finite()) {
                    let tt = norm1(&self.residual(&ct, &st));
                    let pt = self.phi(ft, &xt, &st, mu);
                    if let Some(kind) = self.acceptable(theta, phi, gphi, alpha, tt, pt) {
                        accepted = Some((xt, st, alpha, kind));
                        break;
                    }
                    if trials == 1 && tt >= theta {
                        if let Some((xs, ss2)) = self.second_order(&it, &kkt, &rx, &rs, &ss, &cres, &ct, &st, alpha, theta, phi, gphi, mu) {
                            accepted = Some((xs, ss2, alpha, 's'));
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            let step_norm = norm_inf(&dx);
            let kind;
            match accepted {
                Some((xt, st, a, k)) => {
                    kind = k;
                    it.x = xt;
                    it.s = st;
                    for r in 0..m {
                        it.y[r] += a * dy[r];
                    }
                    for i in 0..n {
                        it.zl[i] += alpha_du * dzl[i];
                        it.zu[i] += alpha_du * dzu[i];
                    }
                    for k in 0..mi {
                        it.vl[k] += alpha_du * dvl[k];
                        it.vu[k] += alpha_du * dvu[k];
                    }
                    alpha = a;
                    if k != 'f' {
                        self.add_filter(theta, phi);
                    }
                }
                None => {
                    kind = 'r';
                    self.add_filter(theta, phi);
                    if !self.restore(&mut it, mu, theta)? {
                        log.push(record(iter, ev.f, theta, 0.0, mu, step_norm, reg, 0.0, 0.0, trials, 'r'));
                        return Ok(self.finish(SolveStatus::RestorationFailed, &it, &ev, iter, log, best));
                    }
                    alpha = 0.0;
                }
            }
            self.reset_bound_multipliers(&mut it, mu);
            ev = self.nlp.eval_derivatives(&it.x)?;
            let (du, pr, _) = self.errors(&it, &ev, 0.0);
            log.push(record(iter, ev.f, pr, du, mu, step_norm, reg, alpha, alpha_du, trials, kind));
        }
        Ok(self.finish(status, &it, &ev, iter, log, best))
    }

    fn acceptable(&self, theta: f64, phi: f64, gphi: f64, alpha: f64, tt: f64, pt: f64) -> Option<char> {
        if !self.filter_ok(tt, pt) {
            return None;
        }
        let switching = gphi < 0.0 && alpha * (-gphi).powf(S_PHI) > DELTA_SWITCH * theta.powf(S_THETA);
        if theta <= self.theta_min && switching {
            return (pt <= phi + ETA_PHI * alpha * gphi).then_some('f');
        }
        (tt <= (1.0 - GAMMA_THETA) * theta || pt <= phi - GAMMA_PHI * theta).then_some('h')
    }

    #[allow(clippy::too_many_arguments)]
    fn second_order(
        &mut self,
        it: &Iterate,
        kkt: &(BandMatrix, BandLu, Vec<f64>),
        rx: &[f64],
        rs: &[f64],
        ss: &[f64],
        cres: &[f64],
        c_trial: &[f64],
        s_trial: &[f64],
        alpha: f64,
        theta: f64,
        phi: f64,
        gphi: f64,
        mu: f64,
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let tau = TAU_MIN.max(1.0 - mu);
        let mut c_soc: Vec<f64> = cres.to_vec();
        let mut trial_res = self.residual(c_trial, s_trial);
        let mut theta_old = norm1(&trial_res);
        let mut alpha_soc = alpha;
        for _ in 0..MAX_SOC {
            for (a, b) in c_soc.iter_mut().zip(&trial_res) {
                *a = alpha_soc * *a + b;
            }
            let mut rc: Vec<f64> = c_soc.iter().map(|v| -v).collect();
            for (k, &r) in self.ineq_rows.iter().enumerate() {
                rc[r] += rs[k] / ss[k];
            }
            let (dx, dy) = self.layout.solve(&kkt.0, &kkt.1, rx, &rc);
            let ds: Vec<f64> = self.ineq_rows.iter().enumerate().map(|(k, &r)| (rs[k] + dy[r]) / ss[k]).collect();
            alpha_soc = self.xb.max_step(&it.x, &dx, tau).min(self.sb.max_step(&it.s, &ds, tau));
            let xt: Vec<f64> = it.x.iter().zip(&dx).map(|(a, b)| a + alpha_soc * b).collect();
            let st: Vec<f64> = it.s.iter().zip(&ds).map(|(a, b)| a + alpha_soc * b).collect();
            let (ft, ct) = self.nlp.eval_values(&xt);
            if !ft.is_finite() || ct.iter().any(|v| !v.is_finite()) {
                return None;
            }
            trial_res = self.residual(&ct, &st);
            let tt = norm1(&trial_res);
            let pt = self.phi(ft, &xt, &st, mu);
            if self.acceptable(theta, phi, gphi, alpha, tt, pt).is_some() {
                return Some((xt, st));
            }
            if tt > KAPPA_SOC * theta_old {
                return None;
            }
            theta_old = tt;
        }
        None
    }

    /// Gauss-Newton feasibility restoration; returns false when it stalls.
    fn restore(&mut self, it: &mut Iterate, mu: f64, theta_start: f64) -> Result<bool> {
        let n = self.layout.n;
        let m = self.layout.m;
        let tau = TAU_MIN.max(1.0 - mu);
        let w = vec![0.0; self.layout.hess.len()];
        for _ in 0..100 {
            let ev = self.nlp.eval_derivatives(&it.x)?;
            let res = self.residual(&ev.c, &it.s);
            let theta = norm1(&res);
            // primal barrier scaling keeps the step interior
            let dx_diag: Vec<f64> = (0..n)
                .map(|i| {
                    let mut d = 1e-6;
                    if self.xb.has_lo(i) {
                        d += mu / (it.x[i] - self.xb.lo[i]).powi(2);
                    }
                    if self.xb.has_hi(i) {
                        d += mu / (self.xb.hi[i] - it.x[i]).powi(2);
                    }
                    d
                })
                .collect();
            let ds_diag: Vec<f64> = (0..it.s.len())
                .map(|k| {
                    let mut d = 1e-6;
                    if self.sb.has_lo(k) {
                        d += mu / (it.s[k] - self.sb.lo[k]).powi(2);
                    }
                    if self.sb.has_hi(k) {
                        d += mu / (self.sb.hi[k] - it.s[k]).powi(2);
                    }
                    d
                })
                .collect();
            let diag_c: Vec<f64> = (0..m).map(|r| match self.slack_of[r] {
                Some(k) => -1.0 / ds_diag[k] - 1e-12,
                None => -1e-12,
            }).collect();
            let Some((mat, lu)) = self.factor(&w, &dx_diag, &ev.jac, &diag_c) else {
                return Ok(false);
            };
            let rc: Vec<f64> = res.iter().map(|v| -v).collect();
            let (dx, dy) = self.layout.solve(&mat, &lu, &vec![0.0; n], &rc);
            let ds: Vec<f64> = self.ineq_rows.iter().enumerate().map(|(k, &r)| dy[r] / ds_diag[k]).collect();
            let mut alpha = self.xb.max_step(&it.x, &dx, tau).min(self.sb.max_step(&it.s, &ds, tau));
            let mut moved = false;
            while alpha > 1e-8 {
                let xt: Vec<f64> = it.x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
                let st: Vec<f64> = it.s.iter().zip(&ds).map(|(a, b)| a + alpha * b).collect();
                let (ft, ct) = self.nlp.eval_values(&xt);
                if ft.is_finite() && ct.iter().all(|v| v.is_finite()) {
                    let tt = norm1(&self.residual(&ct, &st));
                    if tt <= (1.0 - 1e-4 * alpha) * theta {
                        it.x = xt;
                        it.s = st;
                        moved = true;
                        let pt = self.phi(ft, &it.x, &it.s, mu);
                        if tt <= 0.9 * theta_start && self.filter_ok(tt, pt) {
                            it.y.iter_mut().for_each(|v| *v = 0.0);
                            return Ok(true);
                        }
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                return Ok(false);
            }
        }
        Ok(false)
    }

    fn reset_bound_multipliers(&self, it: &mut Iterate, mu: f64) {
        let clamp = |z: &mut f64, gap: f64| {
            *z = z.clamp(mu / (KAPPA_SIGMA * gap), KAPPA_SIGMA * mu / gap);
        };
        for i in 0..it.x.len() {
            if self.xb.has_lo(i) {
                clamp(&mut it.zl[i], it.x[i] - self.xb.lo[i]);
            }
            if self.xb.has_hi(i) {
                clamp(&mut it.zu[i], self.xb.hi[i] - it.x[i]);
            }
        }
        for k in 0..it.s.len() {
            if self.sb.has_lo(k) {
                clamp(&mut it.vl[k], it.s[k] - self.sb.lo[k]);
            }
            if self.sb.has_hi(k) {
                clamp(&mut it.vu[k], self.sb.hi[k] - it.s[k]);
            }
        }
    }

    fn finish(&mut self, status: SolveStatus, it: &Iterate, ev: &NlpEval, iterations: usize, log: Vec<IterRecord>, best: Option<(f64, Vec<f64>, Vec<f64>)>) -> IpmResult {
        let (x, y) = match (status.is_success(), best) {
            (false, Some((_, bx, by))) => (bx, by),
            _ => (it.x.clone(), it.y.clone()),
        };
        let (f, c) = self.nlp.eval_values(&x);
        let (cl, cu) = self.nlp.con_bounds();
        let mut pr = self.xb.violation(&x);
        for r in 0..c.len() {
            pr = pr.max(cl[r] - c[r]).max(c[r] - cu[r]);
        }
        let du = self.errors(it, ev, 0.0).0;
        IpmResult { status, x, y, objective: f, inf_pr: pr, inf_du: du, iterations, log }
    }
}

fn next_reg(reg: f64, last: f64) -> f64 {
    if reg == 0.0 {
        if last == 0.0 {
            1e-4
        } else {
            (last / 3.0).max(1e-20)
        }
    } else if last == 0.0 {
        reg * 100.0
    } else {
        reg * 8.0
    }
}

#[allow(clippy::too_many_arguments)]
fn record(iter: usize, objective: f64, inf_pr: f64, inf_du: f64, mu: f64, step_norm: f64, reg: f64, alpha_pr: f64, alpha_du: f64, trials: usize, kind: char) -> IterRecord {
    IterRecord { iter, objective, inf_pr, inf_du, mu, step_norm, reg, alpha_pr, alpha_du, trials, kind }
}

/// Solves the NLP from its initial point (clipped into the bounds).
pub fn solve<P: Nlp>(nlp: &mut P, opts: &IpmOptions) -> Result<IpmResult> {
    let (xl, xu) = nlp.var_bounds();
    let (cl, cu) = nlp.con_bounds();
    let (n, m) = (Nlp::n(nlp), Nlp::m(nlp));
    if xl.len() != n || xu.len() != n || cl.len() != m || cu.len() != m {
        return Err(Error::Argument("bound vectors have the wrong length".into()));
    }
    if (0..n).any(|i| !(xl[i] < xu[i])) {
        return Err(Error::Argument("every variable needs lower < upper".into()));
    }
    let mut slack_of = vec![None; m];
    let mut ineq_rows = Vec::new();
    let (mut sl, mut su) = (Vec::new(), Vec::new());
    for r in 0..m {
        if cl[r] > cu[r] || (cl[r] == cu[r] && !cl[r].is_finite()) {
            return Err(Error::Argument(format!("constraint {r} has inconsistent bounds")));
        }
        if cl[r] < cu[r] {
            if !cl[r].is_finite() && !cu[r].is_finite() {
                return Err(Error::Argument(format!("constraint {r} is unbounded on both sides")));
            }
            slack_of[r] = Some(ineq_rows.len());
            ineq_rows.push(r);
            sl.push(cl[r]);
            su.push(cu[r]);
        }
    }
    let layout = KktLayout::new(&*nlp)?;
    let solver = Solver {
        opts: opts.clone(),
        layout,
        xb: Bounds { lo: xl, hi: xu },
        sb: Bounds { lo: sl, hi: su },
        cl,
        slack_of,
        ineq_rows,
        filter: Vec::new(),
        theta_max: f64::INFINITY,
        theta_min: 0.0,
        last_reg: 0.0,
        nlp,
    };
    solver.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hock-Schittkowski problem 71.
    struct Hs071 {
        x: Vec<f64>,
    }

    impl Nlp for Hs071 {
        fn n(&self) -> usize {
            4
        }
        fn m(&self) -> usize {
            2
        }
        fn var_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![1.0; 4], vec![5.0; 4])
        }
        fn con_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![25.0, 40.0], vec![f64::INFINITY, 40.0])
        }
        fn initial_point(&self) -> Vec<f64> {
            vec![1.0, 5.0, 5.0, 1.0]
        }
        fn jac_structure(&self) -> Vec<(usize, usize)> {
            (0..2).flat_map(|r| (0..4).map(move |j| (r, j))).collect()
        }
        fn hess_structure(&self) -> Vec<(usize, usize)> {
            (0..4).flat_map(|i| (0..=i).map(move |j| (i, j))).collect()
        }
        fn eval_values(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
            let f = x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2];
            (f, vec![x[0] * x[1] * x[2] * x[3], x.iter().map(|v| v * v).sum()])
        }
        fn eval_derivatives(&mut self, x: &[f64]) -> Result<NlpEval> {
            let (f, c) = self.eval_values(x);
            let grad = vec![x[3] * (2.0 * x[0] + x[1] + x[2]), x[0] * x[3], x[0] * x[3] + 1.0, x[0] * (x[0] + x[1] + x[2])];
            let mut jac = vec![x[1] * x[2] * x[3], x[0] * x[2] * x[3], x[0] * x[1] * x[3], x[0] * x[1] * x[2]];
            jac.extend(x.iter().map(|v| 2.0 * v));
            self.x = x.to_vec();
            Ok(NlpEval { f, grad, c, jac })
        }
        fn hessian(&mut self, of: f64, l: &[f64], _: bool, out: &mut [f64]) {
            let x = &self.x;
            let mut h = [[0.0; 4]; 4];
            h[0][0] = of * 2.0 * x[3];
            h[1][0] = of * x[3];
            h[2][0] = of * x[3];
            h[3][0] = of * (2.0 * x[0] + x[1] + x[2]);
            h[3][1] = of * x[0];
            h[3][2] = of * x[0];
            h[1][0] += l[0] * x[2] * x[3];
            h[2][0] += l[0] * x[1] * x[3];
            h[3][0] += l[0] * x[1] * x[2];
            h[2][1] += l[0] * x[0] * x[3];
            h[3][1] += l[0] * x[0] * x[2];
            h[3][2] += l[0] * x[0] * x[1];
            for i in 0..4 {
                h[i][i] += 2.0 * l[1];
            }
            let mut k = 0;
            for i in 0..4 {
                for j in 0..=i {
                    out[k] = h[i][j];
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn solves_hs071() {
        let mut p = Hs071 { x: vec![] };
        let r = solve(&mut p, &IpmOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Solved, "{}", r.log_text());
        let expect = [1.0, 4.742_999_64, 3.821_149_98, 1.379_408_29];
        for i in 0..4 {
            assert!((r.x[i] - expect[i]).abs() < 1e-5, "{:?}", r.x);
        }
        assert!((r.objective - 17.014_017_3).abs() < 1e-6);
        // active inequality c0 >= 25 has a negative multiplier in the L = f + y c convention
        assert!(r.y[0] < 0.0);
    }
}
