//! Hermite-Simpson (separated) direct collocation of a generic optimal control
//! problem into an [`Nlp`].
//!
//! Decision variables are the `N = nx + nu` physical quantities at every node
//! and segment midpoint (`2 S + 1` points), stored scaled as
//! `z = (value - offset) / scale`. Each segment contributes the interpolation
//! and Simpson defects; path inequalities `g(z) <= upper` apply from
//! `path_from` on. The objective is `weight * int L dt` by Simpson quadrature.

use nalgebra::{DMatrix, SymmetricEigen};

use super::ipm::{Nlp, NlpEval};
use crate::ad::{HyperDual, Scalar};
use crate::error::{Error, Result};

/// Continuous-time problem evaluated at one collocation point.
pub trait PointModel<const N: usize> {
    fn nx(&self) -> usize;
    fn n_path(&self) -> usize;
    /// Writes the state rates and path-constraint values at mesh point `point`
    /// (time `t`) and returns the running-cost integrand.
    fn eval<S: Scalar>(&self, point: usize, t: f64, z: &[S; N], rates: &mut [S], path: &mut [S]) -> S;
}

#[derive(Clone, Debug)]
pub struct CollocationSpec<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub segments: usize,
    pub offset: [f64; N],
    pub scale: [f64; N],
    pub lower: [f64; N],
    pub upper: [f64; N],
    /// States fixed at the first point (equalities); their bounds are dropped there.
    pub initial_state: Option<Vec<f64>>,
    pub final_state: Vec<Option<f64>>,
    pub path_upper: Vec<f64>,
    pub path_from: usize,
    pub objective_weight: f64,
    /// Physical initial guess for every point.
    pub guess: Vec<[f64; N]>,
}

impl<const N: usize> CollocationSpec<N> {
    pub fn points(&self) -> usize {
        2 * self.segments + 1
    }

    pub fn times(&self) -> Vec<f64> {
        let np = self.points();
        (0..np).map(|j| self.t0 + (self.t1 - self.t0) * j as f64 / (np - 1) as f64).collect()
    }

    /// Simpson weights per point for `int L dt`.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let h = (self.t1 - self.t0) / self.segments as f64;
        let mut w = vec![0.0; self.points()];
        for k in 0..self.segments {
            w[2 * k] += h / 6.0;
            w[2 * k + 1] += 4.0 * h / 6.0;
            w[2 * k + 2] += h / 6.0;
        }
        w
    }
}

struct PointCache<const N: usize> {
    rates: Vec<HyperDual<N>>,
    path: Vec<HyperDual<N>>,
    cost: HyperDual<N>,
}

pub struct Collocation<'a, M, const N: usize> {
    pub model: &'a M,
    pub spec: CollocationSpec<N>,
    nx: usize,
    np: usize,
    times: Vec<f64>,
    qw: Vec<f64>,
    /// Constraint rows: initial, then per segment (interp, simpson), then path, then final.
    n_init: usize,
    seg_base: usize,
    path_base: usize,
    final_rows: Vec<(usize, f64)>,
    final_base: usize,
    m: usize,
    cache: Vec<PointCache<N>>,
}

impl<'a, M: PointModel<N>, const N: usize> Collocation<'a, M, N> {
    pub fn new(model: &'a M, spec: CollocationSpec<N>) -> Result<Self> {
        let nx = model.nx();
        let np_ = model.n_path();
        if nx == 0 || nx > N {
            return Err(Error::Argument(format!("state count {nx} incompatible with {N} variables per point")));
        }
        if spec.segments == 0 || !(spec.t1 > spec.t0) {
            return Err(Error::Argument("collocation mesh must be nonempty with t1 > t0".into()));
        }
        if spec.guess.len() != spec.points() {
            return Err(Error::Argument("initial guess must cover every collocation point".into()));
        }
        if spec.path_upper.len() != np_ || spec.final_state.len() != nx {
            return Err(Error::Argument("path or final-state specification has the wrong length".into()));
        }
        if (0..N).any(|i| !(spec.lower[i] < spec.upper[i]) || !(spec.scale[i] > 0.0)) {
            return Err(Error::Argument("bounds need lower < upper and positive scales".into()));
        }
        if spec.initial_state.as_ref().is_some_and(|v| v.len() != nx) {
            return Err(Error::Argument("initial state has the wrong length".into()));
        }
        let n_init = if spec.initial_state.is_some() { nx } else { 0 };
        let seg_base = n_init;
        let path_base = seg_base + 2 * nx * spec.segments;
        let path_points = spec.points().saturating_sub(spec.path_from);
        let final_base = path_base + np_ * path_points;
        let final_rows: Vec<(usize, f64)> = spec.final_state.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
        let m = final_base + final_rows.len();
        let times = spec.times();
        let qw = spec.quadrature_weights();
        Ok(Self { model, nx, np: np_, times, qw, n_init, seg_base, path_base, final_rows, final_base, m, cache: Vec::new(), spec })
    }

    pub fn points(&self) -> usize {
        self.spec.points()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    fn idx(&self, point: usize, var: usize) -> usize {
        point * N + var
    }

    /// Physical values at every point from a scaled NLP vector.
    pub fn unscale(&self, x: &[f64]) -> Vec<[f64; N]> {
        (0..self.points()).map(|j| std::array::from_fn(|i| self.spec.offset[i] + self.spec.scale[i] * x[self.idx(j, i)])).collect()
    }

    pub fn scale_point(&self, z: &[f64; N]) -> [f64; N] {
        std::array::from_fn(|i| (z[i] - self.spec.offset[i]) / self.spec.scale[i])
    }

    /// Row of path constraint `q` at `point`, if imposed there.
    pub fn path_row(&self, point: usize, q: usize) -> Option<usize> {
        (point >= self.spec.path_from).then(|| self.path_base + (point - self.spec.path_from) * self.np + q)
    }

    /// `int L dt` over the horizon for physical values at every point.
    pub fn integral(&self, z: &[[f64; N]]) -> f64 {
        let mut rates = vec![0.0; self.nx];
        let mut path = vec![0.0; self.np];
        (0..self.points()).map(|j| self.qw[j] * self.model.eval(j, self.times[j], &z[j], &mut rates, &mut path)).sum()
    }

    fn point_f64(&self, x: &[f64], j: usize, rates: &mut [f64], path: &mut [f64]) -> f64 {
        let z: [f64; N] = std::array::from_fn(|i| self.spec.offset[i] + self.spec.scale[i] * x[self.idx(j, i)]);
        self.model.eval(j, self.times[j], &z, rates, path)
    }

    fn point_hd(&self, x: &[f64], j: usize) -> PointCache<N> {
        let z: [HyperDual<N>; N] = std::array::from_fn(|i| HyperDual::var(x[self.idx(j, i)], i) * self.spec.scale[i] + self.spec.offset[i]);
        let mut rates = vec![HyperDual::constant(0.0); self.nx];
        let mut path = vec![HyperDual::constant(0.0); self.np];
        let cost = self.model.eval(j, self.times[j], &z, &mut rates, &mut path);
        PointCache { rates, path, cost }
    }

    fn seg_h(&self, k: usize) -> f64 {
        self.times[2 * k + 2] - self.times[2 * k]
    }

    /// Constraint values from per-point rates, scaled states and path values.
    fn constraints_from(&self, x: &[f64], rates: &[Vec<f64>], path: &[Vec<f64>]) -> Vec<f64> {
        let nx = self.nx;
        let mut c = vec![0.0; self.m];
        if let Some(x0) = &self.spec.initial_state {
            for i in 0..nx {
                c[i] = x[self.idx(0, i)] - (x0[i] - self.spec.offset[i]) / self.spec.scale[i];
            }
        }
        for k in 0..self.spec.segments {
            let (a, mid, b) = (2 * k, 2 * k + 1, 2 * k + 2);
            let h = self.seg_h(k);
            let base = self.seg_base + 2 * nx * k;
            for i in 0..nx {
                let sc = self.spec.scale[i];
                let (za, zm, zb) = (x[self.idx(a, i)], x[self.idx(mid, i)], x[self.idx(b, i)]);
                c[base + i] = zm - 0.5 * (za + zb) - h / (8.0 * sc) * (rates[a][i] - rates[b][i]);
                c[base + nx + i] = zb - za - h / (6.0 * sc) * (rates[a][i] + 4.0 * rates[mid][i] + rates[b][i]);
            }
        }
        for j in self.spec.path_from..self.points() {
            for q in 0..self.np {
                c[self.path_row(j, q).unwrap()] = path[j][q];
            }
        }
        let last = self.points() - 1;
        for (r, &(i, v)) in self.final_rows.iter().enumerate() {
            c[self.final_base + r] = x[self.idx(last, i)] - (v - self.spec.offset[i]) / self.spec.scale[i];
        }
        c
    }

    /// Defect residuals (interpolation then Simpson per segment) at a scaled point.
    pub fn defects(&self, x: &[f64]) -> Vec<f64> {
        let (_, c) = self.values(x);
        c[self.seg_base..self.path_base].to_vec()
    }

    fn values(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut rates = vec![vec![0.0; self.nx]; self.points()];
        let mut path = vec![vec![0.0; self.np]; self.points()];
        let mut f = 0.0;
        for j in 0..self.points() {
            let l = self.point_f64(x, j, &mut rates[j], &mut path[j]);
            f += self.spec.objective_weight * self.qw[j] * l;
        }
        (f, self.constraints_from(x, &rates, &path))
    }

    /// Multiplier-weighted coefficients of each rate component's Hessian at `point`.
    fn rate_weights(&self, point: usize, lambda: &[f64]) -> Vec<f64> {
        let nx = self.nx;
        let mut w = vec![0.0; nx];
        let mut add_segment = |k: usize, role: usize| {
            let h = self.seg_h(k);
            let base = self.seg_base + 2 * nx * k;
            for i in 0..nx {
                let sc = self.spec.scale[i];
                let (interp, simpson) = match role {
                    0 => (-h / (8.0 * sc), -h / (6.0 * sc)),
                    1 => (0.0, -4.0 * h / (6.0 * sc)),
                    _ => (h / (8.0 * sc), -h / (6.0 * sc)),
                };
                w[i] += lambda[base + i] * interp + lambda[base + nx + i] * simpson;
            }
        };
        if point % 2 == 1 {
            add_segment(point / 2, 1);
        } else {
            if point / 2 < self.spec.segments {
                add_segment(point / 2, 0);
            }
            if point > 0 {
                add_segment(point / 2 - 1, 2);
            }
        }
        w
    }
}

impl<'a, M: PointModel<N>, const N: usize> Nlp for Collocation<'a, M, N> {
    fn n(&self) -> usize {
        self.points() * N
    }

    fn m(&self) -> usize {
        self.m
    }

    fn var_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(self.n());
        let mut hi = Vec::with_capacity(self.n());
        for j in 0..self.points() {
            for i in 0..N {
                let fixed = j == 0 && i < self.nx && self.spec.initial_state.is_some();
                if fixed {
                    lo.push(f64::NEG_INFINITY);
                    hi.push(f64::INFINITY);
                } else {
                    lo.push((self.spec.lower[i] - self.spec.offset[i]) / self.spec.scale[i]);
                    hi.push((self.spec.upper[i] - self.spec.offset[i]) / self.spec.scale[i]);
                }
            }
        }
        (lo, hi)
    }

    fn con_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; self.m];
        let mut hi = vec![0.0; self.m];
        for j in self.spec.path_from..self.points() {
            for q in 0..self.np {
                let r = self.path_row(j, q).unwrap();
                lo[r] = f64::NEG_INFINITY;
                hi[r] = self.spec.path_upper[q];
            }
        }
        (lo, hi)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.spec.guess.iter().flat_map(|z| self.scale_point(z)).collect()
    }

    fn jac_structure(&self) -> Vec<(usize, usize)> {
        let nx = self.nx;
        let mut s = Vec::new();
        for i in 0..self.n_init {
            s.push((i, self.idx(0, i)));
        }
        for k in 0..self.spec.segments {
            let (a, mid, b) = (2 * k, 2 * k + 1, 2 * k + 2);
            let base = self.seg_base + 2 * nx * k;
            for i in 0..nx {
                for v in 0..N {
                    s.push((base + i, self.idx(a, v)));
                }
                s.push((base + i, self.idx(mid, i)));
                for v in 0..N {
                    s.push((base + i, self.idx(b, v)));
                }
            }
            for i in 0..nx {
                for p in [a, mid, b] {
                    for v in 0..N {
                        s.push((base + nx + i, self.idx(p, v)));
                    }
                }
            }
        }
        for j in self.spec.path_from..self.points() {
            for q in 0..self.np {
                let r = self.path_row(j, q).unwrap();
                for v in 0..N {
                    s.push((r, self.idx(j, v)));
                }
            }
        }
        let last = self.points() - 1;
        for (r, &(i, _)) in self.final_rows.iter().enumerate() {
            s.push((self.final_base + r, self.idx(last, i)));
        }
        s
    }

    fn hess_structure(&self) -> Vec<(usize, usize)> {
        let mut s = Vec::with_capacity(self.points() * N * (N + 1) / 2);
        for j in 0..self.points() {
            for a in 0..N {
                for b in 0..=a {
                    s.push((self.idx(j, a), self.idx(j, b)));
                }
            }
        }
        s
    }

    fn ordering_keys(&self) -> (Vec<usize>, Vec<usize>) {
        let vars = (0..self.n()).map(|v| 3 * (v / N)).collect();
        let mut cons = vec![0; self.m];
        for r in 0..self.n_init {
            cons[r] = 1;
        }
        for k in 0..self.spec.segments {
            let base = self.seg_base + 2 * self.nx * k;
            for r in base..base + 2 * self.nx {
                cons[r] = 3 * (2 * k + 1) + 1;
            }
        }
        for j in self.spec.path_from..self.points() {
            for q in 0..self.np {
                cons[self.path_row(j, q).unwrap()] = 3 * j + 1;
            }
        }
        for r in self.final_base..self.m {
            cons[r] = 3 * (self.points() - 1) + 1;
        }
        (vars, cons)
    }

    fn eval_values(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        self.values(x)
    }

    fn eval_derivatives(&mut self, x: &[f64]) -> Result<NlpEval> {
        let nx = self.nx;
        self.cache = (0..self.points()).map(|j| self.point_hd(x, j)).collect();
        let rates: Vec<Vec<f64>> = self.cache.iter().map(|c| c.rates.iter().map(|r| r.v).collect()).collect();
        let path: Vec<Vec<f64>> = self.cache.iter().map(|c| c.path.iter().map(|r| r.v).collect()).collect();
        let mut f = 0.0;
        let mut grad = vec![0.0; self.n()];
        for j in 0..self.points() {
            let w = self.spec.objective_weight * self.qw[j];
            f += w * self.cache[j].cost.v;
            for v in 0..N {
                grad[self.idx(j, v)] += w * self.cache[j].cost.g[v];
            }
        }
        let c = self.constraints_from(x, &rates, &path);
        let mut jac = Vec::new();
        for _ in 0..self.n_init {
            jac.push(1.0);
        }
        for k in 0..self.spec.segments {
            let (a, mid, b) = (2 * k, 2 * k + 1, 2 * k + 2);
            let h = self.seg_h(k);
            for i in 0..nx {
                let sc = self.spec.scale[i];
                let ci = h / (8.0 * sc);
                for v in 0..N {
                    let unit = if v == i { -0.5 } else { 0.0 };
                    jac.push(unit - ci * self.cache[a].rates[i].g[v]);
                }
                jac.push(1.0);
                for v in 0..N {
                    let unit = if v == i { -0.5 } else { 0.0 };
                    jac.push(unit + ci * self.cache[b].rates[i].g[v]);
                }
            }
            for i in 0..nx {
                let cs = h / (6.0 * self.spec.scale[i]);
                for (p, weight, unit) in [(a, 1.0, -1.0), (mid, 4.0, 0.0), (b, 1.0, 1.0)] {
                    for v in 0..N {
                        let u = if v == i { unit } else { 0.0 };
                        jac.push(u - cs * weight * self.cache[p].rates[i].g[v]);
                    }
                }
            }
        }
        for j in self.spec.path_from..self.points() {
            for q in 0..self.np {
                jac.extend_from_slice(&self.cache[j].path[q].g);
            }
        }
        for _ in 0..self.final_rows.len() {
            jac.push(1.0);
        }
        if !f.is_finite() || c.iter().chain(&jac).chain(&grad).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite derivatives in the collocation problem".into()));
        }
        Ok(NlpEval { f, grad, c, jac })
    }

    fn hessian(&mut self, obj_factor: f64, lambda: &[f64], convexify: bool, out: &mut [f64]) {
        let mut k = 0;
        for j in 0..self.points() {
            let rw = self.rate_weights(j, lambda);
            let wo = obj_factor * self.spec.objective_weight * self.qw[j];
            let pc = &self.cache[j];
            let mut h = DMatrix::<f64>::zeros(N, N);
            for a in 0..N {
                for b in 0..=a {
                    let mut v = wo * pc.cost.h[a][b];
                    for (i, r) in pc.rates.iter().enumerate() {
                        v += rw[i] * r.h[a][b];
                    }
                    if let Some(row0) = self.path_row(j, 0) {
                        for (q, p) in pc.path.iter().enumerate() {
                            v += lambda[row0 + q] * p.h[a][b];
                        }
                    }
                    h[(a, b)] = v;
                    h[(b, a)] = v;
                }
            }
            if convexify {
                let eig = SymmetricEigen::new(h);
                let vals = eig.eigenvalues.map(|e| e.max(0.0));
                h = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
            }
            for a in 0..N {
                for b in 0..=a {
                    out[k] = h[(a, b)];
                    k += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oloc::ipm::{solve, IpmOptions, SolveStatus};

    /// x' = v, v' = u with running cost u^2.
    struct DoubleIntegrator;

    impl PointModel<3> for DoubleIntegrator {
        fn nx(&self) -> usize {
            2
        }
        fn n_path(&self) -> usize {
            0
        }
        fn eval<S: Scalar>(&self, _: usize, _: f64, z: &[S; 3], rates: &mut [S], _: &mut [S]) -> S {
            rates[0] = z[1];
            rates[1] = z[2];
            z[2] * z[2]
        }
    }

    fn di_spec(segments: usize) -> CollocationSpec<3> {
        let np = 2 * segments + 1;
        CollocationSpec {
            t0: 0.0,
            t1: 1.0,
            segments,
            offset: [0.0; 3],
            scale: [1.0; 3],
            lower: [-10.0, -10.0, -100.0],
            upper: [10.0, 10.0, 100.0],
            initial_state: Some(vec![0.0, 0.0]),
            final_state: vec![Some(1.0), Some(0.0)],
            path_upper: vec![],
            path_from: 1,
            objective_weight: 1.0,
            guess: (0..np).map(|j| [j as f64 / (np - 1) as f64, 0.0, 0.0]).collect(),
        }
    }

    #[test]
    fn double_integrator_matches_closed_form() {
        let model = DoubleIntegrator;
        let mut nlp = Collocation::new(&model, di_spec(10)).unwrap();
        assert_eq!(Nlp::n(&nlp), 21 * 3);
        let r = solve(&mut nlp, &IpmOptions { tol: 1e-10, constr_viol_tol: 1e-10, ..Default::default() }).unwrap();
        assert_eq!(r.status, SolveStatus::Solved, "{}", r.log_text());
        assert!((r.objective - 12.0).abs() < 1e-6, "J = {}", r.objective);
        let z = nlp.unscale(&r.x);
        for (t, p) in nlp.times().iter().zip(&z) {
            assert!((p[2] - (6.0 - 12.0 * t)).abs() < 1e-6);
            assert!((p[0] - (3.0 * t * t - 2.0 * t * t * t)).abs() < 1e-6);
        }
    }

    /// x' = -x with cost x^2.
    struct Decay;

    impl PointModel<2> for Decay {
        fn nx(&self) -> usize {
            1
        }
        fn n_path(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, _: usize, _: f64, z: &[S; 2], rates: &mut [S], path: &mut [S]) -> S {
            rates[0] = -z[0] + z[1] * 0.0;
            path[0] = z[0] * z[1];
            z[0] * z[0]
        }
    }

    #[test]
    fn defects_vanish_at_fifth_order_on_exact_trajectory() {
        let model = Decay;
        let mk = |segments: usize| {
            let np = 2 * segments + 1;
            let spec = CollocationSpec {
                t0: 0.0,
                t1: 2.0,
                segments,
                offset: [0.0; 2],
                scale: [1.0; 2],
                lower: [-10.0; 2],
                upper: [10.0; 2],
                initial_state: None,
                final_state: vec![None],
                path_upper: vec![1.0],
                path_from: 1,
                objective_weight: 1.0,
                guess: vec![[0.0; 2]; np],
            };
            let nlp = Collocation::new(&model, spec).unwrap();
            let x: Vec<f64> = nlp.times().iter().flat_map(|t| [(-t).exp(), 0.3]).collect();
            nlp.defects(&x).iter().fold(0.0f64, |a, b| a.max(b.abs()))
        };
        let (e1, e2) = (mk(4), mk(8));
        assert!(e1 < 1e-3);
        let order = (e1 / e2).log2();
        assert!(order > 3.8, "observed order {order}");
    }

    #[test]
    fn jacobian_and_gradient_match_finite_differences() {
        let model = Decay;
        let spec = CollocationSpec {
            t0: 0.0,
            t1: 1.0,
            segments: 3,
            offset: [0.5, -0.2],
            scale: [2.0, 0.5],
            lower: [-10.0; 2],
            upper: [10.0; 2],
            initial_state: Some(vec![1.0]),
            final_state: vec![Some(0.2)],
            path_upper: vec![1.0],
            path_from: 1,
            objective_weight: -0.7,
            guess: vec![[0.0; 2]; 7],
        };
        let mut nlp = Collocation::new(&model, spec).unwrap();
        let x: Vec<f64> = (0..Nlp::n(&nlp)).map(|i| (i as f64 * 0.37).sin()).collect();
        let ev = nlp.eval_derivatives(&x).unwrap();
        let structure = nlp.jac_structure();
        let n = Nlp::n(&nlp);
        let mut dense = vec![vec![0.0; n]; Nlp::m(&nlp)];
        for (k, &(r, c)) in structure.iter().enumerate() {
            dense[r][c] += ev.jac[k];
        }
        for v in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[v] += 1e-6;
            xm[v] -= 1e-6;
            let (fp, cp) = nlp.eval_values(&xp);
            let (fm, cm) = nlp.eval_values(&xm);
            assert!(((fp - fm) / 2e-6 - ev.grad[v]).abs() < 1e-6);
            for r in 0..cp.len() {
                let fd = (cp[r] - cm[r]) / 2e-6;
                assert!((fd - dense[r][v]).abs() < 1e-6, "row {r} col {v}");
                if fd.abs() > 1e-9 {
                    assert!(structure.contains(&(r, v)), "missing ({r}, {v})");
                }
            }
        }
    }
}
