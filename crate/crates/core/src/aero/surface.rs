//! Tabulated Cp/Ct surfaces over (tip speed ratio, pitch) with C1 bicubic
//! Hermite interpolation.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bem::bem_solve;
use super::blade::{blade_geometry, BladeDesign, BladeGeometry};
use super::polar::Polar;
use crate::ad::Scalar;
use crate::error::{Error, Result};

/// Strict upper bound on stored power coefficients.
pub const BETZ: f64 = 16.0 / 27.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub pitch_min: f64,
    pub pitch_max: f64,
    pub pitch_step: f64,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        Self { lambda_min: 1.0, lambda_max: 15.0, lambda_step: 0.25, pitch_min: 0.0, pitch_max: 40.0, pitch_step: 1.0 }
    }
}

fn axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || hi < lo {
        return Err(Error::Argument(format!("bad grid axis {lo}..{hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + i as f64 * step).collect())
}

impl SurfaceGrid {
    pub fn axes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((axis(self.lambda_min, self.lambda_max, self.lambda_step)?, axis(self.pitch_min, self.pitch_max, self.pitch_step)?))
    }
}

#[derive(Debug)]
pub struct CoefficientSurface {
    pub lambda: Vec<f64>,
    /// Pitch [deg].
    pub pitch: Vec<f64>,
    /// Row-major, `cp[i * pitch.len() + j]` at (lambda[i], pitch[j]).
    pub cp: Vec<f64>,
    pub ct: Vec<f64>,
    /// Table entries clamped into [0, 16/27) or [0, inf) at build time.
    pub clamped: usize,
    /// BEM elements that did not converge while building.
    pub unconverged: usize,
    // per-node derivative tables: d/dlambda, d/dpitch, cross, for cp then ct
    deriv: [Vec<f64>; 6],
    hull_clamps: AtomicU64,
}

impl Clone for CoefficientSurface {
    fn clone(&self) -> Self {
        Self {
            lambda: self.lambda.clone(),
            pitch: self.pitch.clone(),
            cp: self.cp.clone(),
            ct: self.ct.clone(),
            clamped: self.clamped,
            unconverged: self.unconverged,
            deriv: self.deriv.clone(),
            hull_clamps: AtomicU64::new(self.hull_clamps.load(Ordering::Relaxed)),
        }
    }
}

/// Three-point finite-difference slope at node `i` of a (possibly nonuniform) axis.
fn node_slope(x: &[f64], y: impl Fn(usize) -> f64, i: usize) -> f64 {
    let n = x.len();
    if n == 1 {
        0.0
    } else if i == 0 {
        (y(1) - y(0)) / (x[1] - x[0])
    } else if i == n - 1 {
        (y(n - 1) - y(n - 2)) / (x[n - 1] - x[n - 2])
    } else {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let (d0, d1) = ((y(i) - y(i - 1)) / h0, (y(i + 1) - y(i)) / h1);
        (h1 * d0 + h0 * d1) / (h0 + h1)
    }
}

/// Cell index, cell width and local coordinate along an axis; flags clamping.
fn locate(x: &[f64], q: f64) -> (usize, f64, f64, bool) {
    let n = x.len();
    if n == 1 {
        return (0, 1.0, 0.0, q != x[0]);
    }
    let out = q < x[0] || q > x[n - 1];
    let qc = q.clamp(x[0], x[n - 1]);
    let i = (x.partition_point(|&v| v <= qc).max(1) - 1).min(n - 2);
    let h = x[i + 1] - x[i];
    (i, h, (qc - x[i]) / h, out)
}

/// Hermite basis [h00, h10, h01, h11] and its first two t-derivatives.
fn hermite(t: f64) -> [[f64; 4]; 3] {
    let (t2, t3) = (t * t, t * t * t);
    [
        [2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2],
        [6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t],
        [12.0 * t - 6.0, 6.0 * t - 4.0, -12.0 * t + 6.0, 6.0 * t - 2.0],
    ]
}

/// Value, gradient and Hessian of one interpolated table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expansion {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl CoefficientSurface {
    pub fn from_tables(lambda: Vec<f64>, pitch: Vec<f64>, cp: Vec<f64>, ct: Vec<f64>) -> Result<Self> {
        let strictly = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
        if !strictly(&lambda) || !strictly(&pitch) || cp.len() != lambda.len() * pitch.len() || ct.len() != cp.len() {
            return Err(Error::Argument("coefficient surface grids must be non-empty, strictly increasing and match the tables".into()));
        }
        let mut s = Self {
            lambda,
            pitch,
            cp,
            ct,
            clamped: 0,
            unconverged: 0,
            deriv: Default::default(),
            hull_clamps: AtomicU64::new(0),
        };
        s.clamped = s.clamp_tables();
        s.build_derivatives();
        Ok(s)
    }

    fn clamp_tables(&mut self) -> usize {
        let mut n = 0;
        let cp_max = BETZ * (1.0 - 1e-9);
        for v in &mut self.cp {
            let c = v.clamp(0.0, cp_max);
            if c != *v {
                n += 1;
                *v = c;
            }
        }
        for v in &mut self.ct {
            if *v < 0.0 {
                n += 1;
                *v = 0.0;
            }
        }
        n
    }

    fn build_derivatives(&mut self) {
        let (nl, np) = (self.lambda.len(), self.pitch.len());
        for (k, table) in [&self.cp, &self.ct].into_iter().enumerate() {
            let mut dl = vec![0.0; nl * np];
            let mut dp = vec![0.0; nl * np];
            let mut dlp = vec![0.0; nl * np];
            for i in 0..nl {
                for j in 0..np {
                    dl[i * np + j] = node_slope(&self.lambda, |a| table[a * np + j], i);
                    dp[i * np + j] = node_slope(&self.pitch, |b| table[i * np + b], j);
                }
            }
            for i in 0..nl {
                for j in 0..np {
                    dlp[i * np + j] = node_slope(&self.pitch, |b| dl[i * np + b], j);
                }
            }
            self.deriv[3 * k] = dl;
            self.deriv[3 * k + 1] = dp;
            self.deriv[3 * k + 2] = dlp;
        }
    }

    /// Number of out-of-hull queries that were clamped so far.
    pub fn hull_clamps(&self) -> u64 {
        self.hull_clamps.load(Ordering::Relaxed)
    }

    /// Second-order expansion of Cp and Ct at (lambda, pitch [deg]).
    pub fn expand(&self, lambda: f64, pitch: f64) -> [Expansion; 2] {
        let np = self.pitch.len();
        let (i, hl, t, out_l) = locate(&self.lambda, lambda);
        let (j, hp, u, out_p) = locate(&self.pitch, pitch);
        if out_l || out_p {
            self.hull_clamps.fetch_add(1, Ordering::Relaxed);
        }
        let single_l = self.lambda.len() == 1;
        let single_p = np == 1;
        let bl = hermite(t);
        let bp = hermite(u);
        // corner a along lambda uses basis index 0/2 for values and 1/3 for slopes
        let corner = |a: usize, b: usize| (if single_l { i } else { i + a }) * np + if single_p { j } else { j + b };
        let mut res = [Expansion { value: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2] }; 2];
        let sl = [1.0, 1.0 / hl, 1.0 / (hl * hl)];
        let sp = [1.0, 1.0 / hp, 1.0 / (hp * hp)];
        for (k, table) in [&self.cp, &self.ct].into_iter().enumerate() {
            let (dl, dp, dlp) = (&self.deriv[3 * k], &self.deriv[3 * k + 1], &self.deriv[3 * k + 2]);
            // orders (p, q) of differentiation along lambda and pitch
            let mut acc = [[0.0; 3]; 3];
            for a in 0..2 {
                if single_l && a == 1 {
                    continue;
                }
                for b in 0..2 {
                    if single_p && b == 1 {
                        continue;
                    }
                    let c = corner(a, b);
                    for p in 0..3 {
                        for q in 0..3 {
                            if p + q > 2 {
                                continue;
                            }
                            let (wl0, wl1) = if single_l { (if p == 0 { 1.0 } else { 0.0 }, 0.0) } else { (bl[p][2 * a], bl[p][2 * a + 1] * hl) };
                            let (wp0, wp1) = if single_p { (if q == 0 { 1.0 } else { 0.0 }, 0.0) } else { (bp[q][2 * b], bp[q][2 * b + 1] * hp) };
                            acc[p][q] += wl0 * wp0 * table[c] + wl1 * wp0 * dl[c] + wl0 * wp1 * dp[c] + wl1 * wp1 * dlp[c];
                        }
                    }
                }
            }
            let g = |p: usize, q: usize| acc[p][q] * sl[p] * sp[q];
            let (zl, zp) = (if out_l { 0.0 } else { 1.0 }, if out_p { 0.0 } else { 1.0 });
            res[k] = Expansion {
                value: acc[0][0],
                grad: [g(1, 0) * zl, g(0, 1) * zp],
                hess: [[g(2, 0) * zl, g(1, 1) * zl * zp], [g(1, 1) * zl * zp, g(0, 2) * zp]],
            };
        }
        res
    }

    /// (Cp, Ct) at (lambda, pitch [deg]); out-of-hull queries are clamped.
    pub fn eval(&self, lambda: f64, pitch: f64) -> (f64, f64) {
        let [cp, ct] = self.expand(lambda, pitch);
        (cp.value, ct.value)
    }

    /// (Cp, Ct) for any scalar type, carrying derivatives through the interpolant.
    pub fn eval_scalar<S: Scalar>(&self, lambda: S, pitch: S) -> [S; 2] {
        let e = self.expand(lambda.re(), pitch.re());
        let inputs = [lambda, pitch];
        [S::chain(&inputs, e[0].value, &e[0].grad, &e[0].hess), S::chain(&inputs, e[1].value, &e[1].grad, &e[1].hess)]
    }

    /// Tip speed ratio maximizing the tabulated Cp at a pitch value (grid search
    /// refined by golden section on the interpolant).
    pub fn cp_max_ridge(&self, pitch: f64) -> (f64, f64) {
        let (lo, hi) = (self.lambda[0], self.lambda[self.lambda.len() - 1]);
        let mut best = (lo, f64::MIN);
        for k in 0..=400 {
            let l = lo + (hi - lo) * k as f64 / 400.0;
            let cp = self.eval(l, pitch).0;
            if cp > best.1 {
                best = (l, cp);
            }
        }
        let step = (hi - lo) / 400.0;
        let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if self.eval(c, pitch).0 > self.eval(d, pitch).0 {
                b = d;
            } else {
                a = c;
            }
        }
        let l = 0.5 * (a + b);
        (l, self.eval(l, pitch).0)
    }

    pub fn max_cp(&self) -> f64 {
        self.cp.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn to_text(&self) -> String {
        let row = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        format!(
            "fowt-cp-surface 1\nunconverged {}\nlambda {}\npitch {}\ncp {}\nct {}\n",
            self.unconverged,
            row(&self.lambda),
            row(&self.pitch),
            row(&self.cp),
            row(&self.ct)
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("fowt-cp-surface 1") {
            return Err(Error::Parse("not a coefficient surface file".into()));
        }
        let mut field = |name: &str| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing {name}")))?;
            let rest = line.strip_prefix(name).ok_or_else(|| Error::Parse(format!("expected {name}")))?;
            rest.split_whitespace().map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{name}: {e}")))).collect()
        };
        let unconverged = field("unconverged")?.first().copied().unwrap_or(0.0) as usize;
        let (l, p, cp, ct) = (field("lambda")?, field("pitch")?, field("cp")?, field("ct")?);
        let mut s = Self::from_tables(l, p, cp, ct)?;
        s.unconverged = unconverged;
        Ok(s)
    }
}

/// Tabulates BEM over the grid (parallel over grid points).
pub fn build_coefficient_surface(geom: &BladeGeometry, polars: &[Polar], grid: &SurfaceGrid) -> Result<CoefficientSurface> {
    let (lambda, pitch) = grid.axes()?;
    if lambda[0] <= 0.0 {
        return Err(Error::Argument("tip speed ratio grid must be positive".into()));
    }
    let np = pitch.len();
    let pts: Vec<_> = (0..lambda.len() * np).into_par_iter().map(|k| bem_solve(geom, polars, lambda[k / np], pitch[k % np])).collect();
    let unconverged = pts.iter().map(|r| r.unconverged).sum();
    let mut s = CoefficientSurface::from_tables(lambda, pitch, pts.iter().map(|r| r.cp).collect(), pts.iter().map(|r| r.ct).collect())?;
    s.unconverged = unconverged;
    Ok(s)
}

/// Cache key of a blade design and grid (hex SHA-256).
pub fn surface_key(design: &BladeDesign, grid: &SurfaceGrid) -> String {
    let mut h = Sha256::new();
    h.update(design.cache_key().as_bytes());
    for v in [grid.lambda_min, grid.lambda_max, grid.lambda_step, grid.pitch_min, grid.pitch_max, grid.pitch_step] {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the surface for a blade design, reusing `cache_dir/<key>.cps` when present.
pub fn design_surface(design: &BladeDesign, polars: &[Polar], grid: &SurfaceGrid, cache_dir: Option<&Path>) -> Result<CoefficientSurface> {
    design.validate()?;
    let path = cache_dir.map(|d| d.join(format!("{}.cps", surface_key(design, grid))));
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(s) = CoefficientSurface::from_text(&text) {
                return Ok(s);
            }
        }
    }
    let s = build_coefficient_surface(&blade_geometry(design), polars, grid)?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, s.to_text())?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::super::blade::reference_geometry;
    use super::super::polar::nrel5mw_polars;
    use super::*;

    fn analytic(f: impl Fn(f64, f64) -> f64) -> CoefficientSurface {
        let l: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
        let p: Vec<f64> = (0..7).map(|j| -6.0 + 2.0 * j as f64).collect();
        let mut cp = Vec::new();
        for &a in &l {
            for &b in &p {
                cp.push(f(a, b));
            }
        }
        CoefficientSurface::from_tables(l, p, cp.clone(), cp).unwrap()
    }

    #[test]
    fn grid_points_are_exact() {
        let s = analytic(|a, b| 0.01 * a + 0.002 * b * b + 0.1);
        for (i, &l) in s.lambda.iter().enumerate() {
            for (j, &p) in s.pitch.iter().enumerate() {
                assert_eq!(s.eval(l, p).0, s.cp[i * s.pitch.len() + j]);
            }
        }
    }

    #[test]
    fn bilinear_table_is_reproduced() {
        let f = |a: f64, b: f64| 0.1 + 0.01 * a + 0.003 * b + 0.0005 * a * b;
        let s = analytic(f);
        for (l, p) in [(2.5, -3.0), (5.3, 1.1), (8.7, 5.9)] {
            assert!((s.eval(l, p).0 - f(l, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_table_gives_symmetric_interpolant() {
        let s = analytic(|a, b| 0.2 + 0.01 * (a - 4.0).powi(2) * 0.1 + 0.001 * b * b);
        for (l, p) in [(2.3, 1.7), (6.1, 4.4), (3.3, 0.5)] {
            assert!((s.eval(l, p).0 - s.eval(l, -p).0).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = analytic(|a, b| 0.2 + 0.1 * (0.3 * a).sin() * (0.2 * b).cos());
        let h = 1e-6;
        for (l, p) in [(2.37, -1.3), (6.61, 3.3), (4.1, 0.2)] {
            let e = s.expand(l, p)[0];
            let gl = (s.eval(l + h, p).0 - s.eval(l - h, p).0) / (2.0 * h);
            let gp = (s.eval(l, p + h).0 - s.eval(l, p - h).0) / (2.0 * h);
            assert!((e.grad[0] - gl).abs() <= 1e-4 * gl.abs().max(1e-3));
            assert!((e.grad[1] - gp).abs() <= 1e-4 * gp.abs().max(1e-3));
        }
    }

    #[test]
    fn out_of_hull_is_clamped_and_counted() {
        let s = analytic(|a, b| 0.1 + 0.01 * a + 0.001 * b);
        assert_eq!(s.hull_clamps(), 0);
        assert_eq!(s.eval(100.0, 0.0), s.eval(9.0, 0.0));
        assert_eq!(s.hull_clamps(), 1);
    }

    #[test]
    fn single_point_grid_equals_bem() {
        let g = reference_geometry();
        let p = nrel5mw_polars();
        let grid = SurfaceGrid { lambda_min: 7.5, lambda_max: 7.5, lambda_step: 1.0, pitch_min: 2.0, pitch_max: 2.0, pitch_step: 1.0 };
        let s = build_coefficient_surface(&g, &p, &grid).unwrap();
        let r = bem_solve(&g, &p, 7.5, 2.0);
        assert_eq!(s.eval(7.5, 2.0), (r.cp, r.ct));
        assert_eq!(s.eval(9.0, 5.0), (r.cp, r.ct));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let s = analytic(|a, b| 0.1 + 0.013 * a + 0.0017 * b);
        let t = CoefficientSurface::from_text(&s.to_text()).unwrap();
        assert_eq!(s.cp, t.cp);
        assert_eq!(s.ct, t.ct);
        assert_eq!(s.eval(3.3, 1.1), t.eval(3.3, 1.1));
    }

    #[test]
    fn betz_clamp() {
        let s = CoefficientSurface::from_tables(vec![1.0, 2.0], vec![0.0], vec![0.7, -0.1], vec![-1.0, 1.0]).unwrap();
        assert_eq!(s.clamped, 3);
        assert!(s.cp.iter().all(|&c| (0.0..BETZ).contains(&c)));
    }
}
