//! (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaOptions {
    pub population: usize,
    pub generations: usize,
    /// Initial step size in normalised coordinates.
    pub sigma0: f64,
    pub seed: u64,
    /// Stop once an objective at or below this value is seen.
    pub f_target: Option<f64>,
    /// Stop when every coordinate's sampling spread falls below this (normalised).
    pub tol_x: f64,
    pub resample: usize,
    /// Weight of the squared normalised distance to the box for projected samples.
    pub penalty: f64,
}

impl Default for CmaOptions {
    fn default() -> Self {
        Self { population: 8, generations: 15, sigma0: 0.2, seed: 1, f_target: None, tol_x: 1e-12, resample: 10, penalty: 1.0 }
    }
}

/// Search box and the affine map to normalised coordinates `y = (x - offset) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl SearchSpace {
    /// Unbounded space with unit scaling.
    pub fn unbounded(n: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n], offset: vec![0.0; n], scale: vec![1.0; n] }
    }

    /// Box normalised to the unit cube.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Argument("search box needs finite lower < upper in every coordinate".into()));
        }
        let scale = lower.iter().zip(&upper).map(|(l, u)| u - l).collect();
        Ok(Self { offset: lower.clone(), lower, upper, scale })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| v.clamp(self.lower[i], self.upper[i])).collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| (v - self.offset[i]) / self.scale[i]).collect()
    }

    pub fn from_unit(&self, y: &[f64]) -> Vec<f64> {
        y.iter().enumerate().map(|(i, v)| self.offset[i] + self.scale[i] * v).collect()
    }
}

/// Objective value with a flag for evaluations that failed and were replaced by a penalty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub penalized: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry {
    pub generation: usize,
    pub index: usize,
    /// Evaluated (in-box) design.
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective seen by the strategy (includes the box penalty).
    pub fitness: f64,
    pub penalized: bool,
    pub projected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CmaStatus {
    BudgetExhausted,
    TargetReached,
    StepSizeConverged,
}

impl CmaStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CmaStatus::BudgetExhausted => "budget-exhausted",
            CmaStatus::TargetReached => "target-reached",
            CmaStatus::StepSizeConverged => "step-size-converged",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CmaResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub best_penalized: bool,
    pub status: CmaStatus,
    pub generations: usize,
    pub history: Vec<HistoryEntry>,
    /// Best objective after each generation (entry 0 is the initial mean).
    pub best_trace: Vec<f64>,
    pub final_sigma: f64,
}

/// Strategy state in normalised coordinates.
#[derive(Clone, Debug)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub population: usize,
    pub generation: usize,
    pub seed: u64,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c1: f64,
    c_mu: f64,
    chi_n: f64,
    basis: DMatrix<f64>,
    axes: DVector<f64>,
    rng: ChaCha8Rng,
}

impl CmaState {
    pub fn new(mean: Vec<f64>, sigma0: f64, population: usize, seed: u64) -> Result<Self> {
        let n = mean.len();
        if n == 0 || population < 4 || !(sigma0 > 0.0) {
            return Err(Error::Argument(format!("CMA-ES needs n > 0, population >= 4 and sigma0 > 0 (n={n}, population={population}, sigma0={sigma0})")));
        }
        let nf = n as f64;
        let mu = population / 2;
        let raw: Vec<f64> = (0..mu).map(|i| ((population as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Ok(Self {
            mean: DVector::from_vec(mean),
            sigma: sigma0,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            population,
            generation: 0,
            seed,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n,
            basis: DMatrix::identity(n, n),
            axes: DVector::from_element(n, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// One standard-normal draw mapped through the current distribution: (z, y = B D z, x = m + sigma y).
    fn draw(&mut self) -> (DVector<f64>, DVector<f64>) {
        let n = self.dim();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut self.rng));
        let y = &self.basis * z.component_mul(&self.axes);
        let x = &self.mean + self.sigma * &y;
        (y, x)
    }

    /// Samples a candidate whose image under `accept` holds, retrying up to `tries` times.
    /// Returns the step `y` and the point, and whether the last draw was accepted.
    pub fn sample(&mut self, tries: usize, accept: impl Fn(&[f64]) -> bool) -> (DVector<f64>, DVector<f64>, bool) {
        let mut last = self.draw();
        for _ in 0..tries {
            if accept(last.1.as_slice()) {
                return (last.0, last.1, true);
            }
            last = self.draw();
        }
        let ok = accept(last.1.as_slice());
        (last.0, last.1, ok)
    }

    /// Updates mean, paths, covariance and step size from steps `ys` ranked by `fitness`.
    pub fn update(&mut self, ys: &[DVector<f64>], fitness: &[f64]) -> Result<()> {
        let n = self.dim();
        let nf = n as f64;
        let mut order: Vec<usize> = (0..ys.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
        let mu = self.weights.len();
        let mut y_w = DVector::zeros(n);
        for (w, &k) in self.weights.iter().zip(&order[..mu]) {
            y_w += *w * &ys[k];
        }
        self.mean += self.sigma * &y_w;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt = &self.basis * (self.basis.transpose() * &y_w).component_div(&self.axes);
        self.p_sigma = (1.0 - self.c_sigma) * &self.p_sigma + (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt() * inv_sqrt;
        self.generation += 1;
        let ps_norm = self.p_sigma.norm();
        let denom = (1.0 - (1.0 - self.c_sigma).powi(2 * self.generation as i32)).sqrt();
        let h_sigma = ps_norm / denom / self.chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hs = if h_sigma { 1.0 } else { 0.0 };
        self.p_c = (1.0 - self.c_c) * &self.p_c + hs * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, &k) in self.weights.iter().zip(&order[..mu]) {
            rank_mu += *w * &ys[k] * ys[k].transpose();
        }
        let delta_h = (1.0 - hs) * self.c_c * (2.0 - self.c_c);
        let rank_one = &self.p_c * self.p_c.transpose();
        self.cov = (1.0 - self.c1 - self.c_mu + self.c1 * delta_h) * &self.cov + self.c1 * rank_one + self.c_mu * rank_mu;
        self.cov = 0.5 * (&self.cov + self.cov.transpose());

        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.decompose()
    }

    fn decompose(&mut self) -> Result<()> {
        if self.cov.clone().cholesky().is_none() {
            return Err(Error::Numerical("CMA-ES covariance lost positive definiteness".into()));
        }
        let eig = SymmetricEigen::new(self.cov.clone());
        if eig.eigenvalues.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Numerical("CMA-ES covariance has a non-positive eigenvalue".into()));
        }
        self.axes = eig.eigenvalues.map(f64::sqrt);
        self.basis = eig.eigenvectors;
        Ok(())
    }

    /// Largest coordinate-wise sampling spread.
    pub fn spread(&self) -> f64 {
        self.sigma * self.cov.diagonal().iter().fold(0.0f64, |a, v| a.max(v.sqrt()))
    }
}

/// Minimises `objective` from `x0`. The objective receives one generation's designs at a
/// time (so it may evaluate them concurrently) and must return one evaluation per design.
pub fn cmaes_run<F>(mut objective: F, x0: &[f64], space: &SearchSpace, opts: &CmaOptions) -> Result<CmaResult>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<Evaluation>>,
{
    let n = space.dim();
    if x0.len() != n {
        return Err(Error::Argument(format!("x0 has {} entries, search space {n}", x0.len())));
    }
    if !space.contains(x0) {
        return Err(Error::Argument("x0 lies outside the search box".into()));
    }
    let mut state = CmaState::new(space.to_unit(x0), opts.sigma0, opts.population, opts.seed)?;
    let mut history = Vec::new();

    let first = objective(&[x0.to_vec()])?;
    let e0 = *first.first().ok_or_else(|| Error::Numerical("objective returned no evaluation".into()))?;
    history.push(HistoryEntry { generation: 0, index: 0, x: x0.to_vec(), f: e0.f, fitness: e0.f, penalized: e0.penalized, projected: false });
    let mut best = (x0.to_vec(), e0.f, e0.penalized);
    let mut best_trace = vec![e0.f];
    let mut status = CmaStatus::BudgetExhausted;
    if opts.f_target.is_some_and(|t| e0.f <= t && !e0.penalized) {
        status = CmaStatus::TargetReached;
    }

    let mut generations = 0;
    while status == CmaStatus::BudgetExhausted && generations < opts.generations {
        let mut ys = Vec::with_capacity(opts.population);
        let mut designs = Vec::with_capacity(opts.population);
        let mut excess = Vec::with_capacity(opts.population);
        for _ in 0..opts.population {
            let (y, u, inside) = state.sample(opts.resample, |u| space.contains(&space.from_unit(u)));
            let x = space.from_unit(u.as_slice());
            let xp = if inside { x.clone() } else { space.project(&x) };
            let d2: f64 = space.to_unit(&x).iter().zip(space.to_unit(&xp)).map(|(a, b)| (a - b).powi(2)).sum();
            ys.push(y);
            designs.push(xp);
            excess.push((!inside, d2));
        }
        let evals = objective(&designs)?;
        if evals.len() != designs.len() {
            return Err(Error::Numerical(format!("objective returned {} evaluations for {} designs", evals.len(), designs.len())));
        }
        generations += 1;
        let mut fitness = Vec::with_capacity(designs.len());
        for (k, (x, e)) in designs.into_iter().zip(&evals).enumerate() {
            let (projected, d2) = excess[k];
            let fit = if projected { e.f + opts.penalty * (1.0 + e.f.abs()) * d2 } else { e.f };
            fitness.push(fit);
            let better = match (best.2, e.penalized) {
                (true, false) => true,
                (false, true) => false,
                _ => e.f < best.1,
            };
            if better {
                best = (x.clone(), e.f, e.penalized);
            }
            history.push(HistoryEntry { generation: generations, index: k, x, f: e.f, fitness: fit, penalized: e.penalized, projected });
        }
        best_trace.push(best.1);
        state.update(&ys, &fitness)?;
        if opts.f_target.is_some_and(|t| best.1 <= t && !best.2) {
            status = CmaStatus::TargetReached;
        } else if state.spread() < opts.tol_x {
            status = CmaStatus::StepSizeConverged;
        }
    }
    Ok(CmaResult { best_x: best.0, best_f: best.1, best_penalized: best.2, status, generations, history, best_trace, final_sigma: state.sigma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain<F: Fn(&[f64]) -> f64>(f: F) -> impl FnMut(&[Vec<f64>]) -> Result<Vec<Evaluation>> {
        move |xs| Ok(xs.iter().map(|x| Evaluation { f: f(x), penalized: false }).collect())
    }

    #[test]
    fn sphere_converges_to_origin() {
        let opts = CmaOptions { population: 10, generations: 400, sigma0: 0.5, seed: 3, f_target: Some(1e-14), ..Default::default() };
        let r = cmaes_run(plain(|x| x.iter().map(|v| v * v).sum()), &[1.0; 5], &SearchSpace::unbounded(5), &opts).unwrap();
        let norm = r.best_x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "{norm} after {} generations", r.generations);
    }

    #[test]
    fn rosenbrock_4d_reaches_the_valley_floor() {
        let rosen = |x: &[f64]| (0..x.len() - 1).map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2)).sum::<f64>();
        // budget: 2000 generations of 8
        let opts = CmaOptions { population: 8, generations: 2000, sigma0: 0.5, seed: 5, f_target: Some(1e-10), ..Default::default() };
        let r = cmaes_run(plain(rosen), &[0.0; 4], &SearchSpace::unbounded(4), &opts).unwrap();
        assert!(r.best_f < 1e-8, "{} ({:?})", r.best_f, r.status);
        for v in &r.best_x {
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn box_is_respected_and_boundary_optimum_found() {
        let space = SearchSpace::boxed(vec![0.5, -1.0], vec![2.0, 1.0]).unwrap();
        let opts = CmaOptions { population: 8, generations: 200, sigma0: 0.3, seed: 9, ..Default::default() };
        let r = cmaes_run(plain(|x| x[0] * x[0] + x[1] * x[1]), &[1.5, 0.5], &space, &opts).unwrap();
        assert!(r.history.iter().all(|h| space.contains(&h.x)));
        assert!((r.best_x[0] - 0.5).abs() < 1e-4 && r.best_x[1].abs() < 1e-4, "{:?}", r.best_x);
    }

    #[test]
    fn zero_generations_returns_the_start() {
        let opts = CmaOptions { generations: 0, ..Default::default() };
        let r = cmaes_run(plain(|x| x[0]), &[0.3, 0.2], &SearchSpace::unbounded(2), &opts).unwrap();
        assert_eq!(r.best_x, vec![0.3, 0.2]);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn penalized_evaluations_lose_to_any_real_one() {
        let opts = CmaOptions { generations: 3, ..Default::default() };
        let f = |xs: &[Vec<f64>]| -> Result<Vec<Evaluation>> {
            Ok(xs.iter().map(|x| if x[0] > 0.0 { Evaluation { f: -1e9, penalized: true } } else { Evaluation { f: 5.0 + x[0] * x[0], penalized: false } }).collect())
        };
        let r = cmaes_run(f, &[0.1, 0.0], &SearchSpace::unbounded(2), &opts).unwrap();
        assert!(!r.best_penalized);
        assert!(r.best_x[0] <= 0.0);
    }
}
