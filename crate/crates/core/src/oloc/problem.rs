//! The per-bin open-loop optimal control problem of the floating turbine.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ipm::{self, IpmOptions, IterRecord, SolveStatus};
use super::transcription::{Collocation, CollocationSpec, PointModel};
use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::model::dynamics::{outputs, rates, EnvSample, NU, NX};
use crate::model::integrate::OdeOptions;
use crate::model::simulate::{simulate_forward, ControlSchedule, Environment, Trajectory};
use crate::model::{static_equilibrium, Plant};

/// Variables per collocation point: states then control rates.
pub const NZ: usize = NX + NU;

/// Inner-loop settings: horizon, mesh, bounds, path limits, penalties and solver options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OlocConfig {
    pub horizon: f64,
    pub segments: usize,
    /// Tower stress limit [MPa].
    pub sigma_max_mpa: f64,
    pub power_max: f64,
    pub omega_max: f64,
    pub platform_pitch_max_deg: f64,
    pub blade_pitch_max_deg: f64,
    pub torque_max: f64,
    pub pitch_rate_max: f64,
    pub torque_rate_max: f64,
    /// Weight on the squared generator torque rate [W s^2 / (N m)^2].
    pub torque_rate_weight: f64,
    /// Weight on the squared blade pitch rate [W s^2 / rad^2].
    pub pitch_rate_weight: f64,
    /// Surge excursion bound about the design position [m].
    pub surge_limit: f64,
    /// Heave excursion bound about the design elevation [m].
    pub heave_limit: f64,
    /// Relative margin kept from the limits by the trim initial state.
    pub trim_margin: f64,
    /// Relative violation above which a solution is reported infeasible.
    pub feasibility_tol: f64,
    pub solver: IpmOptions,
}

impl Default for OlocConfig {
    fn default() -> Self {
        Self {
            horizon: 100.0,
            segments: 50,
            sigma_max_mpa: 45.0,
            power_max: 5.0e6,
            omega_max: 1.51,
            platform_pitch_max_deg: 6.3,
            blade_pitch_max_deg: 40.0,
            torque_max: 4.18e6,
            pitch_rate_max: 0.57,
            torque_rate_max: 1.0e5,
            torque_rate_weight: 1e-7,
            pitch_rate_weight: 1e7,
            surge_limit: 25.0,
            heave_limit: 5.0,
            trim_margin: 0.005,
            feasibility_tol: 1e-5,
            solver: IpmOptions::default(),
        }
    }
}

impl OlocConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("horizon", self.horizon),
            ("sigma_max_mpa", self.sigma_max_mpa),
            ("power_max", self.power_max),
            ("omega_max", self.omega_max),
            ("platform_pitch_max_deg", self.platform_pitch_max_deg),
            ("blade_pitch_max_deg", self.blade_pitch_max_deg),
            ("torque_max", self.torque_max),
            ("pitch_rate_max", self.pitch_rate_max),
            ("torque_rate_max", self.torque_rate_max),
            ("surge_limit", self.surge_limit),
            ("heave_limit", self.heave_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("oloc.{name} must be positive, got {v}")));
            }
        }
        if self.segments == 0 {
            return Err(Error::Argument("oloc.segments must be at least 1".into()));
        }
        if !(self.torque_rate_weight >= 0.0 && self.pitch_rate_weight >= 0.0) {
            return Err(Error::Argument("penalty weights must be non-negative".into()));
        }
        if !(0.0..0.5).contains(&self.trim_margin) {
            return Err(Error::Argument("oloc.trim_margin must lie in [0, 0.5)".into()));
        }
        Ok(())
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max_mpa * 1e6
    }

    /// Same mesh density over a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Self {
        let per_second = self.segments as f64 / self.horizon;
        Self { horizon, segments: ((per_second * horizon).round() as usize).max(1), ..self.clone() }
    }

    /// Physical lower and upper bounds per collocation variable.
    pub fn bounds(&self, z_ref: f64) -> ([f64; NZ], [f64; NZ]) {
        let inf = f64::INFINITY;
        let th = self.platform_pitch_max_deg.to_radians();
        let lo = [-self.surge_limit, z_ref - self.heave_limit, -th, -inf, -inf, -inf, 0.0, 0.0, 0.0, -self.pitch_rate_max, -self.torque_rate_max];
        let hi = [self.surge_limit, z_ref + self.heave_limit, th, inf, inf, inf, self.omega_max, self.blade_pitch_max_deg.to_radians(), self.torque_max, self.pitch_rate_max, self.torque_rate_max];
        (lo, hi)
    }
}

/// One inner-loop problem: plant, environment bin and settings over `[0, horizon]`.
#[derive(Clone)]
pub struct OlocProblem<'a> {
    pub plant: &'a Plant,
    pub env: Environment,
    pub config: OlocConfig,
}

/// Steady operating point used as initial state and initial guess.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trim {
    pub wind: f64,
    pub state: [f64; NX],
    pub lambda: f64,
    pub pitch_deg: f64,
    pub power: f64,
    pub thrust: f64,
}

/// Best steady operating point at wind speed `u`: maximum power subject to the
/// speed, torque, power, stress and platform-pitch limits shrunk by the margin.
pub fn trim(plant: &Plant, u: f64, cfg: &OlocConfig) -> Result<Trim> {
    if !(u > 0.0) {
        return Err(Error::Argument(format!("trim needs a positive wind speed, got {u}")));
    }
    let keep = 1.0 - cfg.trim_margin;
    let r = plant.rotor.radius;
    let q = 0.5 * plant.rotor.rho_air * plant.rotor.swept_area();
    let (lam_axis, pitch_axis) = (&plant.surface.lambda, &plant.surface.pitch);
    let (lam_lo, lam_hi) = (lam_axis[0], *lam_axis.last().unwrap());
    let pitch_hi = pitch_axis.last().unwrap().min(cfg.blade_pitch_max_deg);
    let pitch_lo = pitch_axis[0].max(0.0);
    let n_lam = (((lam_hi - lam_lo) / 0.02).ceil() as usize).max(1);
    let n_pitch = (((pitch_hi - pitch_lo) / 0.1).ceil() as usize).max(1);
    let mut thrust_cap = keep * cfg.sigma_max() / plant.tower_props.stress_factor;
    let pitch_limit = keep * cfg.platform_pitch_max_deg.to_radians();
    for _ in 0..30 {
        let mut best: Option<(f64, f64, f64, f64)> = None; // (power, thrust, lambda, pitch)
        let mut candidates = Vec::new();
        for i in 0..=n_lam {
            let lam = lam_lo + (lam_hi - lam_lo) * i as f64 / n_lam as f64;
            let omega = lam * u / r;
            if omega > keep * cfg.omega_max {
                break;
            }
            for j in 0..=n_pitch {
                let pitch = pitch_lo + (pitch_hi - pitch_lo) * j as f64 / n_pitch as f64;
                let (cp, ct) = plant.surface.eval(lam, pitch);
                let p = q * cp * u.powi(3);
                let t = q * ct * u * u;
                if p > keep * cfg.power_max || t > thrust_cap || (omega > 0.0 && p / omega > keep * cfg.torque_max) {
                    continue;
                }
                candidates.push((p, t, lam, pitch));
                if best.map_or(true, |b| p > b.0) {
                    best = Some((p, t, lam, pitch));
                }
            }
        }
        let Some(top) = best else {
            return Err(Error::Argument(format!("no feasible steady operating point at {u} m/s")));
        };
        // among near-optimal points prefer the lowest thrust
        let chosen = candidates
            .iter()
            .filter(|c| c.0 >= top.0 * (1.0 - 1e-4))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)).then(a.3.total_cmp(&b.3)))
            .copied()
            .unwrap_or(top);
        let (p, t, lam, pitch) = chosen;
        let pose = static_equilibrium(plant, t)?;
        if pose.theta.abs() > pitch_limit {
            thrust_cap = t * 0.99 * pitch_limit / pose.theta.abs();
            continue;
        }
        let omega = lam * u / r;
        let tau = if omega > 0.0 { p / omega } else { 0.0 };
        let state = [pose.x, pose.z, pose.theta, 0.0, 0.0, 0.0, omega, pitch.to_radians(), tau];
        return Ok(Trim { wind: u, state, lambda: lam, pitch_deg: pitch, power: p, thrust: t });
    }
    Err(Error::Argument(format!("steady operating point at {u} m/s violates the platform pitch limit")))
}

/// Collocation model of the turbine with the environment sampled at the mesh points.
pub struct TurbineModel<'a> {
    pub plant: &'a Plant,
    pub env: Vec<EnvSample>,
    pub sigma_max: f64,
    pub power_max: f64,
    pub torque_rate_weight: f64,
    pub pitch_rate_weight: f64,
}

impl PointModel<NZ> for TurbineModel<'_> {
    fn nx(&self) -> usize {
        NX
    }

    fn n_path(&self) -> usize {
        2
    }

    fn eval<S: Scalar>(&self, point: usize, _t: f64, z: &[S; NZ], r: &mut [S], path: &mut [S]) -> S {
        let x: [S; NX] = std::array::from_fn(|i| z[i]);
        let u = [z[NX], z[NX + 1]];
        let env = &self.env[point];
        r.copy_from_slice(&rates(self.plant, &x, &u, env));
        let o = outputs(self.plant, &x, env.wind);
        path[0] = o.sigma / self.sigma_max;
        path[1] = o.p_u / self.power_max;
        o.p_a - u[1] * u[1] * self.torque_rate_weight - u[0] * u[0] * self.pitch_rate_weight
    }
}

/// Mean penalised aerodynamic power `P_out = (1/T) int (P_a - w_tau tau_dot^2 - w_theta theta_dot^2) dt`
/// by composite Simpson over the `2N+1` mesh points; returns `(J_in, P_out)` with `J_in = -T P_out`.
pub fn inner_objective(times: &[f64], p_a: &[f64], controls: &[[f64; NU]], torque_rate_weight: f64, pitch_rate_weight: f64) -> Result<(f64, f64)> {
    let np = times.len();
    if np < 3 || np % 2 == 0 || p_a.len() != np || controls.len() != np {
        return Err(Error::Argument("inner objective needs 2N+1 matching mesh samples".into()));
    }
    let integrand: Vec<f64> = (0..np).map(|j| p_a[j] - torque_rate_weight * controls[j][1].powi(2) - pitch_rate_weight * controls[j][0].powi(2)).collect();
    let mut acc = 0.0;
    for k in 0..(np - 1) / 2 {
        let (a, m, b) = (2 * k, 2 * k + 1, 2 * k + 2);
        acc += (times[b] - times[a]) / 6.0 * (integrand[a] + 4.0 * integrand[m] + integrand[b]);
    }
    let span = times[np - 1] - times[0];
    let p_out = acc / span;
    Ok((-span * p_out, p_out))
}

/// Largest violation of each limit, relative to the limit's magnitude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub omega: f64,
    pub platform_pitch: f64,
    pub blade_pitch: f64,
    pub torque: f64,
    pub pitch_rate: f64,
    pub torque_rate: f64,
    pub sigma: f64,
    pub power: f64,
}

impl FeasibilityReport {
    pub fn max_bound_violation(&self) -> f64 {
        [self.omega, self.platform_pitch, self.blade_pitch, self.torque, self.pitch_rate, self.torque_rate].into_iter().fold(0.0, f64::max)
    }

    pub fn max_path_violation(&self) -> f64 {
        self.sigma.max(self.power)
    }

    pub fn max_violation(&self) -> f64 {
        self.max_bound_violation().max(self.max_path_violation())
    }
}

fn excess(v: f64, lo: f64, hi: f64) -> f64 {
    let scale = [lo, hi].into_iter().filter(|b| b.is_finite()).fold(0.0, |a: f64, b| a.max(b.abs()));
    ((lo - v).max(v - hi)).max(0.0) / scale
}

/// Checks a trajectory against the bounds and path limits of `cfg`.
pub fn check_feasibility(traj: &Trajectory, cfg: &OlocConfig) -> FeasibilityReport {
    let mut r = FeasibilityReport::default();
    let th = cfg.platform_pitch_max_deg.to_radians();
    for (i, x) in traj.states.iter().enumerate() {
        r.omega = r.omega.max(excess(x[6], 0.0, cfg.omega_max));
        r.platform_pitch = r.platform_pitch.max(excess(x[2], -th, th));
        r.blade_pitch = r.blade_pitch.max(excess(x[7], 0.0, cfg.blade_pitch_max_deg.to_radians()));
        r.torque = r.torque.max(excess(x[8], 0.0, cfg.torque_max));
        let u = traj.controls[i];
        r.pitch_rate = r.pitch_rate.max(excess(u[0], -cfg.pitch_rate_max, cfg.pitch_rate_max));
        r.torque_rate = r.torque_rate.max(excess(u[1], -cfg.torque_rate_max, cfg.torque_rate_max));
        r.sigma = r.sigma.max(excess(traj.sigma[i], f64::NEG_INFINITY, cfg.sigma_max()));
        r.power = r.power.max(excess(traj.p_u[i], f64::NEG_INFINITY, cfg.power_max));
    }
    r
}

#[derive(Clone, Debug)]
pub struct OlocSolution {
    /// States, control rates and outputs at the `2N+1` mesh points.
    pub trajectory: Trajectory,
    pub p_a: Vec<f64>,
    pub lambda: Vec<f64>,
    pub j_in: f64,
    pub p_out: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub feasibility: FeasibilityReport,
    pub feasible: bool,
    /// Path-constraint multipliers per mesh point, `[sigma, P_u]` (zero at the fixed first point).
    pub multipliers: Vec<[f64; 2]>,
    pub trim: Trim,
    pub log: Vec<IterRecord>,
    pub solver_log: String,
}

impl OlocSolution {
    pub fn summary_csv(&self) -> String {
        let f = &self.feasibility;
        let mut s = String::from("J_in,P_out,status,iterations,feasible,max_bound_violation,max_path_violation,omega,platform_pitch,blade_pitch,torque,pitch_rate,torque_rate,sigma,power\n");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.j_in,
            self.p_out,
            self.status,
            self.iterations,
            self.feasible,
            f.max_bound_violation(),
            f.max_path_violation(),
            f.omega,
            f.platform_pitch,
            f.blade_pitch,
            f.torque,
            f.pitch_rate,
            f.torque_rate,
            f.sigma,
            f.power
        );
        s
    }

    pub fn control_schedule(&self) -> Result<ControlSchedule> {
        ControlSchedule::new(self.trajectory.times.clone(), self.trajectory.controls.clone())
    }
}

/// Scale and offset of each collocation variable.
fn scaling(z_ref: f64) -> ([f64; NZ], [f64; NZ]) {
    let offset = [0.0, z_ref, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let scale = [10.0, 1.0, 0.05, 1.0, 0.2, 0.02, 1.0, 0.2, 1.0e6, 0.05, 1.0e5];
    (offset, scale)
}

impl<'a> OlocProblem<'a> {
    pub fn new(plant: &'a Plant, env: Environment, config: OlocConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { plant, env, config })
    }

    pub fn mesh_times(&self) -> Vec<f64> {
        let np = 2 * self.config.segments + 1;
        (0..np).map(|j| self.config.horizon * j as f64 / (np - 1) as f64).collect()
    }

    /// Trim at the mean wind speed over the horizon.
    pub fn trim(&self) -> Result<Trim> {
        let times = self.mesh_times();
        let mean = times.iter().map(|&t| self.env.wind.speed(t)).sum::<f64>() / times.len() as f64;
        trim(self.plant, mean, &self.config)
    }

    pub fn model(&self) -> TurbineModel<'a> {
        let env = self.mesh_times().iter().map(|&t| self.env.sample(t)).collect();
        TurbineModel {
            plant: self.plant,
            env,
            sigma_max: self.config.sigma_max(),
            power_max: self.config.power_max,
            torque_rate_weight: self.config.torque_rate_weight,
            pitch_rate_weight: self.config.pitch_rate_weight,
        }
    }

    pub fn spec(&self, trim: &Trim) -> CollocationSpec<NZ> {
        let cfg = &self.config;
        let (offset, scale) = scaling(self.plant.z_ref());
        let (lower, upper) = cfg.bounds(self.plant.z_ref());
        let mut guess_point = [0.0; NZ];
        guess_point[..NX].copy_from_slice(&trim.state);
        CollocationSpec {
            t0: 0.0,
            t1: cfg.horizon,
            segments: cfg.segments,
            offset,
            scale,
            lower,
            upper,
            initial_state: Some(trim.state.to_vec()),
            final_state: vec![None; NX],
            path_upper: vec![1.0, 1.0],
            path_from: 1,
            objective_weight: -1.0 / (cfg.horizon * cfg.power_max),
            guess: vec![guess_point; 2 * cfg.segments + 1],
        }
    }

    /// Transcribes and solves the problem from the trim guess.
    pub fn solve(&self) -> Result<OlocSolution> {
        let trim = self.trim()?;
        let model = self.model();
        // a breakdown is retried from the same start with a larger, then a smaller, initial barrier
        let ladder = [1.0, 10.0, 0.1];
        let mut spent = 0;
        let (nlp, mut res) = 'attempts: {
            for (k, f) in ladder.iter().enumerate() {
                let opts = IpmOptions { mu_init: self.config.solver.mu_init * f, ..self.config.solver.clone() };
                let mut nlp = Collocation::new(&model, self.spec(&trim))?;
                let res = ipm::solve(&mut nlp, &opts)?;
                spent += res.iterations;
                let breakdown = matches!(res.status, SolveStatus::NumericalFailure | SolveStatus::RestorationFailed);
                if !breakdown || k + 1 == ladder.len() {
                    break 'attempts (nlp, res);
                }
            }
            unreachable!()
        };
        res.iterations = spent;
        let z = nlp.unscale(&res.x);
        let times = nlp.times().to_vec();
        let states: Vec<[f64; NX]> = z.iter().map(|p| std::array::from_fn(|i| p[i])).collect();
        let controls: Vec<[f64; NU]> = z.iter().map(|p| [p[NX], p[NX + 1]]).collect();
        let multipliers = (0..times.len())
            .map(|j| match (nlp.path_row(j, 0), nlp.path_row(j, 1)) {
                (Some(a), Some(b)) => [res.y[a], res.y[b]],
                _ => [0.0, 0.0],
            })
            .collect();
        self.finish(times, states, controls, multipliers, trim, res.status, res.iterations, res.log_text(), res.log)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        times: Vec<f64>,
        states: Vec<[f64; NX]>,
        controls: Vec<[f64; NU]>,
        multipliers: Vec<[f64; 2]>,
        trim: Trim,
        status: SolveStatus,
        iterations: usize,
        solver_log: String,
        log: Vec<IterRecord>,
    ) -> Result<OlocSolution> {
        let (p_a, lambda): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&states)
            .map(|(&t, x)| {
                let o = outputs(self.plant, x, self.env.wind.speed(t));
                (o.p_a, o.lambda)
            })
            .unzip();
        let (j_in, p_out) = inner_objective(&times, &p_a, &controls, self.config.torque_rate_weight, self.config.pitch_rate_weight)?;
        let trajectory = Trajectory::from_states(self.plant, &self.env, times, states, controls);
        let feasibility = check_feasibility(&trajectory, &self.config);
        let feasible = feasibility.max_violation() <= self.config.feasibility_tol;
        Ok(OlocSolution { trajectory, p_a, lambda, j_in, p_out, status, iterations, feasibility, feasible, multipliers, trim, log, solver_log })
    }

    /// Re-integrates the solution's control rates from its first state with the
    /// adaptive integrator and samples at the mesh points.
    pub fn reintegrate(&self, sol: &OlocSolution) -> Result<Trajectory> {
        let sched = sol.control_schedule()?;
        let times = &sol.trajectory.times;
        simulate_forward(self.plant, &sched, &self.env, &sol.trajectory.states[0], times[0], *times.last().unwrap(), times, &OdeOptions::default())
    }
}

/// RMS of the difference per state channel, normalised by the larger of the
/// channel's RMS excursion about its design value and its engineering scale.
pub fn consistency_errors(plant: &Plant, a: &Trajectory, b: &Trajectory) -> [f64; NX] {
    let (offset, scale) = scaling(plant.z_ref());
    std::array::from_fn(|i| {
        let n = a.states.len().min(b.states.len()) as f64;
        let diff = (a.states.iter().zip(&b.states).map(|(x, y)| (x[i] - y[i]).powi(2)).sum::<f64>() / n).sqrt();
        let rms = (a.states.iter().map(|x| (x[i] - offset[i]).powi(2)).sum::<f64>() / n).sqrt();
        diff / rms.max(scale[i])
    })
}
