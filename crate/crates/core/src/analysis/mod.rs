//! Power curves, stress cross studies, fatigue and scenario handling.
pub mod fatigue;
pub mod power_curve;
pub mod scenario;

use rayon::prelude::*;

pub use fatigue::{fatigue_required_strength, lifetime_damage, rainflow, turning_points, Cycle, FatigueResult, FatigueSpec, MeanStress, WeightedSeries};
pub use power_curve::{cross_constraint_study, cross_study_csv, max_curve_difference, power_curve, CrossCell, CurveMode, PowerCurve, PowerPoint};
pub use scenario::{Scenario, SCENARIO_ENV};

use crate::ccd::PlantEvaluator;
use crate::environment::WaveSpec;
use crate::error::{Error, Result};
use crate::model::integrate::OdeOptions;
use crate::model::{simulate_forward, Plant};
use crate::oloc::OlocProblem;

#[derive(Clone, Debug)]
pub struct BinStress {
    pub u_mean: f64,
    pub prob: f64,
    pub times: Vec<f64>,
    /// Tower stress [Pa].
    pub sigma: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FatigueStudy {
    pub bins: Vec<BinStress>,
    /// Required strength [MPa].
    pub required_mpa: f64,
    pub result: FatigueResult,
}

/// Solves each of the evaluator's bins, re-simulates the optimal controls on a fine grid
/// and sizes the ultimate strength for the design life from the weighted stress histories.
pub fn fatigue_study(evaluator: &PlantEvaluator, plant: &Plant, waves: Option<&WaveSpec>, spec: &FatigueSpec, sample_dt: f64) -> Result<FatigueStudy> {
    let cfg = &evaluator.oloc;
    let bins: Vec<BinStress> = evaluator
        .bins
        .centers
        .par_iter()
        .zip(&evaluator.bins.probs)
        .map(|(&u_mean, &prob)| -> Result<BinStress> {
            let env = evaluator.environment_with(plant, u_mean, cfg.horizon, waves)?;
            let prob_ = OlocProblem::new(plant, env.clone(), cfg.clone())?;
            let sol = prob_.solve()?;
            if !sol.feasible {
                return Err(Error::Numerical(format!("fatigue bin {u_mean:.3} m/s: OLOC solution infeasible ({})", sol.status)));
            }
            let n = (cfg.horizon / sample_dt).round() as usize;
            let times: Vec<f64> = (0..=n).map(|i| cfg.horizon * i as f64 / n as f64).collect();
            let tr = simulate_forward(plant, &sol.control_schedule()?, &env, &sol.trajectory.states[0], 0.0, cfg.horizon, &times, &OdeOptions::default())?;
            Ok(BinStress { u_mean, prob, times: tr.times, sigma: tr.sigma })
        })
        .collect::<Result<_>>()?;
    let series = bins
        .iter()
        .map(|b| WeightedSeries::new(&b.sigma.iter().map(|s| s * 1e-6).collect::<Vec<_>>(), cfg.horizon, b.prob))
        .collect::<Result<Vec<_>>>()?;
    let result = fatigue_required_strength(spec, &series)?;
    Ok(FatigueStudy { bins, required_mpa: result.required_strength, result })
}
