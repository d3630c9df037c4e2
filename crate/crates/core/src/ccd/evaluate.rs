//! Plant evaluation: rotor surface, plant assembly and ballast, one OLOC solve per wind bin, AEP.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::design::PlantDesign;
use crate::aero::{design_surface, BladeDesign, CoefficientSurface, Polar, SurfaceGrid};
use crate::environment::{shear_adjust_default, wave_field, wind_profile, WaveSpec, WindBinSet, WindTemplate};
use crate::error::Result;
use crate::model::{Environment, ModelParams, MooringModel, Plant};
use crate::oloc::{OlocConfig, OlocProblem, OlocSolution};

pub const HOURS_PER_YEAR: f64 = 8760.0;
/// Outer objective assigned to designs that cannot be evaluated [Wh].
pub const PENALTY_J_OUT: f64 = 1.0e12;

#[derive(Clone, Debug, PartialEq)]
pub struct BinResult {
    pub u_mean: f64,
    /// Shear-adjusted hub-height speed.
    pub u_hub: f64,
    pub prob: f64,
    pub p_out: f64,
    pub status: String,
    pub iterations: usize,
    pub feasible: bool,
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AepResult {
    /// Expected mean power [W].
    pub e_in: f64,
    /// Annual energy production [Wh].
    pub aep: f64,
    pub j_out: f64,
    pub bins: Vec<BinResult>,
    pub penalized: bool,
    pub reason: Option<String>,
}

impl AepResult {
    pub fn aep_gwh(&self) -> f64 {
        self.aep * 1e-9
    }

    pub fn statuses(&self) -> String {
        self.bins.iter().map(|b| b.status.as_str()).collect::<Vec<_>>().join(";")
    }

    fn penalty(bins: Vec<BinResult>, reason: String) -> Self {
        Self { e_in: 0.0, aep: 0.0, j_out: PENALTY_J_OUT, bins, penalized: true, reason: Some(reason) }
    }
}

/// Expected power and AEP from bin probabilities and bin mean powers.
pub fn aggregate(probs: &[f64], p_out: &[f64]) -> (f64, f64) {
    let e_in: f64 = probs.iter().zip(p_out).map(|(p, w)| p * w).sum();
    (e_in, HOURS_PER_YEAR * e_in)
}

/// Shared, read-only context for evaluating many designs.
pub struct PlantEvaluator {
    pub params: ModelParams,
    pub mooring: MooringModel,
    pub polars: Vec<Polar>,
    pub grid: SurfaceGrid,
    pub cache_dir: Option<PathBuf>,
    pub bins: WindBinSet,
    pub wind: WindTemplate,
    pub wind_seed: u64,
    pub waves: Option<WaveSpec>,
    pub oloc: OlocConfig,
    surfaces: Mutex<HashMap<String, Arc<CoefficientSurface>>>,
}

impl PlantEvaluator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: ModelParams,
        mooring: MooringModel,
        polars: Vec<Polar>,
        grid: SurfaceGrid,
        cache_dir: Option<PathBuf>,
        bins: WindBinSet,
        wind: WindTemplate,
        wind_seed: u64,
        waves: Option<WaveSpec>,
        oloc: OlocConfig,
    ) -> Result<Self> {
        oloc.validate()?;
        if let Some(w) = &waves {
            w.validate()?;
        }
        Ok(Self { params, mooring, polars, grid, cache_dir, bins, wind, wind_seed, waves, oloc, surfaces: Mutex::new(HashMap::new()) })
    }

    /// Seeds the in-memory surface cache (e.g. with a surface already built for the baseline blade).
    pub fn insert_surface(&self, blade: &BladeDesign, surface: Arc<CoefficientSurface>) {
        self.surfaces.lock().unwrap().insert(blade.cache_key(), surface);
    }

    pub fn surface(&self, blade: &BladeDesign) -> Result<Arc<CoefficientSurface>> {
        let key = blade.cache_key();
        if let Some(s) = self.surfaces.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(design_surface(blade, &self.polars, &self.grid, self.cache_dir.as_deref())?);
        self.surfaces.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    pub fn plant(&self, design: &PlantDesign) -> Result<Plant> {
        design.tower.validate()?;
        design.blade.validate()?;
        let surface = self.surface(&design.blade)?;
        let mut p = self.params.clone();
        p.tower = design.tower;
        p.blade = design.blade.clone();
        Plant::new(&p, surface, self.mooring.clone())
    }

    /// Wind and wave histories for a bin of mean speed `u_mean` on `plant`.
    pub fn environment(&self, plant: &Plant, u_mean: f64, horizon: f64) -> Result<Environment> {
        self.environment_with(plant, u_mean, horizon, self.waves.as_ref())
    }

    pub fn environment_with(&self, plant: &Plant, u_mean: f64, horizon: f64, waves: Option<&WaveSpec>) -> Result<Environment> {
        let u = shear_adjust_default(u_mean, plant.tower.l);
        let waves = match waves {
            Some(spec) => wave_field(spec, plant.hull.cb_z)?,
            None => crate::environment::WaveField::calm(),
        };
        Ok(Environment { wind: wind_profile(u, horizon, self.wind_seed, &self.wind), waves })
    }

    pub fn solve_bin(&self, plant: &Plant, u_mean: f64, cfg: &OlocConfig) -> Result<OlocSolution> {
        let env = self.environment(plant, u_mean, cfg.horizon)?;
        OlocProblem::new(plant, env, cfg.clone())?.solve()
    }

    /// Total function: failures become a penalised result rather than an error.
    pub fn evaluate(&self, design: &PlantDesign) -> AepResult {
        let plant = match self.plant(design) {
            Ok(p) => p,
            Err(e) => return AepResult::penalty(Vec::new(), format!("plant assembly: {e}")),
        };
        self.evaluate_plant(&plant)
    }

    pub fn evaluate_plant(&self, plant: &Plant) -> AepResult {
        let l = plant.tower.l;
        let outcomes: Vec<(BinResult, Option<String>)> = self
            .bins
            .centers
            .par_iter()
            .zip(&self.bins.probs)
            .map(|(&u_mean, &prob)| {
                let u_hub = shear_adjust_default(u_mean, l);
                match self.solve_bin(plant, u_mean, &self.oloc) {
                    Ok(sol) => {
                        let r = BinResult {
                            u_mean,
                            u_hub,
                            prob,
                            p_out: sol.p_out,
                            status: sol.status.as_str().to_string(),
                            iterations: sol.iterations,
                            feasible: sol.feasible,
                            max_violation: sol.feasibility.max_violation(),
                        };
                        let fail = (!sol.feasible).then(|| format!("bin {u_mean:.3} m/s infeasible ({}, violation {:.3e})", sol.status, r.max_violation));
                        (r, fail)
                    }
                    Err(e) => {
                        let r = BinResult { u_mean, u_hub, prob, p_out: 0.0, status: "error".into(), iterations: 0, feasible: false, max_violation: f64::INFINITY };
                        (r, Some(format!("bin {u_mean:.3} m/s: {e}")))
                    }
                }
            })
            .collect();
        let reason = outcomes.iter().find_map(|(_, f)| f.clone());
        let bins: Vec<BinResult> = outcomes.into_iter().map(|(b, _)| b).collect();
        if let Some(r) = reason {
            return AepResult::penalty(bins, r);
        }
        let probs: Vec<f64> = bins.iter().map(|b| b.prob).collect();
        let p: Vec<f64> = bins.iter().map(|b| b.p_out).collect();
        let (e_in, aep) = aggregate(&probs, &p);
        AepResult { e_in, aep, j_out: -aep, bins, penalized: false, reason: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rated_everywhere_gives_43_8_gwh() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let (e, aep) = aggregate(&probs, &[5e6; 4]);
        assert!((e - 5e6).abs() < 1e-6);
        assert!((aep - 43.8e9).abs() < 1e-3);
    }

    #[test]
    fn aggregation_is_linear() {
        let probs = [0.25, 0.5, 0.25];
        let p = [1e6, 2e6, 4e6];
        let (_, a) = aggregate(&probs, &p);
        let (_, b) = aggregate(&probs, &p.map(|v| 2.0 * v));
        assert_eq!(b, 2.0 * a);
    }
}
