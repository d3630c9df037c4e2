use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cmaes::{cmaes_run, CmaOptions, CmaResult, Evaluation, SearchSpace};
use super::design::{variable_names, variable_units, DesignMode, PlantDesign, TowerBox, TOWER_VARIABLES};
use super::evaluate::{AepResult, PlantEvaluator};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcdConfig {
    pub mode: DesignMode,
    pub population: usize,
    pub generations: usize,
    /// Number of grouped wind bins (23 keeps every bin).
    pub bins: usize,
    /// Initial step as a fraction of each variable's box width.
    pub sigma0: f64,
    pub seed: u64,
    pub tower_box: TowerBox,
    pub resample: usize,
    pub penalty: f64,
    pub sensitivity_delta: f64,
}

impl Default for CcdConfig {
    fn default() -> Self {
        Self {
            mode: DesignMode::TowerOnly,
            population: 8,
            generations: 15,
            bins: 5,
            sigma0: 0.2,
            seed: 7,
            tower_box: TowerBox::default(),
            resample: 10,
            penalty: 1.0,
            sensitivity_delta: 0.05,
        }
    }
}

impl CcdConfig {
    pub fn validate(&self) -> Result<()> {
        self.tower_box.validate()?;
        if self.population < 4 || self.bins == 0 || !(self.sigma0 > 0.0) || !(self.sensitivity_delta > 0.0) {
            return Err(Error::Argument(format!("ccd config needs population >= 4, bins > 0, sigma0 > 0 and a positive sensitivity step: {self:?}")));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<SearchSpace> {
        let (lo, hi) = self.tower_box.bounds(self.mode);
        SearchSpace::boxed(lo, hi)
    }
}

/// One evaluated design of the optimisation history.
#[derive(Clone, Debug)]
pub struct EvaluatedDesign {
    pub generation: usize,
    pub index: usize,
    pub x: Vec<f64>,
    pub result: AepResult,
    pub fitness: f64,
    pub projected: bool,
}

#[derive(Clone, Debug)]
pub struct CcdReport {
    pub mode: DesignMode,
    pub baseline: PlantDesign,
    pub baseline_result: AepResult,
    pub best: PlantDesign,
    pub best_result: AepResult,
    pub cma: CmaResult,
    pub history: Vec<EvaluatedDesign>,
}

impl CcdReport {
    pub fn aep_gain(&self) -> f64 {
        self.best_result.aep / self.baseline_result.aep - 1.0
    }

    pub fn history_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head: Vec<String> = vec!["generation".into(), "index".into()];
        head.extend(variable_names(self.mode));
        head.extend(["aep_gwh", "j_out_gwh", "fitness", "penalized", "projected", "statuses"].map(String::from));
        w.write_record(&head)?;
        for h in &self.history {
            let mut row = vec![h.generation.to_string(), h.index.to_string()];
            row.extend(h.x.iter().map(|v| v.to_string()));
            row.push(h.result.aep_gwh().to_string());
            row.push((h.result.j_out * 1e-9).to_string());
            row.push(h.fitness.to_string());
            row.push(h.result.penalized.to_string());
            row.push(h.projected.to_string());
            row.push(h.result.statuses());
            w.write_record(&row)?;
        }
        finish(w)
    }

    pub fn best_design_toml(&self) -> Result<String> {
        self.best.to_toml()
    }

    /// Baseline-versus-optimum table of design variables and objective values.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "unit", "baseline", "optimum"])?;
        let names = variable_names(self.mode);
        let units = variable_units(self.mode);
        for ((n, u), (a, b)) in names.iter().zip(&units).zip(self.baseline.to_vector().into_iter().zip(self.best.to_vector())) {
            w.write_record([n.clone(), u.to_string(), a.to_string(), b.to_string()])?;
        }
        w.write_record(["aep".into(), "GWh".into(), self.baseline_result.aep_gwh().to_string(), self.best_result.aep_gwh().to_string()])?;
        w.write_record(["j_out".into(), "GWh".into(), (self.baseline_result.j_out * 1e-9).to_string(), (self.best_result.j_out * 1e-9).to_string()])?;
        w.write_record(["aep_gain".into(), "%".into(), "0".into(), (100.0 * self.aep_gain()).to_string()])?;
        w.write_record(["generations".into(), "-".into(), "0".into(), self.cma.generations.to_string()])?;
        w.write_record(["status".into(), "-".into(), "-".into(), self.cma.status.as_str().to_string()])?;
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Runs the outer loop from the evaluator's own plant parameters as the baseline.
pub fn ccd_run(evaluator: &PlantEvaluator, cfg: &CcdConfig) -> Result<CcdReport> {
    cfg.validate()?;
    let baseline = PlantDesign { tower: evaluator.params.tower, blade: evaluator.params.blade.clone(), mode: cfg.mode };
    let space = cfg.space()?;
    let x0 = baseline.to_vector();
    if !space.contains(&x0) {
        return Err(Error::Argument("baseline design lies outside the design box".into()));
    }
    let results: Mutex<Vec<AepResult>> = Mutex::new(Vec::new());
    let objective = |xs: &[Vec<f64>]| -> Result<Vec<Evaluation>> {
        let batch: Vec<AepResult> = xs
            .par_iter()
            .map(|x| match PlantDesign::from_vector(&baseline, x) {
                Ok(d) => evaluator.evaluate(&d),
                Err(e) => AepResult { e_in: 0.0, aep: 0.0, j_out: super::evaluate::PENALTY_J_OUT, bins: Vec::new(), penalized: true, reason: Some(e.to_string()) },
            })
            .collect();
        let evals = batch.iter().map(|r| Evaluation { f: r.j_out * 1e-9, penalized: r.penalized }).collect();
        results.lock().unwrap().extend(batch);
        Ok(evals)
    };
    let opts = CmaOptions {
        population: cfg.population,
        generations: cfg.generations,
        sigma0: cfg.sigma0,
        seed: cfg.seed,
        f_target: None,
        tol_x: 1e-9,
        resample: cfg.resample,
        penalty: cfg.penalty,
    };
    let cma = cmaes_run(objective, &x0, &space, &opts)?;
    let results = results.into_inner().unwrap();
    let history: Vec<EvaluatedDesign> = cma
        .history
        .iter()
        .zip(results)
        .map(|(h, r)| EvaluatedDesign { generation: h.generation, index: h.index, x: h.x.clone(), result: r, fitness: h.fitness, projected: h.projected })
        .collect();
    let baseline_result = history[0].result.clone();
    let best_entry = history
        .iter()
        .find(|h| h.x == cma.best_x && h.result.penalized == cma.best_penalized)
        .ok_or_else(|| Error::Numerical("best design missing from history".into()))?;
    let best = PlantDesign::from_vector(&baseline, &cma.best_x)?;
    let best_result = best_entry.result.clone();
    Ok(CcdReport { mode: cfg.mode, baseline, baseline_result, best, best_result, cma, history })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityRow {
    pub variable: String,
    /// +1 or -1.
    pub sign: i8,
    pub value: f64,
    /// Realised relative change [%].
    pub delta_rel: f64,
    pub j_out: f64,
    /// Relative change of |J_out| [%].
    pub dj_rel: f64,
    pub ratio: f64,
    pub penalized: bool,
}

/// Perturbs each listed coordinate of `x_star` by `+-delta` (projected onto the box) and
/// re-evaluates `j_out`.
pub fn sensitivity_scan_with<F>(x_star: &[f64], j_star: f64, names: &[&str], delta: f64, lower: &[f64], upper: &[f64], j_out: F) -> Vec<SensitivityRow>
where
    F: Fn(&[f64]) -> (f64, bool) + Sync,
{
    let cases: Vec<(usize, i8)> = (0..names.len()).flat_map(|i| [(i, 1i8), (i, -1i8)]).collect();
    cases
        .par_iter()
        .map(|&(i, sign)| {
            let mut x = x_star.to_vec();
            x[i] = (x_star[i] * (1.0 + f64::from(sign) * delta)).clamp(lower[i], upper[i]);
            let (j, penalized) = j_out(&x);
            let delta_rel = 100.0 * (x[i] - x_star[i]) / x_star[i];
            // a penalised design produces no energy
            let j_abs = if penalized { 0.0 } else { j.abs() };
            let dj_rel = 100.0 * (j_abs - j_star.abs()) / j_star.abs();
            let ratio = if delta_rel != 0.0 { dj_rel / delta_rel } else { 0.0 };
            SensitivityRow { variable: names[i].to_string(), sign, value: x[i], delta_rel, j_out: j, dj_rel, ratio, penalized }
        })
        .collect()
}

/// Tower-variable sensitivity of the outer objective about `design`.
pub fn sensitivity_scan(evaluator: &PlantEvaluator, design: &PlantDesign, star: &AepResult, delta: f64, tower_box: &TowerBox) -> Vec<SensitivityRow> {
    let x_star = design.to_vector();
    let (lo, hi) = tower_box.bounds(design.mode);
    sensitivity_scan_with(&x_star, star.j_out, &TOWER_VARIABLES, delta, &lo, &hi, |x| match PlantDesign::from_vector(design, x) {
        Ok(d) => {
            let r = evaluator.evaluate(&d);
            (r.j_out, r.penalized)
        }
        Err(_) => (super::evaluate::PENALTY_J_OUT, true),
    })
}

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variable", "sign", "value", "delta_rel_pct", "j_out_gwh", "dj_rel_pct", "ratio", "penalized"])?;
    for r in rows {
        w.write_record([
            r.variable.clone(),
            if r.sign > 0 { "+".into() } else { "-".into() },
            r.value.to_string(),
            r.delta_rel.to_string(),
            (r.j_out * 1e-9).to_string(),
            r.dj_rel.to_string(),
            r.ratio.to_string(),
            r.penalized.to_string(),
        ])?;
    }
    finish(w)
}
