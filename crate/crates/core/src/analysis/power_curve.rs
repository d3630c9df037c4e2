//! Steady-wind power curves and the stress-limit cross study.

use rayon::prelude::*;

use crate::environment::{shear_adjust_default, wind_profile, WindBinSet, WindProfile, WindTemplate};
use crate::error::{Error, Result};
use crate::model::{Environment, Plant};
use crate::oloc::{inner_objective, OlocConfig, OlocProblem};

#[derive(Clone, Debug, PartialEq)]
pub enum CurveMode {
    Steady,
    /// Same fluctuation template as the wind bins.
    Varied { template: WindTemplate, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerPoint {
    pub u: f64,
    /// Time-averaged generator power [W].
    pub p_mean: f64,
    pub p_out: f64,
    pub status: String,
    pub iterations: usize,
    pub feasible: bool,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerCurve {
    pub sigma_max_mpa: f64,
    pub duration: f64,
    pub points: Vec<PowerPoint>,
}

impl PowerCurve {
    pub fn speeds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.u).collect()
    }

    /// Linear interpolation of the mean power, clamped to the end points.
    pub fn power_at(&self, u: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 0.0;
        }
        if u <= pts[0].u {
            return pts[0].p_mean;
        }
        for w in pts.windows(2) {
            if u <= w[1].u {
                let s = (u - w[0].u) / (w[1].u - w[0].u);
                return w[0].p_mean + s * (w[1].p_mean - w[0].p_mean);
            }
        }
        pts[pts.len() - 1].p_mean
    }

    /// Least-squares slope of ln P against ln u over points with `lo <= P <= hi`.
    pub fn loglog_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.points.iter().filter(|p| p.p_mean >= lo && p.p_mean <= hi && p.p_mean > 0.0).map(|p| (p.u.ln(), p.p_mean.ln())).collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    /// AEP [Wh] from the curve evaluated at each bin's shear-adjusted speed for tower length `l`.
    pub fn aep(&self, bins: &WindBinSet, l: f64) -> f64 {
        8760.0 * bins.centers.iter().zip(&bins.probs).map(|(&u, &p)| p * self.power_at(shear_adjust_default(u, l))).sum::<f64>()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["u", "p_mean", "p_out", "status", "iterations", "feasible", "flagged"])?;
        for p in &self.points {
            w.write_record([p.u.to_string(), p.p_mean.to_string(), p.p_out.to_string(), p.status.clone(), p.iterations.to_string(), p.feasible.to_string(), p.flagged.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// One OLOC solve per speed over `duration` seconds (mesh density of `cfg` preserved).
pub fn power_curve(plant: &Plant, cfg: &OlocConfig, speeds: &[f64], duration: f64, mode: &CurveMode) -> Result<PowerCurve> {
    let cfg = cfg.with_horizon(duration);
    cfg.validate()?;
    let points = speeds
        .par_iter()
        .map(|&u| {
            let wind = match mode {
                CurveMode::Steady => WindProfile::steady(u, duration),
                CurveMode::Varied { template, seed } => wind_profile(u, duration, *seed, template),
            };
            let env = Environment { wind, waves: crate::environment::WaveField::calm() };
            let solved = OlocProblem::new(plant, env, cfg.clone()).and_then(|p| p.solve());
            match solved {
                Ok(sol) => {
                    let zeros = vec![[0.0; 2]; sol.trajectory.times.len()];
                    let p_mean = inner_objective(&sol.trajectory.times, &sol.trajectory.p_u, &zeros, 0.0, 0.0).map(|r| r.1).unwrap_or(f64::NAN);
                    PowerPoint {
                        u,
                        p_mean,
                        p_out: sol.p_out,
                        status: sol.status.as_str().to_string(),
                        iterations: sol.iterations,
                        feasible: sol.feasible,
                        flagged: !sol.feasible || !p_mean.is_finite(),
                    }
                }
                Err(e) => PowerPoint { u, p_mean: 0.0, p_out: 0.0, status: format!("error: {e}"), iterations: 0, feasible: false, flagged: true },
            }
        })
        .collect();
    Ok(PowerCurve { sigma_max_mpa: cfg.sigma_max_mpa, duration, points })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossCell {
    pub design_limit_mpa: f64,
    pub sim_limit_mpa: f64,
    pub curve: PowerCurve,
    /// AEP from the curve [Wh].
    pub aep: f64,
}

/// Power curves for every (design limit, simulation limit) pair. `designs` pairs the
/// stress limit a plant was designed for with the plant itself.
pub fn cross_constraint_study(
    designs: &[(f64, &Plant)],
    sim_limits: &[f64],
    cfg: &OlocConfig,
    speeds: &[f64],
    duration: f64,
    bins: &WindBinSet,
) -> Result<Vec<CrossCell>> {
    let mut cells = Vec::new();
    for &(design_limit, plant) in designs {
        for &sim in sim_limits {
            let c = OlocConfig { sigma_max_mpa: sim, ..cfg.clone() };
            let curve = power_curve(plant, &c, speeds, duration, &CurveMode::Steady)?;
            let aep = curve.aep(bins, plant.tower.l);
            cells.push(CrossCell { design_limit_mpa: design_limit, sim_limit_mpa: sim, curve, aep });
        }
    }
    Ok(cells)
}

pub fn cross_study_csv(cells: &[CrossCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["design_limit_mpa", "sim_limit_mpa", "u", "p_mean", "status", "flagged", "aep_gwh"])?;
    for c in cells {
        for p in &c.curve.points {
            w.write_record([
                c.design_limit_mpa.to_string(),
                c.sim_limit_mpa.to_string(),
                p.u.to_string(),
                p.p_mean.to_string(),
                p.status.clone(),
                p.flagged.to_string(),
                (c.aep * 1e-9).to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Largest relative difference in mean power between two curves on the same speeds,
/// relative to the rated power `p_ref`.
pub fn max_curve_difference(a: &PowerCurve, b: &PowerCurve, p_ref: f64) -> f64 {
    a.points.iter().zip(&b.points).map(|(x, y)| (x.p_mean - y.p_mean).abs() / p_ref).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(pts: &[(f64, f64)]) -> PowerCurve {
        PowerCurve {
            sigma_max_mpa: 45.0,
            duration: 600.0,
            points: pts.iter().map(|&(u, p)| PowerPoint { u, p_mean: p, p_out: p, status: "solved".into(), iterations: 1, feasible: true, flagged: false }).collect(),
        }
    }

    #[test]
    fn cubic_curve_has_slope_three() {
        let c = curve(&(3..=10).map(|u| (u as f64, 1000.0 * (u as f64).powi(3))).collect::<Vec<_>>());
        assert!((c.loglog_slope(0.0, f64::INFINITY).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_and_clamping() {
        let c = curve(&[(3.0, 0.0), (4.0, 10.0), (5.0, 30.0)]);
        assert_eq!(c.power_at(3.5), 5.0);
        assert_eq!(c.power_at(1.0), 0.0);
        assert_eq!(c.power_at(9.0), 30.0);
    }

    #[test]
    fn csv_round_trips() {
        let c = curve(&[(3.0, 1.25), (4.0, 1e6 / 3.0)]);
        let text = c.to_csv().unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let back: Vec<(f64, f64)> = r.records().map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].parse().unwrap())
        }).collect();
        assert_eq!(back, vec![(3.0, 1.25), (4.0, 1e6 / 3.0)]);
    }
}
