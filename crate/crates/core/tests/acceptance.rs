//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs everything by default (about an hour on one core). `FOWT_CCD_ACCEPTANCE_ONLY=1,4,5`
//! restricts the run to the listed criteria. Failures are reported, not fatal, unless
//! `FOWT_CCD_ACCEPTANCE_STRICT=1` is set.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use fowt_core::ad::Scalar;
use fowt_core::aero::{build_coefficient_surface, blade_geometry, nrel5mw_polars, BladeDesign, CoefficientSurface, SurfaceGrid};
use fowt_core::analysis::{fatigue_study, max_curve_difference, power_curve, rainflow, CurveMode, PowerCurve, Scenario};
use fowt_core::ccd::{ccd_run, sensitivity_scan, CcdConfig, CcdReport, PlantEvaluator};
use fowt_core::environment::weibull_bins;
use fowt_core::model::plant::shipped_surrogate;
use fowt_core::model::{Environment, Plant};
use fowt_core::mooring::{regime_boundary, solve_catenary, train_surrogate, LineProperties, MooringLayout, SurrogateConfig};
use fowt_core::oloc::{consistency_errors, solve, Collocation, CollocationSpec, IpmOptions, Nlp, OlocConfig, OlocProblem, OlocSolution, PointModel, SolveStatus};
use nalgebra::SymmetricEigen;

const P_RATED: f64 = 5.0e6;

type Outcome = Result<(bool, String), String>;

struct Ctx {
    surface: OnceLock<(Arc<CoefficientSurface>, f64)>,
    ccd45: OnceLock<Result<(CcdReport, f64), String>>,
}

impl Ctx {
    fn surface(&self) -> Arc<CoefficientSurface> {
        self.surface
            .get_or_init(|| {
                let t = Instant::now();
                let s = build_coefficient_surface(&blade_geometry(&BladeDesign::baseline()), &nrel5mw_polars(), &SurfaceGrid::default()).unwrap();
                (Arc::new(s), t.elapsed().as_secs_f64())
            })
            .0
            .clone()
    }

    fn evaluator(&self, sigma_mpa: f64) -> PlantEvaluator {
        let mut s = Scenario::default();
        s.oloc.sigma_max_mpa = sigma_mpa;
        let ev = s.evaluator(s.ccd_bins().unwrap()).unwrap();
        ev.insert_surface(&BladeDesign::baseline(), self.surface());
        ev
    }

    fn plant(&self) -> Plant {
        let ev = self.evaluator(45.0);
        Scenario::default().plant(&ev).unwrap()
    }

    fn ccd45(&self) -> Result<&(CcdReport, f64), String> {
        self.ccd45
            .get_or_init(|| {
                let ev = self.evaluator(45.0);
                let t = Instant::now();
                let r = ccd_run(&ev, &CcdConfig::default()).map_err(|e| e.to_string())?;
                Ok((r, t.elapsed().as_secs_f64()))
            })
            .as_ref()
            .map_err(|e| e.clone())
    }
}

fn steady_solve(plant: &Plant, u: f64) -> Result<(OlocSolution, Vec<f64>), String> {
    let cfg = OlocConfig::default();
    let prob = OlocProblem::new(plant, Environment::steady(u, cfg.horizon), cfg).map_err(|e| e.to_string())?;
    let sol = prob.solve().map_err(|e| e.to_string())?;
    let re = prob.reintegrate(&sol).map_err(|e| e.to_string())?;
    let err = consistency_errors(plant, &sol.trajectory, &re).to_vec();
    Ok((sol, err))
}

fn c1(ctx: &Ctx) -> Outcome {
    let plant = ctx.plant();
    let t = Instant::now();
    let m = plant.mass_matrix + plant.added_mass;
    let asym = (m - m.transpose()).abs().max() / m.abs().max();
    let eig = SymmetricEigen::new(m).eigenvalues;
    let min = eig.min();
    let dt = t.elapsed().as_secs_f64();
    Ok((asym < 1e-12 && min > 0.0 && dt < 1.0, format!("asymmetry {asym:.1e}, min eigenvalue {min:.4e}, check {:.2e} s", dt)))
}

fn c2(_: &Ctx) -> Outcome {
    let s = shipped_surrogate();
    let (es, eb) = s.check_error(41).map_err(|e| e.to_string())?;
    let max_err = es.iter().chain(&eb).fold(0.0f64, |a, &b| a.max(b));
    let props = LineProperties::oc3();
    let d = s.domain;
    let mut jump = 0.0f64;
    let mut residual = 0.0f64;
    for j in 0..=20 {
        let h = d.h_min + (d.h_max - d.h_min) * j as f64 / 20.0;
        let lb = regime_boundary(h, &props).map_err(|e| e.to_string())?;
        if lb - 1e-6 > d.l_min && lb + 1e-6 < d.l_max {
            let (a, b) = (s.eval(lb - 1e-6, h).map_err(|e| e.to_string())?, s.eval(lb + 1e-6, h).map_err(|e| e.to_string())?);
            jump = jump.max(((a.0 - b.0) / b.0).abs()).max(((a.1 - b.1) / b.1).abs());
        }
        for i in 0..=20 {
            let l = d.l_min + (d.l_max - d.l_min) * i as f64 / 20.0;
            residual = residual.max(solve_catenary(l, h, &props).map_err(|e| e.to_string())?.residual);
        }
    }
    Ok((max_err < 0.01 && jump < 0.02 && residual < 1e-8, format!("held-out max rel error {max_err:.3e}, boundary jump {jump:.3e}, catenary residual {residual:.1e}")))
}

fn c3(ctx: &Ctx) -> Outcome {
    let s = ctx.surface();
    let build = ctx.surface.get().unwrap().1;
    let betz = 16.0 / 27.0;
    let max_cp = s.max_cp();
    let (lam, cp) = s.cp_max_ridge(0.0);
    let ok = max_cp < betz && (7.0..=8.0).contains(&lam) && (0.45..=0.50).contains(&cp) && build < 60.0;
    Ok((ok, format!("max Cp {max_cp:.4} (< {betz:.4}), peak Cp {cp:.4} at lambda {lam:.3} (pitch 0), full surface {build:.1} s")))
}

fn c4(_: &Ctx) -> Outcome {
    let b = weibull_bins(2.0, 13.44, 3.0, 25.0, 1.0).map_err(|e| e.to_string())?;
    let sum: f64 = b.probs.iter().sum();
    Ok((b.len() == 23 && (sum - 1.0).abs() <= 1e-12, format!("{} bins, probability sum - 1 = {:.1e}", b.len(), sum - 1.0)))
}

/// x' = v, v' = u, minimise the integral of u^2 from rest to x = 1 at rest in unit time.
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

fn double_integrator_error() -> Result<f64, String> {
    let segments = 10;
    let np = 2 * segments + 1;
    let spec = CollocationSpec {
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
    };
    let model = DoubleIntegrator;
    let mut nlp = Collocation::new(&model, spec).map_err(|e| e.to_string())?;
    let r = solve(&mut nlp, &IpmOptions { tol: 1e-10, constr_viol_tol: 1e-10, ..Default::default() }).map_err(|e| e.to_string())?;
    if r.status != SolveStatus::Solved {
        return Err(format!("double integrator: {}", r.status.as_str()));
    }
    // closed form: u = 6 - 12 t, x = 3 t^2 - 2 t^3, J = 12
    let mut err = (r.objective - 12.0).abs();
    for (t, p) in nlp.times().iter().zip(nlp.unscale(&r.x)) {
        err = err.max((p[2] - (6.0 - 12.0 * t)).abs()).max((p[0] - (3.0 * t * t - 2.0 * t.powi(3))).abs()).max((p[1] - (6.0 * t - 6.0 * t * t)).abs());
    }
    Ok(err)
}

fn gradient_error(plant: &Plant) -> Result<f64, String> {
    let cfg = OlocConfig { horizon: 20.0, segments: 5, ..Default::default() };
    let prob = OlocProblem::new(plant, Environment::steady(11.0, 20.0), cfg).map_err(|e| e.to_string())?;
    let trim = prob.trim().map_err(|e| e.to_string())?;
    let model = prob.model();
    let mut nlp = Collocation::new(&model, prob.spec(&trim)).map_err(|e| e.to_string())?;
    let (lo, hi) = nlp.var_bounds();
    let x: Vec<f64> = nlp.initial_point().iter().enumerate().map(|(i, v)| (v + 0.1 * (i as f64 * 0.77).sin()).clamp(lo[i] + 1e-3, hi[i] - 1e-3)).collect();
    let ev = nlp.eval_derivatives(&x).map_err(|e| e.to_string())?;
    let gmax = ev.grad.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut worst = 0.0f64;
    for v in 0..x.len() {
        let h = 1e-6;
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[v] += h;
        xm[v] -= h;
        let fd = (nlp.eval_values(&xp).0 - nlp.eval_values(&xm).0) / (2.0 * h);
        let scale = ev.grad[v].abs().max(1e-3 * gmax);
        worst = worst.max((fd - ev.grad[v]).abs() / scale);
    }
    Ok(worst)
}

fn c5(ctx: &Ctx) -> Outcome {
    let plant = ctx.plant();
    let di = double_integrator_error()?;
    let mut rms = 0.0f64;
    for u in [8.0, 14.0] {
        let (_, err) = steady_solve(&plant, u)?;
        rms = rms.max(err.iter().fold(0.0, |a: f64, &b| a.max(b)));
    }
    let grad = gradient_error(&plant)?;
    Ok((di < 1e-6 && rms < 0.02 && grad < 1e-5, format!("double integrator error {di:.1e}, re-integration max RMS {:.3}%, gradient vs FD {grad:.1e}", 100.0 * rms)))
}

fn c6(ctx: &Ctx) -> Outcome {
    let plant = ctx.plant();
    let (hi, _) = steady_solve(&plant, 14.0)?;
    let n = hi.trajectory.times.len();
    let mut plateau_dev = 0.0f64;
    let (mut active, mut positive) = (0, 0);
    for j in n / 5..n {
        let pu = hi.trajectory.p_u[j];
        plateau_dev = plateau_dev.max((pu - P_RATED).abs() / P_RATED);
        if pu > P_RATED * (1.0 - 1e-4) {
            active += 1;
            if hi.multipliers[j][1] > 0.0 {
                positive += 1;
            }
        }
    }
    let (lo, _) = steady_solve(&plant, 8.0)?;
    let (ridge, _) = plant.surface.cp_max_ridge(0.0);
    let m = lo.lambda.len();
    let steady: Vec<usize> = (m / 10..m).filter(|&j| lo.trajectory.states[j][7].to_degrees() < 0.5).collect();
    let dev = steady.iter().map(|&j| (lo.lambda[j] - ridge).abs() / ridge).fold(0.0, f64::max);
    let whole = lo.lambda.iter().map(|l| (l - ridge).abs() / ridge).fold(0.0, f64::max);
    let ok = hi.feasible && lo.feasible && plateau_dev < 0.01 && active > n / 2 && positive == active && steady.len() * 10 >= 6 * m && dev < 0.05;
    Ok((
        ok,
        format!(
            "14 m/s: P_u within {:.3}% of 5 MW, power bound active at {active}/{} points with {positive} positive multipliers; 8 m/s: lambda within {:.2}% of ridge {ridge:.3} over {}/{m} steady points (whole horizon {:.1}%)",
            100.0 * plateau_dev,
            n - n / 5,
            100.0 * dev,
            steady.len(),
            100.0 * whole
        ),
    ))
}

fn curve_stats(c: &PowerCurve) -> (Option<f64>, f64, usize) {
    let slope = c.loglog_slope(1.0, 0.9 * P_RATED);
    let plateau = c.points.iter().filter(|p| p.u >= 13.0).map(|p| (p.p_mean - P_RATED).abs() / P_RATED).fold(0.0, f64::max);
    (slope, plateau, c.points.iter().filter(|p| p.flagged).count())
}

fn c7(ctx: &Ctx) -> Outcome {
    let plant = ctx.plant();
    let s = Scenario::default();
    let t = Instant::now();
    let c = power_curve(&plant, &s.oloc, &s.wind.speeds(), s.wind.power_curve_duration, &CurveMode::Steady).map_err(|e| e.to_string())?;
    let dt = t.elapsed().as_secs_f64();
    let (slope, plateau, flagged) = curve_stats(&c);
    let slope_ok = slope.is_some_and(|k| (2.5..=3.5).contains(&k));
    Ok((
        slope_ok && plateau <= 0.02 && dt < 3600.0 && c.points.len() == 23,
        format!("{} points x {} s: region-2 log-log slope {:.3}, plateau deviation {:.3}% (u >= 13), {flagged} flagged, {:.0} s", c.points.len(), c.duration, slope.unwrap_or(f64::NAN), 100.0 * plateau, dt),
    ))
}

fn c8(ctx: &Ctx) -> Outcome {
    let (r45, _) = ctx.ccd45()?;
    let ev90 = ctx.evaluator(90.0);
    let r90 = ccd_run(&ev90, &CcdConfig::default()).map_err(|e| e.to_string())?;
    let s = Scenario::default();
    let speeds = s.wind.speeds();
    let bins = s.full_bins().map_err(|e| e.to_string())?;
    let ev = ctx.evaluator(45.0);
    let p45 = ev.plant(&r45.best).map_err(|e| e.to_string())?;
    let p90 = ev.plant(&r90.best).map_err(|e| e.to_string())?;
    let curve = |p: &Plant, sim: f64| -> Result<PowerCurve, String> {
        let cfg = OlocConfig { sigma_max_mpa: sim, ..s.oloc.clone() };
        power_curve(p, &cfg, &speeds, s.wind.power_curve_duration, &CurveMode::Steady).map_err(|e| e.to_string())
    };
    let (c45_45, c45_90, c90_45, c90_90) = (curve(&p45, 45.0)?, curve(&p45, 90.0)?, curve(&p90, 45.0)?, curve(&p90, 90.0)?);
    let diff = max_curve_difference(&c45_90, &c45_45, P_RATED);
    let (a45, a90) = (c90_45.aep(&bins, p90.tower.l), c90_90.aep(&bins, p90.tower.l));
    Ok((
        diff <= 0.01 && a45 < a90,
        format!(
            "(45,90) vs (45,45) max difference {:.3}% of rated; AEP (90,45) {:.3} < (90,90) {:.3} GWh; 90-MPa design l = {:.2} m",
            100.0 * diff,
            a45 * 1e-9,
            a90 * 1e-9,
            r90.best.tower.l
        ),
    ))
}

fn c9(ctx: &Ctx) -> Outcome {
    let (r, dt) = ctx.ccd45()?;
    let gain = r.aep_gain();
    let (l0, l1) = (r.baseline.tower.l, r.best.tower.l);
    Ok((
        gain >= 0.02 && l1 > l0 && *dt < 12.0 * 3600.0 && !r.best_result.penalized,
        format!(
            "AEP {:.3} -> {:.3} GWh ({:+.2}%), tower length {l0} -> {l1:.2} m, {} generations in {:.0} s",
            r.baseline_result.aep_gwh(),
            r.best_result.aep_gwh(),
            100.0 * gain,
            r.cma.generations,
            dt
        ),
    ))
}

fn c10(ctx: &Ctx) -> Outcome {
    let (r, _) = ctx.ccd45()?;
    let ev = ctx.evaluator(45.0);
    let rows = sensitivity_scan(&ev, &r.best, &r.best_result, 0.05, &CcdConfig::default().tower_box);
    let worst = rows.iter().map(|r| r.dj_rel).fold(f64::NEG_INFINITY, f64::max);
    let table: Vec<String> = rows.iter().map(|r| format!("{}{} {:+.3}", r.variable, if r.sign > 0 { "+" } else { "-" }, r.dj_rel)).collect();
    Ok((rows.len() == 8 && worst <= 0.1, format!("max dJ_rel {worst:+.3}% [{}]", table.join(", "))))
}

fn c11(ctx: &Ctx) -> Outcome {
    let cycles = rainflow(&[-2.0, 1.0, -3.0, 5.0, -1.0, 3.0, -4.0, 4.0, -2.0]).map_err(|e| e.to_string())?;
    let mut totals: Vec<(f64, f64)> = Vec::new();
    for c in &cycles {
        match totals.iter_mut().find(|t| t.0 == c.range) {
            Some(t) => t.1 += c.count,
            None => totals.push((c.range, c.count)),
        }
    }
    totals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let astm = totals == [(3.0, 0.5), (4.0, 1.5), (6.0, 0.5), (8.0, 1.0), (9.0, 0.5)];
    let s = Scenario::default();
    let ev = ctx.evaluator(45.0);
    let plant = ctx.plant();
    let spec = s.fatigue.spec();
    let off = fatigue_study(&ev, &plant, None, &spec, s.fatigue.sample_dt).map_err(|e| e.to_string())?;
    let on = fatigue_study(&ev, &plant, Some(&s.wave.spec()), &spec, s.fatigue.sample_dt).map_err(|e| e.to_string())?;
    Ok((astm && on.required_mpa > off.required_mpa, format!("ASTM example {}, required strength waves off {:.2} MPa, waves on {:.2} MPa", if astm { "exact" } else { "MISMATCH" }, off.required_mpa, on.required_mpa)))
}

fn c12(ctx: &Ctx) -> Outcome {
    let plant = ctx.plant();
    let cfg = OlocConfig { horizon: 40.0, segments: 20, ..Default::default() };
    let oloc = || -> Result<String, String> {
        let ev = ctx.evaluator(45.0);
        let env = ev.environment(&plant, 12.0, cfg.horizon).map_err(|e| e.to_string())?;
        let sol = OlocProblem::new(&plant, env, cfg.clone()).and_then(|p| p.solve()).map_err(|e| e.to_string())?;
        Ok(sol.trajectory.to_csv(true) + &sol.summary_csv())
    };
    let oloc_same = oloc()? == oloc()?;
    let small = CcdConfig { bins: 1, population: 4, generations: 2, ..Default::default() };
    let ccd = || -> Result<String, String> {
        let mut s = Scenario::default();
        s.oloc.horizon = 20.0;
        s.oloc.segments = 10;
        s.ccd = small.clone();
        let ev = s.evaluator(s.ccd_bins().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ev.insert_surface(&BladeDesign::baseline(), ctx.surface());
        let r = ccd_run(&ev, &s.ccd).map_err(|e| e.to_string())?;
        Ok(r.history_csv().map_err(|e| e.to_string())? + &r.summary_csv().map_err(|e| e.to_string())?)
    };
    let ccd_same = ccd()? == ccd()?;
    let layout = MooringLayout::oc3();
    let props = LineProperties::oc3();
    let (retrained, _) = train_surrogate(&props, &SurrogateConfig::for_layout(&props, &layout)).map_err(|e| e.to_string())?;
    let surrogate_same = retrained.to_text() == shipped_surrogate().to_text();
    Ok((
        oloc_same && ccd_same && surrogate_same,
        format!("oloc CSV identical: {oloc_same}, ccd history identical: {ccd_same}, retrained surrogate identical to shipped file: {surrogate_same}"),
    ))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("FOWT_CCD_ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let ctx = Ctx { surface: OnceLock::new(), ccd45: OnceLock::new() };
    let criteria: [(usize, &str, fn(&Ctx) -> Outcome); 12] = [
        (1, "structural sanity", c1),
        (2, "mooring surrogate", c2),
        (3, "BEM surface", c3),
        (4, "Weibull binning", c4),
        (5, "OLOC correctness", c5),
        (6, "operating regimes", c6),
        (7, "power curve", c7),
        (9, "desk-scale CCD", c9),
        (10, "local optimality", c10),
        (8, "stress cross-study", c8),
        (11, "fatigue", c11),
        (12, "determinism", c12),
    ];
    let mut lines = Vec::new();
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(|| f(&ctx))) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(p) => (false, format!("panic: {}", p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())),
        };
        let line = format!("criterion {n:>2} {} {name}: {detail} [{:.0} s]", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
        println!("{line}");
        lines.push((n, pass, line));
    }
    lines.sort_by_key(|l| l.0);
    let failed = lines.iter().filter(|l| !l.1).count();
    println!("\nacceptance summary: {} passed, {failed} failed", lines.len() - failed);
    for (_, _, l) in &lines {
        println!("  {l}");
    }
    if failed > 0 && std::env::var("FOWT_CCD_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
