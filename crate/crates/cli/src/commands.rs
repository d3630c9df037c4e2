use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fowt_core::analysis::{cross_constraint_study, cross_study_csv, fatigue_study, power_curve as build_curve, CurveMode, PowerCurve, Scenario};
use fowt_core::ccd::{ccd_run, sensitivity_csv, sensitivity_scan, PlantDesign, PlantEvaluator};
use fowt_core::environment::shear_adjust_default;
use fowt_core::model::integrate::OdeOptions;
use fowt_core::model::plant::shipped_surrogate;
use fowt_core::model::{simulate_forward, ControlSchedule, Plant, Trajectory};
use fowt_core::mooring::{train_surrogate, SurrogateConfig};
use fowt_core::oloc::{consistency_errors, OlocProblem};

use crate::run_dir::RunDir;
use crate::CliError;

type Outcome = Result<(), CliError>;

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn design_or_default(scenario: &Scenario, path: Option<&PathBuf>) -> Result<PlantDesign, CliError> {
    match path {
        Some(p) => PlantDesign::from_toml(&read_input(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => Ok(PlantDesign { tower: scenario.model.tower, blade: scenario.model.blade.clone(), mode: scenario.ccd.mode }),
    }
}

fn evaluator(scenario: &Scenario) -> Result<PlantEvaluator, CliError> {
    Ok(scenario.evaluator(scenario.ccd_bins()?)?)
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn mean_over(times: &[f64], v: &[f64]) -> f64 {
    let span = times[times.len() - 1] - times[0];
    if span <= 0.0 {
        return v[0];
    }
    times.windows(2).zip(v.windows(2)).map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0])).sum::<f64>() / span
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Bin mean wind speed at the baseline hub height [m/s].
    #[arg(long, default_value_t = 11.0)]
    pub bin: f64,
    /// Simulated time [s] (defaults to the OLOC horizon, or the control file's span).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Trajectory CSV with control-rate columns (e.g. an oloc trajectory.csv).
    #[arg(long)]
    pub controls: Option<PathBuf>,
    /// Output sample interval [s].
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
}

pub fn simulate(scenario: &Scenario, run: &mut RunDir, a: &SimulateArgs) -> Outcome {
    if !(a.bin > 0.0) || !(a.dt > 0.0) || a.duration.is_some_and(|d| !(d > 0.0)) {
        return Err(CliError::Usage("--bin, --dt and --duration must be positive".into()));
    }
    let ev = evaluator(scenario)?;
    let plant = scenario.plant(&ev)?;
    let (sched, x0, t_end) = match &a.controls {
        Some(p) => {
            let tr = Trajectory::from_csv(&read_input(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let sched = ControlSchedule::new(tr.times.clone(), tr.controls.clone()).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let t_end = a.duration.unwrap_or(tr.times[tr.times.len() - 1]);
            (sched, tr.states[0], t_end)
        }
        None => {
            let t_end = a.duration.unwrap_or(scenario.oloc.horizon);
            let env = ev.environment(&plant, a.bin, t_end)?;
            let trim = OlocProblem::new(&plant, env, scenario.oloc.with_horizon(t_end))?.trim()?;
            (ControlSchedule::constant([0.0; 2], 0.0, t_end), trim.state, t_end)
        }
    };
    let env = ev.environment(&plant, a.bin, t_end)?;
    let n = (t_end / a.dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
    let tr = simulate_forward(&plant, &sched, &env, &x0, 0.0, t_end, &times, &OdeOptions::default())?;
    run.write_str("trajectory.csv", &tr.to_csv(true))?;
    let pitch_max = tr.states.iter().map(|x| x[2].abs()).fold(0.0, f64::max).to_degrees();
    let sigma_max = tr.sigma.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s)) * 1e-6;
    let rows = vec![vec![
        a.bin.to_string(),
        shear_adjust_default(a.bin, plant.tower.l).to_string(),
        t_end.to_string(),
        mean_over(&tr.times, &tr.p_u).to_string(),
        sigma_max.to_string(),
        pitch_max.to_string(),
    ]];
    run.write_str("summary.csv", &csv_text(&["u_mean", "u_hub", "duration", "mean_power", "max_sigma_mpa", "max_platform_pitch_deg"], &rows))?;
    println!("simulated {t_end} s at {} m/s: mean power {:.4} MW", a.bin, mean_over(&tr.times, &tr.p_u) * 1e-6);
    Ok(())
}

#[derive(Args, Debug)]
pub struct OlocArgs {
    /// Bin mean wind speed at the baseline hub height [m/s].
    #[arg(long)]
    pub bin: f64,
    /// Plant design TOML (defaults to the scenario's model).
    #[arg(long)]
    pub design: Option<PathBuf>,
}

pub fn oloc(scenario: &Scenario, run: &mut RunDir, a: &OlocArgs) -> Outcome {
    if !(a.bin > 0.0) {
        return Err(CliError::Usage("--bin must be positive".into()));
    }
    let ev = evaluator(scenario)?;
    let plant = ev.plant(&design_or_default(scenario, a.design.as_ref())?)?;
    let env = ev.environment(&plant, a.bin, scenario.oloc.horizon)?;
    let prob = OlocProblem::new(&plant, env, scenario.oloc.clone())?;
    let sol = prob.solve()?;
    run.write_str("trajectory.csv", &sol.trajectory.to_csv(true))?;
    run.write_str("summary.csv", &sol.summary_csv())?;
    run.write_str("solver_log.csv", &sol.solver_log)?;
    let re = prob.reintegrate(&sol)?;
    let err = consistency_errors(&plant, &sol.trajectory, &re);
    let names = Trajectory::state_names();
    let rows: Vec<Vec<String>> = names.iter().zip(err).map(|(n, e)| vec![n.to_string(), e.to_string()]).collect();
    run.write_str("consistency.csv", &csv_text(&["state", "normalized_rms_error"], &rows))?;
    println!("oloc {} m/s: {} after {} iterations, P_out {:.4} MW, feasible {}", a.bin, sol.status, sol.iterations, sol.p_out * 1e-6, sol.feasible);
    if !sol.feasible {
        return Err(CliError::Runtime(format!("OLOC solution infeasible ({}, max violation {:.3e})", sol.status, sol.feasibility.max_violation())));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct CcdArgs {
    /// Design variables: tower-only or tower-and-blades.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
}

impl CcdArgs {
    pub fn overrides(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        if let Some(m) = &self.mode {
            v.push(("ccd.mode".into(), format!("\"{m}\"")));
        }
        if let Some(s) = self.seed {
            v.push(("ccd.seed".into(), s.to_string()));
        }
        if let Some(g) = self.generations {
            v.push(("ccd.generations".into(), g.to_string()));
        }
        if let Some(p) = self.population {
            v.push(("ccd.population".into(), p.to_string()));
        }
        v
    }
}

pub fn ccd(scenario: &Scenario, run: &mut RunDir, _a: &CcdArgs) -> Outcome {
    let ev = evaluator(scenario)?;
    let report = ccd_run(&ev, &scenario.ccd)?;
    run.write_str("history.csv", &report.history_csv()?)?;
    run.write_str("best_design.toml", &report.best_design_toml()?)?;
    run.write_str("summary.csv", &report.summary_csv()?)?;
    println!(
        "ccd {}: AEP {:.4} -> {:.4} GWh ({:+.3}%), {} generations, {}",
        report.mode.as_str(),
        report.baseline_result.aep_gwh(),
        report.best_result.aep_gwh(),
        100.0 * report.aep_gain(),
        report.cma.generations,
        report.cma.status.as_str()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Steady,
    Varied,
}

#[derive(Args, Debug)]
pub struct PowerCurveArgs {
    /// Plant design TOML (defaults to the scenario's model).
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Steady)]
    pub profile: Profile,
    /// Stress limits [MPa] to simulate the design under; writes the cross-study table.
    #[arg(long, value_delimiter = ',')]
    pub sim_limits: Vec<f64>,
    /// Stress limit [MPa] the design was optimized for (label in the cross-study table).
    #[arg(long)]
    pub design_limit: Option<f64>,
}

fn curve_summary(curve: &PowerCurve, aep: f64, p_rated: f64) -> Vec<String> {
    let slope = curve.loglog_slope(1.0, 0.9 * p_rated).map_or("nan".into(), |s| s.to_string());
    let flagged = curve.points.iter().filter(|p| p.flagged).count();
    vec![curve.sigma_max_mpa.to_string(), (aep * 1e-9).to_string(), slope, flagged.to_string()]
}

pub fn power_curve(scenario: &Scenario, run: &mut RunDir, a: &PowerCurveArgs) -> Outcome {
    let ev = scenario.evaluator(scenario.full_bins()?)?;
    let plant: Plant = ev.plant(&design_or_default(scenario, a.design.as_ref())?)?;
    let speeds = scenario.wind.speeds();
    let duration = scenario.wind.power_curve_duration;
    let p_rated = scenario.oloc.power_max;
    let header = ["sigma_max_mpa", "aep_gwh", "region2_loglog_slope", "flagged_points"];
    if a.sim_limits.is_empty() {
        let mode = match a.profile {
            Profile::Steady => CurveMode::Steady,
            Profile::Varied => CurveMode::Varied { template: scenario.wind.template(), seed: scenario.wind.seed },
        };
        let curve = build_curve(&plant, &scenario.oloc, &speeds, duration, &mode)?;
        let aep = curve.aep(&ev.bins, plant.tower.l);
        run.write_str("power_curve.csv", &curve.to_csv()?)?;
        run.write_str("summary.csv", &csv_text(&header, &[curve_summary(&curve, aep, p_rated)]))?;
        println!("power curve at {} MPa: AEP {:.4} GWh", curve.sigma_max_mpa, aep * 1e-9);
    } else {
        if a.profile != Profile::Steady {
            return Err(CliError::Usage("the cross study uses steady wind; drop --profile".into()));
        }
        let label = a.design_limit.unwrap_or(scenario.oloc.sigma_max_mpa);
        let cells = cross_constraint_study(&[(label, &plant)], &a.sim_limits, &scenario.oloc, &speeds, duration, &ev.bins)?;
        run.write_str("cross_study.csv", &cross_study_csv(&cells)?)?;
        let rows: Vec<Vec<String>> = cells.iter().map(|c| curve_summary(&c.curve, c.aep, p_rated)).collect();
        run.write_str("summary.csv", &csv_text(&header, &rows))?;
        for c in &cells {
            println!("design {} MPa simulated at {} MPa: AEP {:.4} GWh", c.design_limit_mpa, c.sim_limit_mpa, c.aep * 1e-9);
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    /// Plant design TOML, e.g. a ccd best_design.toml (defaults to the scenario's model).
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Relative perturbation (defaults to ccd.sensitivity_delta).
    #[arg(long)]
    pub delta: Option<f64>,
}

pub fn sensitivity(scenario: &Scenario, run: &mut RunDir, a: &SensitivityArgs) -> Outcome {
    let delta = a.delta.unwrap_or(scenario.ccd.sensitivity_delta);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::Usage(format!("--delta must lie in (0, 1), got {delta}")));
    }
    let design = design_or_default(scenario, a.design.as_ref())?;
    let ev = evaluator(scenario)?;
    let star = ev.evaluate(&design);
    if star.penalized {
        return Err(CliError::Runtime(format!("design cannot be evaluated: {}", star.reason.unwrap_or_default())));
    }
    let rows = sensitivity_scan(&ev, &design, &star, delta, &scenario.ccd.tower_box);
    run.write_str("sensitivity.csv", &sensitivity_csv(&rows)?)?;
    let worst = rows.iter().filter(|r| !r.penalized).map(|r| r.dj_rel).fold(f64::NEG_INFINITY, f64::max);
    let mut s = String::from("quantity,value\n");
    let _ = writeln!(s, "aep_gwh,{}", star.aep_gwh());
    let _ = writeln!(s, "delta,{delta}");
    let _ = writeln!(s, "max_dj_rel_pct,{worst}");
    run.write_str("summary.csv", &s)?;
    println!("sensitivity around AEP {:.4} GWh: largest relative J_out increase {:.4}%", star.aep_gwh(), worst);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WaveCase {
    Off,
    On,
    Both,
}

#[derive(Args, Debug)]
pub struct FatigueArgs {
    /// Plant design TOML (defaults to the scenario's model).
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Irregular waves from [wave] off, on, or both for a comparison.
    #[arg(long, value_enum, default_value_t = WaveCase::Both)]
    pub waves: WaveCase,
}

pub fn fatigue(scenario: &Scenario, run: &mut RunDir, a: &FatigueArgs) -> Outcome {
    let ev = evaluator(scenario)?;
    let plant = ev.plant(&design_or_default(scenario, a.design.as_ref())?)?;
    let spec = scenario.fatigue.spec();
    let wave = scenario.wave.spec();
    let cases: Vec<(&str, Option<&fowt_core::environment::WaveSpec>)> = match a.waves {
        WaveCase::Off => vec![("waves_off", None)],
        WaveCase::On => vec![("waves_on", Some(&wave))],
        WaveCase::Both => vec![("waves_off", None), ("waves_on", Some(&wave))],
    };
    let mut rows = Vec::new();
    for (name, w) in cases {
        let study = fatigue_study(&ev, &plant, w, &spec, scenario.fatigue.sample_dt)?;
        let peak = study.bins.iter().flat_map(|b| b.sigma.iter()).fold(f64::NEG_INFINITY, |m, &s| m.max(s)) * 1e-6;
        rows.push(vec![
            name.to_string(),
            w.map_or("0".into(), |w| w.hs.to_string()),
            w.map_or("0".into(), |w| w.tp.to_string()),
            study.required_mpa.to_string(),
            study.result.lifetime_damage.to_string(),
            study.result.cycle_count.to_string(),
            peak.to_string(),
        ]);
        let mut s = String::from("u_mean,prob,t,sigma_mpa\n");
        for b in &study.bins {
            for (t, sig) in b.times.iter().zip(&b.sigma) {
                let _ = writeln!(s, "{},{},{},{}", b.u_mean, b.prob, t, sig * 1e-6);
            }
        }
        run.write_str(&format!("stress_{name}.csv"), &s)?;
        println!("{name}: required ultimate strength {:.3} MPa", study.required_mpa);
    }
    run.write_str("fatigue.csv", &csv_text(&["case", "hs", "tp", "required_mpa", "lifetime_damage", "cycles", "max_sigma_mpa"], &rows))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainMooringArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

pub fn train_mooring(scenario: &Scenario, run: &mut RunDir, a: &TrainMooringArgs) -> Outcome {
    let m = &scenario.model.mooring;
    let mut cfg = SurrogateConfig::for_layout(&m.line, &m.layout);
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.train.max_epochs = e;
    }
    let (sur, rep) = train_surrogate(&m.line, &cfg)?;
    let text = sur.to_text();
    run.write_str("mooring_surrogate.txt", &text)?;
    let same = text == shipped_surrogate().to_text();
    let rows = vec![
        vec!["suspended".into(), rep.suspended.epochs.to_string(), rep.suspended.train_mse.to_string(), rep.suspended.val_mse.to_string(), rep.max_rel_error_suspended[0].to_string(), rep.max_rel_error_suspended[1].to_string()],
        vec!["seabed".into(), rep.seabed.epochs.to_string(), rep.seabed.train_mse.to_string(), rep.seabed.val_mse.to_string(), rep.max_rel_error_seabed[0].to_string(), rep.max_rel_error_seabed[1].to_string()],
    ];
    run.write_str("training.csv", &csv_text(&["regime", "epochs", "train_mse", "val_mse", "max_rel_error_fh", "max_rel_error_fv"], &rows))?;
    println!("surrogate trained: max relative error {:.3e}, identical to shipped file: {same}", rep.max_rel_error());
    Ok(())
}
