mod commands;
mod run_dir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fowt_core::analysis::{Scenario, SCENARIO_ENV};

use run_dir::RunDir;

#[derive(Parser, Debug)]
#[command(name = "fowt-ccd", version, about = "Floating wind turbine control co-design")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Scenario TOML (defaults to $FOWT_CCD_SCENARIO, then built-in defaults).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Override a scenario value, e.g. --set oloc.sigma_max_mpa=90 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Parent directory for the run directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run directory name (defaults to <command>-<timestamp>).
    #[arg(long, global = true)]
    run_name: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward simulation from trim with zero control rates or a control-rate CSV.
    Simulate(commands::SimulateArgs),
    /// Open-loop optimal control for one wind bin.
    Oloc(commands::OlocArgs),
    /// Nested control co-design of the tower (and optionally the blades).
    Ccd(commands::CcdArgs),
    /// Power curve over the scenario speeds, optionally crossed with several stress limits.
    PowerCurve(commands::PowerCurveArgs),
    /// +/- perturbation scan of the outer objective around a design.
    Sensitivity(commands::SensitivityArgs),
    /// Ultimate strength required for the fatigue life, with or without waves.
    Fatigue(commands::FatigueArgs),
    /// Retrain the mooring surrogate for the scenario's line and layout.
    TrainMooring(commands::TrainMooringArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Oloc(_) => "oloc",
            Command::Ccd(_) => "ccd",
            Command::PowerCurve(_) => "power-curve",
            Command::Sensitivity(_) => "sensitivity",
            Command::Fatigue(_) => "fatigue",
            Command::TrainMooring(_) => "train-mooring",
        }
    }

    fn overrides(&self) -> Vec<(String, String)> {
        match self {
            Command::Ccd(a) => a.overrides(),
            _ => Vec::new(),
        }
    }
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "scenario",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<fowt_core::Error> for CliError {
    fn from(e: fowt_core::Error) -> Self {
        match e {
            fowt_core::Error::Scenario(_) => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn report(err: &CliError, command: Option<&str>, run_dir: Option<&std::path::Path>) {
    let record = serde_json::json!({
        "error": {
            "kind": err.kind(),
            "exit_code": err.code(),
            "command": command,
            "message": err.message(),
            "run_dir": run_dir.map(|p| p.display().to_string()),
        }
    });
    eprintln!("{record}");
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, CliError> {
    set.iter()
        .map(|s| match s.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(CliError::Usage(format!("--set expects KEY=VALUE, got '{s}'"))),
        })
        .collect()
}

fn load_scenario(global: &GlobalArgs, extra: Vec<(String, String)>) -> Result<(Scenario, String), CliError> {
    let mut overrides = parse_overrides(&global.set)?;
    overrides.extend(extra);
    let path = global.scenario.clone().or_else(|| std::env::var_os(SCENARIO_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    match path {
        Some(p) => Ok((Scenario::load(&p, &overrides)?, p.display().to_string())),
        None => {
            let text = Scenario::default().to_toml()?;
            let s = Scenario::from_toml_with(&text, &overrides)?;
            s.validate()?;
            Ok((s, "defaults".into()))
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                report(&CliError::Usage(e.to_string().lines().next().unwrap_or("").to_string()), None, None);
            }
            return ExitCode::from(code as u8);
        }
    };
    let name = cli.command.name();
    let (scenario, source) = match load_scenario(&cli.global, cli.command.overrides()) {
        Ok(s) => s,
        Err(e) => {
            report(&e, Some(name), None);
            return ExitCode::from(e.code());
        }
    };
    let parent = cli.global.out.clone().unwrap_or_else(|| PathBuf::from(&scenario.output.dir));
    let run_name = cli.global.run_name.clone().or_else(|| scenario.output.run_name.clone());
    let mut run = match RunDir::create(&parent, name, run_name.as_deref(), &argv, &source, &scenario) {
        Ok(r) => r,
        Err(e) => {
            report(&e, Some(name), None);
            return ExitCode::from(e.code());
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => commands::simulate(&scenario, &mut run, a),
        Command::Oloc(a) => commands::oloc(&scenario, &mut run, a),
        Command::Ccd(a) => commands::ccd(&scenario, &mut run, a),
        Command::PowerCurve(a) => commands::power_curve(&scenario, &mut run, a),
        Command::Sensitivity(a) => commands::sensitivity(&scenario, &mut run, a),
        Command::Fatigue(a) => commands::fatigue(&scenario, &mut run, a),
        Command::TrainMooring(a) => commands::train_mooring(&scenario, &mut run, a),
    };
    let finished = run.finish(outcome.as_ref().err());
    match (outcome, finished) {
        (Ok(()), Ok(())) => {
            println!("run directory: {}", run.path.display());
            ExitCode::SUCCESS
        }
        (Err(e), _) | (Ok(()), Err(e)) => {
            report(&e, Some(name), Some(&run.path));
            ExitCode::from(e.code())
        }
    }
}
