//! Outer-loop plant optimisation over tower (and optionally blade) variables.
pub mod cmaes;
pub mod design;
pub mod evaluate;
pub mod run;

pub use cmaes::{cmaes_run, CmaOptions, CmaResult, CmaState, CmaStatus, Evaluation, HistoryEntry, SearchSpace};
pub use design::{DesignMode, PlantDesign, TowerBox};
pub use evaluate::{aggregate, AepResult, BinResult, PlantEvaluator, HOURS_PER_YEAR, PENALTY_J_OUT};
pub use run::{ccd_run, sensitivity_csv, sensitivity_scan, sensitivity_scan_with, CcdConfig, CcdReport, EvaluatedDesign, SensitivityRow};
