//! Open-loop optimal control: direct collocation and an interior-point NLP solver.

pub mod banded;
pub mod ipm;
pub mod problem;
pub mod transcription;

pub use ipm::{solve, IpmOptions, IpmResult, Nlp, NlpEval, SolveStatus};
pub use transcription::{Collocation, CollocationSpec, PointModel};
pub use problem::{check_feasibility, consistency_errors, inner_objective, trim, FeasibilityReport, OlocConfig, OlocProblem, OlocSolution, Trim, TurbineModel};
