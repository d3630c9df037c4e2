use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("out of envelope: {0}")]
    OutOfEnvelope(String),
    #[error("root find failed for {what}: residual {residual:.3e}")]
    RootFind { what: String, residual: f64 },
    #[error("surrogate query outside training domain: l = {l:.3}, h = {h:.3}")]
    Extrapolation { l: f64, h: f64 },
    #[error("surrogate training failed: max relative error {max_rel_err:.3e} above {limit:.1e}")]
    TrainingFailure { max_rel_err: f64, limit: f64 },
    #[error("model error: {0}")]
    Model(String),
    #[error("integrator step size underflow at t = {t:.6}, state {state:?}")]
    Stiffness { t: f64, state: Vec<f64> },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible plant: {0}")]
    InfeasiblePlant(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
