//! Catenary mooring statics, the two-regime neural surrogate and platform load aggregation.

pub mod catenary;
pub mod layout;
pub mod mlp;
pub mod surrogate;

pub use catenary::{regime_boundary, solve_catenary, CatenarySolution, LineProperties, Regime};
pub use layout::{MooringGeometry, MooringLayout, MooringLoad, Pose};
pub use surrogate::{train_surrogate, Domain, MooringSurrogate, SurrogateConfig, SurrogateReport};
