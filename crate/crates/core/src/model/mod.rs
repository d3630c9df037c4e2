pub mod dynamics;
pub mod integrate;
pub mod plant;
pub mod platform;
pub mod rigid;
pub mod simulate;
pub mod tower;

pub use dynamics::{load_set, outputs, rates, state_derivative, static_equilibrium, EnvSample, LoadSet, Outputs, NU, NX};
pub use plant::{LoadSwitches, ModelParams, MooringKind, MooringModel, Plant};
pub use simulate::{simulate_forward, ControlSchedule, Environment, Trajectory};
pub use tower::{tower_properties, tower_stress, TowerDesign, TowerProperties};
