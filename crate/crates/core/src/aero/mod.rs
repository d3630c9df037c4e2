pub mod bem;
pub mod blade;
pub mod loads;
pub mod polar;
pub mod surface;

pub use bem::{bem_solve, BemResult};
pub use blade::{blade_geometry, reference_geometry, BladeDesign, BladeGeometry};
pub use loads::{aero_loads, AeroLoads, RotorGeometry};
pub use polar::{nrel5mw_polars, Polar};
pub use surface::{build_coefficient_surface, design_surface, CoefficientSurface, SurfaceGrid};
