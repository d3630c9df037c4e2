pub mod ad;
pub mod aero;
pub mod analysis;
pub mod ccd;
pub mod environment;
pub mod error;
pub mod model;
pub mod mooring;
pub mod oloc;

pub use error::{Error, Result};
