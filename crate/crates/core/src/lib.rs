//! Electric-drive models, local observability conditions and an open-loop
//! extended Kalman filter for sensorless drives.

pub mod cli;
pub mod ekf;
pub mod error;
pub mod machines;
pub mod model;
pub mod observability;
pub mod sim;

pub use error::{Error, Result};
pub use machines::{DriveModel, Machine};
pub use model::StateSpaceModel;
