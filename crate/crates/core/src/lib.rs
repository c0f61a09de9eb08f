//! Two-time wavefunctions for two bodies interacting through a square
//! potential or an infinite well.

pub mod analysis;
pub mod eigen;
pub mod error;
pub mod field;
pub mod io;
mod linalg;
pub mod model;
pub mod state;
pub mod wavegroup;

pub use error::{Error, ErrorCategory, Result};
pub use model::{LabPoint, Potential, SystemParams, VelocityPair};
pub use state::{Region, TwoBodyState};
