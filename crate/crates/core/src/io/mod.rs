//! Run configuration, named presets, and grid file formats.

pub mod config;
pub mod format;
pub mod presets;

pub use config::{load_config, parse_config, RunConfig, Scenario};
pub use presets::{preset, PRESET_NAMES};
