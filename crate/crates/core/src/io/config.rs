//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{DEFAULT_MIN_SEPARATION, DEFAULT_PEAK_THRESHOLD};
use crate::eigen::PotentialPhase;
use crate::error::{Error, Result};
use crate::field::{Axis, GridSpec, Normalization};
use crate::model::{Potential, SystemParams};
use crate::wavegroup::{BarrierWavegroupConfig, WellWavegroupConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    InfiniteWell,
    /// Square potential with negative height.
    FiniteWell,
    /// Square potential with non-negative height.
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavegroupConfig {
    Scattering(BarrierWavegroupConfig),
    Well(WellWavegroupConfig),
}

/// A `(t2, x2)` slice with the particle fixed at `(x1, t1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub x1: f64,
    pub t1: f64,
    pub x2: Axis,
    pub t2: Axis,
}

/// An `(x1, x2)` grid at separate times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoTimeSpec {
    pub t1: f64,
    pub t2: f64,
}

/// Scattering coefficients over a sweep of relative energy at fixed partner velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSweep {
    pub v2: f64,
    pub e_rel: Axis,
}

/// Fringe measurement along `x1` at fixed `x2` and synchronous time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSpec {
    pub t: f64,
    pub x2: f64,
    pub x1: Axis,
}

/// Reflected peak height over a range of half widths at synchronous time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Type2Spec {
    pub t: f64,
    pub half_width: Axis,
}

fn default_threshold() -> f64 {
    DEFAULT_PEAK_THRESHOLD
}

fn default_separation() -> usize {
    DEFAULT_MIN_SEPARATION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_threshold")]
    pub peak_threshold: f64,
    #[serde(default = "default_separation")]
    pub min_separation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringe: Option<FringeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type2: Option<Type2Spec>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            peak_threshold: DEFAULT_PEAK_THRESHOLD,
            min_separation: DEFAULT_MIN_SEPARATION,
            fringe: None,
            type2: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Pgm,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn pgm(self) -> bool {
        matches!(self, OutputFormat::Pgm | OutputFormat::Both)
    }
}

fn default_prefix() -> String {
    "twotime".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub normalization: Normalization,
    /// Path prefix of every artifact.
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            format: OutputFormat::default(),
            normalization: Normalization::default(),
            prefix: default_prefix(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name of the preset this configuration came from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub system: SystemParams,
    pub scenario: Scenario,
    pub wavegroup: WavegroupConfig,
    pub grid: GridSpec,
    /// Synchronous snapshot times.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Window velocity: the grid at time `t` is shifted by `drift·t` on both axes.
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub slices: Vec<SliceSpec>,
    #[serde(default)]
    pub two_time: Vec<TwoTimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<CoeffSweep>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub phase: PotentialPhase,
    /// Finite-difference step override for conservation checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Validation { field, message } => Error::Validation {
            field: format!("{prefix}.{field}"),
            message,
        },
        Error::InvalidParameter { field, reason } => Error::Validation {
            field: format!("{prefix}.{field}"),
            message: reason,
        },
        other => other,
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, "must be finite"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(|e| prefixed("system", e))?;
        match (&self.wavegroup, self.scenario, self.system.potential) {
            (WavegroupConfig::Well(w), Scenario::InfiniteWell, Potential::InfiniteWell) => {
                w.validate().map_err(|e| prefixed("wavegroup.well", e))?
            }
            (
                WavegroupConfig::Scattering(b),
                Scenario::FiniteWell | Scenario::Barrier,
                Potential::Square { height },
            ) => {
                b.validate().map_err(|e| prefixed("wavegroup.scattering", e))?;
                if self.scenario == Scenario::FiniteWell && height >= 0.0 {
                    return Err(Error::validation(
                        "system.potential.height",
                        "a finite well needs a negative height",
                    ));
                }
                if self.scenario == Scenario::Barrier && height < 0.0 {
                    return Err(Error::validation(
                        "system.potential.height",
                        "a barrier needs a non-negative height",
                    ));
                }
            }
            (WavegroupConfig::Well(_), _, _) => {
                return Err(Error::validation(
                    "wavegroup",
                    "a well wavegroup needs the infinite_well scenario and potential",
                ))
            }
            (WavegroupConfig::Scattering(_), _, _) => {
                return Err(Error::validation(
                    "wavegroup",
                    "a scattering wavegroup needs the finite_well or barrier scenario with a square potential",
                ))
            }
        }
        self.grid.x1.validate("grid.x1")?;
        self.grid.x2.validate("grid.x2")?;
        for (i, &t) in self.times.iter().enumerate() {
            finite(&format!("times[{i}]"), t)?;
        }
        finite("drift", self.drift)?;
        for (i, s) in self.slices.iter().enumerate() {
            finite(&format!("slices[{i}].x1"), s.x1)?;
            finite(&format!("slices[{i}].t1"), s.t1)?;
            s.x2.validate(&format!("slices[{i}].x2"))?;
            s.t2.validate(&format!("slices[{i}].t2"))?;
        }
        for (i, s) in self.two_time.iter().enumerate() {
            finite(&format!("two_time[{i}].t1"), s.t1)?;
            finite(&format!("two_time[{i}].t2"), s.t2)?;
        }
        if let Some(c) = &self.coeffs {
            if !matches!(self.system.potential, Potential::Square { .. }) {
                return Err(Error::validation(
                    "coeffs",
                    "coefficient sweeps need a square potential",
                ));
            }
            finite("coeffs.v2", c.v2)?;
            c.e_rel.validate("coeffs.e_rel")?;
            if c.e_rel.lo <= 0.0 {
                return Err(Error::validation(
                    "coeffs.e_rel.lo",
                    "relative energies must be positive",
                ));
            }
        }
        let a = &self.analysis;
        if !(0.0..=1.0).contains(&a.peak_threshold) {
            return Err(Error::validation("analysis.peak_threshold", "must lie in [0, 1]"));
        }
        if a.min_separation == 0 {
            return Err(Error::validation("analysis.min_separation", "must be at least 1"));
        }
        if let Some(f) = &a.fringe {
            finite("analysis.fringe.t", f.t)?;
            finite("analysis.fringe.x2", f.x2)?;
            f.x1.validate("analysis.fringe.x1")?;
        }
        if let Some(t2) = &a.type2 {
            if !matches!(self.wavegroup, WavegroupConfig::Scattering(_)) {
                return Err(Error::validation("analysis.type2", "needs a scattering wavegroup"));
            }
            finite("analysis.type2.t", t2.t)?;
            t2.half_width.validate("analysis.type2.half_width")?;
            if t2.half_width.lo <= 0.0 {
                return Err(Error::validation(
                    "analysis.type2.half_width.lo",
                    "half widths must be positive",
                ));
            }
        }
        if let Some(h) = self.fd_step {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::validation("fd_step", "must be positive"));
            }
        }
        if self.output.prefix.is_empty() {
            return Err(Error::validation("output.prefix", "must not be empty"));
        }
        Ok(())
    }

    /// Grid window for synchronous time `t`.
    pub fn grid_at(&self, t: f64) -> GridSpec {
        self.two_time_grid(t, t)
    }

    /// Grid window for separate times: each axis moves with its own time label.
    pub fn two_time_grid(&self, t1: f64, t2: f64) -> GridSpec {
        if self.drift == 0.0 {
            return self.grid;
        }
        GridSpec {
            x1: self.grid.x1.shifted(self.drift * t1),
            x2: self.grid.x2.shifted(self.drift * t2),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// SHA-256 of the compact JSON serialization, lowercase hex. Output
    /// settings are excluded so the hash identifies the computation only.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            output: OutputSpec::default(),
            ..self.clone()
        };
        let text = serde_json::to_string(&canonical).expect("configuration serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parses and validates a configuration from JSON text.
pub fn parse_config(text: &str, source_name: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        Error::Parse {
            source_name: source_name.to_string(),
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_config(&text, &path.display().to_string())
}
