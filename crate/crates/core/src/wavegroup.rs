//! Gaussian superpositions of eigenstates.
//!
//! The velocity integrals are replaced by weighted sums over uniform nodes. Node
//! weights include the node spacing, so raw amplitudes approximate the integral
//! and do not scale with the node count.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, Mode, PotentialPhase};
use crate::error::{Error, Result};
use crate::model::{LabPoint, Potential, SystemParams, VelocityPair};
use crate::state::{StateBuilder, Support, TwoBodyState};

/// Modes whose Gaussian weight falls below this are dropped.
pub const MODE_WEIGHT_CUTOFF: f64 = 1e-8;

fn default_nodes() -> usize {
    64
}

fn default_span() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierWavegroupConfig {
    pub v1_center: f64,
    pub v1_width: f64,
    pub v2_center: f64,
    pub v2_width: f64,
    #[serde(default = "default_nodes")]
    pub n_v1: usize,
    #[serde(default = "default_nodes")]
    pub n_v2: usize,
    /// Half range of each velocity grid in units of its width.
    #[serde(default = "default_span")]
    pub span: f64,
}

impl BarrierWavegroupConfig {
    pub fn new(v1_center: f64, v1_width: f64, v2_center: f64, v2_width: f64) -> Self {
        BarrierWavegroupConfig {
            v1_center,
            v1_width,
            v2_center,
            v2_width,
            n_v1: default_nodes(),
            n_v2: default_nodes(),
            span: default_span(),
        }
    }

    pub fn with_nodes(self, n_v1: usize, n_v2: usize) -> Self {
        BarrierWavegroupConfig { n_v1, n_v2, ..self }
    }

    pub fn center(&self) -> VelocityPair {
        VelocityPair::new(self.v1_center, self.v2_center)
    }

    pub fn validate(&self) -> Result<()> {
        finite("v1_center", self.v1_center)?;
        finite("v2_center", self.v2_center)?;
        positive("v1_width", self.v1_width)?;
        positive("v2_width", self.v2_width)?;
        positive("span", self.span)?;
        at_least_two("n_v1", self.n_v1)?;
        at_least_two("n_v2", self.n_v2)
    }

    /// Quadrature nodes, partner velocity major, both ascending.
    pub fn nodes(&self) -> Vec<VelocityNode> {
        let v1 = gaussian_nodes(self.v1_center, self.v1_width, self.n_v1, self.span, false);
        let v2 = gaussian_nodes(self.v2_center, self.v2_width, self.n_v2, self.span, false);
        let mut out = Vec::with_capacity(v1.len() * v2.len());
        for &(b, wb) in &v2 {
            for &(a, wa) in &v1 {
                out.push(VelocityNode {
                    velocities: VelocityPair::new(a, b),
                    weight: wb * wa,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellWavegroupConfig {
    /// Center `n0` of the mode distribution.
    pub mode_center: f64,
    /// Spatial width `Δx`; mode weights are `exp(-((n - n0)·π·Δx/D)²)`.
    pub mode_width: f64,
    pub v2_center: f64,
    pub v2_width: f64,
    #[serde(default = "default_nodes")]
    pub n_v2: usize,
    #[serde(default = "default_span")]
    pub span: f64,
    /// Inclusive mode range; defaults to every mode above the weight cutoff.
    #[serde(default)]
    pub modes: Option<[i64; 2]>,
}

impl WellWavegroupConfig {
    pub fn validate(&self) -> Result<()> {
        finite("mode_center", self.mode_center)?;
        finite("v2_center", self.v2_center)?;
        positive("mode_width", self.mode_width)?;
        positive("v2_width", self.v2_width)?;
        positive("span", self.span)?;
        at_least_two("n_v2", self.n_v2)?;
        if let Some([lo, hi]) = self.modes {
            if lo > hi {
                return Err(Error::validation("modes", format!("empty range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn mode_weight(&self, n: Mode, half_width: f64) -> f64 {
        let x = (f64::from(n.get()) - self.mode_center) * std::f64::consts::PI * self.mode_width / half_width;
        (-x * x).exp()
    }

    /// Modes kept in the sum, ascending, with their weights.
    pub fn modes(&self, half_width: f64) -> Result<Vec<(Mode, f64)>> {
        let reach = (-MODE_WEIGHT_CUTOFF.ln()).sqrt() * half_width / (std::f64::consts::PI * self.mode_width);
        let (lo, hi) = match self.modes {
            Some([lo, hi]) => (lo, hi),
            None => (
                ((self.mode_center - reach).floor() as i64).max(1),
                (self.mode_center + reach).ceil() as i64,
            ),
        };
        let mut out = Vec::new();
        for n in lo..=hi {
            let mode = Mode::new(n)?;
            let w = self.mode_weight(mode, half_width);
            if w >= MODE_WEIGHT_CUTOFF {
                out.push((mode, w));
            }
        }
        Ok(out)
    }

    /// Trapezoid nodes over the partner velocity.
    pub fn velocity_nodes(&self) -> Vec<(f64, f64)> {
        gaussian_nodes(self.v2_center, self.v2_width, self.n_v2, self.span, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityNode {
    pub velocities: VelocityPair,
    pub weight: f64,
}

/// A superposition evaluated as a single plane-wave expansion.
#[derive(Debug, Clone)]
pub struct Wavegroup {
    pub state: TwoBodyState,
    /// Nodes left out because the two velocities coincide.
    pub skipped: Vec<VelocityPair>,
}

impl Wavegroup {
    pub fn amplitude(&self, p: &LabPoint) -> C64 {
        self.state.amplitude(p)
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive, got {v}")))
    }
}

fn at_least_two(field: &str, n: usize) -> Result<()> {
    if n >= 2 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("need at least 2 nodes, got {n}")))
    }
}

/// Uniform nodes on `center ± span·width` with weights
/// `exp(-(v - center)²/(2·width²))/√width · spacing`, optionally with trapezoid
/// end corrections.
fn gaussian_nodes(center: f64, width: f64, n: usize, span: f64, trapezoid: bool) -> Vec<(f64, f64)> {
    let lo = center - span * width;
    let step = 2.0 * span * width / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let v = lo + step * i as f64;
            let z = (v - center) / width;
            let mut w = (-0.5 * z * z).exp() / width.sqrt() * step;
            if trapezoid && (i == 0 || i == n - 1) {
                w *= 0.5;
            }
            (v, w)
        })
        .collect()
}

fn square_support(params: &SystemParams) -> Support {
    Support::Square {
        half_width: params.half_width,
    }
}

/// Weighted sum of scattering eigenstates over arbitrary nodes, in node order.
pub fn barrier_wavegroup_from_nodes(
    nodes: &[VelocityNode],
    params: &SystemParams,
    phase: PotentialPhase,
) -> Result<Wavegroup> {
    let mut builder = StateBuilder::new(square_support(params), params);
    let mut skipped = Vec::new();
    for node in nodes {
        match eigen::push_barrier_channel(&mut builder, node.velocities, params, phase, node.weight) {
            Ok(()) => {}
            Err(Error::ZeroRelativeMotion) => skipped.push(node.velocities),
            Err(e) => return Err(e),
        }
    }
    Ok(Wavegroup {
        state: builder.build(),
        skipped,
    })
}

/// Gaussian wavegroup of scattering eigenstates over the particle and partner
/// velocity distributions of `cfg`.
pub fn barrier_wavegroup_state(
    cfg: &BarrierWavegroupConfig,
    params: &SystemParams,
    phase: PotentialPhase,
) -> Result<Wavegroup> {
    cfg.validate()?;
    if matches!(params.potential, Potential::InfiniteWell) {
        return Err(Error::validation(
            "potential",
            "scattering wavegroups need a finite square potential",
        ));
    }
    barrier_wavegroup_from_nodes(&cfg.nodes(), params, phase)
}

/// One-off evaluation of the scattering wavegroup at `p`. Builds the full
/// expansion on every call; build it once with [`barrier_wavegroup_state`] when
/// evaluating many points.
pub fn barrier_wavegroup(cfg: &BarrierWavegroupConfig, params: &SystemParams, p: &LabPoint) -> Result<C64> {
    Ok(barrier_wavegroup_state(cfg, params, PotentialPhase::Omitted)?.amplitude(p))
}

/// A mode and partner-velocity node of the infinite-well sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeNode {
    pub mode: Mode,
    pub v2: f64,
    pub weight: f64,
}

pub fn well_wavegroup_from_nodes(nodes: &[ModeNode], params: &SystemParams) -> Result<Wavegroup> {
    let mut builder = StateBuilder::new(
        Support::Well {
            half_width: params.half_width,
        },
        params,
    );
    for node in nodes {
        eigen::push_well_mode(&mut builder, node.mode, node.v2, params, node.weight)?;
    }
    Ok(Wavegroup {
        state: builder.build(),
        skipped: Vec::new(),
    })
}

/// Nodes of the infinite-well sum: partner velocity major, modes ascending.
pub fn well_nodes(cfg: &WellWavegroupConfig, params: &SystemParams) -> Result<Vec<ModeNode>> {
    cfg.validate()?;
    let modes = cfg.modes(params.half_width)?;
    let mut out = Vec::with_capacity(modes.len() * cfg.n_v2);
    for (v2, wv) in cfg.velocity_nodes() {
        for &(mode, wn) in &modes {
            out.push(ModeNode {
                mode,
                v2,
                weight: wv * wn,
            });
        }
    }
    Ok(out)
}

pub fn well_wavegroup_state(cfg: &WellWavegroupConfig, params: &SystemParams) -> Result<Wavegroup> {
    if !matches!(params.potential, Potential::InfiniteWell) {
        return Err(Error::validation("potential", "well wavegroups need the infinite well"));
    }
    well_wavegroup_from_nodes(&well_nodes(cfg, params)?, params)
}

/// One-off evaluation of the infinite-well wavegroup at `p`.
pub fn well_wavegroup(cfg: &WellWavegroupConfig, params: &SystemParams, p: &LabPoint) -> Result<C64> {
    Ok(well_wavegroup_state(cfg, params)?.amplitude(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn barrier_params() -> SystemParams {
        SystemParams::new(1.0, 5.0, 0.5, Potential::Square { height: 8.0 }).unwrap()
    }

    #[test]
    fn nodes_are_partner_major_ascending() {
        let cfg = BarrierWavegroupConfig::new(6.0, 0.6, 1.0, 0.4).with_nodes(3, 2);
        let nodes = cfg.nodes();
        let pairs: Vec<(f64, f64)> = nodes.iter().map(|n| (n.velocities.v2, n.velocities.v1)).collect();
        assert_eq!(pairs.len(), 6);
        assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        assert!((nodes[1].velocities.v1 - 6.0).abs() < 1e-15);
        assert!((nodes[0].velocities.v2 - (1.0 - 1.6)).abs() < 1e-15);
    }

    #[test]
    fn comoving_node_is_skipped() {
        let p = barrier_params();
        let nodes = [
            VelocityNode {
                velocities: VelocityPair::new(2.0, 2.0),
                weight: 1.0,
            },
            VelocityNode {
                velocities: VelocityPair::new(5.0, 1.0),
                weight: 1.0,
            },
        ];
        let wg = barrier_wavegroup_from_nodes(&nodes, &p, PotentialPhase::Omitted).unwrap();
        assert_eq!(wg.skipped, vec![VelocityPair::new(2.0, 2.0)]);
        assert_eq!(wg.state.len(), 5);
    }

    #[test]
    fn invalid_widths_name_the_field() {
        let mut cfg = BarrierWavegroupConfig::new(6.0, 0.6, 1.0, 0.4);
        cfg.v2_width = 0.0;
        match cfg.validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "v2_width"),
            other => panic!("unexpected {other:?}"),
        }
        cfg.v2_width = 0.4;
        cfg.n_v1 = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mode_truncation() {
        let cfg = WellWavegroupConfig {
            mode_center: 50.0,
            mode_width: 1.0 / 15.0,
            v2_center: 30.0,
            v2_width: 1.0,
            n_v2: 8,
            span: 4.0,
            modes: None,
        };
        let modes = cfg.modes(1.0).unwrap();
        assert!(modes.iter().all(|(_, w)| *w >= MODE_WEIGHT_CUTOFF));
        let first = modes.first().unwrap().0.get();
        let last = modes.last().unwrap().0.get();
        assert!(first < 50 && last > 50 && last - 50 == 50 - first);
        let below = WellWavegroupConfig {
            modes: Some([first as i64 - 1, first as i64 - 1]),
            ..cfg
        };
        assert!(below.modes(1.0).unwrap().is_empty());
        let zero = WellWavegroupConfig {
            modes: Some([0, 2]),
            ..cfg
        };
        assert!(matches!(zero.modes(1.0), Err(Error::InvalidMode(0))));
    }

    #[test]
    fn trapezoid_nodes_halve_end_weights() {
        let nodes = gaussian_nodes(0.0, 1.0, 5, 2.0, true);
        let interior = gaussian_nodes(0.0, 1.0, 5, 2.0, false);
        assert_eq!(nodes[0].1 * 2.0, interior[0].1);
        assert_eq!(nodes[2].1, interior[2].1);
    }
}
