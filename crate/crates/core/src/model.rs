//! Two-body system parameters and coordinate transforms.
//!
//! Body 1 is the light particle (mass `m1`, coordinate `x1`, time `t1`); body 2 is
//! the well or barrier (mass `m2`, coordinate `x2`, time `t2`). The interaction
//! depends only on the relative coordinate `x_rel = x1 - x2` and is confined to
//! `|x_rel| <= half_width`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interaction between the two bodies as a function of `x_rel`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// Infinite walls at `x_rel = ±half_width`; the particle is confined between them.
    InfiniteWell,
    /// Constant `height` for `|x_rel| <= half_width`, zero outside. Negative heights
    /// give a finite well, positive heights a barrier.
    Square { height: f64 },
}

impl Potential {
    /// Height inside the interaction region (zero for the infinite well, whose
    /// interior is field free).
    pub fn inner_height(&self) -> f64 {
        match *self {
            Potential::InfiniteWell => 0.0,
            Potential::Square { height } => height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub m1: f64,
    pub m2: f64,
    /// Half width `D` of the interaction region in `x_rel`.
    pub half_width: f64,
    pub potential: Potential,
    #[serde(default = "unit_hbar")]
    pub hbar: f64,
}

fn unit_hbar() -> f64 {
    1.0
}

impl SystemParams {
    pub fn new(m1: f64, m2: f64, half_width: f64, potential: Potential) -> Result<Self> {
        let p = SystemParams {
            m1,
            m2,
            half_width,
            potential,
            hbar: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("m1", self.m1)?;
        positive("m2", self.m2)?;
        positive("half_width", self.half_width)?;
        positive("hbar", self.hbar)?;
        if let Potential::Square { height } = self.potential {
            if !height.is_finite() {
                return Err(Error::invalid("potential.height", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn with_half_width(&self, half_width: f64) -> Self {
        SystemParams { half_width, ..*self }
    }

    pub fn with_potential(&self, potential: Potential) -> Self {
        SystemParams { potential, ..*self }
    }

    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn reduced_mass(&self) -> f64 {
        self.m1 * self.m2 / (self.m1 + self.m2)
    }

    pub fn to_cm_rel(&self, p: LabPoint) -> CmRelPoint {
        let mt = self.total_mass();
        CmRelPoint {
            x_cm: (self.m1 * p.x1 + self.m2 * p.x2) / mt,
            x_rel: p.x1 - p.x2,
            t_cm: p.t1,
            t_rel: p.t2,
        }
    }

    pub fn from_cm_rel(&self, p: CmRelPoint) -> LabPoint {
        let mt = self.total_mass();
        LabPoint {
            x1: p.x_cm + self.m2 / mt * p.x_rel,
            x2: p.x_cm - self.m1 / mt * p.x_rel,
            t1: p.t_cm,
            t2: p.t_rel,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

/// A point of configuration space-time with one time label per body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabPoint {
    pub x1: f64,
    pub x2: f64,
    pub t1: f64,
    pub t2: f64,
}

impl LabPoint {
    pub fn new(x1: f64, x2: f64, t1: f64, t2: f64) -> Self {
        LabPoint { x1, x2, t1, t2 }
    }

    /// Both bodies observed at the same time `t`.
    pub fn synchronous(x1: f64, x2: f64, t: f64) -> Self {
        LabPoint { x1, x2, t1: t, t2: t }
    }

    pub fn x_rel(&self) -> f64 {
        self.x1 - self.x2
    }
}

/// Center-of-mass and relative coordinates. The two time labels are carried
/// through unchanged (`t_cm = t1`, `t_rel = t2`); they only acquire a shared
/// one-time meaning on the synchronous slice `t1 = t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmRelPoint {
    pub x_cm: f64,
    pub x_rel: f64,
    pub t_cm: f64,
    pub t_rel: f64,
}

/// Lab-frame velocities of the particle (`v1`) and of the well or barrier (`v2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityPair {
    pub v1: f64,
    pub v2: f64,
}

impl VelocityPair {
    pub fn new(v1: f64, v2: f64) -> Self {
        VelocityPair { v1, v2 }
    }
}

/// Wavevectors and energies of a two-body plane-wave channel, split into
/// center-of-mass and relative parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelWavevectors {
    pub k_cm: f64,
    /// Signed relative wavevector; negative when the particle moves left
    /// relative to the well or barrier.
    pub k_rel: f64,
    pub e_cm: f64,
    pub e_rel: f64,
}

pub fn channel_wavevectors(vp: VelocityPair, params: &SystemParams) -> ChannelWavevectors {
    let (m1, m2, hbar) = (params.m1, params.m2, params.hbar);
    let mt = params.total_mass();
    let k1 = m1 * vp.v1 / hbar;
    let k2 = m2 * vp.v2 / hbar;
    let k_cm = k1 + k2;
    let k_rel = (m2 * k1 - m1 * k2) / mt;
    let mu = params.reduced_mass();
    ChannelWavevectors {
        k_cm,
        k_rel,
        e_cm: hbar * hbar * k_cm * k_cm / (2.0 * mt),
        e_rel: hbar * hbar * k_rel * k_rel / (2.0 * mu),
    }
}

/// Elastic-collision outgoing velocities (reflection of the relative motion).
pub fn elastic_recoil(vp: VelocityPair, params: &SystemParams) -> VelocityPair {
    let (m1, m2) = (params.m1, params.m2);
    let mt = params.total_mass();
    VelocityPair {
        v1: ((m1 - m2) * vp.v1 + 2.0 * m2 * vp.v2) / mt,
        v2: (2.0 * m1 * vp.v1 + (m2 - m1) * vp.v2) / mt,
    }
}
