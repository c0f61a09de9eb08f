//! Exact two-body, two-time energy eigenstates.
//!
//! A channel with lab velocities `(v1, v2)` separates into a center-of-mass plane
//! wave and a relative-coordinate solution `u(x_rel)`. Each exponential in `u`
//! with relative wavevector `q` becomes one lab-frame plane wave with particle
//! wavevector `m1·K_cm/M + q` and partner wavevector `m2·K_cm/M − q`. The kinetic
//! energy carried by each body is attached to that body's time label.

use std::num::NonZeroU32;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{channel_wavevectors, LabPoint, Potential, SystemParams, VelocityPair};
use crate::state::{expi, Region, StateBuilder, Support, Term, TwoBodyState};

/// Systems whose boundary-matching condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `A·e^{iKx}` before the interaction region.
    Incident,
    /// `B·e^{-iKx}` before the interaction region.
    Reflected,
    /// `F·e^{iκx}` inside.
    Forward,
    /// `G·e^{-iκx}` inside.
    Backward,
    /// `H·e^{iKx}` after.
    Transmitted,
    /// Rightward half of the standing wave in the infinite well.
    WellRightward,
    /// Leftward half of the standing wave in the infinite well.
    WellLeftward,
}

impl Branch {
    pub const SCATTERING: [Branch; 5] = [
        Branch::Incident,
        Branch::Reflected,
        Branch::Forward,
        Branch::Backward,
        Branch::Transmitted,
    ];
    pub const WELL: [Branch; 2] = [Branch::WellRightward, Branch::WellLeftward];
}

/// Per-branch momenta and kinetic energies. Momenta are `ħ·∂φ/∂x` of the branch
/// phase and are complex for evanescent branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchKinematics {
    pub branch: Branch,
    pub region: Region,
    pub p1: C64,
    pub p2: C64,
    pub ke1: C64,
    pub ke2: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringCoefficients {
    pub a: C64,
    pub b: C64,
    pub f: C64,
    pub g: C64,
    pub h: C64,
    pub k_before: C64,
    pub k_barrier: C64,
    pub k_after: C64,
    /// Infinity-norm condition number of the matching system as solved.
    pub condition: f64,
}

/// Treatment of the constant potential phase inside the interaction region.
///
/// `Omitted` drops the factor `exp(-i·PE·t_PE/ħ)`, which is common to all terms
/// in that region and leaves every PDF and current unchanged. `Included` keeps it
/// with `t_PE = (m2·t1 + m1·t2)/(m1 + m2)`, which makes each term an exact
/// solution of the two-time equation with the potential present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialPhase {
    #[default]
    Omitted,
    Included,
}

/// Infinite-well mode index `n ≥ 1` (`n − 1` interior nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Mode(NonZeroU32);

impl Mode {
    pub fn new(n: i64) -> Result<Self> {
        u32::try_from(n)
            .ok()
            .and_then(NonZeroU32::new)
            .map(Mode)
            .ok_or(Error::InvalidMode(n))
    }

    pub fn get(self) -> u32 {
        self.0.get()
    }
}

/// Relative wavevector magnitude and direction of incidence for a channel.
fn incidence(vp: VelocityPair, params: &SystemParams) -> Result<(f64, f64, f64)> {
    let ch = channel_wavevectors(vp, params);
    if ch.k_rel == 0.0 {
        return Err(Error::ZeroRelativeMotion);
    }
    let sign = ch.k_rel.signum();
    Ok((ch.k_cm, ch.k_rel.abs(), sign))
}

fn barrier_wavevector(k: f64, params: &SystemParams) -> C64 {
    let mu = params.reduced_mass();
    let e_rel = params.hbar * params.hbar * k * k / (2.0 * mu);
    let excess = e_rel - params.potential.inner_height();
    let kappa = (2.0 * mu * excess.abs()).sqrt() / params.hbar;
    if excess >= 0.0 {
        C64::new(kappa, 0.0)
    } else {
        C64::new(0.0, kappa)
    }
}

/// Amplitudes of the scattering solution for a particle incident on the
/// interaction region with `A = 1`. For `E_rel < PE` the inside wavevector is
/// `+i·κ`, so `F` decays in the direction of incidence.
///
/// The matching conditions are solved for the branch values at the boundary
/// each branch grows toward, which keeps every matrix entry bounded by one in
/// magnitude even for opaque barriers.
pub fn barrier_coefficients(vp: VelocityPair, params: &SystemParams) -> Result<ScatteringCoefficients> {
    let (_, k, _) = incidence(vp, params)?;
    coefficients_for(k, params)
}

fn coefficients_for(k: f64, params: &SystemParams) -> Result<ScatteringCoefficients> {
    let d = params.half_width;
    let kr = C64::new(k, 0.0);
    let kappa = barrier_wavevector(k, params);
    let e = expi(kappa * (2.0 * d));
    let alpha = expi(C64::new(-k * d, 0.0));
    // Unknowns: B·e^{iKD}, F·e^{-iκD}, G·e^{-iκD}, H·e^{iKD}.
    let a = [
        [-ONE, ONE, e, ZERO],
        [kr, kappa, -kappa * e, ZERO],
        [ZERO, e, ONE, -ONE],
        [ZERO, kappa * e, -kappa, -kr],
    ];
    let rhs = [alpha, kr * alpha, ZERO, ZERO];
    let sol = linalg::solve(a, rhs);
    if !(sol.condition <= MAX_CONDITION) {
        return Err(Error::SingularMatch {
            condition: sol.condition,
        });
    }
    let inside = expi(kappa * d);
    let outside = expi(C64::new(-k * d, 0.0));
    Ok(ScatteringCoefficients {
        a: ONE,
        b: sol.x[0] * outside,
        f: sol.x[1] * inside,
        g: sol.x[2] * inside,
        h: sol.x[3] * outside,
        k_before: kr,
        k_barrier: kappa,
        k_after: kr,
        condition: sol.condition,
    })
}

fn kinematics_from_q(branch: Branch, region: Region, k_cm: f64, q: C64, params: &SystemParams) -> BranchKinematics {
    let mt = params.total_mass();
    let hbar = params.hbar;
    let k1 = q + params.m1 * k_cm / mt;
    let k2 = -q + params.m2 * k_cm / mt;
    let p1 = k1 * hbar;
    let p2 = k2 * hbar;
    BranchKinematics {
        branch,
        region,
        p1,
        p2,
        ke1: p1 * p1 / (2.0 * params.m1),
        ke2: p2 * p2 / (2.0 * params.m2),
    }
}

/// Region holding the incident and reflected branches, given the sign of `K_rel`.
fn before_region(sign: f64) -> Region {
    if sign > 0.0 {
        Region::Left
    } else {
        Region::Right
    }
}

fn after_region(sign: f64) -> Region {
    if sign > 0.0 {
        Region::Right
    } else {
        Region::Left
    }
}

/// Closed-form momenta and kinetic energies of one branch of the channel `vp`.
///
/// Scattering branches are defined for square potentials (the infinite well is
/// treated as field free inside). Well branches use `q = ±|K_rel|`.
pub fn branch_kinematics(branch: Branch, vp: VelocityPair, params: &SystemParams) -> Result<BranchKinematics> {
    let (k_cm, k, sign) = incidence(vp, params)?;
    let s = C64::new(sign, 0.0);
    let kr = C64::new(k, 0.0);
    let (region, q) = match branch {
        Branch::Incident => (before_region(sign), s * kr),
        Branch::Reflected => (before_region(sign), -s * kr),
        Branch::Forward => (Region::Middle, s * barrier_wavevector(k, params)),
        Branch::Backward => (Region::Middle, -s * barrier_wavevector(k, params)),
        Branch::Transmitted => (after_region(sign), s * kr),
        Branch::WellRightward => (Region::Middle, kr),
        Branch::WellLeftward => (Region::Middle, -kr),
    };
    Ok(kinematics_from_q(branch, region, k_cm, q, params))
}

fn term_from(kin: &BranchKinematics, coef: C64, params: &SystemParams, extra_w: (f64, f64)) -> Term {
    let hbar = params.hbar;
    Term {
        coef,
        k1: kin.p1 / hbar,
        k2: kin.p2 / hbar,
        w1: kin.ke1 / hbar + extra_w.0,
        w2: kin.ke2 / hbar + extra_w.1,
    }
}

/// Free two-body plane wave with lab velocities `vp`.
pub fn plane_wave_state(vp: VelocityPair, params: &SystemParams) -> TwoBodyState {
    let hbar = params.hbar;
    let k1 = params.m1 * vp.v1 / hbar;
    let k2 = params.m2 * vp.v2 / hbar;
    let term = Term {
        coef: ONE,
        k1: C64::new(k1, 0.0),
        k2: C64::new(k2, 0.0),
        w1: C64::new(hbar * k1 * k1 / (2.0 * params.m1), 0.0),
        w2: C64::new(hbar * k2 * k2 / (2.0 * params.m2), 0.0),
    };
    TwoBodyState::from_tagged(Support::Free, params, vec![(Region::Everywhere, term)])
}

/// Scattering eigenstate of a square well or barrier as a five-term expansion.
pub fn barrier_state(vp: VelocityPair, params: &SystemParams, phase: PotentialPhase) -> Result<TwoBodyState> {
    let mut b = StateBuilder::new(
        Support::Square {
            half_width: params.half_width,
        },
        params,
    );
    push_barrier_channel(&mut b, vp, params, phase, 1.0)?;
    Ok(b.build())
}

pub(crate) fn potential_phase_rates(params: &SystemParams, phase: PotentialPhase) -> (f64, f64) {
    match phase {
        PotentialPhase::Omitted => (0.0, 0.0),
        PotentialPhase::Included => {
            let pe = params.potential.inner_height();
            let mt = params.total_mass();
            (pe * params.m2 / (mt * params.hbar), pe * params.m1 / (mt * params.hbar))
        }
    }
}

pub(crate) fn push_barrier_channel(
    builder: &mut StateBuilder,
    vp: VelocityPair,
    params: &SystemParams,
    phase: PotentialPhase,
    weight: f64,
) -> Result<()> {
    if matches!(params.potential, Potential::InfiniteWell) {
        return Err(Error::invalid(
            "potential",
            "scattering states need a finite square potential",
        ));
    }
    let (_, k, _) = incidence(vp, params)?;
    let c = coefficients_for(k, params)?;
    let inside = potential_phase_rates(params, phase);
    for branch in Branch::SCATTERING {
        let kin = branch_kinematics(branch, vp, params)?;
        let (coef, extra) = match branch {
            Branch::Incident => (c.a, (0.0, 0.0)),
            Branch::Reflected => (c.b, (0.0, 0.0)),
            Branch::Forward => (c.f, inside),
            Branch::Backward => (c.g, inside),
            Branch::Transmitted => (c.h, (0.0, 0.0)),
            Branch::WellRightward | Branch::WellLeftward => unreachable!(),
        };
        builder.push(kin.region, term_from(&kin, coef * weight, params, extra));
    }
    Ok(())
}

/// Particle velocity of mode `n` for well velocity `v2`:
/// `v1 = v2 + n·π·ħ·(m1 + m2) / (2·D·m1·m2)`.
pub fn well_mode_velocity(mode: Mode, v2: f64, params: &SystemParams) -> f64 {
    let n = f64::from(mode.get());
    v2 + n * std::f64::consts::PI * params.hbar / (2.0 * params.half_width * params.reduced_mass())
}

/// Relative wavevector `n·π/(2D)` of mode `n`.
pub fn well_mode_wavevector(mode: Mode, params: &SystemParams) -> f64 {
    f64::from(mode.get()) * std::f64::consts::PI / (2.0 * params.half_width)
}

/// Infinite-well eigenstate `sin(nπ(x_rel + D)/2D)` times the center-of-mass plane
/// wave, as two counter-propagating branches.
pub fn well_state(mode: Mode, v2: f64, params: &SystemParams) -> Result<TwoBodyState> {
    let mut b = StateBuilder::new(
        Support::Well {
            half_width: params.half_width,
        },
        params,
    );
    push_well_mode(&mut b, mode, v2, params, 1.0)?;
    Ok(b.build())
}

pub(crate) fn push_well_mode(
    builder: &mut StateBuilder,
    mode: Mode,
    v2: f64,
    params: &SystemParams,
    weight: f64,
) -> Result<()> {
    if !matches!(params.potential, Potential::InfiniteWell) {
        return Err(Error::invalid("potential", "well eigenstates need the infinite well"));
    }
    let v1 = well_mode_velocity(mode, v2, params);
    let k_cm = channel_wavevectors(VelocityPair::new(v1, v2), params).k_cm;
    let k = well_mode_wavevector(mode, params);
    let d = params.half_width;
    // sin(K(x + D)) = (e^{iKD}·e^{iKx} − e^{−iKD}·e^{−iKx}) / 2i
    let half_over_i = C64::new(0.0, -0.5);
    let right = kinematics_from_q(Branch::WellRightward, Region::Middle, k_cm, C64::new(k, 0.0), params);
    let left = kinematics_from_q(Branch::WellLeftward, Region::Middle, k_cm, C64::new(-k, 0.0), params);
    let cr = half_over_i * expi(C64::new(k * d, 0.0)) * weight;
    let cl = -half_over_i * expi(C64::new(-k * d, 0.0)) * weight;
    builder.push(Region::Middle, term_from(&right, cr, params, (0.0, 0.0)));
    builder.push(Region::Middle, term_from(&left, cl, params, (0.0, 0.0)));
    Ok(())
}

/// Amplitude of the infinite-well eigenstate of mode `n` at `p`.
pub fn well_eigenstate(mode: Mode, v2: f64, params: &SystemParams, p: &LabPoint) -> Result<C64> {
    Ok(well_state(mode, v2, params)?.amplitude(p))
}

/// Amplitude of the scattering eigenstate at `p`, with the potential phase
/// omitted inside the interaction region.
pub fn barrier_eigenstate(vp: VelocityPair, params: &SystemParams, p: &LabPoint) -> Result<C64> {
    Ok(barrier_state(vp, params, PotentialPhase::Omitted)?.amplitude(p))
}
