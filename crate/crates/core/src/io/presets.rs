//! Named configurations for the figure scenarios.
//!
//! Only dimensionless ratios are fixed by the scenarios; they are resolved
//! against the anchors `m1 = 1`, `ħ = 1`, and (scattering) `V0 = 1` or (well)
//! `D = 1`. The relative kinetic energy used for the potential ratio is taken at
//! the central velocities.

use std::f64::consts::PI;

use crate::analysis::DEFAULT_MIN_SEPARATION;
use crate::error::{Error, Result};
use crate::field::{Axis, GridSpec};
use crate::io::config::{
    AnalysisSpec, FringeSpec, OutputSpec, RunConfig, Scenario, SliceSpec, TwoTimeSpec, Type2Spec, WavegroupConfig,
};
use crate::model::{Potential, SystemParams};
use crate::wavegroup::{BarrierWavegroupConfig, WellWavegroupConfig};

pub const PRESET_NAMES: &[&str] = &[
    "fig1", "fig2", "fig3", "fig4a", "fig4b", "fig5", "fig6", "fringes", "type2",
];

/// Scattering anchors shared by the square-potential scenarios.
pub mod scattering {
    pub const M1: f64 = 1.0;
    pub const MASS_RATIO: f64 = 5.0;
    pub const V0: f64 = 1.0;
    pub const SPEED_RATIO: f64 = 6.0;
    pub const DV: f64 = 0.4;
    pub const WIDTH_RATIO: f64 = 1.5;
    pub const FINITE_WELL_HALF_WIDTH: f64 = 0.5;
    pub const BARRIER_HALF_WIDTH: f64 = 0.75;
    /// `(KE_rel − PE)/|PE|` for the finite well.
    pub const WELL_ENERGY_RATIO: f64 = 1.4;
    /// `(KE_rel − PE)/|PE|` for the barrier.
    pub const BARRIER_ENERGY_RATIO: f64 = 0.3;
    pub const TIMES: [f64; 3] = [-0.8, 0.0, 0.8];
    pub const SLOW_SPEED_RATIO: f64 = 4.6;
    pub const FAST_SPEED_RATIO: f64 = 6.1;
}

/// Infinite-well anchors.
pub mod well {
    pub const M1: f64 = 1.0;
    pub const MASS_RATIO: f64 = 10.0;
    pub const HALF_WIDTH: f64 = 1.0;
    pub const MODE_CENTER: f64 = 50.0;
    /// `Δx/D`.
    pub const WIDTH_RATIO: f64 = 1.0 / 15.0;
    /// `ΔV/V0`.
    pub const SPEED_SPREAD: f64 = 1.0 / 30.0;
    /// Chosen so the partner packet `ħ/(M·ΔV)` is narrower than `D`.
    pub const V0: f64 = 30.0;
}

/// Relative kinetic energy at the central velocities.
pub fn central_relative_energy(params: &SystemParams, v1: f64, v2: f64) -> f64 {
    0.5 * params.reduced_mass() * (v1 - v2).powi(2)
}

/// Height `PE` with `(KE − PE)/|PE| = ratio` and the given sign.
fn height_for_ratio(ke: f64, ratio: f64, negative: bool) -> f64 {
    if negative {
        -ke / (ratio - 1.0)
    } else {
        ke / (ratio + 1.0)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Axis {
    Axis { lo, hi, n }
}

fn scattering_base(name: &str, v0_ratio: f64, negative: bool) -> RunConfig {
    use scattering::*;
    let m2 = M1 * MASS_RATIO;
    let (ratio, half_width) = if negative {
        (WELL_ENERGY_RATIO, FINITE_WELL_HALF_WIDTH)
    } else {
        (BARRIER_ENERGY_RATIO, BARRIER_HALF_WIDTH)
    };
    let mut system = SystemParams {
        m1: M1,
        m2,
        half_width,
        potential: Potential::Square { height: 0.0 },
        hbar: 1.0,
    };
    // The potential is fixed by the reference speed ratio so the speed presets
    // differ only in the particle velocity.
    let ke = central_relative_energy(&system, SPEED_RATIO * V0, V0);
    system.potential = Potential::Square {
        height: height_for_ratio(ke, ratio, negative),
    };
    let wavegroup = BarrierWavegroupConfig::new(v0_ratio * V0, WIDTH_RATIO * DV, V0, DV);
    RunConfig {
        preset: Some(name.into()),
        system,
        scenario: if negative {
            Scenario::FiniteWell
        } else {
            Scenario::Barrier
        },
        wavegroup: WavegroupConfig::Scattering(wavegroup),
        grid: GridSpec {
            x1: axis(-8.0, 8.0, 200),
            x2: axis(-3.0, 5.0, 200),
        },
        times: TIMES.to_vec(),
        drift: 0.0,
        slices: Vec::new(),
        two_time: Vec::new(),
        coeffs: None,
        analysis: AnalysisSpec::default(),
        phase: Default::default(),
        fd_step: None,
        output: OutputSpec {
            prefix: name.into(),
            ..OutputSpec::default()
        },
    }
}

fn speed_preset(name: &str, ratio: f64) -> RunConfig {
    let mut cfg = scattering_base(name, ratio, true);
    cfg.times = vec![0.0];
    cfg.slices = vec![SliceSpec {
        x1: -2.0,
        t1: 0.0,
        x2: axis(-2.0, 8.0, 251),
        t2: axis(0.0, 2.0, 51),
    }];
    cfg
}

fn well_base(name: &str) -> (RunConfig, f64) {
    use well::*;
    let system = SystemParams {
        m1: M1,
        m2: M1 * MASS_RATIO,
        half_width: HALF_WIDTH,
        potential: Potential::InfiniteWell,
        hbar: 1.0,
    };
    let cfg = WellWavegroupConfig {
        mode_center: MODE_CENTER,
        mode_width: WIDTH_RATIO * HALF_WIDTH,
        v2_center: V0,
        v2_width: SPEED_SPREAD * V0,
        n_v2: 64,
        span: 4.0,
        modes: None,
    };
    let run = RunConfig {
        preset: Some(name.into()),
        system,
        scenario: Scenario::InfiniteWell,
        wavegroup: WavegroupConfig::Well(cfg),
        grid: GridSpec {
            x1: axis(-1.6, 1.6, 200),
            x2: axis(-0.6, 0.6, 200),
        },
        times: Vec::new(),
        drift: 0.0,
        slices: Vec::new(),
        two_time: Vec::new(),
        coeffs: None,
        analysis: AnalysisSpec::default(),
        phase: Default::default(),
        fd_step: None,
        output: OutputSpec {
            prefix: name.into(),
            ..OutputSpec::default()
        },
    };
    // Relative speed of mode `n`: `nπħ/(2Dμ)`.
    let mu = system.reduced_mass();
    (run, PI * system.hbar / (2.0 * HALF_WIDTH * mu))
}

/// Centre-of-mass velocity for partner velocity `v2` and relative velocity `v_rel`.
fn cm_velocity(system: &SystemParams, v2: f64, v_rel: f64) -> f64 {
    v2 + system.m1 / system.total_mass() * v_rel
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let cfg = match name {
        "fig1" => scattering_base(name, scattering::SPEED_RATIO, true),
        "fig2" => scattering_base(name, scattering::SPEED_RATIO, false),
        "fig3" => {
            let mut cfg = scattering_base(name, scattering::SPEED_RATIO, true);
            let t1 = scattering::TIMES[2];
            cfg.times = vec![t1];
            cfg.slices = vec![SliceSpec {
                x1: -2.25,
                t1,
                x2: axis(-3.0, 6.0, 226),
                t2: axis(t1, t1 + 1.2, 61),
            }];
            cfg
        }
        "fig4a" => speed_preset(name, scattering::SLOW_SPEED_RATIO),
        "fig4b" => speed_preset(name, scattering::FAST_SPEED_RATIO),
        "fig5" => {
            let (mut cfg, unit_speed) = well_base(name);
            let v_rel = well::MODE_CENTER * unit_speed;
            let period = 2.0 * well::HALF_WIDTH / v_rel;
            cfg.times = (0..6).map(|k| (k as f64 - 1.0) * 0.5 * period).collect();
            cfg.drift = cm_velocity(&cfg.system, well::V0, v_rel);
            cfg
        }
        "fig6" => {
            let (mut cfg, unit_speed) = well_base(name);
            if let WavegroupConfig::Well(w) = &mut cfg.wavegroup {
                w.mode_center = 1.0;
                w.modes = Some([1, 1]);
            }
            let period = 2.0 * well::HALF_WIDTH / unit_speed;
            let step = 0.25 * period;
            cfg.times = (0..3).map(|k| k as f64 * step).collect();
            cfg.two_time = (0..5)
                .map(|k| TwoTimeSpec {
                    t1: 0.0,
                    t2: k as f64 * step,
                })
                .collect();
            cfg.drift = cm_velocity(&cfg.system, well::V0, unit_speed);
            cfg.grid = GridSpec {
                x1: axis(-2.5, 2.5, 200),
                x2: axis(-1.5, 1.5, 200),
            };
            cfg
        }
        "fringes" => {
            // Heavy partner at rest, particle totally reflected: type I fringes
            // along x1 in front of the barrier.
            let system = SystemParams {
                m1: 1.0,
                m2: 100.0,
                half_width: 0.5,
                potential: Potential::Square { height: 0.0 },
                hbar: 1.0,
            };
            let ke = central_relative_energy(&system, 6.0, 0.0);
            let mut cfg = scattering_base(name, scattering::SPEED_RATIO, false);
            cfg.system = SystemParams {
                potential: Potential::Square { height: 2.0 * ke },
                ..system
            };
            cfg.wavegroup = WavegroupConfig::Scattering(BarrierWavegroupConfig::new(6.0, 0.6, 0.0, 0.02));
            cfg.times = vec![0.0];
            cfg.grid = GridSpec {
                x1: axis(-4.0, 1.0, 200),
                x2: axis(-1.0, 1.0, 200),
            };
            cfg.analysis = AnalysisSpec {
                fringe: Some(FringeSpec {
                    t: 0.0,
                    x2: 0.0,
                    x1: axis(-4.0, -0.5, 701),
                }),
                min_separation: DEFAULT_MIN_SEPARATION,
                ..AnalysisSpec::default()
            };
            cfg
        }
        "type2" => {
            let mut cfg = scattering_base(name, scattering::SPEED_RATIO, true);
            if let WavegroupConfig::Scattering(b) = &mut cfg.wavegroup {
                *b = b.with_nodes(32, 32);
            }
            cfg.times = Vec::new();
            cfg.analysis.type2 = Some(Type2Spec {
                t: 1.0,
                half_width: axis(0.30, 0.70, 21),
            });
            cfg
        }
        other => {
            return Err(Error::validation(
                "preset",
                format!("unknown preset `{other}`; expected one of {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scattering_parts(cfg: &RunConfig) -> (BarrierWavegroupConfig, f64) {
        match (cfg.wavegroup, cfg.system.potential) {
            (WavegroupConfig::Scattering(b), Potential::Square { height }) => (b, height),
            _ => panic!("not a scattering preset"),
        }
    }

    fn energy_ratio(cfg: &RunConfig) -> f64 {
        let (b, pe) = scattering_parts(cfg);
        let ke = central_relative_energy(&cfg.system, b.v1_center, b.v2_center);
        (ke - pe) / pe.abs()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 4.0 * f64::EPSILON * b.abs()
    }

    #[test]
    fn every_listed_preset_builds() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.preset.as_deref(), Some(*name));
        }
        assert!(preset("fig7").is_err());
    }

    #[test]
    fn finite_well_ratios() {
        let cfg = preset("fig1").unwrap();
        let (b, pe) = scattering_parts(&cfg);
        assert!(close(b.v1_center / b.v2_center, 6.0));
        assert!(close(b.v1_width / b.v2_width, 1.5));
        assert!(close(cfg.system.m2 / cfg.system.m1, 5.0));
        assert!(close(energy_ratio(&cfg), 1.4));
        assert!(pe < 0.0);
        assert_eq!(cfg.scenario, Scenario::FiniteWell);
        assert_eq!(cfg.times.len(), 3);
    }

    #[test]
    fn barrier_ratios() {
        let cfg = preset("fig2").unwrap();
        let (b, pe) = scattering_parts(&cfg);
        assert!(close(b.v1_center / b.v2_center, 6.0));
        assert!(close(b.v1_width / b.v2_width, 1.5));
        assert!(close(cfg.system.m2 / cfg.system.m1, 5.0));
        assert!(close(energy_ratio(&cfg), 0.3));
        assert!(pe > 0.0);
        assert_eq!(cfg.scenario, Scenario::Barrier);
    }

    #[test]
    fn speed_presets() {
        let fig1 = preset("fig1").unwrap();
        for (name, ratio) in [("fig4a", 4.6), ("fig4b", 6.1)] {
            let cfg = preset(name).unwrap();
            let (b, _) = scattering_parts(&cfg);
            assert!(close(b.v1_center / b.v2_center, ratio));
            assert!(close(b.v1_width / b.v2_width, 1.5));
            assert!(close(cfg.system.m2 / cfg.system.m1, 5.0));
            assert_eq!(cfg.system, fig1.system);
            assert_eq!(cfg.slices[0].x1, -2.0);
        }
    }

    #[test]
    fn well_presets() {
        for (name, n0) in [("fig5", 50.0), ("fig6", 1.0)] {
            let cfg = preset(name).unwrap();
            let WavegroupConfig::Well(w) = cfg.wavegroup else {
                panic!()
            };
            assert_eq!(w.mode_center, n0);
            assert!(close(w.mode_width / cfg.system.half_width, 1.0 / 15.0));
            assert!(close(w.v2_width / w.v2_center, 1.0 / 30.0));
            assert!(close(cfg.system.m2 / cfg.system.m1, 10.0));
            // Partner packet narrower than the well.
            assert!(cfg.system.hbar / (cfg.system.m2 * w.v2_width) < cfg.system.half_width);
        }
        let fig6 = preset("fig6").unwrap();
        let WavegroupConfig::Well(w) = fig6.wavegroup else {
            panic!()
        };
        assert_eq!(w.modes, Some([1, 1]));
        assert_eq!(preset("fig5").unwrap().times.len(), 6);
    }
}
