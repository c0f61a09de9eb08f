//! Shared fixtures for the criterion benchmarks.

use twotime::eigen::PotentialPhase;
use twotime::field::{Axis, GridSpec};
use twotime::io::config::WavegroupConfig;
use twotime::io::preset;
use twotime::wavegroup::barrier_wavegroup_state;
use twotime::{SystemParams, TwoBodyState};

/// The finite-well scenario state with a reduced quadrature of `n × n` nodes.
pub fn finite_well_state(n: usize) -> (SystemParams, TwoBodyState) {
    let cfg = preset("fig1").expect("preset exists");
    let WavegroupConfig::Scattering(b) = cfg.wavegroup else {
        unreachable!("finite-well preset uses a scattering wavegroup")
    };
    let wg = barrier_wavegroup_state(&b.with_nodes(n, n), &cfg.system, PotentialPhase::Omitted).expect("valid preset");
    (cfg.system, wg.state)
}

/// Square window of `n × n` points over the finite-well scenario.
pub fn grid(n: usize) -> GridSpec {
    GridSpec {
        x1: Axis { lo: -8.0, hi: 8.0, n },
        x2: Axis { lo: -3.0, hi: 5.0, n },
    }
}
