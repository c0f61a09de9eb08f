use twotime::analysis::find_peaks;
use twotime::eigen::*;
use twotime::field::*;
use twotime::io::config::WavegroupConfig;
use twotime::io::preset;
use twotime::state::Support;
use twotime::wavegroup::*;
use twotime::{LabPoint, Potential, Region, SystemParams, TwoBodyState, VelocityPair};

fn barrier() -> SystemParams {
    SystemParams::new(1.0, 5.0, 0.75, Potential::Square { height: 4.0 }).unwrap()
}

fn packet(nodes: usize) -> TwoBodyState {
    let cfg = BarrierWavegroupConfig::new(6.0, 0.4, 1.0, 0.6).with_nodes(nodes, nodes);
    barrier_wavegroup_state(&cfg, &barrier(), PotentialPhase::Omitted)
        .unwrap()
        .state
}

fn slope(h: &[f64], r: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn plane_wave_density_and_currents() {
    let p = barrier();
    let s = plane_wave_state(VelocityPair::new(2.0, -0.5), &p);
    let pt = LabPoint::new(0.3, -4.0, 1.0, 2.0);
    assert!((joint_pdf(&s, &pt) - 1.0).abs() < 1e-14);
    let j = currents(&s, &pt);
    assert!((j.j1 - 2.0).abs() < 1e-13);
    assert!((j.j2 + 0.5).abs() < 1e-13);
}

#[test]
fn second_mode_has_a_node_at_the_center() {
    let p = SystemParams::new(1.0, 10.0, 1.0, Potential::InfiniteWell).unwrap();
    let s = well_state(Mode::new(2).unwrap(), 0.0, &p).unwrap();
    assert!(joint_pdf(&s, &LabPoint::synchronous(0.4, 0.4, 0.7)) < 1e-28);
    assert!(joint_pdf(&s, &LabPoint::synchronous(0.9, 0.4, 0.7)) > 0.1);
}

#[test]
fn standing_wave_carries_only_center_of_mass_current() {
    let p = SystemParams::new(1.0, 10.0, 1.0, Potential::InfiniteWell).unwrap();
    let v2 = 0.8;
    let mode = Mode::new(3).unwrap();
    let v1 = well_mode_velocity(mode, v2, &p);
    let v_cm = (v1 + 10.0 * v2) / 11.0;
    let s = well_state(mode, v2, &p).unwrap();
    for &(x1, x2) in &[(0.2, 0.1), (-0.4, 0.3), (0.5, -0.2)] {
        let pt = LabPoint::synchronous(x1, x2, 0.4);
        let pdf = joint_pdf(&s, &pt);
        let j = currents(&s, &pt);
        assert!((j.j1 - pdf * v_cm).abs() < 1e-12 * v_cm);
        assert!((j.j2 - pdf * v_cm).abs() < 1e-12 * v_cm);
    }
}

#[test]
fn difference_currents_match_analytic_currents() {
    let s = packet(24);
    for &(x1, x2, t) in &[(-1.0, 0.3, 0.0), (0.3, 0.1, 0.1), (4.3, 0.8, 0.8), (-2.2, 2.2, 0.8)] {
        let pt = LabPoint::synchronous(x1, x2, t);
        let a = currents(&s, &pt);
        let f = currents_fd(&s, &pt, 1e-3).unwrap();
        assert!((a.j1 - f.j1).abs() < 1e-3 * a.j1.abs());
        assert!((a.j2 - f.j2).abs() < 1e-3 * a.j2.abs());
    }
}

#[test]
fn coarse_difference_steps_are_rejected() {
    let s = packet(8);
    let pt = LabPoint::synchronous(-1.0, 0.3, 0.0);
    assert!(matches!(
        currents_fd(&s, &pt, 0.3),
        Err(twotime::Error::StepTooCoarse { .. })
    ));
    assert!(FdSteps::with_spatial(&s, 0.3).check(&s).is_err());
    assert!(FdSteps::auto(&s, 0.05).check(&s).is_ok());
}

#[test]
fn conservation_residual_is_second_order() {
    let s = packet(24);
    for &(x1, x2, t) in &[(-1.0, 0.3, 0.0), (0.3, 0.1, 0.1), (4.3, 0.8, 0.8)] {
        let pt = LabPoint::synchronous(x1, x2, t);
        let hs = [4e-3, 2e-3, 1e-3, 5e-4];
        let rs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                conservation_residual(&s, &pt, FdSteps::with_spatial(&s, h))
                    .unwrap()
                    .relative()
            })
            .collect();
        let k = slope(&hs, &rs);
        assert!((k - 2.0).abs() < 0.2, "slope {k}");
        assert!(rs[3] < 1e-5);
    }
}

#[test]
fn eigenstates_solve_the_two_time_equation() {
    let p = barrier();
    let s = barrier_state(VelocityPair::new(6.0, 1.0), &p, PotentialPhase::Included).unwrap();
    for &(x1, x2) in &[(-1.5, 0.2), (0.3, 0.1), (1.5, 0.2)] {
        let pt = LabPoint::new(x1, x2, 0.3, 0.6);
        let r = schrodinger_residual(&s, &p, &pt, 5e-4, 5e-4 / s.max_speed());
        assert!(r.relative() < 1e-6, "{}", r.relative());
    }
}

#[test]
fn omitted_potential_phase_leaves_densities_unchanged() {
    let p = barrier();
    let vp = VelocityPair::new(6.0, 1.0);
    let a = barrier_state(vp, &p, PotentialPhase::Included).unwrap();
    let b = barrier_state(vp, &p, PotentialPhase::Omitted).unwrap();
    let pt = LabPoint::synchronous(0.3, 0.1, 0.9);
    assert!((joint_pdf(&a, &pt) - joint_pdf(&b, &pt)).abs() < 1e-12);
}

#[test]
fn segment_balance_holds() {
    let s = packet(24);
    let steps = FdSteps::auto(&s, 0.02);
    for seg in [
        Segment {
            along: Body::Particle,
            fixed: 0.2,
            a: -3.0,
            b: 1.5,
            t: 0.0,
        },
        Segment {
            along: Body::Partner,
            fixed: -0.5,
            a: -2.0,
            b: 1.0,
            t: 0.1,
        },
        Segment {
            along: Body::Particle,
            fixed: 0.8,
            a: 3.0,
            b: 6.0,
            t: 0.8,
        },
    ] {
        let bal = segment_balance(&s, &seg, steps).unwrap();
        assert!(bal.residual.relative() < 1e-3, "{seg:?} {bal:?}");
    }
}

#[test]
fn densities_are_nonnegative() {
    let s = packet(16);
    let grid = GridSpec {
        x1: Axis::new(-4.0, 4.0, 41).unwrap(),
        x2: Axis::new(-2.0, 3.0, 31).unwrap(),
    };
    let g = snapshot(&s, &grid, 0.4);
    assert!(g.values.iter().all(|&v| v >= 0.0));
}

#[test]
fn asynchronous_slice_matches_snapshot_at_equal_times() {
    let s = packet(16);
    let grid = GridSpec {
        x1: Axis::new(-3.0, 3.0, 7).unwrap(),
        x2: Axis::new(-2.0, 3.0, 51).unwrap(),
    };
    let t = 0.4;
    let snap = snapshot(&s, &grid, t);
    let x1 = grid.x1.value(2);
    let slice = asynchronous_slice(&s, x1, t, &grid.x2, &Axis::new(t, t + 1.0, 5).unwrap());
    assert_eq!(slice.row(0), snap.row(2));
}

#[test]
fn snapshots_are_thread_count_independent() {
    let s = packet(16);
    let grid = GridSpec {
        x1: Axis::new(-4.0, 4.0, 57).unwrap(),
        x2: Axis::new(-2.0, 3.0, 43).unwrap(),
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let a = snapshot(&s, &grid, 0.8);
            let b = conservation_map(
                &s,
                &grid,
                0.8,
                FdSteps::auto(&s, grid.min_spacing()),
                ConservationOptions::default(),
            )
            .unwrap();
            (a.values, b.grid.values)
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn states_report_their_support() {
    let s = packet(4);
    assert_eq!(s.support(), Support::Square { half_width: 0.75 });
    assert_eq!(s.region_at(&LabPoint::synchronous(0.0, 1.0, 0.0)), Some(Region::Left));
}

#[test]
fn resonant_buildup_peaks_inside_the_well() {
    let cfg = preset("fig2").unwrap();
    let WavegroupConfig::Scattering(wg) = cfg.wavegroup else {
        panic!("scattering preset")
    };
    let state = barrier_wavegroup_state(&wg, &cfg.system, PotentialPhase::Omitted)
        .unwrap()
        .state;
    let t = 0.8;
    let peaks = find_peaks(&snapshot(&state, &cfg.grid_at(t), t), 0.15, 3);
    let top = &peaks[0];
    let x_rel = top.row.unwrap() - top.col;
    assert!(x_rel.abs() < cfg.system.half_width, "{x_rel}");
}
