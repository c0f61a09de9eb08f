//! Extractors that turn grids into checkable numbers, and classical kinematics
//! used as independent predictions.

use serde::Serialize;

use crate::eigen::{self, Branch, PotentialPhase};
use crate::error::{Error, Result};
use crate::field::{snapshot, Axis, FieldGrid, GridSpec};
use crate::model::{channel_wavevectors, elastic_recoil, LabPoint, SystemParams, VelocityPair};
use crate::state::{Region, TwoBodyState};
use crate::wavegroup::{barrier_wavegroup_state, BarrierWavegroupConfig};

/// Default peak threshold as a fraction of the global maximum.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.15;
/// Default minimum peak separation in grid cells.
pub const DEFAULT_MIN_SEPARATION: usize = 3;
/// Fringe maxima below this fraction of the window maximum are ignored.
pub const FRINGE_THRESHOLD: f64 = 0.10;
/// Profiles whose relative contrast `(max − min)/max` is below this are treated
/// as flat: their maxima are roundoff.
pub const MIN_FRINGE_CONTRAST: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Column coordinate (refined between grid points).
    pub col: f64,
    /// Row coordinate; `None` for peaks found along a single line.
    pub row: Option<f64>,
    pub col_index: usize,
    pub row_index: usize,
    pub height: f64,
    /// Full width at half maximum along the columns.
    pub width: f64,
}

/// Vertex offset in `(-0.5, 0.5)` cells of the parabola through three samples.
fn parabolic_offset(ym: f64, y0: f64, yp: f64) -> f64 {
    let denom = ym - 2.0 * y0 + yp;
    if denom < 0.0 {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Full width at half maximum of the profile around index `i`, by linear
/// interpolation of the half-maximum crossings. Falls back to the profile
/// extent when a side never drops below half.
fn fwhm(axis: &Axis, ys: &[f64], i: usize) -> f64 {
    let half = 0.5 * ys[i];
    let h = axis.spacing();
    let mut left = 0.0;
    let mut j = i;
    while j > 0 && ys[j - 1] > half {
        j -= 1;
    }
    if j > 0 {
        let frac = (ys[j] - half) / (ys[j] - ys[j - 1]);
        left = axis.value(j) - frac * h;
    } else {
        left += axis.value(0);
    }
    let mut k = i;
    while k + 1 < ys.len() && ys[k + 1] > half {
        k += 1;
    }
    let right = if k + 1 < ys.len() {
        let frac = (ys[k] - half) / (ys[k] - ys[k + 1]);
        axis.value(k) + frac * h
    } else {
        axis.value(ys.len() - 1)
    };
    (right - left).max(f64::MIN_POSITIVE)
}

/// Local maxima of a line profile above `threshold · max`, at least
/// `min_separation` cells apart, sorted by height (descending).
pub fn find_peaks_1d(axis: &Axis, ys: &[f64], threshold: f64, min_separation: usize) -> Vec<Peak> {
    let n = ys.len();
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || !(max > 0.0) {
        return Vec::new();
    }
    let floor = threshold * max;
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let y = ys[i];
            y > 0.0 && y >= floor && (i == 0 || y > ys[i - 1]) && (i + 1 == n || y >= ys[i + 1])
        })
        .collect();
    candidates.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= min_separation.max(1)) {
            kept.push(c);
        }
    }
    kept.into_iter()
        .map(|i| {
            let offset = if i > 0 && i + 1 < n {
                parabolic_offset(ys[i - 1], ys[i], ys[i + 1])
            } else {
                0.0
            };
            Peak {
                col: axis.value(i) + offset * axis.spacing(),
                row: None,
                col_index: i,
                row_index: 0,
                height: ys[i],
                width: fwhm(axis, ys, i),
            }
        })
        .collect()
}

/// Local maxima of a grid (compared with all eight neighbors) above
/// `threshold · max`, greedily thinned so kept peaks are at least
/// `min_separation` cells apart in both directions; sorted by height.
pub fn find_peaks(grid: &FieldGrid, threshold: f64, min_separation: usize) -> Vec<Peak> {
    let (nr, nc) = (grid.nrows(), grid.ncols());
    let max = grid.max();
    if !(max > 0.0) {
        return Vec::new();
    }
    let floor = threshold * max;
    let mut candidates = Vec::new();
    for r in 0..nr {
        for c in 0..nc {
            let v = grid.get(r, c);
            if v <= 0.0 || v < floor {
                continue;
            }
            let mut is_max = true;
            'nb: for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr < 0 || cc < 0 || rr >= nr as i64 || cc >= nc as i64 {
                        continue;
                    }
                    let w = grid.get(rr as usize, cc as usize);
                    // Ties go to the neighbor visited first in row-major order.
                    let earlier = (dr, dc) < (0, 0);
                    if w > v || (earlier && w == v) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((r, c));
            }
        }
    }
    candidates.sort_by(|a, b| grid.get(b.0, b.1).total_cmp(&grid.get(a.0, a.1)).then(a.cmp(b)));
    let sep = min_separation.max(1);
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for cand in candidates {
        if kept
            .iter()
            .all(|k| k.0.abs_diff(cand.0) >= sep || k.1.abs_diff(cand.1) >= sep)
        {
            kept.push(cand);
        }
    }
    kept.into_iter()
        .map(|(r, c)| {
            let row = grid.row(r);
            let col_off = if c > 0 && c + 1 < nc {
                parabolic_offset(row[c - 1], row[c], row[c + 1])
            } else {
                0.0
            };
            let row_off = if r > 0 && r + 1 < nr {
                parabolic_offset(grid.get(r - 1, c), grid.get(r, c), grid.get(r + 1, c))
            } else {
                0.0
            };
            Peak {
                col: grid.cols.value(c) + col_off * grid.cols.spacing(),
                row: Some(grid.rows.value(r) + row_off * grid.rows.spacing()),
                col_index: c,
                row_index: r,
                height: grid.get(r, c),
                width: fwhm(&grid.cols, row, c),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeReport {
    pub mean_spacing: f64,
    pub spacing_stddev: f64,
    /// Number of maxima found.
    pub count: usize,
}

/// Direction along which fringes are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLine {
    /// Along the row coordinate (down one column).
    Column(usize),
    /// Along the column coordinate (across one row).
    Row(usize),
}

/// Mean spacing of successive local maxima (refined by parabolic
/// interpolation) along a line profile restricted to `window`.
pub fn fringe_spacing_profile(xs: &[f64], ys: &[f64], window: (f64, f64)) -> Result<FringeReport> {
    let idx: Vec<usize> = (0..xs.len())
        .filter(|&i| xs[i] >= window.0 && xs[i] <= window.1)
        .collect();
    let wmax = idx.iter().map(|&i| ys[i]).fold(0.0, f64::max);
    let wmin = idx.iter().map(|&i| ys[i]).fold(f64::INFINITY, f64::min);
    let floor = FRINGE_THRESHOLD * wmax;
    let mut maxima = Vec::new();
    if !(wmax - wmin > MIN_FRINGE_CONTRAST * wmax) {
        return Err(Error::TooFewFringes { found: 0 });
    }
    for w in idx.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        if ys[b] > ys[a] && ys[b] >= ys[c] && ys[b] >= floor && ys[b] > 0.0 {
            let off = parabolic_offset(ys[a], ys[b], ys[c]);
            let h = xs[c] - xs[b];
            maxima.push(xs[b] + off * h);
        }
    }
    if maxima.len() < 3 {
        return Err(Error::TooFewFringes { found: maxima.len() });
    }
    let gaps: Vec<f64> = maxima.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    Ok(FringeReport {
        mean_spacing: mean,
        spacing_stddev: var.sqrt(),
        count: maxima.len(),
    })
}

/// Fringe spacing along one grid line, restricted to `window` in the
/// coordinate that varies along the line.
pub fn fringe_spacing(grid: &FieldGrid, line: GridLine, window: (f64, f64)) -> Result<FringeReport> {
    let (xs, ys) = match line {
        GridLine::Column(c) => (grid.rows.values(), grid.column(c)),
        GridLine::Row(r) => (grid.cols.values(), grid.row(r).to_vec()),
    };
    fringe_spacing_profile(&xs, &ys, window)
}

/// Two predictions for the type I fringe spacing along `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringePrediction {
    /// Half the de Broglie wavelength of the relative motion, `πħ/(m1·|v1 − v2|)`.
    pub half_wavelength: f64,
    /// `2π/|k1(incident) − k1(reflected)|` from the branch momenta.
    pub branch_spacing: f64,
}

pub fn type1_fringe_prediction(vp: VelocityPair, params: &SystemParams) -> Result<FringePrediction> {
    let inc = eigen::branch_kinematics(Branch::Incident, vp, params)?;
    let refl = eigen::branch_kinematics(Branch::Reflected, vp, params)?;
    let dk = ((inc.p1 - refl.p1) / params.hbar).norm();
    Ok(FringePrediction {
        half_wavelength: std::f64::consts::PI * params.hbar / (params.m1 * (vp.v1 - vp.v2).abs()),
        branch_spacing: 2.0 * std::f64::consts::PI / dk,
    })
}

/// One-dimensional elastic collision: outgoing velocities `(v1′, v2′)`.
pub fn classical_recoil(vp: VelocityPair, params: &SystemParams) -> VelocityPair {
    elastic_recoil(vp, params)
}

/// Coherence length `λ·V/ΔV`.
pub fn coherence_length(lambda: f64, v: f64, dv: f64) -> Result<f64> {
    if !(dv > 0.0) || !dv.is_finite() {
        return Err(Error::DivisionByZeroWidth);
    }
    Ok(lambda * (v / dv))
}

/// Classical image-ensemble prediction for the reflected part of a scattering
/// wavegroup.
///
/// The initial state is the phase-space distribution of the minimum-uncertainty
/// packets, both centered at the origin at `t = 0`. Each member moves freely and
/// is mapped through the elastic collision at `x_rel = −D`; continuing the
/// mapped trajectories to all times is the classical analogue of the mirror
/// image that the reflected branch represents. The conditional density of `x2`
/// given the particle at `(x1, t1)` is a mixture of bivariate Gaussians, one
/// per velocity pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoilEnsemble {
    /// Velocity nodes per axis.
    pub nodes: usize,
    /// Velocity grid half range in standard deviations.
    pub span: f64,
}

impl Default for RecoilEnsemble {
    fn default() -> Self {
        RecoilEnsemble { nodes: 161, span: 6.0 }
    }
}

impl RecoilEnsemble {
    /// Unnormalized conditional density of `x2` along `x2s`.
    pub fn conditional_density(
        &self,
        cfg: &BarrierWavegroupConfig,
        params: &SystemParams,
        x1: f64,
        t1: f64,
        t2: f64,
        x2s: &[f64],
    ) -> Vec<f64> {
        let (m1, m2, hbar, d) = (params.m1, params.m2, params.hbar, params.half_width);
        let mt = params.total_mass();
        let sx1 = hbar / (std::f64::consts::SQRT_2 * m1 * cfg.v1_width);
        let sx2 = hbar / (std::f64::consts::SQRT_2 * m2 * cfg.v2_width);
        let sv1 = cfg.v1_width / std::f64::consts::SQRT_2;
        let sv2 = cfg.v2_width / std::f64::consts::SQRT_2;
        let (a11, a12) = ((m1 - m2) / mt, 2.0 * m2 / mt);
        let (a21, a22) = (2.0 * m1 / mt, (m2 - m1) / mt);
        // Covariance of the mapped initial positions.
        let c11 = a11 * a11 * sx1 * sx1 + a12 * a12 * sx2 * sx2;
        let c22 = a21 * a21 * sx1 * sx1 + a22 * a22 * sx2 * sx2;
        let c12 = a11 * a21 * sx1 * sx1 + a12 * a22 * sx2 * sx2;
        let det = c11 * c22 - c12 * c12;
        let grid = |center: f64, sigma: f64| -> Vec<(f64, f64)> {
            let n = self.nodes.max(2);
            (0..n)
                .map(|i| {
                    let z = -self.span + 2.0 * self.span * i as f64 / (n - 1) as f64;
                    (center + z * sigma, (-0.5 * z * z).exp())
                })
                .collect()
        };
        let v1s = grid(cfg.v1_center, sv1);
        let v2s = grid(cfg.v2_center, sv2);
        let mut out = vec![0.0; x2s.len()];
        for &(v2, w2) in &v2s {
            for &(v1, w1) in &v1s {
                if v1 <= v2 {
                    continue;
                }
                let out_v = elastic_recoil(VelocityPair::new(v1, v2), params);
                let mu1 = -2.0 * m2 * d / mt + out_v.v1 * t1;
                let mu2 = 2.0 * m1 * d / mt + out_v.v2 * t2;
                let dx1 = x1 - mu1;
                let w = w1 * w2 / det.sqrt();
                for (o, &x2) in out.iter_mut().zip(x2s) {
                    if x1 - x2 >= -d {
                        continue;
                    }
                    let dx2 = x2 - mu2;
                    let q = (c22 * dx1 * dx1 - 2.0 * c12 * dx1 * dx2 + c11 * dx2 * dx2) / det;
                    *o += w * (-0.5 * q).exp();
                }
            }
        }
        out
    }

    /// Most probable `x2` of the reflected part, refined by parabolic
    /// interpolation on `x2_axis`.
    pub fn predicted_partner_position(
        &self,
        cfg: &BarrierWavegroupConfig,
        params: &SystemParams,
        x1: f64,
        t1: f64,
        t2: f64,
        x2_axis: &Axis,
    ) -> f64 {
        let xs = x2_axis.values();
        let dens = self.conditional_density(cfg, params, x1, t1, t2, &xs);
        let peaks = find_peaks_1d(x2_axis, &dens, 0.0, 1);
        peaks.first().map(|p| p.col).unwrap_or(f64::NAN)
    }
}

/// Free-flight position of the partner's incident packet at time `t2`.
pub fn free_flight_position(cfg: &BarrierWavegroupConfig, t2: f64) -> f64 {
    cfg.v2_center * t2
}

/// Single-trajectory recoil estimate for the central velocities: the partner
/// sits at the collision point when the particle reaches `x_rel = −D`, then
/// moves with the recoil velocity.
pub fn single_trajectory_recoil_position(cfg: &BarrierWavegroupConfig, params: &SystemParams, t2: f64) -> f64 {
    let vp = cfg.center();
    let t_r = -params.half_width / (vp.v2 - vp.v1);
    let out = elastic_recoil(vp, params);
    vp.v2 * t_r + out.v2 * (t2 - t_r)
}

/// Center of the front-surface reflected packet at synchronous time `t` for the
/// central velocities.
pub fn reflected_center(cfg: &BarrierWavegroupConfig, params: &SystemParams, t: f64) -> (f64, f64) {
    let out = elastic_recoil(cfg.center(), params);
    let mt = params.total_mass();
    let d = params.half_width;
    (
        -2.0 * params.m2 * d / mt + out.v1 * t,
        2.0 * params.m1 * d / mt + out.v2 * t,
    )
}

/// Height of the reflected peak of `state` near the classical reflected center,
/// found by a coarse grid search over the region before the interaction and two
/// successive zooms.
pub fn reflected_peak_height(state: &TwoBodyState, cfg: &BarrierWavegroupConfig, params: &SystemParams, t: f64) -> f64 {
    let (c1, c2) = reflected_center(cfg, params, t);
    let (m1, m2, hbar) = (params.m1, params.m2, params.hbar);
    let s1 = hbar / (m1 * cfg.v1_width) + cfg.v1_width * t.abs();
    let s2 = hbar / (m2 * cfg.v2_width) + cfg.v2_width * t.abs();
    let mut half = (3.0 * s1, 3.0 * s2);
    let mut center = (c1, c2);
    let mut best = 0.0;
    let n = 41;
    for _ in 0..3 {
        let grid = GridSpec {
            x1: Axis {
                lo: center.0 - half.0,
                hi: center.0 + half.0,
                n,
            },
            x2: Axis {
                lo: center.1 - half.1,
                hi: center.1 + half.1,
                n,
            },
        };
        let snap = snapshot(state, &grid, t);
        for r in 0..n {
            for c in 0..n {
                let (x1, x2) = (grid.x1.value(r), grid.x2.value(c));
                let v = snap.get(r, c);
                if v > best && state.region_at(&LabPoint::synchronous(x1, x2, t)) == Some(Region::Left) {
                    best = v;
                    center = (x1, x2);
                }
            }
        }
        half = (half.0 * 4.0 / (n - 1) as f64, half.1 * 4.0 / (n - 1) as f64);
    }
    best
}

/// Reflected peak height versus half width `D`, all other inputs fixed.
pub fn type2_visibility(
    cfg: &BarrierWavegroupConfig,
    params: &SystemParams,
    half_widths: &[f64],
    t: f64,
) -> Result<Vec<(f64, f64)>> {
    half_widths
        .iter()
        .map(|&d| {
            let p = params.with_half_width(d);
            p.validate()?;
            let wg = barrier_wavegroup_state(cfg, &p, PotentialPhase::Omitted)?;
            Ok((d, reflected_peak_height(&wg.state, cfg, &p, t)))
        })
        .collect()
}

/// Period in `D` of the two-surface interference: the back-surface path is
/// longer by `4D` in `x_rel`, so extrema repeat every `π/(2·K_inside)`.
pub fn two_surface_period(vp: VelocityPair, params: &SystemParams) -> Result<f64> {
    let kin = eigen::branch_kinematics(Branch::Forward, vp, params)?;
    let mt = params.total_mass();
    let k_inside = ((params.m2 * kin.p1 - params.m1 * kin.p2) / (mt * params.hbar))
        .re
        .abs();
    if k_inside == 0.0 {
        return Err(Error::invalid(
            "potential",
            "no propagating wave inside the interaction region",
        ));
    }
    Ok(std::f64::consts::PI / (2.0 * k_inside))
}

/// Interior extrema of a sampled curve, refined by parabolic interpolation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Extrema {
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
}

pub fn interior_extrema(samples: &[(f64, f64)]) -> Extrema {
    let mut out = Extrema::default();
    for w in samples.windows(3) {
        let ((_, y0), (x1, y1), (x2, y2)) = (w[0], w[1], w[2]);
        let h = x2 - x1;
        if y1 > y0 && y1 >= y2 {
            out.maxima.push(x1 + parabolic_offset(y0, y1, y2) * h);
        } else if y1 < y0 && y1 <= y2 {
            out.minima.push(x1 + parabolic_offset(-y0, -y1, -y2) * h);
        }
    }
    out
}

impl Extrema {
    /// Period estimated from all interior extrema: successive extrema are half a
    /// period apart. `None` without at least one maximum and one minimum.
    pub fn period(&self) -> Option<f64> {
        if self.maxima.is_empty() || self.minima.is_empty() {
            return None;
        }
        let mut all: Vec<f64> = self.maxima.iter().chain(&self.minima).copied().collect();
        all.sort_by(f64::total_cmp);
        Some(2.0 * (all[all.len() - 1] - all[0]) / (all.len() - 1) as f64)
    }
}

/// Relative wavevector of the channel, exposed for reports.
pub fn relative_wavevector(vp: VelocityPair, params: &SystemParams) -> f64 {
    channel_wavevectors(vp, params).k_rel
}
