//! Joint PDFs, probability currents, grids, and conservation residuals.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabPoint, Potential, SystemParams};
use crate::state::{expi, Region, TwoBodyState};

/// Default finite-difference step as a fraction of the shortest wavelength.
pub const DEFAULT_WAVELENGTH_FRACTION: f64 = 5000.0;

/// Largest tolerated single-wave truncation estimate `θ²/6` of a central difference.
pub const MAX_STENCIL_ERROR: f64 = 0.01;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Uniformly spaced closed interval `[lo, hi]` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let a = Axis { lo, hi, n };
        a.validate("axis")?;
        Ok(a)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err(Error::validation(
                field,
                format!("need lo < hi, got [{}, {}]", self.lo, self.hi),
            ));
        }
        if self.n < 2 {
            return Err(Error::validation(
                field,
                format!("need at least 2 points, got {}", self.n),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    /// Index of the grid point nearest to `x` (clamped).
    pub fn nearest(&self, x: f64) -> usize {
        let f = ((x - self.lo) / self.spacing()).round();
        f.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn shifted(&self, by: f64) -> Axis {
        Axis {
            lo: self.lo + by,
            hi: self.hi + by,
            n: self.n,
        }
    }
}

/// Spatial window of a synchronous snapshot: `x1` along rows, `x2` along columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x1: Axis,
    pub x2: Axis,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.x1.validate("x1")?;
        self.x2.validate("x2")
    }

    pub fn min_spacing(&self) -> f64 {
        self.x1.spacing().min(self.x2.spacing())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Pdf,
    J1,
    J2,
    Residual,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Pdf => "pdf",
            FieldKind::J1 => "j1",
            FieldKind::J2 => "j2",
            FieldKind::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Raw,
    Max1,
}

impl Normalization {
    pub fn name(&self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::Max1 => "max1",
        }
    }
}

/// Real values on a rectangular grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub kind: FieldKind,
    pub normalization: Normalization,
    pub row_name: String,
    pub rows: Axis,
    pub col_name: String,
    pub cols: Axis,
    /// Coordinates held fixed over the grid, e.g. `t1` and `t2` of a snapshot.
    pub fixed: Vec<(String, f64)>,
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn nrows(&self) -> usize {
        self.rows.n
    }

    pub fn ncols(&self) -> usize {
        self.cols.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols.n + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols.n..(r + 1) * self.cols.n]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows.n).map(|r| self.get(r, c)).collect()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rescales so the largest magnitude is one. Grids that are identically zero
    /// are left unchanged.
    pub fn normalized(mut self, normalization: Normalization) -> Self {
        if normalization == Normalization::Max1 && self.normalization == Normalization::Raw {
            let m = self.max_abs();
            if m > 0.0 {
                for v in &mut self.values {
                    *v /= m;
                }
            }
            self.normalization = Normalization::Max1;
        }
        self
    }

    pub fn fixed_value(&self, name: &str) -> Option<f64> {
        self.fixed.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

pub fn joint_pdf(state: &TwoBodyState, p: &LabPoint) -> f64 {
    state.amplitude(p).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Currents {
    pub j1: f64,
    pub j2: f64,
}

fn current_from(hbar: f64, mass: f64, psi: C64, dpsi: C64) -> f64 {
    hbar / mass * (psi.conj() * dpsi).im
}

/// Probability currents from analytic branch derivatives.
pub fn currents(state: &TwoBodyState, p: &LabPoint) -> Currents {
    let g = state.gradient(p);
    let (m1, m2) = state.masses();
    Currents {
        j1: current_from(state.hbar(), m1, g.psi, g.d_x1),
        j2: current_from(state.hbar(), m2, g.psi, g.d_x2),
    }
}

/// Probability currents from central differences of the amplitude, evaluated
/// with the region of `p` throughout. Estimates with steps `h` and `h/2` must
/// agree to 1%, otherwise the step is rejected.
pub fn currents_fd(state: &TwoBodyState, p: &LabPoint, h: f64) -> Result<Currents> {
    let Some(region) = state.region_at(p) else {
        return Ok(Currents { j1: 0.0, j2: 0.0 });
    };
    let psi = state.amplitude_in(region, p);
    let (m1, m2) = state.masses();
    let hbar = state.hbar();
    let at = |dx1: f64, dx2: f64| {
        state.amplitude_in(
            region,
            &LabPoint {
                x1: p.x1 + dx1,
                x2: p.x2 + dx2,
                ..*p
            },
        )
    };
    let derivatives = |step: f64| {
        (
            (at(step, 0.0) - at(-step, 0.0)) / (2.0 * step),
            (at(0.0, step) - at(0.0, -step)) / (2.0 * step),
        )
    };
    let (c1, c2) = derivatives(h);
    let (f1, f2) = derivatives(0.5 * h);
    let coarse = (current_from(hbar, m1, psi, c1), current_from(hbar, m2, psi, c2));
    let fine = (current_from(hbar, m1, psi, f1), current_from(hbar, m2, psi, f2));
    let scale = coarse.0.abs().max(coarse.1.abs()).max(fine.0.abs()).max(fine.1.abs());
    if scale > 0.0 {
        let disagreement = (coarse.0 - fine.0).abs().max((coarse.1 - fine.1).abs()) / scale;
        if disagreement > MAX_STENCIL_ERROR {
            return Err(Error::StepTooCoarse { disagreement });
        }
    }
    // Richardson extrapolation of the two central differences.
    let d1 = (f1 * 4.0 - c1) / 3.0;
    let d2 = (f2 * 4.0 - c2) / 3.0;
    Ok(Currents {
        j1: current_from(hbar, m1, psi, d1),
        j2: current_from(hbar, m2, psi, d2),
    })
}

/// Finite-difference steps: `h` for both coordinates, `ht` for both times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub h: f64,
    pub ht: f64,
}

impl FdSteps {
    /// Spatial step `min(grid spacing, λ_min/5000)`, with `λ_min` the shortest
    /// wavelength in the expansion; the time step covers the same distance at
    /// the largest group speed.
    pub fn auto(state: &TwoBodyState, grid_spacing: f64) -> Self {
        let kmax = state.max_wavevector();
        let h = if kmax > 0.0 {
            grid_spacing.min(2.0 * std::f64::consts::PI / kmax / DEFAULT_WAVELENGTH_FRACTION)
        } else {
            grid_spacing
        };
        Self::with_spatial(state, h)
    }

    pub fn with_spatial(state: &TwoBodyState, h: f64) -> Self {
        let vmax = state.max_speed();
        FdSteps {
            h,
            ht: if vmax > 0.0 { h / vmax } else { h },
        }
    }

    /// Largest phase advance of any single term across one step.
    fn max_phase_step(&self, state: &TwoBodyState) -> f64 {
        state
            .terms()
            .iter()
            .flat_map(|t| {
                [
                    t.k1.norm() * self.h,
                    t.k2.norm() * self.h,
                    t.w1.norm() * self.ht,
                    t.w2.norm() * self.ht,
                ]
            })
            .fold(0.0, f64::max)
    }

    /// Rejects steps whose central-difference truncation estimate for a single
    /// plane-wave term exceeds 1%.
    pub fn check(&self, state: &TwoBodyState) -> Result<()> {
        if !(self.h > 0.0 && self.ht > 0.0) {
            return Err(Error::invalid("fd_step", "finite-difference steps must be positive"));
        }
        let theta = self.max_phase_step(state);
        let estimate = theta * theta / 6.0;
        if estimate > MAX_STENCIL_ERROR {
            return Err(Error::StepTooCoarse { disagreement: estimate });
        }
        Ok(())
    }
}

/// Signed local-conservation residual `∂t1 P + ∂t2 P + ∂x1 j1 + ∂x2 j2` and the
/// magnitude of its largest term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            0.0
        }
    }
}

/// Per-term multipliers that shift a plane-wave term by one stencil step.
#[derive(Debug, Clone, Copy)]
struct StencilShift {
    x1p: C64,
    x1m: C64,
    x2p: C64,
    x2m: C64,
    t1p: C64,
    t1m: C64,
    t2p: C64,
    t2m: C64,
    ik1: C64,
    ik2: C64,
}

fn stencil_shifts(state: &TwoBodyState, steps: &FdSteps) -> Vec<StencilShift> {
    state
        .terms()
        .iter()
        .map(|t| StencilShift {
            x1p: expi(t.k1 * steps.h),
            x1m: expi(-(t.k1 * steps.h)),
            x2p: expi(t.k2 * steps.h),
            x2m: expi(-(t.k2 * steps.h)),
            t1p: expi(-(t.w1 * steps.ht)),
            t1m: expi(t.w1 * steps.ht),
            t2p: expi(-(t.w2 * steps.ht)),
            t2m: expi(t.w2 * steps.ht),
            ik1: I * t.k1,
            ik2: I * t.k2,
        })
        .collect()
}

struct StencilContext {
    shifts: Vec<StencilShift>,
    steps: FdSteps,
    hbar: f64,
    m1: f64,
    m2: f64,
}

impl StencilContext {
    fn new(state: &TwoBodyState, steps: FdSteps) -> Self {
        let (m1, m2) = state.masses();
        StencilContext {
            shifts: stencil_shifts(state, &steps),
            steps,
            hbar: state.hbar(),
            m1,
            m2,
        }
    }

    /// Residual at a point whose particle and partner factors for the term
    /// range `range` are `a` and `b`. Returns the residual and `|Ψ|²`.
    #[inline]
    fn residual(&self, range: std::ops::Range<usize>, a: &[C64], b: &[C64]) -> (Residual, f64) {
        let mut psi = ZERO;
        let (mut t1p, mut t1m, mut t2p, mut t2m) = (ZERO, ZERO, ZERO, ZERO);
        let (mut x1p, mut x1m, mut x2p, mut x2m) = (ZERO, ZERO, ZERO, ZERO);
        let (mut d1p, mut d1m, mut d2p, mut d2m) = (ZERO, ZERO, ZERO, ZERO);
        let shifts = &self.shifts[range.clone()];
        let a = &a[range.clone()];
        let b = &b[range];
        for ((s, &ak), &bk) in shifts.iter().zip(a).zip(b) {
            let p = ak * bk;
            psi += p;
            t1p += p * s.t1p;
            t1m += p * s.t1m;
            t2p += p * s.t2p;
            t2m += p * s.t2m;
            let v = p * s.x1p;
            x1p += v;
            d1p += v * s.ik1;
            let v = p * s.x1m;
            x1m += v;
            d1m += v * s.ik1;
            let v = p * s.x2p;
            x2p += v;
            d2p += v * s.ik2;
            let v = p * s.x2m;
            x2m += v;
            d2m += v * s.ik2;
        }
        let FdSteps { h, ht } = self.steps;
        let dp1 = (t1p.norm_sqr() - t1m.norm_sqr()) / (2.0 * ht);
        let dp2 = (t2p.norm_sqr() - t2m.norm_sqr()) / (2.0 * ht);
        let dj1 = (current_from(self.hbar, self.m1, x1p, d1p) - current_from(self.hbar, self.m1, x1m, d1m)) / (2.0 * h);
        let dj2 = (current_from(self.hbar, self.m2, x2p, d2p) - current_from(self.hbar, self.m2, x2m, d2m)) / (2.0 * h);
        let scale = dp1.abs().max(dp2.abs()).max(dj1.abs()).max(dj2.abs());
        (
            Residual {
                value: dp1 + dp2 + dj1 + dj2,
                scale,
            },
            psi.norm_sqr(),
        )
    }
}

fn particle_factors(state: &TwoBodyState, x1: f64, t1: f64, out: &mut Vec<C64>) {
    out.clear();
    out.extend(state.terms().iter().map(|t| t.particle_factor(x1, t1)));
}

/// Local conservation residual at `p` by central differences. All stencil
/// points are evaluated with the region of `p`, so stencils straddling a region
/// boundary do not pick up the kink of the piecewise solution.
pub fn conservation_residual(state: &TwoBodyState, p: &LabPoint, steps: FdSteps) -> Result<Residual> {
    steps.check(state)?;
    let Some(region) = state.region_at(p) else {
        return Ok(Residual { value: 0.0, scale: 0.0 });
    };
    let ctx = StencilContext::new(state, steps);
    let mut a = Vec::new();
    particle_factors(state, p.x1, p.t1, &mut a);
    let b: Vec<C64> = state.terms().iter().map(|t| t.partner_factor(p.x2, p.t2)).collect();
    Ok(ctx.residual(state.range_of(region), &a, &b).0)
}

/// Upper bound on complex values held in one block of partner factors.
const BLOCK_VALUES: usize = 1 << 21;

fn column_block(n_terms: usize, ncols: usize) -> usize {
    (BLOCK_VALUES / n_terms.max(1)).clamp(1, ncols.max(1))
}

/// Evaluates `f(range, a, b)` at every point of a grid whose rows share particle
/// factors `a` (built by `row_factors`) and whose columns share partner factors
/// `b` (built by `col_factors`). `x_rel(r, c)` selects the region.
fn grid_map<T, RF, CF, XR, F>(
    state: &TwoBodyState,
    nrows: usize,
    ncols: usize,
    row_factors: RF,
    col_factors: CF,
    x_rel: XR,
    f: F,
) -> Vec<T>
where
    T: Send + Clone + Default,
    RF: Fn(usize, &mut Vec<C64>) + Sync,
    CF: Fn(usize, &mut Vec<C64>) + Sync,
    XR: Fn(usize, usize) -> f64 + Sync,
    F: Fn(std::ops::Range<usize>, &[C64], &[C64]) -> T + Sync,
{
    let n_terms = state.len();
    let mut out = vec![T::default(); nrows * ncols];
    let block = column_block(n_terms, ncols);
    let support = state.support();
    let ranges = [
        (Region::Left, state.range_of(Region::Left)),
        (Region::Middle, state.range_of(Region::Middle)),
        (Region::Right, state.range_of(Region::Right)),
        (Region::Everywhere, state.range_of(Region::Everywhere)),
    ];
    let range_for = |r: Region| {
        ranges
            .iter()
            .find(|(x, _)| *x == r)
            .map(|(_, g)| g.clone())
            .unwrap_or(0..0)
    };
    let mut c0 = 0;
    while c0 < ncols {
        let c1 = (c0 + block).min(ncols);
        let table: Vec<Vec<C64>> = (c0..c1)
            .into_par_iter()
            .map(|c| {
                let mut v = Vec::with_capacity(n_terms);
                col_factors(c, &mut v);
                v
            })
            .collect();
        out.par_chunks_mut(ncols).enumerate().for_each(|(r, row_out)| {
            let mut a = Vec::with_capacity(n_terms);
            row_factors(r, &mut a);
            for (c, b) in (c0..c1).zip(&table) {
                if let Some(region) = support.region_of(x_rel(r, c)) {
                    row_out[c] = f(range_for(region), &a, b);
                }
            }
        });
        c0 = c1;
    }
    out
}

fn pdf_of(range: std::ops::Range<usize>, a: &[C64], b: &[C64]) -> f64 {
    let mut acc = ZERO;
    for (&ak, &bk) in a[range.clone()].iter().zip(&b[range]) {
        acc += ak * bk;
    }
    acc.norm_sqr()
}

/// Synchronous PDF snapshot at `t1 = t2 = t`: rows are `x1`, columns `x2`.
pub fn snapshot(state: &TwoBodyState, grid: &GridSpec, t: f64) -> FieldGrid {
    two_time_snapshot(state, grid, t, t)
}

/// PDF over the `(x1, x2)` window with separate time labels: rows are `x1`,
/// columns `x2`.
pub fn two_time_snapshot(state: &TwoBodyState, grid: &GridSpec, t1: f64, t2: f64) -> FieldGrid {
    let x1 = grid.x1.values();
    let x2 = grid.x2.values();
    let values = grid_map(
        state,
        x1.len(),
        x2.len(),
        |r, out| particle_factors(state, x1[r], t1, out),
        |c, out| out.extend(state.terms().iter().map(|tm| tm.partner_factor(x2[c], t2))),
        |r, c| x1[r] - x2[c],
        pdf_of,
    );
    FieldGrid {
        kind: FieldKind::Pdf,
        normalization: Normalization::Raw,
        row_name: "x1".into(),
        rows: grid.x1,
        col_name: "x2".into(),
        cols: grid.x2,
        fixed: vec![("t1".into(), t1), ("t2".into(), t2)],
        values,
    }
}

/// Current density snapshot (`j1` or `j2`) at `t1 = t2 = t`.
pub fn current_snapshot(state: &TwoBodyState, grid: &GridSpec, t: f64, kind: FieldKind) -> Result<FieldGrid> {
    let x1 = grid.x1.values();
    let x2 = grid.x2.values();
    let (m1, m2) = state.masses();
    let hbar = state.hbar();
    let (mass, use_k1) = match kind {
        FieldKind::J1 => (m1, true),
        FieldKind::J2 => (m2, false),
        _ => return Err(Error::invalid("kind", "current snapshots need j1 or j2")),
    };
    let terms = state.terms();
    let values = grid_map(
        state,
        x1.len(),
        x2.len(),
        |r, out| particle_factors(state, x1[r], t, out),
        |c, out| out.extend(terms.iter().map(|tm| tm.partner_factor(x2[c], t))),
        |r, c| x1[r] - x2[c],
        |range, a, b| {
            let mut psi = ZERO;
            let mut d = ZERO;
            for k in range {
                let v = a[k] * b[k];
                psi += v;
                d += I * if use_k1 { terms[k].k1 } else { terms[k].k2 } * v;
            }
            current_from(hbar, mass, psi, d)
        },
    );
    Ok(FieldGrid {
        kind,
        normalization: Normalization::Raw,
        row_name: "x1".into(),
        rows: grid.x1,
        col_name: "x2".into(),
        cols: grid.x2,
        fixed: vec![("t1".into(), t), ("t2".into(), t)],
        values,
    })
}

/// PDF over `(t2, x2)` with the particle frozen at `(x1, t1)`: rows are `t2`,
/// columns `x2`. The row with `t2 = t1` reproduces the matching snapshot row
/// bit for bit.
pub fn asynchronous_slice(state: &TwoBodyState, x1: f64, t1: f64, x2: &Axis, t2: &Axis) -> FieldGrid {
    let xs = x2.values();
    let ts = t2.values();
    let mut a = Vec::new();
    particle_factors(state, x1, t1, &mut a);
    let a = &a;
    let n_terms = state.len();
    let support = state.support();
    let space: Vec<Vec<C64>> = xs
        .par_iter()
        .map(|&x| state.terms().iter().map(|tm| tm.partner_space(x)).collect())
        .collect();
    let mut out = vec![0.0; ts.len() * xs.len()];
    out.par_chunks_mut(xs.len()).enumerate().for_each(|(r, row)| {
        let time: Vec<C64> = state.terms().iter().map(|tm| tm.partner_time(ts[r])).collect();
        let mut b = vec![ZERO; n_terms];
        for (c, sp) in space.iter().enumerate() {
            let Some(region) = support.region_of(x1 - xs[c]) else {
                continue;
            };
            let range = state.range_of(region);
            for k in range.clone() {
                b[k] = sp[k] * time[k];
            }
            row[c] = pdf_of(range, a, &b);
        }
    });
    FieldGrid {
        kind: FieldKind::Pdf,
        normalization: Normalization::Raw,
        row_name: "t2".into(),
        rows: *t2,
        col_name: "x2".into(),
        cols: *x2,
        fixed: vec![("x1".into(), x1), ("t1".into(), t1)],
        values: out,
    }
}

/// Options for conservation statistics over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationOptions {
    /// Points with `|Ψ|²` below this fraction of the grid maximum are excluded
    /// from the statistics; their residuals are dominated by roundoff.
    pub significance: f64,
}

impl Default for ConservationOptions {
    fn default() -> Self {
        ConservationOptions { significance: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationMap {
    /// Relative residual `|residual|/scale` per grid point.
    pub grid: FieldGrid,
    pub max_relative: f64,
    pub mean_relative: f64,
    pub significant_points: usize,
    pub pdf_max: f64,
    pub steps: FdSteps,
}

/// Local conservation residual on every point of a snapshot grid at time `t`.
pub fn conservation_map(
    state: &TwoBodyState,
    grid: &GridSpec,
    t: f64,
    steps: FdSteps,
    opts: ConservationOptions,
) -> Result<ConservationMap> {
    steps.check(state)?;
    let ctx = StencilContext::new(state, steps);
    let x1 = grid.x1.values();
    let x2 = grid.x2.values();
    let cells: Vec<(f64, f64)> = grid_map(
        state,
        x1.len(),
        x2.len(),
        |r, out| particle_factors(state, x1[r], t, out),
        |c, out| out.extend(state.terms().iter().map(|tm| tm.partner_factor(x2[c], t))),
        |r, c| x1[r] - x2[c],
        |range, a, b| {
            let (res, pdf) = ctx.residual(range, a, b);
            (res.relative(), pdf)
        },
    );
    let pdf_max = cells.iter().map(|c| c.1).fold(0.0, f64::max);
    let floor = opts.significance * pdf_max;
    let mut max_relative: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for &(rel, pdf) in &cells {
        if pdf > 0.0 && pdf >= floor {
            max_relative = max_relative.max(rel);
            sum += rel;
            count += 1;
        }
    }
    Ok(ConservationMap {
        grid: FieldGrid {
            kind: FieldKind::Residual,
            normalization: Normalization::Raw,
            row_name: "x1".into(),
            rows: grid.x1,
            col_name: "x2".into(),
            cols: grid.x2,
            fixed: vec![("t1".into(), t), ("t2".into(), t)],
            values: cells.iter().map(|c| c.0).collect(),
        },
        max_relative,
        mean_relative: if count > 0 { sum / count as f64 } else { 0.0 },
        significant_points: count,
        pdf_max,
        steps,
    })
}

/// Which body's coordinate a segment runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Particle,
    Partner,
}

/// Segment `[a, b]` along one body's coordinate at synchronous time `t`, with
/// the other body fixed at `fixed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub along: Body,
    pub fixed: f64,
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentBalance {
    /// Time derivative of the probability inside the segment.
    pub rate: f64,
    pub flux_a: f64,
    pub flux_b: f64,
    pub residual: Residual,
}

/// Largest node spacing of the segment quadrature, as a phase advance per node.
const SEGMENT_PHASE_STEP: f64 = 0.05;
/// Exact re-evaluation interval of the node-to-node recurrence.
const RESEED: usize = 256;

/// Balance `d/dt ∫_a^b P + j(b) − j(a)` for a segment, where the time derivative
/// acts on the moving body's time label only. The integral is split at region
/// boundaries, each piece integrated by Simpson's rule with its own
/// region's expansion, and differentiated by central differences in time.
pub fn segment_balance(state: &TwoBodyState, seg: &Segment, steps: FdSteps) -> Result<SegmentBalance> {
    steps.check(state)?;
    if !(seg.b > seg.a) {
        return Err(Error::invalid("segment", "need a < b"));
    }
    let support = state.support();
    // Positions along the segment where x_rel crosses a region boundary.
    let mut cuts = vec![seg.a];
    for xb in support.boundaries() {
        let c = match seg.along {
            Body::Particle => seg.fixed + xb,
            Body::Partner => seg.fixed - xb,
        };
        if c > seg.a && c < seg.b {
            cuts.push(c);
        }
    }
    cuts.push(seg.b);
    cuts.sort_by(f64::total_cmp);
    let kmax = state
        .terms()
        .iter()
        .map(|t| match seg.along {
            Body::Particle => t.k1.re.abs(),
            Body::Partner => t.k2.re.abs(),
        })
        .fold(0.0, f64::max);
    let spacing = if kmax > 0.0 {
        SEGMENT_PHASE_STEP / kmax
    } else {
        seg.b - seg.a
    };
    let integral = |time: f64| -> f64 {
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let x_rel = match seg.along {
                Body::Particle => mid - seg.fixed,
                Body::Partner => seg.fixed - mid,
            };
            let Some(region) = support.region_of(x_rel) else {
                continue;
            };
            let n = (((hi - lo) / spacing).ceil() as usize).max(2).next_multiple_of(2);
            total += simpson_piece(state, region, seg, lo, hi, n, time);
        }
        total
    };
    let rate = (integral(seg.t + steps.ht) - integral(seg.t - steps.ht)) / (2.0 * steps.ht);
    let flux = |x: f64| {
        let p = match seg.along {
            Body::Particle => LabPoint::synchronous(x, seg.fixed, seg.t),
            Body::Partner => LabPoint::synchronous(seg.fixed, x, seg.t),
        };
        let c = currents(state, &p);
        match seg.along {
            Body::Particle => c.j1,
            Body::Partner => c.j2,
        }
    };
    let flux_a = flux(seg.a);
    let flux_b = flux(seg.b);
    Ok(SegmentBalance {
        rate,
        flux_a,
        flux_b,
        residual: Residual {
            value: rate + flux_b - flux_a,
            scale: rate.abs().max(flux_a.abs()).max(flux_b.abs()),
        },
    })
}

/// Simpson integral of `|Ψ|²` over an even number `n` of intervals of `[lo, hi]` using the
/// terms of `region`, with the moving body's time set to `time` and the other
/// body's time to `seg.t`.
fn simpson_piece(state: &TwoBodyState, region: Region, seg: &Segment, lo: f64, hi: f64, n: usize, time: f64) -> f64 {
    let terms = state.terms_in(region);
    let dx = (hi - lo) / n as f64;
    // Fixed factor per term and the moving factor at the current node.
    let fixed: Vec<C64> = terms
        .iter()
        .map(|t| match seg.along {
            Body::Particle => t.partner_factor(seg.fixed, seg.t),
            Body::Partner => t.particle_factor(seg.fixed, seg.t),
        })
        .collect();
    let moving_at = |t: &crate::state::Term, x: f64| match seg.along {
        Body::Particle => t.particle_factor(x, time),
        Body::Partner => t.partner_factor(x, time),
    };
    let step: Vec<C64> = terms
        .iter()
        .map(|t| match seg.along {
            Body::Particle => expi(t.k1 * dx),
            Body::Partner => expi(t.k2 * dx),
        })
        .collect();
    let mut moving: Vec<C64> = Vec::with_capacity(terms.len());
    let mut sum = 0.0;
    for i in 0..=n {
        let x = lo + dx * i as f64;
        if i % RESEED == 0 {
            moving.clear();
            moving.extend(terms.iter().map(|t| moving_at(t, x)));
        } else {
            for (m, s) in moving.iter_mut().zip(&step) {
                *m *= *s;
            }
        }
        let mut psi = ZERO;
        for (m, f) in moving.iter().zip(&fixed) {
            psi += *m * *f;
        }
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * psi.norm_sqr();
    }
    sum * dx / 3.0
}

/// Residual of the two-time Schrödinger equation
/// `iħ(∂t1 + ∂t2)Ψ = −ħ²/2m1 ∂²x1 Ψ − ħ²/2m2 ∂²x2 Ψ + V(x_rel)Ψ`
/// by five-point second differences in space and central differences in time,
/// evaluated from amplitudes only, with the region of `p` held fixed.
pub fn schrodinger_residual(state: &TwoBodyState, params: &SystemParams, p: &LabPoint, h: f64, ht: f64) -> Residual {
    let Some(region) = state.region_at(p) else {
        return Residual { value: 0.0, scale: 0.0 };
    };
    let at = |dx1: f64, dx2: f64, dt1: f64, dt2: f64| {
        state.amplitude_in(region, &LabPoint::new(p.x1 + dx1, p.x2 + dx2, p.t1 + dt1, p.t2 + dt2))
    };
    let psi = at(0.0, 0.0, 0.0, 0.0);
    let second =
        |f: &dyn Fn(f64) -> C64| (-f(2.0 * h) + f(h) * 16.0 - psi * 30.0 + f(-h) * 16.0 - f(-2.0 * h)) / (12.0 * h * h);
    let d2x1 = second(&|s| at(s, 0.0, 0.0, 0.0));
    let d2x2 = second(&|s| at(0.0, s, 0.0, 0.0));
    let dt1 = (at(0.0, 0.0, ht, 0.0) - at(0.0, 0.0, -ht, 0.0)) / (2.0 * ht);
    let dt2 = (at(0.0, 0.0, 0.0, ht) - at(0.0, 0.0, 0.0, -ht)) / (2.0 * ht);
    let hbar = params.hbar;
    let pe = match (params.potential, region) {
        (Potential::Square { height }, Region::Middle) => height,
        _ => 0.0,
    };
    let lhs = [I * hbar * dt1, I * hbar * dt2];
    let rhs = [
        -d2x1 * (hbar * hbar / (2.0 * params.m1)),
        -d2x2 * (hbar * hbar / (2.0 * params.m2)),
        psi * pe,
    ];
    let diff = lhs[0] + lhs[1] - rhs[0] - rhs[1] - rhs[2];
    let scale = lhs.iter().chain(rhs.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    Residual {
        value: diff.norm(),
        scale,
    }
}
