//! Finite plane-wave expansions of two-time wavefunctions.
//!
//! Every eigenstate and wavegroup in this crate is a sum of terms
//! `c · exp(i(k1·x1 + k2·x2 − w1·t1 − w2·t2))`, each valid in one region of the
//! relative coordinate. A term factors into a particle part depending on
//! `(x1, t1)` and a partner part depending on `(x2, t2)`; grid evaluation tabulates
//! the two parts separately and combines them with one complex product per term.
//! Single-point and grid evaluation perform the same floating-point operations in
//! the same order, so they agree bit for bit.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::model::{LabPoint, SystemParams};

/// Interval of `x_rel` on which a term is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `x_rel < -D`
    Left,
    /// `-D <= x_rel <= D` (strict inequalities for the infinite well)
    Middle,
    /// `x_rel > D`
    Right,
    /// No interaction: valid for all `x_rel`.
    Everywhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    Free,
    /// Wavefunction vanishes unless `|x_rel| < half_width`.
    Well {
        half_width: f64,
    },
    /// Three regions split at `x_rel = ±half_width`.
    Square {
        half_width: f64,
    },
}

impl Support {
    pub fn region_of(&self, x_rel: f64) -> Option<Region> {
        match *self {
            Support::Free => Some(Region::Everywhere),
            Support::Well { half_width } => (x_rel.abs() < half_width).then_some(Region::Middle),
            Support::Square { half_width } => Some(if x_rel < -half_width {
                Region::Left
            } else if x_rel > half_width {
                Region::Right
            } else {
                Region::Middle
            }),
        }
    }

    /// Region boundaries in `x_rel`, ascending.
    pub fn boundaries(&self) -> Vec<f64> {
        match *self {
            Support::Free => Vec::new(),
            Support::Well { half_width } | Support::Square { half_width } => {
                vec![-half_width, half_width]
            }
        }
    }
}

/// One plane-wave term. Wavevectors `k` and angular frequencies `w` are complex
/// for evanescent branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: C64,
    pub k1: C64,
    pub k2: C64,
    pub w1: C64,
    pub w2: C64,
}

/// `exp(i z)`.
#[inline]
pub(crate) fn expi(z: C64) -> C64 {
    let scale = (-z.im).exp();
    let (s, c) = z.re.sin_cos();
    C64::new(scale * c, scale * s)
}

impl Term {
    #[inline]
    pub fn particle_space(&self, x1: f64) -> C64 {
        self.coef * expi(self.k1 * x1)
    }

    #[inline]
    pub fn particle_time(&self, t1: f64) -> C64 {
        expi(-(self.w1 * t1))
    }

    #[inline]
    pub fn partner_space(&self, x2: f64) -> C64 {
        expi(self.k2 * x2)
    }

    #[inline]
    pub fn partner_time(&self, t2: f64) -> C64 {
        expi(-(self.w2 * t2))
    }

    /// `c·exp(i(k1·x1 − w1·t1))`, always formed as space factor times time factor.
    #[inline]
    pub fn particle_factor(&self, x1: f64, t1: f64) -> C64 {
        self.particle_space(x1) * self.particle_time(t1)
    }

    /// `exp(i(k2·x2 − w2·t2))`, always formed as space factor times time factor.
    #[inline]
    pub fn partner_factor(&self, x2: f64, t2: f64) -> C64 {
        self.partner_space(x2) * self.partner_time(t2)
    }

    #[inline]
    pub fn value(&self, p: &LabPoint) -> C64 {
        self.particle_factor(p.x1, p.t1) * self.partner_factor(p.x2, p.t2)
    }
}

/// Amplitude and first derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub psi: C64,
    pub d_x1: C64,
    pub d_x2: C64,
    pub d_t1: C64,
    pub d_t2: C64,
}

#[derive(Debug, Clone)]
pub struct TwoBodyState {
    support: Support,
    m1: f64,
    m2: f64,
    hbar: f64,
    terms: Vec<Term>,
    segments: Vec<(Region, std::ops::Range<usize>)>,
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

impl TwoBodyState {
    /// Builds a state from region-tagged terms. Terms are grouped by region with
    /// a stable sort, so the order within each region is the insertion order.
    pub fn from_tagged(support: Support, params: &SystemParams, mut tagged: Vec<(Region, Term)>) -> Self {
        tagged.sort_by_key(|(r, _)| *r);
        let mut segments: Vec<(Region, std::ops::Range<usize>)> = Vec::new();
        for (i, (r, _)) in tagged.iter().enumerate() {
            match segments.last_mut() {
                Some((last, range)) if last == r => range.end = i + 1,
                _ => segments.push((*r, i..i + 1)),
            }
        }
        TwoBodyState {
            support,
            m1: params.m1,
            m2: params.m2,
            hbar: params.hbar,
            terms: tagged.into_iter().map(|(_, t)| t).collect(),
            segments,
        }
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.m1, self.m2)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Index range of the terms valid in `region` (empty if none).
    pub fn range_of(&self, region: Region) -> std::ops::Range<usize> {
        self.segments
            .iter()
            .find(|(r, _)| *r == region)
            .map(|(_, range)| range.clone())
            .unwrap_or(0..0)
    }

    pub fn terms_in(&self, region: Region) -> &[Term] {
        &self.terms[self.range_of(region)]
    }

    pub fn tagged_terms(&self) -> impl Iterator<Item = (Region, &Term)> {
        self.segments
            .iter()
            .flat_map(move |(r, range)| self.terms[range.clone()].iter().map(move |t| (*r, t)))
    }

    pub fn region_at(&self, p: &LabPoint) -> Option<Region> {
        self.support.region_of(p.x_rel())
    }

    pub fn amplitude(&self, p: &LabPoint) -> C64 {
        match self.region_at(p) {
            Some(r) => self.amplitude_in(r, p),
            None => C64::new(0.0, 0.0),
        }
    }

    /// Evaluates the terms of `region` regardless of which region `p` lies in.
    pub fn amplitude_in(&self, region: Region, p: &LabPoint) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for t in self.terms_in(region) {
            acc += t.value(p);
        }
        acc
    }

    pub fn gradient(&self, p: &LabPoint) -> Gradient {
        match self.region_at(p) {
            Some(r) => self.gradient_in(r, p),
            None => {
                let z = C64::new(0.0, 0.0);
                Gradient {
                    psi: z,
                    d_x1: z,
                    d_x2: z,
                    d_t1: z,
                    d_t2: z,
                }
            }
        }
    }

    pub fn gradient_in(&self, region: Region, p: &LabPoint) -> Gradient {
        let z = C64::new(0.0, 0.0);
        let mut g = Gradient {
            psi: z,
            d_x1: z,
            d_x2: z,
            d_t1: z,
            d_t2: z,
        };
        for t in self.terms_in(region) {
            let v = t.value(p);
            g.psi += v;
            g.d_x1 += I * t.k1 * v;
            g.d_x2 += I * t.k2 * v;
            g.d_t1 -= I * t.w1 * v;
            g.d_t2 -= I * t.w2 * v;
        }
        g
    }

    /// Largest real wavevector component over all terms.
    pub fn max_wavevector(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| [t.k1.re.abs(), t.k2.re.abs()])
            .fold(0.0, f64::max)
    }

    /// Largest group speed `ħ|Re k|/m` over all terms and both bodies.
    pub fn max_speed(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| [self.hbar * t.k1.re.abs() / self.m1, self.hbar * t.k2.re.abs() / self.m2])
            .fold(0.0, f64::max)
    }
}

/// Accumulates weighted copies of states sharing one support.
#[derive(Debug, Clone)]
pub struct StateBuilder {
    support: Support,
    params: SystemParams,
    tagged: Vec<(Region, Term)>,
}

impl StateBuilder {
    pub fn new(support: Support, params: &SystemParams) -> Self {
        StateBuilder {
            support,
            params: *params,
            tagged: Vec::new(),
        }
    }

    pub fn push(&mut self, region: Region, term: Term) {
        self.tagged.push((region, term));
    }

    pub fn push_scaled(&mut self, state: &TwoBodyState, weight: f64) {
        debug_assert_eq!(state.support, self.support);
        for (r, t) in state.tagged_terms() {
            self.tagged.push((
                r,
                Term {
                    coef: t.coef * weight,
                    ..*t
                },
            ));
        }
    }

    pub fn len(&self) -> usize {
        self.tagged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tagged.is_empty()
    }

    pub fn build(self) -> TwoBodyState {
        TwoBodyState::from_tagged(self.support, &self.params, self.tagged)
    }
}
