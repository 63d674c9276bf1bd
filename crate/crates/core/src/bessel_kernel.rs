//! Mellin–Barnes contours and the π-Bessel functions over ℝ and ℂ.
//!
//! Over ℝ the Bessel function is
//! `𝔟(±x) = ½ Σ_δ (±1)^δ (1/2πi) ∫_C γ(1 − s, π × sgn^δ, ψ) x^{−s} ds` for `x > 0`,
//! and the kernel is `k(x) = 𝔟(x)|x|^{1/2}`. Over ℂ it is the series
//! `J(z) = (1/2π) Σ_m j_m(|z|) [z]^m` with
//! `j_m(r) = (1/2πi) ∫_C γ(1 − s, π × [·]^m, ψ) r^{−2s} ds`, and `k(z) = J(z)|z|`.
//!
//! The contour `C` is the vertical line `Re s = σ′` with an optional
//! rectangular detour around the rightmost poles. For evaluation, the two
//! vertical tails are deformed (Cauchy) into rays leaving the line at 45°
//! towards the left at a height beyond the saddle point of the integrand,
//! where the integrand decays like a Gaussian and then super-exponentially.
//! All integrals use Gauss–Kronrod 21 panels whose widths follow the local
//! oscillation frequency and the distance to the nearest pole.

use crate::arch_local::{
    ln_dual_gamma, CharTwist, ComplexPlaceParams, PlaceParams, RealBlock, RealPlaceParams,
};
use crate::error::{Error, Result};
use crate::quadrature::{gk21_table, ChebPanel};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

/// Smallest accepted tolerance (`10^(−16+6)`).
pub const MIN_TOL: f64 = 1e-10;
/// Required distance between the contour and every pole.
pub const CLEARANCE: f64 = 0.1;
/// Default gap between the asymptote and its upper bound.
pub const ASYMPTOTE_MARGIN: f64 = 0.25;
/// Horizontal gap between the rightmost enclosed pole and the detour.
const DETOUR_GAP: f64 = 0.25;
/// Target phase change per panel.
const PHASE_PER_PANEL: f64 = 6.0;
/// Upper bound on a panel length.
const MAX_PANEL: f64 = 8.0;

/// Poles `base − k·step`, `k = 0, 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleFamily {
    pub base: Complex64,
    pub step: f64,
}

impl PoleFamily {
    /// Distance from `s` to the nearest pole of the family.
    pub fn distance(&self, s: Complex64) -> f64 {
        let k = ((self.base.re - s.re) / self.step).round().max(0.0);
        let mut best = f64::INFINITY;
        for kk in [k - 1.0, k, k + 1.0] {
            if kk >= 0.0 {
                best = best.min((s - (self.base - kk * self.step)).norm());
            }
        }
        best
    }

    fn poles_right_of(&self, limit: f64) -> Vec<Complex64> {
        let mut out = Vec::new();
        let mut k = 0.0;
        while self.base.re - k * self.step >= limit {
            out.push(self.base - k * self.step);
            k += 1.0;
        }
        out
    }
}

/// An admissible Mellin–Barnes contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    /// `σ′`: the path is `Re s = σ′` outside the detour section.
    pub asymptote: f64,
    /// Detour polyline (upward); empty when the vertical line clears every pole.
    pub nodes: Vec<Complex64>,
    /// Minimal distance between the path and the pole sets.
    pub clearance: f64,
    /// Pole families kept on the left.
    pub families: Vec<PoleFamily>,
    /// Growth degree of the integrand in `|Im s|` (rank over ℝ, twice the rank over ℂ).
    pub degree: usize,
}

/// Upper bound for the asymptote.
///
/// Over ℝ: `1/2 + (Re Σ n_j t_j − 1)/n`. Over ℂ the smaller of
/// `1/2 + (Re Σ t_j − 1)/(2n)` and the absolute-convergence bound
/// `1/2 + (Re Σ t_j − 1/2)/n`.
pub fn asymptote_bound(params: &PlaceParams) -> f64 {
    match params {
        PlaceParams::Real(p) => 0.5 + (p.weighted_t_sum().re - 1.0) / p.rank() as f64,
        PlaceParams::Complex(p) => {
            let n = p.rank() as f64;
            let ts = p.t_sum().re;
            (0.5 + (ts - 1.0) / (2.0 * n)).min(0.5 + (ts - 0.5) / n)
        }
    }
}

/// Pole families of `s ↦ γ(1 − s, π × χ)`. With `twist = None` the union over
/// all twists is returned (both parities over ℝ, every `m` over ℂ).
pub fn pole_families(params: &PlaceParams, twist: Option<CharTwist>) -> Vec<PoleFamily> {
    match params {
        PlaceParams::Real(p) => p
            .blocks
            .iter()
            .map(|b| match (*b, twist) {
                (RealBlock::Gl1 { t, .. }, None) => PoleFamily { base: t, step: 1.0 },
                (RealBlock::Gl1 { delta, t }, Some(tw)) => PoleFamily {
                    base: t - (delta as i64 + tw.0).rem_euclid(2) as f64,
                    step: 2.0,
                },
                (RealBlock::Ds2 { l, t }, _) => PoleFamily { base: t - l as f64 * 0.5, step: 1.0 },
            })
            .collect(),
        PlaceParams::Complex(p) => p
            .blocks
            .iter()
            .map(|b| match twist {
                None => PoleFamily { base: b.t, step: 0.5 },
                Some(m) => PoleFamily { base: b.t - (b.l + m.0).abs() as f64 * 0.5, step: 1.0 },
            })
            .collect(),
    }
}

fn degree(params: &PlaceParams) -> usize {
    match params {
        PlaceParams::Real(p) => p.rank(),
        PlaceParams::Complex(p) => 2 * p.rank(),
    }
}

/// Admissible contour with the default asymptote `bound − 0.25`.
pub fn build_contour(params: &PlaceParams, twist: Option<CharTwist>) -> Result<Contour> {
    build_contour_with_asymptote(params, twist, asymptote_bound(params) - ASYMPTOTE_MARGIN)
}

/// Admissible contour with a prescribed asymptote.
pub fn build_contour_with_asymptote(params: &PlaceParams, twist: Option<CharTwist>, sigma: f64) -> Result<Contour> {
    params.validate()?;
    let bound = asymptote_bound(params);
    if !(sigma < bound) {
        return Err(Error::InfeasibleContour(format!("asymptote {sigma} is not below the bound {bound}")));
    }
    let families = pole_families(params, twist);
    let relevant: Vec<Complex64> =
        families.iter().flat_map(|f| f.poles_right_of(sigma - DETOUR_GAP)).collect();
    let nodes = if relevant.is_empty() {
        Vec::new()
    } else {
        let x_d = relevant.iter().map(|p| p.re).fold(f64::MIN, f64::max) + DETOUR_GAP;
        let y_lo = relevant.iter().map(|p| p.im).fold(f64::MAX, f64::min) - 1.0;
        let y_hi = relevant.iter().map(|p| p.im).fold(f64::MIN, f64::max) + 1.0;
        vec![
            Complex64::new(sigma, y_lo),
            Complex64::new(x_d, y_lo),
            Complex64::new(x_d, y_hi),
            Complex64::new(sigma, y_hi),
        ]
    };
    let mut contour = Contour { asymptote: sigma, nodes, clearance: 0.0, families, degree: degree(params) };
    contour.clearance = contour.measure_clearance();
    if contour.clearance < CLEARANCE {
        return Err(Error::InfeasibleContour(format!(
            "clearance {:.3} below {CLEARANCE}",
            contour.clearance
        )));
    }
    Ok(contour)
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let t = (((p - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

impl Contour {
    /// Straight pieces of the path, with the vertical tails cut at `±far`.
    fn pieces(&self, far: f64) -> Vec<(Complex64, Complex64)> {
        let s = self.asymptote;
        if self.nodes.is_empty() {
            return vec![(Complex64::new(s, -far), Complex64::new(s, far))];
        }
        let mut out = vec![(Complex64::new(s, -far), self.nodes[0])];
        for w in self.nodes.windows(2) {
            out.push((w[0], w[1]));
        }
        out.push((*self.nodes.last().unwrap(), Complex64::new(s, far)));
        out
    }

    fn measure_clearance(&self) -> f64 {
        let pieces = self.pieces(1e6);
        let mut best = f64::INFINITY;
        for f in &self.families {
            let mut poles = f.poles_right_of(self.asymptote - 4.0);
            poles.push(f.base);
            for p in poles {
                for &(a, b) in &pieces {
                    best = best.min(segment_distance(p, a, b));
                }
            }
        }
        best
    }

    /// Imaginary extent of the detour, or `(0, 0)` without one.
    fn detour_extent(&self) -> (f64, f64) {
        if self.nodes.is_empty() {
            (0.0, 0.0)
        } else {
            (self.nodes[0].im, self.nodes.last().unwrap().im)
        }
    }

    fn pole_distance(&self, s: Complex64) -> f64 {
        self.families.iter().map(|f| f.distance(s)).fold(f64::INFINITY, f64::min)
    }

    fn max_pole_height(&self) -> f64 {
        self.families.iter().map(|f| f.base.im.abs()).fold(0.0, f64::max)
    }
}

/// Output of a batched Mellin–Barnes integration.
#[derive(Debug, Clone)]
pub(crate) struct MbOutput {
    /// `values[i][k]`: integral of component `k` at the `i`-th argument.
    pub values: Vec<Vec<Complex64>>,
    /// Absolute error estimate per argument (quadrature plus truncated tails).
    pub errors: Vec<f64>,
}

/// Integrates `(1/2πi) ∫_C exp(ln g_k(s) − s·L_i) ds` for every `L_i` in `ln_x`
/// and every component `k`, on one shared path.
///
/// `ln_g(s, out)` writes `ln g_k(s)` (or `None` where `g_k` vanishes).
/// `ln_range` bounds the effective `L` seen by the oscillation estimate; it
/// must contain every `L_i` and may be wider (for integrands with their own
/// `x^{−s}`-type factors).
pub(crate) fn mb_integrate<G>(
    contour: &Contour,
    ln_x: &[f64],
    ln_range: (f64, f64),
    components: usize,
    tol: f64,
    ln_g: G,
) -> Result<MbOutput>
where
    G: Fn(Complex64, &mut [Option<Complex64>]) -> Result<()>,
{
    let engine = Engine { contour, ln_x, ln_range, k: components, tol, ln_g: &ln_g, table: gk21_table() };
    engine.run()
}

struct Engine<'a, G> {
    contour: &'a Contour,
    ln_x: &'a [f64],
    ln_range: (f64, f64),
    k: usize,
    tol: f64,
    ln_g: &'a G,
    table: [(f64, f64, f64); 21],
}

struct Acc {
    values: Vec<Vec<Complex64>>,
    err: Vec<f64>,
}

impl<G> Engine<'_, G>
where
    G: Fn(Complex64, &mut [Option<Complex64>]) -> Result<()>,
{
    fn d(&self) -> f64 {
        self.contour.degree as f64
    }

    /// Rough `d/ds` of the log-integrand from Stirling's formula.
    fn log_derivative(&self, s: Complex64, l: f64) -> Complex64 {
        let r = s.norm().max(1.0);
        let shift = if s.im >= 0.0 { -0.5 * PI } else { 0.5 * PI };
        Complex64::new(self.d() * (r / (2.0 * PI)).ln() - l, self.d() * (s.arg() + shift))
    }

    fn width(&self, s: Complex64) -> f64 {
        let w = self.log_derivative(s, self.ln_range.0).norm().max(self.log_derivative(s, self.ln_range.1).norm()) + 0.3;
        (PHASE_PER_PANEL / w).min(self.contour.pole_distance(s)).min(MAX_PANEL).max(1e-3)
    }

    fn saddle_height(&self) -> f64 {
        2.0 * PI * (self.ln_range.1 / self.d()).exp()
    }

    /// Adds the panel `a → b` (times `sign`); returns the largest absolute
    /// integrand mass over all arguments.
    fn panel(&self, a: Complex64, b: Complex64, sign: f64, acc: &mut Acc) -> Result<f64> {
        let mid = (a + b) * 0.5;
        let half = (b - a) * 0.5;
        let scale = half * sign / Complex64::new(0.0, 2.0 * PI);
        let mut lng = vec![vec![None; self.k]; 21];
        for (j, &(x, _, _)) in self.table.iter().enumerate() {
            (self.ln_g)(mid + half * x, &mut lng[j])?;
        }
        let mut mass_max: f64 = 0.0;
        let mut kr = vec![Complex64::new(0.0, 0.0); self.k];
        let mut ga = vec![Complex64::new(0.0, 0.0); self.k];
        for (i, &l) in self.ln_x.iter().enumerate() {
            kr.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            ga.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let mut mass = 0.0;
            for (j, &(x, wk, wg)) in self.table.iter().enumerate() {
                let s = mid + half * x;
                for c in 0..self.k {
                    if let Some(lg) = lng[j][c] {
                        let v = (lg - s * l).exp();
                        kr[c] += v * wk;
                        ga[c] += v * wg;
                        mass += v.norm() * wk;
                    }
                }
            }
            let mut e: f64 = 0.0;
            for c in 0..self.k {
                acc.values[i][c] += kr[c] * scale;
                e = e.max(((kr[c] - ga[c]) * scale).norm());
            }
            acc.err[i] += e;
            mass_max = mass_max.max(mass * scale.norm());
        }
        Ok(mass_max)
    }

    fn segment(&self, a: Complex64, b: Complex64, acc: &mut Acc) -> Result<()> {
        let len = (b - a).norm();
        if len == 0.0 {
            return Ok(());
        }
        let dir = (b - a) / len;
        let mut pos = 0.0;
        while pos < len {
            let z = a + dir * pos;
            let mut h = self.width(z);
            h = h.min(self.width(z + dir * h));
            if len - pos - h < 0.25 * h {
                h = len - pos;
            }
            self.panel(z, a + dir * (pos + h), 1.0, acc)?;
            pos += h;
        }
        Ok(())
    }

    /// Integrates outward along `start + ρ·dir` until the mass is negligible;
    /// adds the result times `sign`.
    fn ray(&self, start: Complex64, dir: Complex64, sign: f64, acc: &mut Acc) -> Result<()> {
        let mut pos = 0.0;
        let mut quiet = 0;
        let threshold = self.tol / 20.0;
        let limit = 50.0 * (start.norm() + 10.0);
        loop {
            let z = start + dir * pos;
            let mut h = self.width(z);
            h = h.min(self.width(z + dir * h));
            let mass = self.panel(z, z + dir * h, sign, acc)?;
            pos += h;
            quiet = if mass < threshold { quiet + 1 } else { 0 };
            if quiet >= 3 {
                for e in acc.err.iter_mut() {
                    *e += 2.0 * mass;
                }
                return Ok(());
            }
            if pos > limit {
                return Err(Error::ToleranceNotMet { achieved: mass, requested: self.tol });
            }
        }
    }

    fn run(&self) -> Result<MbOutput> {
        let n = self.ln_x.len();
        let mut acc = Acc { values: vec![vec![Complex64::new(0.0, 0.0); self.k]; n], err: vec![0.0; n] };
        let sigma = self.contour.asymptote;
        let (y_lo, y_hi) = self.contour.detour_extent();
        let base = self.saddle_height() * 1.05 + self.contour.max_pole_height();
        let top = base.max(y_hi + 1.0).max(2.0);
        let bottom = -base.min(f64::MAX).max(-y_lo + 1.0).max(2.0);
        let up = Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let down = Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
        let p_bottom = Complex64::new(sigma, bottom);
        let p_top = Complex64::new(sigma, top);
        self.ray(p_bottom, down, -1.0, &mut acc)?;
        if self.contour.nodes.is_empty() {
            self.segment(p_bottom, p_top, &mut acc)?;
        } else {
            let nodes = &self.contour.nodes;
            self.segment(p_bottom, nodes[0], &mut acc)?;
            for w in nodes.windows(2) {
                self.segment(w[0], w[1], &mut acc)?;
            }
            self.segment(*nodes.last().unwrap(), p_top, &mut acc)?;
        }
        self.ray(p_top, up, 1.0, &mut acc)?;
        Ok(MbOutput { values: acc.values, errors: acc.err })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol >= MIN_TOL) {
        return Err(Error::InvalidInput(format!("tolerance {tol:e} below the floor {MIN_TOL:e}")));
    }
    Ok(())
}

/// `ln γ(1 − s, π × sgn^δ)` for both parities (one when the parameters are parity blind).
fn real_ln_g(params: &RealPlaceParams) -> impl Fn(Complex64, &mut [Option<Complex64>]) -> Result<()> + '_ {
    let pp = PlaceParams::Real(params.clone());
    let blind = params.parity_blind();
    move |s, out| {
        let parities: &[i64] = if blind { &[0] } else { &[0, 1] };
        for (slot, &d) in out.iter_mut().zip(parities) {
            let (lg, vanishes) = ln_dual_gamma(&pp, CharTwist(d), s)?;
            *slot = (!vanishes).then_some(lg);
        }
        Ok(())
    }
}

/// Parity components `I_δ(|x|)` of the real Bessel integral on a shared contour.
/// Returns per argument `(I_0, I_1, error)`; `I_1 = I_0` when parity blind.
pub(crate) fn real_components(
    params: &RealPlaceParams,
    contour: &Contour,
    abs_x: &[f64],
    tol: f64,
) -> Result<Vec<(Complex64, Complex64, f64)>> {
    let blind = params.parity_blind();
    let k = if blind { 1 } else { 2 };
    let ln_x: Vec<f64> = abs_x.iter().map(|x| x.ln()).collect();
    let lo = ln_x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ln_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let out = mb_integrate(contour, &ln_x, (lo, hi), k, tol, real_ln_g(params))?;
    Ok(out
        .values
        .iter()
        .zip(&out.errors)
        .map(|(v, &e)| if blind { (v[0], v[0], e) } else { (v[0], v[1], e) })
        .collect())
}

fn combine_parities(x: f64, i0: Complex64, i1: Complex64) -> Complex64 {
    if x > 0.0 {
        (i0 + i1) * 0.5
    } else {
        (i0 - i1) * 0.5
    }
}

/// Value and absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

/// Batched real Bessel values on one contour; arguments grouped so that each
/// group shares a path tailored to its range.
pub fn bessel_real_batch(params: &RealPlaceParams, contour: &Contour, xs: &[f64], tol: f64) -> Result<Vec<Estimate>> {
    check_tol(tol)?;
    if xs.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput("Bessel argument must be finite and nonzero".into()));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()));
    let groups = group_by_log(&order.iter().map(|&i| xs[i].abs()).collect::<Vec<_>>());
    let results: Vec<Result<Vec<(Complex64, Complex64, f64)>>> = groups
        .par_iter()
        .map(|&(a, b)| {
            let abs: Vec<f64> = order[a..b].iter().map(|&i| xs[i].abs()).collect();
            real_components(params, contour, &abs, tol)
        })
        .collect();
    let mut out = vec![Estimate { value: Complex64::new(0.0, 0.0), error: 0.0 }; xs.len()];
    for (&(a, _), r) in groups.iter().zip(results) {
        for (j, (i0, i1, e)) in r?.into_iter().enumerate() {
            let idx = order[a + j];
            out[idx] = Estimate { value: combine_parities(xs[idx], i0, i1), error: e };
        }
    }
    if let Some(worst) = out.iter().map(|e| e.error).reduce(f64::max) {
        if worst > tol {
            return Err(Error::ToleranceNotMet { achieved: worst, requested: tol });
        }
    }
    Ok(out)
}

/// Splits sorted positive values into index ranges whose logarithmic width is
/// small enough for one shared path.
fn group_by_log(sorted: &[f64]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        let close = i < sorted.len() && {
            let l0 = sorted[start].ln();
            let l1 = sorted[i].ln();
            let width = if l1 <= 0.0 { 2.0 } else { 0.5 };
            l1 - l0 <= width
        };
        if !close {
            groups.push((start, i));
            start = i;
        }
    }
    groups
}

/// `𝔟_{π,ψ}(x)` for a representation of GL(n, ℝ).
pub fn bessel_real(params: &RealPlaceParams, x: f64, tol: f64) -> Result<Complex64> {
    Ok(bessel_real_estimate(params, x, tol)?.value)
}

/// [`bessel_real`] with its absolute error estimate.
pub fn bessel_real_estimate(params: &RealPlaceParams, x: f64, tol: f64) -> Result<Estimate> {
    let contour = build_contour(&PlaceParams::Real(params.clone()), None)?;
    Ok(bessel_real_batch(params, &contour, &[x], tol)?[0])
}

/// Result of the complex Bessel series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexBessel {
    pub value: Complex64,
    /// Sum of the per-term quadrature error estimates.
    pub quadrature_error: f64,
    /// Magnitude of the last three `|m|`-levels kept in the sum.
    pub tail_estimate: f64,
    /// Largest `|m|` summed.
    pub m_used: usize,
}

/// `j_{(t, l+m)}(r)` for `m` in `ms` on a shared contour.
fn complex_terms(
    params: &ComplexPlaceParams,
    contour: &Contour,
    r: f64,
    ms: &[i64],
    tol: f64,
) -> Result<Vec<Estimate>> {
    let pp = PlaceParams::Complex(params.clone());
    let l = 2.0 * r.ln();
    ms.par_iter()
        .map(|&m| {
            let g = |s: Complex64, out: &mut [Option<Complex64>]| -> Result<()> {
                let (lg, vanishes) = ln_dual_gamma(&pp, CharTwist(m), s)?;
                out[0] = (!vanishes).then_some(lg);
                Ok(())
            };
            let o = mb_integrate(contour, &[l], (l, l), 1, tol, g)?;
            Ok(Estimate { value: o.values[0][0], error: o.errors[0] })
        })
        .collect()
}

/// `J_{(t,l)}(z) = (1/2π) Σ_{|m| ≤ m_max} j_{(t,l+m)}(|z|)[z]^m`.
///
/// Summation stops early once `|m| ≥ 8` and three consecutive `|m|`-levels
/// are below `tol/10`. Fails with [`Error::ToleranceNotMet`] when the tail
/// estimate at `m_max` still exceeds `tol`.
pub fn bessel_complex(params: &ComplexPlaceParams, z: Complex64, tol: f64, m_max: usize) -> Result<ComplexBessel> {
    check_tol(tol)?;
    if m_max < 1 {
        return Err(Error::InvalidInput("m_max must be at least 1".into()));
    }
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidInput("Bessel argument must be nonzero".into()));
    }
    let contour = build_contour(&PlaceParams::Complex(params.clone()), None)?;
    let r = z.norm();
    let unit = z / r;
    let term_tol = (tol / (2 * m_max + 1) as f64).max(MIN_TOL);
    let zero = terms_checked(complex_terms(params, &contour, r, &[0], term_tol)?, term_tol)?;
    let mut value = zero[0].value;
    let mut qerr = zero[0].error;
    let mut levels: Vec<f64> = Vec::new();
    let mut m_used = 0;
    for m in 1..=m_max as i64 {
        let t = terms_checked(complex_terms(params, &contour, r, &[m, -m], term_tol)?, term_tol)?;
        let plus = t[0].value * unit.powi(m as i32);
        let minus = t[1].value * unit.powi(-(m as i32));
        value += plus + minus;
        qerr += t[0].error + t[1].error;
        levels.push((plus.norm() + minus.norm()) / (2.0 * PI));
        m_used = m as usize;
        let n = levels.len();
        if m >= 8 && n >= 3 && levels[n - 3..].iter().all(|&v| v < tol / 10.0) {
            break;
        }
    }
    let n = levels.len();
    let tail: f64 = levels[n.saturating_sub(3)..].iter().sum();
    let value = value / (2.0 * PI);
    let qerr = qerr / (2.0 * PI);
    if tail > tol {
        return Err(Error::ToleranceNotMet { achieved: tail, requested: tol });
    }
    Ok(ComplexBessel { value, quadrature_error: qerr, tail_estimate: tail, m_used })
}

fn terms_checked(v: Vec<Estimate>, tol: f64) -> Result<Vec<Estimate>> {
    if let Some(e) = v.iter().find(|e| e.error > tol) {
        return Err(Error::ToleranceNotMet { achieved: e.error, requested: tol });
    }
    Ok(v)
}

/// `k_{π,ψ}(x) = 𝔟(x)|x|^{1/2}` with the normalized absolute value
/// (`|z|_ℂ = |z|²` over ℂ). Real parameters require a real argument.
pub fn kernel_eval(params: &PlaceParams, x: Complex64, tol: f64) -> Result<Complex64> {
    match params {
        PlaceParams::Real(p) => {
            if x.im != 0.0 {
                return Err(Error::InvalidInput("real place needs a real argument".into()));
            }
            Ok(bessel_real(p, x.re, tol)? * x.re.abs().sqrt())
        }
        PlaceParams::Complex(p) => Ok(bessel_complex(p, x, tol, 64)?.value * x.norm()),
    }
}

/// `|γ(1 − s, π) x^{−s}|` on the vertical line `Re s = σ′` at height `height`.
pub fn integrand_modulus(params: &PlaceParams, contour: &Contour, x: f64, height: f64) -> Result<f64> {
    let s = Complex64::new(contour.asymptote, height);
    let (lg, vanishes) = ln_dual_gamma(params, CharTwist(0), s)?;
    if vanishes {
        return Ok(0.0);
    }
    Ok((lg - s * x.abs().ln()).exp().norm())
}

/// Kernel values `k(x)` on a user grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub params: PlaceParams,
    /// Signed arguments, strictly increasing.
    pub grid: Vec<f64>,
    /// `k(x)`; `NaN` where the point failed.
    pub values: Vec<Complex64>,
    /// Per-point absolute error estimates.
    pub errors: Vec<f64>,
    pub requested_tol: f64,
    /// Largest per-point error estimate among successful points.
    pub achieved_tol: f64,
    pub contour: Contour,
    /// Indices and messages of points that failed.
    pub failures: Vec<(usize, String)>,
}

/// JSON sidecar written next to a table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSidecar {
    version: String,
    params: PlaceParams,
    contour: Contour,
    requested_tol: f64,
    achieved_tol: f64,
    errors: Vec<f64>,
    failures: Vec<(usize, String)>,
}

/// Kernel table over a sorted nonzero grid.
pub fn kernel_table(params: &PlaceParams, grid: &[f64], tol: f64) -> Result<KernelTable> {
    check_tol(tol)?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput("grid must be strictly increasing, finite and nonzero".into()));
    }
    let contour = build_contour(params, None)?;
    let mut values = vec![Complex64::new(f64::NAN, f64::NAN); grid.len()];
    let mut errors = vec![f64::NAN; grid.len()];
    let mut failures = Vec::new();
    match params {
        PlaceParams::Real(p) => {
            let mut order: Vec<usize> = (0..grid.len()).collect();
            order.sort_by(|&a, &b| grid[a].abs().total_cmp(&grid[b].abs()));
            let sorted: Vec<f64> = order.iter().map(|&i| grid[i].abs()).collect();
            let groups = group_by_log(&sorted);
            let results: Vec<_> = groups
                .par_iter()
                .map(|&(a, b)| real_components(p, &contour, &sorted[a..b], tol))
                .collect();
            for (&(a, b), r) in groups.iter().zip(results) {
                match r {
                    Ok(v) => {
                        for (j, (i0, i1, e)) in v.into_iter().enumerate() {
                            let idx = order[a + j];
                            let x = grid[idx];
                            values[idx] = combine_parities(x, i0, i1) * x.abs().sqrt();
                            errors[idx] = e * x.abs().sqrt();
                            if errors[idx] > tol * x.abs().sqrt().max(1.0) {
                                failures.push((idx, format!("error estimate {:e}", errors[idx])));
                            }
                        }
                    }
                    Err(e) => {
                        for &idx in &order[a..b] {
                            failures.push((idx, e.to_string()));
                        }
                    }
                }
            }
        }
        PlaceParams::Complex(p) => {
            for (idx, &x) in grid.iter().enumerate() {
                match bessel_complex(p, Complex64::new(x, 0.0), tol, 64) {
                    Ok(b) => {
                        values[idx] = b.value * x.abs();
                        errors[idx] = (b.quadrature_error + b.tail_estimate) * x.abs();
                    }
                    Err(e) => failures.push((idx, e.to_string())),
                }
            }
        }
    }
    failures.sort_by_key(|f| f.0);
    for &(idx, _) in &failures {
        values[idx] = Complex64::new(f64::NAN, f64::NAN);
    }
    let achieved_tol = errors
        .iter()
        .enumerate()
        .filter(|(i, _)| failures.iter().all(|f| f.0 != *i))
        .map(|(_, &e)| e)
        .fold(0.0, f64::max);
    Ok(KernelTable {
        params: params.clone(),
        grid: grid.to_vec(),
        values,
        errors,
        requested_tol: tol,
        achieved_tol,
        contour,
        failures,
    })
}

impl KernelTable {
    /// True when some grid points failed.
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// CSV body: header `x,sign,re,im`, one row per grid point, `x = |arg|`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,sign,re,im\n");
        for (x, v) in self.grid.iter().zip(&self.values) {
            let sign = if *x < 0.0 { -1 } else { 1 };
            s.push_str(&format!("{},{},{},{}\n", x.abs(), sign, v.re, v.im));
        }
        s
    }

    /// Writes `csv_path` and the JSON sidecar `json_path` atomically.
    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        crate::io::write_atomic(csv_path, self.to_csv().as_bytes())?;
        let side = TableSidecar {
            version: env!("CARGO_PKG_VERSION").to_string(),
            params: self.params.clone(),
            contour: self.contour.clone(),
            requested_tol: self.requested_tol,
            achieved_tol: self.achieved_tol,
            errors: self.errors.clone(),
            failures: self.failures.clone(),
        };
        let json = serde_json::to_string_pretty(&side).map_err(|e| Error::InvalidInput(e.to_string()))?;
        crate::io::write_atomic(json_path, json.as_bytes())
    }

    /// Reads a table written by [`KernelTable::save`].
    pub fn load(csv_path: &Path, json_path: &Path) -> Result<Self> {
        let io_err = |e: std::io::Error| Error::InvalidInput(e.to_string());
        let side: TableSidecar = serde_json::from_str(&std::fs::read_to_string(json_path).map_err(io_err)?)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let body = std::fs::read_to_string(csv_path).map_err(io_err)?;
        let mut lines = body.lines();
        if lines.next() != Some("x,sign,re,im") {
            return Err(Error::InvalidInput("missing header x,sign,re,im".into()));
        }
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidInput(format!("row {}: malformed `{line}`", n + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let x: f64 = f[0].parse().map_err(|_| bad())?;
            let sign: i32 = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            grid.push(if sign < 0 { -x } else { x });
            values.push(Complex64::new(re, im));
        }
        Ok(KernelTable {
            params: side.params,
            grid,
            values,
            errors: side.errors,
            requested_tol: side.requested_tol,
            achieved_tol: side.achieved_tol,
            contour: side.contour,
            failures: side.failures,
        })
    }
}

/// Piecewise Chebyshev interpolant of `𝔟` over `|y| ∈ [y_min, y_max]`, in the
/// variable `u = |y|^{1/n}` where the Bessel function oscillates at a nearly
/// constant rate.
#[derive(Debug, Clone)]
pub struct KernelInterpolant {
    rank: usize,
    blind: bool,
    panels: Vec<InterpPanel>,
    /// Largest observed check-point deviation plus quadrature error.
    pub achieved_tol: f64,
}

#[derive(Debug, Clone)]
struct InterpPanel {
    pos: ChebPanel,
    neg: Option<ChebPanel>,
}

const CHEB_DEGREE: usize = 21;
const CHECK_POINTS: [f64; 3] = [0.23, 0.5, 0.77];
const MAX_SPLITS: u32 = 5;

impl KernelInterpolant {
    /// Builds the interpolant; every panel is verified at three interior points
    /// against direct evaluation and split until the deviation is below `tol`.
    pub fn build(params: &RealPlaceParams, y_min: f64, y_max: f64, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        if !(0.0 < y_min && y_min < y_max) {
            return Err(Error::InvalidInput(format!("bad interpolation range [{y_min}, {y_max}]")));
        }
        let pp = PlaceParams::Real(params.clone());
        let contour = build_contour(&pp, None)?;
        let n = params.rank();
        let blind = params.parity_blind();
        let to_u = |y: f64| y.powf(1.0 / n as f64);
        let (u0, u1) = (to_u(y_min), to_u(y_max));
        let h = 2.0 / n as f64;
        let count = ((u1 - u0) / h).ceil().max(1.0) as usize;
        let mut pending: Vec<(f64, f64, u32)> =
            (0..count).map(|i| (u0 + i as f64 * h, (u0 + (i + 1) as f64 * h).min(u1), 0)).collect();
        let mut done: Vec<InterpPanel> = Vec::new();
        let mut achieved: f64 = 0.0;
        while !pending.is_empty() {
            let mut us = Vec::new();
            for &(lo, hi, _) in &pending {
                us.extend(ChebPanel::nodes(lo, hi, CHEB_DEGREE));
                us.extend(CHECK_POINTS.iter().map(|c| lo + c * (hi - lo)));
            }
            let ys: Vec<f64> = us.iter().map(|u| u.powi(n as i32)).collect();
            let comps = grouped_components(params, &contour, &ys, tol * 0.25)?;
            let per = CHEB_DEGREE + 1 + CHECK_POINTS.len();
            let mut next = Vec::new();
            for (pi, &(lo, hi, depth)) in pending.iter().enumerate() {
                let chunk = &comps[pi * per..(pi + 1) * per];
                let quad_err = chunk.iter().map(|c| c.2).fold(0.0, f64::max);
                let pos_vals: Vec<Complex64> = chunk[..=CHEB_DEGREE].iter().map(|c| combine_parities(1.0, c.0, c.1)).collect();
                let pos = ChebPanel { lo, hi, values: pos_vals };
                let neg = (!blind).then(|| ChebPanel {
                    lo,
                    hi,
                    values: chunk[..=CHEB_DEGREE].iter().map(|c| combine_parities(-1.0, c.0, c.1)).collect(),
                });
                let mut dev: f64 = 0.0;
                for (j, c) in CHECK_POINTS.iter().enumerate() {
                    let u = lo + c * (hi - lo);
                    let direct = &chunk[CHEB_DEGREE + 1 + j];
                    dev = dev.max((pos.eval(u) - combine_parities(1.0, direct.0, direct.1)).norm());
                    if let Some(ng) = &neg {
                        dev = dev.max((ng.eval(u) - combine_parities(-1.0, direct.0, direct.1)).norm());
                    }
                }
                if dev + quad_err <= tol {
                    achieved = achieved.max(dev + quad_err);
                    done.push(InterpPanel { pos, neg });
                } else if depth < MAX_SPLITS {
                    let mid = 0.5 * (lo + hi);
                    next.push((lo, mid, depth + 1));
                    next.push((mid, hi, depth + 1));
                } else {
                    return Err(Error::ToleranceNotMet { achieved: dev + quad_err, requested: tol });
                }
            }
            pending = next;
        }
        done.sort_by(|a, b| a.pos.lo.total_cmp(&b.pos.lo));
        Ok(KernelInterpolant { rank: n, blind, panels: done, achieved_tol: achieved })
    }

    /// Covered range of `|y|`.
    pub fn range(&self) -> (f64, f64) {
        let n = self.rank as i32;
        (self.panels[0].pos.lo.powi(n), self.panels.last().unwrap().pos.hi.powi(n))
    }

    /// Interpolated `𝔟(y)`.
    pub fn bessel(&self, y: f64) -> Result<Complex64> {
        if y < 0.0 && self.blind {
            let (lo, hi) = self.range();
            if -y < lo * (1.0 - 1e-12) || -y > hi * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!("argument {y} outside the table range")));
            }
            return Ok(Complex64::new(0.0, 0.0));
        }
        let u = y.abs().powf(1.0 / self.rank as f64);
        let idx = self.panels.partition_point(|p| p.pos.hi < u);
        let panel = self.panels.get(idx).filter(|p| u >= p.pos.lo - 1e-12 * p.pos.lo.max(1.0));
        let panel = panel.ok_or_else(|| Error::InvalidInput(format!("argument {y} outside the table range")))?;
        Ok(if y > 0.0 { panel.pos.eval(u) } else { panel.neg.as_ref().expect("negative panels").eval(u) })
    }

    /// Interpolated kernel `k(y) = 𝔟(y)|y|^{1/2}`.
    pub fn kernel(&self, y: f64) -> Result<Complex64> {
        Ok(self.bessel(y)? * y.abs().sqrt())
    }
}

/// Parity components for arbitrary positive arguments, grouped internally.
fn grouped_components(
    params: &RealPlaceParams,
    contour: &Contour,
    abs_x: &[f64],
    tol: f64,
) -> Result<Vec<(Complex64, Complex64, f64)>> {
    let mut order: Vec<usize> = (0..abs_x.len()).collect();
    order.sort_by(|&a, &b| abs_x[a].total_cmp(&abs_x[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| abs_x[i]).collect();
    let groups = group_by_log(&sorted);
    let parts: Vec<Result<Vec<(Complex64, Complex64, f64)>>> =
        groups.par_iter().map(|&(a, b)| real_components(params, contour, &sorted[a..b], tol)).collect();
    let mut out = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), 0.0); abs_x.len()];
    for (&(a, _), part) in groups.iter().zip(parts) {
        for (j, v) in part?.into_iter().enumerate() {
            out[order[a + j]] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch_local::ComplexBlock;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gl1() -> RealPlaceParams {
        RealPlaceParams { blocks: vec![RealBlock::Gl1 { delta: 0, t: c(0.0, 0.0) }] }
    }

    fn ds2() -> RealPlaceParams {
        RealPlaceParams { blocks: vec![RealBlock::Ds2 { l: 11, t: c(0.0, 0.0) }] }
    }

    /// `J_n(y) = (1/2π) ∫_0^{2π} cos(nτ − y sin τ) dτ` by the periodic trapezoid rule.
    fn bessel_j(n: i32, y: f64) -> f64 {
        let m = (y.abs() as usize + n.unsigned_abs() as usize + 64) * 2;
        let h = 2.0 * PI / m as f64;
        (0..m).map(|k| (n as f64 * k as f64 * h - y * (k as f64 * h).sin()).cos()).sum::<f64>() / m as f64
    }

    #[test]
    fn contour_examples() {
        let g = build_contour(&PlaceParams::Real(gl1()), None).unwrap();
        assert_eq!(g.asymptote, -0.75);
        assert_eq!(g.nodes.len(), 4);
        assert!(g.clearance >= 0.25 - 1e-12);
        let d = build_contour(&PlaceParams::Real(ds2()), None).unwrap();
        assert_eq!(d.asymptote, -0.25);
        assert!(d.nodes.is_empty());
        assert!(d.clearance >= 5.0);
        let cx = PlaceParams::Complex(ComplexPlaceParams { blocks: vec![ComplexBlock { t: c(0.0, 0.0), l: 0 }] });
        let k = build_contour(&cx, None).unwrap();
        assert!(k.asymptote < 0.0);
        assert!(build_contour_with_asymptote(&PlaceParams::Real(gl1()), None, -0.25).is_err());
    }

    #[test]
    fn gl1_real_matches_additive_character() {
        let p = gl1();
        for &(x, want) in &[(1.0, c(1.0, 0.0)), (0.25, c(0.0, 1.0)), (0.5, c(-1.0, 0.0))] {
            let v = bessel_real(&p, x, 1e-10).unwrap();
            assert!((v - want).norm() < 1e-9, "x = {x}: {v}");
        }
        for &x in &[-0.3, -2.7, 7.1] {
            let v = bessel_real(&p, x, 1e-10).unwrap();
            assert!((v - Complex64::from_polar(1.0, 2.0 * PI * x)).norm() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn ds2_real_matches_classical_bessel() {
        let p = ds2();
        let contour = build_contour(&PlaceParams::Real(p.clone()), None).unwrap();
        let xs = [0.3, 1.0, 2.5, 40.0, 900.0];
        let vals = bessel_real_batch(&p, &contour, &xs, 1e-10).unwrap();
        for (x, v) in xs.iter().zip(vals) {
            let want = 2.0 * PI * bessel_j(11, 4.0 * PI * x.sqrt());
            assert!((v.value - want).norm() < 1e-9, "x = {x}: {} vs {want}", v.value);
        }
        assert_eq!(bessel_real(&p, -2.0, 1e-10).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn contour_independence_ds2() {
        let p = ds2();
        let pp = PlaceParams::Real(p.clone());
        let c1 = build_contour(&pp, None).unwrap();
        let c2 = build_contour_with_asymptote(&pp, None, c1.asymptote - 0.15).unwrap();
        let xs = [0.07, 1.3, 6.0, 19.0];
        let a = bessel_real_batch(&p, &c1, &xs, 1e-10).unwrap();
        let b = bessel_real_batch(&p, &c2, &xs, 1e-10).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u.value - v.value).norm() < 2e-10);
        }
    }

    #[test]
    fn complex_gl1_matches_trace_character() {
        let p = ComplexPlaceParams { blocks: vec![ComplexBlock { t: c(0.0, 0.0), l: 0 }] };
        for &(z, want) in &[(c(0.5, 0.3), 1.0), (c(0.25, -0.7), -1.0)] {
            let v = bessel_complex(&p, z, 1e-9, 80).unwrap();
            assert!((v.value - c(want, 0.0)).norm() < 1e-8, "z = {z}: {:?}", v);
            assert!(v.m_used >= 8);
        }
        let z = c(0.3, 0.4);
        let k = kernel_eval(&PlaceParams::Complex(p), z, 1e-9).unwrap();
        let want = Complex64::from_polar(1.0, 4.0 * PI * z.re) * z.norm();
        assert!((k - want).norm() < 1e-8);
    }

    #[test]
    fn complex_conjugation_symmetry() {
        let p = ComplexPlaceParams { blocks: vec![ComplexBlock { t: c(0.0, 0.0), l: 2 }] };
        let q = ComplexPlaceParams { blocks: vec![ComplexBlock { t: c(0.0, 0.0), l: -2 }] };
        let z = c(0.4, 0.35);
        let a = bessel_complex(&p, z.conj(), 1e-9, 80).unwrap().value;
        let b = bessel_complex(&q, z, 1e-9, 80).unwrap().value;
        assert!((a - b).norm() < 1e-8);
    }

    #[test]
    fn kernel_identity_and_gl1_example() {
        let pp = PlaceParams::Real(gl1());
        let k = kernel_eval(&pp, c(4.0, 0.0), 1e-10).unwrap();
        assert!((k - c(2.0, 0.0)).norm() < 2e-9);
        for &x in &[0.7, 3.3] {
            let k = kernel_eval(&PlaceParams::Real(ds2()), c(x, 0.0), 1e-10).unwrap();
            let b = bessel_real(&ds2(), x, 1e-10).unwrap();
            assert!((k / b - x.sqrt()).norm() < 1e-12);
        }
    }

    #[test]
    fn tail_decays_along_the_asymptote() {
        let pp = PlaceParams::Real(ds2());
        let contour = build_contour(&pp, None).unwrap();
        let t = 50.0;
        let m: Vec<f64> = [t, 2.0 * t, 4.0 * t].iter().map(|&h| integrand_modulus(&pp, &contour, 3.0, h).unwrap()).collect();
        assert!(m[0] > m[1] && m[1] > m[2]);
    }

    #[test]
    fn table_examples_and_roundtrip() {
        let pp = PlaceParams::Real(gl1());
        assert!(kernel_table(&pp, &[], 1e-9).is_err());
        let t = kernel_table(&pp, &[1.0], 1e-9).unwrap();
        assert!((t.values[0] - c(1.0, 0.0)).norm() < 1e-9);
        let t = kernel_table(&PlaceParams::Real(ds2()), &[-3.0, 0.5, 1.5, 12.0], 1e-9).unwrap();
        assert!(!t.is_partial());
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("t.csv"), dir.path().join("t.json"));
        t.save(&a, &b).unwrap();
        let back = KernelTable::load(&a, &b).unwrap();
        assert_eq!(back.grid.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), t.grid.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        for (u, v) in back.values.iter().zip(&t.values) {
            assert_eq!((u.re.to_bits(), u.im.to_bits()), (v.re.to_bits(), v.im.to_bits()));
        }
        assert_eq!(back, t);
    }

    #[test]
    fn interpolant_matches_direct_evaluation() {
        let p = ds2();
        let it = KernelInterpolant::build(&p, 0.5, 60.0, 1e-9).unwrap();
        for &y in &[0.61, 3.1, 17.5, 59.9] {
            let want = 2.0 * PI * bessel_j(11, 4.0 * PI * f64::sqrt(y));
            assert!((it.bessel(y).unwrap() - want).norm() < 2e-9, "y = {y}");
        }
        assert_eq!(it.bessel(-5.0).unwrap(), c(0.0, 0.0));
        assert!(it.bessel(100.0).is_err());
        let g = KernelInterpolant::build(&gl1(), 0.1, 5.0, 1e-9).unwrap();
        for &y in &[0.13, 2.2, -1.7, -4.9] {
            assert!((g.bessel(y).unwrap() - Complex64::from_polar(1.0, 2.0 * PI * y)).norm() < 2e-9, "y = {y}");
        }
    }
}
