//! Godement–Jacquet kernels over ℚ, their duals, the Tate kernels of the
//! Riemann zeta function, and the kernel-pairing zero criteria.
//!
//! For a cuspidal `π` with Dirichlet coefficients `a_n` the kernels are the
//! step functions `H_{π,s}(x) = |x|^{s−1/2} Σ_{n≤|x|} a_n n^{−s}` and
//! `K_{π,s}` (same form with the dual coefficients). The split identity
//! `Z_∞(s, φ)·L(s) = ∫ φ H_{π,s} d×x + ∫ F(φ) K_{π,1−s} d×x` is checked by
//! quadrature against an approximate-functional-equation value of `L(s)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch_local::{RealBlock, RealPlaceParams};
use crate::hankel::{signed_mellin, DualEvaluator, Side, TestFunction};
use crate::quadrature::{adaptive_real, composite_gauss, gk21_table};
use crate::special::ln_gamma;
use crate::voronoi_global::DirichletCoeffs;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which kernel family to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum KernelSpec<'a> {
    /// Partial Dirichlet series kernels of a cuspidal representation with
    /// coefficients `a_n` and dual coefficients `a_n*`.
    Cuspidal { coeffs: &'a DirichletCoeffs, dual: &'a DirichletCoeffs, s: Complex64 },
    /// Tate kernels of `ζ_ℚ` (`κ = 1`, `D = 1`).
    Tate { s: Complex64 },
}

fn coeff(c: &DirichletCoeffs, n: usize) -> Result<Complex64> {
    c.lambda(n).ok_or(Error::CoeffRangeExceeded { available: c.len(), needed: n })
}

/// `Σ_{n≤m} a_n n^{−s}` with `a_n = 1` when `coeffs` is `None`.
fn partial_sum(coeffs: Option<&DirichletCoeffs>, s: Complex64, m: usize) -> Result<Complex64> {
    let mut acc = ZERO;
    for n in 1..=m {
        let a = match coeffs {
            Some(c) => coeff(c, n)?,
            None => ONE,
        };
        acc += a * (-s * (n as f64).ln()).exp();
    }
    Ok(acc)
}

fn abs_floor(x: f64) -> Result<usize> {
    if !(x.is_finite() && x != 0.0) {
        return Err(Error::InvalidInput(format!("kernel argument must be finite and nonzero, got {x}")));
    }
    Ok(x.abs().floor() as usize)
}

fn tate(s: Complex64, x: f64) -> Result<Complex64> {
    if s == ONE {
        return Err(Error::PoleAtOne);
    }
    let m = abs_floor(x)?;
    Ok(((s - 1.0) * x.abs().ln()).exp() * partial_sum(None, s, m)? - ONE / (ONE - s))
}

fn cuspidal(c: &DirichletCoeffs, s: Complex64, x: f64) -> Result<Complex64> {
    let m = abs_floor(x)?;
    if m == 0 {
        return Ok(ZERO);
    }
    Ok(((s - 0.5) * x.abs().ln()).exp() * partial_sum(Some(c), s, m)?)
}

/// The Godement–Jacquet kernel `H_s(x)` (cuspidal) or the Tate kernel.
pub fn h_kernel(spec: &KernelSpec, x: f64) -> Result<Complex64> {
    match *spec {
        KernelSpec::Cuspidal { coeffs, s, .. } => cuspidal(coeffs, s, x),
        KernelSpec::Tate { s } => tate(s, x),
    }
}

/// The dual kernel `K_s(x)`; over ℚ the Tate dual kernel equals `H_s`.
pub fn k_dual_kernel(spec: &KernelSpec, x: f64) -> Result<Complex64> {
    match *spec {
        KernelSpec::Cuspidal { dual, s, .. } => cuspidal(dual, s, x),
        KernelSpec::Tate { s } => tate(s, x),
    }
}

/// `(H_s(x), K_s(x))` for `ζ_ℚ`.
pub fn clozel_tate_kernels(s: Complex64, x: f64) -> Result<(Complex64, Complex64)> {
    let h = tate(s, x)?;
    Ok((h, h))
}

// ---------------------------------------------------------------------------
// Oracles

/// `ζ(s)` by Euler–Maclaurin summation, for `s ≠ 1`.
pub fn zeta_em(s: Complex64) -> Result<Complex64> {
    if (s - ONE).norm() < 1e-14 {
        return Err(Error::PoleAtOne);
    }
    if s.re < 0.0 {
        // ζ(s) = 2^s π^{s−1} sin(πs/2) Γ(1−s) ζ(1−s)
        let t = ONE - s;
        let pref = (s * 2f64.ln() + (s - 1.0) * PI.ln() + ln_gamma(t)).exp() * (s * PI / 2.0).sin();
        return Ok(pref * zeta_em(t)?);
    }
    // B_{2k} / (2k)!
    const B: [f64; 12] = [
        1.0 / 6.0 / 2.0,
        -1.0 / 30.0 / 24.0,
        1.0 / 42.0 / 720.0,
        -1.0 / 30.0 / 40320.0,
        5.0 / 66.0 / 3628800.0,
        -691.0 / 2730.0 / 479001600.0,
        7.0 / 6.0 / 87178291200.0,
        -3617.0 / 510.0 / 20922789888000.0,
        43867.0 / 798.0 / 6402373705728000.0,
        -174611.0 / 330.0 / 2432902008176640000.0,
        854513.0 / 138.0 / 1.1240007277776077e21,
        -236364091.0 / 2730.0 / 6.204484017332394e23,
    ];
    let n = 20 + s.im.abs().ceil() as usize;
    let nf = n as f64;
    let mut sum = ZERO;
    for k in 1..n {
        sum += (-s * (k as f64).ln()).exp();
    }
    let n_s = (-s * nf.ln()).exp();
    sum += n_s * nf / (s - 1.0) + n_s * 0.5;
    // Σ B_{2k}/(2k)! · s(s+1)…(s+2k−2) N^{−s−2k+1}
    let mut rising = s;
    let mut power = n_s / nf;
    for (k, b) in B.iter().enumerate() {
        sum += rising * power * *b;
        let j = 2.0 * k as f64;
        rising *= (s + j + 1.0) * (s + j + 2.0);
        power /= nf * nf;
    }
    Ok(sum)
}

/// Hardy's `Z(t) = e^{iθ(t)} ζ(1/2 + it)`, real for real `t`.
pub fn hardy_z(t: f64) -> Result<f64> {
    let theta = ln_gamma(Complex64::new(0.25, t / 2.0)).im - t / 2.0 * PI.ln();
    Ok((Complex64::from_polar(1.0, theta) * zeta_em(Complex64::new(0.5, t))?).re)
}

/// A zero of `ζ(1/2 + it)` with `t ∈ [lo, hi]`, located by a sign change of
/// Hardy's function and refined by the Illinois method to `tol`.
pub fn locate_zeta_zero(lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let steps = ((hi - lo) / 0.05).ceil().max(1.0) as usize;
    let mut a = lo;
    let mut fa = hardy_z(a)?;
    for i in 1..=steps {
        let b = lo + (hi - lo) * i as f64 / steps as f64;
        let fb = hardy_z(b)?;
        if fa == 0.0 {
            return Ok(a);
        }
        if fa.signum() != fb.signum() {
            return illinois(a, fa, b, fb, tol);
        }
        a = b;
        fa = fb;
    }
    Err(Error::InvalidInput(format!("no sign change of Z(t) on [{lo}, {hi}]")))
}

fn illinois(mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, tol: f64) -> Result<f64> {
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() < tol {
            return Ok(c);
        }
        let fc = hardy_z(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// `∫_1^∞ e^{−2πn y} y^{a−1} dy`.
fn upper_tail(a: Complex64, n: usize) -> Complex64 {
    let rate = 2.0 * PI * n as f64;
    let len = (60.0 + 2.0 * a.norm()) / rate;
    let f = |u: f64| ((a - 1.0) * (1.0 + u).ln() - rate * u).exp();
    composite_gauss(f, 0.0, len, 48, 20) * (-rate).exp()
}

/// Number of terms of the smoothed sums; `e^{−2π·12}` is far below `f64` resolution.
const AFE_TERMS: usize = 12;

/// `L(s, f)` for a level-one holomorphic eigenform of weight `k` with
/// Hecke-normalized coefficients, via
/// `Λ(s) = Σ_n a_n n^{ν} [G(s+ν, n) + G(1−s+ν, n)]`, `ν = (k−1)/2`,
/// `G(a, n) = ∫_1^∞ e^{−2πny} y^{a−1} dy`, `L = (2π)^{s+ν} Λ / Γ(s+ν)`.
pub fn l_value_afe(weight: u32, coeffs: &DirichletCoeffs, s: Complex64) -> Result<Complex64> {
    if weight < 2 || weight % 2 == 1 {
        return Err(Error::InvalidInput(format!("weight {weight} must be even and at least 2")));
    }
    let nu = (weight as f64 - 1.0) / 2.0;
    let root = if weight % 4 == 0 { 1.0 } else { -1.0 };
    let mut lambda = ZERO;
    for n in 1..=AFE_TERMS {
        let a = coeff(coeffs, n)? * (n as f64).powf(nu);
        lambda += a * (upper_tail(s + nu, n) + upper_tail(ONE - s + nu, n) * root);
    }
    Ok(lambda * ((s + nu) * (2.0 * PI).ln() - ln_gamma(s + nu)).exp())
}

/// Truncated Euler product `∏_{p≤P} (1 − a_p p^{−s} + p^{−2s})^{−1}` over the
/// available coefficients; a cross-check for `Re s > 3/2`.
pub fn l_value_euler(coeffs: &DirichletCoeffs, s: Complex64) -> Result<Complex64> {
    let mut prod = ONE;
    for p in 2..=coeffs.len() {
        if !crate::exact::is_prime(p as u64) {
            continue;
        }
        let ps = (-s * (p as f64).ln()).exp();
        prod /= ONE - coeff(coeffs, p)? * ps + ps * ps;
    }
    Ok(prod)
}

// ---------------------------------------------------------------------------
// Split identity

/// One evaluation of `Z_∞(s, φ)·L(s) = I₁ + I₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub s: Complex64,
    /// `∫ φ(x) H_s(x) d×x`.
    pub i1: Complex64,
    /// `∫ F(φ)(x) K_{1−s}(x) d×x`.
    pub i2: Complex64,
    pub z_inf: Complex64,
    /// Smoothed-sum value of `L(s)`.
    pub l_value: Complex64,
    /// `z_inf · l_value`.
    pub reference: Complex64,
    /// `|i1 + i2 − reference|`.
    pub defect: f64,
    /// Quadrature and truncation error estimate of `i1 + i2`.
    pub error_estimate: f64,
    /// Upper end of the `I₂` integration.
    pub cutoff: f64,
}

/// Unit intervals per tail-probe block.
const TAIL_BLOCK: usize = 32;

/// Phase per Gauss–Kronrod panel in the `I₂` quadrature.
const PANEL_PHASE: f64 = 3.0;

struct Panel {
    m: usize,
    nodes: Vec<(f64, f64, f64)>,
    /// Dual function at the nodes with its error bound.
    values: Vec<(Complex64, f64)>,
}

fn level_one_weight(params: &RealPlaceParams) -> Result<u32> {
    match params.blocks.as_slice() {
        [RealBlock::Ds2 { l, t }] if *t == ZERO && l % 2 == 1 => Ok(l + 1),
        _ => Err(Error::InvalidInput(
            "split identity needs a single discrete-series block D_l with odd l and t = 0".into(),
        )),
    }
}

/// Checks the split identity for `π` with archimedean component
/// `params = D_{k−1}` and coefficients `coeffs` (level one, so `a_n* = a_n`),
/// against compactly supported `phi` on `(0, ∞)`.
///
/// The dual function `F(φ)` is tabulated once and reused for every `s`. For a
/// discrete series and `phi` on the positive axis it vanishes on the negative
/// axis, so both integrals live on `(1, ∞)`.
pub fn split_zeta_identities(
    phi: &TestFunction,
    coeffs: &DirichletCoeffs,
    params: &RealPlaceParams,
    s_list: &[Complex64],
    tol: f64,
) -> Result<Vec<SplitReport>> {
    let weight = level_one_weight(params)?;
    if phi.terms.iter().any(|t| t.side == Side::Negative && t.weight != 0.0) {
        return Err(Error::InvalidInput("test function must be supported on (0, ∞)".into()));
    }
    let Some((_, hi)) = phi.support() else {
        return s_list
            .iter()
            .map(|&s| {
                Ok(SplitReport {
                    s,
                    i1: ZERO,
                    i2: ZERO,
                    z_inf: ZERO,
                    l_value: l_value_afe(weight, coeffs, s)?,
                    reference: ZERO,
                    defect: 0.0,
                    error_estimate: 0.0,
                    cutoff: 1.0,
                })
            })
            .collect();
    };
    let sigma_lo = s_list.iter().map(|s| s.re).fold(f64::INFINITY, f64::min);
    let sigma_hi = s_list.iter().map(|s| s.re).fold(f64::NEG_INFINITY, f64::max);
    let max_im = s_list.iter().map(|s| s.im.abs()).fold(0.0, f64::max);
    let panels = dual_panels(phi, coeffs, params, hi, (sigma_lo, sigma_hi), max_im, tol)?;
    let cutoff = panels.last().map_or(1.0, |p| p.m as f64 + 1.0);

    s_list
        .par_iter()
        .map(|&s| {
            let (i1, e1) = first_integral(phi, coeffs, s, hi, tol)?;
            let (i2, e2) = second_integral(&panels, coeffs, s)?;
            let z_inf = signed_mellin(phi, 0, s - 0.5, tol * 1e-2)?;
            let l_value = l_value_afe(weight, coeffs, s)?;
            let reference = z_inf * l_value;
            Ok(SplitReport {
                s,
                i1,
                i2,
                z_inf,
                l_value,
                reference,
                defect: (i1 + i2 - reference).norm(),
                error_estimate: e1 + e2,
                cutoff,
            })
        })
        .collect()
}

/// Single-`s` form of [`split_zeta_identities`].
pub fn split_zeta_identity(
    phi: &TestFunction,
    coeffs: &DirichletCoeffs,
    params: &RealPlaceParams,
    s: Complex64,
    tol: f64,
) -> Result<SplitReport> {
    Ok(split_zeta_identities(phi, coeffs, params, &[s], tol)?.remove(0))
}

/// `Σ_m S_s(m) ∫_m^{m+1} φ(x) x^{s−3/2} dx` with `S_s(m) = Σ_{n≤m} a_n n^{−s}`.
fn first_integral(phi: &TestFunction, coeffs: &DirichletCoeffs, s: Complex64, hi: f64, tol: f64) -> Result<(Complex64, f64)> {
    let top = hi.ceil() as usize;
    let mut sum = ZERO;
    let mut err = 0.0;
    let mut partial = ZERO;
    for m in 1..top {
        partial += coeff(coeffs, m)? * (-s * (m as f64).ln()).exp();
        let f = |x: f64| ((s - 1.5) * x.ln()).exp() * phi.eval(x);
        let (v, e) = adaptive_real(f, m as f64, m as f64 + 1.0, tol * 1e-2 / top as f64);
        sum += partial * v;
        err += partial.norm() * e;
    }
    Ok((sum, err))
}

/// Tabulates `F(φ)` on Gauss–Kronrod panels over `[1, X]`, with `X` grown in
/// blocks until the weighted tail bound is negligible for every `Re s` in
/// `sigma`.
fn dual_panels(
    phi: &TestFunction,
    coeffs: &DirichletCoeffs,
    params: &RealPlaceParams,
    hi: f64,
    sigma: (f64, f64),
    max_im: f64,
    tol: f64,
) -> Result<Vec<Panel>> {
    let table = gk21_table();
    let mut evaluator = DualEvaluator::new(params, 2, phi, 1.0, (TAIL_BLOCK + 1) as f64, tol)?;
    let mut panels: Vec<Panel> = Vec::new();
    // Σ_{n≤m} |a_n| n^{σ−1} for both ends of the σ range
    let mut abs_sums = (0.0, 0.0);
    let mut quiet = 0;
    let mut m0 = 1;
    loop {
        let m1 = m0 + TAIL_BLOCK;
        if m1 > coeffs.len() {
            return Err(Error::TailNotConverged { last: f64::NAN, cutoff: m0 as f64 });
        }
        evaluator.extend(m1 as f64)?;
        let mut block = Vec::new();
        for m in m0..m1 {
            let rate = 2.0 * PI * (hi / m as f64).sqrt() + max_im / m as f64 + 1.0;
            let count = (rate / PANEL_PHASE).ceil() as usize;
            let h = 1.0 / count as f64;
            for j in 0..count {
                let (a, b) = (m as f64 + j as f64 * h, m as f64 + (j + 1) as f64 * h);
                let nodes = table.iter().map(|&(x, wk, wg)| (0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * wk, 0.5 * (b - a) * wg));
                block.push(Panel { m, nodes: nodes.collect(), values: Vec::new() });
            }
        }
        block.par_iter_mut().try_for_each(|p| -> Result<()> {
            p.values = p
                .nodes
                .iter()
                .map(|&(x, _, _)| evaluator.eval(x).map(|d| (Complex64::from(d.value), d.achieved_tol)))
                .collect::<Result<_>>()?;
            Ok(())
        })?;
        let mut bound = 0.0;
        let mut last_m = 0;
        for p in &block {
            if p.m != last_m {
                let a = coeff(coeffs, p.m)?.norm();
                abs_sums.0 += a * (p.m as f64).powf(sigma.0 - 1.0);
                abs_sums.1 += a * (p.m as f64).powf(sigma.1 - 1.0);
                last_m = p.m;
            }
            for (&(x, wk, _), &(v, _)) in p.nodes.iter().zip(&p.values) {
                let weight = (x.powf(-0.5 - sigma.0) * abs_sums.0).max(x.powf(-0.5 - sigma.1) * abs_sums.1);
                bound += wk.abs() * v.norm() * weight;
            }
        }
        panels.extend(block);
        quiet = if bound < tol / 100.0 { quiet + 1 } else { 0 };
        if quiet >= 2 {
            return Ok(panels);
        }
        m0 = m1;
    }
}

/// `∫_1^X F(φ)(x) x^{−1/2−s} T(x) dx` with `T(x) = Σ_{n≤x} a_n n^{s−1}`.
fn second_integral(panels: &[Panel], coeffs: &DirichletCoeffs, s: Complex64) -> Result<(Complex64, f64)> {
    let mut sum = ZERO;
    let mut err = 0.0;
    let mut partial = ZERO;
    let mut last_m = 0;
    for p in panels {
        if p.m != last_m {
            partial += coeff(coeffs, p.m)? * ((s - 1.0) * (p.m as f64).ln()).exp();
            last_m = p.m;
        }
        let (mut k, mut g, mut e) = (ZERO, ZERO, 0.0);
        for (&(x, wk, wg), &(v, ev)) in p.nodes.iter().zip(&p.values) {
            let f = ((-0.5 - s) * x.ln()).exp() * partial;
            k += f * v * wk;
            g += f * v * wg;
            e += f.norm() * ev * wk.abs();
        }
        sum += k;
        err += (k - g).norm() + e;
    }
    Ok((sum, err))
}

// ---------------------------------------------------------------------------
// Tate pairing

/// Even Schwartz functions `φ = Σ_j c_j h_{2j}` built from Hermite functions
/// `h_k(x) = H_k(√(2π) x) e^{−πx²}`, which satisfy `ĥ_k = (−i)^k h_k` for
/// `f̂(ξ) = ∫ f(x) e^{−2πixξ} dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussHermite {
    pub coeffs: Vec<f64>,
}

/// Largest supported Hermite index `2j`.
const MAX_HERMITE: usize = 16;

impl GaussHermite {
    /// `e^{−πx²}`, its own Fourier transform.
    pub fn gaussian() -> Self {
        GaussHermite { coeffs: vec![1.0] }
    }

    fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() || 2 * (self.coeffs.len() - 1) > MAX_HERMITE {
            return Err(Error::InvalidInput(format!("need 1 to {} Hermite coefficients", MAX_HERMITE / 2 + 1)));
        }
        Ok(())
    }

    /// Monomial coefficients `p_m` of `φ(x) = Σ_m p_m x^{2m} e^{−πx²}`.
    fn monomials(&self, fourier: bool) -> Vec<f64> {
        let deg = 2 * (self.coeffs.len() - 1);
        // physicists' Hermite polynomials in y, then y = √(2π) x
        let mut h: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 2.0]];
        for k in 1..deg.max(1) {
            let mut next = vec![0.0; k + 2];
            for (i, c) in h[k].iter().enumerate() {
                next[i + 1] += 2.0 * c;
            }
            for (i, c) in h[k - 1].iter().enumerate() {
                next[i] -= 2.0 * k as f64 * c;
            }
            h.push(next);
        }
        let mut out = vec![0.0; deg / 2 + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            let sign = if fourier && j % 2 == 1 { -1.0 } else { 1.0 };
            for (i, hc) in h[2 * j].iter().enumerate().step_by(2) {
                out[i / 2] += sign * c * hc * (2.0 * PI).powi(i as i32 / 2);
            }
        }
        out
    }

    fn eval_monomials(p: &[f64], x: f64) -> f64 {
        let x2 = x * x;
        p.iter().rev().fold(0.0, |acc, c| acc * x2 + c) * (-PI * x2).exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        Self::eval_monomials(&self.monomials(false), x)
    }

    /// The Fourier transform `φ̂(ξ)`.
    pub fn fourier(&self, xi: f64) -> f64 {
        Self::eval_monomials(&self.monomials(true), xi)
    }

    /// `∫_ℝ φ̂(x) |x|^{s−1} dx` in closed form.
    pub fn fourier_mellin(&self, s: Complex64) -> Complex64 {
        self.monomials(true)
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let a = s / 2.0 + m as f64;
                (ln_gamma(a) - a * PI.ln()).exp() * *c
            })
            .sum()
    }
}

/// Variant of the zero-criterion pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingVariant {
    Tate,
    Cuspidal,
}

/// Test function of a pairing.
#[derive(Debug, Clone, PartialEq)]
pub enum PairingPhi {
    Tate(GaussHermite),
    Cuspidal { phi: TestFunction, coeffs: DirichletCoeffs, params: RealPlaceParams, tol: f64 },
}

/// One point of a zero-criterion scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub s: Complex64,
    /// Tate: `⟨H_s, φ̂⟩ + ⟨K_{1−s}, φ⟩`. Cuspidal: `(I₁ + I₂)/Z_∞(s, φ)`.
    pub value: Complex64,
    /// Tate: `ζ(s) ∫ φ̂ |x|^{s−1} dx`. Cuspidal: `L(s)` from smoothed sums.
    pub reference: Complex64,
    /// Tate: `|value|`, which vanishes exactly at zeros of `ζ`.
    /// Cuspidal: `|value − reference|`.
    pub defect: f64,
    /// `|value − reference|` for both variants.
    pub oracle_mismatch: f64,
}

/// Upper end of the Tate pairing integrals; `e^{−π·12²}` underflows any
/// polynomial prefactor allowed by [`GaussHermite`].
const TATE_CUTOFF: usize = 12;

/// `∫_ℝ H_s(x) g(x) dx` for even `g` with `∫_ℝ g = total`.
fn tate_pairing_half(g: &dyn Fn(f64) -> f64, total: f64, s: Complex64) -> Result<Complex64> {
    if s == ONE {
        return Err(Error::PoleAtOne);
    }
    let mut sum = ZERO;
    let mut partial = ZERO;
    for m in 1..TATE_CUTOFF {
        partial += (-s * (m as f64).ln()).exp();
        let f = |x: f64| ((s - 1.0) * x.ln()).exp() * g(x);
        let (v, _) = adaptive_real(f, m as f64, m as f64 + 1.0, 1e-16);
        sum += partial * v;
    }
    Ok(sum * 2.0 - total / (ONE - s))
}

/// `⟨H_s, φ̂⟩ + ⟨K_{1−s}, φ⟩`, which equals `ζ(s) ∫ φ̂ |x|^{s−1} dx`.
pub fn tate_pairing(phi: &GaussHermite, s: Complex64) -> Result<Complex64> {
    phi.validate()?;
    if s == ZERO {
        return Err(Error::PoleAtOne);
    }
    let f = |x: f64| phi.eval(x);
    let fh = |x: f64| phi.fourier(x);
    Ok(tate_pairing_half(&fh, phi.eval(0.0), s)? + tate_pairing_half(&f, phi.fourier(0.0), ONE - s)?)
}

/// Evaluates the zero-criterion pairing at every `s` (in parallel).
pub fn zero_criterion_pairing(phi: &PairingPhi, s_list: &[Complex64]) -> Result<Vec<PairingResult>> {
    match phi {
        PairingPhi::Tate(g) => s_list
            .par_iter()
            .map(|&s| {
                let value = tate_pairing(g, s)?;
                let reference = zeta_em(s)? * g.fourier_mellin(s);
                Ok(PairingResult { s, value, reference, defect: value.norm(), oracle_mismatch: (value - reference).norm() })
            })
            .collect(),
        PairingPhi::Cuspidal { phi, coeffs, params, tol } => {
            let reports = split_zeta_identities(phi, coeffs, params, s_list, *tol)?;
            Ok(reports
                .into_iter()
                .map(|r| {
                    let value = if r.z_inf == ZERO { ZERO } else { (r.i1 + r.i2) / r.z_inf };
                    let mismatch = (value - r.l_value).norm();
                    PairingResult { s: r.s, value, reference: r.l_value, defect: mismatch, oracle_mismatch: mismatch }
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::make_bump;
    use crate::voronoi_global::tau_coefficients;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ones(n: usize) -> DirichletCoeffs {
        DirichletCoeffs::from_values(vec![ONE; n]).unwrap()
    }

    fn delta() -> RealPlaceParams {
        RealPlaceParams { blocks: vec![RealBlock::Ds2 { l: 11, t: ZERO }] }
    }

    #[test]
    fn kernel_examples() {
        let z = ones(10);
        let spec = KernelSpec::Cuspidal { coeffs: &z, dual: &z, s: c(2.0, 0.0) };
        let v = h_kernel(&spec, 2.5).unwrap();
        assert!((v - c(2.5f64.powf(1.5) * 1.25, 0.0)).norm() < 1e-14);
        assert_eq!(h_kernel(&spec, 0.7).unwrap(), ZERO);
        assert_eq!(h_kernel(&spec, -0.7).unwrap(), ZERO);
        let k = k_dual_kernel(&spec, 3.5).unwrap();
        assert!((k - c(3.5f64.powf(1.5) * (1.0 + 0.25 + 1.0 / 9.0), 0.0)).norm() < 1e-13);
        assert!(h_kernel(&spec, 0.0).is_err());
        assert!(matches!(h_kernel(&spec, 11.0), Err(Error::CoeffRangeExceeded { needed: 11, .. })));

        let tau = tau_coefficients(10).unwrap();
        let spec = KernelSpec::Cuspidal { coeffs: &tau, dual: &tau, s: c(2.0, 0.0) };
        let expected = 2.5f64.powf(1.5) * (1.0 + tau.lambda(2).unwrap().re / 4.0);
        assert!((h_kernel(&spec, -2.5).unwrap().re - expected).abs() < 1e-14);
        assert_eq!(h_kernel(&spec, 2.5).unwrap(), k_dual_kernel(&spec, 2.5).unwrap());
    }

    #[test]
    fn tate_kernel_examples() {
        let (h, k) = clozel_tate_kernels(c(2.0, 0.0), 0.5).unwrap();
        assert!((h - ONE).norm() < 1e-15 && h == k);
        let (h, _) = clozel_tate_kernels(c(2.0, 0.0), 2.5).unwrap();
        assert!((h - c(4.125, 0.0)).norm() < 1e-14);
        assert!(matches!(clozel_tate_kernels(ONE, 2.0), Err(Error::PoleAtOne)));
        let spec = KernelSpec::Tate { s: c(0.3, 4.0) };
        assert_eq!(h_kernel(&spec, 7.2).unwrap(), k_dual_kernel(&spec, 7.2).unwrap());
    }

    #[test]
    fn step_structure() {
        let tau = tau_coefficients(100).unwrap();
        let s = c(0.7, 3.0);
        let spec = KernelSpec::Cuspidal { coeffs: &tau, dual: &tau, s };
        for m in 1..40 {
            let strip = |x: f64| h_kernel(&spec, x).unwrap() * ((0.5 - s) * x.ln()).exp();
            let (a, b) = (strip(m as f64 + 0.1), strip(m as f64 + 0.9));
            assert!((a - b).norm() <= 1e-13 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn zeta_oracle_values() {
        assert!((zeta_em(c(2.0, 0.0)).unwrap().re - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta_em(c(0.5, 0.0)).unwrap().re - (-1.4603545088095868)).abs() < 1e-13);
        assert!((zeta_em(c(-1.0, 0.0)).unwrap().re + 1.0 / 12.0).abs() < 1e-13);
        assert!(matches!(zeta_em(ONE), Err(Error::PoleAtOne)));
        // ζ(s) = Σ n^{−s} converges at Re s = 3, checked against direct summation
        let s = c(3.0, 10.0);
        let direct: Complex64 = (1..200000).map(|n| (-s * (n as f64).ln()).exp()).sum();
        assert!((zeta_em(s).unwrap() - direct).norm() < 1e-10);
    }

    #[test]
    fn first_zeta_zero() {
        let t = locate_zeta_zero(13.5, 15.0, 1e-12).unwrap();
        assert!((t - 14.134725141734693).abs() < 1e-9, "{t}");
        assert!(zeta_em(c(0.5, t)).unwrap().norm() < 1e-10);
        assert!(locate_zeta_zero(2.0, 10.0, 1e-12).is_err());
    }

    #[test]
    fn afe_matches_the_euler_product() {
        let tau = tau_coefficients(3000).unwrap();
        let s = c(2.5, 1.0);
        let afe = l_value_afe(12, &tau, s).unwrap();
        let euler = l_value_euler(&tau, s).unwrap();
        assert!((afe - euler).norm() < 1e-5 * afe.norm(), "{afe} {euler}");
        // Dirichlet series converges absolutely at Re s = 2.5
        let direct: Complex64 =
            (1..=3000).map(|n| tau.lambda(n).unwrap() * (-s * (n as f64).ln()).exp()).sum();
        assert!((afe - direct).norm() < 1e-4 * afe.norm());
        // completed L-function is symmetric under s ↦ 1 − s
        let lam = |s: Complex64| l_value_afe(12, &tau, s).unwrap() * (ln_gamma(s + 5.5) - (s + 5.5) * (2.0 * PI).ln()).exp();
        let t = c(0.3, 2.0);
        assert!((lam(t) - lam(ONE - t)).norm() < 1e-13);
        assert!(l_value_afe(11, &tau, s).is_err());
    }

    #[test]
    fn hermite_family_fourier_pairs() {
        let phi = GaussHermite { coeffs: vec![0.5, -0.2, 0.1] };
        for xi in [0.0, 0.3, 1.1] {
            // direct ∫ φ(x) cos(2πxξ) dx
            let (v, _) = adaptive_real(|x| c(phi.eval(x) * (2.0 * PI * x * xi).cos(), 0.0), -8.0, 8.0, 1e-14);
            assert!((v.re - phi.fourier(xi)).abs() < 1e-12, "ξ={xi}");
        }
        let s = c(0.8, 3.0);
        let (v, _) = adaptive_real(|x| ((s - 1.0) * x.ln()).exp() * phi.fourier(x) * 2.0, 1e-12, 8.0, 1e-13);
        assert!((v - phi.fourier_mellin(s)).norm() < 1e-9);
        assert!(GaussHermite { coeffs: vec![] }.validate().is_err());
    }

    #[test]
    fn tate_pairing_matches_zeta() {
        let phi = GaussHermite { coeffs: vec![1.0, 0.3] };
        for s in [c(2.0, 0.0), c(0.5, 13.0), c(0.7, 14.134725), c(0.3, -2.0)] {
            let r = &zero_criterion_pairing(&PairingPhi::Tate(phi.clone()), &[s]).unwrap()[0];
            assert!(r.oracle_mismatch < 1e-11 * r.reference.norm().max(1e-3), "{r:?}");
        }
        let at_zero = tate_pairing(&GaussHermite::gaussian(), c(0.5, 14.134725141734693)).unwrap();
        let off = tate_pairing(&GaussHermite::gaussian(), c(0.5, 13.0)).unwrap();
        assert!(at_zero.norm() < 1e-3 * off.norm());
        assert!(matches!(tate_pairing(&phi, ONE), Err(Error::PoleAtOne)));
        assert!(matches!(tate_pairing(&phi, ZERO), Err(Error::PoleAtOne)));
    }

    #[test]
    fn split_identity_zero_test_function() {
        let tau = tau_coefficients(20).unwrap();
        let r = split_zeta_identity(&TestFunction::zero(), &tau, &delta(), c(2.0, 0.0), 1e-8).unwrap();
        assert_eq!(r.i1 + r.i2, ZERO);
        assert_eq!(r.defect, 0.0);
    }

    #[test]
    fn split_identity_rejects_unsupported_inputs() {
        let tau = tau_coefficients(20).unwrap();
        let w = make_bump(1.0, 3.0).unwrap();
        let gl1 = RealPlaceParams { blocks: vec![RealBlock::Gl1 { delta: 0, t: ZERO }] };
        assert!(split_zeta_identity(&w, &tau, &gl1, c(2.0, 0.0), 1e-8).is_err());
        assert!(split_zeta_identity(&w.reflected(), &tau, &delta(), c(2.0, 0.0), 1e-8).is_err());
    }

    #[test]
    fn split_identity_for_delta() {
        let tau = tau_coefficients(3000).unwrap();
        let w = make_bump(1.0, 40.0).unwrap();
        let grid = [c(2.0, 0.0), c(0.5, 0.0), c(0.4, 1.0), c(1.2, -2.0), c(0.8, 3.0)];
        let reports = split_zeta_identities(&w, &tau, &delta(), &grid, 1e-8).unwrap();
        for r in &reports {
            assert!(r.defect < 1e-6 * r.reference.norm(), "{r:?}");
            assert!(r.defect < 1e-7, "{r:?}");
        }
    }
}
