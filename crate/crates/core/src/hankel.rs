//! Test functions, signed Mellin transforms, the dual function `w̃` of a real
//! place and a numerical check of the local functional equation
//! `M_δ[w̃](s − (n−1)/2) = γ(1 − s, π × sgn^δ, ψ)·M_δ[w](1 − s − (n−1)/2)`,
//! where `M_δ[f](z) = ∫_{ℝ^×} f(y) sgn(y)^δ |y|^z d×y`.
//!
//! Integrals against a bump are taken after the substitution
//! `y = c + r·tanh τ`, which turns the bump into `exp(−cosh²τ)·sech²τ`. The
//! trapezoid rule in `τ` then converges geometrically, and halving the step
//! gives a reliable error estimate.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch_local::{ln_dual_gamma, CharTwist, PlaceParams, RealPlaceParams};
use crate::bessel_kernel::{
    bessel_real_batch, build_contour, mb_integrate, pole_families, Estimate, KernelInterpolant, MIN_TOL,
};
use crate::quadrature::gk21_table;
use crate::{Error, Result};

/// Half-width of the `τ` window; the bump weight is below `1e−80` outside it.
const TAU_MAX: f64 = 3.3;
/// Coarsest trapezoid step.
const H0: f64 = 0.1;
/// Number of cached step levels `H0 / 2^j`.
const LEVELS: usize = 14;
/// `exp(−SAFETY)` is the target discretization error relative to the envelope.
const SAFETY: f64 = 40.0;

/// Which half-line a bump lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }
}

/// `weight · bump_[a,b](±x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTerm {
    pub a: f64,
    pub b: f64,
    pub weight: f64,
    pub side: Side,
}

impl BumpTerm {
    /// Profile at `y = |x|` (the side is handled by the caller).
    fn profile(&self, y: f64) -> f64 {
        bump_profile((2.0 * y - self.a - self.b) / (self.b - self.a))
    }
}

/// `u ↦ exp(−1/(1 − u²))` on `|u| < 1`, zero elsewhere.
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Finite linear combination of bumps on `ℝ^×`; the empty combination is `w ≡ 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub terms: Vec<BumpTerm>,
}

/// Bump supported on `[a, b] ⊂ (0, ∞)` with value `e^{−1}` at the midpoint.
pub fn make_bump(a: f64, b: f64) -> Result<TestFunction> {
    if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
        return Err(Error::BadSupport { a, b });
    }
    Ok(TestFunction { terms: vec![BumpTerm { a, b, weight: 1.0, side: Side::Positive }] })
}

impl TestFunction {
    pub fn zero() -> Self {
        TestFunction { terms: Vec::new() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| x * t.side.sign() > 0.0)
            .map(|t| t.weight * t.profile(x.abs()))
            .sum()
    }

    pub fn plus(&self, other: &TestFunction) -> TestFunction {
        TestFunction { terms: self.terms.iter().chain(&other.terms).copied().collect() }
    }

    pub fn scaled(&self, c: f64) -> TestFunction {
        TestFunction { terms: self.terms.iter().map(|t| BumpTerm { weight: t.weight * c, ..*t }).collect() }
    }

    /// `x ↦ w(λx)` for `λ > 0`.
    pub fn dilated(&self, lambda: f64) -> Result<TestFunction> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("dilation factor {lambda} must be positive")));
        }
        Ok(TestFunction {
            terms: self.terms.iter().map(|t| BumpTerm { a: t.a / lambda, b: t.b / lambda, ..*t }).collect(),
        })
    }

    /// `x ↦ w(−x)`.
    pub fn reflected(&self) -> TestFunction {
        let flip = |s| if s == Side::Positive { Side::Negative } else { Side::Positive };
        TestFunction { terms: self.terms.iter().map(|t| BumpTerm { side: flip(t.side), ..*t }).collect() }
    }

    /// Smallest interval containing the support of `|x| ↦ w(±x)`.
    pub fn support(&self) -> Option<(f64, f64)> {
        let live = self.terms.iter().filter(|t| t.weight != 0.0);
        live.fold(None, |acc, t| match acc {
            None => Some((t.a, t.b)),
            Some((lo, hi)) => Some((f64::min(lo, t.a), f64::max(hi, t.b))),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.support().is_none()
    }

    fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if !(t.a.is_finite() && t.b.is_finite() && 0.0 < t.a && t.a < t.b) {
                return Err(Error::BadSupport { a: t.a, b: t.b });
            }
            if !t.weight.is_finite() {
                return Err(Error::InvalidInput("non-finite bump weight".into()));
            }
        }
        Ok(())
    }
}

/// A trapezoid node of `∫ f(y) bump(y) d×y`.
#[derive(Debug, Clone, Copy)]
struct Node {
    y: f64,
    ln_y: f64,
    /// Includes the bump value, the Jacobian, `1/y` and the term weight.
    weight: f64,
}

/// Cached trapezoid rules of one bump term in the `tanh` variable.
#[derive(Debug)]
struct TermRule {
    term: BumpTerm,
    /// Largest `|d ln y/dτ|` over the window.
    dlog: f64,
    levels: Vec<OnceLock<Vec<Node>>>,
}

impl TermRule {
    fn new(term: BumpTerm) -> Self {
        let (c, r) = (0.5 * (term.a + term.b), 0.5 * (term.b - term.a));
        let dlog = (0..=660)
            .map(|i| {
                let tau = -TAU_MAX + i as f64 * 0.01;
                let ch = tau.cosh();
                r / (ch * ch) / (c + r * tau.tanh())
            })
            .fold(0.0, f64::max);
        TermRule { term, dlog, levels: (0..LEVELS).map(|_| OnceLock::new()).collect() }
    }

    /// Nodes at step `H0 / 2^level`. The node count is `2K + 1` with `K` even,
    /// so the even-indexed nodes form the rule with twice the step.
    fn nodes(&self, level: usize) -> &[Node] {
        self.levels[level].get_or_init(|| {
            let h = H0 / (1u64 << level) as f64;
            let mut k_max = (TAU_MAX / h).ceil() as i64;
            k_max += k_max % 2;
            let (c, r) = (0.5 * (self.term.a + self.term.b), 0.5 * (self.term.b - self.term.a));
            (-k_max..=k_max)
                .map(|k| {
                    let tau = k as f64 * h;
                    let ch = tau.cosh();
                    let y = c + r * tau.tanh();
                    let weight = self.term.weight * h * r / (ch * ch) * (-ch * ch).exp() / y;
                    Node { y, ln_y: y.ln(), weight }
                })
                .collect()
        })
    }

    /// Coarsest level whose discretization error is negligible for an
    /// integrand oscillating at `rate` radians per unit of `ln y`.
    fn level_for(&self, rate: f64) -> usize {
        let h = PI / (0.5 * rate * self.dlog + SAFETY);
        let level = (H0 / h).log2().ceil().max(0.0) as usize;
        level.min(LEVELS - 1)
    }
}

/// Trapezoid rules for every term of a test function.
#[derive(Debug)]
struct Rules {
    rules: Vec<TermRule>,
    ln_lo: f64,
    ln_hi: f64,
}

/// `M = exp(z·ln_ref)·(fine)`, with `coarse` the same sum at twice the step.
struct ScaledMellin {
    ln_ref: f64,
    fine: Complex64,
    coarse: Complex64,
}

impl Rules {
    fn new(w: &TestFunction) -> Option<Self> {
        let (lo, hi) = w.support()?;
        let rules = w.terms.iter().filter(|t| t.weight != 0.0).map(|&t| TermRule::new(t)).collect();
        Some(Rules { rules, ln_lo: lo.ln(), ln_hi: hi.ln() })
    }

    fn mellin(&self, delta: u8, z: Complex64, extra: usize) -> ScaledMellin {
        let ln_ref = if z.re >= 0.0 { self.ln_hi } else { self.ln_lo };
        let mut fine = Complex64::new(0.0, 0.0);
        let mut coarse = Complex64::new(0.0, 0.0);
        for rule in &self.rules {
            let sign = if delta == 1 { rule.term.side.sign() } else { 1.0 };
            let level = (rule.level_for(z.norm()) + extra).min(LEVELS - 1);
            for (i, node) in rule.nodes(level).iter().enumerate() {
                if node.weight == 0.0 {
                    continue;
                }
                let v = (z * (node.ln_y - ln_ref)).exp() * (node.weight * sign);
                fine += v;
                if i % 2 == 0 {
                    coarse += v * 2.0;
                }
            }
        }
        ScaledMellin { ln_ref, fine, coarse }
    }

    /// `ln M_δ[w](z)`, or `None` when the transform vanishes.
    fn ln_mellin(&self, delta: u8, z: Complex64) -> Option<Complex64> {
        let m = self.mellin(delta, z, 0);
        (m.fine != Complex64::new(0.0, 0.0)).then(|| z * m.ln_ref + m.fine.ln())
    }

    /// `Σ |weight|·y^e`: the `L¹` mass that multiplies kernel errors.
    fn abs_moment(&self, e: f64) -> f64 {
        self.rules.iter().flat_map(|r| r.nodes(2)).map(|n| n.weight.abs() * n.y.powf(e)).sum()
    }
}

fn check_parity(delta: u8) -> Result<()> {
    if delta > 1 {
        return Err(Error::InvalidInput(format!("parity {delta} not in {{0,1}}")));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol >= MIN_TOL) {
        return Err(Error::InvalidInput(format!("tolerance {tol:e} below the floor {MIN_TOL:e}")));
    }
    Ok(())
}

/// `∫_{ℝ^×} f(y) sgn(y)^δ |y|^z d×y` with absolute error at most `tol`.
pub fn signed_mellin(f: &TestFunction, delta: u8, z: Complex64, tol: f64) -> Result<Complex64> {
    check_parity(delta)?;
    f.validate()?;
    let Some(rules) = Rules::new(f) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let mut achieved = f64::INFINITY;
    for extra in 0..4 {
        let m = rules.mellin(delta, z, extra);
        let scale = (z * m.ln_ref).exp();
        achieved = ((m.fine - m.coarse) * scale).norm();
        if achieved <= tol {
            return Ok(m.fine * scale);
        }
    }
    Err(Error::ToleranceNotMet { achieved, requested: tol })
}

/// Which evaluation route produced a dual-function value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Mellin,
    Convolution,
}

/// `w̃(x)` with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualFunctionResult {
    pub x: f64,
    pub value: Complex64,
    pub route: Route,
    pub achieved_tol: f64,
}

fn check_inputs(params: &RealPlaceParams, n: usize, w: &TestFunction, x: f64, tol: f64) -> Result<()> {
    params.validate()?;
    if params.rank() != n {
        return Err(Error::InvalidInput(format!("rank {n} does not match the parameters (rank {})", params.rank())));
    }
    w.validate()?;
    check_tol(tol)?;
    if x == 0.0 || !x.is_finite() {
        return Err(Error::InvalidInput("dual function argument must be finite and nonzero".into()));
    }
    Ok(())
}

fn finish(x: f64, value: Complex64, error: f64, route: Route, tol: f64) -> Result<DualFunctionResult> {
    if error > tol {
        return Err(Error::ToleranceNotMet { achieved: error, requested: tol });
    }
    Ok(DualFunctionResult { x, value, route, achieved_tol: error })
}

/// `w̃(x) = |x|^{(n−1)/2} · ½ Σ_δ sgn(x)^δ (1/2πi) ∫_C γ(1 − s, π × sgn^δ)
/// M_δ[w](1 − s − (n−1)/2) |x|^{−s} ds` on the admissible contour.
pub fn hankel_mellin_route(
    params: &RealPlaceParams,
    n: usize,
    w: &TestFunction,
    x: f64,
    tol: f64,
) -> Result<DualFunctionResult> {
    check_inputs(params, n, w, x, tol)?;
    let Some(rules) = Rules::new(w) else {
        return finish(x, Complex64::new(0.0, 0.0), 0.0, Route::Mellin, tol);
    };
    let pp = PlaceParams::Real(params.clone());
    let contour = build_contour(&pp, None)?;
    let shift = 0.5 * (n as f64 - 1.0);
    let amp = x.abs().powf(shift);
    let lx = x.abs().ln();
    let ln_g = |s: Complex64, out: &mut [Option<Complex64>]| -> Result<()> {
        for (d, slot) in out.iter_mut().enumerate() {
            let (lg, vanishes) = ln_dual_gamma(&pp, CharTwist(d as i64), s)?;
            *slot = if vanishes { None } else { rules.ln_mellin(d as u8, 1.0 - s - shift).map(|lm| lg + lm) };
        }
        Ok(())
    };
    let out = mb_integrate(&contour, &[lx], (lx + rules.ln_lo, lx + rules.ln_hi), 2, 0.5 * tol / amp, ln_g)?;
    let v = &out.values[0];
    let parity = if x > 0.0 { v[0] + v[1] } else { v[0] - v[1] };
    finish(x, parity * 0.5 * amp, out.errors[0] * amp, Route::Mellin, tol)
}

/// `|x|^{(n−1)/2} Σ_terms ∫ 𝔟(xt) w(t) |t|^{e} d×t` with the kernel supplied as
/// a batch evaluator. Returns `(value, error estimate)`.
fn convolve<K>(rules: &Rules, n: usize, x: f64, exponent: f64, tol: f64, kernel: K) -> Result<(Complex64, f64)>
where
    K: Fn(&[f64]) -> Result<Vec<Estimate>>,
{
    let amp = x.abs().powf(0.5 * (n as f64 - 1.0));
    let mut best = (Complex64::new(0.0, 0.0), f64::INFINITY);
    for extra in 0..4 {
        let mut fine = Complex64::new(0.0, 0.0);
        let mut coarse = Complex64::new(0.0, 0.0);
        let mut kernel_err = 0.0;
        for rule in &rules.rules {
            let rate = 2.0 * PI * (x.abs() * rule.term.b).powf(1.0 / n as f64);
            let level = (rule.level_for(rate) + extra).min(LEVELS - 1);
            let nodes: Vec<(usize, &Node)> = rule.nodes(level).iter().enumerate().filter(|(_, n)| n.weight != 0.0).collect();
            let args: Vec<f64> = nodes.iter().map(|(_, nd)| x * rule.term.side.sign() * nd.y).collect();
            let values = kernel(&args)?;
            for ((i, nd), est) in nodes.iter().zip(values) {
                let wgt = nd.weight * nd.y.powf(exponent);
                let v = est.value * wgt;
                fine += v;
                if i % 2 == 0 {
                    coarse += v * 2.0;
                }
                kernel_err += wgt.abs() * est.error;
            }
        }
        let err = amp * ((fine - coarse).norm() + kernel_err);
        if err < best.1 {
            best = (fine * amp, err);
        }
        if err <= tol {
            break;
        }
    }
    Ok(best)
}

/// Exponent of `|t|` in the convolution formula for rank `n`.
fn convolution_exponent(n: usize) -> f64 {
    0.5 * (3.0 - n as f64)
}

/// `w̃(x) = |x|^{(n−1)/2} ∫ 𝔟(xt) w(t) |t|^{(3−n)/2} d×t`, with `𝔟` evaluated
/// directly on the admissible contour.
pub fn hankel_convolution_route(
    params: &RealPlaceParams,
    n: usize,
    w: &TestFunction,
    x: f64,
    tol: f64,
) -> Result<DualFunctionResult> {
    convolution_route_with_exponent(params, n, w, x, tol, convolution_exponent(n))
}

fn convolution_route_with_exponent(
    params: &RealPlaceParams,
    n: usize,
    w: &TestFunction,
    x: f64,
    tol: f64,
    exponent: f64,
) -> Result<DualFunctionResult> {
    check_inputs(params, n, w, x, tol)?;
    let Some(rules) = Rules::new(w) else {
        return finish(x, Complex64::new(0.0, 0.0), 0.0, Route::Convolution, tol);
    };
    let contour = build_contour(&PlaceParams::Real(params.clone()), None)?;
    let amp = x.abs().powf(0.5 * (n as f64 - 1.0));
    let kernel_tol = (0.1 * tol / (amp * rules.abs_moment(exponent)).max(1e-300)).max(MIN_TOL);
    let kernel = |ys: &[f64]| bessel_real_batch(params, &contour, ys, kernel_tol);
    let (value, err) = convolve(&rules, n, x, exponent, tol, kernel)?;
    finish(x, value, err, Route::Convolution, tol)
}

/// Convolution-route evaluator for many arguments in `min ≤ |x| ≤ max`,
/// backed by shared Bessel interpolants. The range can be extended upwards.
#[derive(Debug)]
pub struct DualEvaluator {
    params: RealPlaceParams,
    n: usize,
    rules: Option<Rules>,
    /// Interpolants on consecutive `|y|` ranges, in increasing order.
    pieces: Vec<KernelInterpolant>,
    range: (f64, f64),
    exponent: f64,
    tol: f64,
}

impl DualEvaluator {
    pub fn new(params: &RealPlaceParams, n: usize, w: &TestFunction, x_min: f64, x_max: f64, tol: f64) -> Result<Self> {
        Self::with_exponent(params, n, w, x_min, x_max, tol, convolution_exponent(n))
    }

    fn with_exponent(
        params: &RealPlaceParams,
        n: usize,
        w: &TestFunction,
        x_min: f64,
        x_max: f64,
        tol: f64,
        exponent: f64,
    ) -> Result<Self> {
        check_inputs(params, n, w, x_min, tol)?;
        if !(0.0 < x_min && x_min < x_max && x_max.is_finite()) {
            return Err(Error::InvalidInput(format!("bad dual-function range [{x_min}, {x_max}]")));
        }
        let mut ev = DualEvaluator {
            params: params.clone(),
            n,
            rules: Rules::new(w),
            pieces: Vec::new(),
            range: (x_min, x_min),
            exponent,
            tol,
        };
        ev.extend(x_max)?;
        Ok(ev)
    }

    /// Extends the covered range up to `|x| ≤ x_max`.
    pub fn extend(&mut self, x_max: f64) -> Result<()> {
        let (x_min, old) = self.range;
        if !(x_max > old && x_max.is_finite()) {
            return Ok(());
        }
        if let Some(r) = &self.rules {
            let shift = 0.5 * (self.n as f64 - 1.0);
            let amp = x_max.powf(shift).max(x_min.powf(shift));
            let kernel_tol = (0.1 * self.tol / (amp * r.abs_moment(self.exponent)).max(1e-300)).max(MIN_TOL);
            let y_lo = match self.pieces.last() {
                Some(p) => p.range().1,
                None => x_min * r.ln_lo.exp() * (1.0 - 1e-9),
            };
            let y_hi = x_max * r.ln_hi.exp() * (1.0 + 1e-9);
            self.pieces.push(KernelInterpolant::build(&self.params, y_lo, y_hi, kernel_tol)?);
        }
        self.range.1 = x_max;
        Ok(())
    }

    /// Covered range of `|x|`.
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    fn kernel_at(&self, y: f64) -> Result<Estimate> {
        let idx = self.pieces.partition_point(|p| p.range().1 < y.abs());
        let piece = self.pieces.get(idx).or(self.pieces.last()).expect("evaluator has a kernel");
        Ok(Estimate { value: piece.bessel(y)?, error: piece.achieved_tol })
    }

    pub fn eval(&self, x: f64) -> Result<DualFunctionResult> {
        let (lo, hi) = self.range;
        if !(x.abs() >= lo && x.abs() <= hi) {
            return Err(Error::InvalidInput(format!("argument {x} outside the evaluator range [{lo}, {hi}]")));
        }
        let Some(rules) = &self.rules else {
            return finish(x, Complex64::new(0.0, 0.0), 0.0, Route::Convolution, self.tol);
        };
        let kernel = |ys: &[f64]| -> Result<Vec<Estimate>> { ys.iter().map(|&y| self.kernel_at(y)).collect() };
        let (value, err) = convolve(rules, self.n, x, self.exponent, self.tol, kernel)?;
        finish(x, value, err, Route::Convolution, self.tol)
    }
}

/// One row of the functional-equation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeResidual {
    pub s: Complex64,
    pub delta: u8,
    /// `M_δ[w̃](s − (n−1)/2)` from sampled `w̃`.
    pub lhs: Complex64,
    /// `γ(1 − s, π × sgn^δ)·M_δ[w](1 − s − (n−1)/2)`.
    pub rhs: Complex64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|, 10⁻³⁰)`.
    pub rel_residual: f64,
    /// Absolute error estimate of `lhs`.
    pub lhs_error: f64,
}

/// Functional-equation residuals with the sampling window used for `w̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeReport {
    pub rows: Vec<FeResidual>,
    pub x_min: f64,
    pub x_max: f64,
    pub max_rel_residual: f64,
}

/// Below `x_min`, `w̃` is replaced by its pole expansion; `x_min` is this
/// fraction of `1/sup supp(w)`.
const SMALL_X: f64 = 0.01;
/// Trapezoid points on each circle around a pole of `γ`.
const CIRCLE_POINTS: usize = 64;

/// Residuals of the local functional equation at every `s` and both parities.
pub fn local_fe_residual(
    params: &RealPlaceParams,
    n: usize,
    w: &TestFunction,
    s_samples: &[Complex64],
    tol: f64,
) -> Result<FeReport> {
    fe_residual_with_exponent(params, n, w, s_samples, tol, convolution_exponent(n))
}

fn fe_residual_with_exponent(
    params: &RealPlaceParams,
    n: usize,
    w: &TestFunction,
    s_samples: &[Complex64],
    tol: f64,
    exponent: f64,
) -> Result<FeReport> {
    check_inputs(params, n, w, 1.0, tol)?;
    if s_samples.is_empty() {
        return Err(Error::InvalidInput("no sample points".into()));
    }
    let pp = PlaceParams::Real(params.clone());
    let shift = 0.5 * (n as f64 - 1.0);

    let mut rhs = Vec::new();
    for &s in s_samples {
        for delta in 0..2u8 {
            let (lg, vanishes) = ln_dual_gamma(&pp, CharTwist(delta as i64), s)?;
            let value = if vanishes {
                Complex64::new(0.0, 0.0)
            } else {
                lg.exp() * signed_mellin(w, delta, 1.0 - s - shift, tol * 1e-3)?
            };
            rhs.push(value);
        }
    }
    let Some(rules) = Rules::new(w) else {
        let rows = rows_from(s_samples, &rhs, &vec![(Complex64::new(0.0, 0.0), 0.0); rhs.len()]);
        return Ok(FeReport { max_rel_residual: max_rel(&rows), rows, x_min: 0.0, x_max: 0.0 });
    };

    for delta in 0..2u8 {
        let right = pole_families(&pp, Some(CharTwist(delta as i64)))
            .iter()
            .map(|f| f.base.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(s) = s_samples.iter().find(|s| s.re <= right + 0.05) {
            return Err(Error::InvalidInput(format!(
                "Re s = {} is not right of the kernel poles (rightmost at {right}); the Mellin integral of w̃ diverges",
                s.re
            )));
        }
    }

    let hi = rules.ln_hi.exp();
    let x_min = SMALL_X / hi;
    let sigma_max = s_samples.iter().map(|s| s.re).fold(f64::NEG_INFINITY, f64::max);
    let im_max = s_samples.iter().map(|s| s.im.abs()).fold(0.0, f64::max);

    // Upper cutoff: double until the probes at x_max and 0.8·x_max are both
    // negligible relative to the size of the transform being checked.
    let scale = rhs.iter().map(|r| r.norm()).fold(0.0, f64::max).max(1e-30);
    let mut x_max = 4.0_f64.max(8.0 * x_min);
    let mut evaluator = DualEvaluator::with_exponent(params, n, w, x_min, x_max, tol, exponent)?;
    let tail;
    loop {
        let mut weighted: f64 = 0.0;
        for x in [x_max, 0.8 * x_max] {
            for sign in [1.0, -1.0] {
                let size = evaluator.eval(sign * x)?.value.norm();
                weighted = weighted.max(size * x.powf(sigma_max - shift));
            }
        }
        if weighted < 0.1 * tol * scale {
            tail = weighted;
            break;
        }
        if x_max > 1e5 {
            return Err(Error::TailNotConverged { last: weighted, cutoff: x_max });
        }
        x_max *= 2.0;
        evaluator.extend(x_max)?;
    }

    // GK21 panels in v = ln x, sized to the oscillation of w̃ and of |x|^{i Im s}.
    let table = gk21_table();
    let (v0, v1) = (x_min.ln(), x_max.ln());
    let width = |v: f64| (6.0 / (2.0 * PI * (v.exp() * hi).powf(1.0 / n as f64) + im_max + 1.0)).min(0.5);
    let mut panels = Vec::new();
    let mut v = v0;
    while v < v1 {
        let mut h = width(v);
        h = h.min(width(v + h));
        if v1 - v - h < 0.25 * h {
            h = v1 - v;
        }
        panels.push((v, v + h));
        v += h;
    }
    let xs: Vec<f64> = panels
        .iter()
        .flat_map(|&(a, b)| table.iter().map(move |&(t, _, _)| (0.5 * (a + b) + 0.5 * (b - a) * t).exp()))
        .collect();
    let samples: Vec<(DualFunctionResult, DualFunctionResult)> = xs
        .par_iter()
        .map(|&x| Ok((evaluator.eval(x)?, evaluator.eval(-x)?)))
        .collect::<Result<_>>()?;

    let mut lhs = Vec::new();
    for &s in s_samples {
        for delta in 0..2u8 {
            let sgn = if delta == 0 { 1.0 } else { -1.0 };
            let mut kr = Complex64::new(0.0, 0.0);
            let mut err = tail;
            for (pi, &(a, b)) in panels.iter().enumerate() {
                let half = 0.5 * (b - a);
                let mut k = Complex64::new(0.0, 0.0);
                let mut g = Complex64::new(0.0, 0.0);
                for (j, &(_, wk, wg)) in table.iter().enumerate() {
                    let idx = pi * table.len() + j;
                    let x = xs[idx];
                    let (p, m) = &samples[idx];
                    let pw = (x.ln() * (s - shift)).exp();
                    let f = (p.value + m.value * sgn) * pw;
                    k += f * wk;
                    g += f * wg;
                    err += half * wk * (p.achieved_tol + m.achieved_tol) * pw.norm();
                }
                kr += k * half;
                err += ((k - g) * half).norm();
            }
            let small = small_x_piece(&pp, &rules, delta, s, shift, x_min, tol)?;
            lhs.push((kr + small, err));
        }
    }
    let rows = rows_from(s_samples, &rhs, &lhs);
    Ok(FeReport { max_rel_residual: max_rel(&rows), rows, x_min, x_max })
}

/// `∫_0^{x₀} 2W_δ(x) x^{s−(n−1)/2} d×x` where `2W_δ(x) = w̃(x) + (−1)^δ w̃(−x)`,
/// from the pole expansion of `W_δ`: the sum over poles `p` of `γ(1 − ·)` of
/// `(1/2πi)∮_p G_δ(s′) x₀^{s−s′}/(s − s′) ds′` with
/// `G_δ(s′) = γ(1 − s′, π × sgn^δ)·M_δ[w](1 − s′ − (n−1)/2)`.
fn small_x_piece(
    pp: &PlaceParams,
    rules: &Rules,
    delta: u8,
    s: Complex64,
    shift: f64,
    x0: f64,
    tol: f64,
) -> Result<Complex64> {
    let families = pole_families(pp, Some(CharTwist(delta as i64)));
    let mut poles: Vec<Complex64> = Vec::new();
    for f in &families {
        for j in 0..60 {
            let p = f.base - j as f64 * f.step;
            if !poles.iter().any(|q| (q - p).norm() < 1e-9) {
                poles.push(p);
            }
        }
    }
    poles.sort_by(|a, b| b.re.total_cmp(&a.re));
    let lx0 = x0.ln();
    let g = |z: Complex64| -> Result<Complex64> {
        let (lg, vanishes) = ln_dual_gamma(pp, CharTwist(delta as i64), z)?;
        if vanishes {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let Some(lm) = rules.ln_mellin(delta, 1.0 - z - shift) else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        Ok((lg + lm + (s - z) * lx0).exp() / (s - z))
    };
    let mut total = Complex64::new(0.0, 0.0);
    let mut quiet = 0;
    for (i, &p) in poles.iter().enumerate() {
        let gap = poles
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| (q - p).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = (0.45 * gap).min(0.25).min(0.45 * (s.re - p.re));
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..CIRCLE_POINTS {
            let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / CIRCLE_POINTS as f64);
            // (1/2πi) ∮ f ds = mean of f(p + r e)·r e over the circle
            sum += g(p + e * radius)? * e * radius;
        }
        let contribution = sum / CIRCLE_POINTS as f64;
        total += contribution;
        quiet = if contribution.norm() < tol * 1e-4 { quiet + 1 } else { 0 };
        if quiet >= 3 {
            break;
        }
    }
    Ok(total)
}

fn rows_from(s_samples: &[Complex64], rhs: &[Complex64], lhs: &[(Complex64, f64)]) -> Vec<FeResidual> {
    let mut rows = Vec::new();
    for (i, &s) in s_samples.iter().enumerate() {
        for delta in 0..2u8 {
            let k = 2 * i + delta as usize;
            let (l, e) = lhs[k];
            let r = rhs[k];
            let denom = l.norm().max(r.norm()).max(1e-30);
            rows.push(FeResidual { s, delta, lhs: l, rhs: r, rel_residual: (l - r).norm() / denom, lhs_error: e });
        }
    }
    rows
}

fn max_rel(rows: &[FeResidual]) -> f64 {
    rows.iter().map(|r| r.rel_residual).fold(0.0, f64::max)
}
