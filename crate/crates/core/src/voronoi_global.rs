//! The GL(2)/ℚ Voronoi identity for a level-one holomorphic eigenform,
//! assembled from the local pieces and verified numerically.
//!
//! With `ζ = a/c` and a test function `w` on `(0, ∞)`, the two sides are
//!
//! * `Σ_{n ≥ 1} e(−na/c) λ(n) n^{−1/2} w(n)`, and
//! * `Σ_α ∏_{p | c} F_p(α) · ∏_{p ∤ c} 𝕃_p(α) · w̃(α)`, where `α` runs over the
//!   detected support lattice, `F_p` is the exact ramified local transform,
//!   `𝕃_p` the dual basic function and `w̃` the Hankel dual of `w` for the
//!   discrete series `D_{k−1}`.

use std::collections::HashMap;
use std::path::Path;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch_local::{RealBlock, RealPlaceParams};
use crate::bessel_kernel::MIN_TOL;
use crate::exact::{e, frac_part, prime_factors, rat, valuation};
use crate::hankel::{DualEvaluator, Side, TestFunction};
use crate::padic_local::{
    kloosterman_gl2_literal, pow_rat, ramified_support_floor, ramified_transform_gl2_exact, SatakeParams,
};
use crate::{Error, Result};

/// Where a coefficient table came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffSource {
    /// Exact expansion of the discriminant form.
    Tau,
    /// `n,lambda_re,lambda_im` CSV supplied by the user.
    File,
}

/// Hecke-normalized coefficients `λ(1), …, λ(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletCoeffs {
    values: Vec<Complex64>,
    /// Exact integer coefficients `τ(n)` when available.
    exact: Option<Vec<i128>>,
    pub source: CoeffSource,
}

/// `τ(n)` for `n ≤ N` from `q ∏_j (1 − q^j)^{24}`, and `λ(n) = τ(n)/n^{11/2}`.
///
/// The product `f = ∏ (1 − q^j)^{24}` satisfies `q f′/f = −24 Σ_k σ(k) q^k`,
/// so `n f_n = −24 Σ_{k=1}^{n} σ(k) f_{n−k}`; then `τ(n) = f_{n−1}`.
pub fn tau_coefficients(n: usize) -> Result<DirichletCoeffs> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one coefficient".into()));
    }
    let mut sigma = vec![0i128; n];
    for d in 1..n {
        for m in (d..n).step_by(d) {
            sigma[m] += d as i128;
        }
    }
    let overflow = || Error::Overflow(format!("expanding τ(n) up to n = {n}"));
    let mut f = vec![0i128; n];
    f[0] = 1;
    for m in 1..n {
        let mut acc: i128 = 0;
        for k in 1..=m {
            let term = sigma[k].checked_mul(f[m - k]).ok_or_else(overflow)?;
            acc = acc.checked_add(term).ok_or_else(overflow)?;
        }
        let total = acc.checked_mul(-24).ok_or_else(overflow)?;
        debug_assert_eq!(total % m as i128, 0);
        f[m] = total / m as i128;
    }
    let values = f.iter().enumerate().map(|(i, &t)| Complex64::new(t as f64 / ((i + 1) as f64).powf(5.5), 0.0)).collect();
    Ok(DirichletCoeffs { values, exact: Some(f), source: CoeffSource::Tau })
}

/// Outcome of the multiplicativity check `λ(mn) = λ(m)λ(n)` on coprime pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativityCheck {
    pub pairs: Vec<(usize, usize)>,
    pub failures: Vec<(usize, usize)>,
    /// True when integer coefficients were compared exactly.
    pub exact: bool,
}

impl DirichletCoeffs {
    /// Wraps externally supplied values; `values[0]` is `λ(1)` and must be 1.
    pub fn from_values(values: Vec<Complex64>) -> Result<Self> {
        match values.first() {
            Some(v) if (v - Complex64::new(1.0, 0.0)).norm() < 1e-12 => {}
            _ => return Err(Error::InvalidInput("coefficient table must start with λ(1) = 1".into())),
        }
        Ok(DirichletCoeffs { values, exact: None, source: CoeffSource::File })
    }

    /// Number of coefficients `N`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `λ(n)` for `1 ≤ n ≤ N`.
    pub fn lambda(&self, n: usize) -> Option<Complex64> {
        n.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }

    /// Exact `τ(n)` when the table came from the expansion.
    pub fn tau(&self, n: usize) -> Option<i128> {
        self.exact.as_ref().and_then(|v| n.checked_sub(1).and_then(|i| v.get(i)).copied())
    }

    /// Checks `λ(mn) = λ(m)λ(n)` on `count` random coprime pairs with `mn ≤ N`
    /// (exactly on `τ` when available, else to relative accuracy `1e−8`).
    pub fn check_multiplicativity(&self, count: usize, seed: u64) -> MultiplicativityCheck {
        let n = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::new();
        let mut failures = Vec::new();
        let mut attempts = 0;
        while pairs.len() < count && n >= 6 && attempts < 100 * count {
            attempts += 1;
            let a = rng.gen_range(2..=n / 2);
            let b = rng.gen_range(2..=(n / a).max(2));
            if a * b > n || a.gcd(&b) != 1 {
                continue;
            }
            pairs.push((a, b));
            let ok = match (self.tau(a), self.tau(b), self.tau(a * b)) {
                (Some(x), Some(y), Some(z)) => x.checked_mul(y) == Some(z),
                _ => {
                    let (x, y, z) = (self.lambda(a).unwrap(), self.lambda(b).unwrap(), self.lambda(a * b).unwrap());
                    (x * y - z).norm() <= 1e-8 * (1.0 + z.norm())
                }
            };
            if !ok {
                failures.push((a, b));
            }
        }
        MultiplicativityCheck { pairs, failures, exact: self.exact.is_some() }
    }

    /// Parses `n,lambda_re,lambda_im` CSV with a header line and rows
    /// `n = 1, 2, …` in order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "n,lambda_re,lambda_im" => {}
            _ => return Err(Error::InvalidInput("expected header `n,lambda_re,lambda_im`".into())),
        }
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = || Error::InvalidInput(format!("malformed coefficient row {}: `{line}`", i + 2));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(bad());
            }
            let idx: usize = fields[0].parse().map_err(|_| bad())?;
            if idx != i + 1 {
                return Err(Error::InvalidInput(format!("row {} has n = {idx}, expected {}", i + 2, i + 1)));
            }
            let re: f64 = fields[1].parse().map_err(|_| bad())?;
            let im: f64 = fields[2].parse().map_err(|_| bad())?;
            values.push(Complex64::new(re, im));
        }
        Self::from_values(values)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lambda_re,lambda_im\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, v.re, v.im));
        }
        out
    }
}

/// One instance of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiJob {
    /// Weight `k`; the archimedean component is `D_{k−1}`.
    pub weight: u32,
    pub a: i64,
    pub c: u64,
    pub w: TestFunction,
    /// Number of coefficients the job may use.
    pub truncation: usize,
    /// Absolute tolerance for the dual side.
    pub tol: f64,
}

impl VoronoiJob {
    pub fn new(a: i64, c: u64, w: TestFunction, truncation: usize, tol: f64) -> Result<Self> {
        let job = VoronoiJob { weight: 12, a, c, w, truncation, tol };
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(Error::InvalidInput("denominator c must be at least 1".into()));
        }
        if self.a.unsigned_abs().gcd(&self.c) != 1 {
            return Err(Error::InvalidInput(format!("gcd({}, {}) ≠ 1", self.a, self.c)));
        }
        if self.weight < 2 || self.weight % 2 == 1 {
            return Err(Error::InvalidInput(format!("weight {} must be even and at least 2", self.weight)));
        }
        if self.w.terms.iter().any(|t| t.side == Side::Negative && t.weight != 0.0) {
            return Err(Error::InvalidInput("test function must be supported on (0, ∞)".into()));
        }
        if !(self.tol >= MIN_TOL) {
            return Err(Error::InvalidInput(format!("tolerance {:e} below the floor {MIN_TOL:e}", self.tol)));
        }
        Ok(())
    }

    /// Archimedean parameters `D_{k−1}` with `t = 0`.
    pub fn arch_params(&self) -> RealPlaceParams {
        RealPlaceParams { blocks: vec![RealBlock::Ds2 { l: self.weight - 1, t: Complex64::new(0.0, 0.0) }] }
    }

    fn zeta(&self) -> BigRational {
        BigRational::new(BigInt::from(self.a), BigInt::from(self.c))
    }
}

fn coeff(coeffs: &DirichletCoeffs, n: usize) -> Result<Complex64> {
    coeffs.lambda(n).ok_or(Error::CoeffRangeExceeded { available: coeffs.len(), needed: n })
}

/// `Σ_{n ≤ N} e(−na/c) λ(n) n^{−1/2} w(n)`; exact once `N ≥ sup supp(w)`.
pub fn lhs_theta(job: &VoronoiJob, coeffs: &DirichletCoeffs) -> Result<Complex64> {
    job.validate()?;
    let Some((_, hi)) = job.w.support() else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let needed = hi.ceil() as usize;
    if job.truncation < needed {
        return Err(Error::TruncationTooSmall { n: job.truncation, needed });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 1..=needed {
        let wn = job.w.eval(n as f64);
        if wn != 0.0 {
            let phase = -((n as i128 * job.a as i128).rem_euclid(job.c as i128) as f64) / job.c as f64;
            sum += e(phase) * coeff(coeffs, n)? * (wn / (n as f64).sqrt());
        }
    }
    Ok(sum)
}

/// Diagnostics for one prime dividing `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceDiagnostics {
    pub p: u64,
    /// Smallest `v_p(α)` with a nonzero local factor.
    pub support_floor: i64,
    /// Whether the literal GL(2) Kloosterman reading equals the ramified
    /// transform on every support shell (checked exactly).
    pub literal_kl_matches: bool,
}

/// Dual side with its truncation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsResult {
    pub value: Complex64,
    /// Same sum with the literal GL(2) Kloosterman factors in place of the
    /// ramified transforms.
    pub value_literal_kl: Complex64,
    pub error_estimate: f64,
    /// Lattice spacing: `α = m·spacing`.
    pub spacing: f64,
    /// Largest `m` summed.
    pub terms: usize,
    pub alpha_cutoff: f64,
    pub places: Vec<PlaceDiagnostics>,
}

struct Place {
    p: u64,
    sp: SatakeParams,
    floor: i64,
}

/// Exact-key cache of one local factor family.
type FactorCache = HashMap<(u64, i64, BigRational), (Complex64, Complex64)>;

/// Block of consecutive lattice points summed together.
const BLOCK: usize = 256;

/// Local data at the primes dividing `c` and the exact lattice spacing.
fn lattice(job: &VoronoiJob, coeffs: &DirichletCoeffs) -> Result<(Vec<Place>, Vec<PlaceDiagnostics>, BigRational)> {
    let zeta = job.zeta();
    let mut places = Vec::new();
    let mut diagnostics = Vec::new();
    for p in prime_factors(job.c) {
        let lp = coeff(coeffs, p as usize)?;
        let sp = SatakeParams::from_hecke_gl2(p, lp.re)?;
        let vc = valuation(&rat(job.c as i64, 1), p).unwrap_or(0);
        let floor = ramified_support_floor(p, &zeta, 2 * vc + 4)?;
        let literal_kl_matches = literal_matches(p, &zeta, floor)?;
        diagnostics.push(PlaceDiagnostics { p, support_floor: floor, literal_kl_matches });
        places.push(Place { p, sp, floor });
    }
    let spacing = places.iter().fold(BigRational::one(), |acc, pl| acc * pow_rat(pl.p, pl.floor));
    Ok((places, diagnostics, spacing))
}

/// Per-place support floors; the dual side lives on `α ∈ (∏_p p^{floor_p}) ℤ`.
pub fn place_diagnostics(job: &VoronoiJob, coeffs: &DirichletCoeffs) -> Result<(Vec<PlaceDiagnostics>, BigRational)> {
    job.validate()?;
    let (_, diagnostics, spacing) = lattice(job, coeffs)?;
    Ok((diagnostics, spacing))
}

/// Dual side `Σ_α ∏_{p|c} F_p(α) ∏_{p∤c} 𝕃_p(α) w̃(α)`.
pub fn rhs_theta(job: &VoronoiJob, coeffs: &DirichletCoeffs) -> Result<RhsResult> {
    job.validate()?;
    let zeta = job.zeta();
    let (places, diagnostics, spacing_exact) = lattice(job, coeffs)?;
    let spacing = spacing_exact.to_f64().unwrap_or(f64::NAN);

    let Some(_) = job.w.support() else {
        return Ok(RhsResult {
            value: Complex64::new(0.0, 0.0),
            value_literal_kl: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            spacing,
            terms: 0,
            alpha_cutoff: 0.0,
            places: diagnostics,
        });
    };
    // The kernel of D_{k−1} vanishes on negative arguments and w lives on
    // (0, ∞), so only α > 0 contributes.
    let params = job.arch_params();
    let w_tol = job.tol.max(10.0 * MIN_TOL);
    let mut evaluator = DualEvaluator::new(&params, 2, &job.w, spacing, spacing * BLOCK as f64, w_tol)?;
    let mut cache = FactorCache::new();
    let mut value = Complex64::new(0.0, 0.0);
    let mut literal = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut quiet = 0;
    let mut m0 = 1usize;
    loop {
        let m1 = m0 + BLOCK;
        evaluator.extend(spacing * (m1 - 1) as f64)?;
        // local factors first (sequential, cached), then the dual function in parallel
        let mut factors = Vec::with_capacity(BLOCK);
        for m in m0..m1 {
            factors.push(finite_factor(m, &spacing_exact, &places, &zeta, coeffs, &mut cache)?);
        }
        let duals: Vec<_> = (m0..m1)
            .into_par_iter()
            .zip(factors.par_iter())
            .map(|(m, f)| {
                if f.0 == Complex64::new(0.0, 0.0) && f.1 == Complex64::new(0.0, 0.0) {
                    return Ok(None);
                }
                evaluator.eval(spacing * m as f64).map(Some)
            })
            .collect::<Result<_>>()?;
        let mut block_mass = 0.0;
        for (f, d) in factors.iter().zip(&duals) {
            if let Some(d) = d {
                value += f.0 * d.value;
                literal += f.1 * d.value;
                block_mass += (f.0 * d.value).norm();
                error += f.0.norm() * d.achieved_tol;
            }
        }
        quiet = if block_mass < job.tol / 10.0 { quiet + 1 } else { 0 };
        if quiet >= 2 {
            error += block_mass;
            return Ok(RhsResult {
                value,
                value_literal_kl: literal,
                error_estimate: error,
                spacing,
                terms: m1 - 1,
                alpha_cutoff: spacing * (m1 - 1) as f64,
                places: diagnostics,
            });
        }
        if m1 + BLOCK > job.truncation.min(coeffs.len()) + 1 {
            return Err(Error::TailNotConverged { last: block_mass, cutoff: spacing * (m1 - 1) as f64 });
        }
        m0 = m1;
    }
}

/// `∏_{p|c} F_p(α) · λ(m′) m′^{−1/2}` at `α = m·spacing`, with `m′` the part of
/// `m` prime to `c`; the second entry uses the literal Kloosterman factors.
fn finite_factor(
    m: usize,
    spacing: &BigRational,
    places: &[Place],
    zeta: &BigRational,
    coeffs: &DirichletCoeffs,
    cache: &mut FactorCache,
) -> Result<(Complex64, Complex64)> {
    let alpha = BigRational::from_integer(BigInt::from(m)) * spacing;
    let mut prime_to_c = m;
    let mut f = Complex64::new(1.0, 0.0);
    let mut lit = Complex64::new(1.0, 0.0);
    for pl in places {
        while prime_to_c % pl.p as usize == 0 {
            prime_to_c /= pl.p as usize;
        }
        let v = valuation(&alpha, pl.p).expect("α ≠ 0");
        let key = (pl.p, v, frac_part(&(&alpha / zeta), pl.p));
        let entry = match cache.get(&key) {
            Some(&e) => e,
            None => {
                let t = ramified_transform_gl2_exact(pl.p, zeta, &alpha)?.to_complex(&pl.sp);
                let l = kloosterman_gl2_literal(pl.p, &alpha, zeta)?.to_complex(&pl.sp);
                cache.insert(key, (t, l));
                (t, l)
            }
        };
        f *= entry.0;
        lit *= entry.1;
    }
    let unram = coeff(coeffs, prime_to_c)? / (prime_to_c as f64).sqrt();
    Ok((f * unram, lit * unram))
}

/// Exact comparison of the literal Kloosterman reading with the ramified
/// transform on every class of the shells `floor ≤ v_p(α) ≤ 1`.
fn literal_matches(p: u64, zeta: &BigRational, floor: i64) -> Result<bool> {
    for v in floor..=1 {
        let k = (-v).max(1) as u32;
        let pk = p.pow(k);
        for r in (1..pk).filter(|r| r % p != 0) {
            let alpha = pow_rat(p, v) * rat(r as i64, 1);
            let t = ramified_transform_gl2_exact(p, zeta, &alpha)?;
            let l = kloosterman_gl2_literal(p, &alpha, zeta)?;
            if !t.equals(&l) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Both sides of the identity and their discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiReport {
    pub job: VoronoiJob,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_residual: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|, 10⁻³⁰)`.
    pub rel_residual: f64,
    /// Relative residual when the literal GL(2) Kloosterman factors are used.
    pub rel_residual_literal_kl: f64,
    pub rhs_error_estimate: f64,
    pub lhs_terms: usize,
    pub rhs_terms: usize,
    pub alpha_spacing: f64,
    pub alpha_cutoff: f64,
    pub places: Vec<PlaceDiagnostics>,
}

pub fn voronoi_residual(job: &VoronoiJob, coeffs: &DirichletCoeffs) -> Result<VoronoiReport> {
    let lhs = lhs_theta(job, coeffs)?;
    let rhs = rhs_theta(job, coeffs)?;
    let rel = |x: Complex64| (lhs - x).norm() / lhs.norm().max(x.norm()).max(1e-30);
    Ok(VoronoiReport {
        job: job.clone(),
        lhs,
        rhs: rhs.value,
        abs_residual: (lhs - rhs.value).norm(),
        rel_residual: rel(rhs.value),
        rel_residual_literal_kl: rel(rhs.value_literal_kl),
        rhs_error_estimate: rhs.error_estimate,
        lhs_terms: job.w.support().map_or(0, |(_, hi)| hi.ceil() as usize),
        rhs_terms: rhs.terms,
        alpha_spacing: rhs.spacing,
        alpha_cutoff: rhs.alpha_cutoff,
        places: rhs.places,
    })
}
