//! Non-archimedean local data for unramified representations.
//!
//! Whittaker values are computed exactly: every value of the normalized
//! unramified Whittaker function is a root of unity `e(θ)` times a symbol
//! `W_λ = δ_B^{1/2}(ϖ^λ)·s_λ(α)` indexed by a dominant weight `λ`. Sums of
//! such values live in [`WhittakerValue`], whose coefficients are exact
//! elements of a `p`-power cyclotomic field. Floating point appears only in
//! [`WhittakerValue::to_complex`].

use crate::error::{Error, Result};
use crate::exact::{
    is_p_integral, psi_p_phase, rat, valuation, CycloSum, Scalar,
};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Satake parameters `α_1, …, α_n` of an unramified principal series over a
/// field with residue cardinality `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SatakeParams {
    pub q: u64,
    pub alpha: Vec<Complex64>,
}

impl SatakeParams {
    pub fn new(q: u64, alpha: Vec<Complex64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidInput(format!("residue cardinality {q} < 2")));
        }
        if alpha.is_empty() || alpha.iter().any(|a| *a == Complex64::new(0.0, 0.0)) {
            return Err(Error::InvalidInput("Satake parameters must be nonempty and nonzero".into()));
        }
        Ok(SatakeParams { q, alpha })
    }

    /// GL(2) parameters with trivial central character from the Hecke
    /// eigenvalue `λ(p) = α + α⁻¹`.
    pub fn from_hecke_gl2(p: u64, lambda_p: f64) -> Result<Self> {
        let disc = Complex64::new(lambda_p * lambda_p - 4.0, 0.0).sqrt();
        let a = (Complex64::new(lambda_p, 0.0) + disc) * 0.5;
        Self::new(p, vec![a, a.inv()])
    }

    pub fn rank(&self) -> usize {
        self.alpha.len()
    }
}

/// Complete homogeneous symmetric polynomial `h_m(α)`, computed from its
/// definition as the sum of all degree-`m` monomials.
pub fn complete_homogeneous<T: Scalar>(m: usize, alpha: &[T]) -> T {
    complete_homogeneous_all(m, alpha).pop().expect("nonempty")
}

/// `[h_0(α), …, h_m(α)]`.
pub fn complete_homogeneous_all<T: Scalar>(m: usize, alpha: &[T]) -> Vec<T> {
    assert!(!alpha.is_empty(), "empty Satake tuple");
    // H_k[j] = h_j(α_1..α_k) = H_{k−1}[j] + α_k H_k[j−1]
    let one = alpha[0].one_like();
    let mut h: Vec<T> = std::iter::once(one.clone()).chain((1..=m).map(|_| one.zero_like())).collect();
    for a in alpha {
        for j in 1..=m {
            let add = a.mul(&h[j - 1]);
            h[j] = h[j].add(&add);
        }
    }
    h
}

/// `°W(diag(ϖ^m, 1, …, 1)) = q^{−m(n−1)/2} h_m(α)` for `m ≥ 0`, else 0.
pub fn whittaker_diag(sp: &SatakeParams, m: i64) -> Complex64 {
    if m < 0 {
        return Complex64::new(0.0, 0.0);
    }
    let n = sp.rank() as f64;
    complete_homogeneous(m as usize, &sp.alpha) * (sp.q as f64).powf(-(m as f64) * (n - 1.0) / 2.0)
}

/// Basic function `𝕃(ϖ^m) = °W(diag(ϖ^m,1,…))·q^{m(n/2−1)} = h_m(α) q^{−m/2}`.
pub fn basic_function_value(sp: &SatakeParams, m: i64) -> Complex64 {
    if m < 0 {
        return Complex64::new(0.0, 0.0);
    }
    let n = sp.rank() as f64;
    whittaker_diag(sp, m) * (sp.q as f64).powf(m as f64 * (n / 2.0 - 1.0))
}

/// Truncated formal series `Σ_{m≤M} h_m(α) X^m` and whether it inverts
/// `Π_i (1 − α_i X)` modulo `X^{M+1}` exactly.
pub fn local_l_series_check<T: Scalar>(alpha: &[T], order: usize) -> (Vec<T>, bool) {
    let series = complete_homogeneous_all(order, alpha);
    let ok = series_inverts_euler_factor(alpha, &series);
    (series, ok)
}

/// Exact test `series · Π_i (1 − α_i X) ≡ 1 mod X^{len}`.
pub fn series_inverts_euler_factor<T: Scalar>(alpha: &[T], series: &[T]) -> bool {
    let one = alpha[0].one_like();
    let zero = one.zero_like();
    let mut poly = vec![one.clone()];
    for a in alpha {
        let mut next = vec![zero.clone(); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] = next[i].add(c);
            next[i + 1] = next[i + 1].add(&c.mul(a).neg());
        }
        poly = next;
    }
    (0..series.len()).all(|k| {
        let mut s = zero.clone();
        for (i, c) in poly.iter().enumerate().take(k + 1) {
            s = s.add(&c.mul(&series[k - i]));
        }
        s == if k == 0 { one.clone() } else { zero.clone() }
    })
}

/// Square matrix over `ℚ` viewed inside `GL_n(ℚ_p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PAdicMat {
    pub p: u64,
    pub n: usize,
    /// Row-major entries.
    pub entries: Vec<BigRational>,
}

impl PAdicMat {
    pub fn new(p: u64, n: usize, entries: Vec<BigRational>) -> Result<Self> {
        if !(2..=3).contains(&n) || entries.len() != n * n {
            return Err(Error::InvalidInput(format!("need a 2×2 or 3×3 matrix, got size {n}")));
        }
        Ok(PAdicMat { p, n, entries })
    }

    pub fn from_i64(p: u64, n: usize, e: &[(i64, i64)]) -> Result<Self> {
        Self::new(p, n, e.iter().map(|&(a, b)| rat(a, b)).collect())
    }

    pub fn identity(p: u64, n: usize) -> Self {
        let mut m = PAdicMat { p, n, entries: vec![BigRational::zero(); n * n] };
        for i in 0..n {
            m.entries[i * n + i] = BigRational::one();
        }
        m
    }

    pub fn diag(p: u64, d: &[BigRational]) -> Self {
        let mut m = Self::identity(p, d.len());
        for (i, x) in d.iter().enumerate() {
            m.entries[i * d.len() + i] = x.clone();
        }
        m
    }

    /// Upper unipotent `n(y)` in GL(2).
    pub fn n2(p: u64, y: BigRational) -> Self {
        let mut m = Self::identity(p, 2);
        m.entries[1] = y;
        m
    }

    /// Weyl element `[[0, 1], [−1, 0]]`.
    pub fn w2(p: u64) -> Self {
        PAdicMat::from_i64(p, 2, &[(0, 1), (1, 1), (-1, 1), (0, 1)]).unwrap()
    }

    /// Longest Weyl element (antidiagonal ones).
    pub fn w_long(p: u64, n: usize) -> Self {
        let mut m = PAdicMat { p, n, entries: vec![BigRational::zero(); n * n] };
        for i in 0..n {
            m.entries[i * n + (n - 1 - i)] = BigRational::one();
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: BigRational) {
        self.entries[i * self.n + j] = v;
    }

    pub fn mul(&self, o: &PAdicMat) -> PAdicMat {
        let n = self.n;
        let mut out = vec![BigRational::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = BigRational::zero();
                for k in 0..n {
                    s += self.get(i, k) * o.get(k, j);
                }
                out[i * n + j] = s;
            }
        }
        PAdicMat { p: self.p, n, entries: out }
    }

    pub fn transpose(&self) -> PAdicMat {
        let mut m = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                m.set(i, j, self.get(j, i).clone());
            }
        }
        m
    }

    pub fn det(&self) -> BigRational {
        let e = |i, j| self.get(i, j).clone();
        match self.n {
            2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
            _ => {
                e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                    + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
            }
        }
    }

    /// Exact inverse by Gauss–Jordan elimination.
    pub fn inverse(&self) -> Result<PAdicMat> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(self.p, n);
        for c in 0..n {
            let piv = (c..n).find(|&r| !a.get(r, c).is_zero()).ok_or(Error::Singular)?;
            if piv != c {
                for j in 0..n {
                    a.entries.swap(piv * n + j, c * n + j);
                    inv.entries.swap(piv * n + j, c * n + j);
                }
            }
            let d = a.get(c, c).clone();
            for j in 0..n {
                let v = a.get(c, j) / &d;
                a.set(c, j, v);
                let v = inv.get(c, j) / &d;
                inv.set(c, j, v);
            }
            for r in 0..n {
                if r != c && !a.get(r, c).is_zero() {
                    let f = a.get(r, c).clone();
                    for j in 0..n {
                        let v = a.get(r, j) - &f * a.get(c, j);
                        a.set(r, j, v);
                        let v = inv.get(r, j) - &f * inv.get(c, j);
                        inv.set(r, j, v);
                    }
                }
            }
        }
        Ok(inv)
    }

    /// `ᵗg⁻¹`.
    pub fn inverse_transpose(&self) -> Result<PAdicMat> {
        Ok(self.inverse()?.transpose())
    }

    /// Membership in `GL_n(ℤ_p)`.
    pub fn is_integral_unit(&self) -> bool {
        self.entries.iter().all(|x| is_p_integral(x, self.p)) && valuation(&self.det(), self.p) == Some(0)
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        for i in 0..self.n {
            self.entries.swap(i * self.n + a, i * self.n + b);
        }
    }

    /// `col_dst −= f · col_src`.
    fn col_axpy(&mut self, dst: usize, src: usize, f: &BigRational) {
        for i in 0..self.n {
            let v = self.get(i, dst) - f * self.get(i, src);
            self.set(i, dst, v);
        }
    }
}

/// Iwasawa decomposition `g = u·t·k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Iwasawa {
    /// Upper unipotent.
    pub u: PAdicMat,
    /// Diagonal.
    pub t: PAdicMat,
    /// Element of `GL_n(ℤ_p)`.
    pub k: PAdicMat,
}

/// Exact Iwasawa decomposition over `ℚ_p`.
///
/// Elements of `GL_n(ℤ_p)` decompose as `(I, I, g)`. Otherwise rows are
/// cleared bottom-up by integral column operations; the pivot in each row is
/// the entry of least valuation, ties going to the leftmost column.
pub fn iwasawa(g: &PAdicMat) -> Result<Iwasawa> {
    let (p, n) = (g.p, g.n);
    if g.det().is_zero() {
        return Err(Error::Singular);
    }
    if g.is_integral_unit() {
        return Ok(Iwasawa { u: PAdicMat::identity(p, n), t: PAdicMat::identity(p, n), k: g.clone() });
    }
    let mut b = g.clone();
    let mut kinv = PAdicMat::identity(p, n);
    for r in (1..n).rev() {
        let mut best: Option<(usize, i64)> = None;
        for c in 0..=r {
            if let Some(v) = valuation(b.get(r, c), p) {
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((c, v));
                }
            }
        }
        let (c_star, _) = best.ok_or(Error::Singular)?;
        if c_star != r {
            b.swap_cols(c_star, r);
            kinv.swap_cols(c_star, r);
        }
        let piv = b.get(r, r).clone();
        for c in 0..r {
            if !b.get(r, c).is_zero() {
                let f = b.get(r, c) / &piv;
                b.col_axpy(c, r, &f);
                kinv.col_axpy(c, r, &f);
            }
        }
    }
    let diag: Vec<BigRational> = (0..n).map(|i| b.get(i, i).clone()).collect();
    let t = PAdicMat::diag(p, &diag);
    let u = b.mul(&t.inverse()?);
    let k = kinv.inverse()?;
    Ok(Iwasawa { u, t, k })
}

/// GL(2) case of [`iwasawa`].
pub fn iwasawa_gl2(g: &PAdicMat) -> Result<Iwasawa> {
    if g.n != 2 {
        return Err(Error::InvalidInput("expected a 2×2 matrix".into()));
    }
    iwasawa(g)
}

/// Exact linear combination `Σ_λ c_λ · W_λ` with cyclotomic coefficients,
/// `W_λ = δ_B^{1/2}(ϖ^λ) s_λ(α)` for dominant `λ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhittakerValue {
    pub p: u64,
    pub terms: BTreeMap<Vec<i64>, CycloSum>,
}

impl WhittakerValue {
    pub fn zero(p: u64) -> Self {
        WhittakerValue { p, terms: BTreeMap::new() }
    }

    /// `c·e(θ)·W_λ`.
    pub fn term(p: u64, lambda: Vec<i64>, theta: &BigRational, c: i128) -> Self {
        let mut v = Self::zero(p);
        v.terms.insert(lambda, CycloSum::monomial(p, theta, c));
        v
    }

    pub fn add_assign(&mut self, o: &WhittakerValue) {
        for (l, c) in &o.terms {
            self.terms.entry(l.clone()).or_insert_with(|| CycloSum::zero(self.p)).add_assign(c);
        }
        self.terms.retain(|_, c| !c.terms.is_empty());
    }

    /// Multiplies by `c·e(θ)`.
    pub fn scaled(&self, theta: &BigRational, c: i128) -> Self {
        WhittakerValue { p: self.p, terms: self.terms.iter().map(|(l, s)| (l.clone(), s.scaled(theta, c))).collect() }
    }

    /// Shifts every weight so its last entry is 0, merging terms that agree
    /// under a trivial central character.
    pub fn with_trivial_central(&self) -> Self {
        let mut out = Self::zero(self.p);
        for (l, c) in &self.terms {
            let last = *l.last().expect("nonempty weight");
            let key: Vec<i64> = l.iter().map(|x| x - last).collect();
            let mut single = Self::zero(self.p);
            single.terms.insert(key, c.clone());
            out.add_assign(&single);
        }
        out
    }

    /// Exact zero test (as a function of the Satake parameters).
    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero())
    }

    /// Exact equality.
    pub fn equals(&self, o: &WhittakerValue) -> bool {
        let mut d = self.clone();
        d.add_assign(&o.scaled(&BigRational::zero(), -1));
        d.is_zero()
    }

    /// Numerical value for given Satake parameters.
    pub fn to_complex(&self, sp: &SatakeParams) -> Complex64 {
        self.terms.iter().map(|(l, c)| c.to_complex() * weight_value(sp, l)).sum()
    }
}

/// `δ_B^{1/2}(ϖ^λ) s_λ(α)` for dominant `λ` (negative parts via the central character).
pub fn weight_value(sp: &SatakeParams, lambda: &[i64]) -> Complex64 {
    let n = lambda.len();
    assert_eq!(n, sp.rank(), "weight length must match the rank");
    let last = lambda[n - 1];
    let shifted: Vec<usize> = lambda.iter().map(|&l| (l - last) as usize).collect();
    let h = complete_homogeneous_all(shifted[0] + n, &sp.alpha);
    let hk = |k: i64| if k < 0 { Complex64::new(0.0, 0.0) } else { h[k as usize] };
    // Jacobi–Trudi: s_λ = det(h_{λ_i − i + j})
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| hk(shifted[i] as i64 - i as i64 + j as i64)).collect())
        .collect();
    let schur = complex_det(&mut m);
    let det_alpha: Complex64 = sp.alpha.iter().product();
    let mut exponent = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            exponent += (lambda[i] - lambda[j]) as f64;
        }
    }
    schur * det_alpha.powi(last as i32) * (sp.q as f64).powf(-exponent / 2.0)
}

fn complex_det(m: &mut [Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let piv = (c..n).max_by(|&a, &b| m[a][c].norm().total_cmp(&m[b][c].norm())).unwrap();
        if m[piv][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != c {
            m.swap(piv, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for j in c..n {
                let v = m[c][j];
                m[r][j] -= f * v;
            }
        }
    }
    det
}

/// Exact `°W(g)` with respect to `ψ_p`: `ψ_p(Σ u_{i,i+1})·W_λ` where `t = ϖ^λ·unit`,
/// zero when `λ` is not dominant.
pub fn whittaker_exact(g: &PAdicMat) -> Result<WhittakerValue> {
    let iw = iwasawa(g)?;
    let p = g.p;
    let lambda: Vec<i64> = (0..g.n).map(|i| valuation(iw.t.get(i, i), p).expect("invertible")).collect();
    if lambda.windows(2).any(|w| w[0] < w[1]) {
        return Ok(WhittakerValue::zero(p));
    }
    let mut arg = BigRational::zero();
    for i in 0..g.n - 1 {
        arg += iw.u.get(i, i + 1);
    }
    Ok(WhittakerValue::term(p, lambda, &psi_p_phase(&arg, p), 1))
}

/// Exact `°W̃(g) = °W(w_n ᵗg⁻¹)`, the normalized Whittaker function of the
/// contragredient with respect to `ψ_p⁻¹`.
pub fn whittaker_dual_exact(g: &PAdicMat) -> Result<WhittakerValue> {
    whittaker_exact(&PAdicMat::w_long(g.p, g.n).mul(&g.inverse_transpose()?))
}

/// Numerical `°W(g)` on GL(2).
pub fn whittaker_gl2_general(sp: &SatakeParams, g: &PAdicMat) -> Result<Complex64> {
    if g.n != 2 || sp.rank() != 2 {
        return Err(Error::InvalidInput("GL(2) data expected".into()));
    }
    Ok(whittaker_exact(g)?.to_complex(sp))
}

/// Exact local transform of `φ_p(x) = ψ_p(xζ)°W(diag(x,1))` at `x`, namely
/// `°W(diag(x,1)·w₂·n(ζ))`. For `|ζ|_p > 1` this is `ψ_p(−x/ζ)·𝕃(x/ζ²)`
/// (trivial central character).
pub fn ramified_transform_gl2_exact(p: u64, zeta: &BigRational, x: &BigRational) -> Result<WhittakerValue> {
    if x.is_zero() {
        return Err(Error::InvalidInput("x must be nonzero".into()));
    }
    let g = PAdicMat::diag(p, &[x.clone(), BigRational::one()])
        .mul(&PAdicMat::w2(p))
        .mul(&PAdicMat::n2(p, zeta.clone()));
    Ok(whittaker_exact(&g)?.with_trivial_central())
}

/// Numerical [`ramified_transform_gl2_exact`]; requires trivial central character.
pub fn ramified_transform_gl2(sp: &SatakeParams, zeta: &BigRational, x: &BigRational) -> Result<Complex64> {
    check_trivial_central(sp)?;
    Ok(ramified_transform_gl2_exact(sp.q, zeta, x)?.to_complex(sp))
}

fn check_trivial_central(sp: &SatakeParams) -> Result<()> {
    let prod: Complex64 = sp.alpha.iter().product();
    if sp.rank() != 2 || (prod - 1.0).norm() > 1e-12 {
        return Err(Error::InvalidInput("GL(2) parameters with trivial central character expected".into()));
    }
    Ok(())
}

/// Values of the ramified transform on the shell `x = p^m u`, one per class of
/// `u ∈ ℤ_p^×` modulo `p^k`, with `k` large enough that the value is constant on classes.
pub fn ramified_shell(p: u64, zeta: &BigRational, m: i64) -> Result<Vec<(BigRational, WhittakerValue)>> {
    if zeta.is_zero() {
        return Err(Error::InvalidInput("ζ must be nonzero".into()));
    }
    // the matrix entries are x and ζ, and the phase ψ_p(−x/ζ) only sees x mod p^{max(0,−m)}
    let k = (-m).max(1) as u32;
    let pk = p.pow(k);
    let pm = pow_rat(p, m);
    let mut out = Vec::new();
    for r in 1..pk {
        if r % p != 0 {
            let u = rat(r as i64, 1);
            out.push((u.clone(), ramified_transform_gl2_exact(p, zeta, &(&pm * u))?));
        }
    }
    Ok(out)
}

/// Smallest valuation `m` at which the ramified transform is nonzero, found by
/// descending from `m = 0` until two consecutive shells vanish identically.
pub fn ramified_support_floor(p: u64, zeta: &BigRational, max_depth: i64) -> Result<i64> {
    let mut lowest = None;
    let mut empty_run = 0;
    let mut m = 0;
    loop {
        let nonzero = ramified_shell(p, zeta, m)?.iter().any(|(_, v)| !v.is_zero());
        if nonzero {
            lowest = Some(m);
            empty_run = 0;
        } else {
            empty_run += 1;
            if empty_run == 2 {
                return lowest.ok_or(Error::DepthExceeded { depth: -m });
            }
        }
        m -= 1;
        if -m > max_depth {
            return Err(Error::DepthExceeded { depth: max_depth });
        }
    }
}

/// `p^m` as an exact rational.
pub fn pow_rat(p: u64, m: i64) -> BigRational {
    let pm = BigRational::from_integer(BigInt::from(p).pow(m.unsigned_abs() as u32));
    if m >= 0 {
        pm
    } else {
        pm.recip()
    }
}

/// Literal GL(2) reading of the local Kloosterman integral: with `n = 2` the
/// unipotent group is trivial and the permutation is the identity, leaving
/// `°W̃(diag(−α/ζ, −ζ))`.
pub fn kloosterman_gl2_literal(p: u64, alpha: &BigRational, zeta: &BigRational) -> Result<WhittakerValue> {
    let t = PAdicMat::diag(p, &[-(alpha / zeta), -zeta.clone()]);
    Ok(whittaker_dual_exact(&t)?.with_trivial_central())
}

/// Result of the GL(3) Kloosterman shell enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kloosterman3 {
    /// Exact value including the factor `|ζ|_p`.
    pub value: WhittakerValue,
    /// Contribution of `u ∈ ℤ_p` followed by the shells `v_p(u) = −1, −2, …`.
    pub shells: Vec<(i64, WhittakerValue)>,
    /// First valuation of the two consecutive identically vanishing shells.
    pub vanishing_shell: i64,
}

/// `τ` for `n = 3`: `[[0,1,0],[1,0,0],[0,0,1]]·diag(1, −α/ζ, −ζ)`.
fn tau3(p: u64, alpha: &BigRational, zeta: &BigRational) -> PAdicMat {
    let perm = PAdicMat::from_i64(p, 3, &[(0, 1), (1, 1), (0, 1), (1, 1), (0, 1), (0, 1), (0, 1), (0, 1), (1, 1)]).unwrap();
    perm.mul(&PAdicMat::diag(p, &[BigRational::one(), -(alpha / zeta), -zeta.clone()]))
}

/// Default enumeration depth `2|v_p(ζ)| + 3`.
pub fn default_shell_depth(p: u64, zeta: &BigRational) -> i64 {
    2 * valuation(zeta, p).unwrap_or(0).abs() + 3
}

/// `Kl_p(α, ζ, °W̃) = |ζ|_p ∫_{ℚ_p} ψ̄_p(u) °W̃(τ·u_{12}(u)) du` for GL(3), by
/// valuation shells: the integrand is constant on `ℤ_p` and on cosets
/// `u + ℤ_p`, so shell `j < 0` contributes `Σ_{r mod p^{−j}, p∤r}` at `u = r p^j`.
pub fn kloosterman_gl3(p: u64, alpha: &BigRational, zeta: &BigRational, shell_depth: i64) -> Result<Kloosterman3> {
    let vz = valuation(zeta, p).ok_or_else(|| Error::InvalidInput("ζ must be nonzero".into()))?;
    if vz >= 0 {
        return Err(Error::InvalidInput("need |ζ|_p > 1".into()));
    }
    if alpha.is_zero() {
        return Err(Error::InvalidInput("α must be nonzero".into()));
    }
    let tau = tau3(p, alpha, zeta);
    let integrand = |u: &BigRational| -> Result<WhittakerValue> {
        let mut n = PAdicMat::identity(p, 3);
        n.set(0, 1, u.clone());
        let w = whittaker_dual_exact(&tau.mul(&n))?;
        // ψ̄_p(u) = e({u}_p)
        Ok(w.scaled(&-psi_p_phase(u, p), 1))
    };
    let mut shells = vec![(0, integrand(&BigRational::zero())?)];
    let mut empty_run = 0;
    let mut vanishing = None;
    for j in 1..=shell_depth {
        let pj = p.pow(j as u32);
        let mut sum = WhittakerValue::zero(p);
        let mut all_zero = true;
        for r in 1..pj {
            if r % p != 0 {
                let v = integrand(&rat(r as i64, pj as i64))?;
                if !v.is_zero() {
                    all_zero = false;
                    sum.add_assign(&v);
                }
            }
        }
        shells.push((-j, sum));
        if all_zero {
            empty_run += 1;
            if empty_run == 2 {
                vanishing = Some(-(j - 1));
                break;
            }
        } else {
            empty_run = 0;
        }
    }
    let vanishing_shell = vanishing.ok_or(Error::DepthExceeded { depth: shell_depth })?;
    let scale = BigInt::from(p).pow(vz.unsigned_abs() as u32).to_i128().ok_or_else(|| Error::Overflow("|ζ|_p".into()))?;
    let mut value = WhittakerValue::zero(p);
    for (_, s) in &shells {
        value.add_assign(s);
    }
    Ok(Kloosterman3 { value: value.scaled(&BigRational::zero(), scale), shells, vanishing_shell })
}

/// Parses `a/c` or an integer into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidInput(format!("bad rational `{s}`"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

/// Absolute value of a rational as `f64` (for reports).
pub fn rat_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Sign helper used by shell enumerations on negative arguments.
pub fn rat_is_negative(x: &BigRational) -> bool {
    x.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::QuadElem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn complete_homogeneous_examples() {
        let r = |n| rat(n, 1);
        assert_eq!(complete_homogeneous(0, &[r(2), r(5)]), r(1));
        assert_eq!(complete_homogeneous(1, &[r(2), r(5), r(7)]), r(14));
        assert_eq!(complete_homogeneous(2, &[r(1), r(1)]), r(3));
        // brute force: h_3(1,2,3) = Σ_{i≤j≤k} a_i a_j a_k
        let a = [1i64, 2, 3];
        let mut brute = 0;
        for i in 0..3 {
            for j in i..3 {
                for k in j..3 {
                    brute += a[i] * a[j] * a[k];
                }
            }
        }
        assert_eq!(complete_homogeneous(3, &[r(1), r(2), r(3)]), r(brute));
    }

    #[test]
    fn whittaker_diag_examples() {
        let a = Complex64::new(0.3, 0.8);
        let sp = SatakeParams::new(7, vec![a, a.inv()]).unwrap();
        assert_eq!(whittaker_diag(&sp, 0), c(1.0));
        assert_eq!(whittaker_diag(&sp, -1), c(0.0));
        let want = (a + a.inv()) / 7f64.sqrt();
        assert!((whittaker_diag(&sp, 1) - want).norm() < 1e-15);
        assert_eq!(basic_function_value(&sp, 0), c(1.0));
        assert_eq!(basic_function_value(&sp, -1), c(0.0));
    }

    #[test]
    fn local_series_examples() {
        let (s, ok) = local_l_series_check(&[rat(1, 1)], 10);
        assert!(ok && s.iter().all(|x| *x == rat(1, 1)));
        let a = QuadElem::new(rat(3, 7), rat(2, 7), -5);
        let inv = {
            let n = a.mul(&a.conj()).a;
            let ac = a.conj();
            QuadElem::new(ac.a / &n, ac.b / &n, -5)
        };
        let (mut s, ok) = local_l_series_check(&[a.clone(), inv.clone()], 30);
        assert!(ok);
        s[17] = s[17].add(&a.one_like());
        assert!(!series_inverts_euler_factor(&[a, inv], &s));
    }

    fn random_rational(rng: &mut ChaCha8Rng, p: u64) -> BigRational {
        let num = rng.gen_range(-60i64..=60);
        let den = (p as i64).pow(rng.gen_range(0..3)) * [1, 2, 3, 7][rng.gen_range(0..4)];
        rat(num, den)
    }

    fn random_k(rng: &mut ChaCha8Rng, p: u64, n: usize) -> PAdicMat {
        loop {
            let e: Vec<BigRational> = (0..n * n).map(|_| rat(rng.gen_range(-9i64..=9), 1)).collect();
            let m = PAdicMat::new(p, n, e).unwrap();
            if m.is_integral_unit() {
                return m;
            }
        }
    }

    fn random_g(rng: &mut ChaCha8Rng, p: u64, n: usize) -> PAdicMat {
        loop {
            let e: Vec<BigRational> = (0..n * n).map(|_| random_rational(rng, p)).collect();
            let m = PAdicMat::new(p, n, e).unwrap();
            if !m.det().is_zero() {
                return m;
            }
        }
    }

    #[test]
    fn iwasawa_examples_and_reconstruction() {
        let p = 5;
        let k = PAdicMat::from_i64(p, 2, &[(2, 1), (1, 1), (1, 1), (1, 1)]).unwrap();
        let iw = iwasawa_gl2(&k).unwrap();
        assert_eq!((iw.u, iw.t, iw.k), (PAdicMat::identity(p, 2), PAdicMat::identity(p, 2), k));
        let d = PAdicMat::diag(p, &[rat(25, 3), rat(1, 5)]);
        let iw = iwasawa_gl2(&d).unwrap();
        assert_eq!((iw.u, iw.t.clone(), iw.k), (PAdicMat::identity(p, 2), d, PAdicMat::identity(p, 2)));
        let (x, zeta) = (rat(3, 2), rat(2, 5));
        let g = PAdicMat::new(p, 2, vec![&x * &zeta, x.clone(), rat(1, 1), rat(0, 1)]).unwrap();
        let iw = iwasawa_gl2(&g).unwrap();
        assert!(iw.k.is_integral_unit());
        assert_eq!(iw.u.mul(&iw.t).mul(&iw.k), g);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            for _ in 0..20 {
                let g = random_g(&mut rng, p, n);
                let iw = iwasawa(&g).unwrap();
                assert!(iw.k.is_integral_unit());
                assert_eq!(iw.u.mul(&iw.t).mul(&iw.k), g);
            }
        }
        assert_eq!(iwasawa(&PAdicMat::from_i64(p, 2, &[(1, 1), (2, 1), (2, 1), (4, 1)]).unwrap()), Err(Error::Singular));
    }

    #[test]
    fn whittaker_general_examples() {
        let p = 5;
        let a = Complex64::new(0.6, 0.8);
        let sp = SatakeParams::new(p, vec![a, a.conj()]).unwrap();
        assert!((whittaker_gl2_general(&sp, &PAdicMat::identity(p, 2)).unwrap() - 1.0).norm() < 1e-15);
        let dp = PAdicMat::diag(p, &[rat(5, 1), rat(1, 1)]);
        let g = PAdicMat::n2(p, rat(7, 3)).mul(&dp);
        assert!((whittaker_gl2_general(&sp, &g).unwrap() - whittaker_diag(&sp, 1)).norm() < 1e-15);
        let g = PAdicMat::n2(p, rat(1, 5)).mul(&dp);
        let want = crate::exact::e(-0.2) * whittaker_diag(&sp, 1);
        assert!((whittaker_gl2_general(&sp, &g).unwrap() - want).norm() < 1e-15);
    }

    #[test]
    fn whittaker_invariance_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2, 5] {
            for n in [2, 3] {
                for _ in 0..20 {
                    let g = random_g(&mut rng, p, n);
                    let k = random_k(&mut rng, p, n);
                    assert!(whittaker_exact(&g.mul(&k)).unwrap().equals(&whittaker_exact(&g).unwrap()));
                    let y = random_rational(&mut rng, p);
                    let mut ny = PAdicMat::identity(p, n);
                    ny.set(n - 2, n - 1, y.clone());
                    let lhs = whittaker_exact(&ny.mul(&g)).unwrap();
                    let rhs = whittaker_exact(&g).unwrap().scaled(&psi_p_phase(&y, p), 1);
                    assert!(lhs.equals(&rhs));
                }
            }
        }
    }

    #[test]
    fn ramified_transform_examples() {
        let p = 5;
        let zeta = rat(1, 5);
        // integral ζ: untwisted basic function
        for m in 0..4 {
            let x = rat(5i64.pow(m) * 3, 7);
            let v = ramified_transform_gl2_exact(p, &rat(3, 1), &x).unwrap();
            assert!(v.equals(&WhittakerValue::term(p, vec![m as i64, 0], &rat(0, 1), 1)));
            let dual = whittaker_dual_exact(&PAdicMat::diag(p, &[x.clone(), rat(1, 1)])).unwrap();
            assert!(v.equals(&dual.with_trivial_central()));
        }
        assert!(ramified_shell(p, &zeta, -3).unwrap().iter().all(|(_, v)| v.is_zero()));
        let shell = ramified_shell(p, &zeta, -2).unwrap();
        for (u, v) in &shell {
            // ψ_5(−x/ζ) at x = u/25, ζ = 1/5: e({−u/5}_5)⁻¹ = e(u/5)
            let want = WhittakerValue::term(p, vec![0, 0], &(u / rat(5, 1)), 1);
            assert!(v.equals(&want), "u = {u}");
        }
        assert_eq!(ramified_support_floor(p, &rat(2, 5), 10).unwrap(), -2);
        assert_eq!(ramified_support_floor(p, &rat(1, 25), 10).unwrap(), -4);
    }

    #[test]
    fn literal_gl2_reading_drops_the_twist() {
        let p = 5;
        let x = rat(3, 25);
        let a = kloosterman_gl2_literal(p, &x, &rat(1, 5)).unwrap();
        let b = kloosterman_gl2_literal(p, &x, &rat(2, 5)).unwrap();
        assert!(a.equals(&b));
        let ta = ramified_transform_gl2_exact(p, &rat(1, 5), &x).unwrap();
        let tb = ramified_transform_gl2_exact(p, &rat(2, 5), &x).unwrap();
        assert!(!ta.equals(&tb));
    }

    #[test]
    fn delta_basic_value_at_two() {
        let sp = SatakeParams::from_hecke_gl2(2, -24.0 / 2f64.powf(5.5)).unwrap();
        assert!((basic_function_value(&sp, 1) - c(-0.375)).norm() < 1e-15);
    }

    #[test]
    fn kloosterman_gl3_shells() {
        let p = 5;
        let zeta = rat(1, 5);
        let depth = default_shell_depth(p, &zeta);
        let kl = kloosterman_gl3(p, &rat(1, 1), &zeta, depth).unwrap();
        let tau = tau3(p, &rat(1, 1), &zeta);
        assert!(kl.shells[0].1.equals(&whittaker_dual_exact(&tau).unwrap()));
        let deeper = kloosterman_gl3(p, &rat(1, 1), &zeta, 2 * depth).unwrap();
        assert!(deeper.value.equals(&kl.value));
        assert_eq!(deeper.vanishing_shell, kl.vanishing_shell);
        let far = kloosterman_gl3(p, &rat(1, 5i64.pow(6)), &zeta, depth).unwrap();
        assert!(far.value.is_zero());
    }
}
