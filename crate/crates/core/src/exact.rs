//! Exact arithmetic: p-adic valuations and fractional parts, quadratic number
//! fields, and integer combinations of p-power roots of unity.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Shorthand for an exact rational.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `v_p(n)`; `None` for `n = 0`.
pub fn valuation_int(n: &BigInt, p: u64) -> Option<i64> {
    if n.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return Some(v);
        }
        n = q;
        v += 1;
    }
}

/// `v_p(x)`; `None` for `x = 0`.
pub fn valuation(x: &BigRational, p: u64) -> Option<i64> {
    Some(valuation_int(x.numer(), p)? - valuation_int(x.denom(), p)?)
}

/// True when `x ∈ ℤ_p`.
pub fn is_p_integral(x: &BigRational, p: u64) -> bool {
    valuation(x, p).map_or(true, |v| v >= 0)
}

/// `{x}_p ∈ ℤ[1/p] ∩ [0, 1)` with `x − {x}_p ∈ ℤ_p`.
pub fn frac_part(x: &BigRational, p: u64) -> BigRational {
    let den = x.denom();
    let k = valuation_int(den, p).unwrap_or(0);
    if k == 0 {
        return BigRational::zero();
    }
    let pk = BigInt::from(p).pow(k as u32);
    let rest = den / &pk;
    // x = a / (p^k · rest); {x}_p = (a · rest^{-1} mod p^k) / p^k
    let inv = mod_inverse(&rest, &pk);
    let num = (x.numer() * inv).mod_floor(&pk);
    BigRational::new(num, pk)
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let e = a.extended_gcd(m);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(m)
}

/// Representative of `x` modulo 1 in `[0, 1)`.
pub fn mod_one(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// Phase `θ ∈ [0,1)` with `ψ_p(x) = e(θ)`, where `ψ_p(x) = exp(−2πi{x}_p)`.
pub fn psi_p_phase(x: &BigRational, p: u64) -> BigRational {
    mod_one(&-frac_part(x, p))
}

/// `e(θ) = exp(2πiθ)`.
pub fn e(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * theta)
}

/// Prime factors of `n` in increasing order.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// True for primes.
pub fn is_prime(n: u64) -> bool {
    n >= 2 && prime_factors(n) == vec![n]
}

/// Minimal ring interface for exact and floating scalars.
pub trait Scalar: Clone + PartialEq + std::fmt::Debug {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
}

impl Scalar for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one_like(&self) -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
}

impl Scalar for BigRational {
    fn zero_like(&self) -> Self {
        BigRational::zero()
    }
    fn one_like(&self) -> Self {
        BigRational::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// Element `a + b√d` of `ℚ(√d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadElem {
    pub a: BigRational,
    pub b: BigRational,
    pub d: i64,
}

impl QuadElem {
    pub fn new(a: BigRational, b: BigRational, d: i64) -> Self {
        QuadElem { a, b, d }
    }

    /// Rational element of `ℚ(√d)`.
    pub fn rational(a: BigRational, d: i64) -> Self {
        QuadElem { a, b: BigRational::zero(), d }
    }

    /// Galois conjugate `a − b√d`.
    pub fn conj(&self) -> Self {
        QuadElem { a: self.a.clone(), b: -self.b.clone(), d: self.d }
    }

    /// Complex embedding with `√d = i√|d|` for `d < 0`.
    pub fn to_complex(&self) -> Complex64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        if self.d >= 0 {
            Complex64::new(a + b * (self.d as f64).sqrt(), 0.0)
        } else {
            Complex64::new(a, b * (-self.d as f64).sqrt())
        }
    }
}

impl Scalar for QuadElem {
    fn zero_like(&self) -> Self {
        QuadElem::rational(BigRational::zero(), self.d)
    }
    fn one_like(&self) -> Self {
        QuadElem::rational(BigRational::one(), self.d)
    }
    fn add(&self, o: &Self) -> Self {
        assert_eq!(self.d, o.d, "mixed quadratic fields");
        QuadElem { a: &self.a + &o.a, b: &self.b + &o.b, d: self.d }
    }
    fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.d, o.d, "mixed quadratic fields");
        let d = BigRational::from_integer(BigInt::from(self.d));
        QuadElem {
            a: &self.a * &o.a + &self.b * &o.b * d,
            b: &self.a * &o.b + &self.b * &o.a,
            d: self.d,
        }
    }
    fn neg(&self) -> Self {
        QuadElem { a: -self.a.clone(), b: -self.b.clone(), d: self.d }
    }
}

/// Integer combination `Σ c_θ e(θ)` of roots of unity of `p`-power order.
///
/// Phases are rationals in `[0, 1)` whose denominators are powers of `p`.
/// Equality and the zero test are exact in the cyclotomic field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CycloSum {
    pub p: u64,
    pub terms: BTreeMap<BigRational, i128>,
}

impl CycloSum {
    pub fn zero(p: u64) -> Self {
        CycloSum { p, terms: BTreeMap::new() }
    }

    /// `c·e(θ)`.
    pub fn monomial(p: u64, theta: &BigRational, c: i128) -> Self {
        let mut s = Self::zero(p);
        s.add_term(theta, c);
        s
    }

    pub fn add_term(&mut self, theta: &BigRational, c: i128) {
        if c == 0 {
            return;
        }
        let t = mod_one(theta);
        let entry = self.terms.entry(t.clone()).or_insert(0);
        *entry += c;
        if *entry == 0 {
            self.terms.remove(&t);
        }
    }

    pub fn add_assign(&mut self, o: &CycloSum) {
        for (t, &c) in &o.terms {
            self.add_term(t, c);
        }
    }

    /// Multiplies by the integer `c` and the root of unity `e(θ)`.
    pub fn scaled(&self, theta: &BigRational, c: i128) -> Self {
        let mut s = Self::zero(self.p);
        for (t, &k) in &self.terms {
            s.add_term(&(t + theta), k * c);
        }
        s
    }

    /// Coordinates in the power basis `1, ζ, …, ζ^{φ(N)−1}` of `ℚ(ζ_N)`, `N = p^K`.
    pub fn reduced(&self) -> (u32, Vec<i128>) {
        let k = self
            .terms
            .keys()
            .map(|t| valuation_int(t.denom(), self.p).unwrap_or(0))
            .max()
            .unwrap_or(0) as u32;
        if k == 0 {
            return (0, vec![self.terms.values().sum()]);
        }
        let n = self.p.pow(k) as usize;
        let step = n / self.p as usize;
        let mut coeff = vec![0i128; n];
        for (t, &c) in &self.terms {
            let idx = (t * BigRational::from_integer(BigInt::from(n as u64))).to_integer();
            coeff[idx.to_usize().expect("phase index")] += c;
        }
        // Φ_N(x) = Σ_{j<p} x^{j·N/p}
        let phi = n - step;
        for i in (phi..n).rev() {
            let c = coeff[i];
            if c != 0 {
                coeff[i] = 0;
                let r = i - phi;
                for j in 0..(self.p as usize - 1) {
                    coeff[r + j * step] -= c;
                }
            }
        }
        coeff.truncate(phi);
        (k, coeff)
    }

    /// Exact zero test in `ℚ(ζ_{p^∞})`.
    pub fn is_zero(&self) -> bool {
        self.reduced().1.iter().all(|&c| c == 0)
    }

    /// Exact equality in the cyclotomic field.
    pub fn equals(&self, o: &CycloSum) -> bool {
        let mut d = self.clone();
        d.add_assign(&o.scaled(&BigRational::zero(), -1));
        d.is_zero()
    }

    pub fn to_complex(&self) -> Complex64 {
        self.terms.iter().map(|(t, &c)| e(t.to_f64().unwrap()) * c as f64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn valuations_and_fractional_parts() {
        assert_eq!(valuation(&rat(50, 3), 5), Some(2));
        assert_eq!(valuation(&rat(3, 25), 5), Some(-2));
        assert_eq!(frac_part(&rat(7, 5), 5), rat(2, 5));
        assert_eq!(frac_part(&rat(1, 10), 5), rat(3, 5)); // 1/10 − 3/5 = −1/2 ∈ ℤ_5
        assert_eq!(frac_part(&rat(1, 10), 2), rat(1, 2));
        assert_eq!(frac_part(&rat(4, 3), 5), rat(0, 1));
    }

    proptest! {
        /// The product of ψ over all places is trivial on ℚ:
        /// `x − Σ_p {x}_p ∈ ℤ`, i.e. `ψ_∞(x) Π_p ψ_p(x) = 1`.
        #[test]
        fn psi_product_trivial_on_rationals(a in -10_000i64..10_000, c in 1i64..5_000) {
            let x = rat(a, c);
            let mut s = BigRational::zero();
            for p in prime_factors(c as u64) {
                s += frac_part(&x, p);
            }
            prop_assert!((x - s).is_integer());
        }
    }

    #[test]
    fn cyclotomic_relations_are_detected() {
        let mut s = CycloSum::zero(5);
        for k in 0..5 {
            s.add_term(&rat(k, 5), 1);
        }
        assert!(s.is_zero());
        let mut t = CycloSum::zero(5);
        for k in 0..5 {
            t.add_term(&rat(5 * k + 2, 25), 3);
        }
        assert!(t.is_zero());
        let mut u = CycloSum::zero(2);
        u.add_term(&rat(0, 1), 1);
        u.add_term(&rat(1, 2), 1);
        assert!(u.is_zero());
        let v = CycloSum::monomial(5, &rat(1, 5), 1);
        assert!(!v.is_zero());
        assert!((v.to_complex() - e(0.2)).norm() < 1e-15);
        // Σ_{k=1}^{4} e(k/5) = −1
        let mut w = CycloSum::zero(5);
        for k in 1..5 {
            w.add_term(&rat(k, 5), 1);
        }
        assert!(w.equals(&CycloSum::monomial(5, &rat(0, 1), -1)));
    }

    #[test]
    fn quadratic_field_arithmetic() {
        let x = QuadElem::new(rat(1, 2), rat(3, 1), -7);
        let y = x.mul(&x.conj());
        assert_eq!(y, QuadElem::rational(rat(1, 4) + rat(63, 1), -7));
        assert!((x.to_complex() - Complex64::new(0.5, 3.0 * 7f64.sqrt())).norm() < 1e-14);
    }
}
