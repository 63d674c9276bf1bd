//! Complex Γ function and related helpers.
//!
//! `ln_gamma` uses the Stirling series after shifting the argument to
//! `|z| >= 15`, and the reflection formula on the left half plane. The
//! truncation error of the series is below `1e-19`, so the achieved accuracy is
//! limited by IEEE double rounding (about 16 significant digits).

use num_complex::Complex64;
use std::f64::consts::PI;

/// Radius of the disk around a Γ pole treated as "on the pole".
pub const POLE_RADIUS: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Stirling coefficients `B_{2k} / (2k (2k-1))`.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Returns `Some(k)` when `z` is within [`POLE_RADIUS`] of the Γ pole `-k`.
pub fn near_gamma_pole(z: Complex64) -> Option<i64> {
    if z.re > 0.5 {
        return None;
    }
    let k = (-z.re).round();
    if k < 0.0 {
        return None;
    }
    let d = Complex64::new(z.re + k, z.im).norm();
    (d < POLE_RADIUS).then_some(k as i64)
}

/// Principal-ish branch of `ln Γ(z)`; only `exp` of the result is meaningful
/// (the imaginary part may differ from the principal branch by `2πi` multiples).
///
/// Panics in debug builds if `z` is a pole; callers screen with [`near_gamma_pole`].
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        return Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_right(Complex64::new(1.0, 0.0) - z);
    }
    ln_gamma_right(z)
}

fn ln_gamma_right(z: Complex64) -> Complex64 {
    let mut z = z;
    let mut shift = Complex64::new(0.0, 0.0);
    let mut prod = Complex64::new(1.0, 0.0);
    let mut count = 0;
    while z.norm() < 15.0 {
        prod *= z;
        count += 1;
        if count % 8 == 0 {
            shift += prod.ln();
            prod = Complex64::new(1.0, 0.0);
        }
        z += 1.0;
    }
    shift += prod.ln();
    stirling(z) - shift
}

fn stirling(z: Complex64) -> Complex64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in STIRLING {
        series += pow * c;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series
}

/// `ln sin(πz)` computed without overflow for large `|Im z|`.
pub fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im.abs() < 15.0 {
        return (z * PI).sin().ln();
    }
    let half_pi_i = Complex64::new(0.0, PI / 2.0);
    let ln2 = std::f64::consts::LN_2;
    if z.im > 0.0 {
        // sin(πz) = -e^{-iπz} (1 - e^{2iπz}) / (2i)
        let small = (i * 2.0 * PI * z).exp();
        -i * PI * z - ln2 - half_pi_i + ln1p(-small) + i * PI
    } else {
        // sin(πz) = e^{iπz} (1 - e^{-2iπz}) / (2i)
        let small = (-i * 2.0 * PI * z).exp();
        i * PI * z - ln2 - half_pi_i + ln1p(-small)
    }
}

fn ln1p(w: Complex64) -> Complex64 {
    if w.norm() < 1e-8 {
        w - w * w * 0.5
    } else {
        (w + 1.0).ln()
    }
}

/// Γ(z); returns `None` at poles.
pub fn gamma(z: Complex64) -> Option<Complex64> {
    if near_gamma_pole(z).is_some() {
        return None;
    }
    Some(ln_gamma(z).exp())
}

/// 1/Γ(z), an entire function (exactly zero at the poles of Γ).
pub fn rgamma(z: Complex64) -> Complex64 {
    if near_gamma_pole(z).is_some() {
        return Complex64::new(0.0, 0.0);
    }
    (-ln_gamma(z)).exp()
}

/// Integer power of `i`.
pub fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}
