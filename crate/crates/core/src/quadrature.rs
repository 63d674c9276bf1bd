//! Quadrature and interpolation primitives.
//!
//! * Gauss–Legendre rules of arbitrary order (Newton iteration on `P_n`).
//! * Adaptive Gauss–Kronrod 7/15 on a segment for complex-valued integrands.
//! * Tanh–sinh (double exponential) quadrature on a finite interval.
//! * Chebyshev panels (second-kind points, barycentric evaluation).
//!
//! All routines are deterministic: the subdivision pattern depends only on the
//! integrand values, and summation order is fixed.

use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached Gauss–Legendre rule of order `n`.
pub fn gauss_rule(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss rule cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(GaussRule::compute(n))).clone()
}

/// `∫_a^b f` with an `n`-point Gauss–Legendre rule on each of `panels` equal panels.
pub fn composite_gauss<F>(f: F, a: f64, b: f64, panels: usize, n: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let rule = gauss_rule(n);
    let h = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += f(mid + 0.5 * h * x) * *w;
        }
        total += acc * (0.5 * h);
    }
    total
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod 21-point abscissae on `[0, 1]` (descending, last entry is the centre).
/// Odd indices are the 10-point Gauss–Legendre nodes.
pub const XK21: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
/// Kronrod 21-point weights matching [`XK21`].
pub const WK21: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
/// Gauss 10-point weights for the nodes `XK21[1], XK21[3], …, XK21[9]`.
pub const WG10: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

/// The 21 Kronrod nodes on `[-1, 1]` in ascending order with their Kronrod and
/// embedded Gauss weights (Gauss weight 0 for the Kronrod-only nodes).
pub fn gk21_table() -> [(f64, f64, f64); 21] {
    let mut out = [(0.0, 0.0, 0.0); 21];
    for j in 0..10 {
        let wg = if j % 2 == 1 { WG10[j / 2] } else { 0.0 };
        out[j] = (-XK21[j], WK21[j], wg);
        out[20 - j] = (XK21[j], WK21[j], wg);
    }
    out[10] = (0.0, WK21[10], 0.0);
    out
}

/// Gauss–Kronrod 7/15 on the straight segment `z0 → z1` of a complex path.
/// Returns `(integral, |K15 - G7|)`; the integral includes the factor `dz`.
pub fn gk15_segment<F>(f: &F, z0: Complex64, z1: Complex64) -> (Complex64, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    let mid = (z0 + z1) * 0.5;
    let half = (z1 - z0) * 0.5;
    let fc = f(mid);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let d = half * XGK[j];
        let s = f(mid - d) + f(mid + d);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * half, ((k - g) * half).norm())
}

/// Adaptive Gauss–Kronrod on a complex segment with absolute tolerance `tol`.
/// Returns `(integral, error estimate)`.
pub fn adaptive_segment<F>(f: &F, z0: Complex64, z1: Complex64, tol: f64, max_depth: u32) -> (Complex64, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    let (v, e) = gk15_segment(f, z0, z1);
    adaptive_rec(f, z0, z1, v, e, tol, max_depth)
}

fn adaptive_rec<F>(f: &F, z0: Complex64, z1: Complex64, v: Complex64, e: f64, tol: f64, depth: u32) -> (Complex64, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    if e <= tol || depth == 0 {
        return (v, e);
    }
    let mid = (z0 + z1) * 0.5;
    let (vl, el) = gk15_segment(f, z0, mid);
    let (vr, er) = gk15_segment(f, mid, z1);
    if (el + er) < 1e-3 * e && (vl + vr - v).norm() < tol {
        return (vl + vr, el + er);
    }
    let (al, bl) = adaptive_rec(f, z0, mid, vl, el, 0.5 * tol, depth - 1);
    let (ar, br) = adaptive_rec(f, mid, z1, vr, er, 0.5 * tol, depth - 1);
    (al + ar, bl + br)
}

/// Adaptive Gauss–Kronrod on a real interval.
pub fn adaptive_real<F>(f: F, a: f64, b: f64, tol: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64,
{
    let g = |z: Complex64| f(z.re);
    adaptive_segment(&g, Complex64::new(a, 0.0), Complex64::new(b, 0.0), tol, 40)
}

/// Tanh–sinh quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The integrand receives `(x, distance to nearest endpoint)` so that
/// endpoint-singular integrands can be evaluated without cancellation.
/// Returns `(integral, error estimate)`.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> (Complex64, f64)
where
    F: Fn(f64, f64) -> Complex64,
{
    let r = 0.5 * (b - a);
    let t_max = 5.0;
    let eval = |t: f64| -> Complex64 {
        let u = 0.5 * PI * t.sinh();
        // 1 - tanh|u| = 2 / (1 + e^{2|u|})
        let comp = 2.0 / (1.0 + (2.0 * u.abs()).exp());
        let dist = r * comp;
        if dist <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = if u >= 0.0 { b - dist } else { a + dist };
        // 1/cosh²u = (1 - tanh|u|)(1 + tanh|u|)
        let w = 0.5 * PI * t.cosh() * comp * (2.0 - comp);
        f(x, dist) * w
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h * r;
    let mut err = f64::INFINITY;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = Complex64::new(0.0, 0.0);
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let next = sum * h * r;
        err = (next - estimate).norm();
        estimate = next;
        if err <= tol && _level >= 2 {
            break;
        }
    }
    (estimate, err)
}

/// Polynomial interpolant on `[lo, hi]` through Chebyshev points of the second kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebPanel {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<Complex64>,
}

impl ChebPanel {
    /// Interpolation nodes for a panel of `degree + 1` points.
    pub fn nodes(lo: f64, hi: f64, degree: usize) -> Vec<f64> {
        (0..=degree)
            .map(|j| {
                let x = (PI * j as f64 / degree as f64).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * x
            })
            .collect()
    }

    /// Barycentric evaluation.
    pub fn eval(&self, x: f64) -> Complex64 {
        let n = self.values.len() - 1;
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for j in 0..=n {
            let xj = (PI * j as f64 / n as f64).cos();
            let d = t - xj;
            if d.abs() < 1e-15 {
                return self.values[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            let q = w / d;
            num += self.values[j] * q;
            den += q;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let r = gauss_rule(10);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let total: f64 = r.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod21_is_exact_to_degree_31_and_embeds_gauss10() {
        let t = gk21_table();
        for k in 0..=31 {
            let s: f64 = t.iter().map(|(x, w, _)| w * x.powi(k)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((s - exact).abs() < 1e-14, "degree {k}");
        }
        let g = gauss_rule(10);
        let embedded: Vec<(f64, f64)> = t.iter().filter(|e| e.2 != 0.0).map(|e| (e.0, e.2)).collect();
        for (i, (x, w)) in embedded.iter().enumerate() {
            assert!((x - g.nodes[i]).abs() < 1e-15 && (w - g.weights[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn gk_adaptive_oscillatory() {
        let (v, e) = adaptive_real(|x| Complex64::new(0.0, 40.0 * x).exp(), 0.0, 3.0, 1e-13);
        let exact = (Complex64::new(0.0, 120.0).exp() - 1.0) / Complex64::new(0.0, 40.0);
        assert!((v - exact).norm() < 1e-12, "err {} est {}", (v - exact).norm(), e);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let (v, _) = tanh_sinh(|x, _| Complex64::new(x.powf(-0.5), 0.0), 0.0, 1.0, 1e-12);
        assert!((v.re - 2.0).abs() < 1e-10);
        let (v, _) = tanh_sinh(|x, _| Complex64::new(x.exp(), 0.0), -1.0, 2.0, 1e-14);
        assert!((v.re - (2f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn cheb_panel_reproduces_smooth_function() {
        let nodes = ChebPanel::nodes(1.0, 2.0, 20);
        let values = nodes.iter().map(|&x| Complex64::new(0.0, 6.0 * x).exp()).collect();
        let p = ChebPanel { lo: 1.0, hi: 2.0, values };
        for k in 0..37 {
            let x = 1.0 + k as f64 / 36.0;
            assert!((p.eval(x) - Complex64::new(0.0, 6.0 * x).exp()).norm() < 1e-13);
        }
    }
}
