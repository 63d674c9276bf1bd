//! Command-line front end of the `rv` binary.
//!
//! Every subcommand validates its arguments, runs one module operation and
//! emits CSV rows or a JSON report. Reports are written atomically. Exit codes:
//! 0 success, 1 a residual threshold was not met, 2 invalid configuration,
//! 3 the computation itself failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arch_local::{gamma_factor, CharTwist, Conventions, PlaceParams, RealPlaceParams};
use crate::bessel_kernel::kernel_table;
use crate::exact::CycloSum;
use crate::gj_kernels::{
    locate_zeta_zero, tate_pairing, zero_criterion_pairing, zeta_em, GaussHermite, PairingPhi, PairingVariant,
};
use crate::hankel::{hankel_convolution_route, hankel_mellin_route, local_fe_residual, make_bump, TestFunction};
use crate::io::write_atomic;
use crate::padic_local::{
    default_shell_depth, kloosterman_gl3, local_l_series_check, parse_rational, SatakeParams, WhittakerValue,
};
use crate::voronoi_global::{tau_coefficients, voronoi_residual, DirichletCoeffs, VoronoiJob};
use crate::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Computation(Error),
    #[error("threshold not met: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Threshold(_) => 1,
            CliError::Config(_) => 2,
            CliError::Computation(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) => CliError::Config(m),
            Error::BadSupport { .. } => CliError::Config(e.to_string()),
            other => CliError::Computation(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rv", version, about = "GL(n) Voronoi and Godement–Jacquet kernel toolkit")]
pub struct Cli {
    /// Caps the worker pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// γ(s, π × χ, ψ) at one point as a CSV row `s_re,s_im,gamma_re,gamma_im`.
    Gamma(GammaArgs),
    /// Bessel kernel table `x,sign,re,im` with a JSON sidecar.
    KernelTable(KernelTableArgs),
    /// Hankel dual of a bump function on a list of points.
    Hankel(HankelArgs),
    /// Local functional-equation residuals of the Hankel dual.
    FeCheck(FeCheckArgs),
    /// Exact p-adic checks.
    Padic(PadicArgs),
    /// GL(2)/ℚ Voronoi identity for a level-one form.
    VoronoiVerify(VoronoiArgs),
    /// Kernel-pairing scan over a grid of s.
    GjScan(GjScanArgs),
    /// Tate-kernel zero criterion around a zero of ζ.
    ClozelTest(ClozelArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GammaArgs {
    /// Parameter JSON, inline or a file path.
    #[arg(long)]
    pub params: String,
    #[arg(long, default_value_t = 0)]
    pub twist: i64,
    /// `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub s: String,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelTableArgs {
    #[arg(long)]
    pub params: String,
    /// `a:b:n`, n equally spaced points from a to b.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long)]
    pub tol: Option<f64>,
    /// CSV path; the sidecar goes to the same path with extension `.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteArg {
    Mellin,
    Convolution,
}

#[derive(Debug, Args, Serialize)]
pub struct HankelArgs {
    #[arg(long)]
    pub params: String,
    #[arg(long)]
    pub rank: usize,
    /// Bump support `a,b` with `0 < a < b`.
    #[arg(long)]
    pub support: String,
    /// Comma-separated nonzero points.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = RouteArg::Convolution)]
    pub route: RouteArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FeCheckArgs {
    #[arg(long)]
    pub params: String,
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub support: String,
    /// Comma-separated complex numbers such as `0.5,0.5+2i`.
    #[arg(long, allow_hyphen_values = true)]
    pub s_grid: String,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Largest acceptable relative residual.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PadicArgs {
    /// Check that `Σ h_m(α) X^m` inverts `∏(1 − α_i X)` exactly.
    #[arg(long, conflicts_with = "kloosterman3")]
    pub check_lseries: bool,
    /// GL(3) Kloosterman integrals by shell enumeration.
    #[arg(long)]
    pub kloosterman3: bool,
    #[arg(long)]
    pub q: Option<u64>,
    /// Rational Satake parameters for `--check-lseries`.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub order: usize,
    #[arg(long)]
    pub p: Option<u64>,
    /// `a/c`.
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: Option<String>,
    /// Comma-separated rationals.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_rational: Option<String>,
    /// Satake parameters for the floating output (default `1,1,1`).
    #[arg(long, allow_hyphen_values = true)]
    pub satake: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct VoronoiArgs {
    #[arg(long, default_value_t = 12)]
    pub k: u32,
    /// `a/c` with `gcd(a, c) = 1`.
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: String,
    #[arg(long)]
    pub support: String,
    /// Absolute tolerance of the dual side.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Largest acceptable relative residual.
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    /// Coefficient CSV `n,lambda_re,lambda_im`; the τ expansion is used for
    /// `k = 12` when absent.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    /// Coefficients available to the job (default `1200c² + ⌈b⌉`).
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Seed of the multiplicativity spot check.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GjScanArgs {
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    /// Comma-separated complex values, or `line:σ:t0:t1:n`.
    #[arg(long, allow_hyphen_values = true)]
    pub s_grid: String,
    /// `gaussian` (tate) or `bump:a,b` (cuspidal).
    #[arg(long)]
    pub phi: String,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Coefficient CSV for the cuspidal variant (default: τ expansion).
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Tate,
    Cuspidal,
}

#[derive(Debug, Args, Serialize)]
pub struct ClozelArgs {
    /// Expected ordinate of a zero of `ζ(1/2 + it)`.
    #[arg(long)]
    pub t0: f64,
    /// Half-width of the scanned `t` window.
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,
    #[arg(long, default_value_t = 81)]
    pub steps: usize,
    /// Required ratio between the pairing one unit away and at the zero.
    #[arg(long, default_value_t = 100.0)]
    pub factor: f64,
    /// Scan CSV `t,pairing_abs,zeta_abs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses the arguments, runs the subcommand and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rv: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // a pool set up by an earlier call in the same process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let conv = Conventions::from_env()?;
    match cli.command {
        Command::Gamma(a) => gamma(&a),
        Command::KernelTable(a) => table(&a, &conv),
        Command::Hankel(a) => hankel(&a, &conv),
        Command::FeCheck(a) => fe_check(&a, &conv),
        Command::Padic(a) => padic(&a),
        Command::VoronoiVerify(a) => voronoi(&a, &conv),
        Command::GjScan(a) => gj_scan(&a, &conv),
        Command::ClozelTest(a) => clozel(&a),
    }
}

// ---------------------------------------------------------------------------
// Parsing helpers

fn config<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{what}: {e}"))
}

/// Inline JSON (starting with `{`) or a path to a JSON file.
pub fn load_params(text: &str) -> CliResult<PlaceParams> {
    let body = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text).map_err(config("reading --params"))?
    };
    let params: PlaceParams = serde_json::from_str(&body).map_err(config("parsing --params"))?;
    match &params {
        PlaceParams::Real(p) => p.validate()?,
        PlaceParams::Complex(p) => p.validate()?,
    }
    Ok(params)
}

fn real_params(text: &str) -> CliResult<RealPlaceParams> {
    match load_params(text)? {
        PlaceParams::Real(p) => Ok(p),
        PlaceParams::Complex(_) => Err(CliError::Config("this command needs a real place".into())),
    }
}

fn parse_f64(s: &str) -> CliResult<f64> {
    s.trim().parse().map_err(|_| CliError::Config(format!("`{s}` is not a number")))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

/// `re,im` pair.
fn parse_pair(s: &str) -> CliResult<Complex64> {
    match parse_list(s)?.as_slice() {
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(CliError::Config(format!("expected `re,im`, got `{s}`"))),
    }
}

/// Complex literal `x`, `yi`, `x+yi` or `x-yi`.
pub fn parse_complex(s: &str) -> CliResult<Complex64> {
    let t = s.trim();
    let bad = || CliError::Config(format!("`{s}` is not a complex number"));
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(parse_f64(t)?, 0.0));
    };
    // split at the last sign that is not part of an exponent or leading
    let split = body
        .char_indices()
        .filter(|&(i, c)| (c == '+' || c == '-') && i > 0 && !matches!(body.as_bytes()[i - 1], b'e' | b'E'))
        .map(|(i, _)| i)
        .next_back();
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re.parse().map_err(|_| bad())?, im))
}

/// Comma-separated complex literals, or `line:σ:t0:t1:n`.
pub fn parse_s_grid(s: &str) -> CliResult<Vec<Complex64>> {
    if let Some(rest) = s.strip_prefix("line:") {
        let f = rest.split(':').map(parse_f64).collect::<CliResult<Vec<_>>>()?;
        let [sigma, t0, t1, n] = f.as_slice() else {
            return Err(CliError::Config(format!("expected `line:σ:t0:t1:n`, got `{s}`")));
        };
        let n = *n as usize;
        if n == 0 {
            return Err(CliError::Config("grid needs at least one point".into()));
        }
        let step = if n > 1 { (t1 - t0) / (n - 1) as f64 } else { 0.0 };
        return Ok((0..n).map(|k| Complex64::new(*sigma, t0 + step * k as f64)).collect());
    }
    s.split(',').map(parse_complex).collect()
}

fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let f = s.split(':').map(parse_f64).collect::<CliResult<Vec<_>>>()?;
    let [a, b, n] = f.as_slice() else {
        return Err(CliError::Config(format!("expected `a:b:n`, got `{s}`")));
    };
    let n = *n as usize;
    if n < 2 {
        return Err(CliError::Config("grid needs at least two points".into()));
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

fn parse_support(s: &str) -> CliResult<TestFunction> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok(make_bump(*a, *b)?),
        _ => Err(CliError::Config(format!("expected support `a,b`, got `{s}`"))),
    }
}

fn parse_zeta(s: &str) -> CliResult<(i64, u64)> {
    let (a, c) = s.split_once('/').ok_or_else(|| CliError::Config(format!("expected `a/c`, got `{s}`")))?;
    let a: i64 = a.trim().parse().map_err(config("numerator"))?;
    let c: u64 = c.trim().parse().map_err(config("denominator"))?;
    Ok((a, c))
}

/// Requested tolerance, or the default `max(10⁻⁸, floor)`; never below the
/// floor implied by `RV_PRECISION`.
fn tolerance(requested: Option<f64>, conv: &Conventions) -> CliResult<f64> {
    let floor = conv.min_tol().max(crate::bessel_kernel::MIN_TOL);
    let tol = requested.unwrap_or(1e-8_f64.max(floor));
    if !(tol > 0.0) {
        return Err(CliError::Config(format!("tolerance {tol} must be positive")));
    }
    if tol < floor {
        return Err(CliError::Config(format!("tolerance {tol:e} below the floor {floor:e} for this precision")));
    }
    Ok(tol)
}

fn emit(out: Option<&Path>, body: &str) -> CliResult<()> {
    match out {
        Some(p) => Ok(write_atomic(p, body.as_bytes())?),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

/// JSON report: inputs echo, results, precision, version and wall time.
fn report<A: Serialize>(command: &str, inputs: &A, conv: &Conventions, results: Value, started: Instant) -> String {
    let doc = json!({
        "tool": "rv",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "inputs": inputs,
        "precision_digits": conv.effective_digits(),
        "results": results,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// A value with its error estimate and where it came from.
fn tagged<T: Serialize>(value: T, error: f64, provenance: &str) -> Value {
    json!({ "value": value, "error": error, "provenance": provenance })
}

// ---------------------------------------------------------------------------
// Subcommands

fn gamma(a: &GammaArgs) -> CliResult<()> {
    let params = load_params(&a.params)?;
    let s = parse_pair(&a.s)?;
    let g = gamma_factor(&params, CharTwist(a.twist), s)?;
    println!("{},{},{},{}", s.re, s.im, g.re, g.im);
    Ok(())
}

fn table(a: &KernelTableArgs, conv: &Conventions) -> CliResult<()> {
    let params = load_params(&a.params)?;
    let grid = parse_grid(&a.grid)?;
    let tol = tolerance(a.tol, conv)?;
    let t = kernel_table(&params, &grid, tol)?;
    t.save(&a.out, &a.out.with_extension("json"))?;
    if t.is_partial() {
        return Err(CliError::Computation(Error::ToleranceNotMet { achieved: t.achieved_tol, requested: tol }));
    }
    Ok(())
}

fn hankel(a: &HankelArgs, conv: &Conventions) -> CliResult<()> {
    let params = real_params(&a.params)?;
    let w = parse_support(&a.support)?;
    let tol = tolerance(a.tol, conv)?;
    let mut out = String::from("x,re,im,achieved_tol,route\n");
    for x in parse_list(&a.x)? {
        let r = match a.route {
            RouteArg::Mellin => hankel_mellin_route(&params, a.rank, &w, x, tol)?,
            RouteArg::Convolution => hankel_convolution_route(&params, a.rank, &w, x, tol)?,
        };
        let route = match a.route {
            RouteArg::Mellin => "mellin",
            RouteArg::Convolution => "convolution",
        };
        out.push_str(&format!("{},{},{},{},{}\n", r.x, r.value.re, r.value.im, r.achieved_tol, route));
    }
    emit(a.out.as_deref(), &out)
}

fn fe_check(a: &FeCheckArgs, conv: &Conventions) -> CliResult<()> {
    let params = real_params(&a.params)?;
    let w = parse_support(&a.support)?;
    let tol = tolerance(a.tol, conv)?;
    let grid = parse_s_grid(&a.s_grid)?;
    let rep = local_fe_residual(&params, a.rank, &w, &grid, tol)?;
    let mut out = String::from("s_re,s_im,delta,lhs_re,lhs_im,rhs_re,rhs_im,rel_residual,lhs_error\n");
    for r in &rep.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.s.re, r.s.im, r.delta, r.lhs.re, r.lhs.im, r.rhs.re, r.rhs.im, r.rel_residual, r.lhs_error
        ));
    }
    emit(a.out.as_deref(), &out)?;
    if rep.max_rel_residual > a.threshold {
        return Err(CliError::Threshold(format!(
            "max relative residual {:e} exceeds {:e}",
            rep.max_rel_residual, a.threshold
        )));
    }
    Ok(())
}

/// `Σ_λ W_λ · (Σ c·e(θ))` in a readable exact form.
pub fn format_whittaker(v: &WhittakerValue) -> String {
    if v.is_zero() {
        return "0".into();
    }
    let sum = |c: &CycloSum| {
        c.terms.iter().map(|(theta, k)| format!("{k}·e({theta})")).collect::<Vec<_>>().join(" + ")
    };
    v.terms
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(l, c)| format!("W{l:?}·({})", sum(c)))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn padic(a: &PadicArgs) -> CliResult<()> {
    let need = |o: &Option<String>, flag: &str| {
        o.clone().ok_or_else(|| CliError::Config(format!("{flag} is required")))
    };
    if a.check_lseries {
        let q = a.q.ok_or_else(|| CliError::Config("--q is required".into()))?;
        if q < 2 {
            return Err(CliError::Config(format!("--q {q} must be at least 2")));
        }
        let alpha = need(&a.alpha, "--alpha")?
            .split(',')
            .map(|t| Ok(parse_rational(t.trim())?))
            .collect::<CliResult<Vec<BigRational>>>()?;
        let (series, ok) = local_l_series_check(&alpha, a.order);
        println!("m,h_m");
        for (m, h) in series.iter().enumerate() {
            println!("{m},{h}");
        }
        println!("# exact inverse of the Euler factor: {}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            return Err(CliError::Threshold("series does not invert the Euler factor".into()));
        }
        return Ok(());
    }
    if a.kloosterman3 {
        let p = a.p.ok_or_else(|| CliError::Config("--p is required".into()))?;
        if !crate::exact::is_prime(p) {
            return Err(CliError::Config(format!("--p {p} is not prime")));
        }
        let zeta = parse_rational(&need(&a.zeta, "--zeta")?)?;
        let satake = match &a.satake {
            Some(s) => s.split(',').map(parse_complex).collect::<CliResult<Vec<_>>>()?,
            None => vec![Complex64::new(1.0, 0.0); 3],
        };
        if satake.len() != 3 {
            return Err(CliError::Config("--satake needs three values".into()));
        }
        let sp = SatakeParams::new(p, satake)?;
        let depth = default_shell_depth(p, &zeta);
        for t in need(&a.alpha_rational, "--alpha-rational")?.split(',') {
            let alpha = parse_rational(t.trim())?;
            let k = kloosterman_gl3(p, &alpha, &zeta, depth)?;
            let v = k.value.to_complex(&sp);
            println!("alpha={alpha} exact={} float={},{}", format_whittaker(&k.value), v.re, v.im);
        }
        return Ok(());
    }
    Err(CliError::Config("choose --check-lseries or --kloosterman3".into()))
}

fn coefficients(path: Option<&Path>, weight: u32, n: usize) -> CliResult<DirichletCoeffs> {
    match path {
        Some(p) => Ok(DirichletCoeffs::load_csv(p)?),
        None if weight == 12 => Ok(tau_coefficients(n)?),
        None => Err(CliError::Config(format!("weight {weight} needs a --coeffs file"))),
    }
}

fn voronoi(a: &VoronoiArgs, conv: &Conventions) -> CliResult<()> {
    let started = Instant::now();
    let (num, den) = parse_zeta(&a.zeta)?;
    let w = parse_support(&a.support)?;
    let tol = tolerance(a.tol, conv)?;
    let hi = w.support().map_or(1.0, |(_, b)| b);
    let n = a.truncation.unwrap_or(1200 * (den as usize).pow(2) + hi.ceil() as usize);
    let coeffs = coefficients(a.coeffs.as_deref(), a.k, n)?;
    let mut job = VoronoiJob::new(num, den, w, n, tol)?;
    job.weight = a.k;
    job.validate()?;
    let mult = coeffs.check_multiplicativity(20, a.seed);
    let r = voronoi_residual(&job, &coeffs)?;
    let results = json!({
        "lhs": tagged(r.lhs, 0.0, "direct-sum"),
        "rhs": tagged(r.rhs, r.rhs_error_estimate, "dual-sum"),
        "abs_residual": r.abs_residual,
        "rel_residual": r.rel_residual,
        "rel_residual_literal_kl": r.rel_residual_literal_kl,
        "truncation": {
            "lhs_terms": r.lhs_terms,
            "rhs_terms": r.rhs_terms,
            "alpha_spacing": r.alpha_spacing,
            "alpha_cutoff": r.alpha_cutoff,
            "coefficients": coeffs.len(),
        },
        "places": r.places,
        "multiplicativity": mult,
        "coefficient_source": coeffs.source,
    });
    emit(a.out.as_deref(), &report("voronoi-verify", a, conv, results, started))?;
    if !mult.failures.is_empty() && mult.exact {
        return Err(CliError::Computation(Error::InvalidInput("exact coefficients fail multiplicativity".into())));
    }
    if !mult.failures.is_empty() {
        eprintln!("rv: warning: coefficient file fails multiplicativity at {:?}", mult.failures);
    }
    if !(r.rel_residual <= a.threshold) {
        return Err(CliError::Threshold(format!("relative residual {:e} exceeds {:e}", r.rel_residual, a.threshold)));
    }
    Ok(())
}

fn gj_scan(a: &GjScanArgs, conv: &Conventions) -> CliResult<()> {
    let grid = parse_s_grid(&a.s_grid)?;
    let tol = tolerance(a.tol, conv)?;
    let phi = match (a.variant, a.phi.as_str()) {
        (VariantArg::Tate, "gaussian") => PairingPhi::Tate(GaussHermite::gaussian()),
        (VariantArg::Cuspidal, text) if text.starts_with("bump:") => {
            let w = parse_support(&text["bump:".len()..])?;
            let hi = w.support().map_or(1.0, |(_, b)| b);
            let coeffs = coefficients(a.coeffs.as_deref(), 12, 3000.max(40 * hi.ceil() as usize))?;
            let params = RealPlaceParams {
                blocks: vec![crate::arch_local::RealBlock::Ds2 { l: 11, t: Complex64::new(0.0, 0.0) }],
            };
            PairingPhi::Cuspidal { phi: w, coeffs, params, tol }
        }
        (v, p) => {
            let v = match v {
                VariantArg::Tate => PairingVariant::Tate,
                VariantArg::Cuspidal => PairingVariant::Cuspidal,
            };
            return Err(CliError::Config(format!("--phi {p} is not available for the {v:?} variant")));
        }
    };
    let rows = zero_criterion_pairing(&phi, &grid)?;
    let mut out = String::from("s_re,s_im,defect,reference_abs\n");
    for r in &rows {
        out.push_str(&format!("{},{},{},{}\n", r.s.re, r.s.im, r.defect, r.reference.norm()));
    }
    emit(a.out.as_deref(), &out)
}

fn clozel(a: &ClozelArgs) -> CliResult<()> {
    if !(a.window > 0.0) || a.steps < 2 {
        return Err(CliError::Config("need a positive window and at least two steps".into()));
    }
    let phi = GaussHermite::gaussian();
    let (lo, hi) = (a.t0 - a.window, a.t0 + a.window);
    let mut out = String::from("t,pairing_abs,zeta_abs\n");
    for k in 0..a.steps {
        let t = lo + (hi - lo) * k as f64 / (a.steps - 1) as f64;
        let s = Complex64::new(0.5, t);
        out.push_str(&format!("{},{},{}\n", t, tate_pairing(&phi, s)?.norm(), zeta_em(s)?.norm()));
    }
    if let Some(p) = &a.out {
        write_atomic(p, out.as_bytes())?;
    }
    // the zero nearest t0 inside a unit bracket
    let t_zero = locate_zeta_zero(a.t0 - 0.5, a.t0 + 0.5, 1e-12)?;
    let at_zero = tate_pairing(&phi, Complex64::new(0.5, t_zero))?.norm();
    let along = tate_pairing(&phi, Complex64::new(0.5, t_zero - 1.0))?.norm();
    let across = tate_pairing(&phi, Complex64::new(0.7, t_zero))?.norm();
    let summary = json!({
        "located_zero": t_zero,
        "offset_from_t0": t_zero - a.t0,
        "pairing_at_zero": at_zero,
        "pairing_t_minus_1": along,
        "pairing_sigma_0_7": across,
        "ratio_t_minus_1": along / at_zero,
        "ratio_sigma_0_7": across / at_zero,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    if along < a.factor * at_zero || across < a.factor * at_zero {
        return Err(CliError::Threshold(format!("pairing does not dip by a factor {} at the zero", a.factor)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5").unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(parse_complex("0.5+2i").unwrap(), Complex64::new(0.5, 2.0));
        assert_eq!(parse_complex("0.5-2i").unwrap(), Complex64::new(0.5, -2.0));
        assert_eq!(parse_complex("-3i").unwrap(), Complex64::new(0.0, -3.0));
        assert_eq!(parse_complex("1e-3+1e-2i").unwrap(), Complex64::new(1e-3, 1e-2));
        assert_eq!(parse_complex("2+i").unwrap(), Complex64::new(2.0, 1.0));
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn grids() {
        let g = parse_s_grid("line:0.5:13:15:3").unwrap();
        assert_eq!(g, vec![Complex64::new(0.5, 13.0), Complex64::new(0.5, 14.0), Complex64::new(0.5, 15.0)]);
        assert_eq!(parse_s_grid("0.2,0.5+2i").unwrap().len(), 2);
        assert_eq!(parse_grid("-1:1:5").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(parse_grid("1:2").is_err());
        assert_eq!(parse_zeta("-2/5").unwrap(), (-2, 5));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["rv", "no-such-command"]), 2);
        assert_eq!(main_with_args(["rv", "gamma", "--params", "{\"place\":\"real\"}", "--s", "1,0"]), 2);
        assert_eq!(
            main_with_args(["rv", "gamma", "--params", "{\"place\":\"real\",\"blocks\":[],\"x\":1}", "--s", "1,0"]),
            2
        );
        let p = r#"{"place":"real","blocks":[{"kind":"gl1","delta":0,"t":[0.0,0.0]}]}"#;
        assert_eq!(main_with_args(["rv", "gamma", "--params", p, "--s", "0.5,1"]), 0);
        assert_eq!(main_with_args(["rv", "clozel-test", "--t0", "14.134725", "--window", "0"]), 2);
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::InvalidInput("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::Singular).exit_code(), 3);
        assert_eq!(CliError::Threshold("x".into()).exit_code(), 1);
    }
}
