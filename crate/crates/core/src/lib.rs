//! Numerical and exact toolkit for the GL(n) Voronoi summation formula and
//! Godement–Jacquet kernels.
//!
//! The crate is organised bottom-up: [`special`] and [`quadrature`] provide the
//! numerical primitives, [`arch_local`] the archimedean local factors,
//! [`bessel_kernel`] the Mellin–Barnes Bessel functions, [`hankel`] the dual
//! test functions, [`padic_local`] exact non-archimedean data,
//! [`voronoi_global`] the GL(2)/ℚ verification and [`gj_kernels`] the kernel
//! functions and zero criterion. [`cli`] wires everything to the `rv` binary.

pub mod arch_local;
pub mod bessel_kernel;
pub mod cli;
pub mod error;
pub mod exact;
pub mod gj_kernels;
pub mod hankel;
pub mod io;
pub mod padic_local;
pub mod quadrature;
pub mod special;
pub mod voronoi_global;

pub use error::{Error, Result};
