//! Numerical laboratory for local energy decay of the wave equation
//! `∂ₜ²u − c(x)²Δu = 0` with a compactly supported Lipschitz wavespeed.
//!
//! The crate builds discretized free and perturbed cutoff resolvents
//! `χR(λ)χ`, scans them along the real axis and into the lower half-plane,
//! evolves the wave equation in time, reconstructs the same evolution through
//! Stone's formula, and fits the norm and decay envelopes that the low/high
//! energy resolvent bounds predict.
//!
//! Module map:
//! - [`model`]: grids, wavespeed profiles, Cauchy data, discrete norms.
//! - [`special`]: Bessel/Hankel functions of order 0 and 1.
//! - [`free`]: free Green's kernels and Nyström assembly of `χR₀(λ)χ`.
//! - [`perturbed`]: `K(λ)χ`, the cutoff resolvent `χR(λ)χ`, gradients, identities.
//! - [`scan`]: real-axis and lower half-plane sweeps.
//! - [`wave`]: leapfrog time stepping and energy traces.
//! - [`stone`]: spectral-measure propagator.
//! - [`fit`]: envelope fitting.
//! - [`harness`]: experiment configuration, runner and artifacts.

pub mod error;
pub mod fit;
pub mod free;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod perturbed;
pub mod scan;
pub mod special;
pub mod stone;
pub mod wave;

pub use error::{Error, Result};
pub use num_complex::Complex64;
