//! Brownian-time processes: a numerical laboratory.
//!
//! A Brownian-time process runs a Markov process `X` started at `x` on the
//! random clock `|B(t)|` of an independent one-dimensional Brownian motion.
//! The crate builds such paths (and their excursion-based variants), computes
//! their one-time marginals by quadrature, checks the fourth-order parabolic
//! PDE they solve, samples the iterated exit problem, evaluates the
//! half-derivative generator, and tests convergence of the excursion-based
//! constructions.
//!
//! Each capability has a runnable program under `examples/`; the `btp`
//! binary wraps the same experiments behind a command line.

pub mod compose;
pub mod convergence;
pub mod error;
pub mod exit;
pub mod halfgen;
pub mod harness;
pub mod kernels;
pub mod paths;
pub mod pde;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result};
pub use paths::{GeneratorSpec, Path, TimeGrid};
pub use rng::Seed;
pub use stats::Estimate;
pub use testfn::{Builtin, TestFunction};
