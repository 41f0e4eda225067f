//! Numerical laboratory for analysis on the biased discrete hypercube
//! `{-1,+1}^n`.
//!
//! The crate provides, as exact finite computations (plus seeded Monte Carlo
//! where exactness is out of reach):
//!
//! - the product measure with per-coordinate bias, its heat-flow semigroup,
//!   generator, and biased discrete derivatives ([`cube`], [`heatflow`]);
//! - Walsh expansions and the multilinear extension of a function table to
//!   the solid cube `[-1,1]^n` ([`fourier`]);
//! - functional-inequality evaluators (two-point symmetrization, Poincaré with
//!   explicit constant budgets, Rademacher-average ratios, weak-norm stable
//!   functionals, pointwise asymmetric-gradient bounds) ([`functionals`],
//!   [`norms`]);
//! - antipodal-agreement witnesses on the `d`-skeleton of the solid cube and
//!   the restricted Poincaré check they induce ([`topology`]);
//! - bi-Lipschitz distortion scans and closed-form lower bounds for maps into
//!   low-dimensional normed targets ([`embeddings`]).
//!
//! Everything is deterministic for a fixed seed: random instances derive
//! per-trial generators by counter-based stream splitting ([`rng`]), so results
//! do not depend on thread count.
//!
//! The `heatcube` binary (see [`cli`]) drives batch experiments and emits
//! JSON/CSV reports.

#![forbid(unsafe_code)]

pub mod cli;
pub mod cube;
pub mod embeddings;
pub mod fourier;
pub mod functionals;
pub mod heatflow;
pub mod norms;
pub mod rng;
pub mod topology;

use thiserror::Error;

/// Crate-wide error type.
///
/// Index-bound violations on hot-path accessors (`CubePoint::sign`,
/// `CubeFunction::value`, ...) panic like slice indexing does; everything a
/// caller can plausibly feed from config or data comes back as a variant here.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// Two inputs that must agree on a dimension did not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Cube dimension outside the supported range.
    #[error("dimension n={n} out of range (max {max})")]
    DimensionOutOfRange { n: usize, max: usize },

    /// A scalar parameter violated its documented domain.
    #[error("invalid {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A table or list that must be non-empty was empty.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Non-finite entry where finite data is required.
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    /// Input length does not match the advertised shape.
    #[error("bad length: expected {expected}, got {got}")]
    BadLength { expected: usize, got: usize },

    /// An exact enumeration was requested above its size cutoff.
    #[error("exact mode rejected for n={n}: enumeration cap is n={max}")]
    ExactCapExceeded { n: usize, max: usize },

    /// The antipodal search examined every face without certifying a zero.
    #[error(
        "search budget exhausted after {faces_examined} faces (best residual {best_residual:.3e})"
    )]
    BudgetExhausted {
        faces_examined: usize,
        best_residual: f64,
    },

    /// A user-supplied metric callback failed its registration spot-check.
    #[error("metric callback rejected: {0}")]
    MetricRejected(String),

    /// Configuration error surfaced by the CLI layer.
    #[error("config error: {0}")]
    Config(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub use cube::{
    expectation, weighted_hamming, BiasVector, CubeFunction, CubePoint, ProductMeasure,
    WeightVector, BIAS_EPS, MAX_N,
};
pub use fourier::{
    inverse_walsh, multilinear_eval, odd_part_eval, walsh_transform, FourierTable,
};
pub use functionals::{InequalityReport, MetricSpec};
pub use heatflow::{
    generator_apply, mc_semigroup, semigroup_apply, verify_identity, IdentityReport, Kernel1D,
};
pub use embeddings::{
    distortion, edge_antipodal_ratio, lower_bound_ivv, lower_bound_main, lower_bound_ole,
    lower_bound_weighted, p_sweep, sharp_example, snowflake_bound, BoundInputs, BoundKind,
    CubeMetric, DistortionReport,
};
pub use norms::NormSpec;
pub use topology::{
    derive_bias, enumerate_faces, find_antipodal_zero, restricted_poincare_check,
    AntipodalWitness, DerivedBias, Face, SearchOpts,
};

