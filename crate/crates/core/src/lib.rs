//! Numerical laboratory for the semi-discrete directed polymer in a Brownian
//! environment (O'Connell-Yor type), in both its point-to-point and stationary
//! (Burke-boundary) versions.
//!
//! The crate is organized around a log-domain transfer recursion: polymer
//! partition functions are built level by level with a streaming trapezoid
//! log-sum-exp accumulator, paths are drawn from the quenched Gibbs measure by
//! backward decomposition of the same tables, and a suite of exact
//! distributional identities (Burke increments, mean/variance formulas,
//! scaling maps, the Dufresne functional) doubles as the statistical test bed.
//! On top of that sit replica-sweep experiments that estimate the
//! intermediate-disorder fluctuation exponents chi(alpha) = (1 - 4 alpha)/3
//! and zeta(alpha) = 2 (1 - alpha)/3.

pub mod environment;
pub mod experiments;
pub mod identities;
pub mod logdomain;
pub mod partition;
pub mod paths;
pub mod special;
pub mod stats;
pub mod streams;

pub use environment::{Environment, GridSpec};
pub use experiments::{ExperimentConfig, ExperimentKind, ExperimentReport, PowerLawFit};
pub use identities::IdentityVerdict;
pub use partition::{BoundaryWeights, DPTable, ScalingMap, TableKind};
pub use paths::{PathEntry, PathSample};
pub use special::{ModelConstants, ScaledParams, Tolerances, TOL};
