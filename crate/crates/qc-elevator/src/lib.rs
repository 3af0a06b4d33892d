//! Similarity-elevator construction at desk scale.
//!
//! Builds a quasiconformal map of R^n that raises the Hausdorff dimension
//! of every line through a large Cantor set of base points: parameter
//! derivation from the inequality ledger, packed iterated function systems
//! with separation certificates, an explicit piecewise-linear generating
//! map between the fundamental shells, symbolic and geometric evaluation of
//! the generated map, and numerical verification of the dimension,
//! dilatation and Sobolev-energy claims.
//!
//! Start from [`params::derive_paper_params`] or
//! [`params::check_direct_params`], feed the result to
//! [`ifs::build_instance_systems`], optionally build the generating map via
//! [`genmap::build_generating_map`], then query [`elevator`] and
//! [`analysis`]. The `examples/` directory has one runnable example per
//! capability; the `qce` binary wraps the same calls behind subcommands.

pub mod analysis;
pub mod artifact;
pub mod elevator;
pub mod error;
pub mod genmap;
pub mod geometry;
pub mod ifs;
pub mod params;
pub mod render;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
