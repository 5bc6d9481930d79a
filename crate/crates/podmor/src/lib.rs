//! Proper orthogonal decomposition (POD) and Galerkin model reduction for
//! one-dimensional parabolic problems.
//!
//! The crate covers the full offline/online workflow: piecewise-linear finite
//! element discretization ([`mesh`]), implicit-Euler snapshot generation
//! ([`snapshots`]), POD basis computation through three equivalent routes and
//! across non-matching grids ([`pod`]), reduced-order models with several
//! nonlinearity treatments ([`rom`]), error and timing studies ([`analytics`]),
//! and optimization of additional snapshot locations ([`snapopt`]).

pub mod analytics;
pub mod catalog;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod pod;
pub mod quad;
pub mod rom;
pub mod snapopt;
pub mod snapshots;
pub mod timegrid;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::{PodError, Result};
