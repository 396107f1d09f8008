//! Sampling theory for band-limited subspaces of metabelian nilpotent Lie
//! groups.
//!
//! Given a nilpotent Lie algebra with rational structure constants, split
//! as a commutative ideal spanned by Z_1..Z_p plus a commutative complement
//! A_1..A_m, the crate computes the full pipeline:
//!
//! - exact structural checks (Jacobi, nilpotency, polarization hypotheses);
//! - coadjoint data: the skew pairing matrix, jump indices, the
//!   cross-section of generic orbits, and the spectral density;
//! - the bandwidth bound delta certifying that small spectral boxes map
//!   into a fundamental domain of the integer lattice;
//! - containment and tiling checks for spectral boxes;
//! - desk-scale verification that the associated analysis transform into
//!   sequences over the lattice is an isometry, intertwines the natural
//!   actions, and yields Parseval-frame reconstruction.
//!
//! All structural computation is exact (arbitrary-precision rationals);
//! floating point is confined to quadrature and Monte Carlo estimates.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `nilsampler` binary for the command-line interface.

pub mod algebra;
pub mod bernstein;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod frames;
pub mod linalg;
pub mod orbit;
pub mod poly;
pub mod rational;
pub mod report;
pub mod sampling;

pub use algebra::{AlgebraSpec, ConditionReport, StructureReport};
pub use error::{Error, Result};
pub use linalg::RatMatrix;
pub use orbit::{CrossSection, Functional, JumpSet, OrbitMap};
pub use poly::{Poly, PolyMatrix};
pub use rational::Rational;
