//! Numerical core for interior regularity experiments on the complex
//! Monge-Ampère equation `det(u_{ij̄}) = f` in ℂⁿ, n ∈ {1, 2}.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation on in-memory values: exponent bookkeeping, grid fields with
//! Wirtinger finite differences, Hölder seminorm estimators, the mollifier,
//! the Dirichlet solver, the dyadic cascade of auxiliary solutions and the
//! third-order (Calabi) quantities. File formats, the CLI and parallel
//! orchestration live in the `cmalab` crate.
//!
//! Points of ℂⁿ are stored as real coordinates `(x₁, y₁, x₂, y₂)` with
//! `z_k = x_k + i y_k`.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calabi;
pub mod cascade;
pub mod error;
pub mod exponents;
pub mod field;
pub mod linalg;
pub mod mollify;
pub mod norms;
pub mod solver;

pub use error::{Error, Result};
pub use exponents::{ExponentParams, MuWindow};
pub use field::{BallDomain, GridField};

/// Maximum number of real coordinates (complex dimension 2).
pub const MAX_DIM: usize = 4;

/// A point of ℝ^{2n}; only the first `2n` entries are meaningful.
pub type Point = [f64; MAX_DIM];
