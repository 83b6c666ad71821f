//! Certified finite witnesses for subsums of alternating power series.
//!
//! Given pairwise distinct exponents `α_1, ..., α_d` in `(0, 1]` and a target
//! `x ∈ R^d`, [`constructor::solve`] returns a finite index set `F` with
//! `|Σ_{n∈F} (-1)^{n+1} n^{-α_i} - x_i| <= tol` for every `i`, together with a
//! rigorous enclosure of each coordinate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constructor;
pub mod error;
pub mod prime_pool;
pub mod series_eval;
pub mod set_algebra;
pub mod targeter;
pub mod verify_oracle;

pub use error::{Error, Result};
