//! Certification and recovery toolkit for `ℓq` minimization (`0 < q ≤ 1`).
//!
//! The crate evaluates the bound function `a(q, δ)` that turns a restricted
//! isometry constant into null space and stable-recovery guarantees, and
//! checks those guarantees against brute-force oracles on small matrices.

pub mod bounds;
pub mod error;
pub mod lemmas;
pub mod matrix;
pub mod nsp;
pub mod rip;
pub mod roots;
pub mod solver;
pub mod vector;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, SupportSet};
pub use vector::SignalVector;
