//! Slice-rank bounds and exact search for three-term progression-free sets
//! with restricted differences over F_q^n.
//!
//! The pipeline: pose a `DifferenceInstance` (q, n, allowed difference sets
//! S_1..S_n), derive the exponent parameters μ and α, minimize the growth
//! objective to get Γ and ε_q, and cross-check the resulting size bounds
//! against exact branch-and-bound search and tensor certificates at desk
//! scale.

pub mod counting;
pub mod error;
pub mod families;
pub mod gamma;
pub mod gf;
pub mod poly;
pub mod rational;
pub mod report;
pub mod search;
pub mod tensor;

pub use error::{Error, Result};
