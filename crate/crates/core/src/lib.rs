//! Anderson-accelerated primal-dual hybrid gradient for linear programming.
//!
//! The crate solves `min cᵀx` subject to `Gx ≥ h`, `Ax = b`, `l ≤ x ≤ u`
//! by iterating the PDHG fixed-point map, optionally accelerated by a
//! safeguarded Anderson step with or without memory filtering.

pub mod anderson;
pub mod filtering;
pub mod linalg;
pub mod lp_model;
pub mod pdhg;
pub mod solver;
pub mod oracle;
pub mod cli;
