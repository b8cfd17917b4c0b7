//! Consensus ALADIN for distributed consensus optimization
//!
//! ```text
//! min_{x_i, z}  Σ_i f_i(x_i)   s.t.  x_i = z  | λ_i,   i = 1..N
//! ```
//!
//! The crate provides the BFGS, reduced and matrix-prox variants of
//! Consensus ALADIN ([`aladin`]), the two consensus ADMM orderings
//! ([`admm`]), a simulated coordinator that counts every float exchanged with
//! the agents, and diagnostics for the convergence behaviour ([`diagnostics`]).
//! The [`harness`] module drives seeded experiments and renders CSV traces.

pub mod admm;
pub mod aladin;
pub mod algorithm;
pub mod diagnostics;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod local_solver;
pub mod problem;

pub use algorithm::Algorithm;
pub use linalg::{Matrix, Vector};
