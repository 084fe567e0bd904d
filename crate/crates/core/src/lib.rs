//! Solver and discrete verification suite for a sign-coupled
//! activator-inhibitor steady-state system with Neumann boundary
//! conditions.
//!
//! The crate computes the two opposite constant-sign solutions inside
//! certified sub/supersolution rectangles, continues the regularized system
//! toward a sign-synchronized nodal candidate, and estimates the topological
//! degrees behind the existence argument, certifying every inequality the
//! construction rests on at the discrete level.

pub mod cli;
pub mod config;
pub mod degree;
pub mod error;
pub mod grid;
pub mod linear;
pub mod model;
pub mod nodal;
mod newton;
pub mod sign_solver;
pub mod subsup;

pub use error::{Error, Result};
pub use grid::{assemble_neumann_operator, build_grid, integrate, Field, Grid, NeumannOperator};
pub use linear::{principal_eigenpair, solve_linear, EigenPair};
pub use model::{F2Exponents, ProblemParams, TruncationEnv};
pub use subsup::{choose_constants, Certificate, CertifiedSetup, Constants};
