//! Grouped sparse regression with l1-lq penalties.
//!
//! The toolkit fits the penalized least-squares estimator
//!
//! ```text
//! argmin_b  (1/2n) ||y - X b||_2^2  +  lambda * sum_j d_j^(1/q') ||b_j||_q
//! ```
//!
//! for any within-group exponent `q` in `[1, inf]` (`q = 1` is the lasso,
//! `q = 2` the group lasso, `q = inf` the max-norm variant), certifies
//! solutions through their KKT conditions, reduces certified solutions to
//! at most `n` active groups, computes design-condition diagnostics and
//! theoretical bound values, and runs seeded Monte Carlo studies of
//! support recovery, error scaling, and constrained-risk behavior.
//!
//! Modules
//! - [`model`]: grouped designs, penalty specification, norms, objective.
//! - [`prox`]: ball projections, proximal operators, subgradient tests.
//! - [`solver`]: blockwise coordinate descent, paths, budget constraints.
//! - [`certify`]: KKT certificates and the compact-solution reduction.
//! - [`diagnostics`]: operator norms, design conditions, bound evaluators.
//! - [`experiments`]: instance generators and Monte Carlo harnesses.
//! - [`cli`]: the `grplq` command-line interface.
//! - [`rng`]: the documented counter-based generator behind every draw.

pub mod certify;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod prox;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
