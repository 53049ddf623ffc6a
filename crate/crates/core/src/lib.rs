//! All-at-once solvers for θ-method discretizations of evolutionary PDEs.
//!
//! The crate assembles the space-major all-at-once system
//! `A = G ⊗ I_M + I_N ⊗ Q_θ` for variable-coefficient diffusion and
//! multi-dimensional Riesz fractional diffusion, and solves it with restarted
//! GMRES under the block-diagonalizable preconditioner
//! `P_ω = ωP̂ ⊗ I_M + I_N ⊗ Q_θ`, where `P̂` is diagonalized by the
//! multi-dimensional sine transform.
//!
//! Module map:
//!
//! - [`structured`]: Toeplitz matvecs, triangular Toeplitz inversion, DST-I,
//!   τ-matrix eigenvalues.
//! - [`discretization`]: problem description, spatial operators, `Q_θ`,
//!   the all-at-once operator and its right-hand side.
//! - [`preconditioner`]: the one-sided preconditioner, its two-sided split,
//!   spectral bounds and the choice of `ω`.
//! - [`krylov`]: restarted GMRES with left preconditioning.
//! - [`verification`]: dense oracles and numerical certificates of the
//!   convergence theory.
//! - [`problems`]: the benchmark problems with known exact solutions.
//! - [`solve`]: end-to-end driver from a problem to a solution and report.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretization;
pub mod error;
pub mod krylov;
pub mod preconditioner;
pub mod problems;
pub mod solve;
pub mod structured;
pub mod verification;

pub use error::{Error, Result};
