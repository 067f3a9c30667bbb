//! Top-N recommendation with a sparse, nonnegative, low-rank item-item model.
//!
//! The model `W` scores user `u` on item `j` as `x_u . w_j` and is learned by
//! minimizing
//!
//! ```text
//! 1/2 ||X - XW||_F^2 + alpha ||W||_1 + beta * sum_i (1 - exp(-sigma_i(W) / delta))
//! ```
//!
//! over nonnegative `W` with zero diagonal. The last term is a smooth stand-in
//! for `rank(W)` whose gap to the true rank shrinks with `delta`.
//!
//! Modules, bottom up:
//!
//! - [`matrix`]: sparse user-item storage, dense carriers, Cholesky and SVD.
//! - [`prox`]: soft-thresholding, nonnegative projection and the singular-value
//!   prox of the rank surrogate (solved by DC iteration).
//! - [`solver`]: the augmented-Lagrangian loop.
//! - [`eval`]: scoring, Top-N lists, HR/ARHR and an ItemKNN baseline.
//! - [`data`]: triplet files, leave-one-out folds, planted synthetic data.
//! - [`cli`]: the `toprank` command line.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use matrix::{gram, solve_spd, svd, DenseMatrix, SvdResult, UserItemMatrix};
pub use prox::{
    dc_prox_scalar, nonneg_project, rank_prox, rank_surrogate, soft_threshold, surrogate_gradient,
    DcResult, DcSettings, RankSurrogateParams,
};
pub use solver::{
    solve, solve_with_progress, CoefficientMatrix, DiagMode, IterationRecord, ReportMatrix,
    SolveReport, SolverConfig, SolverState,
};
