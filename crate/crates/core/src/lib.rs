//! Joint elementary estimation of K related sparse Gaussian graphical models
//! with prior knowledge encoded as positive weight matrices.
//!
//! The pipeline is:
//!
//! 1. [`estimator::sample_covariance`] per task,
//! 2. [`estimator::select_v`] + [`estimator::backward_map`] to get the proxy
//!    backward maps `[T_v(Σ̂⁽ⁱ⁾)]⁻¹`,
//! 3. [`entry_lp::estimate`], which splits the joint program into one small
//!    linear program per matrix position and solves them independently.
//!
//! [`simgen`] builds synthetic ground truths and samples, [`evalx`] scores
//! estimated graphs against them.

pub mod entry_lp;
pub mod error;
pub mod estimator;
pub mod evalx;
pub mod io;
pub mod kw_norm;
pub mod simgen;

pub use entry_lp::{estimate, estimate_with_threads, lambda_grid, solve_entry, EntryProblem, EntrySolution};
pub use error::{JeekError, Result};
pub use estimator::{
    backward_map, default_v_grid, sample_covariance, select_v, soft_threshold_matrix, BackwardMap,
    CovarianceSet, TaskDataset,
};
pub use kw_norm::{KnowledgeWeights, PrecisionDecomposition};

pub use nalgebra::DMatrix;

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;
