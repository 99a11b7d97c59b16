//! Sparse models, hard-thresholding projection, the IHT solver and the
//! least-squares refit on a selected support.

mod model;
mod refit;
mod solver;

pub use model::{project_sparse, SparseModel};
pub use refit::{refit_least_squares, Refit};
pub use solver::{
    fit, fit_from, iht_step, normalized_step, FitResult, IhtConfig, IhtState, StepOutcome,
    Termination,
};
