//! Sparse regression by iterative hard thresholding on PLINK 2-bit genotypes.
//!
//! Genotypes stay packed in memory; the design operators standardize on the
//! fly. On top of those sit the IHT solver, q-fold cross-validation over a
//! sparsity path and a planted-model simulation harness.

pub mod bench;
pub mod error;
pub mod geno_matrix;
pub mod iht;
pub mod model_select;
pub mod plink_io;
pub mod simulate;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    struct Readme;
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/packed-genotypes.md")]
    struct PackedGenotypes;
    #[doc = include_str!("../../../book/src/standardization.md")]
    struct Standardization;
    #[doc = include_str!("../../../book/src/iht.md")]
    struct Iht;
    #[doc = include_str!("../../../book/src/cross-validation.md")]
    struct CrossValidation;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
