//! Linear-algebra kernels over standardized genotype designs.
//!
//! A design has `n` samples and `P = p + c` predictors: `p` genetic columns
//! followed by `c` covariate columns. Genetic columns are standardized as
//! `(x_j - u_j) v_j`, with missing calls contributing 0. Two implementations
//! share the [`Design`] trait: [`StandardizedView`] works straight off the
//! 2-bit packed codes, [`DenseDesign`] holds the standardized matrix in
//! `f64` and doubles as the reference path.

mod covariates;
mod dense;
mod packed;
mod view;

pub use covariates::CovariateBlock;
pub use dense::DenseDesign;
pub use packed::{
    code_to_dosage, column_stats, dosage_to_code, pack_codes, unpack_codes, PackedGenotypeMatrix,
    CODE_HET, CODE_HOM_A1, CODE_HOM_A2, CODE_MISSING,
};
pub use view::StandardizedView;

pub(crate) use packed::bytes_for;

use crate::error::{Error, Result};
use crate::iht::SparseModel;

/// Accumulation precision for the gradient sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

/// Where the standardization statistics of a resampled design come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum StandardizeMode {
    /// Recompute on the training rows; test rows reuse the training statistics.
    #[default]
    TrainingFold,
    /// Keep the statistics of the full design for every subset.
    Global,
}

/// Operator interface shared by packed and dense designs.
pub trait Design: Sync {
    fn n_samples(&self) -> usize;
    fn n_genetic(&self) -> usize;
    fn n_covariates(&self) -> usize;

    fn n_predictors(&self) -> usize {
        self.n_genetic() + self.n_covariates()
    }

    /// `X_st β + C β_cov`, touching only the active genetic columns.
    fn ax(&self, model: &SparseModel) -> Result<Vec<f64>>;

    /// `[X_stᵀ r; Cᵀ r]`, a full sweep over all `P` predictors.
    fn aty(&self, r: &[f64]) -> Result<Vec<f64>>;

    /// Dense standardized columns for the given predictor indices, in
    /// ascending index order.
    fn decompress_active(&self, support: &[usize]) -> Result<ActiveBlock>;

    /// Human-readable label of predictor `j`.
    fn predictor_label(&self, j: usize) -> String {
        if j < self.n_genetic() {
            format!("snp{j}")
        } else {
            format!("cov{}", j - self.n_genetic())
        }
    }
}

/// Designs that can be split into training and test rows.
pub trait Resample: Design + Sized {
    fn split_rows(
        &self,
        train: &[usize],
        test: &[usize],
        mode: StandardizeMode,
    ) -> Result<(Self, Self)>;
}

/// Dense column-major block of standardized predictor columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveBlock {
    n: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl ActiveBlock {
    pub(crate) fn new(n: usize, indices: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * indices.len());
        Self { n, indices, values }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.indices.len()
    }

    /// Predictor indices of the columns, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.values[c * self.n..(c + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ_c coefs[c] · column(c)`, summed in column order.
    pub fn matvec(&self, coefs: &[f64]) -> Vec<f64> {
        assert_eq!(coefs.len(), self.n_cols());
        let mut out = vec![0.0; self.n];
        for (c, &b) in coefs.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.column(c)) {
                *o += b * x;
            }
        }
        out
    }

    /// Column inner products with `r`.
    pub fn tmatvec(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n);
        (0..self.n_cols())
            .map(|c| self.column(c).iter().zip(r).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Sorted, deduplicated copy of `support`, validated against `bound`.
pub(crate) fn normalize_support(support: &[usize], bound: usize) -> Result<Vec<usize>> {
    let mut idx = support.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if let Some(&last) = idx.last() {
        if last >= bound {
            return Err(Error::IndexOutOfRange { index: last, bound });
        }
    }
    Ok(idx)
}

pub(crate) fn check_model_shape(
    design: &(impl Design + ?Sized),
    model: &SparseModel,
) -> Result<()> {
    if model.n_genetic() != design.n_genetic() {
        return Err(Error::DimensionMismatch {
            what: "model genetic predictors",
            expected: design.n_genetic(),
            found: model.n_genetic(),
        });
    }
    if model.covariates().len() != design.n_covariates() {
        return Err(Error::DimensionMismatch {
            what: "model covariate coefficients",
            expected: design.n_covariates(),
            found: model.covariates().len(),
        });
    }
    Ok(())
}
