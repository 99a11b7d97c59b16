use std::sync::Arc;

use rayon::prelude::*;

use super::{
    check_model_shape, normalize_support, ActiveBlock, CovariateBlock, Design,
    PackedGenotypeMatrix, Resample, StandardizeMode,
};
use crate::error::{Error, Result};
use crate::iht::SparseModel;

const COLUMN_CHUNK: usize = 256;

/// Floating-point design matrix, standardized column by column.
///
/// Keeps the raw values (`NaN` = missing) so resampled designs can be
/// re-standardized exactly like the packed path.
#[derive(Clone, Debug)]
pub struct DenseDesign {
    n: usize,
    p: usize,
    raw: Arc<Vec<f64>>,
    values: Vec<f64>,
    means: Vec<f64>,
    precisions: Vec<f64>,
    labels: Option<Arc<Vec<String>>>,
    covariates: Option<Arc<CovariateBlock>>,
}

/// Mean and precision over the non-NaN entries, same rules as the packed path.
fn raw_column_stats(col: &[f64]) -> (f64, f64) {
    let obs: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
    if obs.is_empty() {
        return (0.0, 0.0);
    }
    let m = obs.len() as f64;
    let mean = obs.iter().sum::<f64>() / m;
    if obs.len() < 2 {
        return (mean, 0.0);
    }
    let var = obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    // exact-zero variance for integer dosages; relative floor for float input
    if var <= 1e-24 * mean.abs().max(1.0).powi(2) {
        (mean, 0.0)
    } else {
        (mean, 1.0 / var.sqrt())
    }
}

impl DenseDesign {
    /// Standardizes a column-major `n × p` matrix; `NaN` entries are missing
    /// and standardize to 0.
    pub fn from_raw(n: usize, p: usize, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "dense matrix length",
                expected: n * p,
                found: raw.len(),
            });
        }
        if raw.iter().any(|x| x.is_infinite()) {
            return Err(Error::NonFinite("dense design"));
        }
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        let (means, precisions): (Vec<f64>, Vec<f64>) = if p == 0 {
            (Vec::new(), Vec::new())
        } else {
            raw.par_chunks(n).map(raw_column_stats).unzip()
        };
        Ok(Self::assemble(n, p, Arc::new(raw), means, precisions))
    }

    /// Decodes a packed matrix, keeping its cached statistics.
    pub fn from_packed(matrix: &PackedGenotypeMatrix) -> Self {
        let raw = matrix.to_dense_raw();
        Self::assemble(
            matrix.n_samples(),
            matrix.n_variants(),
            Arc::new(raw),
            matrix.means().to_vec(),
            matrix.precisions().to_vec(),
        )
    }

    fn assemble(
        n: usize,
        p: usize,
        raw: Arc<Vec<f64>>,
        means: Vec<f64>,
        precisions: Vec<f64>,
    ) -> Self {
        let mut values = vec![0.0; n * p];
        if n > 0 {
            values.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
                let (u, v) = (means[j], precisions[j]);
                for (o, &x) in col.iter_mut().zip(&raw[j * n..(j + 1) * n]) {
                    *o = if x.is_nan() { 0.0 } else { (x - u) * v };
                }
            });
        }
        Self {
            n,
            p,
            raw,
            values,
            means,
            precisions,
            labels: None,
            covariates: None,
        }
    }

    pub fn with_covariates(mut self, covariates: Arc<CovariateBlock>) -> Result<Self> {
        if covariates.n_samples() != self.n {
            return Err(Error::DimensionMismatch {
                what: "covariate rows",
                expected: self.n,
                found: covariates.n_samples(),
            });
        }
        self.covariates = Some(covariates);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "column labels",
                expected: self.p,
                found: labels.len(),
            });
        }
        self.labels = Some(Arc::new(labels));
        Ok(self)
    }

    /// Standardized column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn precisions(&self) -> &[f64] {
        &self.precisions
    }

    pub fn covariates(&self) -> Option<&CovariateBlock> {
        self.covariates.as_deref()
    }

    /// Bytes held by the standardized `f64` matrix.
    pub fn dense_bytes(&self) -> usize {
        self.values.len() * std::mem::size_of::<f64>()
    }

    fn select_raw(&self, rows: &[usize]) -> Result<Vec<f64>> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                bound: self.n,
            });
        }
        let mut out = Vec::with_capacity(rows.len() * self.p);
        for j in 0..self.p {
            let col = &self.raw[j * self.n..(j + 1) * self.n];
            out.extend(rows.iter().map(|&i| col[i]));
        }
        Ok(out)
    }
}

impl Design for DenseDesign {
    fn n_samples(&self) -> usize {
        self.n
    }

    fn n_genetic(&self) -> usize {
        self.p
    }

    fn n_covariates(&self) -> usize {
        self.covariates.as_ref().map_or(0, |c| c.n_columns())
    }

    fn ax(&self, model: &SparseModel) -> Result<Vec<f64>> {
        check_model_shape(self, model)?;
        let mut out = vec![0.0; self.n];
        for (j, b) in model.genetic_entries() {
            for (o, &x) in out.iter_mut().zip(self.column(j)) {
                *o += b * x;
            }
        }
        if let Some(cov) = &self.covariates {
            cov.apply(model.covariates(), &mut out);
        }
        Ok(out)
    }

    fn aty(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "residual length",
                expected: self.n,
                found: r.len(),
            });
        }
        let mut out = vec![0.0; self.p];
        out.par_chunks_mut(COLUMN_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (jj, o) in chunk.iter_mut().enumerate() {
                    let col = self.column(c * COLUMN_CHUNK + jj);
                    *o = col.iter().zip(r).map(|(a, b)| a * b).sum();
                }
            });
        if let Some(cov) = &self.covariates {
            out.extend(cov.transpose_apply(r));
        }
        Ok(out)
    }

    fn decompress_active(&self, support: &[usize]) -> Result<ActiveBlock> {
        let idx = normalize_support(support, self.n_predictors())?;
        let mut values = Vec::with_capacity(self.n * idx.len());
        for &j in &idx {
            if j < self.p {
                values.extend_from_slice(self.column(j));
            } else {
                let cov = self.covariates.as_ref().expect("covariate index");
                values.extend_from_slice(cov.column(j - self.p));
            }
        }
        Ok(ActiveBlock::new(self.n, idx, values))
    }

    fn predictor_label(&self, j: usize) -> String {
        if j < self.p {
            match &self.labels {
                Some(l) => l[j].clone(),
                None => format!("snp{j}"),
            }
        } else {
            let cov = self.covariates.as_ref().expect("covariate index");
            cov.names()[j - self.p].clone()
        }
    }
}

impl Resample for DenseDesign {
    fn split_rows(
        &self,
        train: &[usize],
        test: &[usize],
        mode: StandardizeMode,
    ) -> Result<(Self, Self)> {
        let train_raw = self.select_raw(train)?;
        let test_raw = self.select_raw(test)?;
        let (means, precisions) = match mode {
            StandardizeMode::Global => (self.means.clone(), self.precisions.clone()),
            StandardizeMode::TrainingFold => {
                if train.len() < 2 {
                    return Err(Error::TooFewSamples(train.len()));
                }
                if self.p == 0 {
                    (Vec::new(), Vec::new())
                } else {
                    train_raw
                        .par_chunks(train.len())
                        .map(raw_column_stats)
                        .unzip()
                }
            }
        };
        let mut train_d = Self::assemble(
            train.len(),
            self.p,
            Arc::new(train_raw),
            means.clone(),
            precisions.clone(),
        );
        let mut test_d = Self::assemble(test.len(), self.p, Arc::new(test_raw), means, precisions);
        train_d.labels = self.labels.clone();
        test_d.labels = self.labels.clone();
        if let Some(c) = &self.covariates {
            train_d.covariates = Some(Arc::new(c.select_rows(train)?));
            test_d.covariates = Some(Arc::new(c.select_rows(test)?));
        }
        Ok((train_d, test_d))
    }
}
