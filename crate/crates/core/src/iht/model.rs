use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Coefficients of a sparse linear model over `p` genetic predictors and
/// `c` unpenalized covariates.
///
/// Genetic coefficients are stored sparsely: `support` is sorted and every
/// stored value is nonzero. At most `k` genetic coefficients are nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseModel {
    n_genetic: usize,
    k: usize,
    support: Vec<usize>,
    values: Vec<f64>,
    covariates: Vec<f64>,
}

impl SparseModel {
    /// The all-zero model.
    pub fn zeros(n_genetic: usize, n_covariates: usize, k: usize) -> Self {
        Self {
            n_genetic,
            k,
            support: Vec::new(),
            values: Vec::new(),
            covariates: vec![0.0; n_covariates],
        }
    }

    /// Builds from `(index, value)` pairs; zero values are dropped.
    pub fn from_entries(
        n_genetic: usize,
        k: usize,
        mut entries: Vec<(usize, f64)>,
        covariates: Vec<f64>,
    ) -> Result<Self> {
        entries.retain(|&(_, b)| b != 0.0);
        entries.sort_by_key(|&(j, _)| j);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfig("duplicate predictor index".into()));
        }
        if let Some(&(j, _)) = entries.last() {
            if j >= n_genetic {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    bound: n_genetic,
                });
            }
        }
        if entries.len() > k {
            return Err(Error::InvalidConfig(format!(
                "{} nonzero coefficients exceed the budget k = {k}",
                entries.len()
            )));
        }
        if entries.iter().any(|(_, b)| !b.is_finite()) || covariates.iter().any(|b| !b.is_finite())
        {
            return Err(Error::NonFinite("model coefficients"));
        }
        let (support, values) = entries.into_iter().unzip();
        Ok(Self {
            n_genetic,
            k,
            support,
            values,
            covariates,
        })
    }

    pub fn n_genetic(&self) -> usize {
        self.n_genetic
    }

    pub fn n_predictors(&self) -> usize {
        self.n_genetic + self.covariates.len()
    }

    /// Sparsity budget.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Sorted indices of the nonzero genetic coefficients.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Nonzero genetic coefficients, aligned with [`support`](Self::support).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn genetic_entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Coefficient of predictor `j` (genetic or covariate).
    pub fn coefficient(&self, j: usize) -> f64 {
        if j >= self.n_genetic {
            return self.covariates[j - self.n_genetic];
        }
        match self.support.binary_search(&j) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Full `P`-vector of coefficients.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_genetic];
        for (j, b) in self.genetic_entries() {
            out[j] = b;
        }
        out.extend_from_slice(&self.covariates);
        out
    }

    /// Predictor indices of the support followed by all covariates.
    pub(crate) fn active_predictors(&self) -> Vec<usize> {
        let mut idx = self.support.clone();
        idx.extend(self.n_genetic..self.n_predictors());
        idx
    }

    /// Coefficients aligned with [`active_predictors`](Self::active_predictors).
    pub(crate) fn active_coefficients(&self) -> Vec<f64> {
        let mut c = self.values.clone();
        c.extend_from_slice(&self.covariates);
        c
    }

    pub(crate) fn with_budget(mut self, k: usize) -> Self {
        self.k = k.max(self.support.len());
        self
    }
}

/// Orders indices by decreasing magnitude, ties to the lower index.
fn magnitude_order(values: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b))
}

/// Indices of the `k` largest-magnitude nonzero entries of `values`,
/// sorted ascending. Ties go to the lower index.
pub(crate) fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&j| values[j] != 0.0).collect();
    if idx.len() > k {
        if k == 0 {
            idx.clear();
        } else {
            idx.select_nth_unstable_by(k - 1, magnitude_order(values));
            idx.truncate(k);
        }
    }
    idx.sort_unstable();
    idx
}

/// Hard-thresholding projection onto the `k`-sparse set.
///
/// `beta` holds `n_genetic` genetic coefficients followed by covariates.
/// The `k` largest genetic entries by magnitude survive (lower index wins
/// ties); covariate entries pass through untouched. Average cost is linear
/// in `P` (quickselect).
pub fn project_sparse(beta: &[f64], n_genetic: usize, k: usize) -> SparseModel {
    assert!(n_genetic <= beta.len(), "genetic block longer than beta");
    let (genetic, covariates) = beta.split_at(n_genetic);
    let support = top_k_indices(genetic, k);
    let values = support.iter().map(|&j| genetic[j]).collect();
    SparseModel {
        n_genetic,
        k,
        support,
        values,
        covariates: covariates.to_vec(),
    }
}
