//! q-fold cross-validation over a path of sparsity levels.
//!
//! Every fold fits the whole path on the other `q − 1` folds and scores each
//! model by held-out mean squared error. The sparsity level with the lowest
//! fold-averaged MSE wins and is refit on all samples.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geno_matrix::{check_model_shape, Design, Resample, StandardizeMode};
use crate::iht::{fit, refit_least_squares, IhtConfig, SparseModel};

/// Balanced random fold labels: sizes differ by at most one.
pub fn make_folds(n: usize, q: usize, seed: u64) -> Result<Vec<usize>> {
    if q < 2 || q > n {
        return Err(Error::InvalidConfig(format!(
            "fold count q = {q} must satisfy 2 <= q <= n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % q;
    }
    Ok(folds)
}

/// Fold assignment plus the path of sparsity levels to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct CvPlan {
    pub q: usize,
    pub path: Vec<usize>,
    pub folds: Vec<usize>,
    pub seed: u64,
}

impl CvPlan {
    pub fn new(n: usize, q: usize, path: Vec<usize>, seed: u64) -> Result<Self> {
        let plan = Self {
            q,
            path,
            folds: make_folds(n, q, seed)?,
            seed,
        };
        plan.validate(n)?;
        Ok(plan)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds.len() != n {
            return Err(Error::DimensionMismatch {
                what: "fold labels",
                expected: n,
                found: self.folds.len(),
            });
        }
        if self.path.is_empty() {
            return Err(Error::InvalidConfig("sparsity path is empty".into()));
        }
        if self.path[0] < 1 || self.path.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "sparsity path must be strictly increasing and >= 1: {:?}",
                self.path
            )));
        }
        let mut sizes = vec![0usize; self.q];
        for &f in &self.folds {
            if f >= self.q {
                return Err(Error::InvalidConfig(format!(
                    "fold label {f} >= q = {}",
                    self.q
                )));
            }
            sizes[f] += 1;
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("empty fold".into()));
        }
        Ok(())
    }

    /// Training and test row indices for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.folds.len()).partition(|&i| self.folds[i] != f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOptions {
    pub standardize: StandardizeMode,
    /// Path points whose mean MSE lies within `tie_tolerance · mean(y²)` of
    /// the minimum count as tied; the smallest tied k is selected.
    pub tie_tolerance: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            standardize: StandardizeMode::TrainingFold,
            tie_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CvReport {
    pub path: Vec<usize>,
    pub q: usize,
    /// `mse[i][f]`: held-out MSE of path point `i` on fold `f`.
    pub mse: Vec<Vec<f64>>,
    pub mean_mse: Vec<f64>,
    pub best_index: usize,
    pub k_best: usize,
    /// IHT at `k_best` on all samples followed by a least-squares refit.
    pub final_model: SparseModel,
    /// Predictors dropped by the refit as linearly dependent.
    pub refit_dropped: Vec<usize>,
}

impl CvReport {
    /// Rows `k, fold, mse`.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "k\tfold\tmse")?;
        for (i, &k) in self.path.iter().enumerate() {
            for (f, v) in self.mse[i].iter().enumerate() {
                writeln!(w, "{k}\t{f}\t{v:e}")?;
            }
        }
        Ok(())
    }

    /// Rows `k, mean_mse, is_best`.
    pub fn write_summary_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "k\tmean_mse\tis_best")?;
        for (i, &k) in self.path.iter().enumerate() {
            writeln!(
                w,
                "{k}\t{:e}\t{}",
                self.mean_mse[i],
                u8::from(i == self.best_index)
            )?;
        }
        Ok(())
    }
}

/// `ŷ = X_st β + C β_cov` on a (test) design.
pub fn predict<D: Design + ?Sized>(design: &D, model: &SparseModel) -> Result<Vec<f64>> {
    check_model_shape(design, model)?;
    design.ax(model)
}

fn mean_squared_error(y: &[f64], yhat: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y.iter()
        .zip(yhat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64
}

/// Index of the smallest mean MSE, treating values within `slack` of the
/// minimum as ties resolved toward the smaller index.
pub fn select_best(mean_mse: &[f64], slack: f64) -> usize {
    let min = mean_mse.iter().copied().fold(f64::INFINITY, f64::min);
    mean_mse.iter().position(|&m| m <= min + slack).unwrap_or(0)
}

fn gather(y: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| y[i]).collect()
}

/// Held-out MSE of every path point on one fold.
fn fold_path_mse<D: Resample>(
    design: &D,
    y: &[f64],
    plan: &CvPlan,
    fold: usize,
    config: &IhtConfig,
    opts: &CvOptions,
) -> Result<Vec<f64>> {
    let annotate = |k: usize| {
        move |e: Error| Error::Fold {
            fold,
            k,
            source: Box::new(e),
        }
    };
    let (train, test) = plan.split(fold);
    let (train_d, test_d) = design
        .split_rows(&train, &test, opts.standardize)
        .map_err(annotate(0))?;
    let y_train = gather(y, &train);
    let y_test = gather(y, &test);
    let max_k = *plan.path.last().expect("validated path");
    if max_k + design.n_covariates() >= train.len() {
        return Err(annotate(max_k)(Error::TooManyPredictors {
            active: max_k + design.n_covariates(),
            n: train.len(),
        }));
    }
    plan.path
        .iter()
        .map(|&k| {
            let res = fit(&train_d, &y_train, &config.with_k(k)).map_err(annotate(k))?;
            let yhat = predict(&test_d, &res.model).map_err(annotate(k))?;
            Ok(mean_squared_error(&y_test, &yhat))
        })
        .collect()
}

/// Cross-validates the sparsity path and refits at the selected size.
pub fn cv_iht<D: Resample>(
    design: &D,
    y: &[f64],
    plan: &CvPlan,
    config: &IhtConfig,
    opts: &CvOptions,
) -> Result<CvReport> {
    let n = design.n_samples();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: n,
            found: y.len(),
        });
    }
    plan.validate(n)?;
    config.validate()?;

    // Folds are independent; each writes its own slot.
    let per_fold: Vec<Vec<f64>> = (0..plan.q)
        .into_par_iter()
        .map(|f| fold_path_mse(design, y, plan, f, config, opts))
        .collect::<Result<_>>()?;

    let r = plan.path.len();
    let mse: Vec<Vec<f64>> = (0..r)
        .map(|i| per_fold.iter().map(|fold| fold[i]).collect())
        .collect();
    let mean_mse: Vec<f64> = mse
        .iter()
        .map(|row| row.iter().sum::<f64>() / plan.q as f64)
        .collect();
    let scale = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let best_index = select_best(&mean_mse, opts.tie_tolerance * scale);
    let k_best = plan.path[best_index];

    let full = fit(design, y, &config.with_k(k_best))?;
    let refit = refit_least_squares(design, y, full.model.support())?;
    let final_model = SparseModel::from_entries(
        refit.model.n_genetic(),
        k_best,
        refit.model.genetic_entries().collect(),
        refit.model.covariates().to_vec(),
    )?;

    Ok(CvReport {
        path: plan.path.clone(),
        q: plan.q,
        mse,
        mean_mse,
        best_index,
        k_best,
        final_model,
        refit_dropped: refit.dropped,
    })
}
