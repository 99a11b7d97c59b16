use crate::error::{Error, Result};
use crate::geno_matrix::{ActiveBlock, Design};

use super::SparseModel;

/// A column whose component orthogonal to the earlier columns is below this
/// fraction of its norm is treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Least-squares coefficients on an active set.
#[derive(Clone, Debug, PartialEq)]
pub struct Refit {
    pub model: SparseModel,
    /// Predictor indices dropped as linearly dependent on lower indices.
    pub dropped: Vec<usize>,
}

impl Refit {
    pub fn rank_deficient(&self) -> bool {
        !self.dropped.is_empty()
    }
}

/// Householder QR that admits columns left to right and skips any column
/// dependent on those already admitted. Returns one coefficient per column
/// (0 for skipped columns) and the skipped column positions.
pub(crate) fn greedy_qr_solve(block: &ActiveBlock, y: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = block.n_rows();
    let m = block.n_cols();
    let mut a = block.values().to_vec();
    let mut qty = y.to_vec();
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let mut skipped = Vec::new();

    for c in 0..m {
        let col = &mut a[c * n..(c + 1) * n];
        let orig_norm = norm(col);
        for (row, v, tau) in &reflectors {
            apply_reflector(v, *tau, &mut col[*row..]);
        }
        let r = kept.len();
        let tail = &mut col[r..];
        let tail_norm = norm(tail);
        if orig_norm == 0.0 || tail_norm <= RANK_TOL * orig_norm {
            skipped.push(c);
            continue;
        }
        let alpha = if tail[0] > 0.0 { -tail_norm } else { tail_norm };
        let mut v = tail.to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let tau = 2.0 / vv;
        tail[0] = alpha;
        tail[1..].iter_mut().for_each(|x| *x = 0.0);
        apply_reflector(&v, tau, &mut qty[r..]);
        reflectors.push((r, v, tau));
        kept.push(c);
    }

    // Back-substitution on the upper-triangular factor of the kept columns.
    let rank = kept.len();
    let mut sol = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut acc = qty[i];
        for l in i + 1..rank {
            acc -= a[kept[l] * n + i] * sol[l];
        }
        sol[i] = acc / a[kept[i] * n + i];
    }
    let mut coefs = vec![0.0; m];
    for (pos, &c) in kept.iter().enumerate() {
        coefs[c] = sol[pos];
    }
    (coefs, skipped)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `x ← (I − τ v vᵀ) x`
fn apply_reflector(v: &[f64], tau: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let s = tau * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

/// Exact least squares of `y` on the standardized columns in `support`
/// plus every covariate column.
///
/// Dependent columns are dropped in favour of lower predictor indices and
/// reported in [`Refit::dropped`].
pub fn refit_least_squares<D: Design + ?Sized>(
    design: &D,
    y: &[f64],
    support: &[usize],
) -> Result<Refit> {
    let n = design.n_samples();
    let p = design.n_genetic();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: n,
            found: y.len(),
        });
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= p) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            bound: p,
        });
    }
    let mut active = support.to_vec();
    active.sort_unstable();
    active.dedup();
    let n_support = active.len();
    let active_total = n_support + design.n_covariates();
    if active_total > n {
        return Err(Error::TooManyPredictors {
            active: active_total,
            n,
        });
    }
    active.extend(p..design.n_predictors());
    let block = design.decompress_active(&active)?;
    let (coefs, skipped) = greedy_qr_solve(&block, y);
    if coefs.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("refit coefficients"));
    }
    let entries: Vec<(usize, f64)> = active[..n_support]
        .iter()
        .copied()
        .zip(coefs[..n_support].iter().copied())
        .collect();
    let model = SparseModel::from_entries(p, n_support, entries, coefs[n_support..].to_vec())?;
    Ok(Refit {
        model,
        dropped: skipped.into_iter().map(|c| active[c]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geno_matrix::{CovariateBlock, DenseDesign};

    #[test]
    fn intercept_only_gives_mean() {
        let d = DenseDesign::from_raw(4, 1, vec![0.0, 1.0, 2.0, 3.0])
            .unwrap()
            .with_covariates(Arc::new(CovariateBlock::intercept(4)))
            .unwrap();
        let y = [1.0, 2.0, 4.0, 9.0];
        let fit = refit_least_squares(&d, &y, &[]).unwrap();
        assert!((fit.model.covariates()[0] - 4.0).abs() < 1e-14);
        assert!(fit.model.support().is_empty());
    }

    #[test]
    fn orthonormal_columns_give_projections() {
        // Orthogonal ±1 columns, each with mean zero.
        let raw = vec![
            1.0, -1.0, 1.0, -1.0, //
            1.0, 1.0, -1.0, -1.0,
        ];
        let d = DenseDesign::from_raw(4, 2, raw).unwrap();
        let y = [3.0, -1.0, 0.5, 2.0];
        let fit = refit_least_squares(&d, &y, &[0, 1]).unwrap();
        for j in 0..2 {
            let col = d.column(j);
            let xty: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
            let xtx: f64 = col.iter().map(|a| a * a).sum();
            assert!((fit.model.coefficient(j) - xty / xtx).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_column_is_dropped_keeping_lower_index() {
        let raw = vec![
            0.0, 1.0, 2.0, 1.0, 0.0, //
            0.0, 1.0, 2.0, 1.0, 0.0, //
            1.0, 0.0, 1.0, 2.0, 2.0,
        ];
        let d = DenseDesign::from_raw(5, 3, raw).unwrap();
        let y = [1.0, 2.0, 3.0, 0.0, 1.0];
        let fit = refit_least_squares(&d, &y, &[0, 1, 2]).unwrap();
        assert_eq!(fit.dropped, vec![1]);
        assert!(fit.rank_deficient());
        assert_eq!(fit.model.support(), &[0, 2]);
    }

    #[test]
    fn too_many_predictors() {
        let d = DenseDesign::from_raw(2, 3, vec![0.0, 1.0, 1.0, 0.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            refit_least_squares(&d, &[1.0, 2.0], &[0, 1, 2]),
            Err(Error::TooManyPredictors { .. })
        ));
    }
}
