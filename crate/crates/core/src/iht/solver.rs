//! Normalized iterative hard thresholding.
//!
//! Each iteration takes a projected gradient step
//! `β⁺ = P_k(β − μ ∇f(β))` on the loss `f(β) = ½‖y − Xβ‖²`, where `P_k`
//! keeps the `k` largest genetic coefficients and leaves covariates alone.
//! The step size is the exact line-search step along the gradient
//! restricted to the current support (plus covariates):
//! `μ = ‖g_S‖² / ‖X_S g_S‖²`. When the support leaves `S`, the step is only
//! accepted if `μ < ω = (1 − c) ‖β⁺ − β‖² / ‖X(β⁺ − β)‖²`; otherwise μ is
//! halved. Both rules guarantee `f(β⁺) ≤ f(β)`.

use crate::error::{Error, Result};
use crate::geno_matrix::{ActiveBlock, Design};

use super::model::top_k_indices;
use super::refit::greedy_qr_solve;
use super::{project_sparse, SparseModel};

#[derive(Clone, Debug, PartialEq)]
pub struct IhtConfig {
    /// Sparsity budget for the genetic block.
    pub k: usize,
    pub max_iter: usize,
    /// Convergence threshold on `‖β⁺ − β‖_∞`.
    pub tol: f64,
    /// The constant `c` in the ω bound, `0 < c < 1`.
    pub c_omega: f64,
    pub max_backtracks: usize,
}

impl IhtConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 200,
            tol: 1e-4,
            c_omega: 0.01,
            max_backtracks: 50,
        }
    }

    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if !(self.c_omega > 0.0 && self.c_omega < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "c_omega must lie in (0, 1), got {}",
                self.c_omega
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for IhtConfig {
    fn default() -> Self {
        Self::new(10)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    StepSizeCollapse,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max-iterations",
            Termination::StepSizeCollapse => "step-size collapse",
        })
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub model: SparseModel,
    /// Loss before the first step, then after every accepted step.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub backtracks: usize,
}

/// Result of a single [`iht_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    /// A new iterate was accepted; `delta_inf = ‖β⁺ − β‖_∞`.
    Moved { delta_inf: f64 },
    /// No step changes β: the iterate is a fixed point.
    Stationary,
    /// μ was halved `max_backtracks` times without satisfying the ω bound.
    StepSizeCollapse,
}

/// Per-iteration solver state.
#[derive(Clone, Debug)]
pub struct IhtState {
    pub model: SparseModel,
    /// Step size used by the last accepted step.
    pub mu: f64,
    /// `y − X_st β − C β_cov`.
    pub residuals: Vec<f64>,
    /// `X_st β + C β_cov`.
    pub fitted: Vec<f64>,
    /// `½‖residuals‖²`.
    pub loss: f64,
    /// `∇f(β) = −[X_st C]ᵀ residuals`; valid when `gradient_current`.
    pub gradient: Vec<f64>,
    pub gradient_current: bool,
    /// Standardized columns of the support followed by the covariates.
    pub active_cache: ActiveBlock,
    pub iteration: usize,
    /// Backtracks taken in the last step.
    pub backtracks: usize,
}

fn half_sq_norm(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

impl IhtState {
    /// Starting point: genetic block zero, covariates fitted to `y` by least
    /// squares.
    pub fn new<D: Design + ?Sized>(design: &D, y: &[f64], config: &IhtConfig) -> Result<Self> {
        config.validate()?;
        let n = design.n_samples();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: n,
                found: y.len(),
            });
        }
        if n < 2 {
            return Err(Error::TooFewSamples(n));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        let p = design.n_genetic();
        let c = design.n_covariates();
        let mut model = SparseModel::zeros(p, c, config.k);
        let active_cache = design.decompress_active(&model.active_predictors())?;
        if c > 0 {
            let (coefs, _) = greedy_qr_solve(&active_cache, y);
            model = SparseModel::from_entries(p, config.k, Vec::new(), coefs)?;
        }
        let fitted = active_cache.matvec(&model.active_coefficients());
        let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let loss = half_sq_norm(&residuals);
        Ok(Self {
            model,
            mu: 0.0,
            residuals,
            fitted,
            loss,
            gradient: Vec::new(),
            gradient_current: false,
            active_cache,
            iteration: 0,
            backtracks: 0,
        })
    }

    fn refresh_gradient<D: Design + ?Sized>(&mut self, design: &D) -> Result<()> {
        if !self.gradient_current {
            let mut g = design.aty(&self.residuals)?;
            g.iter_mut().for_each(|x| *x = -*x);
            self.gradient = g;
            self.gradient_current = true;
        }
        Ok(())
    }

    /// Genetic indices on which the step size is measured: the current
    /// support, or the `k` largest gradient entries when the support is
    /// empty or carries no gradient.
    fn step_support(&self, k: usize) -> Vec<usize> {
        let p = self.model.n_genetic();
        let g = &self.gradient;
        let support = self.model.support();
        let restricted: f64 = support
            .iter()
            .map(|&j| g[j] * g[j])
            .chain(g[p..].iter().map(|x| x * x))
            .sum();
        if !support.is_empty() && restricted > 0.0 {
            support.to_vec()
        } else {
            top_k_indices(&g[..p], k)
        }
    }

    fn block_for<D: Design + ?Sized>(&self, design: &D, genetic: &[usize]) -> Result<ActiveBlock> {
        let p = self.model.n_genetic();
        let cached = &self.active_cache.indices()[..self.model.support().len()];
        if cached == genetic {
            return Ok(self.active_cache.clone());
        }
        let mut idx = genetic.to_vec();
        idx.extend(p..self.model.n_predictors());
        design.decompress_active(&idx)
    }
}

/// Normalized step `‖g_S‖² / ‖X_S g_S‖²` and the block of `S` columns.
/// Returns `None` when the restricted gradient vanishes.
fn normalized_step_with_block<D: Design + ?Sized>(
    state: &IhtState,
    design: &D,
    k: usize,
) -> Result<Option<(f64, Vec<usize>, ActiveBlock)>> {
    let support = state.step_support(k);
    let p = state.model.n_genetic();
    let block = state.block_for(design, &support)?;
    let g_s: Vec<f64> = block.indices().iter().map(|&j| state.gradient[j]).collect();
    debug_assert!(support.iter().all(|&j| j < p));
    Ok(step_ratio(&block, &g_s)?.map(|mu| (mu, support, block)))
}

/// `‖g‖² / ‖B g‖²`, or `None` for `g = 0`.
fn step_ratio(block: &ActiveBlock, g: &[f64]) -> Result<Option<f64>> {
    let num: f64 = g.iter().map(|x| x * x).sum();
    if num == 0.0 {
        return Ok(None);
    }
    let xg = block.matvec(g);
    let den: f64 = xg.iter().map(|x| x * x).sum();
    if den == 0.0 {
        return Err(Error::DegenerateSupport);
    }
    let mu = num / den;
    if !mu.is_finite() {
        return Err(Error::NonFinite("step size"));
    }
    Ok(Some(mu))
}

/// The normalized step size for the current iterate.
pub fn normalized_step<D: Design + ?Sized>(
    state: &mut IhtState,
    design: &D,
    k: usize,
) -> Result<f64> {
    state.refresh_gradient(design)?;
    match normalized_step_with_block(state, design, k)? {
        Some((mu, _, _)) => Ok(mu),
        None => Err(Error::DegenerateSupport),
    }
}

/// One projected-gradient iteration with ω backtracking.
pub fn iht_step<D: Design + ?Sized>(
    state: &mut IhtState,
    design: &D,
    y: &[f64],
    config: &IhtConfig,
) -> Result<StepOutcome> {
    state.refresh_gradient(design)?;
    state.iteration += 1;
    state.backtracks = 0;
    let Some((mut mu, step_support, step_block)) =
        normalized_step_with_block(state, design, config.k)?
    else {
        return Ok(StepOutcome::Stationary);
    };

    let p = state.model.n_genetic();
    let beta = state.model.to_dense();
    loop {
        let candidate: Vec<f64> = beta
            .iter()
            .zip(&state.gradient)
            .map(|(b, g)| b - mu * g)
            .collect();
        let next = project_sparse(&candidate, p, config.k);
        let next_dense = next.to_dense();
        let mut delta_sq = 0.0;
        let mut delta_inf: f64 = 0.0;
        for (a, b) in next_dense.iter().zip(&beta) {
            let d = a - b;
            delta_sq += d * d;
            delta_inf = delta_inf.max(d.abs());
        }
        if delta_sq == 0.0 {
            return Ok(StepOutcome::Stationary);
        }

        let block =
            if next.support() == &state.active_cache.indices()[..state.model.support().len()] {
                None
            } else if next.support() == step_support.as_slice() {
                Some(step_block.clone())
            } else {
                Some(design.decompress_active(&next.active_predictors())?)
            };
        let fitted = block
            .as_ref()
            .unwrap_or(&state.active_cache)
            .matvec(&next.active_coefficients());

        // On the support the step was measured on, μ is the exact line
        // search step and descent is guaranteed.
        let same_support = next.support() == step_support.as_slice();
        let mut accept = same_support || {
            let dfit_sq: f64 = fitted
                .iter()
                .zip(&state.fitted)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let omega = if dfit_sq == 0.0 {
                f64::INFINITY
            } else {
                (1.0 - config.c_omega) * delta_sq / dfit_sq
            };
            mu < omega
        };

        if accept {
            let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            let loss = half_sq_norm(&residuals);
            if !loss.is_finite() {
                return Err(Error::NonFinite("loss"));
            }
            if loss > state.loss {
                // Only reachable through rounding near a fixed point.
                if delta_inf < config.tol {
                    return Ok(StepOutcome::Stationary);
                }
                accept = false;
            } else {
                state.model = next.with_budget(config.k);
                state.fitted = fitted;
                state.residuals = residuals;
                state.loss = loss;
                state.mu = mu;
                state.gradient_current = false;
                if let Some(b) = block {
                    state.active_cache = b;
                }
                return Ok(StepOutcome::Moved { delta_inf });
            }
        }
        debug_assert!(!accept);
        state.backtracks += 1;
        if state.backtracks > config.max_backtracks {
            return Ok(StepOutcome::StepSizeCollapse);
        }
        mu *= 0.5;
    }
}

/// Runs IHT to convergence (`‖Δβ‖_∞ < tol`) or `max_iter` iterations.
pub fn fit<D: Design + ?Sized>(design: &D, y: &[f64], config: &IhtConfig) -> Result<FitResult> {
    let mut state = IhtState::new(design, y, config)?;
    fit_from(design, y, config, &mut state)
}

/// Continues IHT from an existing state.
pub fn fit_from<D: Design + ?Sized>(
    design: &D,
    y: &[f64],
    config: &IhtConfig,
    state: &mut IhtState,
) -> Result<FitResult> {
    let mut trace = vec![state.loss];
    let mut termination = Termination::MaxIterations;
    let mut backtracks = 0;
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        let outcome = iht_step(state, design, y, config)?;
        iterations += 1;
        backtracks += state.backtracks;
        match outcome {
            StepOutcome::Stationary => {
                termination = Termination::Converged;
                break;
            }
            StepOutcome::StepSizeCollapse => {
                termination = Termination::StepSizeCollapse;
                break;
            }
            StepOutcome::Moved { delta_inf } => {
                trace.push(state.loss);
                if delta_inf < config.tol {
                    termination = Termination::Converged;
                    break;
                }
            }
        }
    }
    Ok(FitResult {
        model: state.model.clone(),
        loss_trace: trace,
        iterations,
        converged: termination == Termination::Converged,
        termination,
        backtracks,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geno_matrix::{CovariateBlock, DenseDesign};

    /// Four mutually orthogonal, mean-zero ±1 columns on 8 samples.
    fn orthogonal_design() -> DenseDesign {
        let cols: [[f64; 8]; 3] = [
            [1., -1., 1., -1., 1., -1., 1., -1.],
            [1., 1., -1., -1., 1., 1., -1., -1.],
            [1., 1., 1., 1., -1., -1., -1., -1.],
        ];
        DenseDesign::from_raw(8, 3, cols.concat()).unwrap()
    }

    #[test]
    fn zero_response_is_fixed_point() {
        let d = orthogonal_design();
        let res = fit(&d, &[0.0; 8], &IhtConfig::new(2)).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert!(res.model.support().is_empty());
    }

    #[test]
    fn one_step_on_orthogonal_design() {
        let d = orthogonal_design();
        let truth = SparseModel::from_entries(3, 1, vec![(0, 5.0)], vec![]).unwrap();
        let y = d.ax(&truth).unwrap();
        let config = IhtConfig::new(1);
        let mut state = IhtState::new(&d, &y, &config).unwrap();
        let mu = normalized_step(&mut state, &d, 1).unwrap();
        let x0ty: f64 = d.column(0).iter().zip(&y).map(|(a, b)| a * b).sum();
        let out = iht_step(&mut state, &d, &y, &config).unwrap();
        assert!(matches!(out, StepOutcome::Moved { .. }));
        assert_eq!(state.model.support(), &[0]);
        let b = state.model.coefficient(0);
        assert!((b - mu * x0ty).abs() < 1e-12);
        assert!((b - 5.0).abs() < 1e-12);
        assert!(state.loss < 1e-20);
    }

    #[test]
    fn step_ratio_on_orthonormal_and_scaled_blocks() {
        let g = [0.3, -1.7];
        let eye = ActiveBlock::new(2, vec![0, 1], vec![1.0, 0.0, 0.0, 1.0]);
        assert!((step_ratio(&eye, &g).unwrap().unwrap() - 1.0).abs() < 1e-15);
        let twice = ActiveBlock::new(2, vec![0, 1], vec![2.0, 0.0, 0.0, 2.0]);
        assert!((step_ratio(&twice, &g).unwrap().unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(step_ratio(&twice, &[0.0, 0.0]).unwrap(), None);
        let zero = ActiveBlock::new(2, vec![0], vec![0.0, 0.0]);
        assert!(matches!(
            step_ratio(&zero, &[1.0]),
            Err(Error::DegenerateSupport)
        ));
    }

    #[test]
    fn covariates_start_at_least_squares() {
        let d = orthogonal_design()
            .with_covariates(Arc::new(CovariateBlock::intercept(8)))
            .unwrap();
        let y = [3.0; 8];
        let res = fit(&d, &y, &IhtConfig::new(1)).unwrap();
        assert!((res.model.covariates()[0] - 3.0).abs() < 1e-14);
        // The residual is zero up to rounding, so any genetic entry is noise.
        assert!(res.model.genetic_entries().all(|(_, b)| b.abs() < 1e-12));
    }

    #[test]
    fn k_zero_keeps_genetic_block_empty() {
        let d = orthogonal_design()
            .with_covariates(Arc::new(CovariateBlock::intercept(8)))
            .unwrap();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let res = fit(&d, &y, &IhtConfig::new(0)).unwrap();
        assert!(res.model.support().is_empty());
        assert!((res.model.covariates()[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let mut c = IhtConfig::new(1);
        c.c_omega = 1.0;
        assert!(c.validate().is_err());
        c = IhtConfig::new(1);
        c.tol = 0.0;
        assert!(c.validate().is_err());
    }
}
