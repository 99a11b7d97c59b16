//! Planted-model simulations: synthetic genotypes, phenotypes drawn from a
//! sparse true model, and the precision / recall / MSE / heritability
//! metrics used to score a cross-validated fit.

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geno_matrix::{Design, PackedGenotypeMatrix, Resample};
use crate::iht::{IhtConfig, SparseModel};
use crate::model_select::{cv_iht, predict, CvOptions, CvPlan};

/// splitmix64 finalizer, used to derive independent RNG streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `parts` under a base seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenotypeSimConfig {
    /// Minor allele frequencies are drawn uniformly from this range.
    pub maf_range: (f64, f64),
    pub missing_rate: f64,
}

impl Default for GenotypeSimConfig {
    fn default() -> Self {
        Self {
            maf_range: (0.05, 0.5),
            missing_rate: 0.0,
        }
    }
}

/// Unrelated samples in Hardy-Weinberg equilibrium, independent markers.
pub fn synthetic_genotypes(
    n: usize,
    p: usize,
    config: &GenotypeSimConfig,
    seed: u64,
) -> Result<PackedGenotypeMatrix> {
    let (lo, hi) = config.maf_range;
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidConfig(format!("bad MAF range ({lo}, {hi})")));
    }
    if !(0.0..1.0).contains(&config.missing_rate) {
        return Err(Error::InvalidConfig(format!(
            "missing rate {} outside [0, 1)",
            config.missing_rate
        )));
    }
    let dosages: Vec<Option<u8>> = (0..p)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[j as u64]));
            let maf = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            (0..n)
                .map(|_| {
                    if config.missing_rate > 0.0 && rng.random_bool(config.missing_rate) {
                        None
                    } else {
                        Some(u8::from(rng.random_bool(maf)) + u8::from(rng.random_bool(maf)))
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    PackedGenotypeMatrix::from_dosages(n, p, &dosages)
}

/// Parameters of one planted model.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSpec {
    pub k_true: usize,
    /// Base variance of causal effects.
    pub effect_variance: f64,
    /// Effects are drawn from `N(0, effect_variance / snr_divisor)`.
    pub snr_divisor: f64,
    pub noise_variance: f64,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(k_true: usize, snr_divisor: f64, seed: u64) -> Self {
        Self {
            k_true,
            effect_variance: 0.01,
            snr_divisor,
            noise_variance: 0.01,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_true == 0 {
            return Err(Error::InvalidConfig("k_true must be at least 1".into()));
        }
        if !(self.effect_variance > 0.0 && self.noise_variance > 0.0 && self.snr_divisor > 0.0) {
            return Err(Error::InvalidConfig(
                "effect variance, noise variance and SNR divisor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `(y, β_true)` with `y = X_st β_true + ε`.
pub fn simulate_phenotype<D: Design + ?Sized>(
    design: &D,
    spec: &SimulationSpec,
) -> Result<(Vec<f64>, SparseModel)> {
    spec.validate()?;
    let p = design.n_genetic();
    if spec.k_true > p {
        return Err(Error::InvalidConfig(format!(
            "k_true = {} exceeds the {p} available markers",
            spec.k_true
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut causal = rand::seq::index::sample(&mut rng, p, spec.k_true).into_vec();
    causal.sort_unstable();
    let effect = Normal::new(0.0, (spec.effect_variance / spec.snr_divisor).sqrt())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let entries: Vec<(usize, f64)> = causal
        .iter()
        .map(|&j| (j, effect.sample(&mut rng)))
        .collect();
    let truth =
        SparseModel::from_entries(p, spec.k_true, entries, vec![0.0; design.n_covariates()])?;
    let noise = Normal::new(0.0, spec.noise_variance.sqrt())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut y = design.ax(&truth)?;
    for v in &mut y {
        *v += noise.sample(&mut rng);
    }
    Ok((y, truth))
}

/// Sample variance with the n-1 denominator.
pub fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn gather(x: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| x[i]).collect()
}

/// `Var(signal) / Var(y)`.
fn variance_ratio(signal: &[f64], y: &[f64]) -> Result<f64> {
    let var_y = sample_variance(y);
    if !(var_y > 0.0) {
        return Err(Error::ConstantResponse);
    }
    Ok(sample_variance(signal) / var_y)
}

/// `Var(X_st β) / Var(y)`. Not clamped: overfit models can exceed 1.
pub fn heritability<D: Design + ?Sized>(design: &D, beta: &SparseModel, y: &[f64]) -> Result<f64> {
    if y.len() != design.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: design.n_samples(),
            found: y.len(),
        });
    }
    // Genetic part only: covariates are not heritable signal.
    let genetic = SparseModel::from_entries(
        beta.n_genetic(),
        beta.k(),
        beta.genetic_entries().collect(),
        vec![0.0; beta.covariates().len()],
    )?;
    variance_ratio(&design.ax(&genetic)?, y)
}

/// `(|S ∩ T| / |S|, |S ∩ T| / |T|)`; precision is 0 for an empty selection
/// and recall is 0 for an empty truth set.
pub fn precision_recall(selected: &[usize], truth: &[usize]) -> (f64, f64) {
    let truth: BTreeSet<usize> = truth.iter().copied().collect();
    let selected: BTreeSet<usize> = selected.iter().copied().collect();
    let hits = selected.intersection(&truth).count() as f64;
    let precision = if selected.is_empty() {
        0.0
    } else {
        hits / selected.len() as f64
    };
    let recall = if truth.is_empty() {
        0.0
    } else {
        hits / truth.len() as f64
    };
    (precision, recall)
}

/// How the sparsity path is laid out around each `k_true`.
#[derive(Clone, Debug, PartialEq)]
pub enum PathRule {
    /// The same path for every cell.
    Explicit(Vec<usize>),
    /// `k_true + step·i` for `i ∈ [−points_each_side, points_each_side]`,
    /// dropping values below 1.
    Straddle {
        step: usize,
        points_each_side: usize,
    },
    /// Every size `1, 2, …, k_true + extra`.
    Dense { extra: usize },
}

impl PathRule {
    pub fn path_for(&self, k_true: usize) -> Vec<usize> {
        match self {
            PathRule::Explicit(path) => path.clone(),
            PathRule::Straddle {
                step,
                points_each_side,
            } => {
                let (step, m) = (*step as i64, *points_each_side as i64);
                (-m..=m)
                    .map(|i| k_true as i64 + step * i)
                    .filter(|&k| k >= 1)
                    .map(|k| k as usize)
                    .collect()
            }
            PathRule::Dense { extra } => (1..=k_true + extra).collect(),
        }
    }
}

/// Grid of planted-model cells and the cross-validation protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub k_true: Vec<usize>,
    pub snr_divisors: Vec<f64>,
    pub replicates: usize,
    pub effect_variance: f64,
    pub noise_variance: f64,
    /// Fraction of samples held out for the final test MSE.
    pub test_fraction: f64,
    pub q: usize,
    pub path: PathRule,
    pub seed: u64,
}

impl ExperimentGrid {
    pub fn cells(&self) -> Vec<(usize, f64)> {
        self.k_true
            .iter()
            .flat_map(|&k| self.snr_divisors.iter().map(move |&s| (k, s)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationReport {
    pub k_true: usize,
    pub snr_divisor: f64,
    pub replicate: usize,
    pub k_selected: usize,
    pub precision: f64,
    pub recall: f64,
    pub mse_test: f64,
    pub h2_true: f64,
    pub h2_est: f64,
    pub seconds: f64,
}

fn run_replicate<D: Resample>(
    design: &D,
    grid: &ExperimentGrid,
    cell: usize,
    (k_true, snr_divisor): (usize, f64),
    replicate: usize,
    config: &IhtConfig,
    opts: &CvOptions,
) -> Result<SimulationReport> {
    let base = derive_seed(grid.seed, &[cell as u64, replicate as u64]);
    let spec = SimulationSpec {
        k_true,
        effect_variance: grid.effect_variance,
        snr_divisor,
        noise_variance: grid.noise_variance,
        seed: derive_seed(base, &[0]),
    };
    let (y, truth) = simulate_phenotype(design, &spec)?;
    // The planted signal as it entered y, before any resampling.
    let signal = design.ax(&truth)?;

    let n = design.n_samples();
    let n_test = ((grid.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(base, &[1])));
    }
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    let (train_d, test_d) = design.split_rows(&train, &test, opts.standardize)?;
    let y_train = gather(&y, &train);
    let y_test = gather(&y, &test);

    let start = Instant::now();
    let plan = CvPlan::new(
        train.len(),
        grid.q,
        grid.path.path_for(k_true),
        derive_seed(base, &[2]),
    )?;
    let report = cv_iht(&train_d, &y_train, &plan, config, opts)?;
    let seconds = start.elapsed().as_secs_f64();

    let yhat = predict(&test_d, &report.final_model)?;
    let mse_test = y_test
        .iter()
        .zip(&yhat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y_test.len() as f64;
    let (precision, recall) = precision_recall(report.final_model.support(), truth.support());
    Ok(SimulationReport {
        k_true,
        snr_divisor,
        replicate,
        k_selected: report.k_best,
        precision,
        recall,
        mse_test,
        h2_true: variance_ratio(&gather(&signal, &train), &y_train)?,
        h2_est: heritability(&train_d, &report.final_model, &y_train)?,
        seconds,
    })
}

/// Runs every `(k_true, s)` cell for `grid.replicates` replicates. Each
/// replicate draws from its own RNG stream keyed by `(seed, cell,
/// replicate)`, so results do not depend on scheduling.
pub fn run_experiment<D: Resample>(
    design: &D,
    grid: &ExperimentGrid,
    config: &IhtConfig,
    opts: &CvOptions,
) -> Result<Vec<SimulationReport>> {
    if grid.replicates == 0 {
        return Err(Error::InvalidConfig(
            "at least one replicate is required".into(),
        ));
    }
    if !(grid.test_fraction > 0.0 && grid.test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction {} outside (0, 1)",
            grid.test_fraction
        )));
    }
    let jobs: Vec<(usize, (usize, f64), usize)> = grid
        .cells()
        .into_iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..grid.replicates).map(move |r| (c, cell, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(c, cell, r)| run_replicate(design, grid, c, cell, r, config, opts))
        .collect()
}

/// Means over the replicates of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub k_true: usize,
    pub snr_divisor: f64,
    pub replicates: usize,
    pub precision: f64,
    pub recall: f64,
    pub mse_test: f64,
    pub seconds: f64,
    pub h2_true: f64,
    pub h2_est: f64,
    pub k_selected: f64,
}

/// Per-cell means, in first-appearance order.
pub fn summarize(reports: &[SimulationReport]) -> Vec<CellSummary> {
    let mut cells: Vec<(usize, f64)> = Vec::new();
    for r in reports {
        if !cells.contains(&(r.k_true, r.snr_divisor)) {
            cells.push((r.k_true, r.snr_divisor));
        }
    }
    cells
        .into_iter()
        .map(|(k, s)| {
            let rs: Vec<&SimulationReport> = reports
                .iter()
                .filter(|r| r.k_true == k && r.snr_divisor == s)
                .collect();
            let m = rs.len() as f64;
            let mean = |f: fn(&SimulationReport) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / m;
            CellSummary {
                k_true: k,
                snr_divisor: s,
                replicates: rs.len(),
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                mse_test: mean(|r| r.mse_test),
                seconds: mean(|r| r.seconds),
                h2_true: mean(|r| r.h2_true),
                h2_est: mean(|r| r.h2_est),
                k_selected: mean(|r| r.k_selected as f64),
            }
        })
        .collect()
}

/// One row per replicate. Wall-clock time is the only nondeterministic
/// column; `include_timing = false` writes it as 0.
pub fn write_reports_tsv<W: Write>(
    reports: &[SimulationReport],
    w: &mut W,
    include_timing: bool,
) -> io::Result<()> {
    writeln!(
        w,
        "k_true\tsnr_divisor\treplicate\tk_selected\tprecision\trecall\tmse\th2_true\th2_est\tseconds"
    )?;
    for r in reports {
        let secs = if include_timing { r.seconds } else { 0.0 };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:e}\t{}\t{}\t{:.6}",
            r.k_true,
            r.snr_divisor,
            r.replicate,
            r.k_selected,
            r.precision,
            r.recall,
            r.mse_test,
            r.h2_true,
            r.h2_est,
            secs
        )?;
    }
    Ok(())
}

/// Per-cell means: precision, recall, MSE and time side by side, plus the
/// heritability pair.
pub fn write_summary_tsv<W: Write>(
    cells: &[CellSummary],
    w: &mut W,
    include_timing: bool,
) -> io::Result<()> {
    writeln!(
        w,
        "k_true\tsnr_divisor\treplicates\tprecision\trecall\tmse\tseconds\th2_true\th2_est\tk_selected"
    )?;
    for c in cells {
        let secs = if include_timing { c.seconds } else { 0.0 };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{:e}\t{:.6}\t{}\t{}\t{}",
            c.k_true,
            c.snr_divisor,
            c.replicates,
            c.precision,
            c.recall,
            c.mse_test,
            secs,
            c.h2_true,
            c.h2_est,
            c.k_selected
        )?;
    }
    Ok(())
}
