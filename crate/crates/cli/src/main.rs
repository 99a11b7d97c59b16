use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use iht_gwas::bench::{time_path, PathTiming};
use iht_gwas::geno_matrix::{DenseDesign, StandardizeMode};
use iht_gwas::iht::{fit, refit_least_squares, IhtConfig};
use iht_gwas::model_select::{cv_iht, CvOptions, CvPlan};
use iht_gwas::simulate::{
    run_experiment, simulate_phenotype, summarize, write_reports_tsv, write_summary_tsv,
    ExperimentGrid, PathRule, SimulationSpec,
};

mod inputs;
mod report;

use inputs::{DataArgs, SyntheticArgs};
use report::Metadata;

#[derive(Parser, Debug)]
#[command(
    name = "iht",
    version,
    about = "Sparse regression on PLINK genotypes by iterative hard thresholding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model with a fixed number of markers.
    Fit(FitArgs),
    /// Choose the model size by q-fold cross-validation.
    Cv(CvArgs),
    /// Score recovery on phenotypes simulated from planted models.
    Simulate(SimulateArgs),
    /// Time a sparsity path on packed and dense designs.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    /// Output prefix.
    #[arg(long, default_value = "iht")]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Convergence threshold on the largest coefficient change.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

impl Common {
    fn iht_config(&self, k: usize) -> IhtConfig {
        IhtConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            ..IhtConfig::new(k)
        }
    }
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Number of markers in the model.
    #[arg(long)]
    k: usize,
}

#[derive(Args, Debug, Clone)]
struct CvArgs {
    #[command(flatten)]
    common: Common,
    /// Model sizes: `start:stop:step`, a comma list, or a single value.
    #[arg(long, default_value = "1:20:1", value_parser = parse_path)]
    path: SizePath,
    /// Number of folds.
    #[arg(long, default_value_t = 5)]
    q: usize,
    /// Standardize every fold with statistics from all samples.
    #[arg(long)]
    global_standardize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PathKind {
    /// `k_true ± step·i` for `i` up to --path-points on each side.
    Straddle,
    /// Every size from 1 to `k_true + --dense-extra`.
    Dense,
}

#[derive(Args, Debug, Clone)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, value_delimiter = ',', default_value = "20,40")]
    k_true: Vec<usize>,
    /// Effect-size divisors `s`: effects are drawn from N(0, effect_variance / s).
    #[arg(long = "snr", value_delimiter = ',', default_value = "1,10")]
    snr_divisors: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    replicates: usize,
    #[arg(long, default_value_t = 5)]
    q: usize,
    /// Explicit path shared by every cell; overrides --path-kind.
    #[arg(long, value_parser = parse_path)]
    path: Option<SizePath>,
    #[arg(long, value_enum, default_value_t = PathKind::Straddle)]
    path_kind: PathKind,
    #[arg(long, default_value_t = 5)]
    path_step: usize,
    #[arg(long, default_value_t = 4)]
    path_points: usize,
    #[arg(long, default_value_t = 100)]
    dense_extra: usize,
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0.01)]
    effect_variance: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_variance: f64,
    /// Write 0 in the seconds column so tables are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    /// Packed genotypes, one thread.
    Packed,
    /// Packed genotypes, --threads threads.
    PackedMt,
    /// Dense standardized matrix, one thread.
    Dense,
}

#[derive(Args, Debug, Clone)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value = "5:100:5", value_parser = parse_path)]
    path: SizePath,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "packed,packed-mt,dense"
    )]
    modes: Vec<BenchMode>,
    /// Largest dense matrix allowed, in MiB.
    #[arg(long, default_value_t = 4096)]
    dense_cap_mb: usize,
    /// Causal markers in the simulated phenotype (when --pheno is absent).
    #[arg(long, default_value_t = 10)]
    k_true: usize,
}

/// A list of model sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
struct SizePath(Vec<usize>);

fn parse_path(s: &str) -> Result<SizePath, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad model size {t:?}: {e}"))
    };
    let path = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (start, stop, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(format!("expected start:stop:step, got {s:?}")),
        };
        if step == 0 {
            return Err("path step must be positive".into());
        }
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if path.is_empty() {
        return Err(format!("empty path {s:?}"));
    }
    Ok(SizePath(path))
}

/// Debug rendering of the arguments without thread count or output prefix.
fn config_text<T: std::fmt::Debug + Clone>(
    args: &T,
    common: impl Fn(&mut T) -> &mut Common,
) -> String {
    let mut stripped = args.clone();
    let c = common(&mut stripped);
    c.threads = 1;
    c.out = PathBuf::new();
    format!("{stripped:?}")
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let common = &args.common;
    let meta = Metadata::new("fit", &config_text(args, |a| &mut a.common), common.seed);
    let data = inputs::load(&common.data, true, None)?;
    let view = data.view()?;
    let y = data.response()?;

    let start = Instant::now();
    let config = common.iht_config(args.k);
    let result = fit(&view, y, &config)?;
    let refit = refit_least_squares(&view, y, result.model.support())?;
    let seconds = start.elapsed().as_secs_f64();

    let mut w = report::create(&common.out, "model.tsv", &meta)?;
    report::write_model(&mut w, &refit.model, &data.variants, &data.covariates)?;
    w.flush()?;

    let mut log = report::create(&common.out, "log", &meta)?;
    writeln!(log, "samples\t{}", view.matrix().n_samples())?;
    writeln!(log, "markers\t{}", view.matrix().n_variants())?;
    writeln!(log, "covariates\t{}", data.covariates.n_columns())?;
    writeln!(log, "k\t{}", args.k)?;
    writeln!(log, "iterations\t{}", result.iterations)?;
    writeln!(log, "termination\t{}", result.termination)?;
    writeln!(log, "backtracks\t{}", result.backtracks)?;
    writeln!(log, "refit_dropped\t{:?}", refit.dropped)?;
    writeln!(log, "seconds\t{seconds:.6}")?;
    writeln!(log, "iteration\tloss")?;
    for (i, loss) in result.loss_trace.iter().enumerate() {
        writeln!(log, "{i}\t{loss:e}")?;
    }
    log.flush()?;
    Ok(())
}

fn run_cv(args: &CvArgs) -> Result<()> {
    let common = &args.common;
    let meta = Metadata::new("cv", &config_text(args, |a| &mut a.common), common.seed);
    let data = inputs::load(&common.data, true, None)?;
    let view = data.view()?;
    let y = data.response()?;

    let start = Instant::now();
    let plan = CvPlan::new(y.len(), args.q, args.path.0.clone(), common.seed)?;
    let opts = CvOptions {
        standardize: if args.global_standardize {
            StandardizeMode::Global
        } else {
            StandardizeMode::TrainingFold
        },
        ..CvOptions::default()
    };
    let report = cv_iht(&view, y, &plan, &common.iht_config(1), &opts)?;
    let seconds = start.elapsed().as_secs_f64();

    let mut w = report::create(&common.out, "cv.tsv", &meta)?;
    report.write_tsv(&mut w)?;
    w.flush()?;
    let mut w = report::create(&common.out, "summary.tsv", &meta)?;
    report.write_summary_tsv(&mut w)?;
    w.flush()?;
    let mut w = report::create(&common.out, "model.tsv", &meta)?;
    report::write_model(
        &mut w,
        &report.final_model,
        &data.variants,
        &data.covariates,
    )?;
    w.flush()?;

    let mut log = report::create(&common.out, "log", &meta)?;
    writeln!(log, "samples\t{}", y.len())?;
    writeln!(log, "folds\t{}", args.q)?;
    writeln!(log, "k_best\t{}", report.k_best)?;
    writeln!(log, "refit_dropped\t{:?}", report.refit_dropped)?;
    writeln!(log, "seconds\t{seconds:.6}")?;
    log.flush()?;
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let common = &args.common;
    let meta = Metadata::new(
        "simulate",
        &config_text(args, |a| &mut a.common),
        common.seed,
    );
    let data = inputs::load(&common.data, false, Some((&args.synthetic, common.seed)))?;
    let view = data.view()?;

    let path = match (&args.path, args.path_kind) {
        (Some(p), _) => PathRule::Explicit(p.0.clone()),
        (None, PathKind::Straddle) => PathRule::Straddle {
            step: args.path_step,
            points_each_side: args.path_points,
        },
        (None, PathKind::Dense) => PathRule::Dense {
            extra: args.dense_extra,
        },
    };
    let grid = ExperimentGrid {
        k_true: args.k_true.clone(),
        snr_divisors: args.snr_divisors.clone(),
        replicates: args.replicates,
        effect_variance: args.effect_variance,
        noise_variance: args.noise_variance,
        test_fraction: args.test_fraction,
        q: args.q,
        path,
        seed: common.seed,
    };
    let reports = run_experiment(&view, &grid, &common.iht_config(1), &CvOptions::default())?;

    let mut w = report::create(&common.out, "sim.tsv", &meta)?;
    write_reports_tsv(&reports, &mut w, !args.no_timing)?;
    w.flush()?;
    let mut w = report::create(&common.out, "sim_summary.tsv", &meta)?;
    write_summary_tsv(&summarize(&reports), &mut w, !args.no_timing)?;
    w.flush()?;
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let common = &args.common;
    let meta = Metadata::new("bench", &config_text(args, |a| &mut a.common), common.seed);
    let has_pheno = common.data.pheno.is_some();
    let data = inputs::load(
        &common.data,
        has_pheno,
        Some((&args.synthetic, common.seed)),
    )?;
    let view = data.view()?;
    let y = match &data.y {
        Some(y) => y.clone(),
        None => {
            let spec = SimulationSpec::new(args.k_true, 1.0, common.seed);
            let (mut y, _) = simulate_phenotype(&view, &spec)?;
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            y.iter_mut().for_each(|v| *v -= mean);
            y
        }
    };
    let config = common.iht_config(1);
    let (n, p) = (view.matrix().n_samples(), view.matrix().n_variants());

    let pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("cannot build thread pool")
    };
    let mut rows: Vec<(BenchMode, usize, PathTiming)> = Vec::new();
    for &mode in &args.modes {
        let threads = if mode == BenchMode::PackedMt {
            common.threads as usize
        } else {
            1
        };
        let timing = match mode {
            BenchMode::Packed | BenchMode::PackedMt => pool(threads)?
                .install(|| time_path(&view, &y, &args.path.0, &config, args.repetitions))?,
            BenchMode::Dense => {
                let bytes = n as u128 * p as u128 * 8;
                let cap = args.dense_cap_mb as u128 * 1024 * 1024;
                if bytes > cap {
                    bail!(
                        "dense mode needs {} MiB for {n} x {p}, above the --dense-cap-mb limit of {}",
                        bytes / (1024 * 1024),
                        args.dense_cap_mb
                    );
                }
                let mut dense = DenseDesign::from_packed(view.matrix());
                if let Some(c) = view.covariates() {
                    dense = dense.with_covariates(Arc::new(c.clone()))?;
                }
                pool(1)?
                    .install(|| time_path(&dense, &y, &args.path.0, &config, args.repetitions))?
            }
        };
        rows.push((mode, threads, timing));
    }

    let dense_mean = rows
        .iter()
        .find(|(m, _, _)| *m == BenchMode::Dense)
        .map(|(_, _, t)| t.mean());
    let mut w = report::create(&common.out, "bench.tsv", &meta)?;
    writeln!(
        w,
        "mode\tthreads\trepetitions\tpath_points\tmean_seconds\tsd_seconds\tratio_to_dense"
    )?;
    for (mode, threads, t) in &rows {
        let ratio = dense_mean.map_or("NA".to_string(), |d| format!("{:.3}", t.mean() / d));
        let name = mode.to_possible_value().expect("named variant");
        writeln!(
            w,
            "{}\t{threads}\t{}\t{}\t{:.6}\t{:.6}\t{ratio}",
            name.get_name(),
            t.seconds.len(),
            args.path.0.len(),
            t.mean(),
            t.sd()
        )?;
    }
    w.flush()?;

    let mut log = report::create(&common.out, "log", &meta)?;
    writeln!(log, "samples\t{n}")?;
    writeln!(log, "markers\t{p}")?;
    let identical = rows.windows(2).all(|w| w[0].2.supports == w[1].2.supports);
    writeln!(log, "supports_identical_across_modes\t{identical}")?;
    log.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Fit(a) => a.common.threads,
        Command::Cv(a) => a.common.threads,
        Command::Simulate(a) => a.common.threads,
        Command::Bench(a) => a.common.threads,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads as usize)
        .build_global()
        .context("cannot build thread pool")?;
    match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Cv(a) => run_cv(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
