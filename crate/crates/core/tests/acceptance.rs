//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{bed_bytes, exhaustive_projection, normal_equations, rel_err, DenseOracle};
use iht_gwas::bench::time_path;
use iht_gwas::geno_matrix::{
    CovariateBlock, DenseDesign, Design, PackedGenotypeMatrix, StandardizedView,
};
use iht_gwas::iht::{fit, project_sparse, refit_least_squares, IhtConfig, SparseModel};
use iht_gwas::model_select::{cv_iht, CvOptions, CvPlan};
use iht_gwas::plink_io::{encode_bed, read_bed};
use iht_gwas::simulate::{
    precision_recall, run_experiment, simulate_phenotype, summarize, synthetic_genotypes,
    write_reports_tsv, ExperimentGrid, GenotypeSimConfig, PathRule, SimulationSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=100);
        let p = rng.random_range(1..=300);
        let rate = rng.random_range(0.0..0.3);
        let d = common::random_dosages(&mut rng, n, p, rate);
        let oracle = DenseOracle::new(n, p, &d);
        let view = StandardizedView::new(Arc::new(
            PackedGenotypeMatrix::from_dosages(n, p, &d).unwrap(),
        ));

        let k = rng.random_range(1..=p.min(20));
        let mut support = rand::seq::index::sample(&mut rng, p, k).into_vec();
        support.sort_unstable();
        let entries: Vec<(usize, f64)> = support
            .iter()
            .map(|&j| (j, rng.random_range(-2.0..2.0)))
            .collect();
        let model = SparseModel::from_entries(p, k, entries, vec![]).unwrap();
        let want_ax = oracle.ax(&model.to_dense());
        if want_ax.iter().any(|v| *v != 0.0) {
            worst = worst.max(rel_err(&view.ax(&model).unwrap(), &want_ax));
        }

        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(rel_err(&view.aty(&r).unwrap(), &oracle.aty(&r)));

        let block = view.decompress_active(&support).unwrap();
        for (c, &j) in support.iter().enumerate() {
            let col = oracle.column(j);
            if col.iter().any(|v| *v != 0.0) {
                worst = worst.max(rel_err(block.column(c), col));
            } else if block.column(c).iter().any(|v| *v != 0.0) {
                worst = f64::INFINITY;
            }
        }
    }
    let t = start.elapsed();
    check(
        worst <= 1e-10 && within(t, 30.0),
        format!(
            "200 matrices, max relative error {worst:.2e} (tol 1e-10), {:.2}s (limit 30s)",
            t.as_secs_f64()
        ),
    )
}

fn projection_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=10);
        let k = rng.random_range(0..=3);
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        if project_sparse(&beta, p, k).to_dense() != exhaustive_projection(&beta, k) {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    check(
        mismatches == 0 && within(t, 5.0),
        format!(
            "1000 trials, {mismatches} mismatches, {:.2}s (limit 5s)",
            t.as_secs_f64()
        ),
    )
}

fn monotone_descent() -> Outcome {
    let (n, p) = (200, 500);
    let m = Arc::new(synthetic_genotypes(n, p, &GenotypeSimConfig::default(), 303).unwrap());
    let view = StandardizedView::new(m)
        .with_covariates(Arc::new(CovariateBlock::intercept(n)))
        .unwrap();
    let mut steps = 0;
    let mut worst_rise = f64::NEG_INFINITY;
    for run in 0..100u64 {
        let s = [1.0, 2.0, 10.0, 20.0][run as usize % 4];
        let k_true = 1 + (run as usize % 15);
        let (y, _) =
            simulate_phenotype(&view, &SimulationSpec::new(k_true, s, 1000 + run)).unwrap();
        let k = 1 + (run as usize * 7) % 25;
        let res = fit(&view, &y, &IhtConfig::new(k)).unwrap();
        for w in res.loss_trace.windows(2) {
            steps += 1;
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    check(
        worst_rise <= 1e-12,
        format!(
            "100 fits, {steps} accepted steps, largest loss change {worst_rise:.3e} (tol +1e-12)"
        ),
    )
}

fn gaussian_design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DenseDesign {
    let raw: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    DenseDesign::from_raw(n, p, raw).unwrap()
}

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let (n, p) = (500, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut exact = 0;
    let mut trials = 0;
    let (mut prec_sum, mut rec_sum, mut noisy) = (0.0, 0.0, 0);
    for k_true in [5, 10] {
        for _ in 0..20 {
            let x = gaussian_design(n, p, &mut rng);
            let mut support = rand::seq::index::sample(&mut rng, p, k_true).into_vec();
            support.sort_unstable();

            // Noiseless, |β| ≥ 0.5.
            let entries: Vec<(usize, f64)> = support
                .iter()
                .map(|&j| {
                    let mag = rng.random_range(0.5..1.5);
                    (j, if rng.random_bool(0.5) { mag } else { -mag })
                })
                .collect();
            let truth = SparseModel::from_entries(p, k_true, entries, vec![]).unwrap();
            let y = x.ax(&truth).unwrap();
            let res = fit(&x, &y, &IhtConfig::new(k_true)).unwrap();
            trials += 1;
            if res.model.support() == truth.support() {
                exact += 1;
            }

            // Effects N(0, 1), noise variance 0.01.
            let noise = Normal::new(0.0, 0.1).unwrap();
            let entries: Vec<(usize, f64)> = support
                .iter()
                .map(|&j| (j, StandardNormal.sample(&mut rng)))
                .collect();
            let truth = SparseModel::from_entries(p, k_true, entries, vec![]).unwrap();
            let mut y = x.ax(&truth).unwrap();
            y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            let res = fit(&x, &y, &IhtConfig::new(k_true)).unwrap();
            let (pr, rc) = precision_recall(res.model.support(), truth.support());
            prec_sum += pr;
            rec_sum += rc;
            noisy += 1;
        }
    }
    let t = start.elapsed();
    let (prec, rec) = (prec_sum / noisy as f64, rec_sum / noisy as f64);
    check(
        exact == trials && prec >= 0.95 && rec >= 0.95 && within(t, 120.0),
        format!(
            "noiseless exact support {exact}/{trials}; noisy mean precision {prec:.3}, recall {rec:.3} (need 0.95); {:.1}s (limit 120s)",
            t.as_secs_f64()
        ),
    )
}

fn scaled_simulation() -> Outcome {
    let start = Instant::now();
    let (n, p) = (2000, 10000);
    let m = Arc::new(synthetic_genotypes(n, p, &GenotypeSimConfig::default(), 505).unwrap());
    let view = StandardizedView::new(m)
        .with_covariates(Arc::new(CovariateBlock::intercept(n)))
        .unwrap();
    let grid = ExperimentGrid {
        k_true: vec![20, 40],
        snr_divisors: vec![1.0, 10.0],
        replicates: 5,
        effect_variance: 0.01,
        noise_variance: 0.01,
        test_fraction: 0.1,
        q: 5,
        path: PathRule::Straddle {
            step: 2,
            points_each_side: 4,
        },
        seed: 505,
    };
    let reports = run_experiment(&view, &grid, &IhtConfig::new(1), &CvOptions::default()).unwrap();
    let cells = summarize(&reports);
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &cells {
        // Expected precision of k_selected markers drawn at random.
        let baseline = c.k_true as f64 / p as f64;
        if c.snr_divisor == 1.0 {
            ok &= c.precision >= 0.9 && (c.h2_est - c.h2_true).abs() <= 0.05;
        } else {
            ok &= c.precision >= baseline;
        }
        parts.push(format!(
            "k={} s={}: precision {:.3} recall {:.3} h2 {:.3}/{:.3} k_sel {:.1}",
            c.k_true, c.snr_divisor, c.precision, c.recall, c.h2_est, c.h2_true, c.k_selected
        ));
    }
    let t = start.elapsed();
    ok &= within(t, 1800.0);
    check(
        ok,
        format!(
            "{}; {:.0}s (limit 1800s)",
            parts.join("; "),
            t.as_secs_f64()
        ),
    )
}

fn cv_selection() -> Outcome {
    let (n, p) = (200, 1000);
    let m = Arc::new(synthetic_genotypes(n, p, &GenotypeSimConfig::default(), 606).unwrap());
    let view = StandardizedView::new(m)
        .with_covariates(Arc::new(CovariateBlock::intercept(n)))
        .unwrap();
    let noiseless = |k_true: usize, seed: u64| SimulationSpec {
        k_true,
        effect_variance: 1.0,
        snr_divisor: 1.0,
        noise_variance: 1e-20,
        seed,
    };
    let mut hits = 0;
    let mut saturated = 0;
    for seed in 0..20u64 {
        let (y, _) = simulate_phenotype(&view, &noiseless(5, seed)).unwrap();
        let plan = CvPlan::new(n, 5, (1..=15).collect(), seed).unwrap();
        let rep = cv_iht(&view, &y, &plan, &IhtConfig::new(1), &CvOptions::default()).unwrap();
        hits += usize::from(rep.k_best == 5);

        let (y, _) = simulate_phenotype(&view, &noiseless(8, 100 + seed)).unwrap();
        let plan = CvPlan::new(n, 5, (1..=4).collect(), seed).unwrap();
        let rep = cv_iht(&view, &y, &plan, &IhtConfig::new(1), &CvOptions::default()).unwrap();
        saturated += usize::from(rep.k_best == 4);
    }
    check(
        hits >= 18 && saturated == 20,
        format!("k_best = 5 in {hits}/20 seeds (need 18); path 1..4 with k_true 8 saturates at 4 in {saturated}/20"),
    )
}

fn refit_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (n, p) = (80, 150);
    let d = common::random_dosages(&mut rng, n, p, 0.05);
    let oracle = DenseOracle::new(n, p, &d);
    let view = StandardizedView::new(Arc::new(
        PackedGenotypeMatrix::from_dosages(n, p, &d).unwrap(),
    ))
    .with_covariates(Arc::new(CovariateBlock::intercept(n)))
    .unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(1..=20);
        let mut support = rand::seq::index::sample(&mut rng, p, k).into_vec();
        support.sort_unstable();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fit = refit_least_squares(&view, &y, &support).unwrap();
        if fit.rank_deficient() {
            return Err(format!("unexpected rank deficiency on {support:?}"));
        }
        let mut cols: Vec<Vec<f64>> = support.iter().map(|&j| oracle.column(j).to_vec()).collect();
        cols.push(vec![1.0; n]);
        let want = normal_equations(&cols, &y);
        for (c, &j) in support.iter().enumerate() {
            worst = worst.max((fit.model.coefficient(j) - want[c]).abs());
        }
        worst = worst.max((fit.model.covariates()[0] - want[k]).abs());
    }
    check(
        worst <= 1e-8,
        format!("100 active sets, max coefficient difference {worst:.2e} (tol 1e-8)"),
    )
}

/// Output tables of a CV run and a small simulation grid.
fn deterministic_tables() -> Vec<u8> {
    let (n, p) = (150, 800);
    let m = Arc::new(synthetic_genotypes(n, p, &GenotypeSimConfig::default(), 808).unwrap());
    let view = StandardizedView::new(m)
        .with_covariates(Arc::new(CovariateBlock::intercept(n)))
        .unwrap();
    let (y, _) = simulate_phenotype(&view, &SimulationSpec::new(6, 1.0, 809)).unwrap();
    let plan = CvPlan::new(n, 5, (1..=10).collect(), 810).unwrap();
    let rep = cv_iht(&view, &y, &plan, &IhtConfig::new(1), &CvOptions::default()).unwrap();
    let mut out = Vec::new();
    rep.write_tsv(&mut out).unwrap();
    rep.write_summary_tsv(&mut out).unwrap();
    let grid = ExperimentGrid {
        k_true: vec![3, 6],
        snr_divisors: vec![1.0, 10.0],
        replicates: 2,
        effect_variance: 0.01,
        noise_variance: 0.01,
        test_fraction: 0.2,
        q: 3,
        path: PathRule::Straddle {
            step: 1,
            points_each_side: 2,
        },
        seed: 811,
    };
    let reports = run_experiment(&view, &grid, &IhtConfig::new(1), &CvOptions::default()).unwrap();
    write_reports_tsv(&reports, &mut out, false).unwrap();
    out
}

fn determinism() -> Outcome {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(deterministic_tables)
    };
    let base = run(1);
    let mut differing = Vec::new();
    for t in [1, 2, 8] {
        if run(t) != base {
            differing.push(t);
        }
    }
    check(
        differing.is_empty(),
        format!(
            "{} table bytes; runs differing from the 1-thread run: {differing:?} (threads 1, 2, 8)",
            base.len()
        ),
    )
}

fn benchmark_sanity() -> Outcome {
    let (n, p) = (1000, 5000);
    let m = Arc::new(synthetic_genotypes(n, p, &GenotypeSimConfig::default(), 909).unwrap());
    let packed = StandardizedView::new(m.clone())
        .with_covariates(Arc::new(CovariateBlock::intercept(n)))
        .unwrap();
    let dense = DenseDesign::from_packed(&m)
        .with_covariates(Arc::new(CovariateBlock::intercept(n)))
        .unwrap();
    let (y, _) = simulate_phenotype(&packed, &SimulationSpec::new(10, 1.0, 910)).unwrap();
    let path: Vec<usize> = (1..=6).map(|i| 5 * i).collect();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let config = IhtConfig::new(1);
    let tp = one
        .install(|| time_path(&packed, &y, &path, &config, 3))
        .unwrap();
    let td = one
        .install(|| time_path(&dense, &y, &path, &config, 3))
        .unwrap();
    let ratio = tp.mean() / td.mean();
    check(
        tp.supports == td.supports,
        format!(
            "informational: packed {:.3}s +- {:.3}, dense {:.3}s +- {:.3}, packed/dense ratio {ratio:.2}; supports identical: {}",
            tp.mean(),
            tp.sd(),
            td.mean(),
            td.sd(),
            tp.supports == td.supports
        ),
    )
}

fn bed_codec() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut remainders = [0usize; 4];
    let mut failures = 0;
    for trial in 0..500 {
        let n = 4 * rng.random_range(0..20) + trial % 4 + if trial % 4 == 0 { 4 } else { 0 };
        let p = rng.random_range(1..=12);
        remainders[n % 4] += 1;
        let rate = rng.random_range(0.0..0.5);
        let d = common::random_dosages(&mut rng, n, p, rate);
        let bytes = bed_bytes(n, p, &d);
        let path = dir.path().join("fuzz.bed");
        std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
        let m = read_bed(&path, n, p).map_err(|e| e.to_string())?;
        let decoded_ok = (0..p).all(|j| (0..n).all(|i| m.dosage(i, j) == d[j * n + i]));
        if !decoded_ok || encode_bed(&m) != bytes {
            failures += 1;
        }
    }
    check(
        failures == 0 && remainders.iter().all(|&c| c > 0),
        format!("500 matrices, {failures} mismatches; n mod 4 counts {remainders:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("projection optimality", projection_optimality),
        ("monotone descent", monotone_descent),
        ("exact recovery", exact_recovery),
        ("scaled simulation", scaled_simulation),
        ("cv selection", cv_selection),
        ("refit correctness", refit_correctness),
        ("determinism", determinism),
        ("benchmark sanity", benchmark_sanity),
        ("bed codec", bed_codec),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {id:>2} {name}: {detail} [{:.1}s]",
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
