//! Wall-clock timing of a fixed sparsity path, for comparing design backends.

use std::time::Instant;

use crate::error::Result;
use crate::geno_matrix::Design;
use crate::iht::{fit, IhtConfig};

/// Timing of repeated runs of the same path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathTiming {
    pub seconds: Vec<f64>,
    /// Genetic support found at each path point (identical across repetitions).
    pub supports: Vec<Vec<usize>>,
}

impl PathTiming {
    pub fn mean(&self) -> f64 {
        self.seconds.iter().sum::<f64>() / self.seconds.len().max(1) as f64
    }

    /// Sample standard deviation; 0 for fewer than two repetitions.
    pub fn sd(&self) -> f64 {
        crate::simulate::sample_variance(&self.seconds).sqrt()
    }
}

/// Fits every `k` in `path` from scratch, `repetitions` times.
pub fn time_path<D: Design + ?Sized>(
    design: &D,
    y: &[f64],
    path: &[usize],
    config: &IhtConfig,
    repetitions: usize,
) -> Result<PathTiming> {
    let mut seconds = Vec::with_capacity(repetitions);
    let mut supports = Vec::new();
    for _ in 0..repetitions {
        let start = Instant::now();
        let mut run = Vec::with_capacity(path.len());
        for &k in path {
            let result = fit(design, y, &config.with_k(k))?;
            run.push(result.model.support().to_vec());
        }
        seconds.push(start.elapsed().as_secs_f64());
        supports = run;
    }
    Ok(PathTiming { seconds, supports })
}

/// The path `5, 10, …, 100`.
pub fn default_bench_path() -> Vec<usize> {
    (1..=20).map(|i| 5 * i).collect()
}
