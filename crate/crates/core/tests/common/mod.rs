//! Independent dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;

/// Column-major dosages, `None` for missing.
pub fn random_dosages<R: Rng>(
    rng: &mut R,
    n: usize,
    p: usize,
    missing_rate: f64,
) -> Vec<Option<u8>> {
    (0..n * p)
        .map(|_| {
            if rng.random::<f64>() < missing_rate {
                None
            } else {
                Some(rng.random_range(0..=2u8))
            }
        })
        .collect()
}

/// PLINK two-bit code of a dosage, straight from the format definition.
pub fn plink_code(d: Option<u8>) -> u8 {
    match d {
        Some(0) => 0b00,
        None => 0b01,
        Some(1) => 0b10,
        Some(2) => 0b11,
        Some(_) => unreachable!(),
    }
}

/// Full BED file bytes for column-major dosages.
pub fn bed_bytes(n: usize, p: usize, dosages: &[Option<u8>]) -> Vec<u8> {
    let mut out = vec![0x6c, 0x1b, 0x01];
    for j in 0..p {
        for chunk in dosages[j * n..(j + 1) * n].chunks(4) {
            let mut byte = 0u8;
            for (k, d) in chunk.iter().enumerate() {
                byte |= plink_code(*d) << (2 * k);
            }
            out.push(byte);
        }
    }
    out
}

/// Dense standardized matrix: mean and n-1 sample sd over observed entries,
/// missing entries 0, degenerate columns all 0.
pub struct DenseOracle {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
    pub means: Vec<f64>,
    pub precisions: Vec<f64>,
}

impl DenseOracle {
    pub fn new(n: usize, p: usize, dosages: &[Option<u8>]) -> Self {
        let mut x = vec![0.0; n * p];
        let mut means = vec![0.0; p];
        let mut precisions = vec![0.0; p];
        for j in 0..p {
            let obs: Vec<f64> = dosages[j * n..(j + 1) * n]
                .iter()
                .flatten()
                .map(|&d| d as f64)
                .collect();
            if obs.is_empty() {
                continue;
            }
            let m = obs.iter().sum::<f64>() / obs.len() as f64;
            means[j] = m;
            if obs.len() < 2 {
                continue;
            }
            let var = obs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (obs.len() - 1) as f64;
            if var == 0.0 {
                continue;
            }
            let prec = 1.0 / var.sqrt();
            precisions[j] = prec;
            for i in 0..n {
                if let Some(d) = dosages[j * n + i] {
                    x[j * n + i] = (d as f64 - m) * prec;
                }
            }
        }
        Self {
            n,
            p,
            x,
            means,
            precisions,
        }
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn ax(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, v) in out.iter_mut().zip(self.column(j)) {
                    *o += b * v;
                }
            }
        }
        out
    }

    pub fn aty(&self, r: &[f64]) -> Vec<f64> {
        (0..self.p).map(|j| dot(self.column(j), r)).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖a − b‖_∞ / max(‖b‖_∞, 1e-300)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Solves `(AᵀA) x = Aᵀy` by Gaussian elimination with partial pivoting.
pub fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = cols.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        for j in 0..m {
            a[i][j] = dot(&cols[i], &cols[j]);
        }
        a[i][m] = dot(&cols[i], y);
    }
    for c in 0..m {
        let piv = (c..m)
            .max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))
            .unwrap();
        a.swap(c, piv);
        for r in c + 1..m {
            let f = a[r][c] / a[c][c];
            for k in c..=m {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][m] - s) / a[i][i];
    }
    x
}

/// Best `k`-sparse approximation by enumerating every support of size `k`.
pub fn exhaustive_projection(beta: &[f64], k: usize) -> Vec<f64> {
    let p = beta.len();
    let k = k.min(p);
    let mut best = (f64::NEG_INFINITY, 0u32);
    for mask in 0u32..(1 << p) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let kept: f64 = (0..p)
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| beta[j] * beta[j])
            .sum();
        if kept > best.0 {
            best = (kept, mask);
        }
    }
    (0..p)
        .map(|j| if best.1 >> j & 1 == 1 { beta[j] } else { 0.0 })
        .collect()
}
