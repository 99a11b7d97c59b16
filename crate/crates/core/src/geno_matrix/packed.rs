//! Two-bit genotype storage.
//!
//! Genotypes use the PLINK 1 code table, four samples to a byte with the
//! first sample in the least-significant bit pair:
//!
//! | code | meaning          | dosage (A2 count) |
//! |------|------------------|-------------------|
//! | 0b00 | homozygous A1    | 0                 |
//! | 0b01 | missing          | -                 |
//! | 0b10 | heterozygous     | 1                 |
//! | 0b11 | homozygous A2    | 2                 |
//!
//! The matrix keeps two copies of the codes: variant-major (one padded byte
//! run per column of `X`) and sample-major (one padded byte run per column
//! of `Xᵀ`). Column means and precisions are computed once and cached.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const CODE_HOM_A1: u8 = 0b00;
pub const CODE_MISSING: u8 = 0b01;
pub const CODE_HET: u8 = 0b10;
pub const CODE_HOM_A2: u8 = 0b11;

/// Dosage for each 2-bit code; missing decodes to 0 and is tracked separately.
pub(crate) const CODE_DOSAGE: [f64; 4] = [0.0, 0.0, 1.0, 2.0];

pub(crate) const fn bytes_for(count: usize) -> usize {
    count.div_ceil(4)
}

/// Maps a code to its allele-count dosage, `None` for missing.
#[inline]
pub fn code_to_dosage(code: u8) -> Option<u8> {
    match code & 0b11 {
        CODE_HOM_A1 => Some(0),
        CODE_HET => Some(1),
        CODE_HOM_A2 => Some(2),
        _ => None,
    }
}

/// Inverse of [`code_to_dosage`]. Dosages above 2 are rejected.
#[inline]
pub fn dosage_to_code(dosage: Option<u8>) -> Option<u8> {
    match dosage {
        None => Some(CODE_MISSING),
        Some(0) => Some(CODE_HOM_A1),
        Some(1) => Some(CODE_HET),
        Some(2) => Some(CODE_HOM_A2),
        Some(_) => None,
    }
}

const fn build_byte_dosage() -> [[f64; 4]; 256] {
    let mut table = [[0.0; 4]; 256];
    let mut b = 0;
    while b < 256 {
        let mut s = 0;
        while s < 4 {
            table[b][s] = CODE_DOSAGE[(b >> (2 * s)) & 3];
            s += 1;
        }
        b += 1;
    }
    table
}

const fn build_byte_missing() -> [[f64; 4]; 256] {
    let mut table = [[0.0; 4]; 256];
    let mut b = 0;
    while b < 256 {
        let mut s = 0;
        while s < 4 {
            if (b >> (2 * s)) & 3 == CODE_MISSING as usize {
                table[b][s] = 1.0;
            }
            s += 1;
        }
        b += 1;
    }
    table
}

const fn build_has_missing() -> [bool; 256] {
    let mut table = [false; 256];
    let mut b = 0;
    while b < 256 {
        let mut s = 0;
        while s < 4 {
            if (b >> (2 * s)) & 3 == CODE_MISSING as usize {
                table[b] = true;
            }
            s += 1;
        }
        b += 1;
    }
    table
}

/// Byte -> four dosages (missing slots read as 0).
pub(crate) static BYTE_DOSAGE: [[f64; 4]; 256] = build_byte_dosage();
/// Byte -> four 0/1 missing indicators.
pub(crate) static BYTE_MISSING: [[f64; 4]; 256] = build_byte_missing();
pub(crate) static BYTE_HAS_MISSING: [bool; 256] = build_has_missing();

/// Packs a sequence of 2-bit codes into bytes, zero-padding the final byte.
pub fn pack_codes(codes: &[u8], out: &mut Vec<u8>) {
    for chunk in codes.chunks(4) {
        let mut byte = 0u8;
        for (s, &c) in chunk.iter().enumerate() {
            byte |= (c & 0b11) << (2 * s);
        }
        out.push(byte);
    }
}

/// Unpacks `count` codes from a packed byte run.
pub fn unpack_codes(bytes: &[u8], count: usize) -> Vec<u8> {
    (0..count)
        .map(|i| (bytes[i / 4] >> (2 * (i % 4))) & 0b11)
        .collect()
}

/// Mean and precision (inverse sample standard deviation, n-1 denominator)
/// of one packed column over its non-missing entries.
///
/// Columns with fewer than two observed values or zero variance get
/// precision 0; an all-missing column has mean 0.
pub(crate) fn packed_column_stats(bytes: &[u8], n: usize) -> (f64, f64) {
    // Integer sums keep the statistics exact and order-independent.
    let mut count = 0u64;
    let mut sum = 0u64;
    let mut sum_sq = 0u64;
    for (i, &b) in bytes.iter().enumerate() {
        let slots = (n - 4 * i).min(4);
        for s in 0..slots {
            if let Some(d) = code_to_dosage(b >> (2 * s)) {
                let d = d as u64;
                count += 1;
                sum += d;
                sum_sq += d * d;
            }
        }
    }
    if count == 0 {
        return (0.0, 0.0);
    }
    let m = count as f64;
    let mean = sum as f64 / m;
    if count < 2 {
        return (mean, 0.0);
    }
    // m * sum_sq - sum^2 is an exact integer.
    let centered = (count * sum_sq) as i128 - (sum as i128) * (sum as i128);
    if centered <= 0 {
        return (mean, 0.0);
    }
    let var = centered as f64 / (m * (m - 1.0));
    (mean, 1.0 / var.sqrt())
}

/// Per-column means `u` and precisions `v` of a variant-major packed buffer.
/// Deterministic for any thread count: each column is reduced on its own.
pub fn column_stats(data: &[u8], n: usize, p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let bpc = bytes_for(n);
    if data.len() != bpc * p {
        return Err(Error::DimensionMismatch {
            what: "packed buffer length",
            expected: bpc * p,
            found: data.len(),
        });
    }
    let stats: Vec<(f64, f64)> = if p == 0 {
        Vec::new()
    } else {
        data.par_chunks(bpc)
            .map(|col| packed_column_stats(col, n))
            .collect()
    };
    Ok(stats.into_iter().unzip())
}

/// A genotype matrix held in PLINK 2-bit form, together with its transpose
/// and cached column statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedGenotypeMatrix {
    n: usize,
    p: usize,
    /// Variant-major: column j occupies `bytes_for(n)` bytes.
    data: Vec<u8>,
    /// Sample-major: row i occupies `bytes_for(p)` bytes.
    data_t: Vec<u8>,
    means: Vec<f64>,
    precisions: Vec<f64>,
}

impl PackedGenotypeMatrix {
    /// Builds from a variant-major packed buffer (the BED payload layout).
    /// Padding bits of each column are cleared.
    pub fn from_variant_major(n: usize, p: usize, mut data: Vec<u8>) -> Result<Self> {
        let bpc = bytes_for(n);
        if data.len() != bpc * p {
            return Err(Error::DimensionMismatch {
                what: "packed buffer length",
                expected: bpc * p,
                found: data.len(),
            });
        }
        if !n.is_multiple_of(4) && bpc > 0 {
            let mask = (1u8 << (2 * (n % 4))) - 1;
            for col in data.chunks_mut(bpc) {
                col[bpc - 1] &= mask;
            }
        }
        let (means, precisions) = if n >= 2 {
            column_stats(&data, n, p)?
        } else {
            (vec![0.0; p], vec![0.0; p])
        };
        let data_t = transpose_packed(&data, n, p);
        Ok(Self {
            n,
            p,
            data,
            data_t,
            means,
            precisions,
        })
    }

    /// Builds from column-major 2-bit codes (`codes[j * n + i]`).
    pub fn from_codes(n: usize, p: usize, codes: &[u8]) -> Result<Self> {
        if codes.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "code count",
                expected: n * p,
                found: codes.len(),
            });
        }
        let mut data = Vec::with_capacity(bytes_for(n) * p);
        for j in 0..p {
            pack_codes(&codes[j * n..(j + 1) * n], &mut data);
        }
        Self::from_variant_major(n, p, data)
    }

    /// Builds from column-major dosages, `None` marking a missing call.
    pub fn from_dosages(n: usize, p: usize, dosages: &[Option<u8>]) -> Result<Self> {
        let codes = dosages
            .iter()
            .map(|&d| {
                dosage_to_code(d)
                    .ok_or_else(|| Error::InvalidConfig(format!("dosage {d:?} is not in 0..=2")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_codes(n, p, &codes)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_variants(&self) -> usize {
        self.p
    }

    pub fn bytes_per_column(&self) -> usize {
        bytes_for(self.n)
    }

    pub fn bytes_per_row(&self) -> usize {
        bytes_for(self.p)
    }

    /// Variant-major packed codes, exactly the BED payload.
    pub fn variant_major(&self) -> &[u8] {
        &self.data
    }

    /// Sample-major packed codes (the packed transpose).
    pub fn sample_major(&self) -> &[u8] {
        &self.data_t
    }

    pub fn column_bytes(&self, j: usize) -> &[u8] {
        let bpc = self.bytes_per_column();
        &self.data[j * bpc..(j + 1) * bpc]
    }

    pub fn row_bytes(&self, i: usize) -> &[u8] {
        let bpr = self.bytes_per_row();
        &self.data_t[i * bpr..(i + 1) * bpr]
    }

    #[inline]
    pub fn code(&self, i: usize, j: usize) -> u8 {
        (self.column_bytes(j)[i / 4] >> (2 * (i % 4))) & 0b11
    }

    #[inline]
    pub fn dosage(&self, i: usize, j: usize) -> Option<u8> {
        code_to_dosage(self.code(i, j))
    }

    /// Cached column means `u`.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Cached column precisions `v` (1/σ, or 0 for monomorphic columns).
    pub fn precisions(&self) -> &[f64] {
        &self.precisions
    }

    /// Bytes of genotype payload held for one copy of the matrix.
    pub fn packed_bytes(&self) -> usize {
        self.data.len()
    }

    /// Replaces the cached statistics, e.g. to standardize a test fold with
    /// the statistics of its training fold.
    pub fn with_stats(mut self, means: Vec<f64>, precisions: Vec<f64>) -> Result<Self> {
        for (what, len) in [("means", means.len()), ("precisions", precisions.len())] {
            if len != self.p {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: self.p,
                    found: len,
                });
            }
        }
        self.means = means;
        self.precisions = precisions;
        Ok(self)
    }

    /// Recomputes column statistics from the stored codes.
    pub fn recompute_stats(mut self) -> Result<Self> {
        let (u, v) = column_stats(&self.data, self.n, self.p)?;
        self.means = u;
        self.precisions = v;
        Ok(self)
    }

    /// Row subset in the given order. Statistics are carried over unchanged;
    /// call [`recompute_stats`](Self::recompute_stats) for subset statistics.
    pub fn select_samples(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                bound: self.n,
            });
        }
        let m = rows.len();
        let bpc = bytes_for(m);
        let mut data = vec![0u8; bpc * self.p];
        data.par_chunks_mut(bpc.max(1))
            .take(if bpc == 0 { 0 } else { self.p })
            .enumerate()
            .for_each(|(j, out)| {
                let col = self.column_bytes(j);
                for (r, &i) in rows.iter().enumerate() {
                    let code = (col[i / 4] >> (2 * (i % 4))) & 0b11;
                    out[r / 4] |= code << (2 * (r % 4));
                }
            });
        let data_t = transpose_packed(&data, m, self.p);
        Ok(Self {
            n: m,
            p: self.p,
            data,
            data_t,
            means: self.means.clone(),
            precisions: self.precisions.clone(),
        })
    }

    /// Decodes to a column-major dense matrix of raw dosages, `NaN` for missing.
    pub fn to_dense_raw(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.p);
        for j in 0..self.p {
            for i in 0..self.n {
                out.push(self.dosage(i, j).map_or(f64::NAN, f64::from));
            }
        }
        out
    }
}

/// Builds the sample-major copy of a variant-major packed buffer.
fn transpose_packed(data: &[u8], n: usize, p: usize) -> Vec<u8> {
    let bpc = bytes_for(n);
    let bpr = bytes_for(p);
    let mut data_t = vec![0u8; bpr * n];
    if bpr == 0 || n == 0 {
        return data_t;
    }
    // Each worker fills whole rows; a row gathers one code from every column.
    data_t.par_chunks_mut(bpr).enumerate().for_each(|(i, row)| {
        let byte = i / 4;
        let shift = 2 * (i % 4);
        for (jb, out) in row.iter_mut().enumerate() {
            let mut acc = 0u8;
            let j0 = 4 * jb;
            for s in 0..(p - j0).min(4) {
                let code = (data[(j0 + s) * bpc + byte] >> shift) & 0b11;
                acc |= code << (2 * s);
            }
            *out = acc;
        }
    });
    data_t
}
