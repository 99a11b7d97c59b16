use std::ops::{AddAssign, Mul, Sub};
use std::sync::Arc;

use rayon::prelude::*;

use super::packed::{BYTE_DOSAGE, BYTE_HAS_MISSING, BYTE_MISSING};
use super::{
    check_model_shape, normalize_support, ActiveBlock, CovariateBlock, Design,
    PackedGenotypeMatrix, Precision, Resample, StandardizeMode,
};
use crate::error::{Error, Result};
use crate::iht::SparseModel;

/// Variants per gradient work unit (must be a multiple of 4).
const ATY_CHUNK_VARIANTS: usize = 1024;
/// Active columns per partial sum in `ax`.
const AX_CHUNK_COLUMNS: usize = 16;

/// Standardized view of a packed genotype matrix with optional covariates
/// appended as trailing predictors.
///
/// Cheap to clone; the matrix and covariates are shared.
#[derive(Clone, Debug)]
pub struct StandardizedView {
    matrix: Arc<PackedGenotypeMatrix>,
    covariates: Option<Arc<CovariateBlock>>,
    precision: Precision,
}

impl StandardizedView {
    pub fn new(matrix: Arc<PackedGenotypeMatrix>) -> Self {
        Self {
            matrix,
            covariates: None,
            precision: Precision::Double,
        }
    }

    pub fn with_covariates(mut self, covariates: Arc<CovariateBlock>) -> Result<Self> {
        if covariates.n_samples() != self.matrix.n_samples() {
            return Err(Error::DimensionMismatch {
                what: "covariate rows",
                expected: self.matrix.n_samples(),
                found: covariates.n_samples(),
            });
        }
        self.covariates = Some(covariates);
        Ok(self)
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn matrix(&self) -> &PackedGenotypeMatrix {
        &self.matrix
    }

    pub fn covariates(&self) -> Option<&CovariateBlock> {
        self.covariates.as_deref()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Standardized values of one genetic column written into `out`.
    fn standardized_column(&self, j: usize, out: &mut [f64]) {
        let u = self.matrix.means()[j];
        let v = self.matrix.precisions()[j];
        let table = [(0.0 - u) * v, 0.0, (1.0 - u) * v, (2.0 - u) * v];
        decode_with_table(self.matrix.column_bytes(j), &table, out);
    }

    /// `out += b · x_st,j`.
    fn add_scaled_column(&self, j: usize, b: f64, out: &mut [f64]) {
        let u = self.matrix.means()[j];
        let a = b * self.matrix.precisions()[j];
        let table = [a * (0.0 - u), 0.0, a * (1.0 - u), a * (2.0 - u)];
        let bytes = self.matrix.column_bytes(j);
        let mut quads = out.chunks_exact_mut(4);
        for (o, &byte) in (&mut quads).zip(bytes) {
            o[0] += table[(byte & 3) as usize];
            o[1] += table[((byte >> 2) & 3) as usize];
            o[2] += table[((byte >> 4) & 3) as usize];
            o[3] += table[(byte >> 6) as usize];
        }
        let rest = quads.into_remainder();
        if !rest.is_empty() {
            let byte = bytes[bytes.len() - 1];
            for (s, o) in rest.iter_mut().enumerate() {
                *o += table[((byte >> (2 * s)) & 3) as usize];
            }
        }
    }

    fn aty_genetic<L: Lane>(&self, r: &[f64]) -> Vec<f64> {
        let m = &*self.matrix;
        let (n, p) = (m.n_samples(), m.n_variants());
        let r_lane: Vec<L> = r.iter().map(|&x| L::from_f64(x)).collect();
        let mut total = L::default();
        for &x in &r_lane {
            total += x;
        }
        let means = m.means();
        let precisions = m.precisions();
        let mut out = vec![0.0; p];
        out.par_chunks_mut(ATY_CHUNK_VARIANTS)
            .enumerate()
            .for_each(|(c, out_chunk)| {
                let first = c * ATY_CHUNK_VARIANTS;
                let b0 = first / 4;
                let nb = out_chunk.len().div_ceil(4);
                let mut acc = vec![L::default(); 4 * nb];
                let mut missing = vec![L::default(); 4 * nb];
                let mut any_missing = false;
                for (i, &ri) in r_lane.iter().enumerate().take(n) {
                    let row = &m.row_bytes(i)[b0..b0 + nb];
                    for (a, &byte) in acc.chunks_exact_mut(4).zip(row) {
                        let d = L::dosage(byte);
                        a[0] += ri * d[0];
                        a[1] += ri * d[1];
                        a[2] += ri * d[2];
                        a[3] += ri * d[3];
                    }
                    for (bi, &byte) in row.iter().enumerate() {
                        if BYTE_HAS_MISSING[byte as usize] {
                            any_missing = true;
                            let mm = L::missing(byte);
                            for s in 0..4 {
                                missing[4 * bi + s] += ri * mm[s];
                            }
                        }
                    }
                }
                for (jj, o) in out_chunk.iter_mut().enumerate() {
                    let j = first + jj;
                    let present = if any_missing {
                        (total - missing[jj]).to_f64()
                    } else {
                        total.to_f64()
                    };
                    *o = precisions[j] * (acc[jj].to_f64() - means[j] * present);
                }
            });
        out
    }
}

fn decode_with_table(bytes: &[u8], table: &[f64; 4], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = table[((bytes[i / 4] >> (2 * (i % 4))) & 3) as usize];
    }
}

/// Scalar type used to accumulate the gradient sweep.
trait Lane:
    'static + Copy + Default + Send + Sync + AddAssign + Mul<Output = Self> + Sub<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn dosage(byte: u8) -> &'static [Self; 4];
    fn missing(byte: u8) -> &'static [Self; 4];
}

impl Lane for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn dosage(byte: u8) -> &'static [f64; 4] {
        &BYTE_DOSAGE[byte as usize]
    }
    fn missing(byte: u8) -> &'static [f64; 4] {
        &BYTE_MISSING[byte as usize]
    }
}

const fn to_f32_table(t: &[[f64; 4]; 256]) -> [[f32; 4]; 256] {
    let mut out = [[0.0f32; 4]; 256];
    let mut b = 0;
    while b < 256 {
        let mut s = 0;
        while s < 4 {
            out[b][s] = t[b][s] as f32;
            s += 1;
        }
        b += 1;
    }
    out
}

static BYTE_DOSAGE_F32: [[f32; 4]; 256] = to_f32_table(&BYTE_DOSAGE);
static BYTE_MISSING_F32: [[f32; 4]; 256] = to_f32_table(&BYTE_MISSING);

impl Lane for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn dosage(byte: u8) -> &'static [f32; 4] {
        &BYTE_DOSAGE_F32[byte as usize]
    }
    fn missing(byte: u8) -> &'static [f32; 4] {
        &BYTE_MISSING_F32[byte as usize]
    }
}

impl Design for StandardizedView {
    fn n_samples(&self) -> usize {
        self.matrix.n_samples()
    }

    fn n_genetic(&self) -> usize {
        self.matrix.n_variants()
    }

    fn n_covariates(&self) -> usize {
        self.covariates.as_ref().map_or(0, |c| c.n_columns())
    }

    fn ax(&self, model: &SparseModel) -> Result<Vec<f64>> {
        check_model_shape(self, model)?;
        let n = self.n_samples();
        let pairs: Vec<(usize, f64)> = model.genetic_entries().collect();
        let mut out = vec![0.0; n];
        if pairs.len() <= AX_CHUNK_COLUMNS {
            for &(j, b) in &pairs {
                self.add_scaled_column(j, b, &mut out);
            }
        } else {
            let partials: Vec<Vec<f64>> = pairs
                .par_chunks(AX_CHUNK_COLUMNS)
                .map(|chunk| {
                    let mut part = vec![0.0; n];
                    for &(j, b) in chunk {
                        self.add_scaled_column(j, b, &mut part);
                    }
                    part
                })
                .collect();
            // Fixed chunk order keeps the sum independent of scheduling.
            for part in &partials {
                for (o, x) in out.iter_mut().zip(part) {
                    *o += x;
                }
            }
        }
        if let Some(cov) = &self.covariates {
            cov.apply(model.covariates(), &mut out);
        }
        Ok(out)
    }

    fn aty(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_samples() {
            return Err(Error::DimensionMismatch {
                what: "residual length",
                expected: self.n_samples(),
                found: r.len(),
            });
        }
        let mut out = match self.precision {
            Precision::Double => self.aty_genetic::<f64>(r),
            Precision::Single => self.aty_genetic::<f32>(r),
        };
        if let Some(cov) = &self.covariates {
            out.extend(cov.transpose_apply(r));
        }
        Ok(out)
    }

    fn decompress_active(&self, support: &[usize]) -> Result<ActiveBlock> {
        let idx = normalize_support(support, self.n_predictors())?;
        let n = self.n_samples();
        let p = self.n_genetic();
        let mut values = vec![0.0; n * idx.len()];
        if n > 0 {
            values
                .par_chunks_mut(n)
                .zip(idx.par_iter())
                .for_each(|(col, &j)| {
                    if j < p {
                        self.standardized_column(j, col);
                    } else {
                        let cov = self.covariates.as_ref().expect("covariate index");
                        col.copy_from_slice(cov.column(j - p));
                    }
                });
        }
        Ok(ActiveBlock::new(n, idx, values))
    }

    fn predictor_label(&self, j: usize) -> String {
        let p = self.n_genetic();
        match &self.covariates {
            Some(cov) if j >= p => cov.names()[j - p].clone(),
            _ => format!("snp{j}"),
        }
    }
}

impl Resample for StandardizedView {
    fn split_rows(
        &self,
        train: &[usize],
        test: &[usize],
        mode: StandardizeMode,
    ) -> Result<(Self, Self)> {
        let mut train_m = self.matrix.select_samples(train)?;
        if mode == StandardizeMode::TrainingFold {
            train_m = train_m.recompute_stats()?;
        }
        let test_m = self
            .matrix
            .select_samples(test)?
            .with_stats(train_m.means().to_vec(), train_m.precisions().to_vec())?;
        let (train_c, test_c) = match &self.covariates {
            Some(c) => (
                Some(Arc::new(c.select_rows(train)?)),
                Some(Arc::new(c.select_rows(test)?)),
            ),
            None => (None, None),
        };
        let make = |m: PackedGenotypeMatrix, c: Option<Arc<CovariateBlock>>| Self {
            matrix: Arc::new(m),
            covariates: c,
            precision: self.precision,
        };
        Ok((make(train_m, train_c), make(test_m, test_c)))
    }
}
