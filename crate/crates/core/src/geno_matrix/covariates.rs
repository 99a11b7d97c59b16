use crate::error::{Error, Result};

/// Dense nongenetic predictors appended after the genetic columns.
///
/// Columns are standardized once when added (n-1 denominator) unless
/// flagged otherwise. The intercept is all ones and never standardized.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateBlock {
    n: usize,
    values: Vec<f64>,
    names: Vec<String>,
    standardized: Vec<bool>,
}

impl CovariateBlock {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            values: Vec::new(),
            names: Vec::new(),
            standardized: Vec::new(),
        }
    }

    /// A block holding only the intercept column.
    pub fn intercept(n: usize) -> Self {
        Self::empty(n).with_intercept()
    }

    pub fn with_intercept(mut self) -> Self {
        self.values.extend(std::iter::repeat_n(1.0, self.n));
        self.names.push("intercept".to_string());
        self.standardized.push(false);
        self
    }

    /// Appends a column, standardizing it when `standardize` is set.
    pub fn with_column(
        mut self,
        name: impl Into<String>,
        mut values: Vec<f64>,
        standardize: bool,
    ) -> Result<Self> {
        if values.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "covariate column length",
                expected: self.n,
                found: values.len(),
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariate column"));
        }
        let name = name.into();
        if standardize {
            let n = self.n as f64;
            if self.n < 2 {
                return Err(Error::TooFewSamples(self.n));
            }
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "covariate {name} is constant and cannot be standardized"
                )));
            }
            let scale = 1.0 / var.sqrt();
            for x in &mut values {
                *x = (*x - mean) * scale;
            }
        }
        self.values.extend(values);
        self.names.push(name);
        self.standardized.push(standardize);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.values[c * self.n..(c + 1) * self.n]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_standardized(&self, c: usize) -> bool {
        self.standardized[c]
    }

    /// Row subset; values are copied as stored, not re-standardized.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                bound: self.n,
            });
        }
        let mut values = Vec::with_capacity(rows.len() * self.n_columns());
        for c in 0..self.n_columns() {
            let col = self.column(c);
            values.extend(rows.iter().map(|&i| col[i]));
        }
        Ok(Self {
            n: rows.len(),
            values,
            names: self.names.clone(),
            standardized: self.standardized.clone(),
        })
    }

    /// `C b`.
    pub(crate) fn apply(&self, coefs: &[f64], out: &mut [f64]) {
        for (c, &b) in coefs.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.column(c)) {
                *o += b * x;
            }
        }
    }

    /// `Cᵀ r`.
    pub(crate) fn transpose_apply(&self, r: &[f64]) -> Vec<f64> {
        (0..self.n_columns())
            .map(|c| self.column(c).iter().zip(r).map(|(a, b)| a * b).sum())
            .collect()
    }
}
