//! Loading genotypes, phenotypes, covariates and keep-lists into a design.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use iht_gwas::geno_matrix::{CovariateBlock, PackedGenotypeMatrix, Precision, StandardizedView};
use iht_gwas::plink_io::{self, parse_phenotype, SampleRecord, VariantRecord};
use iht_gwas::simulate::{synthetic_genotypes, GenotypeSimConfig};

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// PLINK .bed file.
    #[arg(long)]
    pub bed: Option<PathBuf>,
    /// PLINK .bim file [default: the .bed path with a .bim extension]
    #[arg(long)]
    pub bim: Option<PathBuf>,
    /// PLINK .fam file [default: the .bed path with a .fam extension]
    #[arg(long)]
    pub fam: Option<PathBuf>,
    /// Phenotype file: one value per line in .fam order, or `FID IID value`
    /// rows. Without it the sixth .fam column is used.
    #[arg(long)]
    pub pheno: Option<PathBuf>,
    /// Covariate file: `FID IID c1 c2 …`, optional header row starting with FID.
    #[arg(long)]
    pub covar: Option<PathBuf>,
    /// Keep only the samples listed (`FID IID` per line).
    #[arg(long)]
    pub keep: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Transform::None)]
    pub transform: Transform,
    /// Do not add an intercept column.
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    pub precision: PrecisionArg,
}

#[derive(Args, Debug, Clone)]
pub struct SyntheticArgs {
    /// Samples in the synthetic matrix (used when no --bed is given).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Markers in the synthetic matrix.
    #[arg(long, default_value_t = 5000)]
    pub p: usize,
    #[arg(long, default_value_t = 0.05)]
    pub maf_min: f64,
    #[arg(long, default_value_t = 0.5)]
    pub maf_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub missing_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Transform {
    None,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Single,
    Double,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        }
    }
}

/// Samples and markers after filtering, ready to wrap in a design.
pub struct Dataset {
    pub matrix: PackedGenotypeMatrix,
    pub variants: Vec<VariantRecord>,
    /// Transformed and centered phenotype, when one was requested.
    pub y: Option<Vec<f64>>,
    pub covariates: CovariateBlock,
    pub precision: Precision,
}

impl Dataset {
    pub fn view(&self) -> Result<StandardizedView> {
        let view =
            StandardizedView::new(Arc::new(self.matrix.clone())).with_precision(self.precision);
        if self.covariates.n_columns() == 0 {
            Ok(view)
        } else {
            Ok(view.with_covariates(Arc::new(self.covariates.clone()))?)
        }
    }

    pub fn response(&self) -> Result<&[f64]> {
        self.y.as_deref().context("no phenotype loaded")
    }
}

type SampleKey = (String, String);

fn key(s: &SampleRecord) -> SampleKey {
    (s.family_id.clone(), s.individual_id.clone())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, f)| !f.is_empty() && !f[0].starts_with('#'))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_keep(path: &Path) -> Result<HashSet<SampleKey>> {
    let text = read_text(path)?;
    let mut keep = HashSet::new();
    for (line, f) in data_lines(&text) {
        if f.len() < 2 {
            bail!("{}:{line}: expected FID and IID", path.display());
        }
        keep.insert((f[0].to_string(), f[1].to_string()));
    }
    Ok(keep)
}

/// Phenotypes aligned with `samples`; `None` marks missing values.
fn read_pheno(path: &Path, samples: &[SampleRecord]) -> Result<Vec<Option<f64>>> {
    let text = read_text(path)?;
    let mut rows: Vec<(usize, Vec<&str>)> = data_lines(&text).collect();
    if let Some((_, first)) = rows.first() {
        let value = if first.len() == 1 {
            first[0]
        } else {
            first.get(2).copied().unwrap_or("")
        };
        if parse_phenotype(value).is_err() {
            rows.remove(0);
        }
    }
    let parse = |line: usize, v: &str| {
        parse_phenotype(v)
            .map_err(|_| anyhow::anyhow!("{}:{line}: bad phenotype {v:?}", path.display()))
    };
    if rows.iter().all(|(_, f)| f.len() == 1) {
        if rows.len() != samples.len() {
            bail!(
                "{}: {} phenotype values for {} samples",
                path.display(),
                rows.len(),
                samples.len()
            );
        }
        return rows.iter().map(|(line, f)| parse(*line, f[0])).collect();
    }
    let mut by_id: HashMap<SampleKey, Option<f64>> = HashMap::new();
    for (line, f) in &rows {
        if f.len() < 3 {
            bail!("{}:{line}: expected FID IID value", path.display());
        }
        by_id.insert((f[0].to_string(), f[1].to_string()), parse(*line, f[2])?);
    }
    Ok(samples
        .iter()
        .map(|s| by_id.get(&key(s)).copied().flatten())
        .collect())
}

struct Covariates {
    names: Vec<String>,
    by_id: HashMap<SampleKey, Vec<f64>>,
}

fn read_covar(path: &Path) -> Result<Covariates> {
    let text = read_text(path)?;
    let mut names = Vec::new();
    let mut by_id = HashMap::new();
    let mut width = None;
    for (line, f) in data_lines(&text) {
        if f.len() < 3 {
            bail!(
                "{}:{line}: expected FID IID and at least one value",
                path.display()
            );
        }
        if f[0].eq_ignore_ascii_case("FID") {
            names = f[2..].iter().map(|s| s.to_string()).collect();
            continue;
        }
        if *width.get_or_insert(f.len()) != f.len() {
            bail!("{}:{line}: inconsistent column count", path.display());
        }
        if f[2..].iter().any(|v| v.eq_ignore_ascii_case("NA")) {
            continue;
        }
        let values = f[2..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{line}: bad covariate value", path.display()))?;
        by_id.insert((f[0].to_string(), f[1].to_string()), values);
    }
    let m = width.map_or(names.len(), |w| w - 2);
    if names.len() != m {
        names = (1..=m).map(|i| format!("covar{i}")).collect();
    }
    Ok(Covariates { names, by_id })
}

fn sidecar(bed: &Path, given: &Option<PathBuf>, ext: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| bed.with_extension(ext))
}

/// Reads the PLINK triple (or builds a synthetic matrix when `synthetic` is
/// given and there is no --bed), applies the sample filters and assembles
/// the covariate block.
pub fn load(
    args: &DataArgs,
    need_phenotype: bool,
    synthetic: Option<(&SyntheticArgs, u64)>,
) -> Result<Dataset> {
    let (matrix, variants, samples) = match (&args.bed, synthetic) {
        (Some(bed), _) => {
            let data = plink_io::read_plink(
                bed,
                sidecar(bed, &args.bim, "bim"),
                sidecar(bed, &args.fam, "fam"),
            )?;
            (data.matrix, data.variants, data.samples)
        }
        (None, Some((syn, seed))) => synthetic_dataset(syn, seed)?,
        (None, None) => bail!("--bed is required"),
    };

    let keep = args.keep.as_deref().map(read_keep).transpose()?;
    let pheno: Vec<Option<f64>> = match &args.pheno {
        Some(path) => read_pheno(path, &samples)?,
        None => samples.iter().map(|s| s.phenotype).collect(),
    };
    let covar = args.covar.as_deref().map(read_covar).transpose()?;

    let rows: Vec<usize> = (0..samples.len())
        .filter(|&i| keep.as_ref().is_none_or(|k| k.contains(&key(&samples[i]))))
        .filter(|&i| !need_phenotype || pheno[i].is_some())
        .filter(|&i| {
            covar
                .as_ref()
                .is_none_or(|c| c.by_id.contains_key(&key(&samples[i])))
        })
        .collect();
    if rows.len() < 2 {
        bail!("only {} samples remain after filtering", rows.len());
    }

    let matrix = if rows.len() == samples.len() {
        matrix
    } else {
        matrix.select_samples(&rows)?.recompute_stats()?
    };
    let samples: Vec<SampleRecord> = rows.iter().map(|&i| samples[i].clone()).collect();
    let n = rows.len();

    let y = if need_phenotype {
        let mut y: Vec<f64> = rows.iter().map(|&i| pheno[i].expect("filtered")).collect();
        if args.transform == Transform::Log {
            if let Some(bad) = y.iter().find(|v| **v <= 0.0) {
                bail!("log transform needs positive phenotypes, found {bad}");
            }
            y.iter_mut().for_each(|v| *v = v.ln());
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= mean);
        Some(y)
    } else {
        None
    };

    let mut covariates = CovariateBlock::empty(n);
    if !args.no_intercept {
        covariates = covariates.with_intercept();
    }
    if let Some(c) = &covar {
        for (col, name) in c.names.iter().enumerate() {
            let values = samples.iter().map(|s| c.by_id[&key(s)][col]).collect();
            covariates = covariates.with_column(name.clone(), values, true)?;
        }
    }

    Ok(Dataset {
        matrix,
        variants,
        y,
        covariates,
        precision: args.precision.into(),
    })
}

fn synthetic_dataset(
    syn: &SyntheticArgs,
    seed: u64,
) -> Result<(PackedGenotypeMatrix, Vec<VariantRecord>, Vec<SampleRecord>)> {
    let config = GenotypeSimConfig {
        maf_range: (syn.maf_min, syn.maf_max),
        missing_rate: syn.missing_rate,
    };
    let matrix = synthetic_genotypes(syn.n, syn.p, &config, seed)?;
    let variants = (0..syn.p)
        .map(|j| VariantRecord {
            chromosome: "1".into(),
            identifier: format!("snp{j}"),
            genetic_distance: 0.0,
            position: j as u64 + 1,
            alleles: ("A".into(), "G".into()),
        })
        .collect();
    let samples = (0..syn.n)
        .map(|i| SampleRecord {
            family_id: format!("fam{i}"),
            individual_id: format!("ind{i}"),
            father_id: "0".into(),
            mother_id: "0".into(),
            sex: "0".into(),
            phenotype: None,
        })
        .collect();
    Ok((matrix, variants, samples))
}
