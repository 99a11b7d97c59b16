//! Output tables and their metadata header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use iht_gwas::geno_matrix::CovariateBlock;
use iht_gwas::iht::SparseModel;
use iht_gwas::plink_io::VariantRecord;
use sha2::{Digest, Sha256};

/// Provenance written as the first line of every output file.
#[derive(Clone, Debug)]
pub struct Metadata {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Metadata {
    /// `config` should describe every setting that can change the results,
    /// and nothing else (thread count and output prefix are excluded).
    pub fn new(command: &'static str, config: &str, seed: u64) -> Self {
        let digest = Sha256::digest(config.as_bytes());
        Self {
            command,
            config_hash: hex::encode(&digest[..8]),
            seed,
        }
    }

    pub fn header(&self) -> String {
        format!(
            "# iht {} {}\tconfig={}\tseed={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_hash,
            self.seed
        )
    }
}

pub fn output_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

/// Creates `<prefix>.<suffix>` and writes the metadata line.
pub fn create(prefix: &Path, suffix: &str, meta: &Metadata) -> Result<BufWriter<File>> {
    let path = output_path(prefix, suffix);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", meta.header())?;
    Ok(w)
}

/// Rows `predictor_id, chromosome, position, beta`: genetic support first,
/// then every covariate.
pub fn write_model<W: Write>(
    w: &mut W,
    model: &SparseModel,
    variants: &[VariantRecord],
    covariates: &CovariateBlock,
) -> Result<()> {
    writeln!(w, "predictor_id\tchromosome\tposition\tbeta")?;
    for (j, beta) in model.genetic_entries() {
        let v = &variants[j];
        writeln!(
            w,
            "{}\t{}\t{}\t{beta}",
            v.identifier, v.chromosome, v.position
        )?;
    }
    for (name, beta) in covariates.names().iter().zip(model.covariates()) {
        writeln!(w, "{name}\tNA\tNA\t{beta}")?;
    }
    Ok(())
}
