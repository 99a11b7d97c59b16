//! PLINK 1 binary genotype triples: `.bed` (packed codes), `.bim`
//! (variants) and `.fam` (samples).
//!
//! Only the variant-major BED mode is accepted. Reading and writing are
//! byte-exact: a file produced by [`write_bed`] from a matrix read with
//! [`read_bed`] is identical to the input.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geno_matrix::{bytes_for, PackedGenotypeMatrix};

pub const BED_MAGIC: [u8; 2] = [0x6c, 0x1b];
pub const BED_MODE_VARIANT_MAJOR: u8 = 0x01;
pub const BED_HEADER_LEN: usize = 3;

/// The three-byte BED header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BedHeader {
    pub magic: [u8; 2],
    pub mode: u8,
}

impl BedHeader {
    pub const VARIANT_MAJOR: BedHeader = BedHeader {
        magic: BED_MAGIC,
        mode: BED_MODE_VARIANT_MAJOR,
    };

    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let found = [
            bytes.first().copied().unwrap_or(0),
            bytes.get(1).copied().unwrap_or(0),
        ];
        if bytes.len() < BED_HEADER_LEN || found != BED_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found,
            });
        }
        if bytes[2] != BED_MODE_VARIANT_MAJOR {
            return Err(Error::UnsupportedMode {
                path: path.to_path_buf(),
                mode: bytes[2],
            });
        }
        Ok(Self {
            magic: found,
            mode: bytes[2],
        })
    }

    pub fn to_bytes(self) -> [u8; 3] {
        [self.magic[0], self.magic[1], self.mode]
    }
}

/// One line of a `.bim` file.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantRecord {
    pub chromosome: String,
    pub identifier: String,
    pub genetic_distance: f64,
    pub position: u64,
    /// Allele counted as 0 (`allele1`) and the allele whose copies form the
    /// dosage (`allele2`).
    pub alleles: (String, String),
}

/// One line of a `.fam` file.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub family_id: String,
    pub individual_id: String,
    pub father_id: String,
    pub mother_id: String,
    pub sex: String,
    /// `None` for the `-9` / `NA` sentinels.
    pub phenotype: Option<f64>,
}

/// Expected BED length in bytes.
pub fn bed_len(n_samples: usize, n_variants: usize) -> u64 {
    BED_HEADER_LEN as u64 + (bytes_for(n_samples) as u64) * n_variants as u64
}

/// Reads a variant-major BED file of known dimensions.
pub fn read_bed(
    path: impl AsRef<Path>,
    n_samples: usize,
    n_variants: usize,
) -> Result<PackedGenotypeMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let _header = BedHeader::parse(&bytes, path)?;
    let expected = bed_len(n_samples, n_variants);
    if bytes.len() as u64 != expected {
        return Err(Error::LengthMismatch {
            path: path.to_path_buf(),
            actual: bytes.len() as u64,
            expected,
            n_samples,
            n_variants,
        });
    }
    let mut bytes = bytes;
    bytes.drain(..BED_HEADER_LEN);
    PackedGenotypeMatrix::from_variant_major(n_samples, n_variants, bytes)
}

/// Serializes a matrix as a variant-major BED byte buffer.
pub fn encode_bed(matrix: &PackedGenotypeMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(BED_HEADER_LEN + matrix.packed_bytes());
    out.extend_from_slice(&BedHeader::VARIANT_MAJOR.to_bytes());
    out.extend_from_slice(matrix.variant_major());
    out
}

pub fn write_bed(matrix: &PackedGenotypeMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_bed(matrix))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses `.bim` text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_bim(text: &str, path: &Path) -> Result<Vec<VariantRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let genetic_distance = fields[2].parse::<f64>().map_err(|_| {
            parse_err(
                path,
                lineno,
                format!("bad genetic distance {:?}", fields[2]),
            )
        })?;
        let position = fields[3]
            .parse::<u64>()
            .map_err(|_| parse_err(path, lineno, format!("bad position {:?}", fields[3])))?;
        out.push(VariantRecord {
            chromosome: fields[0].to_string(),
            identifier: fields[1].to_string(),
            genetic_distance,
            position,
            alleles: (fields[4].to_string(), fields[5].to_string()),
        });
    }
    Ok(out)
}

/// Parses `.fam` text, rejecting duplicate (family, individual) pairs.
pub fn parse_fam(text: &str, path: &Path) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let phenotype = parse_phenotype(fields[5])
            .map_err(|_| parse_err(path, lineno, format!("bad phenotype {:?}", fields[5])))?;
        if !seen.insert((fields[0], fields[1])) {
            return Err(Error::DuplicateSample {
                family_id: fields[0].to_string(),
                individual_id: fields[1].to_string(),
            });
        }
        out.push(SampleRecord {
            family_id: fields[0].to_string(),
            individual_id: fields[1].to_string(),
            father_id: fields[2].to_string(),
            mother_id: fields[3].to_string(),
            sex: fields[4].to_string(),
            phenotype,
        });
    }
    Ok(out)
}

/// Phenotype value with PLINK's missing sentinels mapped to `None`.
pub fn parse_phenotype(field: &str) -> Result<Option<f64>, std::num::ParseFloatError> {
    if field == "NA" || field == "-9" {
        return Ok(None);
    }
    let v: f64 = field.parse()?;
    Ok(if v == -9.0 || v.is_nan() {
        None
    } else {
        Some(v)
    })
}

pub fn read_bim(path: impl AsRef<Path>) -> Result<Vec<VariantRecord>> {
    let path = path.as_ref();
    parse_bim(&read_text(path)?, path)
}

pub fn read_fam(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    parse_fam(&read_text(path)?, path)
}

pub fn write_bim(records: &[VariantRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in records {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.chromosome, r.identifier, r.genetic_distance, r.position, r.alleles.0, r.alleles.1
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_fam(records: &[SampleRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in records {
        let pheno = r
            .phenotype
            .map_or_else(|| "-9".to_string(), |v| v.to_string());
        text.push_str(&format!(
            "{} {} {} {} {} {}\n",
            r.family_id, r.individual_id, r.father_id, r.mother_id, r.sex, pheno
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A BED/BIM/FAM triple loaded together.
#[derive(Clone, Debug)]
pub struct PlinkData {
    pub matrix: PackedGenotypeMatrix,
    pub variants: Vec<VariantRecord>,
    pub samples: Vec<SampleRecord>,
}

/// Reads a triple, taking the dimensions from the text files.
pub fn read_plink(
    bed: impl AsRef<Path>,
    bim: impl AsRef<Path>,
    fam: impl AsRef<Path>,
) -> Result<PlinkData> {
    let variants = read_bim(bim)?;
    let samples = read_fam(fam)?;
    let matrix = read_bed(bed, samples.len(), variants.len())?;
    Ok(PlinkData {
        matrix,
        variants,
        samples,
    })
}
