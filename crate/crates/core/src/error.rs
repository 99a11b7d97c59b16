use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: not a PLINK BED file (magic bytes {found:02x?}, expected [6c, 1b])", path.display())]
    BadMagic { path: PathBuf, found: [u8; 2] },

    #[error("{}: unsupported BED mode byte {mode:#04x}; only variant-major (0x01) is supported", path.display())]
    UnsupportedMode { path: PathBuf, mode: u8 },

    #[error(
        "{}: BED file has {actual} bytes but {expected} are required for {n_samples} samples x {n_variants} variants",
        path.display()
    )]
    LengthMismatch {
        path: PathBuf,
        actual: u64,
        expected: u64,
        n_samples: usize,
        n_variants: usize,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate sample (family {family_id}, individual {individual_id})")]
    DuplicateSample {
        family_id: String,
        individual_id: String,
    },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("predictor index {index} out of range (have {bound} predictors)")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("at least 2 samples are required, got {0}")]
    TooFewSamples(usize),

    #[error("normalized step has a zero denominator: active columns carry no variation")]
    DegenerateSupport,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{active} active predictors exceed the {n} available samples")]
    TooManyPredictors { active: usize, n: usize },

    #[error("response is constant; variance is zero")]
    ConstantResponse,

    #[error("fold {fold}, k = {k}: {source}")]
    Fold {
        fold: usize,
        k: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
