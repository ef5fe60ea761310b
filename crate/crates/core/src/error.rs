use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid channel set: {0}")]
    InvalidChannels(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frequency {freq} Hz outside (0, {f_max}) Hz")]
    FrequencyOutOfRange { freq: f64, f_max: f64 },

    #[error("folded frequency {folded} Hz outside [0, {rate}) Hz")]
    FoldedOutOfRange { folded: f64, rate: f64 },

    #[error("undersampling ratios {a} and {b} are not coprime")]
    NonCoprimeRatios { a: u32, b: u32 },

    #[error("undersampling ratios {0:?} are not pairwise coprime")]
    NonPairwiseCoprime(Vec<u32>),

    #[error("no consistent assignment between the two channels' candidates")]
    NoConsistentAssignment,

    #[error("{k} components exceeds the matching limit of {max}")]
    TooManyComponents { k: usize, max: usize },

    #[error("no sample at Nyquist index {index}")]
    MissingIndex { index: u64 },

    #[error("channels disagree at shared Nyquist index {index} (|diff| = {diff:e})")]
    InconsistentDuplicate { index: u64, diff: f64 },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("eigendecomposition did not converge")]
    ConvergenceFailure,

    #[error("K = {k} must be below the snapshot dimension m = {m}")]
    KTooLarge { k: usize, m: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
