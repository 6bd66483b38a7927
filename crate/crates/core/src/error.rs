use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("utterance too short: {samples} samples, analysis window needs {window}")]
    UtteranceTooShort { samples: usize, window: usize },
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("insufficient distinct points: {distinct} distinct, {k} clusters requested")]
    InsufficientDistinctPoints { distinct: usize, k: usize },
    #[error("sample has {n} rows but {k} clusters were requested")]
    TooFewPoints { n: usize, k: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("symbol {symbol} out of range for an alphabet of {n_symbols}")]
    SymbolOutOfRange { symbol: usize, n_symbols: usize },
    #[error("no sequence longer than the model order {order}")]
    NoUsableSequences { order: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("boundaries are not strictly increasing")]
    Unsorted,
    #[error("no gold boundaries to evaluate against")]
    NoGold,
    #[error("cannot aggregate match results with different mode or tolerance")]
    MixedModes,
}
