use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("contraction requires at least one paired mode")]
    EmptyPairing,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series too short: length {len}, need more than {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("degenerate regression: {0}")]
    Degenerate(String),

    #[error("no alpha in the grid makes every series stationary (grid {grid:?})")]
    NoStationaryAlpha { grid: Vec<f64> },

    #[error("rank {rank} exceeds extent {extent} at mode {mode}")]
    RankExceedsExtent { mode: usize, rank: usize, extent: usize },

    #[error("singular normal equations in {0}; raise lambda above zero to regularize")]
    Singular(String),

    #[error("total sum of squares is zero; predicted R^2 undefined")]
    ZeroTotalSumOfSquares,

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("{path}: row {row}: {msg}")]
    Data { path: String, row: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}
