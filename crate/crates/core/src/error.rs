use thiserror::Error;

pub type Result<T> = std::result::Result<T, SisError>;

#[derive(Debug, Error)]
pub enum SisError {
    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension cap exceeded: {n} > {cap}")]
    DimensionCap { n: usize, cap: usize },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),

    #[error("unphysical gain {0} (must lie in (0, 1))")]
    UnphysicalGain(f64),

    #[error("JSA matrix is identically zero")]
    ZeroJsa,

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("truncation {0} out of range 1..=6")]
    TruncationOutOfRange(usize),

    #[error("cannot normalize dead channel {0}")]
    DeadChannel(String),

    #[error("missing twofold combination {0}")]
    MissingCombination(String),

    #[error("invalid detection model: {0}")]
    InvalidDetection(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<SisError>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SisError {
    pub fn context(self, context: impl Into<String>) -> Self {
        SisError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            SisError::Numerical(_) => true,
            SisError::Context { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
