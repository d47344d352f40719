use thiserror::Error;

/// Errors raised while building or analysing an open system.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid hole: {0}")]
    InvalidHole(String),

    /// The hole leaves nothing to iterate on (e.g. it swallows a whole branch).
    #[error("degenerate system: {0}")]
    Degenerate(String),

    /// The tower or partition could not be built within the configured limits.
    #[error("construction failure: {0}")]
    Construction(String),

    /// A quantitative precondition of the construction does not hold.
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    /// All mass left the system; only the trivial conditionally invariant measure exists.
    #[error("total escape: the density has zero mass after one application of the transfer operator")]
    TotalEscape,

    #[error("invalid hole family: {0}")]
    Family(String),

    #[error(
        "only {survivors} particles survived to step {step}; at least {required} are needed for {bins} bins (increase the particle count)"
    )]
    Starvation {
        step: usize,
        survivors: u64,
        required: u64,
        bins: usize,
    },

    #[error("{}", match .line {
        Some(line) => format!("config error (line {line}): {msg}"),
        None => format!("config error: {msg}"),
    })]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
