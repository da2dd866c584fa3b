use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HsError {
    #[error("parameter point {point:?} lies outside the chart of `{immersion}`")]
    DomainViolation { immersion: String, point: Vec<f64> },

    #[error("`{immersion}` supplies jets up to order {available}, order {requested} was requested")]
    OrderUnavailable {
        immersion: String,
        requested: usize,
        available: usize,
    },

    #[error("degenerate induced metric (rank below {dim}) at {point:?}")]
    DegenerateMetric { dim: usize, point: Vec<f64> },

    #[error("unknown catalog immersion `{0}`")]
    UnknownImmersion(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("operation requires link dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("point {point:?} is not Legendrian (residual {residual:e}); the Lagrangian angle is undefined")]
    NotLegendrian { point: Vec<f64>, residual: f64 },

    #[error("ambiguous winding: total angle {total:.6} rad is not within 0.1 rad of a multiple of 2π")]
    AmbiguousWinding { total: f64 },

    #[error("angle branch unwrapping failed near {point:?}")]
    BranchUnwrap { point: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HsError {
    fn from(e: std::io::Error) -> Self {
        HsError::Io(e.to_string())
    }
}

impl From<csv::Error> for HsError {
    fn from(e: csv::Error) -> Self {
        HsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HsError>;
