use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown loss `{name}`; valid names are: {}", valid.join(", "))]
    UnknownLoss { name: String, valid: Vec<&'static str> },

    #[error("invalid z-grid: {0}")]
    InvalidGrid(String),

    #[error("loss `{loss}` left its evaluation domain at margin z = {z}")]
    LossDomain { loss: String, z: f64 },

    #[error("noise rate must lie strictly inside (0, 1/2), got {0}")]
    InvalidNoiseRate(f64),

    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),

    #[error("counterexample parameter gamma must lie in (0, 1), got {0}")]
    InvalidGamma(f64),

    #[error("vector must be nonzero")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid label {0}; labels must be -1 or +1")]
    InvalidLabel(f64),

    #[error("feature vectors must have at least one finite coordinate, all finite")]
    InvalidFeatures,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("distribution or sample is empty")]
    Empty,

    #[error("non-finite gradient at atom {atom} (margin {margin}) under loss `{loss}`")]
    NonFiniteGradient { atom: usize, margin: f64, loss: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "E[|u.x|] = 0 along the probe direction; the objective is unaffected by projecting \
         onto the subspace orthogonal to u, so probe that subspace instead"
    )]
    FlatDirection,

    #[error("loss `{0}` is not a convex potential function")]
    NotConvexPotential(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad caller input rather than numerical failure.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(self, Error::LossDomain { .. } | Error::NonFiniteGradient { .. } | Error::Io(_))
    }
}
