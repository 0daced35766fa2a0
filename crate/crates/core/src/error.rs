use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage, used to tag errors raised inside an experiment run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Simulate,
    Partition,
    Sampling,
    Combining,
    Metrics,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Simulate => "simulate",
            Stage::Partition => "partition",
            Stage::Sampling => "sampling",
            Stage::Combining => "combining",
            Stage::Metrics => "metrics",
            Stage::Output => "output",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unsupported Newton-Cotes order {0} (supported: 1, 2, 3, 4)")]
    UnsupportedOrder(usize),
    #[error("density has no mass (integral {mass:e}); shard densities may not overlap")]
    ZeroMass { mass: f64 },
    #[error("density must be normalized first")]
    NotNormalized,
    #[error("samples span a zero-width range")]
    DegenerateRange,
    #[error("bandwidth rule produced h = {0} (all samples identical?)")]
    BandwidthZero(f64),
    #[error("invalid samples: {0}")]
    InvalidSamples(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("covariance is numerically singular{}: condition number {condition:e}", shard.map(|s| format!(" for shard {s}")).unwrap_or_default())]
    SingularCovariance { shard: Option<usize>, condition: f64 },
    #[error("all mixture index weights underflowed; shards do not overlap")]
    DegenerateWeights,
    #[error("chain for shard {shard} produced a non-finite draw at iteration {iteration}")]
    ChainDiagnosticFailure { shard: usize, iteration: usize },
    #[error("densities are defined on different grids")]
    GridMismatch,
    #[error("reference density has zero L2 norm")]
    ZeroNorm,
    #[error("densities unavailable: {0}")]
    MissingDensities(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("estimator failed: {0}")]
    Estimator(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_) | Error::Json(_) | Error::InvalidModel(_))
    }

    /// Numerical failures: degenerate densities, singular covariances and the like.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::ZeroMass { .. }
                | Error::NotNormalized
                | Error::DegenerateRange
                | Error::BandwidthZero(_)
                | Error::SingularCovariance { .. }
                | Error::DegenerateWeights
                | Error::ChainDiagnosticFailure { .. }
                | Error::ZeroNorm
                | Error::Estimator(_)
        )
    }
}
