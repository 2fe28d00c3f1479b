use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("noise power must be positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("energy-receiver channel is identically zero")]
    ZeroChannel,

    #[error("position ({x}, {y}) lies outside the region")]
    OutsideRegion { x: f64, y: f64 },

    #[error("region is too small to place {n} antennas at spacing {spacing}")]
    RegionTooSmall { n: usize, spacing: f64 },

    #[error("SINR target {required:.6} unreachable: at most {max_achievable:.6} with the initial layout")]
    Infeasible { max_achievable: f64, required: f64 },

    #[error("no feasible point in the oracle grid")]
    NoFeasibleGridPoint,

    #[error("QCQP feasible set is empty")]
    EmptyFeasibleSet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
