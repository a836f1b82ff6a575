use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown group name `{0}` (expected abelian(n), nil3, sl2c or s3lambda)")]
    UnknownGroup(String),
    #[error("s3lambda requires a lambda parameter")]
    MissingLambda,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid chart: {0}")]
    Chart(String),
    #[error("singular metric at site {site}: condition number {condition:.3e}, smallest eigenvalue {min_eig:.3e}")]
    SingularMetric { site: usize, condition: f64, min_eig: f64 },
    #[error("metric is not Hermitian at site {site} (skew residue {residue:.3e})")]
    NotHermitian { site: usize, residue: f64 },
    #[error("numerical consistency check failed: {0}")]
    Consistency(String),
    #[error("degenerate Laplacian symbol: every frame row acts trivially")]
    DegenerateSymbol,
    #[error("flow breakdown at t = {t} (site {site}): {reason}")]
    Breakdown { t: f64, site: usize, reason: String },
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error("decay fit: {0}")]
    Fit(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error("diagnostics series: {0}")]
    Series(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
