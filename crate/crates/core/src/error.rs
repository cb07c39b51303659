use thiserror::Error;

pub type Result<T> = std::result::Result<T, FsFgwError>;

#[derive(Debug, Error)]
pub enum FsFgwError {
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("structure matrix is not symmetric: |C[{i}][{j}] - C[{j}][{i}]| = {gap:e}")]
    AsymmetricCost { i: usize, j: usize, gap: f64 },

    #[error("invalid structure matrix: {0}")]
    InvalidStructure(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("infeasible transport problem: marginal sums {row_sum} vs {col_sum}")]
    Infeasible { row_sum: f64, col_sum: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("instance too large for direct contraction: n*m = {nm} > {cap}")]
    InstanceTooLarge { nm: usize, cap: usize },

    #[error("lasso/ridge mode needs either lambda or a suppression fraction")]
    MissingLambda,

    #[error("invalid group partition: {0}")]
    InvalidPartition(String),

    #[error("suppression fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no connected graph with enough nodes after {attempts} attempts")]
    DisconnectedAfterRetries { attempts: usize },

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("district {district} is disconnected; components: {components:?}")]
    DisconnectedDistrict {
        district: String,
        components: Vec<Vec<String>>,
    },

    #[error("district count mismatch: {left} vs {right}")]
    DistrictCountMismatch { left: usize, right: usize },

    #[error("precinct universe mismatch: {0}")]
    PrecinctUniverseMismatch(String),

    #[error("pair ({i}, {j}) failed: {source}")]
    PairFailed {
        i: usize,
        j: usize,
        #[source]
        source: Box<FsFgwError>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FsFgwError {
    /// True for errors caused by bad inputs or configuration rather than by
    /// a solver running into trouble.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            FsFgwError::Infeasible { .. }
                | FsFgwError::NumericalFailure(_)
                | FsFgwError::InstanceTooLarge { .. }
                | FsFgwError::DisconnectedAfterRetries { .. }
                | FsFgwError::PairFailed { .. }
        )
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            FsFgwError::DimensionMismatch { .. } => "DimensionMismatch",
            FsFgwError::InvalidMeasure(_) => "InvalidMeasure",
            FsFgwError::AsymmetricCost { .. } => "AsymmetricCost",
            FsFgwError::InvalidStructure(_) => "InvalidStructure",
            FsFgwError::ShapeMismatch { .. } => "ShapeMismatch",
            FsFgwError::Infeasible { .. } => "Infeasible",
            FsFgwError::NumericalFailure(_) => "NumericalFailure",
            FsFgwError::InstanceTooLarge { .. } => "InstanceTooLarge",
            FsFgwError::MissingLambda => "MissingLambda",
            FsFgwError::InvalidPartition(_) => "InvalidPartition",
            FsFgwError::InvalidFraction(_) => "InvalidFraction",
            FsFgwError::InvalidConfig(_) => "InvalidConfig",
            FsFgwError::DisconnectedAfterRetries { .. } => "DisconnectedAfterRetries",
            FsFgwError::EmptySet(_) => "EmptySet",
            FsFgwError::InvalidMatrix(_) => "InvalidMatrix",
            FsFgwError::DisconnectedDistrict { .. } => "DisconnectedDistrict",
            FsFgwError::DistrictCountMismatch { .. } => "DistrictCountMismatch",
            FsFgwError::PrecinctUniverseMismatch(_) => "PrecinctUniverseMismatch",
            FsFgwError::PairFailed { .. } => "PairFailed",
            FsFgwError::Parse(_) => "Parse",
            FsFgwError::Io(_) => "Io",
            FsFgwError::Json(_) => "Json",
            FsFgwError::Csv(_) => "Csv",
        }
    }
}
