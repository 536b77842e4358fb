use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eta too large for real exponent (m/(1+eta) = {m_tilde})")]
    EtaTooLarge { m_tilde: f64 },

    #[error("profile integration failed at r = {r}: {reason}")]
    Integration { r: f64, reason: String },

    #[error("step-size underflow at r = {r} (h = {h})")]
    StepUnderflow { r: f64, h: f64 },

    #[error("rescaled evaluation out of range: r = {r} exceeds {limit}")]
    OutOfRange { r: f64, limit: f64 },

    #[error("fit window too short: {nodes} nodes (need at least 10)")]
    WindowTooShort { nodes: usize },

    #[error("positivity lost at node (i = {i}, j = {j}): u = {u}")]
    PositivityLost { i: usize, j: usize, u: f64 },

    #[error("operator undefined: {0}")]
    Domain(String),

    #[error("newton did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("linearization singular")]
    LinearizationSingular,

    #[error("inverse iteration stagnated after {} iterations; rayleigh history {history:?}", history.len())]
    EigenStagnation { history: Vec<f64> },

    #[error("continuity obstruction at t={t}: {condition}")]
    ContinuationObstruction { t: f64, condition: String },

    #[error("direction field degenerate: |D(u-r)| = {value} exceeds {bound} at (r = {r}, y = {y})")]
    NonDegeneracy { value: f64, bound: f64, r: f64, y: f64 },

    #[error("characteristic left the strip at y = {y}")]
    CharacteristicEscaped { y: f64 },

    #[error("seam mismatch {value:e} exceeds {tol:e} at (r = {r}, y = {y})")]
    SeamMismatch { value: f64, tol: f64, r: f64, y: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: String, reason: String },

    #[error("{stage} stage: {source}")]
    Stage { stage: &'static str, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 3 for configuration problems, 2 for everything else.
    /// Certificate failures are not errors and map to 1 elsewhere.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) | Error::InvalidParameter(_) | Error::EtaTooLarge { .. } => 3,
            _ => 2,
        }
    }

    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| match e {
            Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
