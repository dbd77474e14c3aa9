use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid atomic system: {0}")]
    InvalidSystem(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error(
        "cutoff {cutoff} Å requires periodic images beyond ±1 cell along axis {axis} \
         (pair {src}->{dst})"
    )]
    CutoffExceedsImageRange {
        cutoff: f64,
        axis: usize,
        src: usize,
        dst: usize,
    },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("non-finite loss value {0}")]
    NonFiniteLoss(f64),

    #[error("unknown element: {0}")]
    UnknownElement(String),

    #[error("angle {angle} rad is a multiple of 2π/{order}")]
    DegenerateAngle { angle: f64, order: usize },

    #[error("force metrics requested but the model does not predict forces")]
    NoForcesRequested,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown symmetry strategy '{0}'")]
    UnknownStrategy(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
