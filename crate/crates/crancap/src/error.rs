use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum CranError {
    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The request would require enumerating more subsets than the
    /// exhaustive routines support.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// A feasibility condition fails; `deficit` quantifies by how much.
    #[error("infeasible: {reason} (deficit {deficit})")]
    Infeasible { reason: String, deficit: f64 },

    /// The channel matrix is zero where a nonzero channel is required.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// A set function was used where verified polymatroid flags are required.
    #[error("unverified set function: {0}")]
    Unverified(String),

    /// Malformed configuration or command line.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CranError>;

impl CranError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CranError::InvalidInput(msg.into())
    }

    pub fn size_limit(msg: impl Into<String>) -> Self {
        CranError::SizeLimit(msg.into())
    }

    /// Conventional process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CranError::Infeasible { .. } | CranError::DegenerateChannel(_) => 3,
            CranError::SizeLimit(_) => 4,
            _ => 2,
        }
    }
}
