use bfm::BfmError;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<BfmError> for CliError {
    fn from(e: BfmError) -> Self {
        let msg = e.to_string();
        match e {
            BfmError::Config(_) | BfmError::InvalidParameter { .. } => CliError::Usage(msg),
            BfmError::Parse { .. } | BfmError::Validation(_) | BfmError::Io { .. } => CliError::Data(msg),
            BfmError::Domain(_)
            | BfmError::Convergence { .. }
            | BfmError::Quadrature { .. }
            | BfmError::SingularHessian { .. } => CliError::Numerical(msg),
        }
    }
}
