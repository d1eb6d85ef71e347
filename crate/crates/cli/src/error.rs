use thiserror::Error;

/// Process exit codes.
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => EXIT_INPUT,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<mulchtherm::fem::FemError> for CliError {
    fn from(e: mulchtherm::fem::FemError) -> Self {
        use mulchtherm::fem::FemError;
        match e {
            FemError::Domain { .. } | FemError::ProfileLength { .. } | FemError::LengthMismatch { .. } => {
                Self::Input(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<mulchtherm::doe::DoeError> for CliError {
    fn from(e: mulchtherm::doe::DoeError) -> Self {
        use mulchtherm::doe::DoeError;
        match e {
            DoeError::Simulation { .. } => Self::Numerical(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}
