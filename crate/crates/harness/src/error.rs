use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("fine step {fine} is not dt / 2^m for dt = {dt}")]
    NonCommensurateSteps { dt: f64, fine: f64 },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Sim(#[from] ieqsim::Error),
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 3 for a diverged
    /// run and 4 for a failed solve.
    pub fn exit_code(&self) -> i32 {
        use ieqsim::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::NonCommensurateSteps { .. } | HarnessError::Io(_) => 2,
            HarnessError::Sim(e) => match e {
                E::Diverged { .. } => 3,
                E::NotPositiveDefinite { .. }
                | E::SingularUpdate { .. }
                | E::NoConvergence { .. }
                | E::NewtonNoConvergence { .. }
                | E::LinearSolveFailure(_) => 4,
                E::DimensionMismatch { .. }
                | E::NegativePotential { .. }
                | E::DegeneratePotential { .. }
                | E::NoSplit
                | E::IndexOutOfRange { .. }
                | E::InvalidParameter(_) => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Config(msg.into()))
}
