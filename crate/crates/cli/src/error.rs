use fblab_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 1 invariant failure, 2 input error, 3 solver failure, 4 analysis
    /// precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidParams(_) | CoreError::ResolutionInsufficient(_) | CoreError::Format(_) | CoreError::Io(_) => 2,
        CoreError::NonConvergence { .. }
        | CoreError::NotFinite(_)
        | CoreError::LinearSolve(_)
        | CoreError::PicardDivergence { .. } => 3,
        CoreError::BallOutsideGrid { .. }
        | CoreError::DegenerateRadius { .. }
        | CoreError::InsufficientPoints { .. }
        | CoreError::InterfaceExitsWindow(_)
        | CoreError::NoInterface
        | CoreError::Precondition(_) => 4,
    }
}
