use crate::grid::GridField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("ball of radius {radius} at {center:?} is not contained in the grid box")]
    BallOutsideGrid { center: Vec<f64>, radius: f64 },

    #[error("radius {radius} spans only {cells:.2} grid cells (need at least 4)")]
    DegenerateRadius { radius: f64, cells: f64 },

    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Box<GridField>,
    },

    #[error("non-finite value encountered in {0}")]
    NotFinite(&'static str),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Picard iteration diverged at iteration {iteration} (residual {residual:.3e})")]
    PicardDivergence { iteration: usize, residual: f64 },

    #[error("malformed field data: {0}")]
    Format(String),

    #[error("insufficient points: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("interface exits the window at tangential offset {0:?}")]
    InterfaceExitsWindow(Vec<f64>),

    #[error("window contains no interface")]
    NoInterface,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
