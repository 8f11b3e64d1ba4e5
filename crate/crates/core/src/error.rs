use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("search space has no parameters")]
    Empty,
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("unknown parameter `{0}`")]
    UnknownName(String),
    #[error("missing value for parameter `{0}`")]
    Missing(String),
    #[error("value {value} is outside the domain of `{name}`")]
    OutOfDomain { name: String, value: String },
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 2 points to fit, got {0}")]
    TooFewPoints(usize),
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("loss at point {0} is not finite")]
    NonFiniteLoss(usize),
    #[error("invalid surrogate configuration: {0}")]
    InvalidConfig(String),
    #[error("penalized normal equations are singular")]
    Singular,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("start point {0:?} lies outside the box")]
    StartOutsideBox(Vec<f64>),
    #[error("objective is not finite at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomotopyError {
    #[error("homotopy parameter t = {0} is outside [0, 1]")]
    InvalidT(f64),
    #[error("surrogate dimensions differ ({f} vs {g})")]
    DimensionMismatch { f: usize, g: usize },
    #[error("homotopy needs at least one step")]
    NoSteps,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("failed to spawn `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("io error talking to child process: {0}")]
    Io(#[from] std::io::Error),
    #[error("child process exited with {0}")]
    ExitStatus(std::process::ExitStatus),
    #[error("child process timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("malformed child output: {0}")]
    Protocol(String),
    #[error("empty command")]
    EmptyCommand,
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("{name} is undefined at {point:?}")]
    OutOfDomain { name: &'static str, point: Vec<f64> },
    #[error("parameter `{0}` is missing or not numeric")]
    MissingParam(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("search space is empty")]
    EmptySpace,
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("GP kernel matrix is singular even with jitter {0}")]
    SingularKernel(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid driver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("loss trace is empty")]
    Empty,
    #[error("loss at iteration {0} is not finite")]
    NonFinite(usize),
    #[error("seed lists differ in length ({base} vs {aug})")]
    LengthMismatch { base: usize, aug: usize },
    #[error("no seeds left after excluding zero baselines")]
    NoUsableSeeds,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomotopyStepError {
    #[error("need at least 2 trials for each surrogate (history {history}, recent {recent})")]
    TooFewTrials { history: usize, recent: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Path(#[from] HomotopyError),
}
