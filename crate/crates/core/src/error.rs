use thiserror::Error;

/// Errors raised by the simulation, estimation and planning layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("flow undetectable: {positive} sensor(s) with a positive reading")]
    FlowUndetectable { positive: usize },

    #[error("singular sensor geometry: headings {first} and {second} are parallel")]
    SingularGeometry { first: usize, second: usize },

    #[error("duplicate measurement location ({x}, {y})")]
    DuplicateLocation { x: f64, y: f64 },

    #[error("ill-conditioned covariance between points ({a_x}, {a_y}) and ({b_x}, {b_y})")]
    IllConditioned { a_x: f64, a_y: f64, b_x: f64, b_y: f64 },

    #[error("isolated robot at ({x}, {y}): no candidate within {max_travel} m")]
    IsolatedRobot { x: f64, y: f64, max_travel: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {key}: {message}")]
    Config { key: String, message: String },

    #[error("step {step} ({stage}): {source}")]
    Step {
        step: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_step(self, step: usize, stage: &'static str) -> Self {
        Error::Step { step, stage, source: Box::new(self) }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
