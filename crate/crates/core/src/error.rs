use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("initial state not representable: {0}")]
    InitialState(String),

    #[error("invalid propagator config: {0}")]
    Propagator(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing config key `{0}`")]
    MissingKey(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::MissingKey(_)
                | Error::Domain(_)
                | Error::Grid(_)
                | Error::InitialState(_)
                | Error::Propagator(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
