use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("undefined state: {0}")]
    UndefinedState(String),

    #[error("matching condition unreachable: {0}")]
    UnreachableMatching(String),

    #[error("resonance ambiguous: {0}")]
    AmbiguousResonance(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("step size {dt:e} us exceeds the bound {bound:e} us (max rate {max_rate:e} rad/us)")]
    StepTooLarge { dt: f64, bound: f64, max_rate: f64 },

    #[error("integration drift at t = {t} us with dt = {dt:e} us: {detail}")]
    IntegrationDrift { t: f64, dt: f64, detail: String },

    #[error("run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("wrong initial state: {0}")]
    WrongInitialState(String),

    #[error("no FWHM: {0}")]
    NoFwhm(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
