use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires negative effective detuning, got delta = {delta}")]
    PositiveDetuning { delta: f64 },

    #[error("q = {q} is outside the admissible range {range}")]
    QOutOfRange { q: f64, range: &'static str },

    #[error("dispersion relation evaluated at Re(s) = {re} < 0")]
    LeftHalfPlane { re: f64 },

    #[error("velocity distribution is not symmetric (max deviation {deviation:e})")]
    AsymmetricDistribution { deviation: f64 },

    #[error("velocity distribution is invalid: {0}")]
    InvalidDistribution(String),

    #[error("quadrature did not converge (estimated error {error:e}, requested {requested:e})")]
    QuadratureNotConverged { error: f64, requested: f64 },

    #[error("root search exhausted: the argument principle counts {zeros} zero(s) but Newton failed from every seed")]
    SearchExhausted { zeros: i64 },

    #[error("pump strength is at or below threshold (eta / eta_c = {ratio})")]
    BelowThreshold { ratio: f64 },

    #[error("no critical particle number in [1, {n_max}]")]
    NoCriticalParticleNumber { n_max: u64 },

    #[error("trajectory diverged at t = {t}: {what}")]
    Diverged { t: f64, what: String },

    #[error("{} of {total} trajectories failed; first: {}", failures.len(), failures.first().map(|f| f.to_string()).unwrap_or_default())]
    EnsembleFailed {
        total: usize,
        failures: Vec<TrajectoryFailure>,
    },

    #[error("mass drifted by {drift:e} (tolerance {tolerance:e}) at t = {t}")]
    MassDrift { t: f64, drift: f64, tolerance: f64 },

    #[error("negative density {value:e} at v = {v} (t = {t})")]
    PositivityViolation { t: f64, v: f64, value: f64 },

    #[error("fit did not converge: {0}")]
    FitNotConverged(String),

    #[error("sample too small: {got} < {needed}")]
    SampleTooSmall { got: usize, needed: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFailure {
    pub initial_condition: usize,
    pub realisation: usize,
    pub error: Box<Error>,
}

impl std::fmt::Display for TrajectoryFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "trajectory ({}, {}): {}",
            self.initial_condition, self.realisation, self.error
        )
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
