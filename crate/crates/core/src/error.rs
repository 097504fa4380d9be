use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("density matrix trace is {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("density matrix has negative eigenvalue {eigenvalue:e}")]
    NotPositive { eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrator step size underflow at t = {time} ns (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("matrix is not of the resonant two-drive ladder form: {0}")]
    NotStirapForm(String),

    #[error("degenerate eigenvalues at t = {time} ns")]
    Degenerate { time: f64 },

    #[error("calibration matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("sample rate too low: tone at {freq} rad/ns exceeds Nyquist {nyquist} rad/ns")]
    Nyquist { freq: f64, nyquist: f64 },

    #[error("two-photon resonance violated: phase drifts at {drift:e} rad/ns")]
    ResonanceViolated { drift: f64 },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
