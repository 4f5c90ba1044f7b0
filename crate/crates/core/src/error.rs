use thiserror::Error;

/// Failures raised by the numerical routines.
///
/// Every variant carries enough context to be reported as a machine-readable
/// reason by the command-line front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("orbit diverged at step {step}")]
    Diverged { step: usize },

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("converged to an orbit of lower period {0}")]
    ConvergedToLowerPeriod(usize),

    #[error("no period-{q} locking detected within the simulation budget")]
    NoLocking { q: usize },

    #[error("rotation angle undefined: orbit passes within {distance:e} of the center")]
    UndefinedAngle { distance: f64 },

    #[error("point is not on the critical curve (|det| = {det:e})")]
    NotOnCriticalCurve { det: f64 },

    #[error("periodic orbit is not a saddle")]
    NotSaddle,

    #[error("no sign change of the test quantity over [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("periodic orbit family lost at tau = {tau}")]
    FamilyLost { tau: f64 },

    #[error("tracked critical-curve crossing lost at tau = {tau}")]
    CrossingLost { tau: f64 },

    #[error("branch growth exhausted its budget at tau = {tau} without a fate event")]
    FateExhausted { tau: f64 },

    #[error("identical fate at both ends of [{lo}, {hi}]")]
    SameFate { lo: f64, hi: f64 },

    #[error("invariant circle lost at tau = {tau}")]
    InvariantCircleLost { tau: f64 },

    #[error("closed curve is not simple")]
    NotSimple,

    #[error("point lies on the critical curve (|det| = {det:e})")]
    OnCriticalCurve { det: f64 },

    #[error("ordering violated: {0}")]
    OrderingViolated(String),
}

impl Error {
    /// Short stable identifier used in JSON summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Diverged { .. } => "diverged",
            Error::DegenerateParameter(_) => "degenerate_parameter",
            Error::InvalidInput(_) => "invalid_input",
            Error::NoConvergence { .. } => "no_convergence",
            Error::ConvergedToLowerPeriod(_) => "converged_to_lower_period",
            Error::NoLocking { .. } => "no_locking",
            Error::UndefinedAngle { .. } => "undefined_angle",
            Error::NotOnCriticalCurve { .. } => "not_on_critical_curve",
            Error::NotSaddle => "not_saddle",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::FamilyLost { .. } => "family_lost",
            Error::CrossingLost { .. } => "crossing_lost",
            Error::FateExhausted { .. } => "fate_exhausted",
            Error::SameFate { .. } => "same_fate",
            Error::InvariantCircleLost { .. } => "invariant_circle_lost",
            Error::NotSimple => "not_simple",
            Error::OnCriticalCurve { .. } => "on_critical_curve",
            Error::OrderingViolated(_) => "ordering_violated",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
