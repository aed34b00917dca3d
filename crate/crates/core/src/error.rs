use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("{name} = {value} is outside the admissible domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// An iterative solver hit its iteration cap without meeting its tolerance.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A quadratic bound had no admissible root; this indicates corrupted coefficients.
    #[error("no admissible root for {bound} at Y = {y_value:e} (discriminant {discriminant:e})")]
    NoAdmissibleRoot {
        bound: &'static str,
        y_value: f64,
        discriminant: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("step size underflow at tau = {tau} (h = {step:e})")]
    StepSizeUnderflow { tau: f64, step: f64 },

    #[error("integration reached tau = {t_max} without the requested event")]
    TimeLimit { t_max: f64 },

    #[error("non-finite state at tau = {tau}")]
    NonFinite { tau: f64 },

    /// A hypothesis of a trajectory estimate failed along the computed arc.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            domain,
        }
    }

    /// True for failures raised by the ODE integrator.
    pub fn is_integration_failure(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. } | Error::TimeLimit { .. } | Error::NonFinite { .. }
        )
    }
}
