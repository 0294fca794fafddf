use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdrcError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("input matrix B is singular (sigma_min / sigma_max = {ratio:e})")]
    SingularInput { ratio: f64 },

    #[error("time constants must be strictly positive (T[{index}] = {value})")]
    NonPositiveTimeConstant { index: usize, value: f64 },

    #[error("{what} must be strictly positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("{what} must be finite and non-negative, got {value}")]
    InvalidBound { what: &'static str, value: f64 },

    #[error("step {step} exceeds 1e-3 * min(T) = {limit} for the first-order lag")]
    StepTooLarge { step: f64, limit: f64 },

    #[error("duration {duration} is shorter than the step {step}")]
    DurationBelowStep { duration: f64, step: f64 },

    #[error("gain {what}[{index}] must be strictly positive, got {value}")]
    InvalidGain {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{what} is not Hurwitz: eigenvalue {re:e} + {im:e}i")]
    NotHurwitz { what: &'static str, re: f64, im: f64 },

    #[error("{what} is not symmetric positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { what: &'static str, lambda_min: f64 },

    #[error("linear system for {0} is singular")]
    SingularSystem(&'static str),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("non-finite value in closed-loop derivative at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, AdrcError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(AdrcError::Dimension {
            context,
            expected,
            actual,
        })
    }
}

pub(crate) fn check_positive(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(AdrcError::NonPositive { what, value })
    }
}
