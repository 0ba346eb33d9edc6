use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Lamb-Dicke expansion not valid: k_L * x = {kx:.3e} (need < 0.1)")]
    LambDickeViolation { kx: f64 },

    #[error("no measurement record exists when eta * kappa_s = 0")]
    MeasurementOff,

    #[error("integrator blow-up: {0}")]
    IntegratorBlowup(String),

    #[error("singular linear system while solving for {0}")]
    SingularSystem(&'static str),

    #[error("Fock truncation leak: top-level population {population:.3e} exceeds {threshold:.1e}")]
    TruncationLeak { population: f64, threshold: f64 },

    #[error("density matrix lost positivity (eigenvalue below {threshold:.1e})")]
    PositivityLoss { threshold: f64 },

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at grid point eta={eta}, k_tilde={k_tilde}: {source}")]
    AtGridPoint {
        eta: f64,
        k_tilde: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// The innermost error, with step and grid-point context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } | Error::AtGridPoint { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidParameter { .. } | Error::MeasurementOff | Error::LambDickeViolation { .. }
        )
    }
}

/// Checks that `value` is finite and returns it.
pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
