use std::fmt;

/// Errors raised by the solvers and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    /// An opinion lies outside the ball on which the kernel is certified.
    #[error("domain violation: {component} has norm {norm} > declared radius {radius}")]
    DomainViolation {
        component: String,
        norm: f64,
        radius: f64,
    },

    /// Exact evaluation would exceed the configured work cap.
    #[error("capacity exceeded: {what} needs {needed} > cap {cap}; {advice}")]
    Capacity {
        what: &'static str,
        needed: f64,
        cap: f64,
        advice: &'static str,
    },

    /// The operation is not available for this kernel variant.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    /// Numerical data is unusable (NaN costs and similar).
    #[error("data error: {0}")]
    Data(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// A study trajectory left the certified opinion ball.
    #[error("blow-up: {0}")]
    BlowUp(BlowUp),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Where and when an integration left the declared opinion ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    /// First grid time at which an opinion was found outside the ball.
    pub time: f64,
    /// Index of the offending agent (atom, node).
    pub index: usize,
    pub norm: f64,
    pub radius: f64,
}

impl fmt::Display for BlowUp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent {} reached |opinion| = {} > {} at t = {}",
            self.index, self.norm, self.radius, self.time
        )
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Capacity { .. } => 3,
            Error::BlowUp(_) => 4,
            _ => 1,
        }
    }
}
