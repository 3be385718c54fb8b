use thiserror::Error;

/// Errors raised by the physics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole of the exterior log-derivative at x = {x}")]
    Pole { x: f64 },
    #[error("no root on branch {branch}: {reason}")]
    BranchInfeasible { branch: u32, reason: String },
    #[error("phase extraction unstable: |delta(r1) - delta(r2)| = {diff:e} at r = {r}")]
    Extraction { r: f64, diff: f64 },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("observable infeasible: {0}")]
    Infeasible(String),
    #[error("outside validity region (indicator {indicator})")]
    Validity { indicator: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("root finder did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Precondition(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Pole { .. } => "pole",
            Error::BranchInfeasible { .. } => "branch_infeasible",
            Error::Extraction { .. } => "extraction",
            Error::Resolution(_) => "resolution",
            Error::Infeasible(_) => "infeasible",
            Error::Validity { .. } => "validity",
            Error::Precondition(_) => "precondition",
            Error::NoConvergence(_) => "no_convergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
