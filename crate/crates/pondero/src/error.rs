use core::fmt;

/// Error type shared by every module in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the documented domain of the routine.
    /// The payload names the offending quantity.
    Domain(&'static str),
    /// The requested quantity diverges on the separatrix (e.g. the
    /// oscillation period at `kappa == 1`).
    InfinitePeriod,
    /// An adaptive basis or level set hit its hard cap before reaching the
    /// requested accuracy.
    Truncation { limit: usize },
    /// Rejection sampling exceeded its retry cap; the requested distribution
    /// is incompatible with the physical domain.
    Resampling { tries: u32 },
    /// An adaptive integrator drove its step size below the representable
    /// resolution at time `t`.
    Stiffness { t: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(f, "argument out of domain: {what}"),
            Error::InfinitePeriod => write!(f, "period diverges on the separatrix"),
            Error::Truncation { limit } => {
                write!(f, "accuracy target unreached at basis cap {limit}")
            }
            Error::Resampling { tries } => {
                write!(f, "sampling rejected {tries} consecutive draws")
            }
            Error::Stiffness { t } => {
                write!(f, "integrator step size collapsed at t = {t:e} s")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
