use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which of the two energy-optimum existence conditions failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExistenceFailure {
    /// Arrivals are so frequent that switching energy outweighs the
    /// static saving from sleeping.
    ArrivalRateTooHigh,
    /// The offered load already exceeds the closed-form energy-optimal rate.
    OfferedLoadTooHigh,
}

impl std::fmt::Display for ExistenceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExistenceFailure::ArrivalRateTooHigh => {
                write!(f, "arrival rate exceeds (P_o - P_sleep) / (2 E_sw)")
            }
            ExistenceFailure::OfferedLoadTooHigh => {
                write!(f, "offered load lambda*L is not below the energy-optimal rate")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("CPU load {load:.6} exceeds 1 (rate needs more cores than allocated)")]
    InfeasibleLoad { load: f64 },

    #[error("transmit power {p_out} W exceeds the cap of {cap} W")]
    PowerCapExceeded { p_out: f64, cap: f64 },

    #[error("spectral efficiency r/W = {ratio} exceeds the limit {limit}")]
    RateExponentOverflow { ratio: f64, limit: f64 },

    #[error("unstable queue: rate {rate} b/s does not exceed offered load {offered} b/s")]
    UnstableQueue { rate: f64, offered: f64 },

    #[error("argument {x} is outside the domain of the principal Lambert W branch")]
    LambertDomain { x: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("no interior stationary point: cost is increasing in rate at {rate} b/s")]
    NoInteriorStationaryPoint { rate: f64 },

    #[error("no energy-optimal rate: {0}")]
    NoEnergyOptimum(ExistenceFailure),

    #[error("{n_cores} core(s) cannot sustain the rate-independent compute demand")]
    InsufficientCores { n_cores: u32 },

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors that mark an operating point as unreachable rather
    /// than a malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleLoad { .. }
                | Error::PowerCapExceeded { .. }
                | Error::RateExponentOverflow { .. }
                | Error::UnstableQueue { .. }
                | Error::NoEnergyOptimum(_)
                | Error::InsufficientCores { .. }
                | Error::InfeasibleScenario(_)
                | Error::NoInteriorStationaryPoint { .. }
        )
    }
}
