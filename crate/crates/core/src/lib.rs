//! Energy-delay tradeoffs of a virtual base station (VBS) whose baseband
//! runs on pooled CPU cores.
//!
//! The crate models the power draw of a VBS as a function of its data rate
//! and core allocation, analyses the sleep-when-idle M/G/1-PS queue that
//! serves its flows, and optimizes rate and core count jointly. A
//! discrete-event simulator cross-checks the analytic formulas, and the
//! [`harness`] module drives parameter sweeps and the comparison against a
//! conventional base station under the EARTH model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod lambert;
pub mod optimizer;
pub mod par;
pub mod power;
pub mod queueing;
pub mod radio;
pub mod sim;

pub use error::{Error, ExistenceFailure, Result};
pub use optimizer::{Scenario, TradeoffPoint};
pub use par::Execution;
pub use power::{BusyPowerProfile, ComputeParams, EarthParams, RadioParams};
pub use queueing::{QueueMetrics, TrafficParams, BITS_PER_MB};
pub use radio::LinkBudget;
