//! Optimal data rate and core count.
//!
//! Every busy-power profile in this crate has the shape
//! `P_busy(r) = P_o + k r + (2^(r/W) - 1) / G` (see [`PowerShape`]), so the
//! average power can be rewritten as
//!
//! ```text
//! E{P} = P_sleep + 2 lambda E_sw + lambda L k + lambda L (P_s + (2^(r/W) - 1) / G) / r
//! ```
//!
//! Setting `dz/dr = 0` for `z = E{P} + alpha E{n}` gives the fixed point
//!
//! ```text
//! W0( alpha G / e * (r / (r - lambda L))^2 + (G P_s - 1) / e ) = r ln2 / W - 1
//! ```
//!
//! whose left side falls and right side rises in `r`, so the root is unique
//! and bisection finds it unconditionally. With `alpha = 0` it has the closed
//! form `r_e = W / ln2 * (W0((G P_s - 1) / e) + 1)`, which does not depend
//! on the rate-linear compute term `k`.
//!
//! Adding a core raises `z` by `rho * P_Bm` at every fixed rate (only the
//! busy fraction of time pays for the extra idle core), and raises the
//! optimal rate because `P_s` grows.

use std::f64::consts::{E, LN_2};

use crate::error::{Error, ExistenceFailure, Result};
use crate::lambert::{lambert_w0, BRANCH_POINT};
use crate::par::Execution;
use crate::power::{self, BusyPowerProfile, ComputeParams, LoadCheck, PowerShape, RadioParams};
use crate::queueing::{average_power, queue_metrics, rate_for_delay, system_cost, TrafficParams};
use crate::radio::LinkBudget;

/// Searches stay in `r > lambda L (1 + STABILITY_MARGIN)`.
pub const STABILITY_MARGIN: f64 = 1e-9;

const MAX_BISECTIONS: usize = 400;
const MAX_DOUBLINGS: usize = 2000;
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub compute: ComputeParams,
    pub radio: RadioParams,
    pub link: LinkBudget,
    pub traffic: TrafficParams,
    /// Weight of the mean queue length, W per flow.
    pub alpha: f64,
}

impl Scenario {
    pub fn new(
        compute: ComputeParams,
        radio: RadioParams,
        link: LinkBudget,
        traffic: TrafficParams,
        alpha: f64,
    ) -> Result<Self> {
        let sc = Scenario {
            compute,
            radio,
            link,
            traffic,
            alpha,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.compute.validate()?;
        self.radio.validate()?;
        self.traffic.validate()?;
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be non-negative and finite"));
        }
        let (a, b) = (self.radio.bandwidth, self.link.bandwidth);
        if ((a - b) / b).abs() > 1e-12 {
            return Err(Error::invalid(
                "bandwidth",
                format!("radio ({a} Hz) and link budget ({b} Hz) disagree"),
            ));
        }
        Ok(())
    }

    pub fn gain(&self) -> f64 {
        self.link.channel_gain()
    }

    pub fn compute_for(&self, n_cores: u32) -> ComputeParams {
        self.compute.with_cores(n_cores)
    }

    /// VBS profile with `n_cores`, rejecting rates beyond the core limit.
    pub fn profile(&self, n_cores: u32) -> BusyPowerProfile {
        BusyPowerProfile::vbs(self.compute_for(n_cores), self.radio.clone(), self.gain())
    }

    /// VBS profile that evaluates the affine compute model at any rate.
    pub fn unconstrained_profile(&self, n_cores: u32) -> BusyPowerProfile {
        BusyPowerProfile::Vbs {
            compute: self.compute_for(n_cores),
            radio: self.radio.clone(),
            gain: self.gain(),
            load_check: LoadCheck::Ignore,
        }
    }

    pub fn with_traffic(&self, traffic: TrafficParams) -> Self {
        Scenario {
            traffic,
            ..self.clone()
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Scenario { alpha, ..self.clone() }
    }

    fn lower_guard(&self) -> f64 {
        self.traffic.offered_load() * (1.0 + STABILITY_MARGIN)
    }
}

/// One evaluated operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub rate: f64,
    pub n_cores: u32,
    pub rho: f64,
    pub mean_queue_len: f64,
    pub mean_delay: f64,
    pub avg_power: f64,
    pub cost: f64,
}

/// Evaluate the model at `(r, n_cores)`, enforcing the core limit.
pub fn evaluate_point(sc: &Scenario, r: f64, n_cores: u32) -> Result<TradeoffPoint> {
    let profile = sc.profile(n_cores);
    let q = queue_metrics(&sc.traffic, r)?;
    let avg_power = average_power(&profile, &sc.traffic, r)?;
    Ok(TradeoffPoint {
        rate: r,
        n_cores,
        rho: q.rho,
        mean_queue_len: q.mean_queue_len,
        mean_delay: q.mean_delay,
        avg_power,
        cost: avg_power + sc.alpha * q.mean_queue_len,
    })
}

/// Largest rate whose compute demand fits the cores: `(N_c s - c0) / kappa`.
pub fn max_supportable_rate(c: &ComputeParams) -> Result<f64> {
    let capacity = f64::from(c.n_cores) * c.cpu_speed;
    if capacity <= c.c0 {
        return Err(Error::InsufficientCores { n_cores: c.n_cores });
    }
    Ok((capacity - c.c0) / c.kappa)
}

/// Argument of W0 in the stationarity condition at rate `r`.
pub fn stationarity_argument(shape: &PowerShape, t: &TrafficParams, alpha: f64, r: f64) -> f64 {
    let g = shape.radio_gain;
    let ratio = r / (r - t.offered_load());
    (alpha * g * ratio * ratio + g * shape.sleep_adjusted(t.arrival_rate) - 1.0) / E
}

/// `W0(argument(r)) - (r ln2 / W - 1)`; positive while the cost still falls.
pub fn shape_optimality_gap(shape: &PowerShape, t: &TrafficParams, alpha: f64, r: f64) -> Result<f64> {
    let offered = t.offered_load();
    if !(r > offered) {
        return Err(Error::UnstableQueue { rate: r, offered });
    }
    let arg = stationarity_argument(shape, t, alpha, r);
    if arg < BRANCH_POINT {
        return Err(Error::NoInteriorStationaryPoint { rate: r });
    }
    Ok(lambert_w0(arg)? - (r * LN_2 / shape.bandwidth - 1.0))
}

/// Sign-faithful gap: below the W0 domain the cost is increasing in `r`.
fn gap_or_negative(shape: &PowerShape, t: &TrafficParams, alpha: f64, r: f64) -> Result<f64> {
    match shape_optimality_gap(shape, t, alpha, r) {
        Err(Error::NoInteriorStationaryPoint { .. }) => Ok(-1.0),
        other => other,
    }
}

/// Closed-form energy-optimal rate of a profile shape, ignoring existence.
pub fn shape_energy_optimal_rate(shape: &PowerShape, t: &TrafficParams) -> Result<f64> {
    let arg = (shape.radio_gain * shape.sleep_adjusted(t.arrival_rate) - 1.0) / E;
    Ok(shape.bandwidth / LN_2 * (lambert_w0(arg)? + 1.0))
}

/// Unique root of the stationarity condition in `(lambda L, inf)`.
pub fn shape_optimal_rate(shape: &PowerShape, t: &TrafficParams, alpha: f64) -> Result<f64> {
    let lower = t.offered_load() * (1.0 + STABILITY_MARGIN);
    if alpha == 0.0 {
        let r = shape_energy_optimal_rate(shape, t).map_err(|e| match e {
            Error::LambertDomain { .. } => Error::NoInteriorStationaryPoint { rate: lower },
            other => other,
        })?;
        return if r > lower {
            Ok(r)
        } else {
            Err(Error::NoInteriorStationaryPoint { rate: lower })
        };
    }

    let mut lo = lower;
    if gap_or_negative(shape, t, alpha, lo)? <= 0.0 {
        return Err(Error::NoInteriorStationaryPoint { rate: lo });
    }
    let mut hi = t.offered_load() * (1.0 + 1e-6);
    let mut doublings = 0;
    while gap_or_negative(shape, t, alpha, hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NoConvergence {
                what: "optimal-rate bracket",
                iterations: doublings,
            });
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if gap_or_negative(shape, t, alpha, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "optimal-rate bisection",
        iterations: MAX_BISECTIONS,
    })
}

/// Stationarity gap at rate `r` for the scenario's own core count.
pub fn optimality_gap(sc: &Scenario, r: f64) -> Result<f64> {
    shape_optimality_gap(&sc.profile(sc.compute.n_cores).shape(), &sc.traffic, sc.alpha, r)
}

/// Unconstrained cost-minimizing rate `r*` for `n_cores`.
pub fn solve_optimal_rate(sc: &Scenario, n_cores: u32) -> Result<f64> {
    shape_optimal_rate(&sc.profile(n_cores).shape(), &sc.traffic, sc.alpha)
}

/// Outcome of the energy-optimum existence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Existence {
    pub failure: Option<ExistenceFailure>,
    /// `(P_o - P_sleep) / (2 E_sw)`, infinite without switching cost.
    pub arrival_rate_bound: f64,
    /// `W / (lambda ln2) * (W0((G P_s - 1) / e) + 1)`, when defined.
    pub file_size_bound: Option<f64>,
}

impl Existence {
    pub fn exists(&self) -> bool {
        self.failure.is_none()
    }
}

/// Existence conditions of a unique energy-optimal rate for a profile shape.
pub fn shape_energy_optimal_exists(shape: &PowerShape, t: &TrafficParams) -> Existence {
    let margin = shape.static_w - shape.sleep_w;
    let arrival_rate_bound = if shape.e_switch > 0.0 {
        margin / (2.0 * shape.e_switch)
    } else if margin > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let file_size_bound = shape_energy_optimal_rate(shape, t).ok().map(|r| r / t.arrival_rate);
    let failure = if !(t.arrival_rate < arrival_rate_bound) {
        Some(ExistenceFailure::ArrivalRateTooHigh)
    } else if !file_size_bound.is_some_and(|b| t.mean_file_size < b) {
        Some(ExistenceFailure::OfferedLoadTooHigh)
    } else {
        None
    };
    Existence {
        failure,
        arrival_rate_bound,
        file_size_bound,
    }
}

pub fn energy_optimal_exists(sc: &Scenario, n_cores: u32) -> Existence {
    shape_energy_optimal_exists(&sc.profile(n_cores).shape(), &sc.traffic)
}

/// Closed-form energy-optimal rate `r_e*`; independent of `kappa` and `alpha`.
pub fn energy_optimal_rate(sc: &Scenario, n_cores: u32) -> Result<f64> {
    let shape = sc.profile(n_cores).shape();
    if let Some(f) = shape_energy_optimal_exists(&shape, &sc.traffic).failure {
        return Err(Error::NoEnergyOptimum(f));
    }
    shape_energy_optimal_rate(&shape, &sc.traffic)
}

/// Limit of the average power as the delay grows without bound.
pub fn asymptotic_power(sc: &Scenario, n_cores: u32) -> f64 {
    let c = sc.compute_for(n_cores);
    let offered = sc.traffic.offered_load();
    power::static_power(&c, &sc.radio)
        + power::bbu_rate_slope(&c) * offered
        + (offered / sc.radio.bandwidth * LN_2).exp_m1() / (sc.gain() * sc.radio.pa_efficiency)
}

/// Why a rate entered the candidate set of [`joint_optimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    /// Unconstrained optimum reachable with this many cores.
    LocalOptimum,
    /// Unconstrained optimum out of reach; clamped to the core limit.
    CoreLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub point: TradeoffPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOptimum {
    pub best: TradeoffPoint,
    pub candidates: Vec<Candidate>,
}

/// Joint search over rate and core count.
///
/// Walks `N_c = 1, 2, ...`: while the cost-minimizing rate needs more cores
/// than allocated, the core-limited rate `r_M(N_c)` becomes a candidate and
/// one more core is tried; the first core count that reaches its optimum
/// contributes it and ends the walk, since every further core costs more at
/// every rate. The cheapest candidate wins; ties go to fewer cores.
pub fn joint_optimize(sc: &Scenario, n_cores_max: u32) -> Result<JointOptimum> {
    if n_cores_max < 1 {
        return Err(Error::invalid("n_cores_max", "must be at least 1"));
    }
    let lower = sc.lower_guard();
    let mut candidates = Vec::new();
    for n in 1..=n_cores_max {
        let r_max = match max_supportable_rate(&sc.compute_for(n)) {
            Ok(r) if r > lower => r,
            Ok(_) | Err(Error::InsufficientCores { .. }) => continue,
            Err(e) => return Err(e),
        };
        let r_hat = match solve_optimal_rate(sc, n) {
            Ok(r) => r,
            // cost increases over the whole stable range
            Err(Error::NoInteriorStationaryPoint { .. }) => lower,
            Err(e) => return Err(e),
        };
        if r_hat <= r_max {
            candidates.push(Candidate {
                kind: CandidateKind::LocalOptimum,
                point: evaluate_point(sc, r_hat, n)?,
            });
            break;
        }
        candidates.push(Candidate {
            kind: CandidateKind::CoreLimit,
            point: evaluate_point(sc, r_max, n)?,
        });
    }
    let mut best: Option<TradeoffPoint> = None;
    for c in &candidates {
        match best {
            Some(b) if c.point.cost >= b.cost - TIE_TOLERANCE * b.cost.abs() => {}
            _ => best = Some(c.point),
        }
    }
    let best = best.ok_or_else(|| {
        Error::InfeasibleScenario(format!(
            "offered load {} b/s exceeds what {n_cores_max} core(s) can serve",
            sc.traffic.offered_load()
        ))
    })?;
    Ok(JointOptimum { best, candidates })
}

/// Core allocation for a tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreSelection {
    Fixed(u32),
    /// Fewest cores that support each rate, up to `max`.
    Auto {
        max: u32,
    },
}

/// Fewest cores whose capacity covers rate `r`.
pub fn min_cores_for_rate(c: &ComputeParams, r: f64) -> u32 {
    let needed = ((c.c0 + c.kappa * r) / c.cpu_speed).ceil();
    if needed >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        (needed as u32).max(1)
    }
}

/// Operating point delivering mean delay `delay`.
pub fn point_for_delay(sc: &Scenario, cores: CoreSelection, delay: f64) -> Result<TradeoffPoint> {
    let r = rate_for_delay(&sc.traffic, delay)?;
    let n = match cores {
        CoreSelection::Fixed(n) => n,
        CoreSelection::Auto { max } => {
            let n = min_cores_for_rate(&sc.compute, r);
            if n > max {
                return Err(Error::InfeasibleLoad {
                    load: power::cpu_load(&sc.compute_for(max), r).value(),
                });
            }
            n
        }
    };
    evaluate_point(sc, r, n)
}

/// Points along the energy-delay curve, one per target delay, in grid order.
pub fn tradeoff_curve(
    sc: &Scenario,
    cores: CoreSelection,
    delays: &[f64],
    exec: Execution,
) -> Vec<Result<TradeoffPoint>> {
    exec.map(delays, |&d| point_for_delay(sc, cores, d))
}

/// Cost at rate `r` ignoring the core limit; for comparisons with `r*`.
pub fn unconstrained_cost(sc: &Scenario, n_cores: u32, r: f64) -> Result<f64> {
    system_cost(&sc.unconstrained_profile(n_cores), &sc.traffic, sc.alpha, r)
}
