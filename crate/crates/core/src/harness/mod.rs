//! Experiment harness behind the command-line tool: single-point
//! evaluation, joint optimization, parameter sweeps, the comparison with a
//! conventional base station, and simulation runs.

pub mod config;
pub mod rows;

use std::io::Write;

use crate::error::Error;
use crate::optimizer::{
    evaluate_point, joint_optimize, max_supportable_rate, point_for_delay, shape_optimal_rate, solve_optimal_rate,
    CandidateKind, CoreSelection, Scenario, TradeoffPoint, STABILITY_MARGIN,
};
use crate::par::Execution;
use crate::power::BusyPowerProfile;
use crate::queueing::{average_power, queue_metrics, TrafficParams};
use crate::sim::{
    compare_with_analytic, simulate, simulate_traced, SimConfig, ValidationReport, VALIDATION_CONFIDENCE,
};

pub use config::{ConfigError, ResolvedConfig, RunOptions, ScenarioFile};
pub use rows::{CompareRow, ResultRow, Source};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("validation failed for: {}", .0.flagged().map(|c| c.name).collect::<Vec<_>>().join(", "))]
    Validation(Box<ValidationReport>),
    #[error("output: {0}")]
    Output(String),
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Output(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Output(e.to_string())
    }
}

pub fn cmd_power(cfg: &ResolvedConfig, rate: f64, n_cores: u32) -> Result<ResultRow, HarnessError> {
    let point = evaluate_point(&cfg.scenario, rate, n_cores)?;
    Ok(ResultRow::analytic(&cfg.id, "power", &point))
}

/// Winning point first, then every candidate the search considered.
pub fn cmd_optimize(cfg: &ResolvedConfig, n_cores_max: u32) -> Result<Vec<ResultRow>, HarnessError> {
    if n_cores_max == 0 {
        return Err(HarnessError::Usage("--cores-max must be at least 1".into()));
    }
    let out = joint_optimize(&cfg.scenario, n_cores_max)?;
    let mut rows = vec![ResultRow::analytic(&cfg.id, "optimize", &out.best)];
    rows.extend(out.candidates.iter().map(|c| {
        let tag = match c.kind {
            CandidateKind::LocalOptimum => "optimize:candidate:local",
            CandidateKind::CoreLimit => "optimize:candidate:core-limit",
        };
        ResultRow::analytic(&cfg.id, tag, &c.point)
    }));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Alpha,
    Lambda,
    FileSize,
    NCores,
    TargetDelay,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Alpha => "alpha",
            SweepVariable::Lambda => "lambda",
            SweepVariable::FileSize => "file_size",
            SweepVariable::NCores => "n_cores",
            SweepVariable::TargetDelay => "target_delay",
        }
    }

    fn quantity(self) -> config::Quantity {
        use config::Quantity;
        match self {
            SweepVariable::Alpha => Quantity::Scalar,
            SweepVariable::Lambda => Quantity::ArrivalRate,
            SweepVariable::FileSize => Quantity::DataSize,
            SweepVariable::NCores => Quantity::Count,
            SweepVariable::TargetDelay => Quantity::Duration,
        }
    }
}

/// `name=start:stop:steps[:log]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub log: bool,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let usage = |m: &str| HarnessError::Usage(format!("sweep spec `{text}`: {m}"));
        let (name, range) = text
            .split_once('=')
            .ok_or_else(|| usage("expected name=start:stop:steps[:log]"))?;
        let variable = match name.trim() {
            "alpha" => SweepVariable::Alpha,
            "lambda" => SweepVariable::Lambda,
            "file_size" => SweepVariable::FileSize,
            "n_cores" => SweepVariable::NCores,
            "target_delay" => SweepVariable::TargetDelay,
            other => return Err(usage(&format!("unknown variable `{other}`"))),
        };
        let parts: Vec<&str> = range.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(usage("expected start:stop:steps[:log]"));
        }
        let q = variable.quantity();
        let start = config::parse_quantity(parts[0], q).map_err(|m| usage(&m))?;
        let stop = config::parse_quantity(parts[1], q).map_err(|m| usage(&m))?;
        let steps: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage("steps must be a positive integer"))?;
        if steps == 0 {
            return Err(usage("steps must be a positive integer"));
        }
        let log = match parts.get(3).map(|s| s.trim()) {
            None | Some("lin") => false,
            Some("log") => true,
            Some(other) => return Err(usage(&format!("unknown spacing `{other}`"))),
        };
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(usage("log spacing needs positive bounds"));
        }
        Ok(SweepSpec {
            variable,
            start,
            stop,
            steps,
            log,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        let v = if self.log {
            config::log_grid(self.start, self.stop, self.steps)
        } else {
            config::linear_grid(self.start, self.stop, self.steps)
        };
        if self.variable == SweepVariable::NCores {
            v.into_iter().map(f64::round).collect()
        } else {
            v
        }
    }
}

/// What each sweep row evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepTarget {
    /// Fixed rate, as `power`.
    Rate(f64),
    /// Fixed mean delay.
    Delay(f64),
    /// Cost-minimizing operating point.
    Optimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub target: SweepTarget,
    /// Fixed core count; `None` lets the sweep choose (minimal cores for a
    /// delay target, joint search when optimizing).
    pub cores: Option<u32>,
    /// Keep `lambda * L` at its configured value while sweeping one factor.
    pub hold_offered_load: bool,
}

pub fn cmd_sweep(
    cfg: &ResolvedConfig,
    spec: &SweepSpec,
    opts: &SweepOptions,
    exec: Execution,
) -> Result<Vec<ResultRow>, HarnessError> {
    let values = spec.values();
    let base = &cfg.scenario;
    let offered = base.traffic.offered_load();
    let rows = exec.map(&values, |&v| {
        let id = format!("{}:{}={}", cfg.id, spec.variable.name(), v);
        match sweep_point(cfg, base, offered, spec.variable, v, opts) {
            Ok(p) => ResultRow::analytic(&id, "sweep", &p),
            Err(e) => ResultRow::infeasible(&id, "sweep", &e.to_string()),
        }
    });
    Ok(rows)
}

fn sweep_point(
    cfg: &ResolvedConfig,
    base: &Scenario,
    offered: f64,
    var: SweepVariable,
    v: f64,
    opts: &SweepOptions,
) -> Result<TradeoffPoint, Error> {
    let mut sc = base.clone();
    let mut cores = opts.cores;
    let mut target = opts.target;
    match var {
        SweepVariable::Alpha => sc.alpha = v,
        SweepVariable::Lambda => {
            let size = if opts.hold_offered_load {
                offered / v
            } else {
                sc.traffic.mean_file_size
            };
            sc.traffic = TrafficParams::new(v, size)?;
        }
        SweepVariable::FileSize => {
            let lambda = if opts.hold_offered_load {
                offered / v
            } else {
                sc.traffic.arrival_rate
            };
            sc.traffic = TrafficParams::new(lambda, v)?;
        }
        SweepVariable::NCores => cores = Some(v as u32),
        SweepVariable::TargetDelay => target = SweepTarget::Delay(v),
    }
    sc.validate()?;
    match target {
        SweepTarget::Rate(r) => evaluate_point(&sc, r, cores.unwrap_or(sc.compute.n_cores)),
        SweepTarget::Delay(d) => {
            let sel = match cores {
                Some(n) => CoreSelection::Fixed(n),
                None => CoreSelection::Auto { max: cfg.run.cores_max },
            };
            point_for_delay(&sc, sel, d)
        }
        SweepTarget::Optimize => match cores {
            Some(n) => best_rate_for_cores(&sc, n),
            None => joint_optimize(&sc, cfg.run.cores_max).map(|o| o.best),
        },
    }
}

/// Cost-minimizing rate with exactly `n` cores, clamped to their capacity.
pub fn best_rate_for_cores(sc: &Scenario, n: u32) -> Result<TradeoffPoint, Error> {
    let lower = sc.traffic.offered_load() * (1.0 + STABILITY_MARGIN);
    let r_max = max_supportable_rate(&sc.compute_for(n))?;
    if r_max <= lower {
        return Err(Error::InfeasibleLoad {
            load: crate::power::cpu_load(&sc.compute_for(n), lower).value(),
        });
    }
    let r = match solve_optimal_rate(sc, n) {
        Ok(r) => r.min(r_max),
        Err(Error::NoInteriorStationaryPoint { .. }) => lower,
        Err(e) => return Err(e),
    };
    evaluate_point(sc, r, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayPolicy {
    /// Both systems on the configured delay grid.
    Grid,
    /// Both systems at the delay minimizing the conventional BS's power.
    CbsOptimal,
    /// Each system at its own minimum-power operating point.
    MinPower,
}

impl DelayPolicy {
    pub fn name(self) -> &'static str {
        match self {
            DelayPolicy::Grid => "grid",
            DelayPolicy::CbsOptimal => "cbs-optimal",
            DelayPolicy::MinPower => "min-power",
        }
    }
}

impl std::str::FromStr for DelayPolicy {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(DelayPolicy::Grid),
            "cbs-optimal" => Ok(DelayPolicy::CbsOptimal),
            "min-power" => Ok(DelayPolicy::MinPower),
            other => Err(HarnessError::Usage(format!(
                "unknown delay policy `{other}` (grid, cbs-optimal, min-power)"
            ))),
        }
    }
}

pub fn cbs_profile(cfg: &ResolvedConfig) -> BusyPowerProfile {
    BusyPowerProfile::earth(cfg.earth.clone(), cfg.scenario.gain(), cfg.scenario.radio.bandwidth)
}

/// Rate minimizing the average power of an arbitrary profile.
pub fn min_power_rate(profile: &BusyPowerProfile, t: &TrafficParams) -> Result<f64, Error> {
    match shape_optimal_rate(&profile.shape(), t, 0.0) {
        Err(Error::NoInteriorStationaryPoint { .. }) => Ok(t.offered_load() * (1.0 + STABILITY_MARGIN)),
        other => other,
    }
}

/// `1 - P_a / P_b` for two profiles serving the same traffic at rate `r`.
pub fn savings_at_rate(a: &BusyPowerProfile, b: &BusyPowerProfile, t: &TrafficParams, r: f64) -> Result<f64, Error> {
    Ok(1.0 - average_power(a, t, r)? / average_power(b, t, r)?)
}

pub fn cmd_compare(
    cfg: &ResolvedConfig,
    policy: DelayPolicy,
    exec: Execution,
) -> Result<Vec<CompareRow>, HarnessError> {
    let sc = &cfg.scenario;
    let cbs = cbs_profile(cfg);
    let auto = CoreSelection::Auto { max: cfg.run.cores_max };
    let row = |vbs: Result<TradeoffPoint, Error>, cbs_rate: Result<f64, Error>| {
        let cbs_eval = cbs_rate.and_then(|r| {
            let q = queue_metrics(&sc.traffic, r)?;
            Ok((q.mean_delay, r, average_power(&cbs, &sc.traffic, r)?))
        });
        let status = match (&vbs, &cbs_eval) {
            (Ok(_), Ok(_)) => rows::STATUS_OK.to_string(),
            (Err(e), _) => format!("infeasible: vbs: {e}"),
            (_, Err(e)) => format!("infeasible: cbs: {e}"),
        };
        let cbs_eval = cbs_eval.ok();
        CompareRow {
            scenario_id: cfg.id.clone(),
            policy: policy.name().into(),
            vbs: vbs.ok(),
            cbs_delay_s: cbs_eval.map(|c| c.0),
            cbs_rate_bps: cbs_eval.map(|c| c.1),
            cbs_power_w: cbs_eval.map(|c| c.2),
            status,
        }
    };
    let out = match policy {
        DelayPolicy::Grid => {
            let grid = cfg.run.delay_grid();
            exec.map(&grid, |&d| {
                let vbs = point_for_delay(sc, auto, d);
                let r = crate::queueing::rate_for_delay(&sc.traffic, d);
                row(vbs, r)
            })
        }
        DelayPolicy::CbsOptimal => {
            let r_cbs = min_power_rate(&cbs, &sc.traffic)?;
            let d = queue_metrics(&sc.traffic, r_cbs)?.mean_delay;
            vec![row(point_for_delay(sc, auto, d), Ok(r_cbs))]
        }
        DelayPolicy::MinPower => {
            let r_cbs = min_power_rate(&cbs, &sc.traffic)?;
            let vbs = joint_optimize(&sc.with_alpha(0.0), cfg.run.cores_max).map(|o| o.best);
            vec![row(vbs, Ok(r_cbs))]
        }
    };
    Ok(out)
}

/// Simulation settings derived from the run section.
pub fn sim_config(cfg: &ResolvedConfig, rate: f64, n_cores: u32) -> SimConfig {
    let mut sim = SimConfig::new(cfg.scenario.traffic, rate, cfg.scenario.profile(n_cores));
    sim.n_arrivals = cfg.run.arrivals;
    sim.warmup_fraction = cfg.run.warmup;
    sim.rng_seed = cfg.run.seed;
    sim.batches = cfg.run.batches;
    sim.size_distribution = cfg.run.size_distribution;
    sim
}

/// Simulated row plus the analytic-vs-simulated report.
pub fn cmd_simulate(
    cfg: &ResolvedConfig,
    rate: f64,
    n_cores: u32,
    trace: Option<&mut dyn Write>,
) -> Result<(ResultRow, ValidationReport), HarnessError> {
    let sim = sim_config(cfg, rate, n_cores);
    let stats = match trace {
        Some(w) => {
            writeln!(w, "time_s,event,queue_len,energy_j")?;
            simulate_traced(&sim, w)?
        }
        None => simulate(&sim)?,
    };
    let report = compare_with_analytic(&sim, stats, VALIDATION_CONFIDENCE)?;
    let s = &report.stats;
    let row = ResultRow {
        scenario_id: cfg.id.clone(),
        command: "simulate".into(),
        rate_bps: Some(rate),
        n_cores: Some(n_cores),
        rho: Some(s.busy_fraction.mean),
        mean_queue_len: Some(s.mean_queue_len.mean),
        mean_delay_s: Some(s.mean_delay.mean),
        avg_power_w: Some(s.mean_power.mean),
        cost_z: Some(s.mean_power.mean + cfg.scenario.alpha * s.mean_queue_len.mean),
        source: Source::Simulated,
        seed: Some(sim.rng_seed),
        status: if report.passed() {
            rows::STATUS_OK.into()
        } else {
            "flagged".into()
        },
    };
    Ok((row, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ResolvedConfig {
        ScenarioFile::default().resolve().unwrap()
    }

    #[test]
    fn power_row() {
        let row = cmd_power(&defaults(), 7.756e7, 2).unwrap();
        assert!((row.avg_power_w.unwrap() - 25.8).abs() < 0.05);
        assert!(matches!(
            cmd_power(&defaults(), 1.5e7, 2),
            Err(HarnessError::Model(Error::UnstableQueue { .. }))
        ));
        assert!(matches!(
            cmd_power(&defaults(), 1e8, 2),
            Err(HarnessError::Model(Error::InfeasibleLoad { .. }))
        ));
    }

    #[test]
    fn optimize_rows() {
        let rows = cmd_optimize(&defaults(), 8).unwrap();
        assert_eq!(rows[0].command, "optimize");
        assert!(rows.len() >= 2);
        assert!(matches!(cmd_optimize(&defaults(), 0), Err(HarnessError::Usage(_))));
    }

    #[test]
    fn sweep_spec_parsing() {
        let s = SweepSpec::parse("target_delay=0.05:5:40:log").unwrap();
        assert_eq!(s.values().len(), 40);
        let f = SweepSpec::parse("file_size=1MB:4MB:4").unwrap();
        assert_eq!(f.values(), vec![8e6, 1.6e7, 2.4e7, 3.2e7]);
        assert!(SweepSpec::parse("speed=1:2:3").is_err());
        assert!(SweepSpec::parse("alpha=1:2").is_err());
        assert!(SweepSpec::parse("alpha=0:2:3:log").is_err());
    }

    #[test]
    fn single_step_sweep_equals_power() {
        let cfg = defaults();
        let spec = SweepSpec::parse("alpha=0:0:1").unwrap();
        let opts = SweepOptions {
            target: SweepTarget::Rate(7.756e7),
            cores: Some(2),
            hold_offered_load: false,
        };
        let rows = cmd_sweep(&cfg, &spec, &opts, Execution::Sequential).unwrap();
        let power = cmd_power(&cfg, 7.756e7, 2).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].record()[2..], power.record()[2..]);
    }

    #[test]
    fn infeasible_points_are_marked() {
        let cfg = defaults();
        let spec = SweepSpec::parse("target_delay=0.01:1:3:log").unwrap();
        let opts = SweepOptions {
            target: SweepTarget::Optimize,
            cores: Some(1),
            hold_offered_load: false,
        };
        let rows = cmd_sweep(&cfg, &spec, &opts, Execution::Sequential).unwrap();
        assert!(!rows[0].is_ok());
        assert!(rows[0].status.starts_with("infeasible"));
        assert!(rows[2].is_ok());
    }

    #[test]
    fn self_comparison_saves_nothing() {
        let cfg = defaults();
        let cbs = cbs_profile(&cfg);
        let s = savings_at_rate(&cbs, &cbs, &cfg.scenario.traffic, 5e7).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn low_arrival_rate_saves_over_sixty_percent_on_grid() {
        let mut file = ScenarioFile::default();
        file.set("traffic", "lambda", "0.5").unwrap();
        let rows = cmd_compare(&file.resolve().unwrap(), DelayPolicy::Grid, Execution::default()).unwrap();
        assert_eq!(rows.len(), 25);
        for r in &rows {
            assert!(r.savings().unwrap() > 0.60, "{r:?}");
        }
    }
}
