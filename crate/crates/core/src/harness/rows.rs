//! CSV output records. Columns are fixed and ordered; floats are written in
//! Rust's shortest round-trip form, so files are bit-stable and re-parse to
//! the exact values.

use std::io::Write;

use crate::optimizer::TradeoffPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Analytic,
    Simulated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Simulated => "simulated",
        }
    }
}

pub const RESULT_HEADER: [&str; 12] = [
    "scenario_id",
    "command",
    "rate_bps",
    "n_cores",
    "rho",
    "mean_queue_len",
    "mean_delay_s",
    "avg_power_w",
    "cost_z",
    "source",
    "seed",
    "status",
];

/// One operating point. Numeric fields are `None` only on infeasible rows,
/// whose `status` carries the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub command: String,
    pub rate_bps: Option<f64>,
    pub n_cores: Option<u32>,
    pub rho: Option<f64>,
    pub mean_queue_len: Option<f64>,
    pub mean_delay_s: Option<f64>,
    pub avg_power_w: Option<f64>,
    pub cost_z: Option<f64>,
    pub source: Source,
    pub seed: Option<u64>,
    pub status: String,
}

pub const STATUS_OK: &str = "ok";

impl ResultRow {
    pub fn analytic(scenario_id: &str, command: &str, p: &TradeoffPoint) -> Self {
        ResultRow {
            scenario_id: scenario_id.into(),
            command: command.into(),
            rate_bps: Some(p.rate),
            n_cores: Some(p.n_cores),
            rho: Some(p.rho),
            mean_queue_len: Some(p.mean_queue_len),
            mean_delay_s: Some(p.mean_delay),
            avg_power_w: Some(p.avg_power),
            cost_z: Some(p.cost),
            source: Source::Analytic,
            seed: None,
            status: STATUS_OK.into(),
        }
    }

    pub fn infeasible(scenario_id: &str, command: &str, reason: &str) -> Self {
        ResultRow {
            scenario_id: scenario_id.into(),
            command: command.into(),
            rate_bps: None,
            n_cores: None,
            rho: None,
            mean_queue_len: None,
            mean_delay_s: None,
            avg_power_w: None,
            cost_z: None,
            source: Source::Analytic,
            seed: None,
            status: format!("infeasible: {reason}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.scenario_id.clone(),
            self.command.clone(),
            opt(self.rate_bps),
            self.n_cores.map(|n| n.to_string()).unwrap_or_default(),
            opt(self.rho),
            opt(self.mean_queue_len),
            opt(self.mean_delay_s),
            opt(self.avg_power_w),
            opt(self.cost_z),
            self.source.as_str().into(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.status.clone(),
        ]
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const COMPARE_HEADER: [&str; 11] = [
    "scenario_id",
    "policy",
    "vbs_delay_s",
    "vbs_rate_bps",
    "vbs_n_cores",
    "vbs_power_w",
    "cbs_delay_s",
    "cbs_rate_bps",
    "cbs_power_w",
    "savings",
    "status",
];

/// VBS against the conventional baseline at one delay (or each at its own
/// minimum-power point).
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scenario_id: String,
    pub policy: String,
    pub vbs: Option<TradeoffPoint>,
    pub cbs_delay_s: Option<f64>,
    pub cbs_rate_bps: Option<f64>,
    pub cbs_power_w: Option<f64>,
    pub status: String,
}

impl CompareRow {
    /// `1 - P_VBS / P_CBS`.
    pub fn savings(&self) -> Option<f64> {
        Some(1.0 - self.vbs?.avg_power / self.cbs_power_w?)
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.scenario_id.clone(),
            self.policy.clone(),
            opt(self.vbs.map(|p| p.mean_delay)),
            opt(self.vbs.map(|p| p.rate)),
            self.vbs.map(|p| p.n_cores.to_string()).unwrap_or_default(),
            opt(self.vbs.map(|p| p.avg_power)),
            opt(self.cbs_delay_s),
            opt(self.cbs_rate_bps),
            opt(self.cbs_power_w),
            opt(self.savings()),
            self.status.clone(),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> csv::Result<()> {
    write_csv(out, &RESULT_HEADER, rows.iter().map(ResultRow::record))
}

pub fn write_comparisons<W: Write>(out: W, rows: &[CompareRow]) -> csv::Result<()> {
    write_csv(out, &COMPARE_HEADER, rows.iter().map(CompareRow::record))
}
