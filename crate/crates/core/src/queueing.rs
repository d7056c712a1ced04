//! M/G/1 processor-sharing queue with a server that sleeps whenever the
//! queue empties, and the weighted cost `z = E{P} + alpha E{n}`.
//!
//! The on/off cycle is regenerative: an idle period of mean `1/lambda`
//! followed by a busy period, so `E{T_c} = 1 / (lambda (1 - rho))` and the
//! switching term `2 E_sw / E{T_c}` becomes `2 E_sw lambda (1 - rho)`.

use crate::error::{Error, Result};
use crate::power::BusyPowerProfile;

/// Bits in one megabyte (decimal, 8e6).
pub const BITS_PER_MB: f64 = 8e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficParams {
    /// Flow arrival rate, 1/s.
    pub arrival_rate: f64,
    /// Mean flow size, bits.
    pub mean_file_size: f64,
}

impl TrafficParams {
    pub fn new(arrival_rate: f64, mean_file_size: f64) -> Result<Self> {
        let t = TrafficParams {
            arrival_rate,
            mean_file_size,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate > 0.0) || !self.arrival_rate.is_finite() {
            return Err(Error::invalid("arrival_rate", "must be positive and finite"));
        }
        if !(self.mean_file_size > 0.0) || !self.mean_file_size.is_finite() {
            return Err(Error::invalid("mean_file_size", "must be positive and finite"));
        }
        Ok(())
    }

    /// `lambda * L`, b/s.
    pub fn offered_load(&self) -> f64 {
        self.arrival_rate * self.mean_file_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueMetrics {
    pub rho: f64,
    pub mean_queue_len: f64,
    pub mean_delay: f64,
    pub mean_cycle: f64,
    pub p_active: f64,
    pub p_sleep: f64,
}

pub fn queue_metrics(t: &TrafficParams, r: f64) -> Result<QueueMetrics> {
    let offered = t.offered_load();
    if !(r > offered) {
        return Err(Error::UnstableQueue { rate: r, offered });
    }
    let rho = offered / r;
    let mean_queue_len = offered / (r - offered);
    Ok(QueueMetrics {
        rho,
        mean_queue_len,
        mean_delay: mean_queue_len / t.arrival_rate,
        mean_cycle: 1.0 / (t.arrival_rate * (1.0 - rho)),
        p_active: rho,
        p_sleep: 1.0 - rho,
    })
}

/// Rate giving mean delay `delay`: `lambda L (1 + lambda D) / (lambda D)`.
pub fn rate_for_delay(t: &TrafficParams, delay: f64) -> Result<f64> {
    if !(delay > 0.0) || !delay.is_finite() {
        return Err(Error::invalid(
            "delay",
            format!("must be positive and finite, got {delay}"),
        ));
    }
    let ld = t.arrival_rate * delay;
    Ok(t.offered_load() * (1.0 + ld) / ld)
}

/// Long-run average power over sleep/wake cycles.
pub fn average_power(profile: &BusyPowerProfile, t: &TrafficParams, r: f64) -> Result<f64> {
    let q = queue_metrics(t, r)?;
    let busy = profile.busy_power(r)?;
    Ok(q.p_active * busy + q.p_sleep * profile.sleep_power() + 2.0 * profile.switch_energy() / q.mean_cycle)
}

/// `z = E{P} + alpha E{n}`; `alpha` is in watts per queued flow.
pub fn system_cost(profile: &BusyPowerProfile, t: &TrafficParams, alpha: f64, r: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha", format!("must be non-negative, got {alpha}")));
    }
    let q = queue_metrics(t, r)?;
    Ok(average_power(profile, t, r)? + alpha * q.mean_queue_len)
}
