//! Static power-consumption models for virtual and conventional base stations.
//!
//! Units throughout: watts, joules, bits per second, instructions per second.
//! A VBS draws `P_B + P_R` while transmitting, where the baseband part scales
//! with the number of active cores, the CPU load, and `s^beta`:
//!
//! ```text
//! P_B = N_c (P_Bm + dP_B * load * s^beta),   load = (c0 + kappa r) / (N_c s)
//!     = N_c P_Bm + dP_B c0 s^(beta-1) + dP_B kappa r s^(beta-1)
//! P_R = p_out / eta + P_RF
//! ```

use crate::error::{Error, Result};
use crate::queueing::TrafficParams;
use crate::radio::{pout_for_rate, pout_for_rate_limited};

/// CPU-side constants of the baseband unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputeParams {
    /// Active CPU cores `N_c`.
    pub n_cores: u32,
    /// CPU speed `s`, instructions/s.
    pub cpu_speed: f64,
    /// Reference speed `s_0` at which a fully loaded core draws `p_core_max`.
    pub ref_speed: f64,
    pub p_core_max: f64,
    pub p_core_min: f64,
    /// Speed-scaling exponent, any real >= 1.
    pub beta: f64,
    /// Rate-independent compute demand, instructions/s.
    pub c0: f64,
    /// Rate-proportional compute demand, instructions/bit.
    pub kappa: f64,
}

impl Default for ComputeParams {
    /// Commodity-server reference values (2 GHz, 5-20 W per core).
    fn default() -> Self {
        ComputeParams {
            n_cores: 1,
            cpu_speed: 2e9,
            ref_speed: 2e9,
            p_core_max: 20.0,
            p_core_min: 5.0,
            beta: 2.0,
            c0: 7e8,
            kappa: 35.0,
        }
    }
}

impl ComputeParams {
    pub fn with_cores(&self, n_cores: u32) -> Self {
        ComputeParams {
            n_cores,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cores < 1 {
            return Err(Error::invalid("n_cores", "at least one core is required"));
        }
        positive("cpu_speed", self.cpu_speed)?;
        positive("ref_speed", self.ref_speed)?;
        positive("p_core_min", self.p_core_min)?;
        positive("kappa", self.kappa)?;
        non_negative("c0", self.c0)?;
        if !(self.p_core_max >= self.p_core_min) || !self.p_core_max.is_finite() {
            return Err(Error::invalid("p_core_max", "must be finite and >= p_core_min"));
        }
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(Error::invalid("beta", format!("must be >= 1, got {}", self.beta)));
        }
        Ok(())
    }
}

/// RF-side constants of the remote radio head.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub pa_efficiency: f64,
    pub p_rf: f64,
    /// Total draw of the sleeping VBS.
    pub p_sleep: f64,
    /// Transmit-power cap; `f64::INFINITY` disables it.
    pub p_out_max: f64,
    pub bandwidth: f64,
    /// Energy per on/off transition, J.
    pub e_switch: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            pa_efficiency: 0.311,
            p_rf: 12.9,
            p_sleep: 6.45,
            p_out_max: f64::INFINITY,
            bandwidth: 20e6,
            e_switch: 5.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pa_efficiency > 0.0 && self.pa_efficiency <= 1.0) {
            return Err(Error::invalid("pa_efficiency", "must lie in (0, 1]"));
        }
        non_negative("p_rf", self.p_rf)?;
        non_negative("p_sleep", self.p_sleep)?;
        non_negative("e_switch", self.e_switch)?;
        positive("bandwidth", self.bandwidth)?;
        if !(self.p_out_max > 0.0) {
            return Err(Error::invalid("p_out_max", "must be positive (or infinite)"));
        }
        Ok(())
    }
}

/// Conventional base station under the affine EARTH load model.
#[derive(Debug, Clone, PartialEq)]
pub struct EarthParams {
    pub n_trx: u32,
    pub p0: f64,
    pub delta_p: f64,
    pub p_sleep: f64,
    pub p_out_max: f64,
    /// Switching energy per transition; the conventional BS sleeps on the
    /// same on/off cycle as the VBS.
    pub e_switch: f64,
}

impl Default for EarthParams {
    fn default() -> Self {
        EarthParams {
            n_trx: 1,
            p0: 84.0,
            delta_p: 2.8,
            p_sleep: 56.0,
            p_out_max: f64::INFINITY,
            e_switch: 5.0,
        }
    }
}

impl EarthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trx < 1 {
            return Err(Error::invalid("n_trx", "at least one transceiver is required"));
        }
        non_negative("p_sleep", self.p_sleep)?;
        if !(self.p0 > self.p_sleep) || !self.p0.is_finite() {
            return Err(Error::invalid("p0", "must be finite and exceed p_sleep"));
        }
        positive("delta_p", self.delta_p)?;
        non_negative("e_switch", self.e_switch)?;
        if !(self.p_out_max > 0.0) {
            return Err(Error::invalid("p_out_max", "must be positive (or infinite)"));
        }
        Ok(())
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

/// `(P_BM - P_Bm) / s_0^beta`.
pub fn delta_pb(c: &ComputeParams) -> f64 {
    (c.p_core_max - c.p_core_min) / c.ref_speed.powf(c.beta)
}

const LOAD_SLACK: f64 = 1e-12;

/// CPU load fraction `(c0 + kappa r) / (N_c s)`, possibly above 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CpuLoad(pub f64);

impl CpuLoad {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Loads up to one (plus rounding slack at the `r_M` boundary).
    pub fn is_feasible(self) -> bool {
        self.0 <= 1.0 + LOAD_SLACK
    }

    pub fn require_feasible(self) -> Result<f64> {
        if self.is_feasible() {
            Ok(self.0)
        } else {
            Err(Error::InfeasibleLoad { load: self.0 })
        }
    }
}

pub fn cpu_load(c: &ComputeParams, r: f64) -> CpuLoad {
    CpuLoad((c.c0 + c.kappa * r) / (f64::from(c.n_cores) * c.cpu_speed))
}

/// Baseband power from a given load: `N_c (P_Bm + dP_B * load * s^beta)`.
pub fn bbu_power_from_load(c: &ComputeParams, load: f64) -> f64 {
    f64::from(c.n_cores) * (c.p_core_min + delta_pb(c) * load * c.cpu_speed.powf(c.beta))
}

/// Baseband power at rate `r`, rejecting loads above one.
pub fn bbu_power(c: &ComputeParams, r: f64) -> Result<f64> {
    cpu_load(c, r).require_feasible()?;
    Ok(bbu_power_unchecked(c, r))
}

/// Affine form of the baseband power, valid for any `r >= 0`.
pub fn bbu_power_unchecked(c: &ComputeParams, r: f64) -> f64 {
    let scale = delta_pb(c) * c.cpu_speed.powf(c.beta - 1.0);
    f64::from(c.n_cores) * c.p_core_min + scale * c.c0 + scale * c.kappa * r
}

/// Slope of the baseband power in the rate, W per b/s.
pub fn bbu_rate_slope(c: &ComputeParams) -> f64 {
    delta_pb(c) * c.kappa * c.cpu_speed.powf(c.beta - 1.0)
}

/// Radio-head power `p_out / eta + P_RF`.
pub fn rrh_power(rp: &RadioParams, p_out: f64) -> Result<f64> {
    if p_out > rp.p_out_max {
        return Err(Error::PowerCapExceeded {
            p_out,
            cap: rp.p_out_max,
        });
    }
    if p_out < 0.0 || p_out.is_nan() {
        return Err(Error::invalid("p_out", format!("must be non-negative, got {p_out}")));
    }
    Ok(p_out / rp.pa_efficiency + rp.p_rf)
}

/// Rate-independent busy power `P_o = N_c P_Bm + dP_B c0 s^(beta-1) + P_RF`.
pub fn static_power(c: &ComputeParams, rp: &RadioParams) -> f64 {
    bbu_power_unchecked(c, 0.0) + rp.p_rf
}

/// `P_s = P_o - P_sleep - 2 lambda E_sw`; negative values are legal.
pub fn sleep_adjusted_power(c: &ComputeParams, rp: &RadioParams, t: &TrafficParams) -> f64 {
    static_power(c, rp) - rp.p_sleep - 2.0 * t.arrival_rate * rp.e_switch
}

/// Busy VBS power at rate `r` with gain `g`.
pub fn vbs_busy_power(c: &ComputeParams, rp: &RadioParams, gain: f64, r: f64) -> Result<f64> {
    let pb = bbu_power(c, r)?;
    let p_out = pout_for_rate(gain, rp.bandwidth, r)?;
    Ok(pb + rrh_power(rp, p_out)?)
}

/// Busy power of a conventional BS, `N_TRX P0 + delta_p p_out`.
pub fn earth_busy_power(e: &EarthParams, p_out: f64) -> Result<f64> {
    if p_out > e.p_out_max {
        return Err(Error::PowerCapExceeded {
            p_out,
            cap: e.p_out_max,
        });
    }
    if p_out < 0.0 || p_out.is_nan() {
        return Err(Error::invalid("p_out", format!("must be non-negative, got {p_out}")));
    }
    Ok(f64::from(e.n_trx) * e.p0 + e.delta_p * p_out)
}

/// Whether VBS evaluations reject CPU loads above one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadCheck {
    #[default]
    Enforce,
    /// Evaluate the affine model beyond the core limit. Used by the
    /// unconstrained rate optimum and by brute-force oracles.
    Ignore,
}

/// Busy-power model with sleep power and switching energy, shared by the
/// VBS and the conventional baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum BusyPowerProfile {
    Vbs {
        compute: ComputeParams,
        radio: RadioParams,
        gain: f64,
        load_check: LoadCheck,
    },
    Earth {
        earth: EarthParams,
        gain: f64,
        bandwidth: f64,
    },
    /// Rate-independent busy power; used for bookkeeping checks.
    Constant { busy: f64, sleep: f64, e_switch: f64 },
}

/// Every profile has the form
/// `busy(r) = static_w + rate_slope * r + (2^(r/W) - 1) / radio_gain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerShape {
    pub static_w: f64,
    pub rate_slope: f64,
    /// `g * eta` for a VBS, `g / delta_p` for EARTH, infinite for a constant.
    pub radio_gain: f64,
    pub bandwidth: f64,
    pub sleep_w: f64,
    pub e_switch: f64,
}

impl PowerShape {
    /// `P_s` for this profile at arrival rate `lambda`.
    pub fn sleep_adjusted(&self, lambda: f64) -> f64 {
        self.static_w - self.sleep_w - 2.0 * lambda * self.e_switch
    }
}

impl BusyPowerProfile {
    pub fn vbs(compute: ComputeParams, radio: RadioParams, gain: f64) -> Self {
        BusyPowerProfile::Vbs {
            compute,
            radio,
            gain,
            load_check: LoadCheck::Enforce,
        }
    }

    pub fn earth(earth: EarthParams, gain: f64, bandwidth: f64) -> Self {
        BusyPowerProfile::Earth { earth, gain, bandwidth }
    }

    pub fn busy_power(&self, r: f64) -> Result<f64> {
        match self {
            BusyPowerProfile::Vbs {
                compute,
                radio,
                gain,
                load_check,
            } => match load_check {
                LoadCheck::Enforce => vbs_busy_power(compute, radio, *gain, r),
                LoadCheck::Ignore => {
                    let p_out = pout_for_rate_limited(*gain, radio.bandwidth, r, f64::INFINITY)?;
                    Ok(bbu_power_unchecked(compute, r) + rrh_power(radio, p_out)?)
                }
            },
            BusyPowerProfile::Earth { earth, gain, bandwidth } => {
                earth_busy_power(earth, pout_for_rate(*gain, *bandwidth, r)?)
            }
            BusyPowerProfile::Constant { busy, .. } => Ok(*busy),
        }
    }

    pub fn sleep_power(&self) -> f64 {
        match self {
            BusyPowerProfile::Vbs { radio, .. } => radio.p_sleep,
            BusyPowerProfile::Earth { earth, .. } => f64::from(earth.n_trx) * earth.p_sleep,
            BusyPowerProfile::Constant { sleep, .. } => *sleep,
        }
    }

    pub fn switch_energy(&self) -> f64 {
        match self {
            BusyPowerProfile::Vbs { radio, .. } => radio.e_switch,
            BusyPowerProfile::Earth { earth, .. } => earth.e_switch,
            BusyPowerProfile::Constant { e_switch, .. } => *e_switch,
        }
    }

    pub fn shape(&self) -> PowerShape {
        match self {
            BusyPowerProfile::Vbs {
                compute, radio, gain, ..
            } => PowerShape {
                static_w: static_power(compute, radio),
                rate_slope: bbu_rate_slope(compute),
                radio_gain: gain * radio.pa_efficiency,
                bandwidth: radio.bandwidth,
                sleep_w: radio.p_sleep,
                e_switch: radio.e_switch,
            },
            BusyPowerProfile::Earth { earth, gain, bandwidth } => PowerShape {
                static_w: f64::from(earth.n_trx) * earth.p0,
                rate_slope: 0.0,
                radio_gain: gain / earth.delta_p,
                bandwidth: *bandwidth,
                sleep_w: self.sleep_power(),
                e_switch: earth.e_switch,
            },
            BusyPowerProfile::Constant { busy, sleep, e_switch } => PowerShape {
                static_w: *busy,
                rate_slope: 0.0,
                radio_gain: f64::INFINITY,
                bandwidth: f64::INFINITY,
                sleep_w: *sleep,
                e_switch: *e_switch,
            },
        }
    }
}
