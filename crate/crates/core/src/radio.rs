//! Cell-edge link budget: path loss, channel gain, and the Shannon mapping
//! between transmit power and sum rate.
//!
//! Path loss follows the 3GPP urban macro model,
//! `PL(dB) = 128.1 + 37.6 log10(d / 1 km) + 21 log10(f / 2 GHz)`,
//! which reduces to the familiar 128.1 + 37.6 log10(d_km) at 2 GHz.
//! All users sit at the cell edge, so the gain is a single scalar.

use crate::error::{Error, Result};

/// Largest spectral efficiency `r / W` accepted by [`pout_for_rate`].
pub const DEFAULT_MAX_SPECTRAL_EFFICIENCY: f64 = 60.0;

const REFERENCE_CARRIER_HZ: f64 = 2e9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Macro-cell path loss in dB at distance `d` meters.
pub fn path_loss_db(d: f64, carrier_freq: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid("distance", format!("must be positive, got {d}")));
    }
    if !(carrier_freq > 0.0) || !carrier_freq.is_finite() {
        return Err(Error::invalid(
            "carrier_freq",
            format!("must be positive, got {carrier_freq}"),
        ));
    }
    Ok(128.1 + 37.6 * (d / 1000.0).log10() + 21.0 * (carrier_freq / REFERENCE_CARRIER_HZ).log10())
}

pub fn path_loss_linear(d: f64, carrier_freq: f64) -> Result<f64> {
    path_loss_db(d, carrier_freq).map(db_to_linear)
}

/// Propagation inputs plus the derived cell-edge channel gain `g`.
///
/// dB-valued inputs are kept as given; the single dB to linear conversion
/// happens in [`LinkBudget::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub carrier_freq: f64,
    pub cell_radius: f64,
    pub noise_figure_db: f64,
    pub noise_density_dbm_per_hz: f64,
    pub bandwidth: f64,
    channel_gain: f64,
}

impl LinkBudget {
    pub fn new(
        carrier_freq: f64,
        cell_radius: f64,
        noise_figure_db: f64,
        noise_density_dbm_per_hz: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(
                "bandwidth",
                format!("must be positive, got {bandwidth}"),
            ));
        }
        if !noise_figure_db.is_finite() || !noise_density_dbm_per_hz.is_finite() {
            return Err(Error::invalid("noise", "noise figure and density must be finite"));
        }
        let loss = path_loss_linear(cell_radius, carrier_freq)?;
        let noise_figure = db_to_linear(noise_figure_db);
        let n0 = db_to_linear(noise_density_dbm_per_hz - 30.0);
        let channel_gain = 1.0 / (loss * noise_figure * n0 * bandwidth);
        Ok(LinkBudget {
            carrier_freq,
            cell_radius,
            noise_figure_db,
            noise_density_dbm_per_hz,
            bandwidth,
            channel_gain,
        })
    }

    /// Overall gain `g = 1 / (L(R) F N0 W)` in 1/W.
    pub fn channel_gain(&self) -> f64 {
        self.channel_gain
    }
}

impl Default for LinkBudget {
    /// 2 GHz carrier, 500 m radius, 9 dB noise figure, -174 dBm/Hz, 20 MHz.
    fn default() -> Self {
        LinkBudget::new(2e9, 500.0, 9.0, -174.0, 20e6).expect("reference link budget is valid")
    }
}

/// Channel gain of an arbitrary budget, 1/W.
pub fn channel_gain(lb: &LinkBudget) -> f64 {
    lb.channel_gain()
}

/// Sum rate `W log2(1 + g p_out)`.
pub fn rate_for_pout(gain: f64, bandwidth: f64, p_out: f64) -> f64 {
    bandwidth * (gain * p_out).ln_1p() / std::f64::consts::LN_2
}

/// Transmit power needed for rate `r`: `(2^(r/W) - 1) / g`.
pub fn pout_for_rate(gain: f64, bandwidth: f64, r: f64) -> Result<f64> {
    pout_for_rate_limited(gain, bandwidth, r, DEFAULT_MAX_SPECTRAL_EFFICIENCY)
}

pub fn pout_for_rate_limited(gain: f64, bandwidth: f64, r: f64, limit: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(Error::invalid("rate", format!("must be non-negative, got {r}")));
    }
    let ratio = r / bandwidth;
    if ratio > limit {
        return Err(Error::RateExponentOverflow { ratio, limit });
    }
    Ok((ratio * std::f64::consts::LN_2).exp_m1() / gain)
}
