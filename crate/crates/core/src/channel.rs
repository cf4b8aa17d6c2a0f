//! Free-space (Friis) path gains and link budgets.

use thiserror::Error;

use crate::scenario::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    Distance(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
}

/// Aperture form of the Friis transmission equation, `A_t A_r / (lambda^2 d^2)`,
/// clamped at unity.
pub fn friis_gain(
    distance_m: f64,
    wavelength_m: f64,
    aperture_tx_m2: f64,
    aperture_rx_m2: f64,
) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::Distance(distance_m));
    }
    for (name, value) in [
        ("wavelength", wavelength_m),
        ("transmit aperture", aperture_tx_m2),
        ("receive aperture", aperture_rx_m2),
    ] {
        if !(value > 0.0) {
            return Err(ChannelError::NonPositive { name, value });
        }
    }
    let gain = aperture_tx_m2 * aperture_rx_m2 / (wavelength_m * distance_m).powi(2);
    Ok(gain.min(1.0))
}

/// Friis gain between two antennas of the scenario (all share one aperture).
pub fn path_gain(config: &ScenarioConfig, distance_m: f64) -> Result<f64, ChannelError> {
    friis_gain(
        distance_m,
        config.wavelength_m(),
        config.aperture_m2,
        config.aperture_m2,
    )
}

fn unit_interval(name: &'static str, value: f64) -> Result<f64, ChannelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ChannelError::OutOfRange { name, value })
    }
}

/// Power received over the PB -> tag -> receiver cascade (double path loss).
pub fn backscatter_rx_power(
    pb_power_w: f64,
    gain_pb_to_tag: f64,
    reflect_fraction: f64,
    gain_tag_to_rx: f64,
) -> Result<f64, ChannelError> {
    if !(pb_power_w >= 0.0) {
        return Err(ChannelError::NonPositive {
            name: "PB power",
            value: pb_power_w,
        });
    }
    let g1 = unit_interval("forward gain", gain_pb_to_tag)?;
    let rho = unit_interval("reflect fraction", reflect_fraction)?;
    let g2 = unit_interval("backward gain", gain_tag_to_rx)?;
    Ok(pb_power_w * g1 * rho * g2)
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(p_w: f64) -> Result<f64, ChannelError> {
    if !(p_w > 0.0) {
        return Err(ChannelError::NonPositive {
            name: "power",
            value: p_w,
        });
    }
    Ok(10.0 * p_w.log10() + 30.0)
}

/// Powers seen by one receiver in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_w: f64,
    /// Product of the path gains along the link.
    pub gain: f64,
    pub rx_signal_w: f64,
    pub interference_w: f64,
    pub noise_w: f64,
}

impl LinkBudget {
    pub fn new(tx_power_w: f64, gain: f64, interference_w: f64, noise_w: f64) -> Self {
        debug_assert!(tx_power_w >= 0.0 && (0.0..=1.0).contains(&gain));
        debug_assert!(interference_w >= 0.0 && noise_w > 0.0);
        Self {
            tx_power_w,
            gain,
            rx_signal_w: tx_power_w * gain,
            interference_w,
            noise_w,
        }
    }

    pub fn sinr(&self) -> f64 {
        self.rx_signal_w / (self.interference_w + self.noise_w)
    }
}
