//! RF energy harvesting and the per-slot harvest-then-sense-then-transmit
//! cycle of backscatter and traditional sensor nodes.
//!
//! Every slot starts with a harvesting sub-slot. The node then checks its
//! battery against the energy the active sub-slot needs and either stays
//! silent or spends it. Batteries carry over between slots without leakage
//! or capacity limit.
//!
//! A backscatter node reflects the PB carrier in full while active, so it
//! harvests nothing during the active sub-slot. A traditional node runs its
//! mixer, DAC and power amplifier and pushes its whole remaining battery
//! through the amplifier (greedy full drain).

use thiserror::Error;

use crate::channel::{self, ChannelError};
use crate::scenario::{NodeKind, NodeState, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("battery {battery_j} J does not cover the active-mode overhead {overhead_j} J")]
    Insufficient { battery_j: f64, overhead_j: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Active-mode power draw of one node kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsumptionProfile {
    pub kind: NodeKind,
    pub digital_w: f64,
    pub mixer_w: f64,
    pub dac_w: f64,
    pub pa_efficiency: f64,
    pub sense_energy_j: f64,
    /// Smallest amplifier drain worth switching on for, J per active sub-slot.
    pub min_pa_energy_j: f64,
}

impl ConsumptionProfile {
    pub fn backscatter(config: &ScenarioConfig) -> Self {
        Self {
            kind: NodeKind::Backscatter,
            digital_w: config.digital_circuit_w,
            mixer_w: 0.0,
            dac_w: 0.0,
            pa_efficiency: config.pa_efficiency,
            sense_energy_j: config.sense_energy_j,
            min_pa_energy_j: 0.0,
        }
    }

    /// The minimum amplifier drain makes the radiated power reach
    /// `traditional_min_snr_db` above the noise floor at the receiver.
    pub fn traditional(config: &ScenarioConfig) -> Result<Self, EnergyError> {
        let gain = channel::path_gain(config, config.rx_distance_m)?;
        let noise_w = channel::dbm_to_watts(config.noise_dbm);
        let min_radiated_w = noise_w * 10f64.powf(config.traditional_min_snr_db / 10.0) / gain;
        Ok(Self {
            kind: NodeKind::Traditional,
            digital_w: config.digital_circuit_w,
            mixer_w: config.mixer_w,
            dac_w: config.dac_w,
            pa_efficiency: config.pa_efficiency,
            sense_energy_j: config.sense_energy_j,
            min_pa_energy_j: min_radiated_w / config.pa_efficiency * config.active_s(),
        })
    }

    pub fn for_kind(kind: NodeKind, config: &ScenarioConfig) -> Result<Self, EnergyError> {
        match kind {
            NodeKind::Backscatter => Ok(Self::backscatter(config)),
            NodeKind::Traditional => Self::traditional(config),
        }
    }

    /// Sensing plus circuit energy of one active sub-slot, amplifier excluded.
    pub fn overhead_j(&self, config: &ScenarioConfig) -> f64 {
        self.sense_energy_j + (self.digital_w + self.mixer_w + self.dac_w) * config.active_s()
    }

    /// Battery level at or above which the node goes active.
    pub fn requirement_j(&self, config: &ScenarioConfig) -> f64 {
        self.overhead_j(config) + self.min_pa_energy_j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Active,
    Silent,
}

/// What a node puts on the air during the active sub-slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    Silent,
    /// Fraction of the incident PB power reflected (backscatter).
    Reflect(f64),
    /// Radiated power in watts (traditional).
    Radiate(f64),
}

impl Emission {
    pub fn is_active(&self) -> bool {
        !matches!(self, Emission::Silent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub harvested_j: f64,
    pub consumed_j: f64,
    pub was_active: bool,
    pub emission: Emission,
    pub battery_after_j: f64,
}

pub fn harvested_energy(incident_w: f64, efficiency: f64, duration_s: f64) -> f64 {
    debug_assert!(incident_w >= 0.0 && duration_s >= 0.0);
    debug_assert!((0.0..=1.0).contains(&efficiency));
    incident_w * efficiency * duration_s
}

/// Inclusive threshold: a battery exactly at the requirement goes active.
pub fn activation_decision(
    battery_j: f64,
    profile: &ConsumptionProfile,
    config: &ScenarioConfig,
) -> Activity {
    if battery_j > 0.0 && battery_j >= profile.requirement_j(config) {
        Activity::Active
    } else {
        Activity::Silent
    }
}

/// Radiated power of a traditional node that drains `battery_j` in full.
pub fn traditional_tx_power(
    battery_j: f64,
    profile: &ConsumptionProfile,
    config: &ScenarioConfig,
) -> Result<f64, EnergyError> {
    let overhead_j = profile.overhead_j(config);
    let drain_j = battery_j - overhead_j;
    if drain_j < 0.0 {
        return Err(EnergyError::Insufficient {
            battery_j,
            overhead_j,
        });
    }
    Ok(profile.pa_efficiency * drain_j / config.active_s())
}

/// Advances one node through one slot given the PB power incident on it.
pub fn step_slot(
    node: &mut NodeState,
    incident_w: f64,
    profile: &ConsumptionProfile,
    config: &ScenarioConfig,
) -> SlotOutcome {
    debug_assert_eq!(node.kind, profile.kind);
    let battery_before = node.battery_j;
    let harvested_j = harvested_energy(incident_w, config.harvest_efficiency, config.harvest_s());
    let available = battery_before + harvested_j;

    let (consumed_j, emission) = match activation_decision(available, profile, config) {
        Activity::Silent => (0.0, Emission::Silent),
        Activity::Active => match profile.kind {
            NodeKind::Backscatter => (profile.requirement_j(config), Emission::Reflect(1.0)),
            NodeKind::Traditional => {
                // requirement >= overhead, so the drain is nonnegative
                let tx = traditional_tx_power(available, profile, config)
                    .expect("active node covers its overhead");
                (available, Emission::Radiate(tx))
            }
        },
    };

    let battery_after_j = (available - consumed_j).max(0.0);
    node.battery_j = battery_after_j;
    SlotOutcome {
        harvested_j,
        consumed_j,
        was_active: emission.is_active(),
        emission,
        battery_after_j,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCyclePoint {
    pub alpha: f64,
    pub avg_harvest_w: f64,
    pub relative_rate: f64,
}

/// Average harvested power and relative rate of a node spending a fraction
/// `alpha` of its time active. Silent time harvests the whole incident wave;
/// active time harvests only what is not reflected.
pub fn duty_cycle_tradeoff(
    alpha: f64,
    incident_w: f64,
    reflect_mean_fraction: f64,
    config: &ScenarioConfig,
) -> Result<DutyCyclePoint, EnergyError> {
    for (name, value) in [("alpha", alpha), ("reflect fraction", reflect_mean_fraction)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(EnergyError::OutOfRange { name, value });
        }
    }
    let absorbed = (1.0 - alpha) + alpha * (1.0 - reflect_mean_fraction);
    Ok(DutyCyclePoint {
        alpha,
        avg_harvest_w: config.harvest_efficiency * incident_w * absorbed,
        relative_rate: alpha,
    })
}
