//! Slot-driven network simulation comparing backscatter and traditional
//! sensor populations powered by one PB.
//!
//! Each topology draw is simulated once per PB power and node kind, with
//! both kinds sharing the same node positions. Within a slot every node
//! harvests and decides independently (the PB is the only energy source),
//! then the frozen active set transmits concurrently and each active link's
//! BER is evaluated against the aggregate interference of the others.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{self, ChannelError};
use crate::energy::{self, ConsumptionProfile, Emission, EnergyError};
use crate::mac::{self, AccessMode, MacError, Transmitter};
use crate::phylink::{self, PhyError};
use crate::scenario::{self, purpose, NodeKind, NodeState, ScenarioConfig, ScenarioError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error("warmup ({warmup} slots) must be shorter than the run ({slots} slots)")]
    Warmup { warmup: usize, slots: usize },
}

/// Energy bookkeeping of one node over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeLedger {
    pub harvested_j: f64,
    pub consumed_j: f64,
    pub final_battery_j: f64,
    pub min_battery_j: f64,
    /// Active slots after warmup.
    pub active_slots: usize,
}

impl NodeLedger {
    /// `|battery - (harvested - consumed)|` relative to the energy harvested.
    pub fn conservation_error(&self) -> f64 {
        let residual = self.final_battery_j - (self.harvested_j - self.consumed_j);
        if self.harvested_j > 0.0 {
            residual.abs() / self.harvested_j
        } else {
            residual.abs()
        }
    }
}

/// Outcome of one population on one topology at one PB power.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRun {
    pub kind: NodeKind,
    pub pb_power_dbm: f64,
    /// Sum of per-link BERs over measured slots.
    pub ber_sum: f64,
    /// Number of active links that contributed a BER sample.
    pub ber_samples: usize,
    pub active_node_slots: usize,
    pub node_slots: usize,
    pub ledgers: Vec<NodeLedger>,
}

impl PopulationRun {
    /// `None` when no node was ever active after warmup.
    pub fn mean_ber(&self) -> Option<f64> {
        (self.ber_samples > 0).then(|| self.ber_sum / self.ber_samples as f64)
    }

    pub fn active_fraction(&self) -> f64 {
        if self.node_slots == 0 {
            0.0
        } else {
            self.active_node_slots as f64 / self.node_slots as f64
        }
    }

    /// Ids of the nodes active at least once after warmup.
    pub fn ever_active(&self) -> Vec<usize> {
        self.ledgers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.active_slots > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Error fraction of `bits` BPSK symbols sent at the given SINR with
/// Gaussian noise plus interference.
fn bit_level_ber(sinr: f64, bits: usize, rng: &mut ChaCha8Rng) -> f64 {
    // unit-energy symbols, real noise variance 1 / (2 SINR)
    let sd = (0.5 / sinr).sqrt();
    let errors = (0..bits)
        .filter(|_| {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let w: f64 = rng.sample(StandardNormal);
            let r = s + sd * w;
            (r >= 0.0) != (s > 0.0)
        })
        .count();
    errors as f64 / bits as f64
}

/// Simulates `num_slots` slots of one population over `topology`, measuring
/// after `config.warmup_slots`. Node kinds in `topology` are overridden by
/// `kind` and batteries start empty.
pub fn run_population(
    config: &ScenarioConfig,
    kind: NodeKind,
    topology: &[NodeState],
    pb_power_dbm: f64,
    num_slots: usize,
) -> Result<PopulationRun, SimError> {
    if config.warmup_slots >= num_slots {
        return Err(SimError::Warmup {
            warmup: config.warmup_slots,
            slots: num_slots,
        });
    }
    let profile = ConsumptionProfile::for_kind(kind, config)?;
    let pb_power_w = channel::dbm_to_watts(pb_power_dbm);
    let noise_w = channel::dbm_to_watts(config.noise_dbm);
    let link_gain = channel::path_gain(config, config.rx_distance_m)?;

    let mut nodes = scenario::with_kind(topology, kind);
    let incident: Vec<f64> = nodes
        .iter()
        .map(|n| Ok(pb_power_w * channel::path_gain(config, n.distance_to_pb())?))
        .collect::<Result<_, ChannelError>>()?;
    let gain_from_pb: Vec<f64> = incident.iter().map(|p| p / pb_power_w).collect();
    let mut noise_rngs: Vec<ChaCha8Rng> = if config.bit_level_bits > 0 {
        nodes.iter().map(|n| n.stream.rng(purpose::BIT_NOISE)).collect()
    } else {
        Vec::new()
    };

    let mut run = PopulationRun {
        kind,
        pb_power_dbm,
        ber_sum: 0.0,
        ber_samples: 0,
        active_node_slots: 0,
        node_slots: 0,
        ledgers: vec![NodeLedger::default(); nodes.len()],
    };
    let mut emissions = vec![Emission::Silent; nodes.len()];

    for slot in 0..num_slots {
        let measured = slot >= config.warmup_slots;
        for (i, node) in nodes.iter_mut().enumerate() {
            let out = energy::step_slot(node, incident[i], &profile, config);
            let ledger = &mut run.ledgers[i];
            ledger.harvested_j += out.harvested_j;
            ledger.consumed_j += out.consumed_j;
            ledger.final_battery_j = out.battery_after_j;
            ledger.min_battery_j = if slot == 0 {
                out.battery_after_j
            } else {
                ledger.min_battery_j.min(out.battery_after_j)
            };
            if measured && out.was_active {
                ledger.active_slots += 1;
            }
            emissions[i] = out.emission;
        }
        if !measured {
            continue;
        }

        let active_idx: Vec<usize> = (0..nodes.len())
            .filter(|&i| emissions[i].is_active())
            .collect();
        let actives: Vec<Transmitter> = active_idx
            .iter()
            .map(|&i| Transmitter::new(&nodes[i], emissions[i]))
            .collect();
        run.node_slots += nodes.len();
        run.active_node_slots += actives.len();

        for (&i, tx) in active_idx.iter().zip(&actives) {
            let node = &nodes[i];
            let signal_w = match tx.emission {
                Emission::Reflect(rho) => {
                    channel::backscatter_rx_power(pb_power_w, gain_from_pb[i], rho, link_gain)?
                }
                Emission::Radiate(p) => p * link_gain,
                Emission::Silent => unreachable!("silent nodes are filtered out"),
            };
            let interference_w =
                mac::aggregate_interference(node, &actives, pb_power_w, config, AccessMode::AllOn)?;
            let sinr = signal_w / (interference_w + noise_w);
            let ber = if config.bit_level_bits > 0 {
                bit_level_ber(sinr, config.bit_level_bits, &mut noise_rngs[i])
            } else {
                phylink::bpsk_ber(sinr)?
            };
            run.ber_sum += ber;
            run.ber_samples += 1;
        }
    }
    Ok(run)
}

/// Both populations at every swept PB power for one topology draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyRun {
    pub index: u64,
    pub node_count: usize,
    /// `runs[power][kind]`, kinds ordered as [`NodeKind::ALL`].
    pub runs: Vec<[PopulationRun; 2]>,
}

pub fn run_topology(
    config: &ScenarioConfig,
    index: u64,
    num_slots: usize,
) -> Result<TopologyRun, SimError> {
    let topology = scenario::draw_topology(config, config.seed, index)?;
    let runs = config
        .pb_power_dbm_sweep
        .iter()
        .map(|&p| {
            Ok([
                run_population(config, NodeKind::Backscatter, &topology, p, num_slots)?,
                run_population(config, NodeKind::Traditional, &topology, p, num_slots)?,
            ])
        })
        .collect::<Result<_, SimError>>()?;
    Ok(TopologyRun {
        index,
        node_count: topology.len(),
        runs,
    })
}

/// Aggregate over topology draws for one (PB power, node kind) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub pb_power_dbm: f64,
    pub kind: NodeKind,
    /// Mean BER over all active link-slots; `None` if there were none.
    pub mean_ber: Option<f64>,
    pub ci95_ber: Option<f64>,
    pub active_fraction: f64,
    pub ci95_active: f64,
    pub trials: usize,
    pub seed: u64,
}

const Z95: f64 = 1.959963984540054;

/// Pooled ratio `sum(num) / sum(den)` with a cluster-robust 95 % half-width,
/// each topology being one cluster.
fn pooled_ratio(clusters: &[(f64, f64)]) -> Option<(f64, f64)> {
    let den: f64 = clusters.iter().map(|c| c.1).sum();
    if den <= 0.0 {
        return None;
    }
    let ratio = clusters.iter().map(|c| c.0).sum::<f64>() / den;
    let k = clusters.len() as f64;
    if k < 2.0 {
        return Some((ratio, 0.0));
    }
    let ss: f64 = clusters.iter().map(|(n, d)| (n - ratio * d).powi(2)).sum();
    let var = k / (k - 1.0) * ss / (den * den);
    Some((ratio, Z95 * var.sqrt()))
}

/// Runs the full PB power sweep over `num_topologies` paired topology draws.
/// Results come in sweep order, backscatter before traditional.
pub fn run_comparison(
    config: &ScenarioConfig,
    num_topologies: usize,
    num_slots: usize,
) -> Result<Vec<ExperimentResult>, SimError> {
    config.validate().map_err(ScenarioError::from)?;
    let draws: Vec<TopologyRun> = (0..num_topologies as u64)
        .into_par_iter()
        .map(|t| run_topology(config, t, num_slots))
        .collect::<Result<_, _>>()?;
    Ok(summarize(config, &draws))
}

pub fn summarize(config: &ScenarioConfig, draws: &[TopologyRun]) -> Vec<ExperimentResult> {
    let mut results = Vec::new();
    for (pi, &pb_power_dbm) in config.pb_power_dbm_sweep.iter().enumerate() {
        for (ki, &kind) in NodeKind::ALL.iter().enumerate() {
            let ber: Vec<(f64, f64)> = draws
                .iter()
                .map(|d| {
                    let r = &d.runs[pi][ki];
                    (r.ber_sum, r.ber_samples as f64)
                })
                .collect();
            let active: Vec<(f64, f64)> = draws
                .iter()
                .map(|d| {
                    let r = &d.runs[pi][ki];
                    (r.active_node_slots as f64, r.node_slots as f64)
                })
                .collect();
            let ber = pooled_ratio(&ber);
            let (active_fraction, ci95_active) = pooled_ratio(&active).unwrap_or((0.0, 0.0));
            results.push(ExperimentResult {
                pb_power_dbm,
                kind,
                mean_ber: ber.map(|b| b.0),
                ci95_ber: ber.map(|b| b.1),
                active_fraction,
                ci95_active,
                trials: draws.len(),
                seed: config.seed,
            });
        }
    }
    results
}
