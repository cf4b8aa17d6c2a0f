//! Multiple access: TDMA and time-hopping slot assignment, interference
//! component counting and aggregate interference at a receiver.
//!
//! Only first-order reflections are modelled. A backscatter interferer
//! contributes the PB carrier it reflects; reflections of other tags'
//! reflections are dropped. Interference powers add incoherently.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::channel::{self, ChannelError};
use crate::energy::Emission;
use crate::scenario::{NodeState, Point, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum MacError {
    #[error("frame of {frame_length} slots cannot hold {nodes} nodes without collisions")]
    FrameTooShort { frame_length: usize, nodes: usize },
    #[error("frame length must be at least one slot")]
    EmptyFrame,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Slot of every node within a frame of `frame_length` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    pub frame_length: usize,
    pub assignments: BTreeMap<usize, usize>,
}

impl SlotAssignment {
    pub fn slot_of(&self, node_id: usize) -> Option<usize> {
        self.assignments.get(&node_id).copied()
    }

    /// Whether `a` and `b` transmit in the same slot.
    pub fn shares_slot(&self, a: usize, b: usize) -> bool {
        matches!((self.slot_of(a), self.slot_of(b)), (Some(x), Some(y)) if x == y)
    }

    /// Number of nodes sharing at least one slot with another node.
    pub fn collided_nodes(&self) -> usize {
        let mut per_slot = vec![0usize; self.frame_length];
        for &s in self.assignments.values() {
            per_slot[s] += 1;
        }
        per_slot.iter().filter(|&&c| c > 1).sum()
    }
}

/// Round-robin TDMA: the i-th id (in the given order) gets slot i.
pub fn tdma_schedule(node_ids: &[usize], frame_length: usize) -> Result<SlotAssignment, MacError> {
    if frame_length == 0 {
        return Err(MacError::EmptyFrame);
    }
    if frame_length < node_ids.len() {
        return Err(MacError::FrameTooShort {
            frame_length,
            nodes: node_ids.len(),
        });
    }
    Ok(SlotAssignment {
        frame_length,
        assignments: node_ids.iter().enumerate().map(|(slot, &id)| (id, slot)).collect(),
    })
}

/// Time hopping: every node picks one of `frame_length` slots independently
/// and uniformly.
pub fn th_ss_assign<R: Rng + ?Sized>(
    node_ids: &[usize],
    frame_length: usize,
    rng: &mut R,
) -> Result<SlotAssignment, MacError> {
    if frame_length == 0 {
        return Err(MacError::EmptyFrame);
    }
    Ok(SlotAssignment {
        frame_length,
        assignments: node_ids
            .iter()
            .map(|&id| (id, rng.random_range(0..frame_length)))
            .collect(),
    })
}

/// Expected number of nodes in any one slot when `k` nodes hop over `n` slots.
pub fn expected_simultaneous(k: usize, n: usize) -> f64 {
    assert!(n >= 1, "frame length must be positive");
    k as f64 / n as f64
}

/// Probability that a given node shares its slot with at least one of the
/// other `k - 1` hopping nodes.
pub fn collision_probability(k: usize, n: usize) -> f64 {
    assert!(n >= 1, "frame length must be positive");
    if k < 2 {
        return 0.0;
    }
    1.0 - (1.0 - 1.0 / n as f64).powi(k as i32 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEstimate {
    pub trials: usize,
    pub collisions: usize,
}

impl CollisionEstimate {
    pub fn frequency(&self) -> f64 {
        self.collisions as f64 / self.trials as f64
    }

    /// Binomial standard error at probability `p`.
    pub fn std_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Monte Carlo frequency with which node 0 collides under time hopping.
pub fn simulate_collisions<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<CollisionEstimate, MacError> {
    let ids: Vec<usize> = (0..k).collect();
    let mut collisions = 0;
    for _ in 0..trials {
        let a = th_ss_assign(&ids, n, rng)?;
        if (1..k).any(|j| a.shares_slot(0, j)) {
            collisions += 1;
        }
    }
    Ok(CollisionEstimate { trials, collisions })
}

/// Interference components reaching one reader when `k` backscatter links
/// coexist: each of the other `k - 1` tags reflects all `k` carriers.
pub fn count_interference_components(k: usize) -> usize {
    k.saturating_sub(1) * k
}

/// Components summed over all `k` readers.
pub fn network_interference_components(k: usize) -> usize {
    k * count_interference_components(k)
}

/// An active node as seen by other receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    pub id: usize,
    pub position: Point,
    pub emission: Emission,
}

impl Transmitter {
    pub fn new(node: &NodeState, emission: Emission) -> Self {
        Self {
            id: node.id,
            position: node.position,
            emission,
        }
    }

    /// Power this transmitter delivers at `at`.
    pub fn power_at(
        &self,
        at: &Point,
        pb_power_w: f64,
        config: &ScenarioConfig,
    ) -> Result<f64, ChannelError> {
        let to_rx = || channel::path_gain(config, self.position.distance(at));
        match self.emission {
            Emission::Silent => Ok(0.0),
            Emission::Radiate(tx_w) => Ok(tx_w * to_rx()?),
            Emission::Reflect(rho) => {
                let from_pb = channel::path_gain(config, self.position.norm())?;
                channel::backscatter_rx_power(pb_power_w, from_pb, rho, to_rx()?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum AccessMode<'a> {
    /// Everyone transmits at once.
    AllOn,
    Tdma(&'a SlotAssignment),
    ThSs(&'a SlotAssignment),
}

/// Total interference power at `receiver`'s receiver from `actives`.
/// The receiver's own transmitter is skipped if present.
pub fn aggregate_interference(
    receiver: &NodeState,
    actives: &[Transmitter],
    pb_power_w: f64,
    config: &ScenarioConfig,
    mode: AccessMode<'_>,
) -> Result<f64, MacError> {
    let mut total = 0.0;
    for tx in actives.iter().filter(|t| t.id != receiver.id) {
        let collides = match mode {
            AccessMode::AllOn => true,
            AccessMode::Tdma(a) | AccessMode::ThSs(a) => a.shares_slot(receiver.id, tx.id),
        };
        if collides {
            total += tx.power_at(&receiver.receiver_position, pb_power_w, config)?;
        }
    }
    Ok(total)
}
