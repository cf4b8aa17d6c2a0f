//! Scenario configuration, random topology construction and deterministic
//! random-stream derivation.
//!
//! A topology is a Poisson number of sensor nodes placed uniformly over an
//! annulus around a single power beacon (PB) at the origin. Each node talks
//! to its own receiver at a fixed distance in a uniformly random direction.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    Value {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expected node count is zero (density {density}, annulus area {area} m^2)")]
    EmptyRegion { density: f64, area: f64 },
}

/// Physical and protocol constants of the network experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Nodes per square meter.
    pub node_density: f64,
    /// Outer radius of the deployment region, meters.
    pub region_radius: f64,
    /// PB transmit powers to sweep, dBm.
    pub pb_power_dbm_sweep: Vec<f64>,
    pub carrier_hz: f64,
    /// Effective antenna aperture of every antenna (PB included), m^2.
    pub aperture_m2: f64,
    /// Receiver noise power, dBm.
    pub noise_dbm: f64,
    pub harvest_efficiency: f64,
    pub slot_ms: f64,
    pub harvest_ms: f64,
    pub active_ms: f64,
    pub sense_energy_j: f64,
    pub digital_circuit_w: f64,
    pub mixer_w: f64,
    pub dac_w: f64,
    pub pa_efficiency: f64,
    pub rx_distance_m: f64,
    /// Inner radius of the annulus; keeps every node in the PB far field.
    pub min_pb_distance_m: f64,
    pub num_slots: usize,
    pub warmup_slots: usize,
    pub seed: u64,
    /// Independent topology draws per sweep point.
    pub num_topologies: usize,
    /// Pins the node count instead of drawing it from a Poisson law.
    pub fixed_node_count: Option<usize>,
    /// Minimum SNR a traditional node must be able to deliver at its
    /// receiver before it considers itself active, dB.
    pub traditional_min_snr_db: f64,
    /// Bits simulated per active link and slot; 0 selects the closed-form
    /// (Q-function) BER.
    pub bit_level_bits: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            node_density: 0.02,
            region_radius: 10.0,
            pb_power_dbm_sweep: (0..9).map(|i| 10.0 + 5.0 * i as f64).collect(),
            carrier_hz: 2.4e9,
            aperture_m2: 0.001,
            noise_dbm: -100.0,
            harvest_efficiency: 0.5,
            slot_ms: 100.0,
            harvest_ms: 20.0,
            active_ms: 80.0,
            sense_energy_j: 1e-7,
            digital_circuit_w: 2.5e-6,
            mixer_w: 15e-6,
            dac_w: 1e-4,
            pa_efficiency: 0.5,
            rx_distance_m: 0.5,
            min_pb_distance_m: 1.0,
            num_slots: 100,
            warmup_slots: 20,
            seed: 42,
            num_topologies: 200,
            fixed_node_count: None,
            traditional_min_snr_db: 0.0,
            bit_level_bits: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn harvest_s(&self) -> f64 {
        self.harvest_ms * 1e-3
    }

    pub fn active_s(&self) -> f64 {
        self.active_ms * 1e-3
    }

    /// Area of the annulus nodes are placed in.
    pub fn region_area(&self) -> f64 {
        std::f64::consts::PI
            * (self.region_radius.powi(2) - self.min_pb_distance_m.powi(2))
    }

    /// Poisson mean of the node count.
    pub fn expected_node_count(&self) -> f64 {
        self.node_density * self.region_area()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("node_density", self.node_density),
            ("region_radius", self.region_radius),
            ("carrier_hz", self.carrier_hz),
            ("aperture_m2", self.aperture_m2),
            ("harvest_efficiency", self.harvest_efficiency),
            ("slot_ms", self.slot_ms),
            ("harvest_ms", self.harvest_ms),
            ("active_ms", self.active_ms),
            ("sense_energy_j", self.sense_energy_j),
            ("digital_circuit_w", self.digital_circuit_w),
            ("mixer_w", self.mixer_w),
            ("dac_w", self.dac_w),
            ("pa_efficiency", self.pa_efficiency),
            ("rx_distance_m", self.rx_distance_m),
            ("min_pb_distance_m", self.min_pb_distance_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("harvest_efficiency", self.harvest_efficiency),
            ("pa_efficiency", self.pa_efficiency),
        ] {
            if value > 1.0 {
                return Err(ConfigError::Invalid(format!(
                    "{name} must not exceed 1, got {value}"
                )));
            }
        }
        if ((self.harvest_ms + self.active_ms) - self.slot_ms).abs() > 1e-9 * self.slot_ms {
            return Err(ConfigError::Invalid(format!(
                "harvest_ms + active_ms ({} + {}) must equal slot_ms ({})",
                self.harvest_ms, self.active_ms, self.slot_ms
            )));
        }
        if self.min_pb_distance_m >= self.region_radius {
            return Err(ConfigError::Invalid(format!(
                "min_pb_distance_m ({}) must be below region_radius ({})",
                self.min_pb_distance_m, self.region_radius
            )));
        }
        if self.pb_power_dbm_sweep.is_empty()
            || self.pb_power_dbm_sweep.iter().any(|p| !p.is_finite())
        {
            return Err(ConfigError::Invalid(
                "pb_power_dbm_sweep must be a nonempty list of finite values".into(),
            ));
        }
        if !self.noise_dbm.is_finite() || !self.traditional_min_snr_db.is_finite() {
            return Err(ConfigError::Invalid(
                "noise_dbm and traditional_min_snr_db must be finite".into(),
            ));
        }
        if self.warmup_slots >= self.num_slots {
            return Err(ConfigError::Invalid(format!(
                "warmup_slots ({}) must be below num_slots ({})",
                self.warmup_slots, self.num_slots
            )));
        }
        if self.num_topologies == 0 {
            return Err(ConfigError::Invalid("num_topologies must be positive".into()));
        }
        Ok(())
    }

    /// Parses the flat `key = value` format. Keys not present keep their
    /// default value. Lists are comma separated.
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: line_no })?;
            cfg.set(key.trim(), value.trim(), line_no)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::Value {
                line,
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key {
            "node_density" => self.node_density = num(key, value, line)?,
            "region_radius" => self.region_radius = num(key, value, line)?,
            "pb_power_dbm_sweep" => {
                self.pb_power_dbm_sweep = value
                    .split(',')
                    .map(|v| num(key, v.trim(), line))
                    .collect::<Result<_, _>>()?
            }
            "carrier_hz" => self.carrier_hz = num(key, value, line)?,
            "aperture_m2" => self.aperture_m2 = num(key, value, line)?,
            "noise_dbm" => self.noise_dbm = num(key, value, line)?,
            "harvest_efficiency" => self.harvest_efficiency = num(key, value, line)?,
            "slot_ms" => self.slot_ms = num(key, value, line)?,
            "harvest_ms" => self.harvest_ms = num(key, value, line)?,
            "active_ms" => self.active_ms = num(key, value, line)?,
            "sense_energy_j" => self.sense_energy_j = num(key, value, line)?,
            "digital_circuit_w" => self.digital_circuit_w = num(key, value, line)?,
            "mixer_w" => self.mixer_w = num(key, value, line)?,
            "dac_w" => self.dac_w = num(key, value, line)?,
            "pa_efficiency" => self.pa_efficiency = num(key, value, line)?,
            "rx_distance_m" => self.rx_distance_m = num(key, value, line)?,
            "min_pb_distance_m" => self.min_pb_distance_m = num(key, value, line)?,
            "num_slots" => self.num_slots = num(key, value, line)?,
            "warmup_slots" => self.warmup_slots = num(key, value, line)?,
            "seed" => self.seed = num(key, value, line)?,
            "num_topologies" => self.num_topologies = num(key, value, line)?,
            "fixed_node_count" => {
                self.fixed_node_count = match value {
                    "" | "none" => None,
                    v => Some(num(key, v, line)?),
                }
            }
            "traditional_min_snr_db" => self.traditional_min_snr_db = num(key, value, line)?,
            "bit_level_bits" => self.bit_level_bits = num(key, value, line)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

/// Identifies the purpose a derived random stream is used for.
pub mod purpose {
    pub const TOPOLOGY: u64 = 1;
    pub const PLACEMENT: u64 = 2;
    pub const BIT_NOISE: u64 = 3;
    pub const TIME_HOPPING: u64 = 4;
    pub const DYADIC: u64 = 5;
}

/// Derives an independent ChaCha8 stream for `(node_id, purpose_tag)`.
///
/// The master seed and purpose tag form the cipher key and the node id
/// selects the ChaCha stream, so distinct pairs never share keystream.
pub fn derive_stream(master_seed: u64, node_id: u64, purpose_tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose_tag.to_le_bytes());
    key[16..24].copy_from_slice(b"backsim\0");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(node_id);
    rng
}

/// Seed of the `index`-th independent topology drawn under `master_seed`.
pub fn topology_seed(master_seed: u64, index: u64) -> u64 {
    derive_stream(master_seed, index, purpose::TOPOLOGY).random()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Backscatter,
    Traditional,
}

impl NodeKind {
    pub const ALL: [NodeKind; 2] = [NodeKind::Backscatter, NodeKind::Traditional];

    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Backscatter => "backscatter",
            NodeKind::Traditional => "traditional",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifier of a node's private random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamId {
    pub seed: u64,
    pub node_id: u64,
}

impl StreamId {
    pub fn rng(&self, purpose_tag: u64) -> ChaCha8Rng {
        derive_stream(self.seed, self.node_id, purpose_tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    pub position: Point,
    pub receiver_position: Point,
    pub kind: NodeKind,
    pub battery_j: f64,
    pub stream: StreamId,
}

impl NodeState {
    pub fn distance_to_pb(&self) -> f64 {
        self.position.norm()
    }
}

/// Places a random topology. All nodes start as empty backscatter nodes;
/// use [`with_kind`] to obtain the paired traditional population.
pub fn place_nodes<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    stream_seed: u64,
    rng: &mut R,
) -> Result<Vec<NodeState>, ScenarioError> {
    config.validate()?;
    let count = match config.fixed_node_count {
        Some(n) => n,
        None => {
            let mean = config.expected_node_count();
            if mean <= 0.0 || !mean.is_finite() {
                return Err(ScenarioError::EmptyRegion {
                    density: config.node_density,
                    area: config.region_area(),
                });
            }
            let poisson = Poisson::new(mean).map_err(|_| ScenarioError::EmptyRegion {
                density: config.node_density,
                area: config.region_area(),
            })?;
            poisson.sample(rng) as usize
        }
    };

    let inner_sq = config.min_pb_distance_m.powi(2);
    let outer_sq = config.region_radius.powi(2);
    let nodes = (0..count)
        .map(|id| {
            // uniform in area: r^2 uniform on [inner^2, outer^2]
            let r_sq = inner_sq + rng.random::<f64>() * (outer_sq - inner_sq);
            let radius = r_sq
                .sqrt()
                .clamp(config.min_pb_distance_m, config.region_radius);
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let rx_angle = rng.random::<f64>() * std::f64::consts::TAU;
            let position = Point::polar(radius, angle);
            let offset = Point::polar(config.rx_distance_m, rx_angle);
            NodeState {
                id,
                position,
                receiver_position: Point::new(position.x + offset.x, position.y + offset.y),
                kind: NodeKind::Backscatter,
                battery_j: 0.0,
                stream: StreamId {
                    seed: stream_seed,
                    node_id: id as u64,
                },
            }
        })
        .collect();
    Ok(nodes)
}

/// Draws the `index`-th topology of an experiment seeded with `master_seed`.
pub fn draw_topology(
    config: &ScenarioConfig,
    master_seed: u64,
    index: u64,
) -> Result<Vec<NodeState>, ScenarioError> {
    let seed = topology_seed(master_seed, index);
    let mut rng = derive_stream(seed, 0, purpose::PLACEMENT);
    place_nodes(config, seed, &mut rng)
}

/// Copies a topology, switching every node to `kind` with an empty battery.
pub fn with_kind(topology: &[NodeState], kind: NodeKind) -> Vec<NodeState> {
    topology
        .iter()
        .map(|n| NodeState {
            kind,
            battery_j: 0.0,
            ..n.clone()
        })
        .collect()
}
