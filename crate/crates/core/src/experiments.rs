//! Table builders for every runnable experiment.

use thiserror::Error;

use crate::channel::{self, ChannelError, LinkBudget};
use crate::dyadic::{self, BerMethod, DyadicError, DyadicParams};
use crate::energy::{self, EnergyError};
use crate::mac::{self, MacError};
use crate::netsim::{self, SimError};
use crate::phylink::{self, PhyError, ReflectionConstellation};
use crate::report::{self, fmt_float, Table};
use crate::scenario::{derive_stream, purpose, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error("sweep has no power points")]
    EmptySweep,
}

pub const BETA_HEADER: [&str; 4] = ["beta", "harvested_fraction", "ber", "rate_bits"];
pub const DUTY_HEADER: [&str; 3] = ["alpha", "avg_harvest_w", "relative_rate"];
pub const THSS_HEADER: [&str; 6] = ["k", "n", "trials", "empirical", "analytic", "std_err"];
pub const INTERFERENCE_HEADER: [&str; 2] = ["K", "components"];
pub const DYADIC_HEADER: [&str; 6] = [
    "tag_antennas",
    "reader_rx_antennas",
    "snr_db",
    "ber",
    "std_err",
    "trials",
];

pub const THSS_CASES: [(usize, usize); 3] = [(2, 10), (10, 100), (50, 10)];
pub const THSS_TRIALS: usize = 100_000;
pub const INTERFERENCE_KS: [usize; 5] = [1, 2, 5, 10, 20];
/// (tag antennas, reader receive antennas)
pub const DYADIC_CASES: [(usize, usize); 3] = [(1, 2), (2, 2), (1, 8)];
/// PB power for the duty-cycle table, dBm.
pub const DUTY_PB_DBM: f64 = 30.0;

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

fn grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Both network figures come from the same comparison table; fig3a reads
/// its BER columns and fig3b its active-fraction columns.
pub fn comparison(config: &ScenarioConfig, num_topologies: usize) -> Result<Table, ExperimentError> {
    let results = netsim::run_comparison(config, num_topologies, config.num_slots)?;
    Ok(report::comparison_table(&results))
}

/// Tag at the region edge, PB at the lowest sweep power, noise only.
pub fn beta_link(config: &ScenarioConfig) -> Result<LinkBudget, ExperimentError> {
    let pb_dbm = *config
        .pb_power_dbm_sweep
        .first()
        .ok_or(ExperimentError::EmptySweep)?;
    let gain = channel::path_gain(config, config.region_radius)?
        * channel::path_gain(config, config.rx_distance_m)?;
    Ok(LinkBudget::new(
        channel::dbm_to_watts(pb_dbm),
        gain,
        0.0,
        channel::dbm_to_watts(config.noise_dbm),
    ))
}

pub fn tradeoff_beta(config: &ScenarioConfig, betas: &[f64]) -> Result<Table, ExperimentError> {
    let link = beta_link(config)?;
    let frontier = phylink::energy_rate_frontier(&ReflectionConstellation::bpsk(), betas, &link)?;
    let mut t = Table::new(&BETA_HEADER);
    for p in frontier {
        t.push(vec![
            fmt_float(p.beta),
            fmt_float(p.harvested_fraction),
            fmt_float(p.ber),
            fmt_float(1.0 - binary_entropy(p.ber)),
        ]);
    }
    Ok(t)
}

pub fn default_beta_grid() -> Vec<f64> {
    grid(20)
}

pub fn default_duty_grid() -> Vec<f64> {
    grid(10)
}

pub fn tradeoff_duty(config: &ScenarioConfig, alphas: &[f64]) -> Result<Table, ExperimentError> {
    let incident = channel::dbm_to_watts(DUTY_PB_DBM) * channel::path_gain(config, config.region_radius)?;
    let mut t = Table::new(&DUTY_HEADER);
    for &alpha in alphas {
        let p = energy::duty_cycle_tradeoff(alpha, incident, 1.0, config)?;
        t.push(vec![
            fmt_float(p.alpha),
            fmt_float(p.avg_harvest_w),
            fmt_float(p.relative_rate),
        ]);
    }
    Ok(t)
}

pub fn thss(seed: u64, trials: usize) -> Result<Table, ExperimentError> {
    let mut t = Table::new(&THSS_HEADER);
    for (i, &(k, n)) in THSS_CASES.iter().enumerate() {
        let mut rng = derive_stream(seed, i as u64, purpose::TIME_HOPPING);
        let est = mac::simulate_collisions(k, n, trials, &mut rng)?;
        let analytic = mac::collision_probability(k, n);
        t.push(vec![
            k.to_string(),
            n.to_string(),
            trials.to_string(),
            fmt_float(est.frequency()),
            fmt_float(analytic),
            fmt_float(est.std_error(analytic)),
        ]);
    }
    Ok(t)
}

pub fn interference_count() -> Table {
    let mut t = Table::new(&INTERFERENCE_HEADER);
    for k in INTERFERENCE_KS {
        t.push(vec![k.to_string(), mac::count_interference_components(k).to_string()]);
    }
    t
}

pub fn dyadic_params(tag_antennas: usize, reader_rx_antennas: usize, trials: usize) -> DyadicParams {
    DyadicParams {
        trials,
        method: BerMethod::Conditional,
        ..DyadicParams::new(tag_antennas, reader_rx_antennas)
    }
}

pub fn dyadic(seed: u64, trials: usize) -> Result<Table, ExperimentError> {
    let mut t = Table::new(&DYADIC_HEADER);
    for (l, mr) in DYADIC_CASES {
        let curve = dyadic::simulate_dyadic_ber(&dyadic_params(l, mr, trials), seed)?;
        for p in curve {
            t.push(vec![
                l.to_string(),
                mr.to_string(),
                fmt_float(p.snr_db),
                fmt_float(p.ber),
                fmt_float(p.std_err),
                p.trials.to_string(),
            ]);
        }
    }
    Ok(t)
}
