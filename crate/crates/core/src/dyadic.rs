//! Dyadic (keyhole-like) MIMO backscatter channel and its diversity order.
//!
//! The reader's carrier crosses the forward channel (`L x M_t`), is
//! modulated by each of the tag's `L` antennas and crosses the backward
//! channel (`M_r x L`) to the reader's receive array. Both hops are i.i.d.
//! Rayleigh and redrawn for every codeword.
//!
//! With one tag antenna the tag reflects BPSK symbols directly. With two it
//! applies the rate-one orthogonal (Alamouti) design to its reflection
//! coefficients over two symbol periods, each antenna reflecting at
//! amplitude `1/sqrt(2)`. The reader combines over its receive antennas
//! (maximum ratio). The reader's carrier is split evenly over its transmit
//! antennas.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::scenario::{derive_stream, purpose};

/// Fewest codewords accepted per SNR point.
pub const MIN_TRIALS: usize = 100_000;

const CHUNK: usize = 1 << 14;

#[derive(Debug, Error, PartialEq)]
pub enum DyadicError {
    #[error("unsupported number of tag antennas {0}; orthogonal designs are built for 1 or 2")]
    TagAntennas(usize),
    #[error("reader arrays need at least one antenna")]
    ReaderAntennas,
    #[error("at least {min} trials per point required, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("SNR grid is empty")]
    EmptyGrid,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("reflection coefficient magnitude {0} exceeds one")]
    NotPassive(f64),
    #[error("need at least 3 points in the top decade of the grid, got {0}")]
    TooFewPoints(usize),
    #[error("BER at {snr_db} dB is not statistically resolved; more trials needed")]
    Unresolved { snr_db: f64 },
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicChannel {
    /// Reader transmit antennas to tag antennas, `L x M_t`.
    pub forward: DMatrix<Complex64>,
    /// Tag antennas to reader receive antennas, `M_r x L`.
    pub backward: DMatrix<Complex64>,
}

impl DyadicChannel {
    /// Independent unit-variance circularly-symmetric Gaussian entries.
    pub fn draw<R: Rng + ?Sized>(
        tag_antennas: usize,
        reader_tx: usize,
        reader_rx: usize,
        rng: &mut R,
    ) -> Self {
        let forward = DMatrix::from_fn(tag_antennas, reader_tx, |_, _| complex_gaussian(rng));
        let backward = DMatrix::from_fn(reader_rx, tag_antennas, |_, _| complex_gaussian(rng));
        Self { forward, backward }
    }

    pub fn tag_antennas(&self) -> usize {
        self.forward.nrows()
    }
}

/// `backward * diag(tag_symbols) * forward`, the `M_r x M_t` end-to-end channel.
pub fn dyadic_composite(
    channel: &DyadicChannel,
    tag_symbols: &[Complex64],
) -> Result<DMatrix<Complex64>, DyadicError> {
    let l = channel.forward.nrows();
    if channel.backward.ncols() != l || tag_symbols.len() != l {
        return Err(DyadicError::Dimension(format!(
            "forward has {} rows, backward {} columns, {} tag symbols",
            l,
            channel.backward.ncols(),
            tag_symbols.len()
        )));
    }
    if let Some(g) = tag_symbols.iter().find(|g| g.norm() > 1.0 + 1e-12) {
        return Err(DyadicError::NotPassive(g.norm()));
    }
    let gamma = DMatrix::from_diagonal(&DVector::from_column_slice(tag_symbols));
    Ok(&channel.backward * gamma * &channel.forward)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BerMethod {
    /// Transmit random bits through the channel with noise and count errors.
    BitLevel,
    /// Draw the backward hop, average the exact error probability over the
    /// Rayleigh forward hop in closed form.
    Conditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicParams {
    pub tag_antennas: usize,
    pub reader_tx_antennas: usize,
    pub reader_rx_antennas: usize,
    pub snr_db_grid: Vec<f64>,
    pub trials: usize,
    pub method: BerMethod,
}

impl DyadicParams {
    pub fn new(tag_antennas: usize, reader_rx_antennas: usize) -> Self {
        Self {
            tag_antennas,
            reader_tx_antennas: 1,
            reader_rx_antennas,
            snr_db_grid: (0..8).map(|i| 5.0 * i as f64).collect(),
            trials: 1_000_000,
            method: BerMethod::Conditional,
        }
    }

    fn validate(&self) -> Result<(), DyadicError> {
        if !(1..=2).contains(&self.tag_antennas) {
            return Err(DyadicError::TagAntennas(self.tag_antennas));
        }
        if self.reader_tx_antennas == 0 || self.reader_rx_antennas == 0 {
            return Err(DyadicError::ReaderAntennas);
        }
        if self.trials < MIN_TRIALS {
            return Err(DyadicError::TooFewTrials {
                min: MIN_TRIALS,
                got: self.trials,
            });
        }
        if self.snr_db_grid.is_empty() {
            return Err(DyadicError::EmptyGrid);
        }
        Ok(())
    }
}

/// One point of a BER curve. `trials` counts codewords.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub std_err: f64,
    pub trials: usize,
}

impl BerPoint {
    /// Resolved means a relative standard error of at most 10 %, which for
    /// error counting is the usual "at least 100 errors" rule.
    pub fn is_resolved(&self) -> bool {
        self.ber > 0.0 && self.std_err <= 0.1 * self.ber
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    sum: f64,
    sum_sq: f64,
    count: usize,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally {
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            count: self.count + other.count,
        }
    }
}

/// Monte Carlo BER over the SNR grid. Deterministic in `(params, seed)`
/// regardless of the worker count.
pub fn simulate_dyadic_ber(params: &DyadicParams, seed: u64) -> Result<Vec<BerPoint>, DyadicError> {
    params.validate()?;
    params
        .snr_db_grid
        .iter()
        .enumerate()
        .map(|(point, &snr_db)| {
            let snr = 10f64.powf(snr_db / 10.0);
            let chunks = params.trials.div_ceil(CHUNK);
            let tallies: Vec<Tally> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let n = CHUNK.min(params.trials - c * CHUNK);
                    let stream = ((point as u64) << 32) | c as u64;
                    let mut rng = derive_stream(seed, stream, purpose::DYADIC);
                    match params.method {
                        BerMethod::BitLevel => bit_level_chunk(params, snr, n, &mut rng),
                        BerMethod::Conditional => conditional_chunk(params, snr, n, &mut rng),
                    }
                })
                .collect();
            let t = tallies.into_iter().fold(Tally::default(), Tally::merge);
            let mean = t.sum / t.count as f64;
            let var = (t.sum_sq / t.count as f64 - mean * mean).max(0.0);
            Ok(BerPoint {
                snr_db,
                ber: mean,
                std_err: (var / t.count as f64).sqrt(),
                trials: params.trials,
            })
        })
        .collect()
}

fn random_bpsk<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Counts bit errors; every bit is one Bernoulli sample of the tally.
fn bit_level_chunk<R: Rng + ?Sized>(params: &DyadicParams, snr: f64, n: usize, rng: &mut R) -> Tally {
    let l = params.tag_antennas;
    let noise_sd = (0.5 / snr).sqrt();
    let carrier = DVector::from_element(
        params.reader_tx_antennas,
        Complex64::new((params.reader_tx_antennas as f64).sqrt().recip(), 0.0),
    );
    let noise = |rng: &mut R| -> DVector<Complex64> {
        DVector::from_fn(params.reader_rx_antennas, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * noise_sd
        })
    };
    let mut errors = 0usize;
    let mut bits = 0usize;
    for _ in 0..n {
        let ch = DyadicChannel::draw(l, params.reader_tx_antennas, params.reader_rx_antennas, rng);
        let receive = |gammas: &[Complex64], rng: &mut R| -> DVector<Complex64> {
            let h = dyadic_composite(&ch, gammas).expect("dimensions fixed by params");
            &h * &carrier + noise(rng)
        };
        // per-antenna effective channels h_l = b_l * (f_l . x)
        let a = &ch.forward * &carrier;
        let branch: Vec<DVector<Complex64>> =
            (0..l).map(|k| ch.backward.column(k) * a[k]).collect();
        if l == 1 {
            let s = random_bpsk(rng);
            let y = receive(&[Complex64::new(s, 0.0)], rng);
            let z = branch[0].dotc(&y);
            errors += usize::from((z.re >= 0.0) != (s > 0.0));
            bits += 1;
        } else {
            let (s1, s2) = (random_bpsk(rng), random_bpsk(rng));
            let amp = std::f64::consts::FRAC_1_SQRT_2;
            let c = |v: f64| Complex64::new(v * amp, 0.0);
            let y1 = receive(&[c(s1), c(s2)], rng);
            let y2 = receive(&[c(-s2), c(s1)], rng);
            let (h1, h2) = (&branch[0], &branch[1]);
            let z1 = h1.dotc(&y1) + y2.dotc(h2);
            let z2 = h2.dotc(&y1) - y2.dotc(h1);
            errors += usize::from((z1.re >= 0.0) != (s1 > 0.0));
            errors += usize::from((z2.re >= 0.0) != (s2 > 0.0));
            bits += 2;
        }
    }
    Tally {
        sum: errors as f64,
        sum_sq: errors as f64,
        count: bits,
    }
}

/// BPSK error probability over one Rayleigh branch of mean SNR `g`,
/// `(1 - sqrt(g / (1 + g))) / 2` in a cancellation-free form.
fn rayleigh_ber(g: f64) -> f64 {
    let mu = (g / (1.0 + g)).sqrt();
    0.5 / ((1.0 + g) * (1.0 + mu))
}

/// BPSK over maximum-ratio combining of two Rayleigh branches.
fn two_branch_ber(g1: f64, g2: f64) -> f64 {
    let (hi, lo) = if g1 >= g2 { (g1, g2) } else { (g2, g1) };
    if hi - lo <= 1e-3 * hi {
        let p = rayleigh_ber(0.5 * (hi + lo));
        return p * p * (3.0 - 2.0 * p);
    }
    (hi * rayleigh_ber(hi) - lo * rayleigh_ber(lo)) / (hi - lo)
}

fn conditional_chunk<R: Rng + ?Sized>(params: &DyadicParams, snr: f64, n: usize, rng: &mut R) -> Tally {
    let l = params.tag_antennas;
    let mr = params.reader_rx_antennas;
    let per_branch = snr / l as f64;
    let mut t = Tally::default();
    for _ in 0..n {
        let mut gains = [0.0f64; 2];
        for g in gains.iter_mut().take(l) {
            *g = (0..mr).map(|_| complex_gaussian(rng).norm_sqr()).sum::<f64>() * per_branch;
        }
        let p = match l {
            1 => rayleigh_ber(gains[0]),
            _ => two_branch_ber(gains[0], gains[1]),
        };
        t.sum += p;
        t.sum_sq += p * p;
        t.count += 1;
    }
    t
}

/// Negative slope of `log10(BER)` against `SNR_dB / 10`, least squares over
/// the points within 10 dB of the highest SNR of the curve.
pub fn estimate_diversity_order(curve: &[BerPoint]) -> Result<f64, DyadicError> {
    let top = curve
        .iter()
        .map(|p| p.snr_db)
        .fold(f64::NEG_INFINITY, f64::max);
    let window: Vec<&BerPoint> = curve.iter().filter(|p| p.snr_db >= top - 10.0).collect();
    if window.len() < 3 {
        return Err(DyadicError::TooFewPoints(window.len()));
    }
    if let Some(p) = window.iter().find(|p| !p.is_resolved()) {
        return Err(DyadicError::Unresolved { snr_db: p.snr_db });
    }
    let xs: Vec<f64> = window.iter().map(|p| p.snr_db / 10.0).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.ber.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}
