//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use backsim::dyadic::{self, BerMethod, DyadicParams};
use backsim::energy;
use backsim::experiments;
use backsim::mac;
use backsim::netsim::{self, ExperimentResult};
use backsim::phylink::{self, ReflectionConstellation};
use backsim::scenario::{derive_stream, purpose, NodeKind, ScenarioConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (
        elapsed <= limit,
        format!("runtime {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn row(results: &[ExperimentResult], dbm: f64, kind: NodeKind) -> &ExperimentResult {
    results
        .iter()
        .find(|r| r.pb_power_dbm == dbm && r.kind == kind)
        .expect("sweep point present")
}

fn fmt_ber(b: Option<f64>) -> String {
    b.map_or("absent".to_string(), |v| format!("{v:.3e}"))
}

fn comparison() -> (Vec<ExperimentResult>, Duration) {
    let cfg = ScenarioConfig::default();
    let start = Instant::now();
    let results = netsim::run_comparison(&cfg, 200, cfg.num_slots).expect("comparison runs");
    (results, start.elapsed())
}

fn criterion_1(results: &[ExperimentResult], elapsed: Duration) -> Outcome {
    let cfg = ScenarioConfig::default();
    let mut ok = true;
    let mut notes = Vec::new();
    for &p in &cfg.pb_power_dbm_sweep {
        let b = row(results, p, NodeKind::Backscatter).mean_ber;
        let t = row(results, p, NodeKind::Traditional).mean_ber;
        let point_ok = matches!((b, t), (Some(b), Some(t)) if b <= t);
        if !point_ok {
            ok = false;
            notes.push(format!("{p} dBm: bs {} vs trad {}", fmt_ber(b), fmt_ber(t)));
        }
    }
    let ratio = match (
        row(results, 40.0, NodeKind::Backscatter).mean_ber,
        row(results, 40.0, NodeKind::Traditional).mean_ber,
    ) {
        (Some(b), Some(t)) if b > 0.0 => Some(t / b),
        _ => None,
    };
    let ratio_ok = ratio.is_some_and(|r| (10.0..=1000.0).contains(&r));
    let (time_ok, time) = within(Duration::from_secs(120), elapsed);
    let violations = if notes.is_empty() {
        "none".to_string()
    } else {
        notes.join("; ")
    };
    outcome(
        ok && ratio_ok && time_ok,
        format!(
            "ordering violations: {violations}; trad/bs ratio at 40 dBm {} (need [10, 1000]); {time}",
            ratio.map_or("undefined".into(), |r| format!("{r:.3}"))
        ),
    )
}

fn criterion_2(results: &[ExperimentResult]) -> Outcome {
    let b = row(results, 50.0, NodeKind::Backscatter).mean_ber;
    let t = row(results, 50.0, NodeKind::Traditional).mean_ber;
    match (b, t) {
        (Some(b), Some(t)) if b > 0.0 && t > 0.0 => {
            let gap = (b.log10() - t.log10()).abs();
            outcome(gap < 0.5, format!("|dlog10 BER| at 50 dBm = {gap:.3} (need < 0.5)"))
        }
        _ => outcome(false, format!("BER at 50 dBm: bs {} trad {}", fmt_ber(b), fmt_ber(t))),
    }
}

fn criterion_3(results: &[ExperimentResult]) -> Outcome {
    let cfg = ScenarioConfig::default();
    let mut ok = true;
    for kind in NodeKind::ALL {
        let fr: Vec<f64> = cfg
            .pb_power_dbm_sweep
            .iter()
            .map(|&p| row(results, p, kind).active_fraction)
            .collect();
        if fr.windows(2).any(|w| w[1] < w[0]) {
            ok = false;
        }
    }
    let gap = |p: f64| {
        100.0
            * (row(results, p, NodeKind::Backscatter).active_fraction
                - row(results, p, NodeKind::Traditional).active_fraction)
    };
    let (g30, g40) = (gap(30.0), gap(40.0));
    let pass = ok && (5.0..=40.0).contains(&g30) && (40.0..=100.0).contains(&g40);
    outcome(
        pass,
        format!(
            "monotone {ok}; gap at 30 dBm {g30:.2} pp (need [5, 40]); at 40 dBm {g40:.2} pp (need [40, 100])"
        ),
    )
}

/// erfc from the everywhere-positive series
/// erf(z) = 2/sqrt(pi) exp(-z^2) sum_n 2^n z^(2n+1) / (2n+1)!!.
fn erfc_oracle(z: f64) -> f64 {
    if z < 0.0 {
        return 2.0 - erfc_oracle(-z);
    }
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    while term > 1e-18 * sum {
        n += 1.0;
        term *= 2.0 * z * z / (2.0 * n + 1.0);
        sum += term;
    }
    let erf = 2.0 / std::f64::consts::PI.sqrt() * (-z * z).exp() * sum;
    1.0 - erf
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..1601 {
        let x = -8.0 + 16.0 * i as f64 / 1600.0;
        let oracle = 0.5 * erfc_oracle(x / std::f64::consts::SQRT_2);
        worst = worst.max((phylink::q_function(x) - oracle).abs());
    }
    let (time_ok, time) = within(Duration::from_secs(1), start.elapsed());
    outcome(worst <= 1e-12 && time_ok, format!("max abs error {worst:.3e} (need <= 1e-12); {time}"))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let trials = 100_000;
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, (k, n)) in [(2usize, 10usize), (10, 100), (50, 10)].into_iter().enumerate() {
        let mut rng = derive_stream(42, i as u64, purpose::TIME_HOPPING);
        let est = mac::simulate_collisions(k, n, trials, &mut rng).expect("valid case");
        let p = 1.0 - (1.0 - 1.0 / n as f64).powi(k as i32 - 1);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let z = (est.collisions as f64 / trials as f64 - p) / se;
        ok &= z.abs() <= 3.0;
        notes.push(format!("(K={k},N={n}) z={z:+.2}"));
    }
    let (time_ok, time) = within(Duration::from_secs(10), start.elapsed());
    outcome(ok && time_ok, format!("{} (need |z| <= 3); {time}", notes.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut got = Vec::new();
    for k in [1usize, 2, 5, 10, 20] {
        let c = mac::count_interference_components(k);
        ok &= c == (k - 1) * k;
        got.push(format!("K={k}:{c}"));
    }
    ok &= mac::count_interference_components(2) == 2;
    outcome(ok, got.join(", "))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let slope = |l: usize, mr: usize| -> Result<f64, String> {
        let params = DyadicParams {
            trials: 1_000_000,
            method: BerMethod::Conditional,
            snr_db_grid: (0..8).map(|i| 5.0 * i as f64).collect(),
            ..DyadicParams::new(l, mr)
        };
        let curve = dyadic::simulate_dyadic_ber(&params, 42).map_err(|e| e.to_string())?;
        dyadic::estimate_diversity_order(&curve).map_err(|e| e.to_string())
    };
    let (s1, s2, s8) = (slope(1, 2), slope(2, 2), slope(1, 8));
    let (time_ok, time) = within(Duration::from_secs(300), start.elapsed());
    match (s1, s2, s8) {
        (Ok(s1), Ok(s2), Ok(s8)) => {
            let pass = (s1 - 1.0).abs() <= 0.3
                && (s2 - 2.0).abs() <= 0.5
                && (s8 - 1.0).abs() <= 0.3
                && time_ok;
            outcome(
                pass,
                format!("slope L=1,Mr=2 {s1:.3}; L=2,Mr=2 {s2:.3}; L=1,Mr=8 {s8:.3}; {time}"),
            )
        }
        (a, b, c) => outcome(false, format!("fit failed: {a:?} {b:?} {c:?}")),
    }
}

fn criterion_8() -> Outcome {
    let cfg = ScenarioConfig::default();
    let mut worst = 0.0f64;
    let mut min_battery = f64::INFINITY;
    let mut nodes = 0usize;
    for t in 0..cfg.num_topologies as u64 {
        let run = netsim::run_topology(&cfg, t, cfg.num_slots).expect("topology runs");
        for pair in &run.runs {
            for pop in pair {
                for l in &pop.ledgers {
                    worst = worst.max(l.conservation_error());
                    min_battery = min_battery.min(l.min_battery_j).min(l.final_battery_j);
                    nodes += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-9 && min_battery >= 0.0,
        format!("{nodes} node runs; worst relative residual {worst:.3e}; min battery {min_battery:.3e} J"),
    )
}

fn entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

fn strictly(v: &[f64], decreasing: bool) -> bool {
    v.windows(2)
        .all(|w| if decreasing { w[1] < w[0] } else { w[1] > w[0] })
}

fn criterion_9() -> Outcome {
    let cfg = ScenarioConfig::default();
    let link = experiments::beta_link(&cfg).expect("link");
    let betas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let frontier = phylink::energy_rate_frontier(&ReflectionConstellation::bpsk(), &betas, &link)
        .expect("frontier");
    let harvested: Vec<f64> = frontier.iter().map(|p| p.harvested_fraction).collect();
    let rate: Vec<f64> = frontier.iter().map(|p| 1.0 - entropy(p.ber)).collect();
    let beta_ok = strictly(&harvested, true) && strictly(&rate, false);

    let incident = backsim::channel::dbm_to_watts(experiments::DUTY_PB_DBM)
        * backsim::channel::path_gain(&cfg, cfg.region_radius).expect("gain");
    let duty: Vec<_> = (0..=5)
        .map(|i| energy::duty_cycle_tradeoff(i as f64 / 5.0, incident, 1.0, &cfg).expect("duty"))
        .collect();
    let dh: Vec<f64> = duty.iter().map(|p| p.avg_harvest_w).collect();
    let dr: Vec<f64> = duty.iter().map(|p| p.relative_rate).collect();
    let duty_ok = strictly(&dh, true) && strictly(&dr, false);
    outcome(
        beta_ok && duty_ok,
        format!("beta frontier monotone {beta_ok}; duty frontier monotone {duty_ok}"),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let names = [
        "fig3a",
        "fig3b",
        "tradeoff_beta",
        "tradeoff_duty",
        "thss",
        "interference_count",
        "dyadic",
    ];
    let mut differing = Vec::new();
    for name in names {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{name}-{run}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_backsim"))
                .args(["--experiment", name, "--seed", "42", "--out"])
                .arg(&out)
                .output()
                .expect("binary runs");
            if !status.status.success() {
                return outcome(false, format!("{name} exited with {}", status.status));
            }
            outputs.push(std::fs::read(&out).expect("output written"));
        }
        if outputs[0] != outputs[1] {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} experiments run twice; differing: {differing:?}", names.len()),
    )
}

type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let (results, elapsed) = comparison();
    let checks: Vec<Check> = vec![
        ("1 fig3a BER trend", Box::new(|| criterion_1(&results, elapsed))),
        ("2 fig3a convergence", Box::new(|| criterion_2(&results))),
        ("3 fig3b active-fraction trend", Box::new(|| criterion_3(&results))),
        ("4 Q-function accuracy", Box::new(criterion_4)),
        ("5 TH-SS collision oracle", Box::new(criterion_5)),
        ("6 interference counting", Box::new(criterion_6)),
        ("7 dyadic diversity", Box::new(criterion_7)),
        ("8 energy conservation", Box::new(criterion_8)),
        ("9 energy-rate frontiers", Box::new(criterion_9)),
        ("10 determinism", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
