//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use common::*;
use epdc::io::optics::{power_to_mean_photons, OpticalConfig};
use epdc::io::{BiasScenario, ScenarioFile};
use epdc::sweep_analysis::SweepConfig;
use epdc::synthetic_bench::{brute_force_click_probability, log_grid, safe_photon_cutoff};
use epdc::{
    analyze_sweep, click_probability, regime_boundaries, regime_crossover, select_model, EpdcModel, FitConfig,
    SelectionConfig, SyntheticScenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = log_grid(1e-9, 1e3, 30);
    let models: Vec<EpdcModel> = (0..200)
        .map(|_| {
            let i_max = rng.random_range(0..=7);
            let eta = 10f64.powf(rng.random_range(-6.0..0.0));
            EpdcModel::new(eta, (0..=i_max).map(|_| rng.random::<f64>()).collect()).unwrap()
        })
        .collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for m in &models {
        for &mu in &grid {
            let n = mu / m.eta();
            let truth = brute_force_click_probability(m, n, safe_photon_cutoff(mu, m.i_max())).unwrap();
            let got = click_probability(m, n).unwrap();
            worst = worst.max(if truth == 0.0 { got.abs() } else { ((got - truth) / truth).abs() });
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 5.0, format!("worst relative error {worst:.2e}, {secs:.2} s"))
}

/// Mean photon number where the oracle gives `target`, by bisection in log N.
fn solve_oracle(model: &EpdcModel, target: f64) -> f64 {
    let oracle = |n: f64| brute_force_click_probability(model, n, safe_photon_cutoff(model.eta() * n, model.i_max())).unwrap();
    let (mut lo, mut hi) = (1e-6f64, 1e12f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if oracle(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

fn low_rate_stability() -> Outcome {
    let models = [
        EpdcModel::new(1.2e-4, vec![0.0, 0.06, 0.37]).unwrap(),
        EpdcModel::new(1.2e-4, vec![0.0, 0.0, 0.3]).unwrap(),
        EpdcModel::new(1.2e-4, vec![0.0, 1e-5, 2e-3, 0.15]).unwrap(),
    ];
    let mut worst = 0.0f64;
    for m in &models {
        let n = solve_oracle(m, 1e-6);
        let truth = brute_force_click_probability(m, n, safe_photon_cutoff(m.eta() * n, m.i_max())).unwrap();
        worst = worst.max(rel(click_probability(m, n).unwrap(), truth));
    }
    let digits = -worst.max(1e-17).log10();
    outcome(worst < 5e-9, format!("worst relative error {worst:.2e} at R = 1e-6 ({digits:.1} digits)"))
}

fn round_trip_recovery() -> Outcome {
    let truth = two_photon_truth();
    let grid = power_grid();
    let config = SelectionConfig::default();
    let fit = FitConfig::default();
    let start = Instant::now();
    let mut good = 0;
    for seed in 0..100 {
        let data = sampled(&truth, &grid, TRIALS, seed);
        let Ok(report) = select_model(&data, config.i_max_range(), &config, &fit) else { continue };
        let Some(sel) = report.selected() else { continue };
        let m = &sel.model;
        if sel.i_max() == 2
            && rel(m.eta(), truth.eta()) <= 0.05
            && rel(m.p()[1], truth.p()[1]) <= 0.10
            && rel(m.p()[2], truth.p()[2]) <= 0.10
        {
            good += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(good >= 95 && secs < 60.0, format!("{good}/100 seeds recovered, {secs:.1} s"))
}

fn ladder_rejection() -> Outcome {
    let truth = EpdcModel::new(1.2e-4, vec![1e-6, 1e-5, 2e-3, 0.15]).unwrap();
    let data = sampled(&truth, &power_grid(), TRIALS, 3);
    let config = SelectionConfig::default();
    match select_model(&data, config.i_max_range(), &config, &FitConfig::default()) {
        Ok(report) => {
            let chi = report.candidate(1).map(|c| c.chi2_reduced).unwrap_or(f64::NAN);
            outcome(chi > 1e3, format!("i_max = 1 chi2_red = {chi:.3e}, selected {:?}", report.selected_i_max))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn crossover() -> Outcome {
    let m = two_photon_truth();
    let mu = regime_crossover(&m, 1, 2).unwrap();
    outcome((mu - 0.3243).abs() <= 1e-4, format!("mu = {mu:.6}"))
}

fn photon_conversion() -> Outcome {
    let n = power_to_mean_photons(5e-6, &OpticalConfig::default()).unwrap();
    outcome((1.8e6..=2.0e6).contains(&n), format!("N(5 uW) = {n:.6e}"))
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = log_grid(1e-9, 1e3, 200);
    let mut violations = 0;
    for _ in 0..1000 {
        let i_max = rng.random_range(0..=8);
        let mut p: Vec<f64> = (0..=i_max).map(|_| rng.random::<f64>()).collect();
        p.sort_by(f64::total_cmp);
        let m = EpdcModel::new(1.0, p).unwrap();
        let p0 = m.p()[0];
        let mut prev = f64::NEG_INFINITY;
        for &mu in &grid {
            let r = click_probability(&m, mu).unwrap();
            if r < prev || r < p0 || r > 1.0 {
                violations += 1;
            }
            prev = r;
        }
    }
    outcome(violations == 0, format!("{violations} violations over 1000 models x 200 points"))
}

fn run_cli(args: &[&str]) -> i32 {
    epdc::cli::main_with_args(std::iter::once("epdc").chain(args.iter().copied()))
}

fn pipeline(dir: &Path, scenario: &Path, threads: &str, tag: usize) -> Option<Vec<u8>> {
    let csv = dir.join(format!("data{tag}.csv"));
    let out = dir.join(format!("report{tag}.json"));
    let (s, c, o) = (scenario.to_str()?, csv.to_str()?, out.to_str()?);
    if run_cli(&["--threads", threads, "--seed", "5", "synth", s, "-o", c]) != 0 {
        return None;
    }
    if run_cli(&["--threads", threads, "--seed", "5", "select", c, "-o", o]) != 0 {
        return None;
    }
    let mut bytes = fs::read(&csv).ok()?;
    bytes.extend(fs::read(&out).ok()?);
    bytes.extend(fs::read(dir.join(format!("report{tag}.I17uA.curve.tsv"))).ok()?);
    Some(bytes)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    let file = ScenarioFile::new(vec![BiasScenario {
        bias_current_ua: 17.0,
        scenario: SyntheticScenario { probe_grid: power_grid(), ..SyntheticScenario::log_spaced(two_photon_truth(), 1.0, 2.0, 0, TRIALS, 0) },
    }]);
    fs::write(&scenario, file.to_json()).unwrap();
    let runs: Vec<Option<Vec<u8>>> =
        ["1", "4", "1", "4", "1", "4"].iter().enumerate().map(|(k, t)| pipeline(dir.path(), &scenario, t, k)).collect();
    let ok = runs[0].is_some() && runs.windows(2).all(|w| w[0] == w[1]);
    outcome(ok, format!("{} runs over threads {{1, 4}}", runs.len()))
}

fn sweep_reconstruction() -> Outcome {
    let data = designed_sweep(&designed_currents(), 1);
    let result = match analyze_sweep(&data, &SelectionConfig::default(), &FitConfig::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let b = regime_boundaries(&result, &SweepConfig::default()).unwrap_or_default();
    let ok = b.len() == 2 && (b[0] - 15.5).abs() <= 0.2 + 1e-9 && (b[1] - 18.5).abs() <= 0.2 + 1e-9;
    outcome(ok, format!("boundaries {b:?} uA, expected [15.5, 18.5]"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 low-rate stability", low_rate_stability),
        ("3 round-trip recovery", round_trip_recovery),
        ("4 ladder rejection", ladder_rejection),
        ("5 crossover arithmetic", crossover),
        ("6 photon conversion", photon_conversion),
        ("7 monotonicity", monotonicity),
        ("8 determinism", determinism),
        ("9 sweep reconstruction", sweep_reconstruction),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
