#![allow(dead_code)]

use epdc::io::optics::{power_to_mean_photons, OpticalConfig};
use epdc::synthetic_bench::{generate_dataset, log_grid, SyntheticScenario};
use epdc::{click_probability, ClickStatistics, EpdcModel, WeightScheme};

pub const TRIALS: u64 = 10_000_000;

pub fn two_photon_truth() -> EpdcModel {
    EpdcModel::new(1.2e-4, vec![1e-6, 0.06, 0.37]).unwrap()
}

/// 25 mean photon numbers spanning 20 pW to 5 uW at the default optics.
pub fn power_grid() -> Vec<f64> {
    let cfg = OpticalConfig::default();
    let lo = power_to_mean_photons(20e-12, &cfg).unwrap();
    let hi = power_to_mean_photons(5e-6, &cfg).unwrap();
    log_grid(lo, hi, 25)
}

/// Rates quantized at 1e-15, far below any tolerance used with them.
pub fn noiseless(model: &EpdcModel, grid: &[f64]) -> Vec<ClickStatistics> {
    const TRIALS: u64 = 1_000_000_000_000_000;
    grid.iter()
        .map(|&n| {
            let r = click_probability(model, n).unwrap();
            let clicks = (r * TRIALS as f64).round() as u64;
            ClickStatistics::new(n, clicks, TRIALS, WeightScheme::Poisson).unwrap()
        })
        .collect()
}

pub fn sampled(model: &EpdcModel, grid: &[f64], trials: u64, seed: u64) -> Vec<ClickStatistics> {
    let scenario = SyntheticScenario {
        probe_grid: grid.to_vec(),
        ..SyntheticScenario::log_spaced(model.clone(), 1.0, 2.0, 0, trials, seed)
    };
    generate_dataset(&scenario).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Ground truth of the designed sweep: three-photon below 15.5 uA,
/// two-photon up to 18.5 uA, single-photon above.
pub fn designed_truth(bias_ua: f64) -> EpdcModel {
    let p = if bias_ua < 15.5 {
        vec![1e-6, 1e-5, 2e-3, 0.15]
    } else if bias_ua < 18.5 {
        vec![1e-6, 1e-3, 0.3]
    } else {
        vec![1e-6, 0.06, 0.37]
    };
    EpdcModel::new(1.2e-4, p).unwrap()
}

/// Currents 13.0, 13.2, ..., 18.8 uA.
pub fn designed_currents() -> Vec<f64> {
    (0..30).map(|k| (130.0 + 2.0 * k as f64) / 10.0).collect()
}

pub fn designed_sweep(currents: &[f64], seed: u64) -> epdc::sweep_analysis::SweepData {
    let grid = power_grid();
    currents
        .iter()
        .enumerate()
        .map(|(k, &b)| (epdc::BiasCurrent(b), sampled(&designed_truth(b), &grid, TRIALS, seed * 1000 + k as u64)))
        .collect()
}
