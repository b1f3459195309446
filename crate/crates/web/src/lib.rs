//! Browser bindings for the `epdc` toolkit.
//!
//! Every export returns a JSON string; the `*_json` functions hold the logic
//! and run natively under `cargo test`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use epdc::io::report::{ladder, Crossover, LadderEntry, ModelSummary};
use epdc::model_selection::{select_model, SelectionConfig};
use epdc::synthetic_bench::{generate_dataset, log_grid, SyntheticScenario};
use epdc::{click_probability, poisson_weight, EpdcModel, FitConfig};

const MAX_CURVE_POINTS: usize = 2000;

#[derive(Serialize)]
struct Curve {
    mean_photons: Vec<f64>,
    click_probability: Vec<f64>,
    /// `p_i c_i(eta N)` per order, then the saturated remainder.
    contributions: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Measured {
    mean_photons: f64,
    rate: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct Selection {
    data: Vec<Measured>,
    ladder: Vec<LadderEntry>,
    threshold: Option<f64>,
    selected: Option<ModelSummary>,
    fitted: Option<Curve>,
}

fn model(eta: f64, p: Vec<f64>) -> Result<EpdcModel, String> {
    EpdcModel::new(eta, p).map_err(|e| e.to_string())
}

fn grid(n_min: f64, n_max: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(n_min > 0.0 && n_max > n_min && n_max.is_finite()) {
        return Err(format!("need 0 < n_min < n_max, got {n_min} and {n_max}"));
    }
    if !(2..=MAX_CURVE_POINTS).contains(&points) {
        return Err(format!("points must be between 2 and {MAX_CURVE_POINTS}"));
    }
    Ok(log_grid(n_min, n_max, points))
}

fn curve(model: &EpdcModel, grid: Vec<f64>) -> Result<Curve, String> {
    let k = model.i_max();
    let mut contributions = vec![Vec::with_capacity(grid.len()); k + 2];
    let mut r = Vec::with_capacity(grid.len());
    for &n in &grid {
        let mu = model.eta() * n;
        let mut below = 0.0;
        for (i, series) in contributions.iter_mut().take(k + 1).enumerate() {
            let c = poisson_weight(i, mu).map_err(|e| e.to_string())?;
            below += c;
            series.push(model.p_at(i) * c);
        }
        contributions[k + 1].push((1.0 - below).max(0.0));
        r.push(click_probability(model, n).map_err(|e| e.to_string())?);
    }
    Ok(Curve { mean_photons: grid, click_probability: r, contributions })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn response_curve_json(eta: f64, p: Vec<f64>, n_min: f64, n_max: f64, points: usize) -> Result<String, String> {
    let m = model(eta, p)?;
    to_json(&curve(&m, grid(n_min, n_max, points)?)?)
}

pub fn crossovers_json(eta: f64, p: Vec<f64>) -> Result<String, String> {
    let m = model(eta, p)?;
    let mut out = Vec::new();
    for i in 0..m.i_max() {
        for j in i + 1..=m.i_max() {
            if let Ok(mu) = epdc::regime_crossover(&m, i, j) {
                out.push(Crossover { lower_order: i, upper_order: j, effective_mean_photons: mu, mean_photons: mu / eta });
            }
        }
    }
    to_json(&out)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_and_select_json(
    eta: f64,
    p: Vec<f64>,
    n_min: f64,
    n_max: f64,
    points: usize,
    trials: u64,
    seed: u64,
    i_max_max: usize,
) -> Result<String, String> {
    let truth = model(eta, p)?;
    let scenario = SyntheticScenario { probe_grid: grid(n_min, n_max, points)?, ..SyntheticScenario::log_spaced(truth, n_min, n_max, 0, trials, seed) };
    let data = generate_dataset(&scenario).map_err(|e| e.to_string())?;
    let selection = SelectionConfig { i_max_max, ..SelectionConfig::default() };
    let fit = FitConfig { seed, ..FitConfig::default() };
    let report = match select_model(&data, selection.i_max_range(), &selection, &fit) {
        Ok(r) => r,
        Err(epdc::error::EpdcError::SelectionFailure { report }) => *report,
        Err(e) => return Err(e.to_string()),
    };
    let selected = report.selected();
    let fitted = match selected {
        Some(f) => Some(curve(&f.model, grid(n_min, n_max, 200)?)?),
        None => None,
    };
    to_json(&Selection {
        data: data.iter().map(|d| Measured { mean_photons: d.mean_photons(), rate: d.rate(), sigma: d.sigma() }).collect(),
        ladder: ladder(&report),
        threshold: report.threshold,
        selected: selected.map(ModelSummary::from_fit),
        fitted,
    })
}

/// Click probability and per-order contributions on a log grid of mean photon numbers.
#[wasm_bindgen]
pub fn response_curve(eta: f64, p: Vec<f64>, n_min: f64, n_max: f64, points: usize) -> Result<String, JsValue> {
    response_curve_json(eta, p, n_min, n_max, points).map_err(|e| JsValue::from_str(&e))
}

/// Mean photon numbers where adjacent click orders contribute equally.
#[wasm_bindgen]
pub fn crossovers(eta: f64, p: Vec<f64>) -> Result<String, JsValue> {
    crossovers_json(eta, p).map_err(|e| JsValue::from_str(&e))
}

/// Simulates a power scan of the given detector and runs model selection on it.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_and_select(
    eta: f64,
    p: Vec<f64>,
    n_min: f64,
    n_max: f64,
    points: usize,
    trials: f64,
    seed: f64,
    i_max_max: usize,
) -> Result<String, JsValue> {
    if !((1.0..=1e12).contains(&trials) && seed >= 0.0) {
        return Err(JsValue::from_str("trials must be in [1, 1e12] and seed non-negative"));
    }
    simulate_and_select_json(eta, p, n_min, n_max, points, trials as u64, seed as u64, i_max_max)
        .map_err(|e| JsValue::from_str(&e))
}
