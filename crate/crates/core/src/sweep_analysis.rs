//! Model selection repeated across a bias-current sweep, the resulting
//! parameter table, and detection-regime diagnostics.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};
use crate::estimation::{standard_errors, ClickStatistics, FitConfig};
use crate::model_selection::{select_model, SelectionConfig, SelectionReport};
use crate::photon_statistics::{special::ln_factorial, EpdcModel};

/// Bias current in microamperes, totally ordered so it can key a map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiasCurrent(pub f64);

impl PartialEq for BiasCurrent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for BiasCurrent {}

impl PartialOrd for BiasCurrent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BiasCurrent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Click statistics grouped by bias current.
pub type SweepData = BTreeMap<BiasCurrent, Vec<ClickStatistics>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Minimum `p_i` for photon order `i` to count as the low-power response.
    pub dominance_threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { dominance_threshold: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bias_current_ua: f64,
    pub report: Option<SelectionReport>,
    /// Set when selection failed at this current.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// `None` when the covariance is singular.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bias_current_ua: f64,
    pub selected_i_max: Option<usize>,
    pub eta: Option<Estimate>,
    /// `p_0 ..= p_K` with `K` the largest selected order in the sweep;
    /// orders above this row's selection are exactly 1.
    pub p: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Sorted by bias current.
    pub points: Vec<SweepPoint>,
    pub table: Vec<SweepRow>,
    pub max_i_max: usize,
}

impl SweepResult {
    pub fn row(&self, bias_current_ua: f64) -> Option<&SweepRow> {
        self.table.iter().find(|r| r.bias_current_ua == bias_current_ua)
    }
}

fn analyze_point(current: f64, data: &[ClickStatistics], config: &SelectionConfig, fit: &FitConfig) -> SweepPoint {
    match select_model(data, config.i_max_range(), config, fit) {
        Ok(report) => SweepPoint { bias_current_ua: current, report: Some(report), error: None },
        Err(EpdcError::SelectionFailure { report }) => SweepPoint {
            bias_current_ua: current,
            report: Some(*report),
            error: Some("no candidate satisfied the selection rule".into()),
        },
        Err(e) => SweepPoint { bias_current_ua: current, report: None, error: Some(e.to_string()) },
    }
}

/// Runs model selection independently at every bias current.
pub fn analyze_sweep(datasets: &SweepData, config: &SelectionConfig, fit: &FitConfig) -> Result<SweepResult> {
    if datasets.is_empty() {
        return Err(EpdcError::Arity("sweep contains no bias currents".into()));
    }
    let entries: Vec<(f64, &Vec<ClickStatistics>)> = datasets.iter().map(|(k, v)| (k.0, v)).collect();
    #[cfg(feature = "parallel")]
    let points: Vec<SweepPoint> = {
        use rayon::prelude::*;
        entries.par_iter().map(|(i, d)| analyze_point(*i, d, config, fit)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<SweepPoint> = entries.iter().map(|(i, d)| analyze_point(*i, d, config, fit)).collect();

    let max_i_max = points
        .iter()
        .filter_map(|p| p.report.as_ref()?.selected_i_max)
        .max()
        .unwrap_or(0);
    let table = points.iter().map(|p| table_row(p, max_i_max)).collect();
    Ok(SweepResult { points, table, max_i_max })
}

fn table_row(point: &SweepPoint, orders: usize) -> SweepRow {
    let selected = point.report.as_ref().and_then(SelectionReport::selected);
    let Some(fit) = selected else {
        return SweepRow { bias_current_ua: point.bias_current_ua, selected_i_max: None, eta: None, p: Vec::new() };
    };
    let errors = standard_errors(fit).ok();
    let estimate = |k: usize, value: f64| Estimate { value, error: errors.as_ref().map(|e| e[k]) };
    let p = (0..=orders)
        .map(|i| match fit.model.p().get(i) {
            Some(&v) => estimate(i + 1, v),
            None => Estimate { value: 1.0, error: Some(0.0) },
        })
        .collect();
    SweepRow {
        bias_current_ua: point.bias_current_ua,
        selected_i_max: Some(fit.i_max()),
        eta: Some(estimate(0, fit.model.eta())),
        p,
    }
}

/// Effective mean photon number `mu` at which the `i`- and `j`-photon
/// contributions `p_i c_i(mu)` and `p_j c_j(mu)` are equal:
/// `mu = (p_i j! / (p_j i!))^(1 / (j - i))`.
///
/// Below this `mu` the `i`-photon term dominates the response. Comparing
/// `p_i` with `p_j` alone, without the factorials, underestimates the
/// crossover by the factor `(j!/i!)^(1/(j-i))` (a factor 2 for `i = 1, j = 2`).
pub fn regime_crossover(model: &EpdcModel, i: usize, j: usize) -> Result<f64> {
    if i >= j {
        return Err(EpdcError::Validation(format!("crossover needs i < j, got i = {i}, j = {j}")));
    }
    let (pi, pj) = (model.p_at(i), model.p_at(j));
    if pi <= 0.0 || pj <= 0.0 {
        return Err(EpdcError::NoCrossover(format!("p_{i} = {pi} and p_{j} = {pj} must both be positive")));
    }
    let log_mu = (pi.ln() - pj.ln() + ln_factorial(j) - ln_factorial(i)) / (j - i) as f64;
    Ok(log_mu.exp())
}

/// Smallest `i >= 1` whose click probability reaches `threshold`.
pub fn dominant_order(p: &[f64], threshold: f64) -> usize {
    (1..p.len()).find(|&i| p[i] >= threshold).unwrap_or(p.len().max(1))
}

/// Bias currents (midpoints between adjacent sweep points) where the
/// dominant low-power photon order changes.
pub fn regime_boundaries(sweep: &SweepResult, config: &SweepConfig) -> Result<Vec<f64>> {
    if sweep.table.len() < 3 {
        return Err(EpdcError::Arity(format!("regime boundaries need at least 3 sweep points, got {}", sweep.table.len())));
    }
    let orders: Vec<(f64, usize)> = sweep
        .table
        .iter()
        .filter(|row| row.selected_i_max.is_some())
        .map(|row| {
            let p: Vec<f64> = row.p.iter().map(|e| e.value).collect();
            (row.bias_current_ua, dominant_order(&p, config.dominance_threshold))
        })
        .collect();
    Ok(orders
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| 0.5 * (w[0].0 + w[1].0))
        .collect())
}
