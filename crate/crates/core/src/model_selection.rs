//! The truncation-order ladder: fit every candidate `i_max` and keep the
//! smallest one that explains the data about as well as the best.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};
use crate::estimation::{fit_candidate_from, CandidateFit, ClickStatistics, FitConfig};
use crate::photon_statistics::EpdcModel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Smallest `i_max` with `chi2_red <= max(absolute_cap, relative_factor * min chi2_red)`.
    #[default]
    ChiSquared,
    /// Minimum Akaike information criterion `chi2 + 2k`.
    Aic,
    /// Minimum Bayesian information criterion `chi2 + k ln n`.
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub i_max_min: usize,
    pub i_max_max: usize,
    pub absolute_cap: f64,
    pub relative_factor: f64,
    pub pin_p0: bool,
    pub rule: SelectionRule,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { i_max_min: 1, i_max_max: 6, absolute_cap: 3.0, relative_factor: 1.2, pin_p0: false, rule: SelectionRule::ChiSquared }
    }
}

impl SelectionConfig {
    pub fn i_max_range(&self) -> RangeInclusive<usize> {
        self.i_max_min..=self.i_max_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Selected,
    Accepted,
    Rejected,
    /// The fit failed or did not converge; excluded from the comparison.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub i_max: usize,
    pub chi2_reduced: Option<f64>,
    pub verdict: Verdict,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Ordered by `i_max`; includes non-converged fits.
    pub candidates: Vec<CandidateFit>,
    /// `None` only inside a selection-failure error.
    pub selected_i_max: Option<usize>,
    pub rule: SelectionRule,
    /// Reduced chi-squared acceptance threshold (chi-squared rule only).
    pub threshold: Option<f64>,
    pub rule_trace: Vec<TraceEntry>,
}

impl SelectionReport {
    pub fn selected(&self) -> Option<&CandidateFit> {
        let i = self.selected_i_max?;
        self.candidates.iter().find(|c| c.i_max() == i)
    }

    pub fn candidate(&self, i_max: usize) -> Option<&CandidateFit> {
        self.candidates.iter().find(|c| c.i_max() == i_max)
    }
}

/// Fits the orders in increasing sequence, each warm-started from the
/// previous optimum so the optimal chi-squared cannot rise along the ladder.
fn fit_ladder(data: &[ClickStatistics], orders: &[usize], fit: &FitConfig) -> Vec<Result<CandidateFit>> {
    let mut warm: Option<EpdcModel> = None;
    let mut out = Vec::with_capacity(orders.len());
    for &i in orders {
        let result = fit_candidate_from(data, i, fit, warm.as_slice());
        match &result {
            Ok(c) => warm = Some(c.model.clone()),
            Err(EpdcError::NonConvergence { best, .. }) if warm.is_none() => warm = Some(best.model.clone()),
            Err(_) => {}
        }
        out.push(result);
    }
    out
}

/// Runs the candidate ladder over `i_max_range` and applies the selection rule.
pub fn select_model(
    data: &[ClickStatistics],
    i_max_range: RangeInclusive<usize>,
    config: &SelectionConfig,
    fit: &FitConfig,
) -> Result<SelectionReport> {
    if i_max_range.is_empty() {
        return Err(EpdcError::Validation(format!("empty truncation-order range {i_max_range:?}")));
    }
    let fit = FitConfig { pin_p0: fit.pin_p0 || config.pin_p0, ..fit.clone() };
    let orders: Vec<usize> = i_max_range.collect();
    let results = fit_ladder(data, &orders, &fit);

    let mut candidates = Vec::new();
    let mut trace = Vec::new();
    for (&i_max, result) in orders.iter().zip(results) {
        match result {
            Ok(c) => {
                trace.push(TraceEntry { i_max, chi2_reduced: Some(c.chi2_reduced), verdict: Verdict::Rejected, reason: String::new() });
                candidates.push(c);
            }
            Err(EpdcError::NonConvergence { best, .. }) => {
                trace.push(TraceEntry {
                    i_max,
                    chi2_reduced: Some(best.chi2_reduced),
                    verdict: Verdict::Excluded,
                    reason: format!("not converged ({:?})", best.diagnostics.termination),
                });
                candidates.push(*best);
            }
            Err(e) => {
                trace.push(TraceEntry { i_max, chi2_reduced: None, verdict: Verdict::Excluded, reason: e.to_string() });
            }
        }
    }

    let usable: Vec<&CandidateFit> = candidates.iter().filter(|c| c.diagnostics.converged).collect();
    let mut threshold = None;
    let selected = match config.rule {
        SelectionRule::ChiSquared => {
            let best = usable.iter().map(|c| c.chi2_reduced).fold(f64::INFINITY, f64::min);
            let limit = config.absolute_cap.max(config.relative_factor * best);
            threshold = Some(limit);
            for entry in trace.iter_mut().filter(|e| e.verdict != Verdict::Excluded) {
                let chi = entry.chi2_reduced.unwrap_or(f64::INFINITY);
                if chi <= limit {
                    entry.verdict = Verdict::Accepted;
                    entry.reason = format!("chi2_red {chi:.4e} <= threshold {limit:.4e}");
                } else {
                    entry.reason = format!("chi2_red {chi:.4e} > threshold {limit:.4e}");
                }
            }
            trace.iter().find(|e| e.verdict == Verdict::Accepted).map(|e| e.i_max)
        }
        SelectionRule::Aic | SelectionRule::Bic => {
            let score = |c: &CandidateFit| {
                let k = c.n_free as f64;
                match config.rule {
                    SelectionRule::Aic => c.chi2 + 2.0 * k,
                    _ => c.chi2 + k * (c.n_points as f64).ln(),
                }
            };
            let winner = usable
                .iter()
                .map(|c| (c.i_max(), score(c)))
                .fold(None::<(usize, f64)>, |acc, (i, s)| match acc {
                    Some((_, best)) if best <= s => acc,
                    _ => Some((i, s)),
                });
            for entry in trace.iter_mut().filter(|e| e.verdict != Verdict::Excluded) {
                let c = usable.iter().find(|c| c.i_max() == entry.i_max).expect("trace entry has a fit");
                entry.verdict = Verdict::Accepted;
                entry.reason = format!("{:?} score {:.6e}", config.rule, score(c));
            }
            winner.map(|(i, _)| i)
        }
    };

    if let Some(i) = selected {
        let entry = trace.iter_mut().find(|e| e.i_max == i).expect("selected order is traced");
        entry.verdict = Verdict::Selected;
        entry.reason = match config.rule {
            SelectionRule::ChiSquared => format!("smallest acceptable order; {}", entry.reason),
            _ => format!("lowest score; {}", entry.reason),
        };
    }
    let report = SelectionReport { candidates, selected_i_max: selected, rule: config.rule, threshold, rule_trace: trace };
    if selected.is_none() {
        return Err(EpdcError::SelectionFailure { report: Box::new(report) });
    }
    Ok(report)
}
