//! Structured JSON reports and plot-ready curve files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::{standard_errors, BoundFlag, CandidateFit, ClickStatistics, FitConfig};
use crate::io::dataset::write_text;
use crate::io::optics::OpticalConfig;
use crate::model_selection::{SelectionConfig, SelectionReport, Verdict};
use crate::photon_statistics::{click_probability, EpdcModel};
use crate::sweep_analysis::{regime_crossover, SweepConfig, SweepPoint, SweepRow};
use crate::synthetic_bench::log_grid;

pub const REPORT_SCHEMA: &str = "epdc.report/1";

/// Points on the smooth model curve written next to each report.
pub const CURVE_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub optics: OpticalConfig,
    pub fit: FitConfig,
    pub selection: Option<SelectionConfig>,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub value: f64,
    pub error: Option<f64>,
    pub bound: BoundFlag,
}

/// Effective and incident photon numbers where adjacent orders trade dominance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub lower_order: usize,
    pub upper_order: usize,
    pub effective_mean_photons: f64,
    pub mean_photons: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: EpdcModel,
    pub i_max: usize,
    pub parameters: Vec<ParameterEstimate>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub degrees_of_freedom: usize,
    pub crossovers: Vec<Crossover>,
}

impl ModelSummary {
    pub fn from_fit(fit: &CandidateFit) -> Self {
        let errors = standard_errors(fit).ok();
        let values = std::iter::once(fit.model.eta()).chain(fit.model.p().iter().copied());
        let parameters = fit
            .model
            .parameter_names()
            .into_iter()
            .zip(values)
            .enumerate()
            .map(|(k, (name, value))| ParameterEstimate {
                name,
                value,
                error: errors.as_ref().map(|e| e[k]),
                bound: fit.bounds[k],
            })
            .collect();
        let crossovers = (0..fit.i_max())
            .filter_map(|i| {
                let mu = regime_crossover(&fit.model, i, i + 1).ok()?;
                Some(Crossover {
                    lower_order: i,
                    upper_order: i + 1,
                    effective_mean_photons: mu,
                    mean_photons: mu / fit.model.eta(),
                })
            })
            .collect();
        ModelSummary {
            model: fit.model.clone(),
            i_max: fit.i_max(),
            parameters,
            chi2: fit.chi2,
            chi2_reduced: fit.chi2_reduced,
            degrees_of_freedom: fit.degrees_of_freedom(),
            crossovers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub i_max: usize,
    pub chi2: Option<f64>,
    pub chi2_reduced: Option<f64>,
    pub converged: bool,
    pub verdict: Verdict,
}

pub fn ladder(report: &SelectionReport) -> Vec<LadderEntry> {
    report
        .rule_trace
        .iter()
        .map(|t| {
            let fit = report.candidate(t.i_max);
            LadderEntry {
                i_max: t.i_max,
                chi2: fit.map(|f| f.chi2),
                chi2_reduced: t.chi2_reduced,
                converged: fit.is_some_and(|f| f.diagnostics.converged),
                verdict: t.verdict,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Fit {
        bias_current_ua: Option<f64>,
        summary: ModelSummary,
        fit: CandidateFit,
    },
    Selection {
        bias_current_ua: Option<f64>,
        summary: Option<ModelSummary>,
        ladder: Vec<LadderEntry>,
        selection: SelectionReport,
    },
    Sweep {
        table: Vec<SweepRow>,
        boundaries: Vec<f64>,
        points: Vec<SweepPoint>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub settings: Settings,
    pub result: ReportBody,
}

impl Report {
    pub fn new(settings: Settings, result: ReportBody) -> Self {
        Report { schema: REPORT_SCHEMA.to_string(), settings, result }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::EpdcError::Validation(format!("report: {e}")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let summary_text = |out: &mut String, s: &ModelSummary| {
            writeln!(out, "selected i_max = {}  chi2 = {:.6e}  chi2_red = {:.6e}  dof = {}", s.i_max, s.chi2, s.chi2_reduced, s.degrees_of_freedom).ok();
            for p in &s.parameters {
                let err = p.error.map_or("n/a".to_string(), |e| format!("{e:.3e}"));
                writeln!(out, "  {:<6} {:>14.6e} +- {:<10} {:?}", p.name, p.value, err, p.bound).ok();
            }
            for c in &s.crossovers {
                writeln!(out, "  crossover {}/{}: mu = {:.6}  N = {:.6e}", c.lower_order, c.upper_order, c.effective_mean_photons, c.mean_photons).ok();
            }
        };
        writeln!(out, "# {}", self.schema).ok();
        match &self.result {
            ReportBody::Fit { bias_current_ua, summary, .. } => {
                if let Some(b) = bias_current_ua {
                    writeln!(out, "bias current: {b} uA").ok();
                }
                summary_text(&mut out, summary);
            }
            ReportBody::Selection { bias_current_ua, summary, ladder, .. } => {
                if let Some(b) = bias_current_ua {
                    writeln!(out, "bias current: {b} uA").ok();
                }
                writeln!(out, "ladder:").ok();
                for l in ladder {
                    let chi = l.chi2_reduced.map_or("-".to_string(), |c| format!("{c:.4e}"));
                    writeln!(out, "  i_max = {}  chi2_red = {:<12} {:?}", l.i_max, chi, l.verdict).ok();
                }
                match summary {
                    Some(s) => summary_text(&mut out, s),
                    None => {
                        writeln!(out, "no candidate selected").ok();
                    }
                }
            }
            ReportBody::Sweep { table, boundaries, .. } => {
                writeln!(out, "bias_uA  i_max  eta  p_0..").ok();
                for row in table {
                    let eta = row.eta.map_or("-".to_string(), |e| format!("{:.4e}", e.value));
                    let p: Vec<String> = row.p.iter().map(|e| format!("{:.4}", e.value)).collect();
                    let order = row.selected_i_max.map_or("-".to_string(), |i| i.to_string());
                    writeln!(out, "{:>7}  {:>5}  {}  {}", row.bias_current_ua, order, eta, p.join(" ")).ok();
                }
                writeln!(out, "regime boundaries (uA): {boundaries:?}").ok();
            }
        }
        out
    }
}

/// Measured points and model curve for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    /// `(N, R, sigma, model R)` per measured point.
    pub points: Vec<[f64; 4]>,
    /// `(N, model R)` on a log grid spanning the measured range.
    pub curve: Vec<[f64; 2]>,
}

impl CurveSeries {
    pub fn new(label: impl Into<String>, data: &[ClickStatistics], model: &EpdcModel) -> Result<Self> {
        let points = data
            .iter()
            .map(|d| Ok([d.mean_photons(), d.rate(), d.sigma(), click_probability(model, d.mean_photons())?]))
            .collect::<Result<Vec<_>>>()?;
        let positive = data.iter().map(|d| d.mean_photons()).filter(|n| *n > 0.0);
        let (lo, hi) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), n| (lo.min(n), hi.max(n)));
        let curve = if lo.is_finite() {
            log_grid(lo, hi.max(lo), CURVE_POINTS)
                .into_iter()
                .map(|n| Ok([n, click_probability(model, n)?]))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(CurveSeries { label: label.into(), points, curve })
    }

    pub fn points_text(&self) -> String {
        let mut s = String::from("# mean_photons\trate\tsigma\tmodel_rate\n");
        for [n, r, sg, m] in &self.points {
            writeln!(s, "{n:?}\t{r:?}\t{sg:?}\t{m:?}").ok();
        }
        s
    }

    pub fn curve_text(&self) -> String {
        let mut s = String::from("# mean_photons\tmodel_rate\n");
        for [n, m] in &self.curve {
            writeln!(s, "{n:?}\t{m:?}").ok();
        }
        s
    }
}

/// Parses a two-or-more-column text series written by [`CurveSeries`].
pub fn read_series(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split('\t').filter_map(|v| v.parse().ok()).collect())
        .collect()
}

fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    output.with_file_name(format!("{stem}.{suffix}"))
}

/// Writes the report to `output` and each series to
/// `<stem>.<label>.points.tsv` / `<stem>.<label>.curve.tsv` beside it.
/// Returns every path written.
pub fn emit_report(report: &Report, series: &[CurveSeries], output: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let body = match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Text => report.to_text(),
    };
    write_text(output, &body)?;
    let mut written = vec![output.to_path_buf()];
    for s in series {
        let points = sibling(output, &format!("{}.points.tsv", s.label));
        let curve = sibling(output, &format!("{}.curve.tsv", s.label));
        write_text(&points, &s.points_text())?;
        write_text(&curve, &s.curve_text())?;
        written.push(points);
        written.push(curve);
    }
    Ok(written)
}
