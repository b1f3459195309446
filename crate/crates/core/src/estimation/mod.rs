//! Weighted least-squares (or binomial maximum-likelihood) fitting of an
//! [`EpdcModel`] of fixed truncation order to measured click statistics.

mod halton;
pub(crate) mod solver;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};
use crate::photon_statistics::{parameter_names, response_pair, response_with_gradient, special, EpdcModel, ResponseGradient, ETA_FLOOR};
pub use solver::Termination;
use solver::{Residuals, SolverSettings};

/// How the standard error of an observed click rate is derived from counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `sqrt(max(clicks, 1)) / trials`.
    #[default]
    Poisson,
    /// `sqrt(R (1 - R) / trials + 1 / trials^2)`.
    Binomial,
}

impl WeightScheme {
    pub fn sigma(self, clicks: u64, trials: u64) -> f64 {
        let n = trials as f64;
        match self {
            WeightScheme::Poisson => (clicks.max(1) as f64).sqrt() / n,
            WeightScheme::Binomial => {
                let r = clicks as f64 / n;
                (r * (1.0 - r) / n + 1.0 / (n * n)).sqrt()
            }
        }
    }
}

/// Click counts for one coherent probe at one bias current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickStatistics {
    mean_photons: f64,
    clicks: u64,
    trials: u64,
    rate: f64,
    sigma: f64,
}

impl ClickStatistics {
    pub fn new(mean_photons: f64, clicks: u64, trials: u64, weights: WeightScheme) -> Result<Self> {
        if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
            return Err(EpdcError::Validation(format!("mean photon number must be finite and >= 0, got {mean_photons}")));
        }
        if trials == 0 {
            return Err(EpdcError::Validation("trials must be positive".into()));
        }
        if clicks > trials {
            return Err(EpdcError::Validation(format!("clicks ({clicks}) exceed trials ({trials})")));
        }
        Ok(ClickStatistics {
            mean_photons,
            clicks,
            trials,
            rate: clicks as f64 / trials as f64,
            sigma: weights.sigma(clicks, trials),
        })
    }

    pub fn mean_photons(&self) -> f64 {
        self.mean_photons
    }

    pub fn clicks(&self) -> u64 {
        self.clicks
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same counts, standard error recomputed under another scheme.
    pub fn reweighted(&self, weights: WeightScheme) -> Self {
        ClickStatistics { sigma: weights.sigma(self.clicks, self.trials), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Minimize `sum ((R_k - model_k) / sigma_k)^2`.
    #[default]
    LeastSquares,
    /// Minimize the binomial deviance of clicks given trials.
    BinomialMl,
}

/// Coordinates the optimizer works in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    /// The box `eta in [1e-12, 1]`, `p_i in [0, 1]`, with steps projected
    /// onto it.
    #[default]
    Raw,
    /// Logit of every parameter (log-like for small eta), clamped to +-40.
    /// A parameter pushed near 0 or 1 sits where the sigmoid is flat and
    /// rarely comes back, so larger orders can stall in poor optima.
    Transformed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceScaling {
    /// `(J'J)^-1`, trusting the per-point sigmas as absolute.
    #[default]
    Absolute,
    /// `(J'J)^-1` scaled by the reduced chi-squared, for data with noise
    /// beyond counting statistics. Saturated points (no clicks missed)
    /// carry no information but still count as degrees of freedom, which
    /// biases this scaling low.
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub cost_tolerance: f64,
    /// Per start.
    pub max_iterations: usize,
    pub multi_starts: usize,
    /// Applied when click statistics are built from raw counts.
    pub weights: WeightScheme,
    pub estimator: Estimator,
    pub coordinates: Coordinates,
    pub covariance: CovarianceScaling,
    /// Hold `p_0` at zero instead of fitting it.
    pub pin_p0: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            cost_tolerance: 1e-15,
            max_iterations: 500,
            multi_starts: 8,
            weights: WeightScheme::Poisson,
            estimator: Estimator::LeastSquares,
            coordinates: Coordinates::Raw,
            covariance: CovarianceScaling::Absolute,
            pin_p0: false,
            seed: 0,
        }
    }
}

/// Parameters within this distance of a box edge are reported on the edge.
pub const BOUNDARY_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFlag {
    Interior,
    Lower,
    Upper,
    /// Held fixed by configuration.
    Pinned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    /// Index of the winning start.
    pub start: usize,
    pub starts_converged: usize,
    /// Largest cosine between a free gradient component and the residual.
    pub gradient_norm: f64,
}

/// One fitted truncation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub model: EpdcModel,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub n_points: usize,
    pub n_free: usize,
    /// Over `(eta, p_0, ..., p_imax)`; rows of pinned parameters are zero.
    pub covariance: Vec<Vec<f64>>,
    /// Parameters spanning a numerically null direction of the information matrix.
    pub unidentifiable: Vec<String>,
    pub bounds: Vec<BoundFlag>,
    pub diagnostics: FitDiagnostics,
}

impl CandidateFit {
    pub fn i_max(&self) -> usize {
        self.model.i_max()
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.n_points - self.n_free
    }
}

/// Square roots of the covariance diagonal, ordered `(eta, p_0 ..= p_imax)`.
pub fn standard_errors(fit: &CandidateFit) -> Result<Vec<f64>> {
    if !fit.unidentifiable.is_empty() {
        return Err(EpdcError::SingularCovariance { parameters: fit.unidentifiable.clone() });
    }
    if !fit.diagnostics.converged {
        return Err(EpdcError::Validation("standard errors requested for a non-converged fit".into()));
    }
    Ok((0..fit.covariance.len()).map(|i| fit.covariance[i][i].max(0.0).sqrt()).collect())
}

/// Objective value (chi-squared or deviance) of `model` on `data`.
pub fn objective(data: &[ClickStatistics], model: &EpdcModel, estimator: Estimator) -> f64 {
    data.iter()
        .map(|d| {
            let (click, no_click) = response_pair(model.p(), model.eta() * d.mean_photons);
            residual(d, ModelRate { click, no_click }, estimator).powi(2)
        })
        .sum()
}

/// Analytic gradient of [`objective`] with respect to `(eta, p_0 ..= p_imax)`.
pub fn objective_gradient(data: &[ClickStatistics], model: &EpdcModel, estimator: Estimator) -> Vec<f64> {
    let mut grad = vec![0.0; model.parameter_count()];
    for d in data {
        let g = response_with_gradient(model.eta(), model.p(), d.mean_photons);
        let w = 2.0 * half_objective_slope(d, ModelRate::from(&g), estimator);
        grad[0] += w * g.d_eta;
        for (slot, dp) in grad[1..].iter_mut().zip(&g.d_p) {
            *slot += w * dp;
        }
    }
    grad
}

/// Model click probability with its complement carried separately.
#[derive(Debug, Clone, Copy)]
struct ModelRate {
    click: f64,
    no_click: f64,
}

impl From<&ResponseGradient> for ModelRate {
    fn from(g: &ResponseGradient) -> Self {
        ModelRate { click: g.value, no_click: g.no_click }
    }
}

impl ModelRate {
    /// Both probabilities floored away from zero for the likelihood.
    fn clamped(self) -> (f64, f64) {
        (self.click.max(1e-300), self.no_click.max(1e-300))
    }
}

fn residual(d: &ClickStatistics, rate: ModelRate, estimator: Estimator) -> f64 {
    match estimator {
        Estimator::LeastSquares => (d.rate - rate.click) / d.sigma,
        Estimator::BinomialMl => {
            let (pi, qi) = rate.clamped();
            let n = d.trials as f64;
            let c = d.clicks as f64;
            let dev = 2.0 * (deviance_term(c, n * pi) + deviance_term(n - c, n * qi));
            dev.max(0.0).sqrt().copysign(d.rate - pi)
        }
    }
}

fn deviance_term(x: f64, expected: f64) -> f64 {
    if x == 0.0 {
        expected
    } else {
        special::bd0(x, expected)
    }
}

/// `rate - pi`, formed from the complements when `pi > 1/2`.
fn signed_difference(d: &ClickStatistics, pi: f64, qi: f64) -> f64 {
    if pi > 0.5 {
        qi - (d.trials - d.clicks) as f64 / d.trials as f64
    } else {
        d.rate - pi
    }
}

/// `d residual / d click probability`.
fn residual_slope(d: &ClickStatistics, rate: ModelRate, r: f64, estimator: Estimator) -> f64 {
    match estimator {
        Estimator::LeastSquares => -1.0 / d.sigma,
        Estimator::BinomialMl => {
            let (pi, qi) = rate.clamped();
            let n = d.trials as f64;
            let var = pi * qi;
            let limit = -(n / var).sqrt();
            let diff = signed_difference(d, pi, qi);
            if r == 0.0 || diff == 0.0 {
                return limit;
            }
            // d(r^2)/d pi = -2 n (rate - pi) / (pi q)
            let slope = -n * diff / (var * r);
            if slope.is_finite() { slope } else { limit }
        }
    }
}

/// `residual * d residual / d click probability`, finite even where the
/// residual vanishes.
fn half_objective_slope(d: &ClickStatistics, rate: ModelRate, estimator: Estimator) -> f64 {
    match estimator {
        Estimator::LeastSquares => -(d.rate - rate.click) / (d.sigma * d.sigma),
        Estimator::BinomialMl => {
            let (pi, qi) = rate.clamped();
            -(d.trials as f64) * signed_difference(d, pi, qi) / (pi * qi)
        }
    }
}

/// Weight turning `d click probability / d theta` into a row of the information Jacobian.
fn information_weight(d: &ClickStatistics, rate: ModelRate, estimator: Estimator) -> f64 {
    match estimator {
        Estimator::LeastSquares => 1.0 / d.sigma,
        Estimator::BinomialMl => {
            let (pi, qi) = rate.clamped();
            (d.trials as f64 / (pi * qi)).sqrt()
        }
    }
}

fn logit(v: f64) -> f64 {
    (v / (1.0 - v)).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const LOGIT_CLAMP: f64 = 40.0;

struct Problem<'a> {
    data: &'a [ClickStatistics],
    i_max: usize,
    pin_p0: bool,
    coordinates: Coordinates,
    estimator: Estimator,
}

impl Problem<'_> {
    fn first_free_p(&self) -> usize {
        usize::from(self.pin_p0)
    }

    fn dim(&self) -> usize {
        1 + self.i_max + 1 - self.first_free_p()
    }

    fn decode(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let map = |v: f64| match self.coordinates {
            Coordinates::Transformed => sigmoid(v),
            Coordinates::Raw => v,
        };
        let mut p = vec![0.0; self.i_max + 1];
        for (slot, v) in p[self.first_free_p()..].iter_mut().zip(&x[1..]) {
            *slot = map(*v);
        }
        (map(x[0]), p)
    }

    fn encode(&self, eta: f64, p: &[f64]) -> Vec<f64> {
        let map = |v: f64| match self.coordinates {
            Coordinates::Transformed => logit(v).clamp(-LOGIT_CLAMP, LOGIT_CLAMP),
            Coordinates::Raw => v,
        };
        std::iter::once(map(eta)).chain(p[self.first_free_p()..].iter().map(|v| map(*v))).collect()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        match self.coordinates {
            Coordinates::Transformed => {
                let mut lo = vec![-LOGIT_CLAMP; n];
                lo[0] = logit(ETA_FLOOR);
                (lo, vec![LOGIT_CLAMP; n])
            }
            Coordinates::Raw => {
                let mut lo = vec![0.0; n];
                lo[0] = ETA_FLOOR;
                (lo, vec![1.0; n])
            }
        }
    }

    /// `d theta / d x` for each coordinate.
    fn chain(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| match self.coordinates {
                Coordinates::Transformed => sigmoid(v) * sigmoid(-v),
                Coordinates::Raw => 1.0,
            })
            .collect()
    }
}

impl Residuals for Problem<'_> {
    fn evaluate(&self, x: &[f64], jacobian: bool) -> Option<(DVector<f64>, Option<DMatrix<f64>>)> {
        let (eta, p) = self.decode(x);
        let m = self.data.len();
        let mut r = DVector::zeros(m);
        let mut jac = jacobian.then(|| DMatrix::zeros(m, self.dim()));
        let chain = jacobian.then(|| self.chain(x));
        for (k, d) in self.data.iter().enumerate() {
            let g = response_with_gradient(eta, &p, d.mean_photons);
            let rate = ModelRate::from(&g);
            r[k] = residual(d, rate, self.estimator);
            if let (Some(jac), Some(chain)) = (jac.as_mut(), chain.as_ref()) {
                let slope = residual_slope(d, rate, r[k], self.estimator);
                jac[(k, 0)] = slope * g.d_eta * chain[0];
                for (col, i) in (self.first_free_p()..=self.i_max).enumerate() {
                    jac[(k, col + 1)] = slope * g.d_p[i] * chain[col + 1];
                }
            }
        }
        if r.iter().all(|v| v.is_finite()) {
            Some((r, jac))
        } else {
            None
        }
    }
}

/// Starting loss estimates: the small-N slope of `R` against `N`, and the
/// inverse of the mean photon number where the rate first reaches one half.
fn initial_eta_guesses(data: &[ClickStatistics]) -> (Option<f64>, f64) {
    let mut pts: Vec<(f64, f64)> =
        data.iter().filter(|d| d.mean_photons > 0.0).map(|d| (d.mean_photons, d.rate)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let low: Vec<(f64, f64)> = pts.iter().copied().filter(|(_, r)| *r < 0.1).collect();
    let low = &low[..low.len().div_ceil(2).max(2).min(low.len())];
    let slope = (low.len() >= 2)
        .then(|| {
            let n = low.len() as f64;
            let mx = low.iter().map(|p| p.0).sum::<f64>() / n;
            let my = low.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = low.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = low.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            sxy / sxx
        })
        .filter(|s| *s > 0.0 && s.is_finite())
        .map(|s| s.clamp(ETA_FLOOR, 1.0));

    let n_max = pts.last().map_or(1.0, |p| p.0);
    let half = pts
        .windows(2)
        .find(|w| w[1].1 >= 0.5 && w[0].1 < 0.5)
        .map(|w| {
            let t = (0.5 - w[0].1) / (w[1].1 - w[0].1);
            (w[0].0.ln() + t * (w[1].0.ln() - w[0].0.ln())).exp()
        })
        .or_else(|| pts.first().filter(|p| p.1 >= 0.5).map(|p| p.0))
        .unwrap_or(n_max);
    (slope, (1.0 / half).clamp(ETA_FLOOR, 1.0))
}

fn starting_points(data: &[ClickStatistics], i_max: usize, config: &FitConfig) -> Vec<(f64, Vec<f64>)> {
    let (slope, half) = initial_eta_guesses(data);
    let interior = |v: f64| v.clamp(1e-3, 1.0 - 1e-3);
    let ramp: Vec<f64> = (0..=i_max).map(|i| interior((i as f64 / (i_max as f64 + 1.0)).min(1.0))).collect();

    let mut starts = vec![(slope.unwrap_or(half), ramp.clone())];
    if config.multi_starts >= 2 {
        starts.push((half, ramp));
    }
    let remaining = config.multi_starts.saturating_sub(starts.len());
    if remaining > 0 {
        let a = slope.unwrap_or(half).min(half).log10() - 1.0;
        let b = slope.unwrap_or(half).max(half).log10() + 1.0;
        let (lo, hi) = (a.max(ETA_FLOOR.log10()), b.min(0.0));
        for u in halton::shifted_halton(remaining, i_max + 2, config.seed) {
            let eta = 10f64.powf(lo + u[0] * (hi - lo)).clamp(ETA_FLOOR, 1.0);
            let p = u[1..].iter().map(|v| 0.02 + 0.96 * v).collect();
            starts.push((eta, p));
        }
    }
    starts
}

fn validate_data(data: &[ClickStatistics], i_max: usize) -> Result<()> {
    if data.len() < i_max + 3 {
        return Err(EpdcError::Arity(format!(
            "truncation order {i_max} needs at least {} points, got {}",
            i_max + 3,
            data.len()
        )));
    }
    let first = data[0].rate;
    if data.iter().all(|d| d.rate == first) {
        return Err(EpdcError::Identifiability(format!("every observed click rate equals {first}")));
    }
    let positive = data.iter().map(|d| d.mean_photons).filter(|n| *n > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), n| (lo.min(n), hi.max(n)));
    // Negated so a NaN ratio is also rejected.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(hi / lo >= 100.0) {
        return Err(EpdcError::Identifiability(format!(
            "mean photon numbers span {lo:.3e}..{hi:.3e}, less than two decades"
        )));
    }
    Ok(())
}

/// Fits a model of truncation order `i_max` to `data`.
///
/// Every start in the deterministic multi-start set is run to termination;
/// the converged start with the smallest objective wins.
pub fn fit_candidate(data: &[ClickStatistics], i_max: usize, config: &FitConfig) -> Result<CandidateFit> {
    fit_candidate_from(data, i_max, config, &[])
}

/// [`fit_candidate`] with extra starting models, typically optima of
/// smaller orders. A model of lower order enters with `p_i = 1` above its
/// own `i_max`, which reproduces its response exactly, so the result is
/// never worse than any warm start.
pub fn fit_candidate_from(data: &[ClickStatistics], i_max: usize, config: &FitConfig, warm: &[EpdcModel]) -> Result<CandidateFit> {
    validate_data(data, i_max)?;
    if i_max + 2 > 16 {
        return Err(EpdcError::Validation(format!("truncation order {i_max} exceeds the supported maximum of 14")));
    }
    let problem = Problem { data, i_max, pin_p0: config.pin_p0, coordinates: config.coordinates, estimator: config.estimator };
    let (lower, upper) = problem.bounds();
    let settings = SolverSettings {
        gradient_tolerance: config.gradient_tolerance,
        step_tolerance: config.step_tolerance,
        cost_tolerance: config.cost_tolerance,
        max_iterations: config.max_iterations,
    };

    let mut starts = starting_points(data, i_max, config);
    for m in warm.iter().filter(|m| m.i_max() <= i_max) {
        let p = (0..=i_max).map(|i| m.p_at(i)).collect();
        starts.push((m.eta(), p));
    }
    let run = |(eta, p): &(f64, Vec<f64>)| solver::minimize(&problem, &problem.encode(*eta, p), &lower, &upper, settings);
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = {
        use rayon::prelude::*;
        starts.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = starts.iter().map(run).collect();

    let mut best: Option<(usize, &solver::SolverOutcome)> = None;
    let mut converged_starts = 0;
    for (index, outcome) in outcomes.iter().enumerate() {
        let Some(outcome) = outcome else { continue };
        let conv = outcome.termination.is_converged();
        converged_starts += usize::from(conv);
        let better = match &best {
            None => true,
            Some((_, b)) => match (conv, b.termination.is_converged()) {
                (true, false) => true,
                (false, true) => false,
                _ => outcome.cost < b.cost,
            },
        };
        if better {
            best = Some((index, outcome));
        }
    }
    let (start, outcome) = best.ok_or_else(|| EpdcError::Identifiability("no start could be evaluated".into()))?;

    let (eta, p) = problem.decode(&outcome.x);
    let fit = finish(data, eta, p, outcome, start, converged_starts, config)?;
    if fit.diagnostics.converged {
        Ok(fit)
    } else {
        Err(EpdcError::NonConvergence { starts: starts.len(), best: Box::new(fit) })
    }
}

fn snap(v: f64, lo: f64, hi: f64) -> (f64, BoundFlag) {
    if v - lo <= BOUNDARY_SNAP {
        (lo, BoundFlag::Lower)
    } else if hi - v <= BOUNDARY_SNAP {
        (hi, BoundFlag::Upper)
    } else {
        (v, BoundFlag::Interior)
    }
}

fn finish(
    data: &[ClickStatistics],
    eta: f64,
    p: Vec<f64>,
    outcome: &solver::SolverOutcome,
    start: usize,
    starts_converged: usize,
    config: &FitConfig,
) -> Result<CandidateFit> {
    let i_max = p.len() - 1;
    let mut bounds = Vec::with_capacity(i_max + 2);
    let (eta, flag) = snap(eta, ETA_FLOOR, 1.0);
    bounds.push(flag);
    let p: Vec<f64> = p
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if i == 0 && config.pin_p0 {
                bounds.push(BoundFlag::Pinned);
                return 0.0;
            }
            let (v, flag) = snap(v, 0.0, 1.0);
            bounds.push(flag);
            v
        })
        .collect();
    let model = EpdcModel::from_parts_unchecked(eta, p);
    let chi2 = objective(data, &model, config.estimator);
    let n_free = i_max + 2 - usize::from(config.pin_p0);
    let chi2_reduced = chi2 / (data.len() - n_free) as f64;

    let (covariance, unidentifiable) = covariance(data, &model, &bounds, chi2_reduced, config);
    Ok(CandidateFit {
        model,
        chi2,
        chi2_reduced,
        n_points: data.len(),
        n_free,
        covariance,
        unidentifiable,
        bounds,
        diagnostics: FitDiagnostics {
            converged: outcome.termination.is_converged(),
            termination: outcome.termination,
            iterations: outcome.iterations,
            start,
            starts_converged,
            gradient_norm: outcome.gradient_norm,
        },
    })
}

/// Relative eigenvalue below which the scaled information matrix is singular.
const SINGULAR_EIGENVALUE: f64 = 1e-12;

fn covariance(
    data: &[ClickStatistics],
    model: &EpdcModel,
    bounds: &[BoundFlag],
    chi2_reduced: f64,
    config: &FitConfig,
) -> (Vec<Vec<f64>>, Vec<String>) {
    let n = model.parameter_count();
    let names = parameter_names(model.i_max());
    let free: Vec<usize> = (0..n).filter(|&j| bounds[j] != BoundFlag::Pinned).collect();
    let mut jac = DMatrix::<f64>::zeros(data.len(), free.len());
    for (k, d) in data.iter().enumerate() {
        let g = response_with_gradient(model.eta(), model.p(), d.mean_photons);
        let w = information_weight(d, ModelRate::from(&g), config.estimator);
        for (col, &j) in free.iter().enumerate() {
            jac[(k, col)] = w * if j == 0 { g.d_eta } else { g.d_p[j - 1] };
        }
    }
    let info = jac.transpose() * &jac;
    let m = free.len();
    let scale: Vec<f64> = (0..m).map(|j| info[(j, j)].sqrt()).collect();
    let mut unidentifiable: Vec<String> =
        (0..m).filter(|&j| scale[j].is_nan() || scale[j] <= 0.0).map(|j| names[free[j]].clone()).collect();

    let mut scaled = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if scale[i] > 0.0 && scale[j] > 0.0 {
                scaled[(i, j)] = info[(i, j)] / (scale[i] * scale[j]);
            }
        }
    }
    let eig = SymmetricEigen::new(scaled);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let factor = match config.covariance {
        CovarianceScaling::Reduced => chi2_reduced,
        CovarianceScaling::Absolute => 1.0,
    };
    let mut inv = DMatrix::<f64>::zeros(m, m);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if lambda > SINGULAR_EIGENVALUE * top {
            inv += (v * v.transpose()) / lambda;
        } else {
            for j in 0..m {
                if v[j].abs() > 0.1 && !unidentifiable.contains(&names[free[j]]) {
                    unidentifiable.push(names[free[j]].clone());
                }
            }
        }
    }
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..m {
        for j in 0..m {
            if scale[i] > 0.0 && scale[j] > 0.0 {
                let c = 0.5 * (inv[(i, j)] + inv[(j, i)]) / (scale[i] * scale[j]) * factor;
                cov[free[i]][free[j]] = c;
            }
        }
    }
    unidentifiable.sort_by_key(|name| names.iter().position(|n| n == name));
    (cov, unidentifiable)
}
