//! Coherent-state click probabilities for lossy threshold-type detectors.
//!
//! A detector is described by a linear loss `eta` and click probabilities
//! `p_i` given `i` photons that survive the loss, with `p_j = 1` above the
//! truncation order. For a coherent probe of mean photon number `N` the
//! surviving photon number is Poisson with mean `mu = eta * N`, and the click
//! probability is
//!
//! ```text
//! R(N) = sum_{i <= i_max} p_i c_i(mu) + P[Poisson(mu) > i_max]
//! ```
//!
//! Every term above is nonnegative, so the sum never cancels; the tail is
//! taken from the regularized incomplete gamma function of integer order
//! rather than as one minus the head of the distribution.

pub(crate) mod special;

use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};

/// Lower bound on the loss parameter accepted by the fitter.
pub const ETA_FLOOR: f64 = 1e-12;

/// Tolerance on the total weight of a [`PhotonNumberDistribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Linear loss plus per-photon-number click probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct EpdcModel {
    eta: f64,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    eta: f64,
    p: Vec<f64>,
}

impl TryFrom<ModelRepr> for EpdcModel {
    type Error = EpdcError;

    fn try_from(repr: ModelRepr) -> Result<Self> {
        EpdcModel::new(repr.eta, repr.p)
    }
}

impl From<EpdcModel> for ModelRepr {
    fn from(model: EpdcModel) -> Self {
        ModelRepr { eta: model.eta, p: model.p }
    }
}

impl EpdcModel {
    /// Builds a model with truncation order `p.len() - 1`.
    pub fn new(eta: f64, p: Vec<f64>) -> Result<Self> {
        let mut violations = Vec::new();
        if !(eta > 0.0 && eta <= 1.0) {
            violations.push(format!("eta must lie in (0, 1], got {eta}"));
        }
        if p.is_empty() {
            violations.push("p must contain at least p_0 (length = i_max + 1)".to_string());
        }
        for (i, &pi) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&pi) {
                violations.push(format!("p_{i} must lie in [0, 1], got {pi}"));
            }
        }
        if violations.is_empty() {
            Ok(EpdcModel { eta, p })
        } else {
            Err(EpdcError::InvalidModel(violations))
        }
    }

    /// The ideal `n`-photon threshold detector: `p_i = 0` for `i < n`, 1 from `n` on.
    pub fn threshold(eta: f64, n: usize) -> Result<Self> {
        let mut p = vec![0.0; n.max(1)];
        if n == 0 {
            p[0] = 1.0;
        }
        Self::new(eta, p)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn i_max(&self) -> usize {
        self.p.len() - 1
    }

    /// Click probability given `i` effective photons, including the unit tail.
    pub fn p_at(&self, i: usize) -> f64 {
        self.p.get(i).copied().unwrap_or(1.0)
    }

    /// Number of free parameters: `eta` plus `p_0 ..= p_imax`.
    pub fn parameter_count(&self) -> usize {
        self.p.len() + 1
    }

    /// Parameter names in the canonical order `(eta, p_0, ..., p_imax)`.
    pub fn parameter_names(&self) -> Vec<String> {
        parameter_names(self.i_max())
    }

    pub(crate) fn from_parts_unchecked(eta: f64, p: Vec<f64>) -> Self {
        EpdcModel { eta, p }
    }
}

pub(crate) fn parameter_names(i_max: usize) -> Vec<String> {
    std::iter::once("eta".to_string())
        .chain((0..=i_max).map(|i| format!("p_{i}")))
        .collect()
}

/// Finite photon-number distribution (diagonal of a density matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberDistribution {
    weights: Vec<f64>,
}

impl PhotonNumberDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(EpdcError::InvalidDistribution("no weights".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
            return Err(EpdcError::InvalidDistribution(format!("weight {i} is {w}")));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(EpdcError::InvalidDistribution(format!(
                "weights sum to {total:.17}, not 1 within {NORMALIZATION_TOLERANCE:e}"
            )));
        }
        Ok(PhotonNumberDistribution { weights })
    }

    /// Pure `n`-photon Fock state.
    pub fn fock(n: usize) -> Self {
        let mut weights = vec![0.0; n + 1];
        weights[n] = 1.0;
        PhotonNumberDistribution { weights }
    }

    /// Poisson distribution of the given mean, truncated once the retained
    /// mass reaches `1 - 1e-14`.
    pub fn poisson(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        let mut weights = Vec::new();
        let mut acc = Neumaier::default();
        let mut i = 0;
        while acc.total() < 1.0 - 1e-14 {
            let w = special::dpois_raw(i, mean);
            weights.push(w);
            acc.add(w);
            i += 1;
        }
        Ok(PhotonNumberDistribution { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_mean(mu: f64) -> Result<()> {
    if mu >= 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(EpdcError::Domain(format!("mean photon number must be finite and >= 0, got {mu}")))
    }
}

/// Weight `e^-mu mu^i / i!` of the `i`-photon component of a coherent state.
pub fn poisson_weight(i: usize, mu: f64) -> Result<f64> {
    check_mean(mu)?;
    Ok(special::dpois_raw(i, mu))
}

/// Upper Poisson tail `P[Poisson(mu) > k]`, i.e. the regularized lower
/// incomplete gamma function `P(k + 1, mu)`.
pub fn poisson_upper_tail(k: usize, mu: f64) -> Result<f64> {
    check_mean(mu)?;
    Ok(upper_tail(k, mu))
}

pub(crate) fn upper_tail(k: usize, mu: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    if mu < kf + 1.0 {
        // P(k+1, mu) = c_{k+1} (1 + mu/(k+2) + mu^2/((k+2)(k+3)) + ...)
        let mut term = special::dpois_raw(k + 1, mu);
        if term == 0.0 {
            return 0.0;
        }
        let mut sum = term;
        let mut j = kf + 2.0;
        loop {
            term *= mu / j;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            j += 1.0;
        }
        sum
    } else {
        // Q(k+1, mu) = sum_{j <= k} c_j is at most ~1/2 here, so 1 - Q is safe.
        let mut term = special::dpois_raw(k, mu);
        let mut head = term;
        for j in (1..=k).rev() {
            term *= j as f64 / mu;
            head += term;
            if term <= head * 1e-17 {
                break;
            }
        }
        1.0 - head
    }
}

/// Click probability for a coherent probe with `mean_photons` incident photons.
pub fn click_probability(model: &EpdcModel, mean_photons: f64) -> Result<f64> {
    check_mean(mean_photons)?;
    Ok(effective_response(model.p(), model.eta() * mean_photons))
}

/// Click probability as a function of the effective mean `mu = eta * N`.
pub(crate) fn effective_response(p: &[f64], mu: f64) -> f64 {
    if mu == 0.0 {
        return p[0];
    }
    response_from_terms(p, &PoissonTerms::new(p.len() - 1, mu))
}

fn response_from_terms(p: &[f64], terms: &PoissonTerms) -> f64 {
    let value = if p.windows(2).all(|w| w[0] <= w[1]) {
        // p_0 + sum_i (p_{i+1} - p_i) P[X > i]; nonnegative increments make
        // the result nondecreasing in mu term by term.
        let mut acc = p[0];
        for i in 0..p.len() {
            let next = p.get(i + 1).copied().unwrap_or(1.0);
            let step = next - p[i];
            if step > 0.0 {
                acc += step * terms.tail_above(i);
            }
        }
        acc
    } else {
        p.iter().zip(&terms.weights).map(|(pi, ci)| pi * ci).sum::<f64>() + terms.tail
    };
    value.min(1.0)
}

/// Poisson weights `c_0 .. c_m` and the tail above `m` at one `mu`.
pub(crate) struct PoissonTerms {
    pub weights: Vec<f64>,
    pub tail: f64,
}

impl PoissonTerms {
    pub fn new(m: usize, mu: f64) -> Self {
        let weights = (0..=m).map(|i| special::dpois_raw(i, mu)).collect();
        PoissonTerms { weights, tail: upper_tail(m, mu) }
    }

    /// `P[X > i]` for `i <= m`, accumulated downward from the tail so every
    /// step adds a nonnegative weight.
    pub fn tail_above(&self, i: usize) -> f64 {
        self.tail + self.weights[i + 1..].iter().sum::<f64>()
    }
}

/// Click probability and its gradient with respect to `(eta, p_0 ..= p_imax)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGradient {
    pub value: f64,
    /// `1 - value`, summed directly so it stays accurate near saturation.
    pub no_click: f64,
    pub d_eta: f64,
    pub d_p: Vec<f64>,
}

impl EpdcModel {
    /// Click probability at `mean_photons` together with its parameter gradient.
    ///
    /// `dR/dmu = sum_i c_i(mu) (p_{i+1} - p_i)` with `p_{imax+1} = 1`, and
    /// `dR/dp_i = c_i(mu)`.
    pub fn response_with_gradient(&self, mean_photons: f64) -> Result<ResponseGradient> {
        check_mean(mean_photons)?;
        Ok(response_with_gradient(self.eta, &self.p, mean_photons))
    }
}

pub(crate) fn response_with_gradient(eta: f64, p: &[f64], mean_photons: f64) -> ResponseGradient {
    let mu = eta * mean_photons;
    let terms = PoissonTerms::new(p.len() - 1, mu);
    let value = if mu == 0.0 { p[0] } else { response_from_terms(p, &terms) };
    let d_mu: f64 = terms
        .weights
        .iter()
        .enumerate()
        .map(|(i, ci)| ci * (p.get(i + 1).copied().unwrap_or(1.0) - p[i]))
        .sum();
    let no_click = no_click_from_terms(p, &terms);
    ResponseGradient { value, no_click, d_eta: d_mu * mean_photons, d_p: terms.weights }
}

/// No-click probability `sum_{i <= imax} (1 - p_i) c_i(mu)`.
pub(crate) fn no_click_from_terms(p: &[f64], terms: &PoissonTerms) -> f64 {
    p.iter().zip(&terms.weights).map(|(pi, ci)| (1.0 - pi) * ci).sum()
}

/// Click and no-click probabilities at effective mean `mu`.
pub(crate) fn response_pair(p: &[f64], mu: f64) -> (f64, f64) {
    if mu == 0.0 {
        return (p[0], 1.0 - p[0]);
    }
    let terms = PoissonTerms::new(p.len() - 1, mu);
    (response_from_terms(p, &terms), no_click_from_terms(p, &terms))
}

/// Click probability for an arbitrary (phase-insensitive) input state.
///
/// Each incident photon survives the loss independently with probability
/// `eta`, so the `n`-photon component reaches the nonlinear stage as a
/// binomial mixture before `p` is applied.
pub fn predict_response(model: &EpdcModel, dist: &PhotonNumberDistribution) -> Result<f64> {
    // Re-validate: the distribution may have been deserialized.
    let dist = PhotonNumberDistribution::new(dist.weights.clone())?;
    let eta = model.eta();
    let q = 1.0 - eta;
    let m = model.i_max();
    let mut acc = Neumaier::default();
    for (n, &w) in dist.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let head_len = n.min(m);
        let mut head_mass = 0.0;
        let mut clicks = 0.0;
        for k in 0..=head_len {
            let b = special::dbinom_raw(k, n, eta, q);
            head_mass += b;
            clicks += b * model.p_at(k);
        }
        if n > m {
            clicks += binomial_upper_tail(m, n, eta, q, head_mass);
        }
        acc.add(w * clicks);
    }
    Ok(acc.total().min(1.0))
}

/// `P[Binom(n, p) > m]` for `m < n`, given the head mass `P[Binom <= m]`.
fn binomial_upper_tail(m: usize, n: usize, p: f64, q: f64, head_mass: f64) -> f64 {
    if head_mass < 0.5 || q == 0.0 {
        return 1.0 - head_mass;
    }
    let mode = ((n as f64 + 1.0) * p).floor();
    let ratio = p / q;
    let mut term = special::dbinom_raw(m + 1, n, p, q);
    let mut sum = term;
    for k in (m + 1)..n {
        term *= (n - k) as f64 / (k + 1) as f64 * ratio;
        sum += term;
        if k as f64 > mode && term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    values.into_iter().for_each(|v| acc.add(v));
    acc.total()
}
