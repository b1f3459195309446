//! Seeded detector simulator and an independent high-precision oracle for
//! the click probability.

pub mod extended;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};
use crate::estimation::{ClickStatistics, WeightScheme};
use crate::photon_statistics::{click_probability, EpdcModel};
use extended::DoubleDouble;

/// Ground truth plus the measurement plan used to synthesize a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub truth: EpdcModel,
    /// Mean photon numbers at the detector input, strictly increasing.
    pub probe_grid: Vec<f64>,
    pub trials_per_point: u64,
    pub seed: u64,
    #[serde(default)]
    pub weights: WeightScheme,
    /// Relative standard deviation of a multiplicative power error per point.
    #[serde(default)]
    pub power_jitter: f64,
}

impl SyntheticScenario {
    /// Scenario with `points` log-spaced probes between `n_min` and `n_max`.
    pub fn log_spaced(truth: EpdcModel, n_min: f64, n_max: f64, points: usize, trials_per_point: u64, seed: u64) -> Self {
        SyntheticScenario {
            truth,
            probe_grid: log_grid(n_min, n_max, points),
            trials_per_point,
            seed,
            weights: WeightScheme::default(),
            power_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probe_grid.is_empty() {
            return Err(EpdcError::Validation("probe grid is empty".into()));
        }
        if !self.probe_grid.iter().all(|n| *n > 0.0 && n.is_finite()) {
            return Err(EpdcError::Validation("probe grid values must be positive and finite".into()));
        }
        if self.probe_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EpdcError::Validation("probe grid must be strictly increasing".into()));
        }
        if self.trials_per_point == 0 {
            return Err(EpdcError::Validation("trials_per_point must be at least 1".into()));
        }
        if !(self.power_jitter >= 0.0 && self.power_jitter.is_finite()) {
            return Err(EpdcError::Validation(format!("power_jitter must be >= 0, got {}", self.power_jitter)));
        }
        Ok(())
    }
}

/// `points` values spaced evenly in `ln` between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points)
                .map(|k| match k {
                    0 => lo,
                    k if k == points - 1 => hi,
                    k => (a + (b - a) * k as f64 / (points - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

fn simulate_point(scenario: &SyntheticScenario, index: usize, nominal: f64) -> Result<ClickStatistics> {
    // One ChaCha stream per probe point keeps points independent of each
    // other and of evaluation order.
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(index as u64);
    let actual = if scenario.power_jitter > 0.0 {
        let z: f64 = StandardNormal.sample(&mut rng);
        (nominal * (1.0 + scenario.power_jitter * z)).max(0.0)
    } else {
        nominal
    };
    let prob = click_probability(&scenario.truth, actual)?;
    let clicks = Binomial::new(scenario.trials_per_point, prob)
        .map_err(|e| EpdcError::Validation(format!("binomial sampler: {e}")))?
        .sample(&mut rng);
    ClickStatistics::new(nominal, clicks, scenario.trials_per_point, scenario.weights)
}

/// Draws `clicks ~ Binomial(trials, R(N))` at every probe of the scenario.
pub fn generate_dataset(scenario: &SyntheticScenario) -> Result<Vec<ClickStatistics>> {
    scenario.validate()?;
    let indexed: Vec<(usize, f64)> = scenario.probe_grid.iter().copied().enumerate().collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        indexed.par_iter().map(|&(i, n)| simulate_point(scenario, i, n)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        indexed.iter().map(|&(i, n)| simulate_point(scenario, i, n)).collect()
    }
}

/// Poisson weights `c_0 ..= c_cutoff` at `mu` in double-double precision.
fn extended_poisson_weights(mu: f64, cutoff: usize) -> Vec<DoubleDouble> {
    let mut weights = vec![DoubleDouble::ZERO; cutoff + 1];
    if mu == 0.0 {
        weights[0] = DoubleDouble::ONE;
        return weights;
    }
    let mu_dd = DoubleDouble::from_f64(mu);
    if mu < 600.0 {
        let mut c = DoubleDouble::from_f64(-mu).exp();
        weights[0] = c;
        for (k, slot) in weights.iter_mut().enumerate().skip(1) {
            c = (c * mu_dd).div_f64(k as f64);
            *slot = c;
        }
    } else {
        // e^-mu underflows; anchor at the mode and recurse both ways.
        let mode = (mu.floor() as usize).min(cutoff);
        let mut ln_fact = DoubleDouble::ZERO;
        for k in 2..=mode {
            ln_fact = ln_fact + DoubleDouble::from_f64(k as f64).ln();
        }
        let ln_anchor = DoubleDouble::from_f64(-mu) + mu_dd.ln().scale(mode as f64) - ln_fact;
        let anchor = ln_anchor.exp();
        weights[mode] = anchor;
        let mut c = anchor;
        for k in (1..=mode).rev() {
            c = (c * DoubleDouble::from_f64(k as f64)).div_f64(mu);
            weights[k - 1] = c;
        }
        let mut c = anchor;
        for (k, slot) in weights.iter_mut().enumerate().skip(mode + 1) {
            c = (c * mu_dd).div_f64(k as f64);
            *slot = c;
        }
    }
    weights
}

/// Direct term-by-term summation of `sum_i p_i c_i(eta N)` (with `p_i = 1`
/// above `i_max`) up to `photon_cutoff`, accumulated in double-double.
///
/// Fails when the Poisson mass beyond the cutoff may exceed `1e-14`.
pub fn brute_force_click_probability(truth: &EpdcModel, mean_photons: f64, photon_cutoff: usize) -> Result<f64> {
    if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
        return Err(EpdcError::Domain(format!("mean photon number must be finite and >= 0, got {mean_photons}")));
    }
    let mu = truth.eta() * mean_photons;
    let weights = extended_poisson_weights(mu, photon_cutoff + 1);
    // Geometric bound on the neglected tail sum_{k > cutoff} c_k.
    let next = weights[photon_cutoff + 1].to_f64();
    let ratio = mu / (photon_cutoff as f64 + 2.0);
    let tail = if ratio < 1.0 { next / (1.0 - ratio) } else { f64::INFINITY };
    if tail > 1e-14 {
        return Err(EpdcError::TailMass { cutoff: photon_cutoff, tail });
    }
    let mut acc = DoubleDouble::ZERO;
    for (i, c) in weights[..=photon_cutoff].iter().enumerate() {
        acc = acc + *c * DoubleDouble::from_f64(truth.p_at(i));
    }
    Ok(acc.to_f64())
}

/// The one-minus-no-click form `1 - e^-mu sum_i (1 - p_i) mu^i / i!`,
/// evaluated in double-double so the subtraction is harmless.
pub fn extended_complement_click_probability(truth: &EpdcModel, mean_photons: f64) -> Result<f64> {
    let mu = truth.eta() * mean_photons;
    if !(0.0..600.0).contains(&mu) {
        return Err(EpdcError::Domain(format!("complement oracle needs 0 <= mu < 600, got {mu}")));
    }
    let weights = extended_poisson_weights(mu, truth.i_max());
    let mut no_click = DoubleDouble::ZERO;
    for (c, p) in weights.iter().zip(truth.p()) {
        no_click = no_click + *c * DoubleDouble::from_f64(1.0 - p);
    }
    Ok((DoubleDouble::ONE - no_click).to_f64())
}

/// Smallest cutoff whose geometric tail bound at `mu` is far below `1e-14`.
pub fn safe_photon_cutoff(mu: f64, i_max: usize) -> usize {
    let guess = mu + 12.0 * mu.sqrt() + 60.0;
    (guess.ceil() as usize).max(i_max + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(eta: f64, p: &[f64]) -> EpdcModel {
        EpdcModel::new(eta, p.to_vec()).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let m = model(0.4, &[0.3, 0.5]);
        assert_eq!(brute_force_click_probability(&m, 0.0, 10).unwrap(), 0.3);
        let two = model(1.0, &[0.0, 0.0, 1.0]);
        let r = brute_force_click_probability(&two, 1.0, 40).unwrap();
        assert!((r - 0.264_241_117_657_115_33).abs() < 1e-16);
        let r = extended_complement_click_probability(&two, 1.0).unwrap();
        assert!((r - 0.264_241_117_657_115_33).abs() < 1e-16);
    }

    #[test]
    fn oracle_rejects_short_cutoff() {
        let m = model(1.0, &[0.0, 1.0]);
        assert!(matches!(brute_force_click_probability(&m, 50.0, 20), Err(EpdcError::TailMass { .. })));
        assert!(brute_force_click_probability(&m, 50.0, safe_photon_cutoff(50.0, 1)).is_ok());
    }

    #[test]
    fn oracle_handles_underflowing_vacuum_weight() {
        let m = model(1.0, &[0.0, 0.2, 0.4]);
        let mu = 900.0;
        let r = brute_force_click_probability(&m, mu, safe_photon_cutoff(mu, 2)).unwrap();
        assert_eq!(r, 1.0);
        let w = extended_poisson_weights(mu, 1320);
        let total: f64 = w.iter().map(|c| c.to_f64()).sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn always_click_detector() {
        let s = SyntheticScenario::log_spaced(model(0.3, &[1.0]), 1.0, 1e3, 6, 1000, 5);
        for d in generate_dataset(&s).unwrap() {
            assert_eq!(d.clicks(), d.trials());
        }
    }

    #[test]
    fn seed_determinism() {
        let s = SyntheticScenario::log_spaced(model(1e-3, &[0.0, 0.3, 0.6]), 10.0, 1e5, 12, 100_000, 42);
        let a = generate_dataset(&s).unwrap();
        assert_eq!(a, generate_dataset(&s).unwrap());
        let other = SyntheticScenario { seed: 43, ..s };
        assert_ne!(a, generate_dataset(&other).unwrap());
    }

    #[test]
    fn single_photon_rate_matches_closed_form() {
        let s = SyntheticScenario {
            truth: model(1e-4, &[0.0, 1.0]),
            probe_grid: vec![1e4],
            trials_per_point: 1_000_000,
            seed: 9,
            weights: WeightScheme::Binomial,
            power_jitter: 0.0,
        };
        let d = &generate_dataset(&s).unwrap()[0];
        let expected = 1.0 - (-1f64).exp();
        let sd = (expected * (1.0 - expected) / 1e6).sqrt();
        assert!((d.rate() - expected).abs() < 5.0 * sd);
    }

    #[test]
    fn scenario_validation() {
        let mut s = SyntheticScenario::log_spaced(model(0.5, &[0.0]), 1.0, 10.0, 3, 10, 0);
        s.probe_grid = vec![1.0, 1.0];
        assert!(generate_dataset(&s).is_err());
        s.probe_grid = vec![0.0, 1.0];
        assert!(generate_dataset(&s).is_err());
        s.probe_grid = vec![1.0, 2.0];
        s.trials_per_point = 0;
        assert!(generate_dataset(&s).is_err());
    }

    #[test]
    fn power_jitter_changes_counts_but_not_nominal_grid() {
        let base = SyntheticScenario::log_spaced(model(1e-2, &[0.0, 0.5]), 1.0, 500.0, 10, 1_000_000, 3);
        let jittered = SyntheticScenario { power_jitter: 0.05, ..base.clone() };
        let a = generate_dataset(&base).unwrap();
        let b = generate_dataset(&jittered).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.mean_photons() == y.mean_photons()));
        assert_ne!(a, b);
    }
}
