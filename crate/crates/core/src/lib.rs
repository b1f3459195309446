//! Characterization of click/no-click photon detectors with large linear loss.
//!
//! The detector response to a coherent probe of mean photon number `N` is
//! modelled by one loss parameter `eta` and the click probabilities `p_i`
//! given `i` photons that take part in the nonlinear detection step:
//!
//! ```text
//! R(N) = 1 - exp(-eta N) sum_i (1 - p_i) (eta N)^i / i!
//! ```
//!
//! with `p_j = 1` above a truncation order `i_max`. The crate provides
//!
//! - stable evaluation of that response ([`photon_statistics`]),
//! - box-constrained fitting at fixed `i_max` ([`estimation`]),
//! - the `i_max` ladder and parsimony rule ([`model_selection`]),
//! - analysis across a bias-current sweep ([`sweep_analysis`]),
//! - a seeded detector simulator and independent oracle ([`synthetic_bench`]),
//! - file formats, unit conversion and the `epdc` command line ([`io`]).

pub mod error;
pub mod estimation;
pub mod io;
pub mod model_selection;
pub mod photon_statistics;
pub mod sweep_analysis;
pub mod synthetic_bench;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{EpdcError, Result};
pub use estimation::{fit_candidate, fit_candidate_from, standard_errors, CandidateFit, ClickStatistics, FitConfig, WeightScheme};
pub use model_selection::{select_model, SelectionConfig, SelectionReport};
pub use photon_statistics::{
    click_probability, poisson_upper_tail, poisson_weight, predict_response, EpdcModel, PhotonNumberDistribution,
};
pub use sweep_analysis::{analyze_sweep, regime_boundaries, regime_crossover, BiasCurrent, SweepResult};
pub use synthetic_bench::{brute_force_click_probability, generate_dataset, SyntheticScenario};
