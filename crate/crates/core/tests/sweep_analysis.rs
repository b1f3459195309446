mod common;

use common::*;
use epdc::error::EpdcError;
use epdc::sweep_analysis::{SweepConfig, SweepData};
use epdc::{analyze_sweep, regime_boundaries, regime_crossover, BiasCurrent, EpdcModel, FitConfig};
use epdc::SelectionConfig;
use std::sync::OnceLock;

fn designed() -> &'static (SweepData, epdc::SweepResult) {
    static CELL: OnceLock<(SweepData, epdc::SweepResult)> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = designed_sweep(&designed_currents(), 1);
        let result = analyze_sweep(&data, &SelectionConfig::default(), &FitConfig::default()).unwrap();
        (data, result)
    })
}

#[test]
fn designed_sweep_has_two_boundaries() {
    let (_, result) = designed();
    let b = regime_boundaries(result, &SweepConfig::default()).unwrap();
    assert_eq!(b.len(), 2, "{b:?}");
    assert!((b[0] - 15.5).abs() <= 0.2 + 1e-9 && (b[1] - 18.5).abs() <= 0.2 + 1e-9, "{b:?}");
    assert!(((b[1] - b[0]) - 3.0).abs() <= 0.2 + 1e-9, "{b:?}");
}

#[test]
fn table_shape_and_order() {
    let (_, result) = designed();
    let currents: Vec<f64> = result.points.iter().map(|p| p.bias_current_ua).collect();
    assert_eq!(currents, designed_currents());
    assert!(result.max_i_max >= 3);
    for row in &result.table {
        let sel = row.selected_i_max.unwrap();
        assert_eq!(row.p.len(), result.max_i_max + 1);
        for e in &row.p[sel + 1..] {
            assert_eq!(e.value, 1.0);
        }
    }
}

#[test]
fn eta_is_bias_independent() {
    let (_, result) = designed();
    for row in &result.table {
        let eta = row.eta.unwrap();
        let se = eta.error.unwrap();
        assert!((eta.value - 1.2e-4).abs() <= 3.0 * se, "{}: {} +- {}", row.bias_current_ua, eta.value, se);
    }
}

#[test]
fn selected_order_nonincreasing_in_bias() {
    let (_, result) = designed();
    let orders: Vec<usize> = result.table.iter().map(|r| r.selected_i_max.unwrap()).collect();
    assert!(orders.windows(2).all(|w| w[1] <= w[0]), "{orders:?}");
}

#[test]
fn permuted_input_gives_identical_reports() {
    let currents = [18.0, 14.0, 16.0, 19.0];
    let forward = designed_sweep(&currents, 5);
    let mut permuted = SweepData::new();
    for (k, v) in forward.iter().rev() {
        permuted.insert(*k, v.clone());
    }
    let a = analyze_sweep(&forward, &SelectionConfig::default(), &FitConfig::default()).unwrap();
    let b = analyze_sweep(&permuted, &SelectionConfig::default(), &FitConfig::default()).unwrap();
    assert_eq!(a, b);
    // Each current's report matches a standalone analysis.
    let alone: SweepData = forward.iter().filter(|(k, _)| k.0 == 16.0).map(|(k, v)| (*k, v.clone())).collect();
    let c = analyze_sweep(&alone, &SelectionConfig::default(), &FitConfig::default()).unwrap();
    assert_eq!(c.points[0], a.points[1]);
}

#[test]
fn single_current_sweep() {
    let data = designed_sweep(&[17.0], 2);
    let result = analyze_sweep(&data, &SelectionConfig::default(), &FitConfig::default()).unwrap();
    assert_eq!(result.points.len(), 1);
    assert_eq!(result.table[0].selected_i_max, Some(2));
    assert!(matches!(regime_boundaries(&result, &SweepConfig::default()), Err(EpdcError::Arity(_))));
}

#[test]
fn single_regime_has_no_boundaries() {
    let data = designed_sweep(&[19.0, 19.2, 19.4, 19.6], 3);
    let result = analyze_sweep(&data, &SelectionConfig::default(), &FitConfig::default()).unwrap();
    assert!(regime_boundaries(&result, &SweepConfig::default()).unwrap().is_empty());
}

#[test]
fn failures_stay_per_point() {
    let mut data = designed_sweep(&[17.0, 19.0], 4);
    // Two points cannot support any candidate.
    data.insert(BiasCurrent(21.0), data[&BiasCurrent(19.0)][..2].to_vec());
    let result = analyze_sweep(&data, &SelectionConfig::default(), &FitConfig::default()).unwrap();
    assert!(result.points[2].error.is_some());
    assert_eq!(result.table[2].selected_i_max, None);
    assert!(result.table[..2].iter().all(|r| r.selected_i_max.is_some()));
}

#[test]
fn crossover_examples() {
    let m = EpdcModel::new(1.0, vec![0.0, 1.0, 1.0]).unwrap();
    assert!((regime_crossover(&m, 1, 2).unwrap() - 2.0).abs() < 1e-14);
    let m = EpdcModel::new(0.2, vec![0.4, 0.4]).unwrap();
    assert!((regime_crossover(&m, 0, 1).unwrap() - 1.0).abs() < 1e-14);
    let m = two_photon_truth();
    assert!((regime_crossover(&m, 1, 2).unwrap() - 0.3243).abs() < 1e-4);
    let m = EpdcModel::new(1.0, vec![0.0, 0.0, 0.5]).unwrap();
    assert!(matches!(regime_crossover(&m, 1, 2), Err(EpdcError::NoCrossover(_))));
}

#[test]
fn empty_sweep_is_rejected() {
    let r = analyze_sweep(&SweepData::new(), &SelectionConfig::default(), &FitConfig::default());
    assert!(matches!(r, Err(EpdcError::Arity(_))));
}
