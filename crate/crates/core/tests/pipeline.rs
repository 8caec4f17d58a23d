use std::f64::consts::TAU;

use antibunch::analysis::{
    fit_fringe, fit_fringe_points, fixed_period_visibility, schwarz_report, visibility, ViolationInput,
};
use antibunch::experiment::{classical_map, detected_map, ideal_map, scan_map, Figure, FIGURE_DWELL};
use antibunch::geometry::{default_geometry, load_config};
use antibunch::montecarlo::{
    expected_rates, figure_positions, poisson, ClassicalEnsembleSpec, EnsembleKind, RateModel, ScanMode, ScanPlan,
};
use antibunch::wave::{default_detector_grid, CorrelationMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn poisson_fringe_fit_coverage() {
    let period = 1.2285e-3;
    let x = figure_positions();
    let mut within_two_percent = 0;
    let mut covered = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| poisson(&mut rng, 20.0 + 240.0 * (1.0 - (TAU * v / period).cos())) as f64)
            .collect();
        let fit = fit_fringe_points(&x, &y, period).unwrap();
        within_two_percent += usize::from((fit.period - period).abs() <= 0.02 * period);
        covered += usize::from((fit.period - period).abs() <= 2.0 * fit.uncertainties.period);
    }
    assert_eq!(within_two_percent, 100);
    assert!(covered >= 95, "{covered}");
}

#[test]
fn accidental_rate_arithmetic() {
    let plan = ScanPlan::new(ScanMode::Scan1Fix2, 0.0, vec![0.0, 1e-4], 1.0, 0).unwrap();
    let rm = RateModel {
        peak_coincidence_rate: 0.0,
        singles_rate_1: 1e4,
        singles_rate_2: 1e4,
        accidental_window: 10e-9,
    };
    let map = CorrelationMap::from_fn(default_detector_grid(), |_, _| 1.0).unwrap();
    for r in expected_rates(&plan, &map, |_| 1.0, &rm).unwrap() {
        assert!((r.coincidence - 1.0).abs() < 1e-12);
    }
}

#[test]
fn joint_scan_shows_window_background() {
    let g = default_geometry();
    let map = detected_map(&g).unwrap();
    let noiseless = RateModel {
        accidental_window: 0.0,
        ..RateModel::default()
    };
    let plan = Figure::Fig6.plan(3, FIGURE_DWELL).unwrap();
    let scan = scan_map(&plan, &map, &g, &noiseless).unwrap();
    let fit = fit_fringe(&scan, &g).unwrap();
    assert!(fit.background > 0.0);
    assert!(fit.amplitude <= 3.0 * fit.uncertainties.amplitude, "{fit:?}");
}

#[test]
fn quantum_map_violates_control_does_not() {
    let g = default_geometry();
    let out = default_detector_grid();
    let anti = ideal_map(&g, &out).unwrap();
    assert!(schwarz_report(ViolationInput::Map(&anti), 3.0).unwrap().violated);
    let control = ideal_map(&g.with_waveplate_phase(0.0), &out).unwrap();
    assert!(!schwarz_report(ViolationInput::Map(&control), 3.0).unwrap().violated);
    let windowed = detected_map(&g).unwrap();
    assert!(schwarz_report(ViolationInput::Map(&windowed), 3.0).unwrap().violated);
}

#[test]
fn fig4_and_fig6_together_violate() {
    let g = default_geometry();
    let map = detected_map(&g).unwrap();
    let rm = RateModel::default();
    let scans = [
        scan_map(&Figure::Fig4.plan(1, FIGURE_DWELL).unwrap(), &map, &g, &rm).unwrap(),
        scan_map(&Figure::Fig6.plan(1, FIGURE_DWELL).unwrap(), &map, &g, &rm).unwrap(),
    ];
    let r = schwarz_report(
        ViolationInput::Scans {
            scans: &scans,
            period: g.fringe_period(),
        },
        3.0,
    )
    .unwrap();
    assert!(r.significance > 5.0, "{r:?}");
}

#[test]
fn phase_diffused_pattern_peaks_at_zero_separation() {
    // classical fringes in δ have a maximum where the quantum pattern has
    // its zero
    let g = default_geometry();
    let m = classical_map(&ClassicalEnsembleSpec::new(EnsembleKind::PhaseDiffused, 2000, 2), &g).unwrap();
    let xs = m.gamma.grid().points();
    let c = xs.len() / 2;
    let (delta, cut): (Vec<f64>, Vec<f64>) = (0..xs.len())
        .filter(|&j| (xs[j] - xs[c]).abs() <= 1.5e-3)
        .map(|j| (xs[j] - xs[c], m.gamma.values()[[c, j]]))
        .unzip();
    let fit = fit_fringe_points(&delta, &cut, g.fringe_period()).unwrap();
    let turns = fit.phase_center / fit.period;
    let offset = (turns - turns.round()).abs();
    assert!(visibility(&fit) < 0.02 || (offset - 0.5).abs() < 0.1, "{fit:?}");
    let vis = fixed_period_visibility(&delta, &cut, g.fringe_period()).unwrap();
    assert!(vis < 1.0);
}

#[test]
fn classical_bound_each_kind() {
    let g = default_geometry();
    for kind in EnsembleKind::ALL {
        for seed in 1..=3 {
            let m = classical_map(&ClassicalEnsembleSpec::new(kind, 500, seed), &g).unwrap();
            let r = schwarz_report(ViolationInput::Map(&m.gamma), 3.0).unwrap();
            assert!(!r.violated, "{kind}: {r:?}");
        }
    }
    let coherent = classical_map(&ClassicalEnsembleSpec::new(EnsembleKind::Coherent, 1, 1), &g).unwrap();
    let r = schwarz_report(ViolationInput::Map(&coherent.gamma), 3.0).unwrap();
    assert!(r.significance.abs() < 1e-9);
}

#[test]
fn config_text_drives_the_pipeline() {
    let text = default_geometry().to_config_string();
    let g = load_config(&text).unwrap();
    assert_eq!(g, default_geometry());
    let map = detected_map(&g).unwrap();
    let scan = scan_map(&Figure::Fig7.plan(1, FIGURE_DWELL).unwrap(), &map, &g, &RateModel::default()).unwrap();
    assert!(scan.rows().iter().all(|r| r.x2 == -0.55e-3));
}
