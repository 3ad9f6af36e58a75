//! Cross-module consistency on small grids.

use crg::acceptance::extrapolate_in_m;
use crg::diagrams::DiagramEvaluator;
use crg::ed::{diagonalize, perturbative_coefficients};
use crg::gn_trees::kernel_bound_report;
use crg::honeycomb::HoneycombGeometry;
use crg::multiscale::run_flow;
use crg::propagators::{MatsubaraGrid, ScalePropagator};

#[test]
fn extrapolation_is_exact_on_its_model() {
    let f = |m: u32| -0.25 + 3.0 * 2f64.powi(-(m as i32)) - 7.0 * 4f64.powi(-(m as i32));
    let pts: Vec<(u32, f64)> = [4, 6, 9].iter().map(|&m| (m, f(m))).collect();
    assert!((extrapolate_in_m(&pts) + 0.25).abs() < 1e-12);
}

#[test]
fn reduced_and_full_spectra_agree() {
    let geom = HoneycombGeometry::new(1).unwrap();
    let a = diagonalize(&geom, 0.8, true).unwrap();
    let b = diagonalize(&geom, 0.8, false).unwrap();
    assert_eq!(a.dimension(), b.dimension());
    for beta in [0.3, 2.0, 9.0] {
        assert!((a.free_energy(beta) - b.free_energy(beta)).abs() < 1e-13);
        assert!((a.density(beta) - b.density(beta)).abs() < 1e-13);
    }
}

#[test]
fn multiscale_order_two_converges_to_oracle() {
    // Deeper grids than the acceptance window: the asymptotic regime in M.
    let geom = HoneycombGeometry::new(1).unwrap();
    let ed = perturbative_coefficients(&geom, 2.0, 2, 1e-3).unwrap().coefficients[2];
    let pts: Vec<(u32, f64)> = [8u32, 10, 12].iter().map(|&m| (m, run_flow(&geom, &MatsubaraGrid::new(2.0, m).unwrap(), 1.0, false).unwrap().f2_assembled())).collect();
    let f2 = extrapolate_in_m(&pts);
    assert!((f2 - ed).abs() <= 1e-4 * ed.abs(), "{f2} vs {ed}");
}

#[test]
fn order_one_free_energy_vanishes_at_half_filling() {
    let geom = HoneycombGeometry::new(1).unwrap();
    let grid = MatsubaraGrid::new(3.0, 5).unwrap();
    let ev = DiagramEvaluator::new(ScalePropagator::full(&geom, &grid).momentum_table(), &grid, 1, 1.0);
    assert!(ev.free_energy_order(1).unwrap().norm() < 1e-14);
}

#[test]
fn tree_bound_report_covers_both_regimes() {
    let rows = kernel_bound_report(0.5, 6, &[0, 3, -1, -2], 3).unwrap();
    assert!(rows.iter().any(|r| r.regime == "uv") && rows.iter().any(|r| r.regime == "ir"));
    for r in &rows {
        assert!(r.tree_class_sum <= r.tree_class_bound * (1.0 + 1e-12));
        assert!(r.sigma_p_max <= r.sigma_p_bound_corrected * (1.0 + 1e-12));
    }
    assert!(kernel_bound_report(1.0, 6, &[0], 2).is_err());
}
