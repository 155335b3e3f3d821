use wavefront_core::analysis::{align_profiles, verify_profile};
use wavefront_core::dispersion::{lambda_roots, minimal_speed, upsilon};
use wavefront_core::model::library;
use wavefront_core::solver::{solve_critical, solve_profile, SolveOptions};
use wavefront_core::{Error, KernelSpec, ReactionModel};

fn fisher() -> ReactionModel {
    library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap()
}

#[test]
fn fisher_at_2_5_rates_and_report() {
    let m = fisher();
    let p = solve_profile(&m, 2.5, &SolveOptions::default()).unwrap();
    let (l1, _) = lambda_roots(&m, 2.5).unwrap();
    let ups = upsilon(&m, 2.5).unwrap();
    let r = p.fitted.unwrap();
    assert!((r.left_rate() / l1 - 1.0).abs() < 0.02);
    assert!((r.right_rate() / ups - 1.0).abs() < 0.02);
    assert!(r.conclusive());
    let report = verify_profile(&p);
    assert!(report.passed(), "{}", report.table());
    assert_eq!(report.checks.len(), 6);
}

#[test]
fn fitted_left_rate_decreases_with_speed() {
    let m = fisher();
    let cs = minimal_speed(&m).unwrap().c_star;
    let rates: Vec<f64> = [1.1, 1.5, 2.0]
        .iter()
        .map(|f| solve_profile(&m, f * cs, &SolveOptions::default()).unwrap().fitted.unwrap().left_rate())
        .collect();
    assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
}

#[test]
fn below_minimal_speed_is_refused() {
    let m = fisher();
    let cs = minimal_speed(&m).unwrap().c_star;
    let err = solve_profile(&m, 0.5 * cs, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn injected_fault_fails_bounds_check() {
    let m = fisher();
    let mut p = solve_profile(&m, 2.5, &SolveOptions::default()).unwrap();
    let mid = p.phi.len() / 2;
    p.phi.values[mid] = m.k();
    let report = verify_profile(&p);
    let bounds = report.checks.iter().find(|c| c.name == "strict bounds").unwrap();
    assert!(!bounds.passed && !report.passed());
}

#[test]
fn coarse_grid_failure_mode() {
    let m = fisher();
    let coarse = SolveOptions { spacing: 0.5, ..SolveOptions::default() };
    assert!(matches!(solve_profile(&m, 2.5, &coarse), Err(Error::OrderViolation { .. })));
    let relaxed = SolveOptions { order_tol: f64::INFINITY, ..coarse };
    let p = solve_profile(&m, 2.5, &relaxed).unwrap();
    let report = verify_profile(&p);
    let residual = report.checks.iter().find(|c| c.name == "residual").unwrap();
    assert!(!residual.passed, "{}", report.table());
    assert!(!report.passed());
}

#[test]
fn grid_refinement_contracts() {
    let m = fisher();
    let c = 2.5;
    let solve = |h: f64| {
        let o = SolveOptions { spacing: h, half_length: Some(50.0), ..SolveOptions::default() };
        solve_profile(&m, c, &o).unwrap()
    };
    let (a, b, d) = (solve(0.2), solve(0.1), solve(0.05));
    let first = align_profiles(&a.phi, &b.phi).sup_distance;
    let second = align_profiles(&b.phi, &d.phi).sup_distance;
    assert!(second < first, "{first:e} {second:e}");
}

#[test]
fn critical_continuation() {
    let m = fisher();
    let cr = solve_critical(&m, &SolveOptions::default()).unwrap();
    assert_eq!(cr.speeds.len(), 8);
    assert!(cr.distances.windows(2).all(|w| w[1] < w[0]), "{:?}", cr.distances);
    assert!(cr.profile.critical);
    assert!((cr.profile.phi.eval_smooth(0.0) - 0.5).abs() < 1e-12);
    assert!(cr.log_corrected_spread < cr.log_plain_spread);
    assert!(cr.log_corrected_spread < 0.5);
    let report = verify_profile(&cr.profile);
    assert!(report.passed(), "{}", report.table());
}

#[test]
fn delayed_nonlocal_models_converge_and_verify() {
    let models = [
        library::vector_disease(1.0, 0.5, 1.0, 2.0, KernelSpec::gaussian(0.5).unwrap()).unwrap(),
        library::nicholson(1.0, 1.0, 1.0, 2.0, 1.0, KernelSpec::uniform(1.0).unwrap()).unwrap(),
        library::age_structured(1.0, 1.0, 2.0, 0.1, 1.0, 0.5).unwrap(),
    ];
    for m in &models {
        let cs = minimal_speed(m).unwrap().c_star;
        let p = solve_profile(m, 1.3 * cs, &SolveOptions::default()).unwrap();
        let report = verify_profile(&p);
        assert!(report.passed(), "{}\n{}", m.nonlinearity().name(), report.table());
    }
}
