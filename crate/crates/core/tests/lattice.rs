use wavefront_core::dispersion::minimal_speed;
use wavefront_core::lattice_sim::{run_and_measure, BoundaryPolicy, InitialData, SimConfig, Simulator};
use wavefront_core::model::library;
use wavefront_core::solver::{solve_profile, SolveOptions};
use wavefront_core::{KernelSpec, ReactionModel};

fn fisher() -> ReactionModel {
    library::fisher(1.0, 0.0, KernelSpec::dirac()).unwrap()
}

#[test]
fn single_step_translates_profile() {
    let m = fisher();
    let c = 1.5 * minimal_speed(&m).unwrap().c_star;
    let p = solve_profile(&m, c, &SolveOptions::default()).unwrap();
    let init = InitialData::Profile { phi: p.phi.clone(), c, at: 100.0 };
    let mut sim = Simulator::new(&m, &init, 200, 1e-3, BoundaryPolicy::FrozenInitial).unwrap();
    sim.step().unwrap();
    let dev = (0..200)
        .map(|j| (sim.state.values[j] - p.phi.eval_smooth(j as f64 - 100.0 + c * 1e-3)).abs())
        .fold(0.0, f64::max);
    assert!(dev <= 1e-3 * m.k(), "{dev:e}");
}

#[test]
fn delayed_profile_translates_rigidly() {
    let m = library::vector_disease(1.0, 0.5, 1.0, 2.0, KernelSpec::gaussian(0.5).unwrap()).unwrap();
    let c = 1.5 * minimal_speed(&m).unwrap().c_star;
    let p = solve_profile(&m, c, &SolveOptions::default()).unwrap();
    let init = InitialData::Profile { phi: p.phi, c, at: 350.0 };
    let cfg = SimConfig { sites: 400, horizon: 40.0, ..SimConfig::default() };
    let out = run_and_measure(&m, &init, &cfg).unwrap();
    let v = out.speed.unwrap();
    assert!((v / c - 1.0).abs() < 0.02, "{v} vs {c}");
}

#[test]
fn comparison_principle() {
    let m = library::nicholson(1.0, 0.5, 1.0, 2.0, 1.0, KernelSpec::gaussian(0.4).unwrap()).unwrap();
    let k = m.k();
    let n = 120;
    let lo: Vec<f64> = (0..n).map(|j| if j > 70 { 0.8 * k } else { 0.0 }).collect();
    let hi: Vec<f64> = (0..n).map(|j| if j > 60 { k } else { 0.1 * k }).collect();
    let dt = 0.01;
    let mut a = Simulator::new(&m, &InitialData::Custom(lo), n, dt, BoundaryPolicy::FrozenInitial).unwrap();
    let mut b = Simulator::new(&m, &InitialData::Custom(hi), n, dt, BoundaryPolicy::FrozenInitial).unwrap();
    for _ in 0..2000 {
        a.step().unwrap();
        b.step().unwrap();
        for (x, y) in a.state.values.iter().zip(&b.state.values) {
            assert!(x <= &(y + 1e-12));
        }
    }
}

#[test]
fn dt_refinement_changes_speed_little() {
    let m = fisher();
    let base = SimConfig { sites: 500, horizon: 80.0, ..SimConfig::default() };
    let a = run_and_measure(&m, &InitialData::Step { at: 450.0 }, &base).unwrap();
    let fine = SimConfig { dt: Some(0.005), ..base };
    let b = run_and_measure(&m, &InitialData::Step { at: 450.0 }, &fine).unwrap();
    let (va, vb) = (a.speed.unwrap(), b.speed.unwrap());
    assert!((va / vb - 1.0).abs() < 1e-3, "{va} {vb}");
}

#[test]
fn delay_slows_spreading() {
    let cfg = SimConfig { sites: 400, horizon: 80.0, ..SimConfig::default() };
    let speed = |tau: f64| {
        let m = library::nicholson(1.0, tau, 1.0, 2.0, 1.0, KernelSpec::dirac()).unwrap();
        run_and_measure(&m, &InitialData::Step { at: 370.0 }, &cfg).unwrap().speed.unwrap()
    };
    let (v0, v1) = (speed(0.0), speed(1.0));
    assert!(v1 <= v0, "{v1} > {v0}");
}

#[test]
fn no_front_for_constant_data() {
    let m = fisher();
    let cfg = SimConfig { sites: 50, horizon: 3.0, ..SimConfig::default() };
    let out = run_and_measure(&m, &InitialData::Custom(vec![1.0; 50]), &cfg).unwrap();
    assert!(out.speed.is_none());
    assert_eq!(out.track.to_csv(), "t,x_front\n");
}

#[test]
fn policies_agree_for_step_data_and_snapshots_recorded() {
    let m = fisher();
    let cfg = SimConfig { sites: 200, horizon: 20.0, snapshot_every: 500, ..SimConfig::default() };
    let a = run_and_measure(&m, &InitialData::Step { at: 150.0 }, &cfg).unwrap();
    let eq = SimConfig { policy: BoundaryPolicy::Equilibrium, ..cfg };
    let b = run_and_measure(&m, &InitialData::Step { at: 150.0 }, &eq).unwrap();
    assert_eq!(a.track, b.track);
    assert_eq!(a.snapshots.len(), 4);
    let csv = a.snapshots_csv();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 201);
}
