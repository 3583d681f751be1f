use std::f64::consts::PI;

use super::*;
use crate::euler::SolverConfig;
use crate::relent::RelativeEnergy;

fn small(cells: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::case_one();
    cfg.grid.cells = cells;
    cfg.solver.t_end = 0.02;
    cfg.solver.snapshots = 5;
    cfg
}

#[test]
fn constant_data_has_no_momentum() {
    let cfg = small(8);
    let g = cfg.grid_spec().unwrap();
    let limit = AggregationDiffusion::new(&g, cfg.limit_config().unwrap()).unwrap();
    let c = ScalarField::constant(g, 0.3);
    let st = well_prepared_init(&c, &c, &limit).unwrap();
    assert_eq!(st.m.max_abs(), 0.0);
    assert_eq!(st.w.max_abs(), 0.0);
}

#[test]
fn well_prepared_data_rejects_vacuum() {
    let cfg = small(8);
    let g = cfg.grid_spec().unwrap();
    let limit = AggregationDiffusion::new(&g, cfg.limit_config().unwrap()).unwrap();
    assert!(well_prepared_init(&ScalarField::zeros(g), &ScalarField::constant(g, 1.0), &limit).is_err());
}

fn psi0_against(cfg: &ExperimentConfig, factor: usize) -> f64 {
    let g = cfg.grid_spec().unwrap();
    let fine = cfg.grid_with(cfg.grid.cells * factor).unwrap();
    let (r, n) = initial_densities(cfg, &g).unwrap();
    let limit = AggregationDiffusion::new(&g, cfg.limit_config().unwrap()).unwrap();
    let st = well_prepared_init(&r, &n, &limit).unwrap();
    let fine_limit = AggregationDiffusion::new(&fine, cfg.limit_config().unwrap()).unwrap();
    let (rf, nf) = initial_densities(cfg, &fine).unwrap();
    let sol = fine_limit.reference_from(vec![0.0], vec![rf], vec![nf]).unwrap();
    let snap = RefSnapshot::new(
        0.0,
        crate::grid::restrict(sol.rho(0), &g).unwrap(),
        crate::grid::restrict(sol.n(0), &g).unwrap(),
        crate::grid::restrict_vector(sol.u(0), &g).unwrap(),
        crate::grid::restrict_vector(sol.v(0), &g).unwrap(),
    )
    .unwrap();
    let (l1, l2) = cfg.laws().unwrap();
    let rel = RelativeEnergy::new(&g, l1, l2, cfg.physics.alpha, cfg.physics.sigma).unwrap();
    rel.psi(&st, &snap, 0.1).unwrap().psi
}

#[test]
fn identical_reference_gives_zero_initial_psi() {
    assert!(psi0_against(&small(16), 1) <= 1e-30);
}

#[test]
fn restricted_reference_gives_small_initial_psi() {
    let a = psi0_against(&small(16), 4);
    let b = psi0_against(&small(32), 4);
    let order = (a / b).log2();
    assert!(a > 0.0 && order >= 1.8, "{a} {b} order {order}");
}

fn unscaled_run(zeta: f64, t_end: f64) -> Trajectory {
    let cfg = small(8);
    let g = cfg.grid_spec().unwrap();
    let (r, n) = initial_densities(&cfg, &g).unwrap();
    let sc = SolverConfig::diffusive(1.0, 0.05, 2.0, 2.0, 1.5)
        .unwrap()
        .with_scaling(crate::euler::Scaling::Unscaled { zeta });
    let solver = EulerRiesz::new(&g, sc).unwrap();
    let st = FluidState::at_rest(r, n).unwrap();
    solver.run(&st, &[0.0, t_end / 2.0, t_end]).unwrap()
}

#[test]
fn unit_epsilon_rescaling_is_identity() {
    let traj = unscaled_run(1.0, 0.02);
    let times = traj.times();
    let mapped = rescale_diffusive(&traj, 1.0, &times).unwrap();
    assert_eq!(mapped, traj.snapshots);
}

#[test]
fn rescaling_maps_times_and_momenta() {
    let traj = unscaled_run(2.0, 0.04);
    let mapped = rescale_diffusive(&traj, 0.25, &[0.01, 0.02]).unwrap();
    // Scaled time 0.02 is source time 0.04.
    assert_eq!(mapped[1].rho, traj.snapshots[2].rho);
    assert_eq!(mapped[1].m, traj.snapshots[2].m.scale(2.0));
    assert_eq!(mapped[0].rho, traj.snapshots[1].rho);
    assert!(rescale_diffusive(&traj, 0.25, &[0.03]).is_err());
}

#[test]
fn interpolation_between_snapshots_is_linear() {
    let traj = unscaled_run(1.0, 0.02);
    let mid = rescale_diffusive(&traj, 1.0, &[0.005]).unwrap();
    let (a, b) = (&traj.snapshots[0].rho, &traj.snapshots[1].rho);
    let expect = a.zip_map(b, |x, y| 0.5 * (x + y)).unwrap();
    for (x, y) in mid[0].rho.values().iter().zip(expect.values()) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn rate_fit_arithmetic() {
    let f = fit_rate(&[(0.1, 1e-2), (0.01, 1e-4)]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12);
    assert!(f.residual < 1e-12);
    assert!(fit_rate(&[(0.1, 1e-2)]).is_err());
    assert!(fit_rate(&[(0.1, 1e-2), (0.01, 0.0)]).is_err());
    assert!(fit_rate(&[(0.1, 1e-2), (0.1, 1e-3)]).is_err());
}

#[test]
fn single_epsilon_sweep_reports_no_rate() {
    let mut cfg = small(8);
    cfg.sweep.epsilons = vec![0.1];
    let (res, runs) = run_sweep(&cfg).unwrap();
    assert_eq!(runs.len(), 1);
    assert!(res.fit.is_none());
    assert!(res.notes.iter().any(|n| n.contains("insufficient points for rate")));
    assert!(res.envelope_ok);
}

#[test]
fn psi_scale_is_positive_for_perturbed_data() {
    let cfg = small(16);
    let g = cfg.grid_spec().unwrap();
    let (r, n) = initial_densities(&cfg, &g).unwrap();
    let s = psi_scale(&cfg, &r, &n).unwrap();
    // γ = 2: ∫(ρ - ⟨ρ⟩)² = b²(a₁² + a₂²)/2, damped by cell averaging.
    let x = PI / 16.0;
    let expect = 0.01 * (0.04 + 0.01) / 2.0 * (x.sin() / x).powi(2);
    assert!((s - expect).abs() < 1e-3 * expect, "{s} {expect}");
}
