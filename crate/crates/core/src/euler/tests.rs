use super::*;
use crate::grid::{restrict, Boundary};
use proptest::prelude::*;

fn torus(n: usize) -> GridSpec {
    GridSpec::torus([n, n], (0.0, 1.0), (0.0, 1.0)).unwrap()
}

fn smooth_state(grid: GridSpec, base: f64) -> FluidState {
    let tau = 2.0 * std::f64::consts::PI;
    let rho = ScalarField::from_fn(grid, |x| base * (1.0 + 0.2 * (tau * x[0]).cos())).unwrap();
    let n = ScalarField::from_fn(grid, |x| base * (1.0 + 0.1 * (tau * (x[1] - 0.125)).cos())).unwrap();
    let m = VectorField::from_fn(grid, |x| [0.01 * (tau * x[1]).sin(), -0.02 * (tau * x[0]).cos()]).unwrap();
    let w = VectorField::zeros(grid);
    FluidState::new(rho, m, n, w, 0.0).unwrap()
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let g = torus(16);
    for split in [Splitting::PressureInFlux, Splitting::PressureInRelaxation] {
        let cfg = SolverConfig::diffusive(0.1, 0.05, 2.0, 2.0, 1.5).unwrap().with_splitting(split);
        let solver = EulerRiesz::new(&g, cfg).unwrap();
        let c = ScalarField::constant(g, 0.7);
        let s = FluidState::at_rest(c.clone(), c).unwrap();
        let dt = solver.stable_dt(&s).min(0.01);
        let next = solver.step(&s, dt).unwrap();
        for (a, b) in next.rho.values().iter().zip(s.rho.values()) {
            assert!((a - b).abs() <= 1e-14);
        }
        assert!(next.m.max_abs() <= 1e-14 && next.w.max_abs() <= 1e-14);
    }
}

#[test]
fn friction_matches_exponential() {
    let g = GridSpec::line(16, (0.0, 1.0), Boundary::Periodic).unwrap();
    for eps in [1.0, 1e-2, 1e-4] {
        for split in [Splitting::PressureInFlux, Splitting::PressureInRelaxation] {
            let cfg = SolverConfig::diffusive(eps, 0.0, 2.0, 2.0, 0.5).unwrap().with_splitting(split);
            let solver = EulerRiesz::new(&g, cfg).unwrap();
            let rho = ScalarField::constant(g, 0.5);
            let m = VectorField::new(g, vec![vec![0.3; 16]]).unwrap();
            let s = FluidState::new(rho.clone(), m.clone(), rho, m, 0.0).unwrap();
            let dt = solver.stable_dt(&s).min(10.0 * eps);
            let next = solver.step(&s, dt).unwrap();
            let exact = 0.3 * (-dt / eps).exp();
            for v in next.m.comp(0) {
                assert!((v - exact).abs() <= 1e-14 * exact, "eps {eps}: {v} vs {exact}");
            }
        }
    }
}

#[test]
fn mass_is_conserved_on_the_torus() {
    let g = torus(32);
    let cfg = SolverConfig::diffusive(0.1, 0.05, 2.0, 2.0, 1.5).unwrap();
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let s0 = smooth_state(g, 1.0);
    let traj = solver.run(&s0, &[0.0, 0.25]).unwrap();
    let e0 = traj.energies[0];
    let e1 = traj.energies[1];
    assert!(traj.steps > 50, "{}", traj.steps);
    assert!((e1.mass1 - e0.mass1).abs() <= 1e-12 * e0.mass1);
    assert!((e1.mass2 - e0.mass2).abs() <= 1e-12 * e0.mass2);
}

#[test]
fn energy_of_simple_states() {
    let g = torus(8);
    let cfg = SolverConfig::diffusive(0.1, 0.05, 2.0, 2.0, 1.5).unwrap();
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let z = FluidState::at_rest(ScalarField::zeros(g), ScalarField::zeros(g)).unwrap();
    let e = solver.total_energy(&z).unwrap();
    assert_eq!(e.total, 0.0);
    assert_eq!(e.mass1, 0.0);
    let c = ScalarField::constant(g, 0.6);
    let e = solver.total_energy(&FluidState::at_rest(c.clone(), c).unwrap()).unwrap();
    assert!((e.total - 2.0 * 0.36).abs() < 1e-14);
    assert_eq!(e.interaction, 0.0);
}

#[test]
fn interaction_energy_matches_double_sum() {
    let g = torus(8);
    let sigma = 0.05;
    let cfg = SolverConfig::diffusive(0.1, sigma, 2.0, 2.0, 1.5).unwrap();
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let s = smooth_state(g, 1.0);
    let e = solver.total_energy(&s).unwrap();
    let op = solver.operator().unwrap();
    let xi = s.rho.sub(&s.n).unwrap();
    let vol = g.cell_volume();
    let mut acc = 0.0;
    for i in 0..g.len() {
        for j in 0..g.len() {
            acc += xi.values()[i] * op.weight(i, j) * xi.values()[j];
        }
    }
    let oracle = sigma * 0.5 * acc * vol * vol;
    assert!((e.interaction - oracle).abs() < 1e-12 * oracle.abs());
}

#[test]
fn rejects_oversized_steps() {
    let g = torus(8);
    let cfg = SolverConfig::diffusive(0.1, 0.05, 2.0, 2.0, 1.5).unwrap();
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let s = smooth_state(g, 1.0);
    let dt = solver.stable_dt(&s);
    assert!(matches!(solver.step(&s, 2.0 * dt), Err(Error::CflViolation { .. })));
}

#[test]
fn zero_trajectory_has_zero_residuals() {
    let g = torus(8);
    let cfg = SolverConfig::diffusive(0.1, 0.05, 2.0, 2.0, 1.5).unwrap();
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let z = FluidState::at_rest(ScalarField::zeros(g), ScalarField::zeros(g)).unwrap();
    let traj = solver.run_fixed_dt(&z, 0.01, &[0.0, 0.05, 0.1]).unwrap();
    let r = solver.weak_form_residual(&traj, &TrigTest::new(&g, Some(0.08)).unwrap()).unwrap();
    assert_eq!(r.max_equality(), 0.0);
    assert_eq!(r.dissipation, 0.0);
}

#[test]
fn constant_window_reduces_to_energy_balance() {
    let g = torus(8);
    let cfg = SolverConfig::diffusive(0.1, 0.05, 2.0, 2.0, 1.5).unwrap();
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let s0 = smooth_state(g, 0.5);
    let dt = 0.5 * solver.stable_dt(&s0);
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * dt).collect();
    let traj = solver.run_fixed_dt(&s0, dt, &times).unwrap();
    let r = solver.weak_form_residual(&traj, &TrigTest::new(&g, None).unwrap()).unwrap();
    let n = traj.energies.len() - 1;
    let balance = traj.energies[n].total - traj.energies[0].total + traj.dissipated[n];
    assert!((r.dissipation - balance).abs() < 1e-13 * traj.energies[0].total);
}

#[test]
fn non_tangential_test_is_rejected() {
    struct Bad;
    impl WeakTest for Bad {
        fn time(&self, _: f64) -> (f64, f64) {
            (1.0, 0.0)
        }
        fn scalar(&self, _: [f64; 2]) -> (f64, [f64; 2]) {
            (1.0, [0.0; 2])
        }
        fn vector(&self, _: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
            ([1.0, 0.0], [[0.0; 2]; 2])
        }
    }
    let g = GridSpec::line(8, (0.0, 1.0), Boundary::NoFlux).unwrap();
    let cfg = SolverConfig::diffusive(0.1, 0.0, 2.0, 2.0, 0.5).unwrap();
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let c = ScalarField::constant(g, 1.0);
    let traj = solver.run(&FluidState::at_rest(c.clone(), c).unwrap(), &[0.0, 0.01]).unwrap();
    assert!(solver.weak_form_residual(&traj, &Bad).is_err());
}

fn riemann(n: usize) -> ScalarField {
    let g = GridSpec::line(n, (0.0, 1.0), Boundary::NoFlux).unwrap();
    let cfg = SolverConfig::diffusive(1.0, 0.0, 1.4, 1.4, 0.5)
        .unwrap()
        .with_splitting(Splitting::PressureInFlux);
    let solver = EulerRiesz::new(&g, cfg).unwrap();
    let rho = ScalarField::from_cell_average(g, |x| if x[0] < 0.5 { 1.0 } else { 0.125 }).unwrap();
    let s = FluidState::at_rest(rho, ScalarField::constant(g, 0.5)).unwrap();
    solver.run(&s, &[0.15]).unwrap().last().rho.clone()
}

#[test]
fn riemann_problem_self_converges() {
    let fine = riemann(1024);
    let mut errs = Vec::new();
    for n in [64usize, 128] {
        let coarse = riemann(n);
        let r = restrict(&fine, coarse.grid()).unwrap();
        let diff = coarse.sub(&r).unwrap().map(f64::abs);
        let e = integrate(&diff).unwrap();
        errs.push(e);
        // first order away from the discontinuities, O(h) overall in L¹
        assert!(e <= 2.0 * coarse.grid().h(0), "n {n}: {e}");
    }
    assert!(errs[1] < errs[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn densities_stay_nonnegative(a in 0.0..0.95f64, b in 0.0..0.95f64, k in 1usize..4, eps in 0.01..1.0f64) {
        let g = GridSpec::line(32, (0.0, 1.0), Boundary::Periodic).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let cfg = SolverConfig::diffusive(eps, 0.0, 2.0, 1.5, 0.5).unwrap();
        let solver = EulerRiesz::new(&g, cfg).unwrap();
        let rho = ScalarField::from_fn(g, |x| 1.0 + a * (tau * k as f64 * x[0]).cos()).unwrap();
        let n = ScalarField::from_fn(g, |x| 1.0 - b * (tau * x[0]).sin()).unwrap();
        let m = VectorField::from_fn(g, |x| [0.1 * (tau * x[0]).sin(), 0.0]).unwrap();
        let mut s = FluidState::new(rho, m, n, VectorField::zeros(g), 0.0).unwrap();
        for _ in 0..20 {
            let dt = solver.stable_dt(&s);
            s = solver.step(&s, dt).unwrap();
            prop_assert!(s.rho.min() >= 0.0 && s.n.min() >= 0.0);
        }
    }
}
