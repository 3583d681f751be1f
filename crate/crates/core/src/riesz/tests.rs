use super::*;
use crate::grid::{gradient, lp_norm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus(n: usize) -> GridSpec {
    GridSpec::torus([n, n], (0.0, 1.0), (0.0, 1.0)).unwrap()
}

fn smooth_random(grid: GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    let tau = 2.0 * std::f64::consts::PI;
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0..4) as f64,
                rng.random_range(0..4) as f64,
                rng.random_range(0.0..tau),
            )
        })
        .collect();
    let (lx, ly) = (grid.length(0), if grid.dim() == 2 { grid.length(1) } else { 1.0 });
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|&(a, kx, ky, ph)| a * (tau * (kx * x[0] / lx + ky * x[1] / ly) + ph).cos())
            .sum()
    })
    .unwrap()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

#[test]
fn kernel_values() {
    let p1 = RieszParams::new(1.0, 2).unwrap();
    assert!((kernel_eval(&[3.0, 4.0], &p1).unwrap() - 0.2).abs() < 1e-15);
    let p15 = RieszParams::new(1.5, 2).unwrap();
    assert!((kernel_eval(&[1.0, 0.0], &p15).unwrap() - 2.0).abs() < 1e-15);
    assert!(matches!(kernel_eval(&[0.0, 0.0], &p15), Err(Error::Singular)));
    assert!(RieszParams::new(2.5, 2).is_err());
    assert!(RieszParams::new(0.0, 1).is_err());
}

#[test]
fn gradient_norm_identity() {
    let p = RieszParams::new(1.5, 2).unwrap();
    let pm = RieszParams::new(0.5, 2).unwrap();
    for x in [[0.3, -0.4], [1.0, 2.0], [-0.01, 0.02]] {
        let g = kernel_gradient(&x, &p).unwrap();
        let lhs = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let rhs = p.gradient_domination_constant() * kernel_eval(&x, &pm).unwrap();
        assert!((lhs - rhs).abs() <= 1e-13 * rhs);
    }
}

#[test]
fn zero_field_maps_to_zero() {
    let g = torus(8);
    let op = RieszOperator::new(&g, RieszParams::new(1.5, 2).unwrap()).unwrap();
    let z = ScalarField::zeros(g);
    assert!(op.conv_direct(&z).unwrap().values().iter().all(|&v| v == 0.0));
    assert!(op.conv_fft_periodic(&z).unwrap().values().iter().all(|&v| v == 0.0));
    assert_eq!(op.conv_grad_direct(&z).unwrap().max_abs(), 0.0);
    assert_eq!(op.interaction_energy(&z, 1.0).unwrap(), 0.0);
}

#[test]
fn constant_field_gives_constant_output() {
    let g = torus(16);
    let op = RieszOperator::new(&g, RieszParams::new(1.2, 2).unwrap()).unwrap();
    let out = op.conv_fft_periodic(&ScalarField::constant(g, 2.0)).unwrap();
    let v0 = out.values()[0];
    assert!(out.values().iter().all(|v| (v - v0).abs() < 1e-12 * v0.abs()));
}

#[test]
fn fft_matches_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g1 = GridSpec::line(64, (0.0, 1.0), Boundary::Periodic).unwrap();
    let op1 = RieszOperator::new(&g1, RieszParams::new(0.5, 1).unwrap()).unwrap();
    let g2 = torus(32);
    let op2 = RieszOperator::new(&g2, RieszParams::new(1.5, 2).unwrap()).unwrap();
    for _ in 0..3 {
        let f = smooth_random(g1, &mut rng);
        let a = op1.conv_direct(&f).unwrap();
        let b = op1.conv_fft_periodic(&f).unwrap();
        assert!(max_rel(b.values(), a.values()) < 1e-10);
        let f = smooth_random(g2, &mut rng);
        let a = op2.conv_direct(&f).unwrap();
        let b = op2.conv_fft_periodic(&f).unwrap();
        assert!(max_rel(b.values(), a.values()) < 1e-10);
        let ga = op2.conv_grad_direct(&f).unwrap();
        let gb = op2.conv_grad_fft(&f).unwrap();
        for k in 0..2 {
            assert!(max_rel(gb.comp(k), ga.comp(k)) < 1e-10);
        }
    }
}

#[test]
fn fft_rejects_bounded_grid() {
    let g = GridSpec::line(16, (0.0, 1.0), Boundary::NoFlux).unwrap();
    let p = RieszParams::new(0.5, 1).unwrap();
    assert!(conv_fft_periodic(&ScalarField::zeros(g), &p).is_err());
}

/// (x^α + (1-x)^α)/(α(1-α)), the convolution of the indicator of [0,1].
fn unit_interval_oracle(x: f64, alpha: f64) -> f64 {
    (x.powf(alpha) + (1.0 - x).powf(alpha)) / (alpha * (1.0 - alpha))
}

#[test]
fn constant_on_interval_matches_closed_form() {
    let alpha = 0.5;
    assert!((unit_interval_oracle(0.5, alpha) - 4.0 * 2f64.sqrt()).abs() < 1e-14);
    let p = RieszParams::new(alpha, 1).unwrap();
    let mut errs = Vec::new();
    for n in [64usize, 128, 256] {
        let g = GridSpec::line(n, (0.0, 1.0), Boundary::NoFlux).unwrap();
        let out = conv_direct(&ScalarField::constant(g, 1.0), &p).unwrap();
        // the cell whose right face sits at x = 0.5
        let i = n / 2 - 1;
        let x = g.center(i)[0];
        let exact = unit_interval_oracle(x, alpha);
        errs.push((out.values()[i] - exact).abs() / exact);
    }
    assert!(errs[2] < 1e-2);
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 0.9, "{errs:?}");
    }
}

/// Cell average of |x_i - y|^{β-d} over cell j by midpoint subdivision.
fn subdivided(grid: &GridSpec, i: usize, j: usize, beta: f64, m: usize) -> f64 {
    let d = grid.dim();
    let xi = grid.center(i);
    let xj = grid.center(j);
    let mut acc = 0.0;
    let my = if d == 2 { m } else { 1 };
    for a in 0..m {
        for b in 0..my {
            let mut y = xj;
            y[0] += ((a as f64 + 0.5) / m as f64 - 0.5) * grid.h(0);
            if d == 2 {
                y[1] += ((b as f64 + 0.5) / m as f64 - 0.5) * grid.h(1);
            }
            let r = ((xi[0] - y[0]).powi(2) + (xi[1] - y[1]).powi(2)).sqrt();
            acc += r.powf(beta - d as f64);
        }
    }
    acc / (m * my) as f64
}

#[test]
fn unit_mass_column_matches_subdivided_quadrature() {
    let g = GridSpec::line(32, (0.0, 1.0), Boundary::NoFlux).unwrap();
    let p = RieszParams::new(0.5, 1).unwrap();
    let op = RieszOperator::new(&g, p).unwrap();
    let c = 10;
    let mut vals = vec![0.0; 32];
    vals[c] = 1.0 / g.h(0);
    let out = op.conv_direct(&ScalarField::new(g, vals).unwrap()).unwrap();
    for i in 0..32 {
        if (i as isize - c as isize).abs() < 3 {
            continue;
        }
        let oracle = subdivided(&g, i, c, 0.5, 64) * p.prefactor();
        assert!((out.values()[i] - oracle).abs() < 1e-2 * oracle, "cell {i}");
    }
}

#[test]
fn distant_cell_in_two_dimensions() {
    // a large box keeps periodic images far away
    let g = GridSpec::torus([64, 64], (0.0, 8.0), (0.0, 8.0)).unwrap();
    let op = RieszOperator::with_image_radius(&g, RieszParams::new(1.0, 2).unwrap(), 0.0).unwrap();
    let c = g.index(10, 10);
    let mut vals = vec![0.0; g.len()];
    vals[c] = 1.0;
    let out = op.frac_integral_direct(&ScalarField::new(g, vals).unwrap()).unwrap();
    let t = g.index(10, 20);
    let r = 10.0 * g.h(0);
    let h2 = g.cell_volume();
    let oracle = subdivided(&g, t, c, 1.0, 64) * h2;
    assert!((out.values()[t] - oracle).abs() < 1e-3 * oracle);
    assert!((out.values()[t] - h2 / r).abs() < 1e-2 * h2 / r);
}

#[test]
fn fractional_integral_relation_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = torus(16);
    let p = RieszParams::new(1.3, 2).unwrap();
    let f = smooth_random(g, &mut rng);
    let a = frac_integral(&f, 1.3).unwrap().scale(p.prefactor());
    let b = conv_direct(&f, &p).unwrap();
    assert_eq!(a, b);
    assert!(frac_integral(&f, 2.0).is_err());
}

#[test]
fn two_cell_interaction_matches_double_sum() {
    let g = torus(8);
    let p = RieszParams::new(1.5, 2).unwrap();
    let op = RieszOperator::new(&g, p).unwrap();
    let (a, b) = (g.index(1, 2), g.index(5, 3));
    let mut vals = vec![0.0; g.len()];
    vals[a] = 1.0;
    vals[b] = -1.0;
    let f = ScalarField::new(g, vals).unwrap();
    let h2 = g.cell_volume();
    let oracle = 0.5 * h2 * h2 * (op.weight(a, a) + op.weight(b, b) - 2.0 * op.weight(a, b));
    let got = op.interaction_energy(&f, 1.0).unwrap();
    assert!((got - oracle).abs() < 1e-12 * oracle.abs());
}

#[test]
fn nonnegative_mass_has_positive_energy() {
    let g = torus(8);
    let op = RieszOperator::new(&g, RieszParams::new(1.5, 2).unwrap()).unwrap();
    let f = ScalarField::from_fn(g, |x| 1.0 + x[0]).unwrap();
    assert!(op.interaction_energy(&f, 0.1).unwrap() > 0.0);
}

#[test]
fn gradient_of_unit_mass_is_antisymmetric() {
    let g = torus(16);
    let op = RieszOperator::new(&g, RieszParams::new(1.5, 2).unwrap()).unwrap();
    let c = g.index(8, 8);
    let mut vals = vec![0.0; g.len()];
    vals[c] = 1.0;
    let out = op.conv_grad_direct(&ScalarField::new(g, vals).unwrap()).unwrap();
    for (di, dj) in [(1usize, 0usize), (2, 3), (0, 5), (4, 4)] {
        let p = g.index(8 + di, 8 + dj);
        let m = g.index(8 - di, 8 - dj);
        for k in 0..2 {
            assert_eq!(out.comp(k)[p], -out.comp(k)[m]);
        }
    }
}

#[test]
fn radial_field_has_no_gradient_at_center() {
    let g = torus(17);
    let op = RieszOperator::new(&g, RieszParams::new(1.5, 2).unwrap()).unwrap();
    let f = ScalarField::from_fn(g, |x| {
        let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
        (-20.0 * r2).exp()
    })
    .unwrap();
    let out = op.conv_grad_direct(&f).unwrap();
    let c = g.index(8, 8);
    assert!(out.at(c)[0].abs() < 1e-12 && out.at(c)[1].abs() < 1e-12);
}

#[test]
fn gradient_rejected_for_small_alpha() {
    let g = torus(8);
    let p = RieszParams::new(0.8, 2).unwrap();
    assert!(conv_grad(&ScalarField::zeros(g), &p).is_err());
}

#[test]
fn gradient_consistent_with_differenced_convolution() {
    let p = RieszParams::new(1.5, 2).unwrap();
    let tau = 2.0 * std::f64::consts::PI;
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let g = torus(n);
        let op = RieszOperator::new(&g, p).unwrap();
        let f = ScalarField::from_cell_average(g, |x| (tau * x[0]).cos() * (1.0 + 0.5 * (tau * x[1]).sin())).unwrap();
        let gr = op.conv_grad_fft(&f).unwrap();
        let fd = gradient(&op.conv_fft_periodic(&f).unwrap());
        errs.push(gr.sub(&fd).unwrap().max_abs());
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
    }
}

#[test]
fn self_weight_matches_exact_integral_order() {
    // With the lattice correction the convolution of cos(2πx) on the torus
    // converges at second order to the continuum multiplier.
    let p = RieszParams::new(0.5, 1).unwrap();
    let tau = 2.0 * std::f64::consts::PI;
    let mut errs = Vec::new();
    let reference = {
        let g = GridSpec::line(2048, (0.0, 1.0), Boundary::Periodic).unwrap();
        let f = ScalarField::from_cell_average(g, |x| (tau * x[0]).cos()).unwrap();
        let out = RieszOperator::new(&g, p).unwrap().conv(&f).unwrap();
        let fv = f.values()[0];
        out.values()[0] / fv
    };
    for n in [32usize, 64, 128] {
        let g = GridSpec::line(n, (0.0, 1.0), Boundary::Periodic).unwrap();
        let f = ScalarField::from_cell_average(g, |x| (tau * x[0]).cos()).unwrap();
        let out = RieszOperator::new(&g, p).unwrap().conv(&f).unwrap();
        errs.push((out.values()[0] / f.values()[0] - reference).abs());
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn bilinear_form_is_symmetric(seed in any::<u64>(), periodic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, p) = if periodic {
            (torus(12), RieszParams::new(1.5, 2).unwrap())
        } else {
            (GridSpec::line(40, (0.0, 2.0), Boundary::NoFlux).unwrap(), RieszParams::new(0.4, 1).unwrap())
        };
        let op = RieszOperator::new(&g, p).unwrap();
        let f = ScalarField::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let h = ScalarField::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let a = integrate(&f.mul(&op.conv_direct(&h).unwrap()).unwrap()).unwrap();
        let b = integrate(&h.mul(&op.conv_direct(&f).unwrap()).unwrap()).unwrap();
        let scale = lp_norm(&f, 2.0).unwrap() * lp_norm(&h, 2.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn weights_are_symmetric(i in 0usize..64, j in 0usize..64) {
        let g = torus(8);
        let op = RieszOperator::new(&g, RieszParams::new(1.7, 2).unwrap()).unwrap();
        prop_assert_eq!(op.weight(i, j), op.weight(j, i));
    }
}
