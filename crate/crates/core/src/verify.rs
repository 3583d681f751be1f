//! Property suites run by `bipolar verify <suite>`. Each suite returns a
//! list of named checks, each a measured value against a bound.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::euler::{EulerRiesz, FluidState, Splitting, TrigTest};
use crate::grid::{Boundary, GridSpec, ScalarField, VectorField};
use crate::harness::{build_reference, initial_densities, run_epsilon, well_prepared_init};
use crate::limit::AggregationDiffusion;
use crate::relent::{lemma52_ratio, perturbation_samples, random_profile, sigma_threshold, LemmaBranch};
use crate::riesz::{kernel_eval, kernel_gradient, RieszOperator, RieszParams};
use crate::thermo::{lemma_lower_bound_check, PressureLaw};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Kernel,
    Energy,
    Lemmas,
    WeakForm,
    Inequality,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Kernel, Suite::Energy, Suite::Lemmas, Suite::WeakForm, Suite::Inequality];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Kernel => "kernel",
            Suite::Energy => "energy",
            Suite::Lemmas => "lemmas",
            Suite::WeakForm => "weakform",
            Suite::Inequality => "inequality",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            Error::config(
                "suite",
                format!("unknown suite `{s}` (expected kernel, energy, lemmas, weakform or inequality)"),
            )
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub kind: Bound,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            kind: Bound::AtMost,
            passed: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            kind: Bound::AtLeast,
            passed: value >= bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.kind {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:e} {op} {:e}", self.name, self.value, self.bound)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        let verdict = if self.passed() { "passed" } else { "FAILED" };
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!(
            "suite {}: {verdict} ({} checks, {failed} failed)\n",
            self.suite,
            self.checks.len()
        ));
        out
    }
}

pub fn run_suite(suite: Suite, cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let checks = match suite {
        Suite::Kernel => kernel_suite(cfg)?,
        Suite::Energy => energy_suite(cfg)?,
        Suite::Lemmas => lemma_suite(cfg)?,
        Suite::WeakForm => weak_form_suite(cfg)?,
        Suite::Inequality => inequality_suite(cfg)?,
    };
    Ok(SuiteReport { suite, checks })
}

/// log₂ of successive ratios of a sequence that should shrink under halving.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn min_order(errors: &[f64]) -> f64 {
    observed_orders(errors).into_iter().fold(f64::INFINITY, f64::min)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// (x^α + (1-x)^α)/(α(1-α)): the convolution of the indicator of [0, 1]
/// with K_α in one dimension.
fn unit_interval_potential(x: f64, alpha: f64) -> f64 {
    (x.powf(alpha) + (1.0 - x).powf(alpha)) / (alpha * (1.0 - alpha))
}

fn kernel_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sweep.seed);
    let mut checks = Vec::new();

    let line = GridSpec::line(128, (0.0, 1.0), Boundary::Periodic)?;
    let torus = GridSpec::torus([64, 64], (0.0, 1.0), (0.0, 1.0))?;
    let alpha2 = cfg.physics.alpha;
    for (label, grid, alpha) in [("1d", line, 0.5), ("2d", torus, alpha2)] {
        let op = RieszOperator::new(&grid, RieszParams::new(alpha, grid.dim())?)?;
        let mut worst = 0.0_f64;
        let mut worst_grad = 0.0_f64;
        for _ in 0..20 {
            let f = random_profile(&grid, &mut rng)?;
            let a = op.conv_direct(&f)?;
            let b = op.conv_fft_periodic(&f)?;
            worst = worst.max(max_rel(b.values(), a.values()));
            if op.params().has_gradient() {
                let ga = op.conv_grad_direct(&f)?;
                let gb = op.conv_grad_fft(&f)?;
                let diff = gb.sub(&ga)?.max_abs();
                worst_grad = worst_grad.max(diff / ga.max_abs().max(f64::MIN_POSITIVE));
            }
        }
        checks.push(Check::at_most(format!("fft vs direct ({label}, 20 fields)"), worst, 1e-10));
        if op.params().has_gradient() {
            checks.push(Check::at_most(format!("gradient fft vs direct ({label})"), worst_grad, 1e-10));
        }
        let mut sym = 0.0_f64;
        for _ in 0..5 {
            let f = random_profile(&grid, &mut rng)?;
            let g = random_profile(&grid, &mut rng)?;
            let fg = op.bilinear(&f, &g)?;
            let gf = op.bilinear(&g, &f)?;
            let scale = op.bilinear(&f, &f)?.abs().sqrt() * op.bilinear(&g, &g)?.abs().sqrt();
            sym = sym.max((fg - gf).abs() / scale.max(f64::MIN_POSITIVE));
        }
        checks.push(Check::at_most(format!("bilinear symmetry ({label})"), sym, 1e-12));
    }

    let exact = unit_interval_potential(0.5, 0.5);
    let p = RieszParams::new(0.5, 1)?;
    let mut errs = Vec::new();
    for n in [64usize, 128, 256] {
        let g = GridSpec::line(n, (0.0, 1.0), Boundary::NoFlux)?;
        let out = RieszOperator::new(&g, p)?.conv_direct(&ScalarField::constant(g, 1.0))?;
        // x = 0.5 is the face between the two middle cells
        let mid = 0.5 * (out.values()[n / 2 - 1] + out.values()[n / 2]);
        errs.push((mid - exact).abs() / exact);
    }
    checks.push(Check::at_most("constant field at x = 0.5, N = 256 (relative)", errs[2], 1e-2));
    checks.push(Check::at_least("constant field order", min_order(&errs), 0.9));

    let grid = GridSpec::torus([8, 8], (0.0, 1.0), (0.0, 1.0))?;
    let pa = RieszParams::new(alpha2, 2)?;
    let pm = RieszParams::new(alpha2 - 1.0, 2)?;
    let c = pa.gradient_domination_constant();
    let mut worst = 0.0_f64;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            if i == j {
                continue;
            }
            let (a, b) = (grid.center(i), grid.center(j));
            let x = [a[0] - b[0], a[1] - b[1]];
            let g = kernel_gradient(&x, &pa)?;
            let lhs = g[0].hypot(g[1]);
            let rhs = c * kernel_eval(&x, &pm)?;
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
    }
    checks.push(Check::at_most("|grad K| = (d-a+1) K_(a-1) on 8x8 pairs", worst, 1e-13));
    Ok(checks)
}

fn well_prepared(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<FluidState> {
    let (rho0, n0) = initial_densities(cfg, grid)?;
    let limit = AggregationDiffusion::new(grid, cfg.limit_config()?)?;
    well_prepared_init(&rho0, &n0, &limit)
}

fn energy_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let grid = cfg.grid_spec()?;
    let eps = cfg.solver.epsilon;
    let solver = EulerRiesz::new(&grid, cfg.solver_config(eps)?)?;
    let init = well_prepared(cfg, &grid)?;

    let traj = solver.run(&init, &cfg.output_times())?;
    let e0 = &traj.energies[0];
    let mut drift = [0.0_f64; 2];
    for e in &traj.energies {
        drift[0] = drift[0].max((e.mass1 - e0.mass1).abs() / e0.mass1.abs());
        drift[1] = drift[1].max((e.mass2 - e0.mass2).abs() / e0.mass2.abs());
    }
    checks.push(Check::at_most("mass drift species 1 (relative)", drift[0], 1e-12));
    checks.push(Check::at_most("mass drift species 2 (relative)", drift[1], 1e-12));

    // Energy balance H(T) - H(0) + ∫D under fixed-step halving; the
    // dt-dependent part is measured through successive differences.
    let t_end = cfg.solver.t_end;
    let base = t_end / (t_end / solver.stable_dt(&init)).ceil();
    let mut balance = Vec::new();
    for k in 0..4 {
        let dt = base / f64::from(1 << k);
        let tr = solver.run_fixed_dt(&init, dt, &[0.0, t_end])?;
        let last = tr.energies.len() - 1;
        balance.push(tr.energies[last].total - tr.energies[0].total + tr.dissipated[last]);
    }
    let diffs: Vec<f64> = balance.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    checks.push(Check::at_least("energy balance order under dt halving", min_order(&diffs), 1.0));
    let worst = balance.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    checks.push(Check::at_most(
        "energy balance H(T) - H(0) + int D (relative, no growth)",
        worst / e0.total.abs(),
        1e-12,
    ));

    let rho_mean = init.rho.values().iter().sum::<f64>() / grid.len() as f64;
    let n_mean = init.n.values().iter().sum::<f64>() / grid.len() as f64;
    let rest = FluidState::at_rest(ScalarField::constant(grid, rho_mean), ScalarField::constant(grid, n_mean))?;
    let mut fixed = 0.0_f64;
    for split in [Splitting::PressureInFlux, Splitting::PressureInRelaxation] {
        let s = EulerRiesz::new(&grid, cfg.solver_config(eps)?.with_splitting(split))?;
        let dt = s.stable_dt(&rest).min(0.01);
        let next = s.step(&rest, dt)?;
        let dr = max_rel(next.rho.values(), rest.rho.values()).max(max_rel(next.n.values(), rest.n.values()));
        fixed = fixed.max(dr).max(next.m.max_abs()).max(next.w.max_abs());
    }
    checks.push(Check::at_most("constant equilibrium, one step", fixed, 1e-14));

    let line = GridSpec::line(16, (0.0, 1.0), Boundary::Periodic)?;
    for eps in [1.0, 1e-2, 1e-4] {
        let mut sc = cfg.solver_config(eps)?;
        sc.sigma = 0.0;
        sc.alpha = 0.5;
        let s = EulerRiesz::new(&line, sc)?;
        let rho = ScalarField::constant(line, 0.5);
        let m = VectorField::new(line, vec![vec![0.3; 16]])?;
        let state = FluidState::new(rho.clone(), m.clone(), rho, m, 0.0)?;
        let dt = 0.5 * eps;
        let next = s.relax(&state, dt)?;
        let exact = 0.3 * (-dt / eps).exp();
        let err = next.m.comp(0).iter().fold(0.0_f64, |m, v| m.max((v - exact).abs())) / exact;
        checks.push(Check::at_most(format!("friction decay, eps = {eps:e} (relative)"), err, 1e-14));
    }
    Ok(checks)
}

/// Reference densities for the lemma samples: the experiment's initial data.
fn sample_references(cfg: &ExperimentConfig, cells: usize) -> Result<(ScalarField, ScalarField)> {
    initial_densities(cfg, &cfg.grid_with(cells)?)
}

fn lemma_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let seed = cfg.sweep.seed;
    let (rb, nb) = sample_references(cfg, cfg.grid.cells)?;
    let lo = rb.min().min(nb.min());
    let hi = rb.max().max(nb.max());
    for gamma in [1.8, 2.0, 3.0] {
        let rep = lemma_lower_bound_check(&PressureLaw::new(gamma)?, (lo, hi), 10_000, None, seed)?;
        let inf = rep.quadratic_inf.min(rep.power_inf);
        checks.push(Check::at_least(format!("h(r|rbar) lower-bound infimum, gamma = {gamma}"), inf, f64::MIN_POSITIVE));
        if gamma == 2.0 {
            checks.push(Check::at_most(
                "gamma = 2 quadratic infimum minus 1",
                (rep.global_quadratic_inf - 1.0).abs(),
                1e-12,
            ));
        }
    }

    let alpha = cfg.physics.alpha;
    let coarse = cfg.grid.cells / 2;
    for (branch, gamma) in [(LemmaBranch::P, cfg.physics.gamma1.max(2.0)), (LemmaBranch::Q, 1.8)] {
        let law = PressureLaw::new(gamma)?;
        let mut maxima = Vec::new();
        for cells in [coarse, 2 * coarse] {
            let (rb, nb) = sample_references(cfg, cells)?;
            let samples = perturbation_samples(&rb, &nb, 100, 0.9, seed)?;
            let mut worst = 0.0_f64;
            for (r, rbar, _, _) in &samples {
                if r == rbar {
                    continue;
                }
                worst = worst.max(lemma52_ratio(r, rbar, &law, alpha, branch)?);
            }
            maxima.push(worst);
        }
        let name = match branch {
            LemmaBranch::P => "p",
            LemmaBranch::Q => "q",
        };
        checks.push(Check::at_most(format!("lemma ratio max finite, {name}-branch"), maxima[1], f64::MAX));
        let swing = (maxima[1] / maxima[0]).max(maxima[0] / maxima[1]);
        checks.push(Check::at_most(format!("lemma ratio max change N -> 2N, {name}-branch"), swing, 2.0));
    }

    let grid = cfg.grid_spec()?;
    let (l1, l2) = cfg.laws()?;
    let op = RieszOperator::with_image_radius(&grid, RieszParams::new(alpha, grid.dim())?, cfg.solver.image_radius)?;
    let samples = perturbation_samples(&rb, &nb, 200, 0.9, seed)?;
    let th = sigma_threshold(&samples, &l1, &l2, &op, cfg.physics.sigma)?;
    checks.push(Check::at_most("C* finite", th.c_star, f64::MAX));
    checks.push(Check::at_most("sigma below 2/C*", cfg.physics.sigma, th.sigma_max()));
    checks.push(Check::at_least("lambda = 1 - sigma C*/2", th.lambda, 0.5));
    Ok(checks)
}

fn weak_form_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let eps = cfg.solver.epsilon;
    let top = cfg.grid.cells;
    let mut equality = Vec::new();
    let mut worst_diss = f64::NEG_INFINITY;
    for cells in [top / 4, top / 2, top] {
        let mut c = cfg.clone();
        c.solver.snapshots = cells + 1;
        let grid = c.grid_with(cells)?;
        let solver = EulerRiesz::new(&grid, c.solver_config(eps)?)?;
        let traj = solver.run(&well_prepared(&c, &grid)?, &c.output_times())?;
        let test = TrigTest::new(&grid, Some(0.8 * c.solver.t_end))?;
        let r = solver.weak_form_residual(&traj, &test)?;
        equality.push(r.max_equality());
        worst_diss = worst_diss.max(r.dissipation / traj.energies[0].total.abs());
    }
    Ok(vec![
        Check::at_least("weak-form equality residual order under (h, dt) refinement", min_order(&equality), 0.9),
        Check::at_most("weak energy-dissipation form (relative)", worst_diss, 1e-12),
    ])
}

fn inequality_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let eps = cfg.solver.epsilon;
    let top = cfg.grid.cells;
    let mut tol = Vec::new();
    for cells in [top / 4, top / 2, top] {
        let mut c = cfg.clone();
        c.solver.snapshots = cells + 1;
        let grid = c.grid_with(cells)?;
        let reference = build_reference(&c, &grid)?;
        let run = run_epsilon(&c, &grid, &reference.snapshots, eps)?;
        tol.push((-run.check.min_residual()).max(0.0));
    }
    let mut checks = vec![Check::at_most(
        "residual >= -tol at the finest level (tol)",
        tol[2],
        tol[0].max(f64::MIN_POSITIVE),
    )];
    if tol.iter().all(|&t| t > 0.0) {
        checks.push(Check::at_least("tol order under (h, dt) refinement", min_order(&tol), 0.9));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        let err = "bogus".parse::<Suite>().unwrap_err();
        assert!(err.to_string().contains("suite"));
    }

    #[test]
    fn checks_compare_against_bounds() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", 1.1, 1.0).passed);
        assert!(Check::at_least("b", 2.0, 1.0).passed);
        assert!(!Check::at_least("b", f64::NAN, 1.0).passed);
        let r = SuiteReport {
            suite: Suite::Kernel,
            checks: vec![Check::at_most("x", 2.0, 1.0)],
        };
        assert!(!r.passed());
        assert!(r.render().starts_with("FAIL x"));
    }

    #[test]
    fn orders_of_halving_errors() {
        let o = observed_orders(&[4.0, 1.0, 0.25]);
        assert_eq!(o, vec![2.0, 2.0]);
    }
}
