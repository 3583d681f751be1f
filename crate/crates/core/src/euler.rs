//! Finite-volume solver for the two-species Euler–Riesz system with friction,
//!
//! a (∂t m + ∇·(m⊗u)) + ∇p(ρ) + F = -b m,
//!
//! where (a, b) = (ε, 1) in diffusive scaling and (1, ζ) unscaled. The forces
//! are F₁ = σρ∇K∗(ρ-n) and F₂ = -σn∇K∗(ρ-n).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{central_diff, integrate, GridSpec, Parity, ScalarField, VectorField};
use crate::riesz::{RieszOperator, RieszParams, DEFAULT_IMAGE_RADIUS};
use crate::sum::Neumaier;
use crate::thermo::PressureLaw;

/// Conserved variables of both species at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub rho: ScalarField,
    /// Momentum ρu.
    pub m: VectorField,
    pub n: ScalarField,
    /// Momentum nv.
    pub w: VectorField,
    pub t: f64,
}

impl FluidState {
    pub fn new(rho: ScalarField, m: VectorField, n: ScalarField, w: VectorField, t: f64) -> Result<Self> {
        let g = *rho.grid();
        n.ensure_grid(&g)?;
        if m.grid() != &g || w.grid() != &g {
            return Err(Error::FieldMismatch("momentum grid differs from density grid".into()));
        }
        for (name, f) in [("rho", &rho), ("n", &n)] {
            if let Some(cell) = f.values().iter().position(|&v| v < 0.0) {
                let _ = name;
                return Err(Error::NegativeDensity {
                    cell,
                    value: f.values()[cell],
                });
            }
        }
        Ok(Self { rho, m, n, w, t })
    }

    /// Both species at rest.
    pub fn at_rest(rho: ScalarField, n: ScalarField) -> Result<Self> {
        let g = *rho.grid();
        Self::new(rho, VectorField::zeros(g), n, VectorField::zeros(g), 0.0)
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    /// u = m / max(ρ, floor).
    pub fn velocity1(&self, floor: f64) -> VectorField {
        velocity(&self.rho, &self.m, floor)
    }

    /// v = w / max(n, floor).
    pub fn velocity2(&self, floor: f64) -> VectorField {
        velocity(&self.n, &self.w, floor)
    }
}

pub(crate) fn velocity(rho: &ScalarField, m: &VectorField, floor: f64) -> VectorField {
    let comps = m
        .comps()
        .iter()
        .map(|c| {
            c.iter()
                .zip(rho.values())
                .map(|(mi, r)| mi / r.max(floor))
                .collect()
        })
        .collect();
    VectorField::from_vec_unchecked(*rho.grid(), comps)
}

/// Inertia and friction coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scaling {
    /// ε(∂t m + ∇·(m⊗u)) + … = -m.
    Diffusive { epsilon: f64 },
    /// ∂t m + ∇·(m⊗u) + … = -ζ m.
    Unscaled { zeta: f64 },
}

impl Scaling {
    /// Coefficient a of the inertial terms.
    pub fn inertia(&self) -> f64 {
        match *self {
            Scaling::Diffusive { epsilon } => epsilon,
            Scaling::Unscaled { .. } => 1.0,
        }
    }

    /// Coefficient b of the friction.
    pub fn friction(&self) -> f64 {
        match *self {
            Scaling::Diffusive { .. } => 1.0,
            Scaling::Unscaled { zeta } => zeta,
        }
    }
}

/// How the pressure is split between the transport and the relaxation step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Rusanov fluxes of the full Euler system with pressure; only the
    /// nonlocal force is integrated together with the friction.
    PressureInFlux,
    /// Pressureless transport; pressure gradient and nonlocal force are
    /// integrated with the friction, and the density flux carries a compact
    /// correction so that the stiff limit is a consistent scheme for the
    /// aggregation-diffusion system.
    #[default]
    PressureInRelaxation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub scaling: Scaling,
    pub sigma: f64,
    pub law1: PressureLaw,
    pub law2: PressureLaw,
    pub alpha: f64,
    pub cfl: f64,
    pub rho_floor: f64,
    pub t_end: f64,
    pub splitting: Splitting,
    pub image_radius: f64,
}

impl SolverConfig {
    /// Diffusively scaled configuration with default numerics.
    pub fn diffusive(epsilon: f64, sigma: f64, gamma1: f64, gamma2: f64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            scaling: Scaling::Diffusive { epsilon },
            sigma,
            law1: PressureLaw::new(gamma1)?,
            law2: PressureLaw::new(gamma2)?,
            alpha,
            cfl: 0.45,
            rho_floor: 1e-10,
            t_end: 1.0,
            splitting: Splitting::default(),
            image_radius: DEFAULT_IMAGE_RADIUS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.scaling {
            Scaling::Diffusive { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => {
                return Err(Error::param("epsilon", format!("{epsilon} must be positive")))
            }
            Scaling::Unscaled { zeta } if !(zeta > 0.0 && zeta.is_finite()) => {
                return Err(Error::param("zeta", format!("{zeta} must be positive")))
            }
            _ => {}
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", format!("{} must be nonnegative", self.sigma)));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::param("cfl", format!("{} is outside (0, 1)", self.cfl)));
        }
        if !(self.rho_floor > 0.0) {
            return Err(Error::param("rho_floor", format!("{} must be positive", self.rho_floor)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", format!("{} must be positive", self.t_end)));
        }
        Ok(())
    }

    pub fn with_splitting(mut self, splitting: Splitting) -> Self {
        self.splitting = splitting;
        self
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }
}

/// Integrated energy budget of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    /// a·½∫ρ|u|² + n|v|².
    pub kinetic: f64,
    pub internal1: f64,
    pub internal2: f64,
    pub interaction: f64,
    pub total: f64,
    /// ∫ρ|u|² + n|v|², without the friction coefficient.
    pub dissipation: f64,
    pub mass1: f64,
    pub mass2: f64,
}

/// Output of a time loop.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<FluidState>,
    pub energies: Vec<EnergyReport>,
    /// ∫₀^t b(∫ρ|u|² + n|v|²) at each snapshot, trapezoidal over the steps.
    pub dissipated: Vec<f64>,
    pub steps: usize,
    pub min_dt: f64,
    /// Largest increase of H between consecutive snapshots (≤ 0 when H is
    /// non-increasing).
    pub max_energy_increase: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &FluidState {
        self.snapshots.last().expect("trajectory is never empty")
    }
}

/// Per-cell quantities entering the interface fluxes of one species.
#[derive(Clone, Copy)]
struct Cell {
    rho: f64,
    m: [f64; 2],
    u: [f64; 2],
    p: f64,
    c: f64,
    dp: f64,
}

impl Cell {
    fn mirrored(&self, axis: usize) -> Cell {
        let mut g = *self;
        g.m[axis] = -g.m[axis];
        g.u[axis] = -g.u[axis];
        g.dp = -g.dp;
        g
    }
}

/// The solver for a fixed grid and configuration.
#[derive(Debug)]
pub struct EulerRiesz {
    grid: GridSpec,
    config: SolverConfig,
    op: Option<RieszOperator>,
}

impl EulerRiesz {
    pub fn new(grid: &GridSpec, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let params = RieszParams::new(config.alpha, grid.dim())?;
        let op = if config.sigma > 0.0 {
            params.require_gradient()?;
            Some(RieszOperator::with_image_radius(grid, params, config.image_radius)?)
        } else {
            None
        };
        Ok(Self {
            grid: *grid,
            config,
            op,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn operator(&self) -> Option<&RieszOperator> {
        self.op.as_ref()
    }

    fn check_state(&self, s: &FluidState) -> Result<()> {
        s.rho.ensure_grid(&self.grid)?;
        s.n.ensure_grid(&self.grid)
    }

    /// (F₁, F₂) and K∗(ρ-n); zero forces when σ = 0.
    pub fn forces(&self, rho: &ScalarField, n: &ScalarField) -> Result<(VectorField, VectorField, ScalarField)> {
        match &self.op {
            None => Ok((
                VectorField::zeros(self.grid),
                VectorField::zeros(self.grid),
                ScalarField::zeros(self.grid),
            )),
            Some(op) => {
                let xi = rho.sub(n)?;
                let (pot, grad) = op.conv_and_grad(&xi)?;
                let s = self.config.sigma;
                let f1 = grad.scale_by(&rho.scale(s))?;
                let f2 = grad.scale_by(&n.scale(-s))?;
                Ok((f1, f2, pot))
            }
        }
    }

    fn theta(&self, dt: f64) -> f64 {
        let a = self.config.scaling.inertia();
        let b = self.config.scaling.friction();
        (-(b * dt) / a).exp()
    }

    /// Largest admissible step for the current state.
    pub fn stable_dt(&self, state: &FluidState) -> f64 {
        let a = self.config.scaling.inertia();
        let b = self.config.scaling.friction();
        let cfl = self.config.cfl;
        let d = self.grid.dim();
        let floor = self.config.rho_floor;
        let h: Vec<f64> = self.grid.spacing().to_vec();
        let mut adv = 0.0_f64;
        let mut c2max = 0.0_f64;
        for (rho, m, law) in [
            (&state.rho, &state.m, &self.config.law1),
            (&state.n, &state.w, &self.config.law2),
        ] {
            for i in 0..self.grid.len() {
                let r = rho.values()[i];
                let c2 = law.dp(r);
                c2max = c2max.max(c2);
                let c = match self.config.splitting {
                    Splitting::PressureInFlux => (c2 / a).sqrt(),
                    Splitting::PressureInRelaxation => 0.0,
                };
                let mut rate = 0.0;
                for k in 0..d {
                    let u = m.comp(k)[i] / r.max(floor);
                    rate += (u.abs() + c) / h[k];
                }
                adv = adv.max(rate);
            }
        }
        let mut dt = if adv > 0.0 { cfl / adv } else { f64::INFINITY };
        if self.config.splitting == Splitting::PressureInRelaxation && c2max > 0.0 {
            let q: f64 = h.iter().map(|hk| 4.0 / (hk * hk)).sum();
            let g = |t: f64| {
                let th = (-(b * t) / a).exp();
                (1.0 - th) * (c2max / b) * t * q - 2.0 * cfl * (1.0 + th)
            };
            let mut hi = 2.0 * cfl * b / (c2max * q);
            while g(hi) <= 0.0 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if g(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            dt = dt.min(lo);
        }
        dt
    }

    fn cells(&self, rho: &[f64], m: &VectorField, law: &PressureLaw, axis: usize) -> Vec<Cell> {
        let a = self.config.scaling.inertia();
        let floor = self.config.rho_floor;
        let d = self.grid.dim();
        let p: Vec<f64> = rho.iter().map(|&r| law.p(r)).collect();
        let dp = match self.config.splitting {
            Splitting::PressureInRelaxation => central_diff(&self.grid, &p, axis, Parity::Even),
            Splitting::PressureInFlux => vec![0.0; rho.len()],
        };
        (0..rho.len())
            .map(|i| {
                let r = rho[i];
                let mut mv = [0.0; 2];
                let mut u = [0.0; 2];
                for k in 0..d {
                    mv[k] = m.comp(k)[i];
                    u[k] = mv[k] / r.max(floor);
                }
                let c = match self.config.splitting {
                    Splitting::PressureInFlux => (law.dp(r) / a).sqrt(),
                    Splitting::PressureInRelaxation => 0.0,
                };
                Cell {
                    rho: r,
                    m: mv,
                    u,
                    p: p[i],
                    c,
                    dp: dp[i],
                }
            })
            .collect()
    }

    /// Numerical flux (density, momentum) through a face normal to `axis`.
    fn face_flux(&self, axis: usize, l: &Cell, r: &Cell, theta: f64) -> (f64, [f64; 2]) {
        let a = self.config.scaling.inertia();
        let b = self.config.scaling.friction();
        let d = self.grid.dim();
        let with_p = self.config.splitting == Splitting::PressureInFlux;
        let lam = (l.u[axis].abs() + l.c).max(r.u[axis].abs() + r.c);
        let mut fr = 0.5 * (l.m[axis] + r.m[axis]) - 0.5 * lam * (r.rho - l.rho);
        if !with_p {
            let h = self.grid.h(axis);
            fr += (1.0 - theta) / b * (0.5 * (l.dp + r.dp) - (r.p - l.p) / h);
        }
        let mut fm = [0.0; 2];
        for j in 0..d {
            let mut fl = l.m[j] * l.u[axis];
            let mut frr = r.m[j] * r.u[axis];
            if with_p && j == axis {
                fl += l.p / a;
                frr += r.p / a;
            }
            fm[j] = 0.5 * (fl + frr) - 0.5 * lam * (r.m[j] - l.m[j]);
        }
        (fr, fm)
    }

    /// Transport substep of one species.
    fn transport(
        &self,
        rho: &ScalarField,
        m: &VectorField,
        law: &PressureLaw,
        dt: f64,
        theta: f64,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let g = &self.grid;
        let d = g.dim();
        let len = g.len();
        let mut new_rho = rho.values().to_vec();
        let mut new_m: Vec<Vec<f64>> = m.comps().to_vec();
        for axis in 0..d {
            let cells = self.cells(rho.values(), m, law, axis);
            // flux through the right face of each cell
            let right: Vec<(f64, [f64; 2])> = (0..len)
                .into_par_iter()
                .map(|i| {
                    let l = &cells[i];
                    match g.neighbor(i, axis, 1) {
                        Some(j) => self.face_flux(axis, l, &cells[j], theta),
                        None => self.face_flux(axis, l, &l.mirrored(axis), theta),
                    }
                })
                .collect();
            let ratio = dt / g.h(axis);
            for i in 0..len {
                let left = match g.neighbor(i, axis, -1) {
                    Some(j) => right[j],
                    None => {
                        let c = &cells[i];
                        self.face_flux(axis, &c.mirrored(axis), c, theta)
                    }
                };
                new_rho[i] -= ratio * (right[i].0 - left.0);
                for k in 0..d {
                    new_m[k][i] -= ratio * (right[i].1[k] - left.1[k]);
                }
            }
        }
        if let Some(cell) = new_rho.iter().position(|&v| v < 0.0 || !v.is_finite()) {
            let value = new_rho[cell];
            return Err(if value.is_finite() {
                Error::NegativeDensity { cell, value }
            } else {
                Error::NonFinite { cell, value }
            });
        }
        for c in &new_m {
            if let Some(cell) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { cell, value: c[cell] });
            }
        }
        Ok((new_rho, new_m))
    }

    /// Force and friction substep with frozen densities:
    /// m ← -G/b + (m + G/b)e^{-(b/a)dt}.
    pub fn relax(&self, state: &FluidState, dt: f64) -> Result<FluidState> {
        self.check_state(state)?;
        let b = self.config.scaling.friction();
        let theta = self.theta(dt);
        let (f1, f2, _) = self.forces(&state.rho, &state.n)?;
        let d = self.grid.dim();
        let mut out = state.clone();
        for (rho, law, force, mom) in [
            (&state.rho, &self.config.law1, &f1, &mut out.m),
            (&state.n, &self.config.law2, &f2, &mut out.w),
        ] {
            let dp = match self.config.splitting {
                Splitting::PressureInRelaxation => {
                    let p: Vec<f64> = rho.values().iter().map(|&r| law.p(r)).collect();
                    (0..d)
                        .map(|k| central_diff(&self.grid, &p, k, Parity::Even))
                        .collect()
                }
                Splitting::PressureInFlux => vec![vec![0.0; self.grid.len()]; d],
            };
            for k in 0..d {
                let fk = force.comp(k);
                let mk = mom.comp_mut(k);
                for i in 0..mk.len() {
                    let gb = (dp[k][i] + fk[i]) / b;
                    mk[i] = -gb + (mk[i] + gb) * theta;
                }
            }
        }
        out.t = state.t + dt;
        Ok(out)
    }

    /// One full step of size `dt`.
    pub fn step(&self, state: &FluidState, dt: f64) -> Result<FluidState> {
        self.check_state(state)?;
        let limit = self.stable_dt(state);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        let theta = self.theta(dt);
        // Strang splitting: half relaxation, transport, half relaxation
        let mut start = self.relax(state, 0.5 * dt)?;
        start.t = state.t;
        let (r1, m1) = self.transport(&start.rho, &start.m, &self.config.law1, dt, theta)?;
        let (r2, m2) = self.transport(&start.n, &start.w, &self.config.law2, dt, theta)?;
        let mid = FluidState {
            rho: ScalarField::from_vec_unchecked(self.grid, r1),
            m: VectorField::from_vec_unchecked(self.grid, m1),
            n: ScalarField::from_vec_unchecked(self.grid, r2),
            w: VectorField::from_vec_unchecked(self.grid, m2),
            t: state.t,
        };
        let mut out = self.relax(&mid, 0.5 * dt)?;
        out.t = state.t + dt;
        Ok(out)
    }

    /// ∫ρ|u|² + n|v|² with floored velocities and unfloored densities.
    pub fn dissipation_rate(&self, state: &FluidState) -> f64 {
        let floor = self.config.rho_floor;
        let d = self.grid.dim();
        let mut acc = Neumaier::new();
        for (rho, m) in [(&state.rho, &state.m), (&state.n, &state.w)] {
            for i in 0..self.grid.len() {
                let r = rho.values()[i];
                let rf = r.max(floor);
                let m2: f64 = (0..d).map(|k| m.comp(k)[i].powi(2)).sum();
                acc.add(r * m2 / (rf * rf));
            }
        }
        acc.total() * self.grid.cell_volume()
    }

    pub fn total_energy(&self, state: &FluidState) -> Result<EnergyReport> {
        self.check_state(state)?;
        let a = self.config.scaling.inertia();
        let diss = self.dissipation_rate(state);
        let internal1 = integrate(&state.rho.map(|r| self.config.law1.h(r)))?;
        let internal2 = integrate(&state.n.map(|r| self.config.law2.h(r)))?;
        let interaction = match &self.op {
            Some(op) => op.interaction_energy(&state.rho.sub(&state.n)?, self.config.sigma)?,
            None => 0.0,
        };
        let kinetic = 0.5 * a * diss;
        Ok(EnergyReport {
            t: state.t,
            kinetic,
            internal1,
            internal2,
            interaction,
            total: kinetic + internal1 + internal2 + interaction,
            dissipation: diss,
            mass1: integrate(&state.rho)?,
            mass2: integrate(&state.n)?,
        })
    }

    /// Adaptive time loop recording the states at `output_times`.
    pub fn run(&self, initial: &FluidState, output_times: &[f64]) -> Result<Trajectory> {
        self.run_inner(initial, output_times, None)
    }

    /// Time loop with a fixed step, shortened only to land on output times.
    pub fn run_fixed_dt(&self, initial: &FluidState, dt: f64, output_times: &[f64]) -> Result<Trajectory> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("{dt} must be positive")));
        }
        self.run_inner(initial, output_times, Some(dt))
    }

    fn run_inner(&self, initial: &FluidState, output_times: &[f64], fixed: Option<f64>) -> Result<Trajectory> {
        self.check_state(initial)?;
        let mut prev_t = initial.t;
        for &t in output_times {
            if !(t >= prev_t) {
                return Err(Error::param("output_times", "times must be nondecreasing and not before the initial time"));
            }
            prev_t = t;
        }
        let b = self.config.scaling.friction();
        let e0 = self.total_energy(initial)?;
        let mut state = initial.clone();
        let mut d_prev = e0.dissipation;
        let mut dissipated = 0.0;
        let mut snapshots = Vec::with_capacity(output_times.len());
        let mut energies = Vec::with_capacity(output_times.len());
        let mut cum = Vec::with_capacity(output_times.len());
        let mut steps = 0;
        let mut min_dt = f64::INFINITY;
        let mut max_inc = f64::NEG_INFINITY;
        let mut last_total = e0.total;
        for &target in output_times {
            while state.t < target {
                let remaining = target - state.t;
                let mut dt = match fixed {
                    Some(dt) => dt,
                    None => self.stable_dt(&state),
                };
                if dt >= remaining * (1.0 - 1e-12) {
                    dt = remaining;
                }
                let mut next = self.step(&state, dt)?;
                if dt == remaining {
                    next.t = target;
                }
                let d_next = self.dissipation_rate(&next);
                dissipated += 0.5 * dt * b * (d_prev + d_next);
                d_prev = d_next;
                min_dt = min_dt.min(dt);
                steps += 1;
                state = next;
            }
            let e = self.total_energy(&state)?;
            if e.total > 1e3 * e0.total.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::EnergyBlowup {
                    t: state.t,
                    current: e.total,
                    initial: e0.total,
                });
            }
            if !energies.is_empty() || target > initial.t {
                max_inc = max_inc.max(e.total - last_total);
            }
            last_total = e.total;
            snapshots.push(state.clone());
            energies.push(e);
            cum.push(dissipated);
        }
        Ok(Trajectory {
            snapshots,
            energies,
            dissipated: cum,
            steps,
            min_dt,
            max_energy_increase: max_inc,
        })
    }
}

/// A separable test function χ(t)·φ(x) with a scalar and a vector part.
pub trait WeakTest: Sync {
    /// (χ(t), χ'(t)).
    fn time(&self, t: f64) -> (f64, f64);
    /// (φ(x), ∇φ(x)).
    fn scalar(&self, x: [f64; 2]) -> (f64, [f64; 2]);
    /// (φ̃(x), ∂_j φ̃_i(x)).
    fn vector(&self, x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]);
}

/// Trigonometric test functions adapted to the grid's boundary, with a
/// smooth cutoff in time (or χ ≡ 1 when `cutoff` is `None`).
#[derive(Clone, Debug)]
pub struct TrigTest {
    lower: [f64; 2],
    length: [f64; 2],
    dim: usize,
    walls: bool,
    cutoff: Option<f64>,
}

impl TrigTest {
    pub fn new(grid: &GridSpec, cutoff: Option<f64>) -> Result<Self> {
        if let Some(c) = cutoff {
            if !(c > 0.0) {
                return Err(Error::param("cutoff", format!("{c} must be positive")));
            }
        }
        let d = grid.dim();
        let mut lower = [0.0; 2];
        let mut length = [1.0; 2];
        for k in 0..d {
            lower[k] = grid.lower()[k];
            length[k] = grid.length(k);
        }
        Ok(Self {
            lower,
            length,
            dim: d,
            walls: !grid.is_periodic(),
            cutoff,
        })
    }
}

impl WeakTest for TrigTest {
    fn time(&self, t: f64) -> (f64, f64) {
        match self.cutoff {
            None => (1.0, 0.0),
            Some(c) if t >= c => (0.0, 0.0),
            Some(c) => {
                // ((1 + cos(πt/c))/2)²
                let a = std::f64::consts::PI / c;
                let q = 0.5 * (1.0 + (a * t).cos());
                (q * q, -q * a * (a * t).sin())
            }
        }
    }

    fn scalar(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let tau = 2.0 * std::f64::consts::PI;
        let kx = tau / self.length[0];
        let sx = kx * (x[0] - self.lower[0]);
        if self.dim == 1 {
            return (1.0 + 0.5 * sx.cos(), [-0.5 * kx * sx.sin(), 0.0]);
        }
        let ky = tau / self.length[1];
        let sy = ky * (x[1] - self.lower[1]);
        let v = 1.0 + 0.5 * sx.cos() * (sy + 0.3).sin();
        (
            v,
            [-0.5 * kx * sx.sin() * (sy + 0.3).sin(), 0.5 * ky * sx.cos() * (sy + 0.3).cos()],
        )
    }

    fn vector(&self, x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let pi = std::f64::consts::PI;
        if self.dim == 1 {
            // vanishes at both walls
            let k = if self.walls { pi } else { 2.0 * pi } / self.length[0];
            let s = k * (x[0] - self.lower[0]);
            return ([s.sin(), 0.0], [[k * s.cos(), 0.0], [0.0, 0.0]]);
        }
        let kx = 2.0 * pi / self.length[0];
        let ky = 2.0 * pi / self.length[1];
        let sx = kx * (x[0] - self.lower[0]);
        let sy = ky * (x[1] - self.lower[1]);
        let v = [sx.sin() * sy.cos(), 0.5 * (sx + sy).cos()];
        let j = [
            [kx * sx.cos() * sy.cos(), -ky * sx.sin() * sy.sin()],
            [-0.5 * kx * (sx + sy).sin(), -0.5 * ky * (sx + sy).sin()],
        ];
        (v, j)
    }
}

/// Residuals of the weak formulation: two continuity and two momentum
/// balances, and the energy-dissipation form (≤ 0 for an admissible run).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct WeakResiduals {
    pub continuity1: f64,
    pub momentum1: f64,
    pub continuity2: f64,
    pub momentum2: f64,
    pub dissipation: f64,
}

impl WeakResiduals {
    /// Largest magnitude of the four equality residuals.
    pub fn max_equality(&self) -> f64 {
        [self.continuity1, self.momentum1, self.continuity2, self.momentum2]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Space integrals of one snapshot needed by the weak forms.
struct SnapshotIntegrals {
    rho_phi: [f64; 2],
    flux_grad_phi: [f64; 2],
    m_phi: [f64; 2],
    rest: [f64; 2],
    fric: [f64; 2],
}

impl EulerRiesz {
    fn snapshot_integrals(&self, s: &FluidState, test: &dyn WeakTest) -> Result<SnapshotIntegrals> {
        let a = self.config.scaling.inertia();
        let d = self.grid.dim();
        let (f1, f2, _) = self.forces(&s.rho, &s.n)?;
        let u = s.velocity1(self.config.rho_floor);
        let v = s.velocity2(self.config.rho_floor);
        let vol = self.grid.cell_volume();
        let mut out = SnapshotIntegrals {
            rho_phi: [0.0; 2],
            flux_grad_phi: [0.0; 2],
            m_phi: [0.0; 2],
            rest: [0.0; 2],
            fric: [0.0; 2],
        };
        let species = [
            (&s.rho, &s.m, &u, &f1, &self.config.law1),
            (&s.n, &s.w, &v, &f2, &self.config.law2),
        ];
        for (sp, (rho, m, vel, force, law)) in species.into_iter().enumerate() {
            let mut acc = [Neumaier::new(), Neumaier::new(), Neumaier::new(), Neumaier::new(), Neumaier::new()];
            for i in 0..self.grid.len() {
                let x = self.grid.center(i);
                let (phi, gphi) = test.scalar(x);
                let (pv, jac) = test.vector(x);
                let r = rho.values()[i];
                acc[0].add(r * phi);
                let mut mg = 0.0;
                let mut mp = 0.0;
                let mut conv = 0.0;
                let mut div = 0.0;
                let mut fp = 0.0;
                for k in 0..d {
                    let mk = m.comp(k)[i];
                    mg += mk * gphi[k];
                    mp += mk * pv[k];
                    fp += force.comp(k)[i] * pv[k];
                    div += jac[k][k];
                    for j in 0..d {
                        conv += mk * vel.comp(j)[i] * jac[k][j];
                    }
                }
                acc[1].add(mg);
                acc[2].add(a * mp);
                acc[3].add(a * conv + law.p(r) * div - fp);
                acc[4].add(mp);
            }
            out.rho_phi[sp] = acc[0].total() * vol;
            out.flux_grad_phi[sp] = acc[1].total() * vol;
            out.m_phi[sp] = acc[2].total() * vol;
            out.rest[sp] = acc[3].total() * vol;
            out.fric[sp] = acc[4].total() * vol;
        }
        Ok(out)
    }

    /// Evaluates the weak formulation on a trajectory that starts at the
    /// initial data, with time integrals by the trapezoid rule over the
    /// snapshots. Terms at the final time are included, so χ need not vanish
    /// there.
    pub fn weak_form_residual(&self, traj: &Trajectory, test: &dyn WeakTest) -> Result<WeakResiduals> {
        let snaps = &traj.snapshots;
        if snaps.len() < 2 {
            return Err(Error::param("trajectory", "at least two snapshots are needed"));
        }
        if !self.grid.is_periodic() {
            for x in [self.grid.lower()[0], self.grid.upper()[0]] {
                let (pv, _) = test.vector([x, 0.0]);
                if pv[0].abs() > 1e-12 {
                    return Err(Error::param("test", format!("vector test function is not tangential at x = {x}")));
                }
            }
        }
        let b = self.config.scaling.friction();
        let ints = snaps
            .par_iter()
            .map(|s| self.snapshot_integrals(s, test))
            .collect::<Result<Vec<_>>>()?;
        let mut cont = [Neumaier::new(), Neumaier::new()];
        let mut mom = [Neumaier::new(), Neumaier::new()];
        let mut diss = Neumaier::new();
        for k in 0..snaps.len() - 1 {
            let dt = snaps[k + 1].t - snaps[k].t;
            for (s, e) in [(k, &traj.energies[k]), (k + 1, &traj.energies[k + 1])] {
                let w = 0.5 * dt;
                let (chi, dchi) = test.time(snaps[s].t);
                let it = &ints[s];
                for sp in 0..2 {
                    cont[sp].add(w * (it.rho_phi[sp] * dchi + it.flux_grad_phi[sp] * chi));
                    mom[sp].add(w * (it.m_phi[sp] * dchi + (it.rest[sp] - b * it.fric[sp]) * chi));
                }
                diss.add(w * (-e.total * dchi + b * e.dissipation * chi));
            }
        }
        let first = &ints[0];
        let last = &ints[snaps.len() - 1];
        let (chi0, _) = test.time(snaps[0].t);
        let (chi_t, _) = test.time(snaps[snaps.len() - 1].t);
        let h0 = traj.energies[0].total;
        let ht = traj.energies[snaps.len() - 1].total;
        Ok(WeakResiduals {
            continuity1: cont[0].total() + chi0 * first.rho_phi[0] - chi_t * last.rho_phi[0],
            momentum1: mom[0].total() + chi0 * first.m_phi[0] - chi_t * last.m_phi[0],
            continuity2: cont[1].total() + chi0 * first.rho_phi[1] - chi_t * last.rho_phi[1],
            momentum2: mom[1].total() + chi0 * first.m_phi[1] - chi_t * last.m_phi[1],
            dissipation: diss.total() - chi0 * h0 + chi_t * ht,
        })
    }
}

#[cfg(test)]
mod tests;
