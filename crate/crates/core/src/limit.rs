//! Explicit finite-volume solver for the aggregation-diffusion limit
//!
//! ∂tρ̄ = ∇·(∇p₁(ρ̄) + σρ̄∇K∗(ρ̄-n̄)),  ∂tn̄ = ∇·(∇p₂(n̄) - σn̄∇K∗(ρ̄-n̄)),
//!
//! written as continuity equations ∂tρ̄ + ∇·(ρ̄ū) = 0 with the auxiliary
//! velocities ū = -(∇h₁'(ρ̄) + σ∇K∗(ρ̄-n̄)) and v̄ = -(∇h₂'(n̄) - σ∇K∗(ρ̄-n̄)).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    central_diff, integrate, jacobian, restrict, restrict_tensor, restrict_vector, GridSpec, Parity, ScalarField,
    VectorField,
};
use crate::relent::RefSnapshot;
use crate::riesz::{RieszOperator, RieszParams, DEFAULT_IMAGE_RADIUS};
use crate::thermo::PressureLaw;

#[derive(Clone, Debug, PartialEq)]
pub struct LimitConfig {
    pub sigma: f64,
    pub law1: PressureLaw,
    pub law2: PressureLaw,
    pub alpha: f64,
    pub cfl: f64,
    pub image_radius: f64,
}

impl LimitConfig {
    pub fn new(sigma: f64, gamma1: f64, gamma2: f64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            sigma,
            law1: PressureLaw::new(gamma1)?,
            law2: PressureLaw::new(gamma2)?,
            alpha,
            cfl: 0.8,
            image_radius: DEFAULT_IMAGE_RADIUS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", format!("{} must be nonnegative", self.sigma)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::param("cfl", format!("{} is outside (0, 1]", self.cfl)));
        }
        Ok(())
    }
}

/// Cell-centered auxiliary velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxVelocities {
    pub u: VectorField,
    pub v: VectorField,
    /// Largest normal velocity at a wall, linearly extrapolated from the two
    /// nearest interior faces before the wall flux is set to zero (0 on
    /// periodic grids).
    pub boundary_normal: f64,
}

/// Flux through the right face of every cell along each axis, for both
/// species. Wall faces carry zero flux.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFluxes {
    pub species1: Vec<Vec<f64>>,
    pub species2: Vec<Vec<f64>>,
}

/// Face density m = Δp/Δh', for which m·Δh' = Δp.
/// Bregman mean Δp/Δh′ of the face densities from precomputed p and h′.
fn face_mean(law: &PressureLaw, (l, r): (f64, f64), (pl, pr): (f64, f64), (hl, hr): (f64, f64)) -> f64 {
    let dh = hr - hl;
    if law.gamma() == 2.0 || dh.abs() <= 1e-12 * hl.max(hr).max(f64::MIN_POSITIVE) {
        0.5 * (l + r)
    } else {
        (pr - pl) / dh
    }
}

#[derive(Debug)]
pub struct AggregationDiffusion {
    grid: GridSpec,
    config: LimitConfig,
    op: Option<RieszOperator>,
}

/// Which factorization of the face flux to assemble.
#[derive(Clone, Copy, PartialEq)]
enum Form {
    Pressure,
    Velocity,
}

impl AggregationDiffusion {
    pub fn new(grid: &GridSpec, config: LimitConfig) -> Result<Self> {
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

    pub fn config(&self) -> &LimitConfig {
        &self.config
    }

    fn kernel_gradient(&self, rho: &ScalarField, n: &ScalarField) -> Result<VectorField> {
        match &self.op {
            Some(op) => op.conv_grad(&rho.sub(n)?),
            None => Ok(VectorField::zeros(self.grid)),
        }
    }

    fn check(&self, rho: &ScalarField, n: &ScalarField) -> Result<()> {
        rho.ensure_grid(&self.grid)?;
        n.ensure_grid(&self.grid)
    }

    /// ū and v̄ at cell centers by centered differences.
    pub fn aux_velocities(&self, rho: &ScalarField, n: &ScalarField) -> Result<AuxVelocities> {
        self.check(rho, n)?;
        for f in [rho, n] {
            if let Some(cell) = f.values().iter().position(|&v| v <= 0.0) {
                return Err(Error::NegativeDensity {
                    cell,
                    value: f.values()[cell],
                });
            }
        }
        let g = self.kernel_gradient(rho, n)?;
        let s = self.config.sigma;
        let d = self.grid.dim();
        let mut out = Vec::new();
        for (f, law, sign) in [(rho, &self.config.law1, 1.0), (n, &self.config.law2, -1.0)] {
            let hp: Vec<f64> = f.values().iter().map(|&r| law.dh(r)).collect();
            let comps: Vec<Vec<f64>> = (0..d)
                .map(|k| {
                    central_diff(&self.grid, &hp, k, Parity::Even)
                        .into_iter()
                        .zip(g.comp(k))
                        .map(|(a, gk)| -(a + sign * s * gk))
                        .collect()
                })
                .collect();
            out.push(VectorField::new(self.grid, comps)?);
        }
        let mut boundary_normal = 0.0_f64;
        if !self.grid.is_periodic() && self.grid.len() >= 3 {
            // Face velocities next to each wall, extrapolated onto the wall.
            let last = self.grid.len() - 1;
            let h = self.grid.h(0);
            let gk = g.comp(0);
            for (f, law, sign) in [(rho, &self.config.law1, 1.0), (n, &self.config.law2, -1.0)] {
                let vals = f.values();
                let face = |i: usize| -((law.dh(vals[i + 1]) - law.dh(vals[i])) / h + sign * s * 0.5 * (gk[i] + gk[i + 1]));
                boundary_normal = boundary_normal
                    .max((2.0 * face(0) - face(1)).abs())
                    .max((2.0 * face(last - 1) - face(last - 2)).abs());
            }
        }
        let v = out.pop().expect("two species");
        let u = out.pop().expect("two species");
        Ok(AuxVelocities {
            u,
            v,
            boundary_normal,
        })
    }

    fn assemble(&self, rho: &ScalarField, n: &ScalarField, g: &VectorField, form: Form) -> FaceFluxes {
        let s = self.config.sigma;
        let grid = &self.grid;
        let mut fluxes = Vec::new();
        for (f, law, sign) in [(rho, &self.config.law1, 1.0), (n, &self.config.law2, -1.0)] {
            let vals = f.values();
            let p: Vec<f64> = vals.par_iter().map(|&r| law.p(r)).collect();
            let ratio = law.gamma() / (law.gamma() - 1.0);
            let hp: Vec<f64> = vals
                .iter()
                .zip(&p)
                .map(|(&r, &pr)| if r > 0.0 { ratio * pr / r } else { law.dh(r) })
                .collect();
            let per_axis: Vec<Vec<f64>> = (0..grid.dim())
                .map(|k| {
                    let h = grid.h(k);
                    let gk = g.comp(k);
                    (0..grid.len())
                        .into_par_iter()
                        .map(|i| match grid.neighbor(i, k, 1) {
                            None => 0.0,
                            Some(j) => {
                                let mean = face_mean(law, (vals[i], vals[j]), (p[i], p[j]), (hp[i], hp[j]));
                                let drift = sign * s * 0.5 * (gk[i] + gk[j]);
                                match form {
                                    Form::Pressure => -((p[j] - p[i]) / h + mean * drift),
                                    Form::Velocity => mean * -((hp[j] - hp[i]) / h + drift),
                                }
                            }
                        })
                        .collect()
                })
                .collect();
            fluxes.push(per_axis);
        }
        let species2 = fluxes.pop().expect("two species");
        let species1 = fluxes.pop().expect("two species");
        FaceFluxes { species1, species2 }
    }

    /// Face fluxes -(∇p + σρ̄∇K∗ξ) used by the time step.
    pub fn face_fluxes(&self, rho: &ScalarField, n: &ScalarField) -> Result<FaceFluxes> {
        self.check(rho, n)?;
        let g = self.kernel_gradient(rho, n)?;
        Ok(self.assemble(rho, n, &g, Form::Pressure))
    }

    /// The same fluxes factored as face density times face velocity.
    pub fn face_fluxes_from_velocities(&self, rho: &ScalarField, n: &ScalarField) -> Result<FaceFluxes> {
        self.check(rho, n)?;
        let g = self.kernel_gradient(rho, n)?;
        Ok(self.assemble(rho, n, &g, Form::Velocity))
    }

    /// Parabolic step limit, with a drift contribution when σ > 0.
    pub fn stable_dt(&self, rho: &ScalarField, n: &ScalarField) -> Result<f64> {
        self.check(rho, n)?;
        let g = self.kernel_gradient(rho, n)?;
        Ok(self.stable_dt_with(rho, n, &g))
    }

    fn stable_dt_with(&self, rho: &ScalarField, n: &ScalarField, g: &VectorField) -> f64 {
        // p' is increasing, so the largest density decides
        let c2 = self.config.law1.dp(rho.max()).max(self.config.law2.dp(n.max()));
        let inv_h2: f64 = self.grid.spacing().iter().map(|h| 1.0 / (h * h)).sum();
        let inv_h: f64 = self.grid.spacing().iter().map(|h| 1.0 / h).sum();
        let rate = 2.0 * c2 * inv_h2 + self.config.sigma * g.max_abs() * inv_h;
        if rate > 0.0 {
            self.config.cfl / rate
        } else {
            f64::INFINITY
        }
    }

    /// Conservative explicit update.
    pub fn step(&self, rho: &ScalarField, n: &ScalarField, dt: f64) -> Result<(ScalarField, ScalarField)> {
        self.check(rho, n)?;
        let g = self.kernel_gradient(rho, n)?;
        let limit = self.stable_dt_with(rho, n, &g);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        self.update(rho, n, &g, dt)
    }

    /// One step of at most `remaining`, returning the step taken.
    fn advance(&self, rho: &ScalarField, n: &ScalarField, remaining: f64) -> Result<(ScalarField, ScalarField, f64)> {
        let g = self.kernel_gradient(rho, n)?;
        let mut dt = self.stable_dt_with(rho, n, &g);
        if dt >= remaining * (1.0 - 1e-12) {
            dt = remaining;
        }
        let (r1, n1) = self.update(rho, n, &g, dt)?;
        Ok((r1, n1, dt))
    }

    fn update(&self, rho: &ScalarField, n: &ScalarField, g: &VectorField, dt: f64) -> Result<(ScalarField, ScalarField)> {
        let fl = self.assemble(rho, n, g, Form::Pressure);
        let grid = &self.grid;
        let mut out = Vec::new();
        for (f, flux) in [(rho, &fl.species1), (n, &fl.species2)] {
            let mut vals = f.values().to_vec();
            for (k, fk) in flux.iter().enumerate() {
                let ratio = dt / grid.h(k);
                for i in 0..grid.len() {
                    let left = grid.neighbor(i, k, -1).map_or(0.0, |j| fk[j]);
                    vals[i] -= ratio * (fk[i] - left);
                }
            }
            if let Some(cell) = vals.iter().position(|&v| !(v >= 0.0)) {
                let value = vals[cell];
                return Err(if value.is_finite() {
                    Error::NegativeDensity { cell, value }
                } else {
                    Error::NonFinite { cell, value }
                });
            }
            out.push(ScalarField::from_vec_unchecked(*grid, vals));
        }
        let n1 = out.pop().expect("two species");
        let r1 = out.pop().expect("two species");
        Ok((r1, n1))
    }

    /// Runs from `(rho0, n0)` at `t0`, recording the densities and the
    /// auxiliary velocities at `output_times`.
    pub fn run(&self, rho0: &ScalarField, n0: &ScalarField, t0: f64, output_times: &[f64]) -> Result<ReferenceSolution> {
        self.check(rho0, n0)?;
        let mut t = t0;
        let mut rho = rho0.clone();
        let mut n = n0.clone();
        let positive = rho.min() > 0.0 && n.min() > 0.0;
        let mut sol = ReferenceSolution {
            grid: self.grid,
            times: Vec::new(),
            rho: Vec::new(),
            n: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
            delta_min: f64::INFINITY,
            delta_time: t0,
            m_max: 0.0,
            steps: 0,
            mass0: [integrate(rho0)?, integrate(n0)?],
        };
        let track = |rho: &ScalarField, n: &ScalarField, t: f64, sol: &mut ReferenceSolution| {
            let lo = rho.min().min(n.min());
            if lo < sol.delta_min {
                sol.delta_min = lo;
                sol.delta_time = t;
            }
            sol.m_max = sol.m_max.max(rho.max()).max(n.max());
        };
        track(&rho, &n, t, &mut sol);
        for &target in output_times {
            if target < t {
                return Err(Error::param("output_times", "times must be nondecreasing and not before t0"));
            }
            while t < target {
                let remaining = target - t;
                let (r1, n1, dt) = self.advance(&rho, &n, remaining)?;
                rho = r1;
                n = n1;
                t = if dt == remaining { target } else { t + dt };
                sol.steps += 1;
                track(&rho, &n, t, &mut sol);
            }
            let (u, v) = if positive && rho.min() > 0.0 && n.min() > 0.0 {
                let aux = self.aux_velocities(&rho, &n)?;
                (aux.u, aux.v)
            } else {
                (VectorField::zeros(self.grid), VectorField::zeros(self.grid))
            };
            sol.times.push(t);
            sol.rho.push(rho.clone());
            sol.n.push(n.clone());
            sol.u.push(u);
            sol.v.push(v);
        }
        Ok(sol)
    }
}

impl AggregationDiffusion {
    /// Wraps externally supplied density snapshots, deriving ū and v̄ from them.
    pub fn reference_from(&self, times: Vec<f64>, rho: Vec<ScalarField>, n: Vec<ScalarField>) -> Result<ReferenceSolution> {
        if times.len() != rho.len() || times.len() != n.len() || times.is_empty() {
            return Err(Error::param("snapshots", "times and densities must be nonempty and aligned"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("snapshots", "times must increase"));
        }
        let mut u = Vec::with_capacity(times.len());
        let mut v = Vec::with_capacity(times.len());
        let (mut delta_min, mut delta_time, mut m_max) = (f64::INFINITY, times[0], 0.0_f64);
        for ((r, m), &t) in rho.iter().zip(&n).zip(&times) {
            let aux = self.aux_velocities(r, m)?;
            u.push(aux.u);
            v.push(aux.v);
            let lo = r.min().min(m.min());
            if lo < delta_min {
                delta_min = lo;
                delta_time = t;
            }
            m_max = m_max.max(r.max()).max(m.max());
        }
        let mass0 = [integrate(&rho[0])?, integrate(&n[0])?];
        Ok(ReferenceSolution {
            grid: self.grid,
            times,
            rho,
            n,
            u,
            v,
            delta_min,
            delta_time,
            m_max,
            steps: 0,
            mass0,
        })
    }
}

/// Approximation errors ē = ∂t(ρ̄ū) + ∇·(ρ̄ū⊗ū) of both species.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTerms {
    pub e1: VectorField,
    pub e2: VectorField,
    pub norm1: f64,
    pub norm2: f64,
    /// Set at the first and last snapshot, where the time derivative is a
    /// one-sided difference.
    pub one_sided: bool,
}

/// Snapshots of the limit solution with their auxiliary velocities.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    grid: GridSpec,
    times: Vec<f64>,
    rho: Vec<ScalarField>,
    n: Vec<ScalarField>,
    u: Vec<VectorField>,
    v: Vec<VectorField>,
    delta_min: f64,
    delta_time: f64,
    m_max: f64,
    steps: usize,
    mass0: [f64; 2],
}

impl ReferenceSolution {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rho(&self, k: usize) -> &ScalarField {
        &self.rho[k]
    }

    pub fn n(&self, k: usize) -> &ScalarField {
        &self.n[k]
    }

    pub fn u(&self, k: usize) -> &VectorField {
        &self.u[k]
    }

    pub fn v(&self, k: usize) -> &VectorField {
        &self.v[k]
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// (δ̄, M̄): smallest and largest cell value over every step.
    pub fn bounds(&self) -> (f64, f64) {
        (self.delta_min, self.m_max)
    }

    /// Fails unless both densities stayed strictly positive.
    pub fn check_bounded_away(&self) -> Result<()> {
        if self.delta_min > 0.0 {
            Ok(())
        } else {
            Err(Error::NotBoundedAway {
                min: self.delta_min,
                t: self.delta_time,
            })
        }
    }

    /// Largest relative mass change over the snapshots.
    pub fn mass_drift(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for k in 0..self.len() {
            for (f, m0) in [(&self.rho[k], self.mass0[0]), (&self.n[k], self.mass0[1])] {
                worst = worst.max((integrate(f)? - m0).abs() / m0.abs().max(f64::MIN_POSITIVE));
            }
        }
        Ok(worst)
    }

    fn time_derivative(&self, series: &dyn Fn(usize) -> Vec<f64>, k: usize) -> Result<(Vec<f64>, bool)> {
        let len = self.len();
        if len < 3 {
            return Err(Error::param("snapshots", "at least three are needed for time derivatives"));
        }
        let t = &self.times;
        Ok(if k == 0 {
            let (a, b, c) = (series(0), series(1), series(2));
            let dt = t[1] - t[0];
            ((0..a.len()).map(|i| (-3.0 * a[i] + 4.0 * b[i] - c[i]) / (2.0 * dt)).collect(), true)
        } else if k == len - 1 {
            let (a, b, c) = (series(k), series(k - 1), series(k - 2));
            let dt = t[k] - t[k - 1];
            ((0..a.len()).map(|i| (3.0 * a[i] - 4.0 * b[i] + c[i]) / (2.0 * dt)).collect(), true)
        } else {
            let (a, c) = (series(k + 1), series(k - 1));
            let dt = t[k + 1] - t[k - 1];
            ((0..a.len()).map(|i| (a[i] - c[i]) / dt).collect(), false)
        })
    }

    /// ē₁, ē₂ at snapshot `k`.
    pub fn error_terms(&self, k: usize) -> Result<ErrorTerms> {
        if k >= self.len() {
            return Err(Error::param("snapshot", format!("index {k} out of range")));
        }
        let g = self.grid;
        let d = g.dim();
        let mut es = Vec::new();
        let mut one_sided = false;
        for (dens, vel) in [(&self.rho, &self.u), (&self.n, &self.v)] {
            let mut comps = Vec::new();
            for i in 0..d {
                let mom = |s: usize| -> Vec<f64> {
                    dens[s].values().iter().zip(vel[s].comp(i)).map(|(r, u)| r * u).collect()
                };
                let (dt_part, os) = self.time_derivative(&mom, k)?;
                one_sided = os;
                let mut e = dt_part;
                for j in 0..d {
                    let flux: Vec<f64> = (0..g.len())
                        .map(|c| dens[k].values()[c] * vel[k].comp(i)[c] * vel[k].comp(j)[c])
                        .collect();
                    for (ec, df) in e.iter_mut().zip(central_diff(&g, &flux, j, Parity::Even)) {
                        *ec += df;
                    }
                }
                comps.push(e);
            }
            es.push(VectorField::new(g, comps)?);
        }
        let e2 = es.pop().expect("two species");
        let e1 = es.pop().expect("two species");
        let norm = |e: &VectorField| -> Result<f64> { Ok(integrate(&e.magnitude().map(|x| x * x))?.sqrt()) };
        Ok(ErrorTerms {
            norm1: norm(&e1)?,
            norm2: norm(&e2)?,
            e1,
            e2,
            one_sided,
        })
    }

    /// Snapshot `k` restricted to a coarser grid of the same box, with
    /// reference gradients and error terms.
    pub fn snapshot_on(&self, k: usize, coarse: &GridSpec) -> Result<RefSnapshot> {
        let et = self.error_terms(k)?;
        Ok(RefSnapshot {
            t: self.times[k],
            rho: restrict(&self.rho[k], coarse)?,
            n: restrict(&self.n[k], coarse)?,
            u: restrict_vector(&self.u[k], coarse)?,
            v: restrict_vector(&self.v[k], coarse)?,
            grad_u: Some(restrict_tensor(&jacobian(&self.u[k]), coarse)?),
            grad_v: Some(restrict_tensor(&jacobian(&self.v[k]), coarse)?),
            e1: Some(restrict_vector(&et.e1, coarse)?),
            e2: Some(restrict_vector(&et.e2, coarse)?),
        })
    }
}
