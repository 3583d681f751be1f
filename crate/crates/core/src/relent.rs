//! Relative energy between an Euler–Riesz state (ρ, u, n, v) and a limit
//! snapshot (ρ̄, ū, n̄, v̄), the terms of its dissipation inequality, and the
//! empirical constants used to bound them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::euler::{velocity, FluidState, Trajectory};
use crate::grid::{integrate, jacobian, lp_norm, GridSpec, ScalarField, TensorField, VectorField};
use crate::riesz::{RieszOperator, RieszParams, DEFAULT_IMAGE_RADIUS};
use crate::sum::Neumaier;
use crate::thermo::PressureLaw;

/// One reference time slice on the grid of the state it is compared with.
#[derive(Clone, Debug, PartialEq)]
pub struct RefSnapshot {
    pub t: f64,
    pub rho: ScalarField,
    pub n: ScalarField,
    pub u: VectorField,
    pub v: VectorField,
    /// ∂_j ū_i, stored as `entry(i, j)`.
    pub grad_u: Option<TensorField>,
    pub grad_v: Option<TensorField>,
    pub e1: Option<VectorField>,
    pub e2: Option<VectorField>,
}

impl RefSnapshot {
    pub fn new(t: f64, rho: ScalarField, n: ScalarField, u: VectorField, v: VectorField) -> Result<Self> {
        let g = *rho.grid();
        n.ensure_grid(&g)?;
        if u.grid() != &g || v.grid() != &g {
            return Err(Error::FieldMismatch("reference velocity grid differs from density grid".into()));
        }
        Ok(Self {
            t,
            rho,
            n,
            u,
            v,
            grad_u: None,
            grad_v: None,
            e1: None,
            e2: None,
        })
    }

    /// Fills the velocity gradients by centered differences on this grid.
    pub fn with_jacobians(mut self) -> Self {
        self.grad_u = Some(jacobian(&self.u));
        self.grad_v = Some(jacobian(&self.v));
        self
    }

    pub fn with_error_terms(mut self, e1: VectorField, e2: VectorField) -> Result<Self> {
        if e1.grid() != self.grid() || e2.grid() != self.grid() {
            return Err(Error::FieldMismatch("error term grid differs from reference grid".into()));
        }
        self.e1 = Some(e1);
        self.e2 = Some(e2);
        Ok(self)
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    fn check_against(&self, state: &FluidState) -> Result<()> {
        if state.grid() != self.grid() {
            return Err(Error::FieldMismatch(
                "state and reference live on different grids; restrict the reference first".into(),
            ));
        }
        Ok(())
    }

    fn check_positive(&self) -> Result<()> {
        let lo = self.rho.min().min(self.n.min());
        if lo > 0.0 {
            Ok(())
        } else {
            Err(Error::NotBoundedAway { min: lo, t: self.t })
        }
    }
}

fn dot_diff(a: &VectorField, b: &VectorField, i: usize) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (k, o) in out.iter_mut().enumerate().take(a.grid().dim()) {
        *o = a.comp(k)[i] - b.comp(k)[i];
    }
    out
}

/// ∫ ½ρ|u-ū|² + ½n|v-v̄|², with u = ρu / max(ρ, floor).
pub fn rel_kinetic(state: &FluidState, snap: &RefSnapshot, floor: f64) -> Result<f64> {
    snap.check_against(state)?;
    let u = velocity(&state.rho, &state.m, floor);
    let v = velocity(&state.n, &state.w, floor);
    let g = state.grid();
    let mut acc = Neumaier::new();
    for i in 0..g.len() {
        let du = dot_diff(&u, &snap.u, i);
        let dv = dot_diff(&v, &snap.v, i);
        acc.add(0.5 * state.rho.values()[i] * (du[0] * du[0] + du[1] * du[1]));
        acc.add(0.5 * state.n.values()[i] * (dv[0] * dv[0] + dv[1] * dv[1]));
    }
    Ok(acc.total() * g.cell_volume())
}

/// Relative potential energy with its two parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelPotential {
    /// ∫ h₁(ρ|ρ̄) + h₂(n|n̄).
    pub bregman: f64,
    /// σ½ ∫ ξ K∗ξ with ξ = ρ-ρ̄-n+n̄.
    pub interaction: f64,
}

impl RelPotential {
    pub fn total(&self) -> f64 {
        self.bregman + self.interaction
    }
}

/// Spatial integrands of the relative energy inequality at one time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InequalityRates {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    /// The I₃ integral without σ.
    pub j: f64,
    /// ∫ ρ|u-ū|² + n|v-v̄|².
    pub dissipation: f64,
    /// ∫ p₁(ρ|ρ̄) + p₂(n|n̄).
    pub pressure_bregman: f64,
    /// Largest pointwise Frobenius norm of ∇ū, ∇v̄.
    pub grad_max: f64,
    /// Largest |∇·ū|, |∇·v̄|.
    pub div_max: f64,
}

/// One row of the relative energy report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelEnergyReport {
    pub t: f64,
    pub psi: f64,
    pub rel_kinetic: f64,
    pub bregman: f64,
    pub interaction: f64,
    /// Time integrals of the I terms from the first report up to `t`.
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    /// J at `t`.
    pub j: f64,
    /// Time integral of the relative dissipation up to `t`.
    pub dissipation: f64,
    pub envelope: f64,
}

impl RelEnergyReport {
    pub const CSV_HEADER: &'static str = "t,psi,rel_kin,bregman,interaction,I1,I2,I3,I4,J,dissipation,envelope";

    pub fn csv_row(&self) -> String {
        [
            self.t,
            self.psi,
            self.rel_kinetic,
            self.bregman,
            self.interaction,
            self.i1,
            self.i2,
            self.i3,
            self.i4,
            self.j,
            self.dissipation,
            self.envelope,
        ]
        .iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Reports along a trajectory together with the inequality residual
/// (I₁+I₂+I₃+I₄) - (Ψ(t) - Ψ(0) + ∫D), which should stay nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityCheck {
    pub reports: Vec<RelEnergyReport>,
    pub rates: Vec<InequalityRates>,
    pub residual: Vec<f64>,
}

impl InequalityCheck {
    pub fn min_residual(&self) -> f64 {
        self.residual.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_psi(&self) -> f64 {
        self.reports.iter().map(|r| r.psi).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluator for the relative energy on one grid.
#[derive(Debug)]
pub struct RelativeEnergy {
    grid: GridSpec,
    law1: PressureLaw,
    law2: PressureLaw,
    sigma: f64,
    floor: f64,
    op: RieszOperator,
}

impl RelativeEnergy {
    pub fn new(grid: &GridSpec, law1: PressureLaw, law2: PressureLaw, alpha: f64, sigma: f64) -> Result<Self> {
        Self::with_image_radius(grid, law1, law2, alpha, sigma, DEFAULT_IMAGE_RADIUS)
    }

    pub fn with_image_radius(
        grid: &GridSpec,
        law1: PressureLaw,
        law2: PressureLaw,
        alpha: f64,
        sigma: f64,
        image_radius: f64,
    ) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("{sigma} must be nonnegative")));
        }
        let params = RieszParams::new(alpha, grid.dim())?;
        Ok(Self {
            grid: *grid,
            law1,
            law2,
            sigma,
            floor: 1e-10,
            op: RieszOperator::with_image_radius(grid, params, image_radius)?,
        })
    }

    /// Density floor used to recover velocities from momenta.
    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn operator(&self) -> &RieszOperator {
        &self.op
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn xi(rho: &ScalarField, n: &ScalarField, rb: &ScalarField, nb: &ScalarField) -> Result<ScalarField> {
        rho.sub(rb)?.sub(&n.sub(nb)?)
    }

    fn bregman(&self, rho: &ScalarField, n: &ScalarField, rb: &ScalarField, nb: &ScalarField) -> Result<f64> {
        let h1 = rho.zip_map(rb, |r, b| self.law1.h_rel(r, b))?;
        let h2 = n.zip_map(nb, |r, b| self.law2.h_rel(r, b))?;
        Ok(integrate(&h1)? + integrate(&h2)?)
    }

    pub fn rel_kinetic(&self, state: &FluidState, snap: &RefSnapshot) -> Result<f64> {
        rel_kinetic(state, snap, self.floor)
    }

    pub fn rel_potential(&self, state: &FluidState, snap: &RefSnapshot) -> Result<RelPotential> {
        snap.check_against(state)?;
        state.rho.ensure_grid(&self.grid)?;
        snap.check_positive()?;
        let bregman = self.bregman(&state.rho, &state.n, &snap.rho, &snap.n)?;
        let xi = Self::xi(&state.rho, &state.n, &snap.rho, &snap.n)?;
        let interaction = self.op.interaction_energy(&xi, self.sigma)?;
        Ok(RelPotential { bregman, interaction })
    }

    /// Ψ = ε·K(·|·) + E(·|·) at one time; the cumulative columns are zero.
    pub fn psi(&self, state: &FluidState, snap: &RefSnapshot, epsilon: f64) -> Result<RelEnergyReport> {
        let kin = self.rel_kinetic(state, snap)?;
        let pot = self.rel_potential(state, snap)?;
        Ok(RelEnergyReport {
            t: state.t,
            psi: epsilon * kin + pot.bregman + pot.interaction,
            rel_kinetic: kin,
            bregman: pot.bregman,
            interaction: pot.interaction,
            i1: 0.0,
            i2: 0.0,
            i3: 0.0,
            i4: 0.0,
            j: 0.0,
            dissipation: 0.0,
            envelope: f64::NAN,
        })
    }

    /// Spatial integrals of the inequality terms at one time.
    pub fn inequality_terms(&self, state: &FluidState, snap: &RefSnapshot, epsilon: f64) -> Result<InequalityRates> {
        snap.check_against(state)?;
        state.rho.ensure_grid(&self.grid)?;
        snap.check_positive()?;
        let (gu, gv) = match (&snap.grad_u, &snap.grad_v) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::param("reference", "velocity gradients are missing")),
        };
        let (e1, e2) = match (&snap.e1, &snap.e2) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::param("reference", "error terms are missing")),
        };
        self.op.params().require_gradient()?;
        let xi = Self::xi(&state.rho, &state.n, &snap.rho, &snap.n)?;
        let kxi = self.op.conv_grad(&xi)?;
        let u = velocity(&state.rho, &state.m, self.floor);
        let v = velocity(&state.n, &state.w, self.floor);
        let g = &self.grid;
        let d = g.dim();

        // Per cell: i1, i2, j, i4, dissipation, pressure Bregman.
        let cells: Vec<[f64; 6]> = (0..g.len())
            .into_par_iter()
            .map(|c| {
                let mut out = [0.0; 6];
                let species = [
                    (&state.rho, &snap.rho, &u, &snap.u, gu, e1, &self.law1, 1.0),
                    (&state.n, &snap.n, &v, &snap.v, gv, e2, &self.law2, -1.0),
                ];
                for (r, rb, w, wb, grad, e, law, sign) in species {
                    let (r, rb) = (r.values()[c], rb.values()[c]);
                    let dw = dot_diff(w, wb, c);
                    let mut quad = 0.0;
                    let mut div = 0.0;
                    for i in 0..d {
                        div += grad.entry(i, i)[c];
                        for j in 0..d {
                            quad += grad.entry(i, j)[c] * dw[i] * dw[j];
                        }
                    }
                    let pr = law.p_rel(r, rb);
                    let mut jt = 0.0;
                    let mut et = 0.0;
                    let mut w2 = 0.0;
                    for k in 0..d {
                        jt += wb.comp(k)[c] * kxi.comp(k)[c];
                        et += e.comp(k)[c] * dw[k];
                        w2 += dw[k] * dw[k];
                    }
                    out[0] -= epsilon * r * quad;
                    out[1] -= div * pr;
                    out[2] += sign * (r - rb) * jt;
                    out[3] -= epsilon * (r / rb) * et;
                    out[4] += r * w2;
                    out[5] += pr;
                }
                out
            })
            .collect();
        let vol = g.cell_volume();
        let mut sums = [Neumaier::new(); 6];
        for cell in &cells {
            for (s, x) in sums.iter_mut().zip(cell) {
                s.add(*x);
            }
        }
        let [i1, i2, j, i4, dissipation, pressure_bregman] = sums.map(|s| s.total() * vol);
        let mut grad_max = 0.0_f64;
        let mut div_max = 0.0_f64;
        for grad in [gu, gv] {
            grad_max = grad.frobenius().values().iter().fold(grad_max, |m, x| m.max(*x));
            div_max = grad.divergence().values().iter().fold(div_max, |m, x| m.max(x.abs()));
        }
        Ok(InequalityRates {
            i1,
            i2,
            i3: self.sigma * j,
            i4,
            j,
            dissipation,
            pressure_bregman,
            grad_max,
            div_max,
        })
    }

    /// Evaluates Ψ and the inequality terms on every snapshot of `traj`,
    /// integrating in time by the trapezoid rule.
    pub fn check_rel_inequality(
        &self,
        traj: &Trajectory,
        reference: &[RefSnapshot],
        epsilon: f64,
    ) -> Result<InequalityCheck> {
        if traj.snapshots.len() != reference.len() || reference.is_empty() {
            return Err(Error::param(
                "reference",
                format!("{} states against {} reference snapshots", traj.snapshots.len(), reference.len()),
            ));
        }
        for (s, r) in traj.snapshots.iter().zip(reference) {
            let tol = 1e-9 * s.t.abs().max(1.0);
            if (s.t - r.t).abs() > tol {
                return Err(Error::param(
                    "reference",
                    format!("time {} does not match reference time {}", s.t, r.t),
                ));
            }
        }
        let per: Vec<(RelEnergyReport, InequalityRates)> = traj
            .snapshots
            .par_iter()
            .zip(reference.par_iter())
            .map(|(s, r)| Ok((self.psi(s, r, epsilon)?, self.inequality_terms(s, r, epsilon)?)))
            .collect::<Result<_>>()?;
        let mut reports = Vec::with_capacity(per.len());
        let mut rates = Vec::with_capacity(per.len());
        let mut residual = Vec::with_capacity(per.len());
        let mut cum = [0.0_f64; 5];
        let psi0 = per[0].0.psi;
        for (k, (rep, rate)) in per.iter().enumerate() {
            if k > 0 {
                let (prev, dt) = (&per[k - 1].1, rep.t - per[k - 1].0.t);
                let pairs = [
                    (prev.i1, rate.i1),
                    (prev.i2, rate.i2),
                    (prev.i3, rate.i3),
                    (prev.i4, rate.i4),
                    (prev.dissipation, rate.dissipation),
                ];
                for (c, (a, b)) in cum.iter_mut().zip(pairs) {
                    *c += 0.5 * dt * (a + b);
                }
            }
            let mut row = *rep;
            row.i1 = cum[0];
            row.i2 = cum[1];
            row.i3 = cum[2];
            row.i4 = cum[3];
            row.j = rate.j;
            row.dissipation = cum[4];
            residual.push(cum[0] + cum[1] + cum[2] + cum[3] - (rep.psi - psi0 + cum[4]));
            reports.push(row);
            rates.push(*rate);
        }
        Ok(InequalityCheck {
            reports,
            rates,
            residual,
        })
    }
}

/// e^{CT}(Ψ₀ + ε²).
pub fn gronwall_envelope(psi0: f64, c: f64, t: f64, epsilon: f64) -> f64 {
    (c * t).exp() * (psi0 + epsilon * epsilon)
}

/// Parameters of the bound sup Ψ ≤ e^{CT}(Ψ₀ + ε²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GronwallEnvelope {
    pub psi0: f64,
    pub c: f64,
    pub epsilon: f64,
    pub t: f64,
    pub value: f64,
}

impl GronwallEnvelope {
    pub fn new(psi0: f64, c: f64, t: f64, epsilon: f64) -> Result<Self> {
        if !(c >= 0.0 && t > 0.0 && epsilon >= 0.0) {
            return Err(Error::param("envelope", format!("needs C >= 0, T > 0, eps >= 0 (got {c}, {t}, {epsilon})")));
        }
        Ok(Self {
            psi0,
            c,
            epsilon,
            t,
            value: gronwall_envelope(psi0, c, t, epsilon),
        })
    }

    /// Smallest C ≥ 0 with Ψ(t) ≤ e^{Ct}(Ψ₀ + ε²) at every sample.
    pub fn fit(times: &[f64], psi: &[f64], epsilon: f64) -> Result<Self> {
        if times.len() != psi.len() || times.is_empty() {
            return Err(Error::param("envelope", "times and values must be nonempty and aligned"));
        }
        let t0 = times[0];
        let base = psi[0] + epsilon * epsilon;
        if !(base > 0.0) {
            return Err(Error::Degenerate("Ψ(0) + ε² vanishes".into()));
        }
        let mut c = 0.0_f64;
        for (&t, &p) in times.iter().zip(psi).skip(1) {
            let dt = t - t0;
            if dt > 0.0 && p > base {
                c = c.max((p / base).ln() / dt);
            }
        }
        let horizon = times[times.len() - 1] - t0;
        Self::new(psi[0], c, horizon.max(f64::MIN_POSITIVE), epsilon)
    }

    /// e^{Ct}(Ψ₀ + ε²) at an intermediate time.
    pub fn at(&self, t: f64) -> f64 {
        gronwall_envelope(self.psi0, self.c, t, self.epsilon)
    }
}

/// Exponent choice for the L^q-versus-Bregman comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LemmaBranch {
    /// q = 2d/(d+α), valid for γ ≥ 2 - α/d and 0 < α ≤ d.
    P,
    /// q = 2/(3-γ), valid for 1 < γ < 2.
    Q,
}

impl LemmaBranch {
    pub fn exponent(&self, gamma: f64, alpha: f64, dim: usize) -> Result<f64> {
        let d = dim as f64;
        match self {
            LemmaBranch::P => {
                if !(alpha > 0.0 && alpha <= d) {
                    return Err(Error::param("alpha", format!("{alpha} outside (0, {d}]")));
                }
                if gamma < 2.0 - alpha / d {
                    return Err(Error::param("gamma", format!("{gamma} is below 2 - alpha/d")));
                }
                Ok(2.0 * d / (d + alpha))
            }
            LemmaBranch::Q => {
                if !(gamma > 1.0 && gamma < 2.0) {
                    return Err(Error::param("gamma", format!("{gamma} outside (1, 2)")));
                }
                Ok(2.0 / (3.0 - gamma))
            }
        }
    }
}

/// ‖r - r̄‖²_q / ∫h(r|r̄).
pub fn lemma52_ratio(
    r: &ScalarField,
    rbar: &ScalarField,
    law: &PressureLaw,
    alpha: f64,
    branch: LemmaBranch,
) -> Result<f64> {
    r.ensure_grid(rbar.grid())?;
    let q = branch.exponent(law.gamma(), alpha, r.grid().dim())?;
    if rbar.min() <= 0.0 {
        return Err(Error::NotBoundedAway {
            min: rbar.min(),
            t: f64::NAN,
        });
    }
    let diff = r.sub(rbar)?;
    if diff.values().iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("r equals r̄".into()));
    }
    let denom = integrate(&r.zip_map(rbar, |a, b| law.h_rel(a, b))?)?;
    if !(denom > 0.0) {
        return Err(Error::Degenerate("relative internal energy vanishes".into()));
    }
    Ok(lp_norm(&diff, q)?.powi(2) / denom)
}

/// Empirical interaction constant and the resulting coercivity factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaThreshold {
    /// max |∫ξK∗ξ| / ∫(h₁(ρ|ρ̄) + h₂(n|n̄)) over the samples.
    pub c_star: f64,
    /// 1 - σC∗/2.
    pub lambda: f64,
    pub sigma: f64,
    pub samples_used: usize,
    pub samples_skipped: usize,
}

impl SigmaThreshold {
    /// Largest σ keeping λ positive.
    pub fn sigma_max(&self) -> f64 {
        2.0 / self.c_star
    }

    pub fn is_coercive(&self) -> bool {
        self.lambda > 0.0
    }
}

/// Sample tuple (ρ, ρ̄, n, n̄).
pub type DensitySample = (ScalarField, ScalarField, ScalarField, ScalarField);

/// Zero-mean random trigonometric profile with unit maximum, built from
/// up to four modes of wavenumber below four on each axis.
pub(crate) fn random_profile(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let tau = 2.0 * std::f64::consts::PI;
    let d = grid.dim();
    let count = rng.random_range(1..=4);
    let modes: Vec<([f64; 2], f64, f64)> = (0..count)
        .map(|_| {
            let mut k = [0.0; 2];
            while k[..d].iter().all(|&v| v == 0.0) {
                for kk in k.iter_mut().take(d) {
                    *kk = rng.random_range(0..4) as f64;
                }
            }
            (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..tau))
        })
        .collect();
    let lo = grid.lower();
    let len: Vec<f64> = (0..d).map(|k| grid.length(k)).collect();
    let raw = ScalarField::from_fn(*grid, |x| {
        modes
            .iter()
            .map(|(k, a, ph)| a * (tau * (0..d).map(|i| k[i] * (x[i] - lo[i]) / len[i]).sum::<f64>() + ph).cos())
            .sum()
    })?;
    let mean = integrate(&raw)? / grid.volume();
    let centered = raw.map(|v| v - mean);
    let peak = centered.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(centered);
    }
    Ok(centered.scale(1.0 / peak))
}

/// Samples (ρ, ρ̄, n, n̄) around fixed references: ρ = ρ̄ + a₁ min ρ̄ s₁ and
/// n = n̄ + a₂ min n̄ s₂ with independent zero-mean profiles sᵢ of unit
/// maximum and aᵢ uniform in [0, `max_amplitude`]. Masses match the
/// references and the densities stay positive for `max_amplitude` < 1.
pub fn perturbation_samples(
    rho_bar: &ScalarField,
    n_bar: &ScalarField,
    count: usize,
    max_amplitude: f64,
    seed: u64,
) -> Result<Vec<DensitySample>> {
    rho_bar.ensure_grid(n_bar.grid())?;
    if !(max_amplitude > 0.0 && max_amplitude < 1.0) {
        return Err(Error::param("max_amplitude", format!("{max_amplitude} outside (0, 1)")));
    }
    let (r_min, n_min) = (rho_bar.min(), n_bar.min());
    if !(r_min > 0.0 && n_min > 0.0) {
        return Err(Error::NotBoundedAway {
            min: r_min.min(n_min),
            t: f64::NAN,
        });
    }
    let grid = *rho_bar.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let a1 = rng.random_range(0.0..=max_amplitude) * r_min;
        let a2 = rng.random_range(0.0..=max_amplitude) * n_min;
        let s1 = random_profile(&grid, &mut rng)?;
        let s2 = random_profile(&grid, &mut rng)?;
        let rho = rho_bar.add(&s1.scale(a1))?;
        let n = n_bar.add(&s2.scale(a2))?;
        out.push((rho, rho_bar.clone(), n, n_bar.clone()));
    }
    Ok(out)
}

/// Estimates C∗ over `samples`; samples with ξ ≡ 0 are skipped.
pub fn sigma_threshold(
    samples: &[DensitySample],
    law1: &PressureLaw,
    law2: &PressureLaw,
    op: &RieszOperator,
    sigma: f64,
) -> Result<SigmaThreshold> {
    let ratios: Vec<Option<f64>> = samples
        .par_iter()
        .map(|(rho, rb, n, nb)| {
            for f in [rho, rb, n, nb] {
                f.ensure_grid(op.grid())?;
            }
            let xi = RelativeEnergy::xi(rho, n, rb, nb)?;
            let scale = [rho, rb, n, nb].iter().fold(0.0_f64, |m, f| m.max(f.max().abs()));
            if xi.values().iter().all(|x| x.abs() <= 1e-14 * scale) {
                return Ok(None);
            }
            let num = op.bilinear(&xi, &xi)?.abs();
            let den = integrate(&rho.zip_map(rb, |a, b| law1.h_rel(a, b))?)?
                + integrate(&n.zip_map(nb, |a, b| law2.h_rel(a, b))?)?;
            if !(den > 0.0) {
                return Err(Error::Degenerate("relative internal energy vanishes on a sample".into()));
            }
            Ok(Some(num / den))
        })
        .collect::<Result<_>>()?;
    let used: Vec<f64> = ratios.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::Degenerate("no sample has a nonzero charge difference".into()));
    }
    let c_star = used.iter().copied().fold(0.0_f64, f64::max);
    Ok(SigmaThreshold {
        c_star,
        lambda: 1.0 - sigma * c_star / 2.0,
        sigma,
        samples_used: used.len(),
        samples_skipped: samples.len() - used.len(),
    })
}
