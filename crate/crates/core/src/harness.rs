//! Experiment orchestration: initial data, the diffusive rescaling of
//! unscaled runs, ε-sweeps of the relative energy and rate fits.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::euler::{EulerRiesz, FluidState, Trajectory};
use crate::grid::{integrate, GridSpec, ScalarField};
use crate::limit::{AggregationDiffusion, ReferenceSolution};
use crate::relent::{GronwallEnvelope, InequalityCheck, RefSnapshot, RelativeEnergy};

/// Cell averages of ρ̄₀ = b(1 + a₁cos 2πx/L) and n̄₀ = b(1 + a₂cos 2π(y/L - s)),
/// with x in place of y in 1D.
pub fn initial_densities(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<(ScalarField, ScalarField)> {
    let p = &cfg.physics;
    let l = cfg.grid.length;
    let last = grid.dim() - 1;
    let rho = ScalarField::from_cell_average(*grid, |x| p.base_density * (1.0 + p.amplitude1 * (2.0 * PI * x[0] / l).cos()))?;
    let n = ScalarField::from_cell_average(*grid, |x| {
        p.base_density * (1.0 + p.amplitude2 * (2.0 * PI * (x[last] / l - p.shift)).cos())
    })?;
    Ok((rho, n))
}

/// ∫h₁(ρ̄₀|⟨ρ̄₀⟩) + h₂(n̄₀|⟨n̄₀⟩): the size of the initial perturbation
/// measured in relative internal energy.
pub fn psi_scale(cfg: &ExperimentConfig, rho0: &ScalarField, n0: &ScalarField) -> Result<f64> {
    let (l1, l2) = cfg.laws()?;
    let vol = rho0.grid().volume();
    let m1 = integrate(rho0)? / vol;
    let m2 = integrate(n0)? / vol;
    Ok(integrate(&rho0.map(|r| l1.h_rel(r, m1)))? + integrate(&n0.map(|r| l2.h_rel(r, m2)))?)
}

/// Euler data with the limit densities and the momenta ρ̄₀ū, n̄₀v̄ of the
/// auxiliary velocities.
pub fn well_prepared_init(rho0: &ScalarField, n0: &ScalarField, limit: &AggregationDiffusion) -> Result<FluidState> {
    let aux = limit.aux_velocities(rho0, n0)?;
    let m = aux.u.scale_by(rho0)?;
    let w = aux.v.scale_by(n0)?;
    FluidState::new(rho0.clone(), m, n0.clone(), w, 0.0)
}

/// State of an unscaled (friction ζ) trajectory at source time `s`, by
/// linear interpolation between snapshots.
fn sample(traj: &Trajectory, s: f64) -> Result<FluidState> {
    let snaps = &traj.snapshots;
    let first = snaps.first().ok_or_else(|| Error::param("trajectory", "is empty"))?;
    let last = &snaps[snaps.len() - 1];
    let tol = 1e-12 * last.t.abs().max(1.0);
    if s < first.t - tol || s > last.t + tol {
        return Err(Error::param(
            "time",
            format!("source time {s} is outside [{}, {}]", first.t, last.t),
        ));
    }
    let k = snaps.partition_point(|st| st.t < s - tol);
    let k = k.min(snaps.len() - 1);
    if (snaps[k].t - s).abs() <= tol || k == 0 {
        return Ok(snaps[k].clone());
    }
    let (a, b) = (&snaps[k - 1], &snaps[k]);
    let th = (s - a.t) / (b.t - a.t);
    let mix = |x: f64, y: f64| (1.0 - th) * x + th * y;
    Ok(FluidState {
        rho: a.rho.zip_map(&b.rho, mix)?,
        m: a.m.zip_map(&b.m, mix)?,
        n: a.n.zip_map(&b.n, mix)?,
        w: a.w.zip_map(&b.w, mix)?,
        t: s,
    })
}

/// Maps an unscaled run with friction ζ = 1/√ε to diffusive variables
/// ρ̃(t) = ρ(t/√ε), m̃(t) = m(t/√ε)/√ε at the scaled `times`.
pub fn rescale_diffusive(traj: &Trajectory, epsilon: f64, times: &[f64]) -> Result<Vec<FluidState>> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("{epsilon} must be positive")));
    }
    let root = epsilon.sqrt();
    times
        .iter()
        .map(|&t| {
            let src = sample(traj, t / root)?;
            Ok(FluidState {
                rho: src.rho,
                m: src.m.scale(1.0 / root),
                n: src.n,
                w: src.w.scale(1.0 / root),
                t,
            })
        })
        .collect()
}

/// Least-squares line through (log ε, log Ψ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 2 {
        return Err(Error::Degenerate(format!("{} points are too few for a rate", pairs.len())));
    }
    if let Some(&(e, p)) = pairs.iter().find(|(e, p)| !(*e > 0.0 && *p > 0.0)) {
        return Err(Error::param("pairs", format!("({e}, {p}) is not positive")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|(e, _)| e.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, p)| p.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all epsilons coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
    })
}

/// Limit solution on the reference grid, restricted to the Euler grid.
pub struct Reference {
    pub solution: ReferenceSolution,
    pub snapshots: Vec<RefSnapshot>,
}

/// Runs the limit system on `factor × cells` and restricts every snapshot
/// onto `coarse`.
pub fn build_reference(cfg: &ExperimentConfig, coarse: &GridSpec) -> Result<Reference> {
    let fine = cfg.grid_with(coarse.n(0) * cfg.reference.factor)?;
    let solver = AggregationDiffusion::new(&fine, cfg.limit_config()?)?;
    let (rho0, n0) = initial_densities(cfg, &fine)?;
    let solution = solver.run(&rho0, &n0, 0.0, &cfg.output_times())?;
    solution.check_bounded_away()?;
    let snapshots = (0..solution.len())
        .into_par_iter()
        .map(|k| solution.snapshot_on(k, coarse))
        .collect::<Result<Vec<_>>>()?;
    Ok(Reference { solution, snapshots })
}

/// One Euler run compared against the reference.
pub struct EpsilonRun {
    pub epsilon: f64,
    pub trajectory: Trajectory,
    pub check: InequalityCheck,
}

impl EpsilonRun {
    pub fn psi0(&self) -> f64 {
        self.check.reports[0].psi
    }

    pub fn times(&self) -> Vec<f64> {
        self.check.reports.iter().map(|r| r.t).collect()
    }

    pub fn psi(&self) -> Vec<f64> {
        self.check.reports.iter().map(|r| r.psi).collect()
    }
}

/// Euler run at `epsilon` from well-prepared data on `grid`, with Ψ and the
/// inequality terms evaluated against `reference`.
pub fn run_epsilon(cfg: &ExperimentConfig, grid: &GridSpec, reference: &[RefSnapshot], epsilon: f64) -> Result<EpsilonRun> {
    let limit = AggregationDiffusion::new(grid, cfg.limit_config()?)?;
    let (rho0, n0) = initial_densities(cfg, grid)?;
    let init = well_prepared_init(&rho0, &n0, &limit)?;
    let solver = EulerRiesz::new(grid, cfg.solver_config(epsilon)?)?;
    let trajectory = solver.run(&init, &cfg.output_times())?;
    let (l1, l2) = cfg.laws()?;
    let rel = RelativeEnergy::with_image_radius(grid, l1, l2, cfg.physics.alpha, cfg.physics.sigma, cfg.solver.image_radius)?
        .with_floor(cfg.solver.rho_floor);
    let check = rel.check_rel_inequality(&trajectory, reference, epsilon)?;
    Ok(EpsilonRun {
        epsilon,
        trajectory,
        check,
    })
}

/// Summary of one ε of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub psi0: f64,
    pub sup_psi: f64,
    /// sup Ψ minus the discretization floor.
    pub corrected: f64,
    /// Smallest envelope constant for this run alone.
    pub own_c: f64,
    /// Whether the envelope with the sweep constant dominates this run.
    pub dominated: bool,
    pub min_residual: f64,
    pub steps: usize,
    /// Local slope against the previous (larger) ε, on corrected values.
    pub slope_contrib: f64,
    pub error: Option<String>,
}

/// Discretization floor from the smallest ε at two resolutions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FloorEstimate {
    pub epsilon: f64,
    pub cells: usize,
    pub sup_coarse: f64,
    pub sup_fine: f64,
    /// (4/3)(Ψ_N - Ψ_2N), clamped at zero.
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub regime: &'static str,
    pub in_theorem: bool,
    pub warnings: Vec<String>,
    pub entries: Vec<SweepEntry>,
    /// Envelope constant fitted on the largest ε.
    pub envelope_c: f64,
    pub floor: Option<FloorEstimate>,
    pub raw_fit: Option<RateFit>,
    pub fit: Option<RateFit>,
    pub monotone: bool,
    pub envelope_ok: bool,
    pub psi_scale: f64,
    pub notes: Vec<String>,
    pub slope_range: (f64, f64),
}

impl SweepResult {
    pub fn slope_in_range(&self) -> bool {
        self.fit
            .map(|f| f.slope >= self.slope_range.0 && f.slope <= self.slope_range.1)
            .unwrap_or(false)
    }

    pub fn passed(&self) -> bool {
        self.monotone && self.envelope_ok && self.slope_in_range() && self.entries.iter().all(|e| e.error.is_none())
    }
}

/// The ε-sweep: one shared reference, one Euler run per ε, the floor
/// estimate at the smallest ε, rate fits and envelope checks.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(SweepResult, Vec<EpsilonRun>)> {
    cfg.validate()?;
    let grid = cfg.grid_spec()?;
    let flags = cfg.regime();
    let mut notes = Vec::new();
    let reference = build_reference(cfg, &grid)?;
    let mut eps = cfg.sweep.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let finest = *eps.last().expect("validated");

    let floor_job = cfg.sweep.floor_check && eps.len() > 1;
    let (outcomes, floor_run) = rayon::join(
        || {
            eps.par_iter()
                .map(|&e| run_epsilon(cfg, &grid, &reference.snapshots, e))
                .collect::<Vec<_>>()
        },
        || -> Option<Result<EpsilonRun>> {
            if !floor_job {
                return None;
            }
            Some((|| {
                let fine = cfg.grid_with(2 * cfg.grid.cells)?;
                let r = build_reference(cfg, &fine)?;
                run_epsilon(cfg, &fine, &r.snapshots, finest)
            })())
        },
    );

    let mut runs = Vec::new();
    let mut entries = Vec::new();
    for (&e, out) in eps.iter().zip(outcomes) {
        match out {
            Ok(run) => {
                entries.push(SweepEntry {
                    epsilon: e,
                    psi0: run.psi0(),
                    sup_psi: run.check.sup_psi(),
                    corrected: f64::NAN,
                    own_c: GronwallEnvelope::fit(&run.times(), &run.psi(), e)?.c,
                    dominated: false,
                    min_residual: run.check.min_residual(),
                    steps: run.trajectory.steps,
                    slope_contrib: f64::NAN,
                    error: None,
                });
                runs.push(run);
            }
            Err(err) => entries.push(SweepEntry {
                epsilon: e,
                psi0: f64::NAN,
                sup_psi: f64::NAN,
                corrected: f64::NAN,
                own_c: f64::NAN,
                dominated: false,
                min_residual: f64::NAN,
                steps: 0,
                slope_contrib: f64::NAN,
                error: Some(err.to_string()),
            }),
        }
    }

    let mut floor = None;
    match floor_run {
        Some(Ok(fine)) => {
            if let Some(coarse) = entries.iter().find(|x| x.epsilon == finest && x.error.is_none()) {
                let sup_fine = fine.check.sup_psi();
                let raw = 4.0 / 3.0 * (coarse.sup_psi - sup_fine);
                if raw < 0.0 {
                    notes.push(format!("floor estimate {raw:e} is negative; using 0"));
                }
                floor = Some(FloorEstimate {
                    epsilon: finest,
                    cells: cfg.grid.cells,
                    sup_coarse: coarse.sup_psi,
                    sup_fine,
                    floor: raw.max(0.0),
                });
            }
        }
        Some(Err(err)) => notes.push(format!("floor run failed: {err}")),
        None => {}
    }
    let floor_value = floor.map_or(0.0, |f| f.floor);

    // Envelope constant from the largest ε, then checked on the others.
    let mut envelope_c = f64::NAN;
    let mut envelope_ok = false;
    if let Some(first) = runs.first() {
        envelope_c = GronwallEnvelope::fit(&first.times(), &first.psi(), first.epsilon)?.c;
        envelope_ok = true;
        for (run, entry) in runs.iter_mut().zip(entries.iter_mut().filter(|e| e.error.is_none())) {
            let env = GronwallEnvelope::new(run.psi0(), envelope_c, cfg.solver.t_end, run.epsilon)?;
            entry.dominated = true;
            for r in run.check.reports.iter_mut() {
                r.envelope = env.at(r.t);
                entry.dominated &= r.psi <= r.envelope * (1.0 + 1e-12);
            }
            envelope_ok &= entry.dominated;
        }
    }

    let mut raw_pairs = Vec::new();
    let mut pairs = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for entry in entries.iter_mut().filter(|e| e.error.is_none()) {
        entry.corrected = entry.sup_psi - floor_value;
        raw_pairs.push((entry.epsilon, entry.sup_psi));
        if entry.corrected > 0.0 {
            pairs.push((entry.epsilon, entry.corrected));
            if let Some((pe, pp)) = prev {
                entry.slope_contrib = (entry.corrected / pp).ln() / (entry.epsilon / pe).ln();
            }
            prev = Some((entry.epsilon, entry.corrected));
        } else {
            notes.push(format!("epsilon {} is at the discretization floor and is left out of the fit", entry.epsilon));
        }
    }
    let raw_fit = fit_rate(&raw_pairs).ok();
    let fit = match fit_rate(&pairs) {
        Ok(f) => Some(f),
        Err(_) => {
            notes.push("insufficient points for rate".into());
            None
        }
    };
    let ok: Vec<&SweepEntry> = entries.iter().filter(|e| e.error.is_none()).collect();
    let tol = cfg.sweep.monotone_tolerance;
    let monotone = ok.windows(2).all(|w| w[1].sup_psi < w[0].sup_psi * (1.0 + tol));

    let (rho0, n0) = initial_densities(cfg, &grid)?;
    let result = SweepResult {
        regime: flags.label(),
        in_theorem: flags.in_theorem(),
        warnings: cfg.warnings(),
        entries,
        envelope_c,
        floor,
        raw_fit,
        fit,
        monotone,
        envelope_ok,
        psi_scale: psi_scale(cfg, &rho0, &n0)?,
        notes,
        slope_range: (cfg.sweep.slope_min, cfg.sweep.slope_max),
    };
    Ok((result, runs))
}

#[cfg(test)]
mod tests;
