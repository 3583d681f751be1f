//! Experiment configuration files.
//!
//! A configuration is a TOML document with the sections `[grid]`,
//! `[physics]`, `[solver]`, `[sweep]` and `[reference]`. Only `[grid]` and
//! `[physics]` are required; every other key has a default. Unknown keys are
//! rejected.
//!
//! ```toml
//! [grid]
//! dim = 2                # 1 or 2
//! cells = 64             # cells per axis
//! length = 1.0           # box [0, length]^dim
//! boundary = "periodic"  # or "no-flux" (1D only)
//!
//! [physics]
//! gamma1 = 2.0
//! gamma2 = 2.0
//! alpha = 1.5
//! sigma = 0.05
//! base_density = 0.1     # initial data b(1 + a1 cos 2πx), b(1 + a2 cos 2π(y - shift))
//! amplitude1 = 0.2
//! amplitude2 = 0.1
//! shift = 0.125
//!
//! [solver]
//! epsilon = 0.1          # used by single runs
//! t_end = 0.25
//! snapshots = 51         # equally spaced output times including t = 0
//! cfl = 0.45
//! limit_cfl = 0.8
//! rho_floor = 1e-10
//! splitting = "pressure-in-relaxation"   # or "pressure-in-flux"
//! image_radius = 3.0
//!
//! [sweep]
//! epsilons = [0.2, 0.1, 0.05, 0.025]
//! floor_check = true     # rerun the smallest epsilon at twice the resolution
//! slope_min = 1.6
//! slope_max = 2.3
//! monotone_tolerance = 0.0 # allowed relative rise of sup Ψ as ε decreases
//! seed = 20240607
//!
//! [reference]
//! factor = 2             # limit solution grid = factor × cells
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::{SolverConfig, Splitting};
use crate::grid::{Boundary, GridSpec};
use crate::limit::LimitConfig;
use crate::riesz::{RieszParams, DEFAULT_IMAGE_RADIUS};
use crate::thermo::{PressureLaw, Regime};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    pub cells: usize,
    #[serde(default = "defaults::length")]
    pub length: f64,
    #[serde(default = "defaults::boundary")]
    pub boundary: Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    pub sigma: f64,
    #[serde(default = "defaults::base_density")]
    pub base_density: f64,
    #[serde(default = "defaults::amplitude1")]
    pub amplitude1: f64,
    #[serde(default = "defaults::amplitude2")]
    pub amplitude2: f64,
    #[serde(default = "defaults::shift")]
    pub shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub epsilon: f64,
    pub t_end: f64,
    pub snapshots: usize,
    pub cfl: f64,
    pub limit_cfl: f64,
    pub rho_floor: f64,
    pub splitting: Splitting,
    pub image_radius: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            t_end: 0.25,
            snapshots: 51,
            cfl: 0.45,
            limit_cfl: 0.8,
            rho_floor: 1e-10,
            splitting: Splitting::default(),
            image_radius: DEFAULT_IMAGE_RADIUS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    pub floor_check: bool,
    pub slope_min: f64,
    pub slope_max: f64,
    pub monotone_tolerance: f64,
    pub seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            floor_check: true,
            slope_min: 1.6,
            slope_max: 2.3,
            monotone_tolerance: 0.0,
            seed: 20240607,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSection {
    pub factor: usize,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self { factor: 2 }
    }
}

mod defaults {
    use crate::grid::Boundary;

    pub fn dim() -> usize {
        2
    }
    pub fn length() -> f64 {
        1.0
    }
    pub fn boundary() -> Boundary {
        Boundary::Periodic
    }
    pub fn base_density() -> f64 {
        0.1
    }
    pub fn amplitude1() -> f64 {
        0.2
    }
    pub fn amplitude2() -> f64 {
        0.1
    }
    pub fn shift() -> f64 {
        0.125
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub physics: PhysicsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub reference: ReferenceSection,
}

/// Theorem hypotheses evaluated for a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegimeFlags {
    pub species1: Regime,
    pub species2: Regime,
}

impl RegimeFlags {
    pub fn in_theorem(&self) -> bool {
        self.species1 != Regime::Outside && self.species2 != Regime::Outside
    }

    pub fn label(&self) -> &'static str {
        match (self.species1, self.species2) {
            (Regime::CaseI, Regime::CaseI) => "case-i",
            (Regime::CaseII, Regime::CaseII) => "case-ii",
            (a, b) if a != Regime::Outside && b != Regime::Outside => "mixed",
            _ => "outside",
        }
    }
}

fn toml_err(e: impl std::fmt::Display) -> Error {
    Error::config("<document>", e.to_string())
}

impl ExperimentConfig {
    /// The two-dimensional Case I experiment.
    pub fn case_one() -> Self {
        Self {
            grid: GridSection {
                dim: 2,
                cells: 64,
                length: 1.0,
                boundary: Boundary::Periodic,
            },
            physics: PhysicsSection {
                gamma1: 2.0,
                gamma2: 2.0,
                alpha: 1.5,
                sigma: 0.05,
                base_density: defaults::base_density(),
                amplitude1: defaults::amplitude1(),
                amplitude2: defaults::amplitude2(),
                shift: defaults::shift(),
            },
            solver: SolverSection::default(),
            sweep: SweepSection::default(),
            reference: ReferenceSection::default(),
        }
    }

    /// The two-dimensional Case II experiment.
    pub fn case_two() -> Self {
        let mut cfg = Self::case_one();
        cfg.physics.gamma1 = 1.8;
        cfg.physics.gamma2 = 1.8;
        cfg.physics.alpha = 1.6;
        cfg.sweep.slope_min = 1.5;
        cfg
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(toml_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` and applies `section.key=value` overrides; every
    /// overridden key must exist in the fully populated configuration.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let base: Self = toml::from_str(text).map_err(toml_err)?;
        base.with_overrides(overrides)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(&toml::to_string(self).map_err(toml_err)?).map_err(toml_err)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::config(item.clone(), "expected section.key=value"))?;
            let key = key.trim();
            let (section, field) = key
                .split_once('.')
                .ok_or_else(|| Error::config(key, "expected section.key"))?;
            let slot = table
                .get_mut(section)
                .and_then(|s| s.as_table_mut())
                .and_then(|s| s.get_mut(field))
                .ok_or_else(|| Error::config(key, "no such key"))?;
            *slot = parse_value(raw.trim());
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(overrides.join(" "), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// TOML text with every key spelled out.
    pub fn render(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.dim == 1 || g.dim == 2) {
            return Err(Error::config("grid.dim", format!("{} is not 1 or 2", g.dim)));
        }
        if g.cells < 4 {
            return Err(Error::config("grid.cells", "at least 4 cells per axis are required"));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            return Err(Error::config("grid.length", "must be positive"));
        }
        if g.boundary == Boundary::NoFlux && g.dim != 1 {
            return Err(Error::config("grid.boundary", "no-flux walls are supported in 1D only"));
        }
        let p = &self.physics;
        let d = g.dim as f64;
        for (key, gamma) in [("physics.gamma1", p.gamma1), ("physics.gamma2", p.gamma2)] {
            if !(gamma > 1.0 && gamma.is_finite()) {
                return Err(Error::config(key, format!("{gamma} must exceed 1")));
            }
        }
        if !(p.alpha > 0.0 && p.alpha < d) {
            return Err(Error::config("physics.alpha", format!("{} is outside (0, {d})", p.alpha)));
        }
        if p.sigma > 0.0 && !RieszParams::new(p.alpha, g.dim).map(|r| r.has_gradient()).unwrap_or(false) {
            return Err(Error::config("physics.alpha", "the interaction force needs alpha > 1"));
        }
        if !(p.sigma >= 0.0 && p.sigma.is_finite()) {
            return Err(Error::config("physics.sigma", "must be nonnegative"));
        }
        if !(p.base_density > 0.0 && p.base_density.is_finite()) {
            return Err(Error::config("physics.base_density", "must be positive"));
        }
        for (key, a) in [("physics.amplitude1", p.amplitude1), ("physics.amplitude2", p.amplitude2)] {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::config(key, format!("{a} is outside [0, 1)")));
            }
        }
        let s = &self.solver;
        if !(s.epsilon > 0.0 && s.epsilon.is_finite()) {
            return Err(Error::config("solver.epsilon", "must be positive"));
        }
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::config("solver.t_end", "must be positive"));
        }
        if s.snapshots < 3 {
            return Err(Error::config("solver.snapshots", "at least 3 are needed"));
        }
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return Err(Error::config("solver.cfl", "must lie in (0, 1]"));
        }
        if !(s.limit_cfl > 0.0 && s.limit_cfl <= 1.0) {
            return Err(Error::config("solver.limit_cfl", "must lie in (0, 1]"));
        }
        if !(s.rho_floor > 0.0) {
            return Err(Error::config("solver.rho_floor", "must be positive"));
        }
        if !(s.image_radius >= 0.0 && s.image_radius.is_finite()) {
            return Err(Error::config("solver.image_radius", "must be nonnegative"));
        }
        let w = &self.sweep;
        if w.epsilons.is_empty() || w.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::config("sweep.epsilons", "needs at least one positive value"));
        }
        if !(w.slope_min <= w.slope_max) {
            return Err(Error::config("sweep.slope_min", "exceeds slope_max"));
        }
        if !(w.monotone_tolerance >= 0.0) {
            return Err(Error::config("sweep.monotone_tolerance", "must be nonnegative"));
        }
        if self.reference.factor == 0 {
            return Err(Error::config("reference.factor", "must be at least 1"));
        }
        Ok(())
    }

    pub fn regime(&self) -> RegimeFlags {
        let (p, d) = (&self.physics, self.grid.dim);
        let law = |g: f64| PressureLaw::new(g).expect("validated").regime(p.alpha, d);
        RegimeFlags {
            species1: law(p.gamma1),
            species2: law(p.gamma2),
        }
    }

    /// Hypotheses of the stability theorem that the configuration violates.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (p, d) = (&self.physics, self.grid.dim as f64);
        let flags = self.regime();
        for (name, gamma, regime) in [("gamma1", p.gamma1, flags.species1), ("gamma2", p.gamma2, flags.species2)] {
            if regime == Regime::Outside {
                let why = if gamma >= 2.0 {
                    format!("alpha = {} is not in (1, {})", p.alpha, d / 2.0 + 1.0)
                } else {
                    format!(
                        "needs 2 - (alpha - 1)/d = {} <= {name} < 2 and 1 < alpha <= {}",
                        2.0 - (p.alpha - 1.0) / d,
                        d / 2.0 + 1.0
                    )
                };
                out.push(format!("physics.{name} = {gamma} is outside the stability theorem: {why}"));
            }
            let law = PressureLaw::new(gamma).expect("validated");
            if !law.interaction_admissible(p.alpha, self.grid.dim) {
                out.push(format!(
                    "physics.{name} = {gamma} is below 2d/(d + alpha - 1) = {}; interaction terms of weak solutions are not controlled",
                    2.0 * d / (d + p.alpha - 1.0)
                ));
            }
        }
        out
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        self.grid_with(self.grid.cells)
    }

    /// The same box with `cells` cells per axis.
    pub fn grid_with(&self, cells: usize) -> Result<GridSpec> {
        let g = &self.grid;
        let cells = vec![cells; g.dim];
        let extent = vec![(0.0, g.length); g.dim];
        GridSpec::new(g.dim, &cells, &extent, g.boundary)
    }

    pub fn reference_grid(&self) -> Result<GridSpec> {
        self.grid_with(self.grid.cells * self.reference.factor)
    }

    pub fn solver_config(&self, epsilon: f64) -> Result<SolverConfig> {
        let (p, s) = (&self.physics, &self.solver);
        let mut cfg = SolverConfig::diffusive(epsilon, p.sigma, p.gamma1, p.gamma2, p.alpha)?;
        cfg.cfl = s.cfl;
        cfg.rho_floor = s.rho_floor;
        cfg.t_end = s.t_end;
        cfg.splitting = s.splitting;
        cfg.image_radius = s.image_radius;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn limit_config(&self) -> Result<LimitConfig> {
        let p = &self.physics;
        let mut cfg = LimitConfig::new(p.sigma, p.gamma1, p.gamma2, p.alpha)?;
        cfg.cfl = self.solver.limit_cfl;
        cfg.image_radius = self.solver.image_radius;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn laws(&self) -> Result<(PressureLaw, PressureLaw)> {
        Ok((PressureLaw::new(self.physics.gamma1)?, PressureLaw::new(self.physics.gamma2)?))
    }

    /// Equally spaced output times on [0, t_end].
    pub fn output_times(&self) -> Vec<f64> {
        let k = self.solver.snapshots - 1;
        (0..=k).map(|i| self.solver.t_end * i as f64 / k as f64).collect()
    }
}

/// Reads an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\ncells = 32\n\n[physics]\ngamma1 = 2.0\ngamma2 = 2.0\nalpha = 1.5\nsigma = 0.05\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid.dim, 2);
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.sweep.epsilons, vec![0.2, 0.1, 0.05, 0.025]);
        assert_eq!(cfg.reference.factor, 2);
        assert!(cfg.regime().in_theorem());
        assert!(cfg.warnings().is_empty());
    }

    #[test]
    fn alpha_above_dimension_is_an_error() {
        let text = MINIMAL.replace("alpha = 1.5", "alpha = 2.5");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("physics.alpha"), "{err}");
    }

    #[test]
    fn case_two_violation_warns() {
        let text = MINIMAL
            .replace("gamma1 = 2.0", "gamma1 = 1.5")
            .replace("gamma2 = 2.0", "gamma2 = 1.5")
            .replace("alpha = 1.5", "alpha = 1.2");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert!(!cfg.regime().in_theorem());
        let w = cfg.warnings();
        assert!(w.iter().any(|m| m.contains("gamma1") && m.contains("1.9")), "{w:?}");
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}colour = 3\n")).is_err());
        assert!(ExperimentConfig::parse("[grid]\ncells = 8\n").is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("cells = 32", "cells = \"many\"")).is_err());
    }

    #[test]
    fn render_round_trips() {
        for cfg in [ExperimentConfig::case_one(), ExperimentConfig::case_two()] {
            assert_eq!(ExperimentConfig::parse(&cfg.render()).unwrap(), cfg);
        }
    }

    #[test]
    fn overrides_apply_and_must_exist() {
        let cfg = ExperimentConfig::case_one();
        let over = cfg
            .with_overrides(&["sweep.epsilons=[0.1]".into(), "solver.splitting=pressure-in-flux".into()])
            .unwrap();
        assert_eq!(over.sweep.epsilons, vec![0.1]);
        assert_eq!(over.solver.splitting, Splitting::PressureInFlux);
        let err = cfg.with_overrides(&["solver.nope=1".into()]).unwrap_err();
        assert!(err.to_string().contains("solver.nope"));
        assert!(cfg.with_overrides(&["grid.cells=abc".into()]).is_err());
    }

    #[test]
    fn output_times_are_even() {
        let t = ExperimentConfig::case_one().output_times();
        assert_eq!(t.len(), 51);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[50], 0.25);
    }
}
