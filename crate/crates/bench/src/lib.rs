//! Shared fixtures for the benchmarks.

use bipolar_core::harness::initial_densities;
use bipolar_core::{well_prepared_init, AggregationDiffusion, ExperimentConfig, FluidState, GridSpec, ScalarField};

/// Case I configuration on an `cells × cells` torus.
pub fn config(cells: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::case_one();
    cfg.grid.cells = cells;
    cfg
}

pub fn grid(cfg: &ExperimentConfig) -> GridSpec {
    cfg.grid_spec().expect("valid grid")
}

/// The perturbed initial densities.
pub fn densities(cfg: &ExperimentConfig) -> (ScalarField, ScalarField) {
    initial_densities(cfg, &grid(cfg)).expect("initial data")
}

pub fn limit_solver(cfg: &ExperimentConfig) -> AggregationDiffusion {
    AggregationDiffusion::new(&grid(cfg), cfg.limit_config().expect("limit config")).expect("limit solver")
}

/// Well-prepared Euler data.
pub fn euler_state(cfg: &ExperimentConfig) -> FluidState {
    let (rho, n) = densities(cfg);
    well_prepared_init(&rho, &n, &limit_solver(cfg)).expect("well-prepared data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let cfg = config(8);
        let s = euler_state(&cfg);
        assert_eq!(s.rho.values().len(), 64);
        assert!(s.rho.min() > 0.0);
    }
}
