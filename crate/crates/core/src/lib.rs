//! Two-species Euler–Riesz flows with friction, their aggregation-diffusion
//! limit, and relative-energy diagnostics comparing the two.

pub mod config;
pub mod error;
pub mod euler;
pub mod grid;
pub mod harness;
pub mod io;
pub mod limit;
pub mod relent;
pub mod riesz;
pub mod sum;
pub mod thermo;
pub mod verify;

pub use config::{ExperimentConfig, RegimeFlags};
pub use error::{Error, Result};
pub use euler::{EnergyReport, EulerRiesz, FluidState, Scaling, SolverConfig, Splitting, Trajectory};
pub use grid::{integrate, lp_norm, Boundary, GridSpec, ScalarField, TensorField, VectorField};
pub use harness::{fit_rate, rescale_diffusive, run_sweep, well_prepared_init, RateFit, SweepResult};
pub use limit::{AggregationDiffusion, LimitConfig, ReferenceSolution};
pub use relent::{RefSnapshot, RelEnergyReport, RelativeEnergy};
pub use riesz::{RieszOperator, RieszParams};
pub use thermo::{PressureLaw, Regime};
