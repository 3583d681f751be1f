//! `bipolar`: runs the Euler–Riesz solver, the limit solver, ε-sweeps and
//! property suites, and renders the resulting tables as SVG plots.
//!
//! Exit codes: 0 on success, 1 when a suite or sweep check fails or a run
//! breaks down, 2 on configuration errors.

mod plot;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bipolar_core::harness::{initial_densities, well_prepared_init};
use bipolar_core::io;
use bipolar_core::verify::{run_suite, Suite};
use bipolar_core::{AggregationDiffusion, Error, EulerRiesz, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bipolar", version, about = "Bipolar Euler-Riesz relaxation laboratory")]
struct Cli {
    /// Experiment configuration (TOML); the built-in Case I setup when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "BIPOLAR_OUT", default_value = "out")]
    out: PathBuf,

    /// Override a configuration key, e.g. `--set solver.epsilon=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Seed for the sampled suites (same as `--set sweep.seed=N`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Euler-Riesz run at `solver.epsilon` from well-prepared data.
    Simulate {
        /// Write a field dump every this many snapshots (and the last one).
        #[arg(long, default_value_t = 10)]
        dump_every: usize,
    },
    /// Aggregation-diffusion run with auxiliary velocities and error terms.
    Limit {
        #[arg(long, default_value_t = 10)]
        dump_every: usize,
    },
    /// ε-sweep of the relative energy and the rate fit.
    Sweep,
    /// Runs a property suite: kernel, energy, lemmas, weakform or inequality.
    Verify { suite: String },
    /// Renders the CSV tables of a directory (default: the output directory) as SVG.
    Report { dir: Option<PathBuf> },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Failed(other.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Failed(format!("{e:#}"))
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("sweep.seed={seed}"));
    }
    let cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("configuration key `--config`: {}: {e}", path.display())))?;
            ExperimentConfig::parse_with_overrides(&text, &overrides)?
        }
        None => ExperimentConfig::case_one().with_overrides(&overrides)?,
    };
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(dir: &Path, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, "config.toml", &cfg.render())
}

fn dumped(k: usize, last: usize, every: usize) -> bool {
    k == last || (every > 0 && k % every == 0)
}

fn simulate(cli: &Cli, dump_every: usize) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let grid = cfg.grid_spec()?;
    let eps = cfg.solver.epsilon;
    let limit = AggregationDiffusion::new(&grid, cfg.limit_config()?)?;
    let (rho0, n0) = initial_densities(&cfg, &grid)?;
    let init = well_prepared_init(&rho0, &n0, &limit)?;
    let solver = EulerRiesz::new(&grid, cfg.solver_config(eps)?)?;
    let traj = solver.run(&init, &cfg.output_times())?;
    prepare_out(&cli.out, &cfg)?;
    write(&cli.out, "energy.csv", &io::energy_csv(&traj.energies))?;
    let last = traj.snapshots.len() - 1;
    for (k, s) in traj.snapshots.iter().enumerate() {
        if dumped(k, last, dump_every) {
            write(&cli.out, &format!("state_{k:04}.csv"), &io::state_csv(s))?;
        }
    }
    let e0 = &traj.energies[0];
    let e1 = &traj.energies[last];
    println!("epsilon {eps}, {} steps, min dt {:e}", traj.steps, traj.min_dt);
    println!(
        "H(0) = {:e}, H(T) = {:e}, dissipated {:e}, mass drift {:e} / {:e}",
        e0.total,
        e1.total,
        traj.dissipated[last],
        (e1.mass1 - e0.mass1).abs() / e0.mass1,
        (e1.mass2 - e0.mass2).abs() / e0.mass2
    );
    println!("wrote {}", cli.out.display());
    Ok(())
}

fn limit(cli: &Cli, dump_every: usize) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let grid = cfg.grid_spec()?;
    let solver = AggregationDiffusion::new(&grid, cfg.limit_config()?)?;
    let (rho0, n0) = initial_densities(&cfg, &grid)?;
    let sol = solver.run(&rho0, &n0, 0.0, &cfg.output_times())?;
    prepare_out(&cli.out, &cfg)?;
    let last = sol.len() - 1;
    for k in 0..sol.len() {
        if dumped(k, last, dump_every) {
            let errors = if sol.len() >= 3 { Some(sol.error_terms(k)?) } else { None };
            write(&cli.out, &format!("limit_{k:04}.csv"), &io::limit_csv(&sol, k, errors.as_ref()))?;
        }
    }
    let (lo, hi) = sol.bounds();
    println!("{} steps, density range [{lo:e}, {hi:e}], mass drift {:e}", sol.steps(), sol.mass_drift()?);
    if let Err(e) = sol.check_bounded_away() {
        println!("note: {e}");
    }
    println!("wrote {}", cli.out.display());
    Ok(())
}

fn sweep(cli: &Cli) -> Result<bool, Failure> {
    let cfg = load_config(cli)?;
    let (result, runs) = bipolar_core::run_sweep(&cfg)?;
    prepare_out(&cli.out, &cfg)?;
    write(&cli.out, "sweep.csv", &io::sweep_csv(&result))?;
    for run in &runs {
        write(
            &cli.out,
            &format!("relent_eps_{}.csv", run.epsilon),
            &io::relent_csv(&run.check.reports),
        )?;
    }
    if let Some(fit) = result.fit {
        let floor = result.floor.map_or(0.0, |f| f.floor);
        write(
            &cli.out,
            "fit.csv",
            &format!(
                "slope,intercept,residual,floor\n{:e},{:e},{:e},{:e}\n",
                fit.slope, fit.intercept, fit.residual, floor
            ),
        )?;
    }

    println!("regime {} (in theorem: {})", result.regime, result.in_theorem);
    println!("Psi-scale {:e}", result.psi_scale);
    for e in &result.entries {
        match &e.error {
            None => println!(
                "epsilon {:<8} Psi(0) {:.3e}  sup Psi {:.3e}  C {:.3e}  min residual {:.3e}  steps {}",
                e.epsilon, e.psi0, e.sup_psi, e.own_c, e.min_residual, e.steps
            ),
            Some(err) => println!("epsilon {:<8} failed: {err}", e.epsilon),
        }
    }
    if let Some(f) = result.floor {
        println!("discretization floor {:e} (sup Psi {:e} at N, {:e} at 2N)", f.floor, f.sup_coarse, f.sup_fine);
    }
    for note in &result.notes {
        println!("note: {note}");
    }
    let Some(fit) = result.fit else {
        println!("wrote {}", cli.out.display());
        return Ok(result.entries.iter().all(|e| e.error.is_none()));
    };
    let (lo, hi) = result.slope_range;
    println!("fitted slope {:.4} (window [{lo}, {hi}])", fit.slope);
    println!("monotone: {}, envelope C = {:e} dominates: {}", result.monotone, result.envelope_c, result.envelope_ok);
    let ok = result.passed();
    println!("sweep {}", if ok { "passed" } else { "FAILED" });
    println!("wrote {}", cli.out.display());
    Ok(ok)
}

fn verify(cli: &Cli, suite: &str) -> Result<bool, Failure> {
    let suite: Suite = suite.parse()?;
    let cfg = load_config(cli)?;
    let rep = run_suite(suite, &cfg).map_err(|e| match e {
        Error::Config { .. } => Failure::from(e),
        other => Failure::Failed(format!("suite {suite}: {other}")),
    })?;
    print!("{}", rep.render());
    Ok(rep.passed())
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Simulate { dump_every } => simulate(cli, *dump_every).map(|_| true),
        Command::Limit { dump_every } => limit(cli, *dump_every).map(|_| true),
        Command::Sweep => sweep(cli),
        Command::Verify { suite } => verify(cli, suite),
        Command::Report { dir } => report::render(dir.as_deref().unwrap_or(&cli.out)).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
