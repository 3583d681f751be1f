//! CSV renderings of reports and fields. Numbers use Rust's shortest
//! round-trip `{:e}` form, so equal values give byte-identical files.

use crate::euler::{EnergyReport, FluidState};
use crate::harness::SweepResult;
use crate::limit::{ErrorTerms, ReferenceSolution};
use crate::relent::RelEnergyReport;

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(num).collect::<Vec<_>>().join(",")
}

pub const ENERGY_HEADER: &str = "t,kinetic,internal1,internal2,interaction,total,dissipation,mass1,mass2";

pub fn energy_csv(reports: &[EnergyReport]) -> String {
    let mut out = format!("{ENERGY_HEADER}\n");
    for r in reports {
        out.push_str(&row([
            r.t,
            r.kinetic,
            r.internal1,
            r.internal2,
            r.interaction,
            r.total,
            r.dissipation,
            r.mass1,
            r.mass2,
        ]));
        out.push('\n');
    }
    out
}

pub fn relent_csv(reports: &[RelEnergyReport]) -> String {
    let mut out = format!("{}\n", RelEnergyReport::CSV_HEADER);
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub const SWEEP_HEADER: &str = "epsilon,psi0,sup_psi,envelope_C,slope_contrib,regime_flag";

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for e in &result.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(e.epsilon),
            num(e.psi0),
            num(e.sup_psi),
            num(e.own_c),
            num(e.slope_contrib),
            result.regime
        ));
    }
    out
}

fn axis_names(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

/// cell, coordinates, rho, m…, n, w…
pub fn state_csv(state: &FluidState) -> String {
    let g = state.grid();
    let d = g.dim();
    let axes = axis_names(d);
    let mut header = vec!["cell".to_string()];
    header.extend(axes.iter().map(|a| a.to_string()));
    header.push("rho".into());
    header.extend(axes.iter().map(|a| format!("m_{a}")));
    header.push("n".into());
    header.extend(axes.iter().map(|a| format!("w_{a}")));
    let mut out = header.join(",") + "\n";
    for c in 0..g.len() {
        let x = g.center(c);
        let mut vals: Vec<f64> = x[..d].to_vec();
        vals.push(state.rho.values()[c]);
        vals.extend((0..d).map(|k| state.m.comp(k)[c]));
        vals.push(state.n.values()[c]);
        vals.extend((0..d).map(|k| state.w.comp(k)[c]));
        out.push_str(&format!("{c},{}\n", row(vals)));
    }
    out
}

/// cell, coordinates, rho, n, u…, v…, and e1…, e2… when available.
pub fn limit_csv(sol: &ReferenceSolution, k: usize, errors: Option<&ErrorTerms>) -> String {
    let g = sol.grid();
    let d = g.dim();
    let axes = axis_names(d);
    let mut header = vec!["cell".to_string()];
    header.extend(axes.iter().map(|a| a.to_string()));
    header.push("rho".into());
    header.push("n".into());
    for name in ["u", "v"] {
        header.extend(axes.iter().map(|a| format!("{name}_{a}")));
    }
    if errors.is_some() {
        for name in ["e1", "e2"] {
            header.extend(axes.iter().map(|a| format!("{name}_{a}")));
        }
    }
    let mut out = header.join(",") + "\n";
    for c in 0..g.len() {
        let x = g.center(c);
        let mut vals: Vec<f64> = x[..d].to_vec();
        vals.push(sol.rho(k).values()[c]);
        vals.push(sol.n(k).values()[c]);
        vals.extend((0..d).map(|i| sol.u(k).comp(i)[c]));
        vals.extend((0..d).map(|i| sol.v(k).comp(i)[c]));
        if let Some(e) = errors {
            vals.extend((0..d).map(|i| e.e1.comp(i)[c]));
            vals.extend((0..d).map(|i| e.e2.comp(i)[c]));
        }
        out.push_str(&format!("{c},{}\n", row(vals)));
    }
    out
}

/// Parses a numeric CSV with a header line into column names and rows.
/// Non-numeric cells read as NaN.
pub fn parse_csv(text: &str) -> Option<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next()?.split(',').map(|s| s.trim().to_string()).collect();
    let rows = lines
        .map(|l| l.split(',').map(|s| s.trim().parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    Some((header, rows))
}
