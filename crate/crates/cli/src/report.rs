//! `bipolar report`: turns the CSV tables of a run directory into plots.

use std::fs;
use std::path::{Path, PathBuf};

use bipolar_core::fit_rate;
use bipolar_core::io::parse_csv;

use crate::plot::{Plot, Series};
use crate::Failure;

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
    parse_csv(&text).ok_or_else(|| Failure::Failed(format!("{}: empty table", path.display())))
}

fn pairs(rows: &[Vec<f64>], x: usize, y: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.len() > x.max(y))
        .map(|r| (r[x], f(r[y])))
        .collect()
}

fn log10_positive(v: f64) -> f64 {
    if v > 0.0 {
        v.log10()
    } else {
        f64::NAN
    }
}

/// Ψ against t for every `relent_eps_*.csv`, one line per ε.
fn psi_plot(files: &[(f64, PathBuf)]) -> Result<Option<String>, Failure> {
    let mut series = Vec::new();
    for (eps, path) in files {
        let (header, rows) = read_table(path)?;
        let (Some(t), Some(psi)) = (column(&header, "t"), column(&header, "psi")) else {
            return Err(Failure::Failed(format!("{}: missing t or psi column", path.display())));
        };
        series.push(Series::line(format!("eps = {eps}"), pairs(&rows, t, psi, log10_positive)));
    }
    Ok(Plot {
        title: "Relative energy".into(),
        x_label: "t".into(),
        y_label: "log10 Psi".into(),
        series,
    }
    .to_svg())
}

/// log sup Ψ against log ε with the fitted line.
fn rate_plot(dir: &Path, sweep: &Path) -> Result<Option<String>, Failure> {
    let (header, rows) = read_table(sweep)?;
    let (Some(e), Some(s)) = (column(&header, "epsilon"), column(&header, "sup_psi")) else {
        return Err(Failure::Failed(format!("{}: missing epsilon or sup_psi column", sweep.display())));
    };
    let floor_fit = dir
        .join("fit.csv")
        .exists()
        .then(|| read_table(&dir.join("fit.csv")))
        .transpose()?
        .and_then(|(h, r)| {
            let row = r.first()?;
            Some((row[column(&h, "slope")?], row[column(&h, "intercept")?], row[column(&h, "floor")?]))
        });
    let floor = floor_fit.map_or(0.0, |f| f.2);
    let data: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.len() > e.max(s) && r[e] > 0.0 && r[s] - floor > 0.0)
        .map(|r| (r[e], r[s] - floor))
        .collect();
    let fit = match floor_fit {
        Some((slope, intercept, _)) => Some((slope, intercept)),
        None => fit_rate(&data).ok().map(|f| (f.slope, f.intercept)),
    };
    let mut measured = Series::line("sup Psi", data.iter().map(|&(x, y)| (x.log10(), y.log10())).collect());
    measured.markers = true;
    let mut series = vec![measured];
    if let Some((slope, intercept)) = fit {
        // the fit is in natural logarithms
        let line = data
            .iter()
            .map(|&(x, _)| (x.log10(), (intercept + slope * x.ln()) / std::f64::consts::LN_10))
            .collect();
        let mut s = Series::line(format!("fit, slope {slope:.3}"), line);
        s.dashed = true;
        series.push(s);
    }
    Ok(Plot {
        title: "Rate in epsilon".into(),
        x_label: "log10 epsilon".into(),
        y_label: "log10 sup Psi".into(),
        series,
    }
    .to_svg())
}

fn energy_plot(path: &Path) -> Result<Option<String>, Failure> {
    let (header, rows) = read_table(path)?;
    let Some(t) = column(&header, "t") else {
        return Err(Failure::Failed(format!("{}: missing t column", path.display())));
    };
    let series = ["total", "kinetic", "internal1", "internal2", "interaction"]
        .iter()
        .filter_map(|name| column(&header, name).map(|c| Series::line(*name, pairs(&rows, t, c, |v| v))))
        .collect();
    Ok(Plot {
        title: "Energy".into(),
        x_label: "t".into(),
        y_label: "energy".into(),
        series,
    }
    .to_svg())
}

pub fn render(dir: &Path) -> Result<(), Failure> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::Config(format!("configuration key `report dir`: {}: {e}", dir.display())))?;
    let mut relent = Vec::new();
    let mut names = Vec::new();
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(eps) = name.strip_prefix("relent_eps_").and_then(|r| r.strip_suffix(".csv")) {
            if let Ok(e) = eps.parse::<f64>() {
                relent.push((e, entry.path()));
            }
        }
        names.push(name);
    }
    relent.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: Option<String>| -> Result<(), Failure> {
        if let Some(svg) = svg {
            let path = dir.join(name);
            fs::write(&path, svg).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(())
    };
    let mut found = false;
    if !relent.is_empty() {
        found = true;
        emit("psi_vs_t.svg", psi_plot(&relent)?)?;
    }
    if names.iter().any(|n| n == "sweep.csv") {
        found = true;
        emit("rate.svg", rate_plot(dir, &dir.join("sweep.csv"))?)?;
    }
    if names.iter().any(|n| n == "energy.csv") {
        found = true;
        emit("energy.svg", energy_plot(&dir.join("energy.csv"))?)?;
    }
    if !found {
        return Err(Failure::Config(format!(
            "configuration key `report dir`: no sweep.csv, relent_eps_*.csv or energy.csv in {}",
            dir.display()
        )));
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
