//! Regularized lattice sums for the singular self-interaction of a cell.
//!
//! The midpoint rule for a weakly singular kernel |x|^{-s} is corrected by the
//! analytically continued lattice sum Z(s) = Σ' |λ|^{-s} over the grid lattice
//! (an Epstein zeta value), which makes the quadrature second order.

use statrs::function::gamma::{gamma, gamma_ur};

/// Γ(a, x) x^{-a}.
fn upper_gamma_scaled(a: f64, x: f64) -> f64 {
    gamma_ur(a, x) * gamma(a) * x.powf(-a)
}

/// Σ' over a rectangular lattice with the given spacings of G(a, π|λ|²),
/// truncated where the Gaussian tail is below 1e-17.
fn theta_sum(spacing: &[f64], a: f64) -> f64 {
    let range: Vec<i64> = spacing
        .iter()
        .map(|&h| (6.5 / h).ceil() as i64 + 1)
        .collect();
    let pi = std::f64::consts::PI;
    let mut acc = crate::sum::Neumaier::new();
    match spacing.len() {
        1 => {
            for i in 1..=range[0] {
                let r2 = (i as f64 * spacing[0]).powi(2);
                acc.add(2.0 * upper_gamma_scaled(a, pi * r2));
            }
        }
        _ => {
            for i in -range[0]..=range[0] {
                for j in -range[1]..=range[1] {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let r2 = (i as f64 * spacing[0]).powi(2) + (j as f64 * spacing[1]).powi(2);
                    if pi * r2 > 45.0 {
                        continue;
                    }
                    acc.add(upper_gamma_scaled(a, pi * r2));
                }
            }
        }
    }
    acc.total()
}

/// Epstein zeta Z(s) = Σ'_{λ} |λ|^{-s} of the lattice diag(spacing)·ℤ^d,
/// analytically continued to 0 < s < d.
pub fn epstein_zeta(spacing: &[f64], s: f64) -> f64 {
    let d = spacing.len() as f64;
    let area: f64 = spacing.iter().product();
    // Rescale to unit covolume, where the Ewald split is balanced.
    let c = area.powf(-1.0 / d);
    let unit: Vec<f64> = spacing.iter().map(|h| h * c).collect();
    let dual: Vec<f64> = unit.iter().map(|h| 1.0 / h).collect();
    let pi = std::f64::consts::PI;
    let bracket = theta_sum(&unit, s / 2.0) + theta_sum(&dual, (d - s) / 2.0) + 2.0 / (s - d)
        - 2.0 / s;
    let z_unit = bracket * pi.powf(s / 2.0) / gamma(s / 2.0);
    c.powf(s) * z_unit
}

/// Regularized second moments M_k = Σ' λ_k² |λ|^{-s-2}, one per axis.
///
/// Uses Euler's identity for the homogeneous lattice sum: the derivative of
/// Z(s) in the spacing h_k equals −(s/h_k) M_k.
pub fn axis_moments(spacing: &[f64], s: f64) -> Vec<f64> {
    let d = spacing.len();
    let z = epstein_zeta(spacing, s);
    let isotropic = spacing.iter().all(|&h| h == spacing[0]);
    if d == 1 || isotropic {
        return vec![z / d as f64; d];
    }
    (0..d)
        .map(|k| {
            let step = 1e-4 * spacing[k];
            let mut up = spacing.to_vec();
            let mut dn = spacing.to_vec();
            up[k] += step;
            dn[k] -= step;
            let dz = (epstein_zeta(&up, s) - epstein_zeta(&dn, s)) / (2.0 * step);
            -spacing[k] * dz / s
        })
        .collect()
}

/// Correction for the own cell of the unscaled kernel |x|^{β-d}: replacing
/// the omitted midpoint term by this weight gives second order accuracy.
pub fn self_weight(spacing: &[f64], beta: f64) -> f64 {
    let d = spacing.len() as f64;
    let area: f64 = spacing.iter().product();
    -area * epstein_zeta(spacing, d - beta)
}
