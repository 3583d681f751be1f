//! Riesz kernel K_α(x) = |x|^{α-d}/(d-α), its gradient, the discrete
//! convolution operators and the interaction energy.

mod fft;
pub mod lattice;

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{integrate, Boundary, GridSpec, ScalarField, VectorField};
use fft::Fft2;

/// Default number of box lengths covered by the periodic image sum.
pub const DEFAULT_IMAGE_RADIUS: f64 = 3.0;

/// Order α and dimension d of the kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszParams {
    alpha: f64,
    dim: usize,
}

impl RieszParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::param("dim", format!("{dim} is not 1 or 2")));
        }
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(Error::param("alpha", format!("{alpha} is outside (0, {dim})")));
        }
        Ok(Self { alpha, dim })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 1/(d-α).
    pub fn prefactor(&self) -> f64 {
        1.0 / (self.dim as f64 - self.alpha)
    }

    /// Whether the kernel gradient is locally integrable, 1 < α < d.
    pub fn has_gradient(&self) -> bool {
        self.alpha > 1.0
    }

    pub fn require_gradient(&self) -> Result<()> {
        if self.has_gradient() {
            Ok(())
        } else {
            Err(Error::param(
                "alpha",
                format!("{} must lie in (1, {}) for the kernel gradient", self.alpha, self.dim),
            ))
        }
    }

    /// The constant c with |∇K_α| = c·K_{α-1}.
    pub fn gradient_domination_constant(&self) -> f64 {
        self.dim as f64 - self.alpha + 1.0
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// K_α(x).
pub fn kernel_eval(x: &[f64], params: &RieszParams) -> Result<f64> {
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::Singular);
    }
    Ok(r.powf(params.alpha - params.dim as f64) * params.prefactor())
}

/// ∇K_α(x) = -x|x|^{α-d-2}; the second entry is 0 in 1D.
pub fn kernel_gradient(x: &[f64], params: &RieszParams) -> Result<[f64; 2]> {
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::Singular);
    }
    let w = -r.powf(params.alpha - params.dim as f64 - 2.0);
    let mut g = [0.0; 2];
    for (k, xk) in x.iter().enumerate() {
        g[k] = w * xk;
    }
    Ok(g)
}

/// Weight tables of the discrete operator, indexed by displacement.
#[derive(Debug)]
enum Tables {
    /// Circulant over the torus: entry `a*n1 + b` is the weight for the
    /// displacement `(a, b)` modulo the grid.
    Periodic {
        scalar: Vec<f64>,
        gradient: Option<Vec<Vec<f64>>>,
        fft: Fft2,
        scalar_hat: Vec<Complex<f64>>,
        gradient_hat: Option<Vec<Vec<Complex<f64>>>>,
    },
    /// Zero extension on an interval: entry `a + n - 1` for displacement a.
    Bounded { scalar: Vec<f64> },
}

/// The discrete fractional integral I_β on a fixed grid, together with the
/// kernel gradient when 1 < β < d.
///
/// Off-diagonal weights are point evaluations of the kernel at cell-center
/// displacements; the own cell gets a lattice-corrected weight. On the torus
/// the kernel is summed over the periodic images within a radius.
#[derive(Debug)]
pub struct RieszOperator {
    grid: GridSpec,
    params: RieszParams,
    image_radius: f64,
    self_weight: f64,
    tables: Tables,
}

impl RieszOperator {
    pub fn new(grid: &GridSpec, params: RieszParams) -> Result<Self> {
        Self::with_image_radius(grid, params, DEFAULT_IMAGE_RADIUS)
    }

    pub fn with_image_radius(grid: &GridSpec, params: RieszParams, image_radius: f64) -> Result<Self> {
        if params.dim != grid.dim() {
            return Err(Error::param(
                "dim",
                format!("kernel dimension {} on a {}D grid", params.dim, grid.dim()),
            ));
        }
        if !(image_radius >= 0.0 && image_radius.is_finite()) {
            return Err(Error::param("image_radius", format!("{image_radius} is not a finite nonnegative radius")));
        }
        let beta = params.alpha;
        let volume = grid.cell_volume();
        let self_weight = lattice::self_weight(grid.spacing(), beta);
        let tables = match grid.boundary() {
            Boundary::Periodic => {
                let (scalar, gradient) = periodic_tables(grid, &params, image_radius, self_weight / volume);
                let fft = Fft2::new([grid.n(0), grid.n(1)]);
                let vol = |t: &Vec<f64>| t.iter().map(|v| v * volume).collect::<Vec<_>>();
                let scalar_hat = fft.forward_real(&vol(&scalar));
                let gradient_hat = gradient
                    .as_ref()
                    .map(|g| g.iter().map(|c| fft.forward_real(&vol(c))).collect());
                Tables::Periodic {
                    scalar,
                    gradient,
                    fft,
                    scalar_hat,
                    gradient_hat,
                }
            }
            Boundary::NoFlux => {
                let n = grid.n(0) as isize;
                let h = grid.h(0);
                let s = 1.0 - beta;
                let scalar = (-(n - 1)..n)
                    .map(|a| {
                        if a == 0 {
                            self_weight / volume
                        } else {
                            (a.unsigned_abs() as f64 * h).powf(-s)
                        }
                    })
                    .collect();
                Tables::Bounded { scalar }
            }
        };
        Ok(Self {
            grid: *grid,
            params,
            image_radius,
            self_weight,
            tables,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &RieszParams {
        &self.params
    }

    pub fn image_radius(&self) -> f64 {
        self.image_radius
    }

    /// Weight of the own cell for the unscaled kernel, already multiplied by
    /// the cell volume.
    pub fn self_weight(&self) -> f64 {
        self.self_weight
    }

    fn scalar_weight(&self, i: usize, j: usize) -> f64 {
        match &self.tables {
            Tables::Periodic { scalar, .. } => scalar[self.circ_index(i, j)],
            Tables::Bounded { scalar } => {
                let n = self.grid.n(0);
                scalar[i + n - 1 - j]
            }
        }
    }

    fn circ_index(&self, i: usize, j: usize) -> usize {
        let (n0, n1) = (self.grid.n(0), self.grid.n(1));
        let (i0, i1) = self.grid.coords(i);
        let (j0, j1) = self.grid.coords(j);
        ((i0 + n0 - j0) % n0) * n1 + (i1 + n1 - j1) % n1
    }

    /// Matrix entry W_ij of K_α∗ (without the cell volume), symmetric in i, j.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.scalar_weight(i, j) * self.params.prefactor()
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        f.ensure_grid(&self.grid)
    }

    /// I_β f by direct summation, with β the operator order.
    pub fn frac_integral_direct(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let vol = self.grid.cell_volume();
        let fv = f.values();
        let out: Vec<f64> = match &self.tables {
            Tables::Periodic { scalar, .. } => {
                let (n0, n1) = (self.grid.n(0), self.grid.n(1));
                (0..self.grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let (i0, i1) = self.grid.coords(i);
                        let mut acc = 0.0;
                        for j0 in 0..n0 {
                            let row = ((i0 + n0 - j0) % n0) * n1;
                            let base = j0 * n1;
                            for j1 in 0..n1 {
                                acc += scalar[row + (i1 + n1 - j1) % n1] * fv[base + j1];
                            }
                        }
                        acc * vol
                    })
                    .collect()
            }
            Tables::Bounded { scalar } => {
                let n = self.grid.n(0);
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut acc = 0.0;
                        for (j, v) in fv.iter().enumerate() {
                            acc += scalar[i + n - 1 - j] * v;
                        }
                        acc * vol
                    })
                    .collect()
            }
        };
        ScalarField::new(self.grid, out)
    }

    /// I_β f via the fast circular convolution.
    pub fn frac_integral_fft(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        match &self.tables {
            Tables::Periodic {
                fft, scalar_hat, ..
            } => {
                let spec = fft.forward_real(f.values());
                ScalarField::new(self.grid, fft.apply(&spec, scalar_hat))
            }
            Tables::Bounded { .. } => Err(Error::InvalidGrid(
                "the FFT path requires a periodic grid".into(),
            )),
        }
    }

    /// K_α∗f by direct summation.
    pub fn conv_direct(&self, f: &ScalarField) -> Result<ScalarField> {
        Ok(self.frac_integral_direct(f)?.scale(self.params.prefactor()))
    }

    /// K_α∗f via FFT; periodic grids only.
    pub fn conv_fft_periodic(&self, f: &ScalarField) -> Result<ScalarField> {
        Ok(self.frac_integral_fft(f)?.scale(self.params.prefactor()))
    }

    /// K_α∗f, through the FFT when the grid is periodic.
    pub fn conv(&self, f: &ScalarField) -> Result<ScalarField> {
        if self.grid.is_periodic() {
            self.conv_fft_periodic(f)
        } else {
            self.conv_direct(f)
        }
    }

    fn gradient_table(&self) -> Result<&Vec<Vec<f64>>> {
        self.params.require_gradient()?;
        match &self.tables {
            Tables::Periodic {
                gradient: Some(g), ..
            } => Ok(g),
            _ => Err(Error::InvalidGrid(
                "kernel gradient needs a periodic grid in 2D".into(),
            )),
        }
    }

    /// ∇K_α∗f by direct summation.
    pub fn conv_grad_direct(&self, f: &ScalarField) -> Result<VectorField> {
        self.check(f)?;
        let table = self.gradient_table()?;
        let vol = self.grid.cell_volume();
        let fv = f.values();
        let (n0, n1) = (self.grid.n(0), self.grid.n(1));
        let comps = table
            .iter()
            .map(|tk| {
                (0..self.grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let (i0, i1) = self.grid.coords(i);
                        let mut acc = 0.0;
                        for j0 in 0..n0 {
                            let row = ((i0 + n0 - j0) % n0) * n1;
                            let base = j0 * n1;
                            for j1 in 0..n1 {
                                acc += tk[row + (i1 + n1 - j1) % n1] * fv[base + j1];
                            }
                        }
                        acc * vol
                    })
                    .collect()
            })
            .collect();
        VectorField::new(self.grid, comps)
    }

    /// ∇K_α∗f via FFT.
    pub fn conv_grad_fft(&self, f: &ScalarField) -> Result<VectorField> {
        self.check(f)?;
        self.params.require_gradient()?;
        match &self.tables {
            Tables::Periodic {
                fft,
                gradient_hat: Some(gh),
                ..
            } => {
                let spec = fft.forward_real(f.values());
                let comps = gh.iter().map(|g| fft.apply(&spec, g)).collect();
                VectorField::new(self.grid, comps)
            }
            _ => Err(Error::InvalidGrid(
                "kernel gradient needs a periodic grid in 2D".into(),
            )),
        }
    }

    /// ∇K_α∗f, through the FFT.
    pub fn conv_grad(&self, f: &ScalarField) -> Result<VectorField> {
        self.conv_grad_fft(f)
    }

    /// Both K_α∗f and ∇K_α∗f from a single forward transform.
    pub fn conv_and_grad(&self, f: &ScalarField) -> Result<(ScalarField, VectorField)> {
        self.check(f)?;
        self.params.require_gradient()?;
        match &self.tables {
            Tables::Periodic {
                fft,
                scalar_hat,
                gradient_hat: Some(gh),
                ..
            } => {
                let spec = fft.forward_real(f.values());
                let c = self.params.prefactor();
                let conv: Vec<f64> = fft.apply(&spec, scalar_hat).into_iter().map(|v| v * c).collect();
                let comps = gh.iter().map(|g| fft.apply(&spec, g)).collect();
                Ok((ScalarField::new(self.grid, conv)?, VectorField::new(self.grid, comps)?))
            }
            _ => Err(Error::InvalidGrid(
                "kernel gradient needs a periodic grid in 2D".into(),
            )),
        }
    }

    /// σ·½∫ f K_α∗f.
    pub fn interaction_energy(&self, f: &ScalarField, sigma: f64) -> Result<f64> {
        let kf = self.conv(f)?;
        Ok(sigma * 0.5 * integrate(&f.mul(&kf)?)?)
    }

    /// ∫ f K_α∗g.
    pub fn bilinear(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        let kg = self.conv(g)?;
        integrate(&f.mul(&kg)?)
    }
}

/// Scalar and gradient circulant tables on a periodic grid, without the cell
/// volume. `self_entry` is the own-cell weight divided by the cell volume.
fn periodic_tables(
    grid: &GridSpec,
    params: &RieszParams,
    radius: f64,
    self_entry: f64,
) -> (Vec<f64>, Option<Vec<Vec<f64>>>) {
    let d = grid.dim();
    let s = d as f64 - params.alpha;
    let n = [grid.n(0), grid.n(1)];
    let h = [grid.h(0), if d == 2 { grid.h(1) } else { 1.0 }];
    let len = [grid.length(0), if d == 2 { grid.length(1) } else { 1.0 }];
    let extent = if d == 2 { len[0].max(len[1]) } else { len[0] };
    let reach = radius * extent;
    let mut images: Vec<[f64; 2]> = Vec::new();
    let l0 = (reach / len[0]).floor() as i64;
    let l1 = if d == 2 { (reach / len[1]).floor() as i64 } else { 0 };
    for a in -l0..=l0 {
        for b in -l1..=l1 {
            let shift = [a as f64 * len[0], b as f64 * len[1]];
            if (shift[0] * shift[0] + shift[1] * shift[1]).sqrt() <= reach * (1.0 + 1e-12) {
                images.push(shift);
            }
        }
    }
    let with_gradient = d == 2 && params.has_gradient();
    // Tables depend only on |minimal displacement| per axis, which makes them
    // exactly symmetric (scalar) or antisymmetric (gradient).
    let minimal = |a: usize, k: usize| -> (usize, f64) {
        let m = if a <= n[k] / 2 { a } else { n[k] - a };
        let sign = if m == 0 || 2 * m == n[k] {
            0.0
        } else if a <= n[k] / 2 {
            1.0
        } else {
            -1.0
        };
        (m, sign)
    };
    let total = n[0] * n[1];
    let mut scalar = vec![0.0; total];
    let mut gradient = if with_gradient {
        Some(vec![vec![0.0; total]; 2])
    } else {
        None
    };
    let entries: Vec<(f64, [f64; 2])> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (idx / n[1], idx % n[1]);
            let (ma, _) = minimal(a, 0);
            let (mb, _) = if d == 2 { minimal(b, 1) } else { (0, 0.0) };
            let base = [ma as f64 * h[0], mb as f64 * h[1]];
            let mut sc = 0.0;
            let mut gr = [0.0; 2];
            for sh in &images {
                let z = [base[0] + sh[0], base[1] + sh[1]];
                let r2 = z[0] * z[0] + z[1] * z[1];
                if r2 == 0.0 {
                    continue;
                }
                let r = r2.sqrt();
                sc += r.powf(-s);
                if with_gradient {
                    let w = -r.powf(-s - 2.0);
                    gr[0] += w * z[0];
                    gr[1] += w * z[1];
                }
            }
            (sc, gr)
        })
        .collect();
    for (idx, (sc, gr)) in entries.into_iter().enumerate() {
        scalar[idx] = sc;
        if let Some(g) = gradient.as_mut() {
            let (a, b) = (idx / n[1], idx % n[1]);
            let (_, sa) = minimal(a, 0);
            let (_, sb) = minimal(b, 1);
            g[0][idx] = sa * gr[0];
            g[1][idx] = sb * gr[1];
        }
    }
    scalar[0] += self_entry;
    if let Some(g) = gradient.as_mut() {
        // Own-cell correction of the gradient: a centered difference weighted
        // by the regularized lattice moments.
        let moments = lattice::axis_moments(&h[..d], s);
        for k in 0..d {
            let ck = -moments[k] / (2.0 * h[k]);
            let plus = if k == 0 { n[1] } else { 1 };
            let minus = if k == 0 { (n[0] - 1) * n[1] } else { n[1] - 1 };
            g[k][minus] += ck;
            g[k][plus] -= ck;
        }
    }
    (scalar, gradient)
}

/// I_β f on the grid of `f`, by direct summation.
pub fn frac_integral(f: &ScalarField, beta: f64) -> Result<ScalarField> {
    let params = RieszParams::new(beta, f.grid().dim())
        .map_err(|_| Error::param("beta", format!("{beta} is outside (0, {})", f.grid().dim())))?;
    RieszOperator::new(f.grid(), params)?.frac_integral_direct(f)
}

/// K_α∗f by direct summation.
pub fn conv_direct(f: &ScalarField, params: &RieszParams) -> Result<ScalarField> {
    RieszOperator::new(f.grid(), *params)?.conv_direct(f)
}

/// K_α∗f via FFT.
pub fn conv_fft_periodic(f: &ScalarField, params: &RieszParams) -> Result<ScalarField> {
    if !f.grid().is_periodic() {
        return Err(Error::InvalidGrid("the FFT path requires a periodic grid".into()));
    }
    RieszOperator::new(f.grid(), *params)?.conv_fft_periodic(f)
}

/// ∇K_α∗f by direct summation.
pub fn conv_grad(f: &ScalarField, params: &RieszParams) -> Result<VectorField> {
    params.require_gradient()?;
    RieszOperator::new(f.grid(), *params)?.conv_grad_direct(f)
}

/// σ·½∫ f K_α∗f.
pub fn interaction_energy(f: &ScalarField, params: &RieszParams, sigma: f64) -> Result<f64> {
    RieszOperator::new(f.grid(), *params)?.interaction_energy(f, sigma)
}

#[cfg(test)]
mod tests;
