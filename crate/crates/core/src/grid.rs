//! Uniform Cartesian grids and cell-averaged fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{compensated_sum, Neumaier};

/// Boundary treatment of the computational box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    NoFlux,
}

/// A uniform grid on an axis-aligned box in one or two dimensions.
///
/// Cells are enumerated row-major: the last axis varies fastest. In 1D the
/// unused second axis has a single cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    cells: [usize; 2],
    lower: [f64; 2],
    upper: [f64; 2],
    spacing: [f64; 2],
    boundary: Boundary,
}

impl GridSpec {
    /// Builds a grid from per-axis cell counts and `(lower, upper)` extents.
    pub fn new(
        dim: usize,
        cells: &[usize],
        extents: &[(f64, f64)],
        boundary: Boundary,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} is not 1 or 2")));
        }
        if cells.len() != dim || extents.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} cell counts and extents, got {} and {}",
                cells.len(),
                extents.len()
            )));
        }
        if dim == 2 && boundary == Boundary::NoFlux {
            return Err(Error::InvalidGrid(
                "no-flux boundaries are only available in 1D".into(),
            ));
        }
        let mut out = GridSpec {
            dim,
            cells: [1, 1],
            lower: [0.0, 0.0],
            upper: [1.0, 1.0],
            spacing: [1.0, 1.0],
            boundary,
        };
        for k in 0..dim {
            let (a, b) = extents[k];
            if cells[k] < 4 {
                return Err(Error::InvalidGrid(format!(
                    "axis {k} has {} cells, at least 4 are required",
                    cells[k]
                )));
            }
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidGrid(format!(
                    "axis {k} extent [{a}, {b}] is not a positive interval"
                )));
            }
            out.cells[k] = cells[k];
            out.lower[k] = a;
            out.upper[k] = b;
            out.spacing[k] = (b - a) / cells[k] as f64;
        }
        Ok(out)
    }

    /// 1D interval with `n` cells.
    pub fn line(n: usize, extent: (f64, f64), boundary: Boundary) -> Result<Self> {
        Self::new(1, &[n], &[extent], boundary)
    }

    /// Periodic 2D rectangle.
    pub fn torus(n: [usize; 2], x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        Self::new(2, &n, &[x, y], Boundary::Periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Cells along each active axis.
    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    /// Cell count along axis `k`, 1 for the inactive axis of a 1D grid.
    pub fn n(&self, k: usize) -> usize {
        self.cells[k]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn h(&self, k: usize) -> f64 {
        self.spacing[k]
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    /// Box side length along axis `k`.
    pub fn length(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Total measure of the box.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.length(k)).product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.cells[1] + j
    }

    /// Multi-index `(i, j)` of a flat cell index.
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.cells[1], idx % self.cells[1])
    }

    /// Cell center; the second entry is 0 in 1D.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        let mut x = [0.0; 2];
        x[0] = self.lower[0] + (i as f64 + 0.5) * self.spacing[0];
        if self.dim == 2 {
            x[1] = self.lower[1] + (j as f64 + 0.5) * self.spacing[1];
        }
        x
    }

    /// Neighbor of `idx` along `axis` shifted by `offset` cells. Periodic grids
    /// wrap; no-flux grids return `None` past the wall.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> Option<usize> {
        let (i, j) = self.coords(idx);
        let pos = if axis == 0 { i } else { j } as isize;
        let n = self.cells[axis] as isize;
        let mut p = pos + offset;
        if p < 0 || p >= n {
            match self.boundary {
                Boundary::Periodic => p = p.rem_euclid(n),
                Boundary::NoFlux => return None,
            }
        }
        let p = p as usize;
        Some(if axis == 0 {
            self.index(p, j)
        } else {
            self.index(i, p)
        })
    }

    /// Same box with every active axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let cells: Vec<usize> = self.cells().iter().map(|&n| n * factor).collect();
        let ext: Vec<(f64, f64)> = (0..self.dim).map(|k| (self.lower[k], self.upper[k])).collect();
        Self::new(self.dim, &cells, &ext, self.boundary)
    }

    fn same_shape(&self, other: &GridSpec) -> bool {
        self.dim == other.dim && self.cells == other.cells && self.boundary == other.boundary
    }

    fn check(&self, other: &GridSpec) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::FieldMismatch(format!(
                "grid {:?} vs {:?}",
                self.cells(),
                other.cells()
            )))
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(cell) => Err(Error::NonFinite {
            cell,
            value: values[cell],
        }),
        None => Ok(()),
    }
}

/// Four-point Gauss-Legendre nodes and weights on [-1/2, 1/2].
const GAUSS4: [(f64, f64); 4] = [
    (-0.430_568_155_797_026_3, 0.173_927_422_568_726_93),
    (-0.169_990_521_792_428_13, 0.326_072_577_431_273_07),
    (0.169_990_521_792_428_13, 0.326_072_577_431_273_07),
    (0.430_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// One value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid,
        }
    }

    /// Point values at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::new(grid, values)
    }

    /// Cell averages by tensor Gauss quadrature.
    pub fn from_cell_average(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let h = grid.spacing;
        let values = (0..grid.len())
            .map(|i| {
                let c = grid.center(i);
                let mut acc = 0.0;
                for &(sx, wx) in &GAUSS4 {
                    if grid.dim == 1 {
                        acc += wx * f([c[0] + sx * h[0], 0.0]);
                    } else {
                        for &(sy, wy) in &GAUSS4 {
                            acc += wx * wy * f([c[0] + sx * h[0], c[1] + sy * h[1]]);
                        }
                    }
                }
                acc
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check(&other.grid)?;
        Ok(Self::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub(crate) fn ensure_grid(&self, grid: &GridSpec) -> Result<()> {
        self.grid.check(grid)
    }
}

/// One d-vector per cell, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: GridSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.dim() {
            return Err(Error::FieldMismatch(format!(
                "{} components for dimension {}",
                comps.len(),
                grid.dim()
            )));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::FieldMismatch(format!(
                    "component with {} values for {} cells",
                    c.len(),
                    grid.len()
                )));
            }
            check_finite(c)?;
        }
        Ok(Self { grid, comps })
    }

    pub(crate) fn from_vec_unchecked(grid: GridSpec, comps: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(comps.len(), grid.dim());
        Self { grid, comps }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            comps: vec![vec![0.0; grid.len()]; grid.dim()],
            grid,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        let mut comps = vec![vec![0.0; grid.len()]; grid.dim()];
        for i in 0..grid.len() {
            let v = f(grid.center(i));
            for (k, c) in comps.iter_mut().enumerate() {
                c[i] = v[k];
            }
        }
        Self::new(grid, comps)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn comp(&self, k: usize) -> &[f64] {
        &self.comps[k]
    }

    pub(crate) fn comp_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.comps[k]
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Vector at a cell; the unused entry is 0 in 1D.
    pub fn at(&self, idx: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (k, c) in self.comps.iter().enumerate() {
            v[k] = c[idx];
        }
        v
    }

    /// Cellwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        let vals = (0..self.grid.len())
            .map(|i| self.comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .collect();
        ScalarField::from_vec_unchecked(self.grid, vals)
    }

    /// Multiplies every component by a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> Result<Self> {
        self.grid.check(&s.grid)?;
        Ok(Self::from_vec_unchecked(
            self.grid,
            self.comps
                .iter()
                .map(|c| c.iter().zip(&s.values).map(|(a, b)| a * b).collect())
                .collect(),
        ))
    }

    pub fn zip_map(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check(&other.grid)?;
        Ok(Self::from_vec_unchecked(
            self.grid,
            self.comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        ))
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        let comps = self.comps.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
        Self::from_vec_unchecked(self.grid, comps)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Spatial Jacobian of a vector field: entry `(i, j)` holds the derivative of
/// component `i` along axis `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: GridSpec,
    comps: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let d = grid.dim();
        Self {
            comps: vec![vec![0.0; grid.len()]; d * d],
            grid,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[i * self.grid.dim() + j]
    }

    pub(crate) fn entry_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let d = self.grid.dim();
        &mut self.comps[i * d + j]
    }

    /// Trace field.
    pub fn divergence(&self) -> ScalarField {
        let d = self.grid.dim();
        let vals = (0..self.grid.len())
            .map(|c| (0..d).map(|k| self.entry(k, k)[c]).sum())
            .collect();
        ScalarField::from_vec_unchecked(self.grid, vals)
    }

    /// Cellwise Frobenius norm.
    pub fn frobenius(&self) -> ScalarField {
        let vals = (0..self.grid.len())
            .map(|c| self.comps.iter().map(|e| e[c] * e[c]).sum::<f64>().sqrt())
            .collect();
        ScalarField::from_vec_unchecked(self.grid, vals)
    }
}

/// Discrete integral Σ f_i h^d.
pub fn integrate(f: &ScalarField) -> Result<f64> {
    check_finite(&f.values)?;
    Ok(compensated_sum(f.values.iter().copied()) * f.grid.cell_volume())
}

/// Discrete L^p norm; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::param("p", format!("{p} is below 1")));
    }
    check_finite(&f.values)?;
    if p.is_infinite() {
        return Ok(f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    // Scaling by the max keeps large p from overflowing.
    let scale = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut acc = Neumaier::new();
    for v in &f.values {
        acc.add((v.abs() / scale).powf(p));
    }
    Ok(scale * (acc.total() * f.grid.cell_volume()).powf(1.0 / p))
}

/// Restriction to a coarser grid of the same box by cell averaging.
pub fn restrict(fine: &ScalarField, coarse: &GridSpec) -> Result<ScalarField> {
    let fg = fine.grid();
    if fg.dim != coarse.dim || fg.boundary != coarse.boundary || fg.lower != coarse.lower || fg.upper != coarse.upper {
        return Err(Error::FieldMismatch("restriction between different boxes".into()));
    }
    let mut ratio = [1usize; 2];
    for k in 0..fg.dim {
        if fg.cells[k] % coarse.cells[k] != 0 {
            return Err(Error::FieldMismatch(format!(
                "axis {k}: {} cells do not refine {}",
                fg.cells[k], coarse.cells[k]
            )));
        }
        ratio[k] = fg.cells[k] / coarse.cells[k];
    }
    if ratio == [1, 1] {
        return Ok(fine.clone());
    }
    let w = 1.0 / (ratio[0] * ratio[1]) as f64;
    let vals = (0..coarse.len())
        .map(|c| {
            let (ci, cj) = coarse.coords(c);
            let mut acc = 0.0;
            for a in 0..ratio[0] {
                for b in 0..ratio[1] {
                    acc += fine.values[fg.index(ci * ratio[0] + a, cj * ratio[1] + b)];
                }
            }
            acc * w
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(*coarse, vals))
}

/// Componentwise restriction of a vector field.
pub fn restrict_vector(fine: &VectorField, coarse: &GridSpec) -> Result<VectorField> {
    let comps = fine
        .comps
        .iter()
        .map(|c| {
            restrict(&ScalarField::from_vec_unchecked(fine.grid, c.clone()), coarse)
                .map(ScalarField::into_values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorField::from_vec_unchecked(*coarse, comps))
}

/// Entrywise restriction of a tensor field.
pub fn restrict_tensor(fine: &TensorField, coarse: &GridSpec) -> Result<TensorField> {
    let comps = fine
        .comps
        .iter()
        .map(|c| {
            restrict(&ScalarField::from_vec_unchecked(fine.grid, c.clone()), coarse)
                .map(ScalarField::into_values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TensorField {
        grid: *coarse,
        comps,
    })
}

/// Parity used to fill ghost cells at no-flux walls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Value of `values` at the neighbor of `idx`, reflecting across walls.
fn ghost(grid: &GridSpec, values: &[f64], idx: usize, axis: usize, offset: isize, parity: Parity) -> f64 {
    match grid.neighbor(idx, axis, offset) {
        Some(j) => values[j],
        None => match parity {
            Parity::Even => values[idx],
            Parity::Odd => -values[idx],
        },
    }
}

/// Centered difference of a cell array along `axis`.
pub fn central_diff(grid: &GridSpec, values: &[f64], axis: usize, parity: Parity) -> Vec<f64> {
    let h2 = 2.0 * grid.h(axis);
    (0..grid.len())
        .map(|i| {
            (ghost(grid, values, i, axis, 1, parity) - ghost(grid, values, i, axis, -1, parity)) / h2
        })
        .collect()
}

/// Centered gradient with even reflection at walls.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let comps = (0..g.dim())
        .map(|k| central_diff(&g, &f.values, k, Parity::Even))
        .collect();
    VectorField::from_vec_unchecked(g, comps)
}

/// Centered divergence; normal components reflect oddly at walls.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let mut out = vec![0.0; g.len()];
    for k in 0..g.dim() {
        let dk = central_diff(&g, &v.comps[k], k, Parity::Odd);
        for (o, d) in out.iter_mut().zip(dk) {
            *o += d;
        }
    }
    ScalarField::from_vec_unchecked(g, out)
}

/// Centered Jacobian, with the same wall parities as [`divergence`].
pub fn jacobian(v: &VectorField) -> TensorField {
    let g = v.grid;
    let mut t = TensorField::zeros(g);
    for i in 0..g.dim() {
        for j in 0..g.dim() {
            let parity = if i == j { Parity::Odd } else { Parity::Even };
            let d = central_diff(&g, &v.comps[i], j, parity);
            t.entry_mut(i, j).copy_from_slice(&d);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_line(n: usize) -> GridSpec {
        GridSpec::line(n, (0.0, 1.0), Boundary::Periodic).unwrap()
    }

    #[test]
    fn uniform_line_centers() {
        let g = unit_line(10);
        assert!((g.h(0) - 0.1).abs() < 1e-15);
        assert!((g.center(0)[0] - 0.05).abs() < 1e-15);
        assert!((g.center(9)[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn square_torus() {
        let g = GridSpec::torus([8, 8], (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.spacing(), &[0.125, 0.125]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(2, &[8, 8], &[(0.0, 1.0), (0.0, 1.0)], Boundary::NoFlux).is_err());
        assert!(GridSpec::new(3, &[8, 8, 8], &[(0.0, 1.0); 3], Boundary::Periodic).is_err());
        assert!(GridSpec::line(3, (0.0, 1.0), Boundary::Periodic).is_err());
        assert!(GridSpec::line(8, (1.0, 1.0), Boundary::Periodic).is_err());
    }

    #[test]
    fn integrals_of_constants() {
        let g = unit_line(8);
        assert_eq!(integrate(&ScalarField::constant(g, 1.0)).unwrap(), 1.0);
        let g2 = GridSpec::torus([4, 4], (0.0, 2.0), (0.0, 2.0)).unwrap();
        assert!((integrate(&ScalarField::constant(g2, 3.0)).unwrap() - 12.0).abs() < 1e-14);
    }

    #[test]
    fn two_cell_values() {
        // the grid needs four cells; two halves of value 0 and 2
        let g = GridSpec::line(4, (0.0, 1.0), Boundary::Periodic).unwrap();
        let f = ScalarField::new(g, vec![0.0, 0.0, 2.0, 2.0]).unwrap();
        assert_eq!(integrate(&f).unwrap(), 1.0);
        assert!((lp_norm(&f, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 2.0);
    }

    #[test]
    fn rejects_non_finite_and_small_p() {
        let g = unit_line(4);
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(lp_norm(&ScalarField::zeros(g), 0.5).is_err());
    }

    #[test]
    fn restriction_preserves_mass() {
        let fine = GridSpec::torus([8, 8], (0.0, 1.0), (0.0, 1.0)).unwrap();
        let coarse = GridSpec::torus([4, 4], (0.0, 1.0), (0.0, 1.0)).unwrap();
        let f = ScalarField::from_fn(fine, |x| (x[0] * 7.0).sin() + x[1]).unwrap();
        let c = restrict(&f, &coarse).unwrap();
        assert!((integrate(&f).unwrap() - integrate(&c).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn cell_average_of_cosine_is_exact_enough() {
        let g = unit_line(16);
        let k = 2.0 * std::f64::consts::PI;
        let f = ScalarField::from_cell_average(g, |x| (k * x[0]).cos()).unwrap();
        let h = g.h(0);
        let sinc = (k * h / 2.0).sin() / (k * h / 2.0);
        for i in 0..16 {
            assert!((f.values()[i] - sinc * (k * g.center(i)[0]).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn wall_parities() {
        let g = GridSpec::line(4, (0.0, 1.0), Boundary::NoFlux).unwrap();
        let f = ScalarField::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gr = gradient(&f);
        assert!((gr.comp(0)[0] - 1.0 / (2.0 * 0.25)).abs() < 1e-15);
        let v = VectorField::new(g, vec![vec![1.0, 1.0, 1.0, 1.0]]).unwrap();
        let dv = divergence(&v);
        assert!((dv.values()[0] - 2.0 / 0.5).abs() < 1e-15);
    }

    fn field(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, len)
    }

    proptest! {
        #[test]
        fn integrate_is_linear(f in field(16), g in field(16), a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let grid = GridSpec::line(16, (0.0, 1.3), Boundary::Periodic).unwrap();
            let ff = ScalarField::new(grid, f).unwrap();
            let gf = ScalarField::new(grid, g).unwrap();
            let comb = ff.zip_map(&gf, |x, y| a * x + b * y).unwrap();
            let lhs = integrate(&comb).unwrap();
            let rhs = a * integrate(&ff).unwrap() + b * integrate(&gf).unwrap();
            let scale = ff.values().iter().chain(gf.values()).map(|v| v.abs()).sum::<f64>() * grid.cell_volume() * 3.0;
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1e-300));
        }

        #[test]
        fn triangle_inequality(f in field(16), g in field(16)) {
            let grid = GridSpec::line(16, (0.0, 1.0), Boundary::Periodic).unwrap();
            let ff = ScalarField::new(grid, f).unwrap();
            let gf = ScalarField::new(grid, g).unwrap();
            let s = ff.add(&gf).unwrap();
            for p in [1.0, 2.0, 4.0] {
                let lhs = lp_norm(&s, p).unwrap();
                let rhs = lp_norm(&ff, p).unwrap() + lp_norm(&gf, p).unwrap();
                prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
            }
        }

        #[test]
        fn norms_increase_towards_max(f in field(16)) {
            // unit measure so that the L^p norms are ordered
            let grid = GridSpec::line(16, (0.0, 1.0), Boundary::Periodic).unwrap();
            let ff = ScalarField::new(grid, f).unwrap();
            let sup = lp_norm(&ff, f64::INFINITY).unwrap();
            let n2 = lp_norm(&ff, 2.0).unwrap();
            let n8 = lp_norm(&ff, 8.0).unwrap();
            let n32 = lp_norm(&ff, 32.0).unwrap();
            prop_assert!(n2 <= n8 * (1.0 + 1e-12));
            prop_assert!(n8 <= n32 * (1.0 + 1e-12));
            prop_assert!(n32 <= sup * (1.0 + 1e-12));
        }

        #[test]
        fn l2_norm_matches_naive_sum(f in field(32)) {
            let grid = GridSpec::line(32, (0.0, 2.0), Boundary::Periodic).unwrap();
            let ff = ScalarField::new(grid, f.clone()).unwrap();
            let mut naive = 0.0;
            for v in &f {
                naive += v * v * grid.h(0);
            }
            let naive = naive.sqrt();
            let got = lp_norm(&ff, 2.0).unwrap();
            prop_assert!((got - naive).abs() <= 1e-14 * naive.max(1e-300));
        }

        #[test]
        fn summation_is_deterministic(f in field(64)) {
            let grid = GridSpec::line(64, (0.0, 1.0), Boundary::Periodic).unwrap();
            let ff = ScalarField::new(grid, f).unwrap();
            prop_assert_eq!(integrate(&ff).unwrap().to_bits(), integrate(&ff).unwrap().to_bits());
        }
    }
}
