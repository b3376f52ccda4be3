//! Discrete velocity, pressure and boundary-data containers together with
//! the norms, inner products and difference operators shared by the solver,
//! the cost functional and the sweep metrics.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::grid::{Component, ControlMask, Grid, SlotKind};

/// Velocity values on every slot of a grid (interior faces, wall-normal
/// faces, wall-trace slots and corners).
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    values: Vec<f64>,
    ux_shape: (usize, usize),
    uy_shape: (usize, usize),
}

impl VelocityField {
    pub fn zeros(grid: &Grid) -> Self {
        VelocityField {
            values: vec![0.0; grid.n_velocity()],
            ux_shape: grid.ux_shape(),
            uy_shape: grid.uy_shape(),
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_velocity() {
            return Err(Error::Shape(format!(
                "velocity field has {} values, grid expects {}",
                values.len(),
                grid.n_velocity()
            )));
        }
        Ok(VelocityField {
            values,
            ux_shape: grid.ux_shape(),
            uy_shape: grid.uy_shape(),
        })
    }

    /// Samples a vector function at every slot; each slot keeps the component
    /// it carries.
    pub fn sample(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut field = Self::zeros(grid);
        for s in 0..grid.n_velocity() {
            let [x, y] = grid.slot_position(s);
            let v = f(x, y);
            field.values[s] = match grid.slot_component(s) {
                Component::X => v[0],
                Component::Y => v[1],
            };
        }
        field
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ux(&self) -> ArrayView2<'_, f64> {
        let n = self.ux_shape.0 * self.ux_shape.1;
        ArrayView2::from_shape(self.ux_shape, &self.values[..n]).expect("layout")
    }
    pub fn uy(&self) -> ArrayView2<'_, f64> {
        let n = self.ux_shape.0 * self.ux_shape.1;
        ArrayView2::from_shape(self.uy_shape, &self.values[n..]).expect("layout")
    }
    pub fn ux_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        let n = self.ux_shape.0 * self.ux_shape.1;
        ArrayViewMut2::from_shape(self.ux_shape, &mut self.values[..n]).expect("layout")
    }
    pub fn uy_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        let n = self.ux_shape.0 * self.ux_shape.1;
        ArrayViewMut2::from_shape(self.uy_shape, &mut self.values[n..]).expect("layout")
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.ux_shape == grid.ux_shape() && self.uy_shape == grid.uy_shape()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.ux_shape != other.ux_shape || self.uy_shape != other.uy_shape {
            return Err(Error::Shape(format!(
                "velocity layouts differ: {:?}/{:?} vs {:?}/{:?}",
                self.ux_shape, self.uy_shape, other.ux_shape, other.uy_shape
            )));
        }
        Ok(())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|x| *x *= a);
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut d = self.clone();
        d.axpy(-1.0, other);
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Cell-centred pressure, shape `(nx, ny)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureField(pub Array2<f64>);

impl PressureField {
    pub fn zeros(grid: &Grid) -> Self {
        PressureField(Array2::zeros((grid.nx(), grid.ny())))
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        Array2::from_shape_vec((grid.nx(), grid.ny()), values)
            .map(PressureField)
            .map_err(|e| Error::Shape(format!("pressure field: {e}")))
    }

    pub fn mean(&self) -> f64 {
        self.0.mean().unwrap_or(0.0)
    }

    /// Fixes the gauge to zero spatial mean.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.0.mapv_inplace(|p| p - m);
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice().expect("standard layout")
    }
}

/// Tangential wall velocity per boundary record and time level. The normal
/// component is identically zero, so the data never injects mass.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    levels: Vec<Vec<f64>>,
}

impl BoundaryData {
    pub fn zero(grid: &Grid) -> Self {
        BoundaryData {
            levels: vec![vec![0.0; grid.boundary_faces().len()]],
        }
    }

    /// Time-independent data, one value per boundary record (along its
    /// tangent).
    pub fn steady(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        Self::unsteady(grid, vec![values])
    }

    /// One entry per time level; a single level means steady data.
    pub fn unsteady(grid: &Grid, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::config("boundary.data", "at least one time level is required"));
        }
        let n = grid.boundary_faces().len();
        if let Some(bad) = levels.iter().find(|l| l.len() != n) {
            return Err(Error::Shape(format!(
                "boundary data has {} values, grid has {n} boundary records",
                bad.len()
            )));
        }
        if levels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("boundary.data", "values must be finite"));
        }
        Ok(BoundaryData { levels })
    }

    /// Tangential part of a vector function sampled at every record.
    pub fn sample(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let values = grid
            .boundary_faces()
            .iter()
            .map(|face| {
                let v = f(face.position[0], face.position[1]);
                v[0] * face.tangent[0] + v[1] * face.tangent[1]
            })
            .collect();
        BoundaryData { levels: vec![values] }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn is_steady(&self) -> bool {
        self.levels.len() == 1
    }

    /// Values at time level `n`; steady data is returned for every level.
    pub fn at(&self, level: usize) -> &[f64] {
        &self.levels[level.min(self.levels.len() - 1)]
    }

    /// Normal velocity `b . nu` on a record; zero by construction.
    pub fn normal_velocity(&self, _level: usize, _face: usize) -> f64 {
        0.0
    }

    /// `sup |b|` over all records and levels.
    pub fn sup_norm(&self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .fold(0.0, |m, v: &f64| m.max(v.abs()))
    }
}

/// Midpoint/trapezoid L2(Omega) inner product.
pub fn l2_inner(grid: &Grid, a: &VelocityField, c: &VelocityField) -> Result<f64> {
    a.check_same(c)?;
    if !a.matches(grid) {
        return Err(Error::Shape("field does not match grid".into()));
    }
    Ok(weighted_dot(grid.velocity_weights(), a.values(), c.values()))
}

pub fn l2_norm(grid: &Grid, a: &VelocityField) -> f64 {
    weighted_dot(grid.velocity_weights(), a.values(), a.values()).sqrt()
}

/// L2(omega) inner product using the fractional mask weights.
pub fn masked_inner(mask: &ControlMask, a: &VelocityField, c: &VelocityField) -> Result<f64> {
    a.check_same(c)?;
    Ok(weighted_dot(mask.quadrature(), a.values(), c.values()))
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], c: &[f64]) -> f64 {
    w.iter().zip(a).zip(c).map(|((w, a), c)| w * a * c).sum()
}

/// MAC divergence per cell, shape `(nx, ny)`.
pub fn divergence(grid: &Grid, u: &VelocityField) -> Array2<f64> {
    let v = u.values();
    let (hx, hy) = (grid.hx(), grid.hy());
    Array2::from_shape_fn((grid.nx(), grid.ny()), |(ci, cj)| {
        let (i, j) = (ci as isize, cj);
        let e = v[grid.ux_slot(i + 1, j + 1).unwrap()];
        let w = v[grid.ux_slot(i, j + 1).unwrap()];
        let n = v[grid.uy_slot(i + 1, j + 1).unwrap()];
        let s = v[grid.uy_slot(i + 1, j).unwrap()];
        (e - w) / hx + (n - s) / hy
    })
}

/// Discrete pressure gradient on interior faces; wall-normal faces get zero
/// (homogeneous normal condition). Negative adjoint of [`divergence`].
pub fn gradient(grid: &Grid, p: &PressureField) -> VelocityField {
    let mut g = VelocityField::zeros(grid);
    let nx = grid.nx() as isize;
    let q = &p.0;
    let cell = |ci: isize, cj: usize| q[[ci.rem_euclid(nx) as usize, cj]];
    for s in 0..grid.n_velocity() {
        if grid.slot_kind(s) != SlotKind::Interior {
            continue;
        }
        let [x, y] = grid.slot_position(s);
        g.values[s] = match grid.slot_component(s) {
            Component::X => {
                let i = (x / grid.hx()).round() as isize;
                let cj = (y / grid.hy()).floor() as usize;
                (cell(i, cj) - cell(i - 1, cj)) / grid.hx()
            }
            Component::Y => {
                let ci = (x / grid.hx()).floor() as isize;
                let j = (y / grid.hy()).round() as usize;
                (cell(ci, j) - cell(ci, j - 1)) / grid.hy()
            }
        };
    }
    g
}

/// One component of the discrete symmetric gradient: a linear combination
/// of velocity slots with its quadrature weight. The weight of off-diagonal
/// components already carries the factor 2 of `|D|^2 = D11^2 + D22^2 + 2 D12^2`.
#[derive(Clone, Debug)]
pub struct StrainRow {
    pub weight: f64,
    pub entries: Vec<(usize, f64)>,
}

/// Stencils of `D(u)`: `D11`, `D22` at cell centres and `D12` at grid nodes
/// (corners excluded, where both components vanish).
pub fn strain_rows(grid: &Grid) -> Vec<StrainRow> {
    let (nx, ny, hx, hy) = (grid.nx(), grid.ny(), grid.hx(), grid.hy());
    let area = grid.cell_area();
    let mut rows = Vec::with_capacity(4 * nx * ny);
    for ci in 0..nx as isize {
        for cj in 0..ny {
            let e = grid.ux_slot(ci + 1, cj + 1).unwrap();
            let w = grid.ux_slot(ci, cj + 1).unwrap();
            rows.push(StrainRow {
                weight: area,
                entries: vec![(e, 1.0 / hx), (w, -1.0 / hx)],
            });
            let n = grid.uy_slot(ci + 1, cj + 1).unwrap();
            let s = grid.uy_slot(ci + 1, cj).unwrap();
            rows.push(StrainRow {
                weight: area,
                entries: vec![(n, 1.0 / hy), (s, -1.0 / hy)],
            });
        }
    }
    let node_columns: Vec<isize> = if grid.is_periodic_x() {
        (0..nx as isize).collect()
    } else {
        (0..=nx as isize).collect()
    };
    for &i in &node_columns {
        for j in 0..=ny {
            let x_edge = !grid.is_periodic_x() && (i == 0 || i == nx as isize);
            let y_edge = j == 0 || j == ny;
            if x_edge && y_edge {
                continue;
            }
            let wx = if x_edge { 0.5 * hx } else { hx };
            let wy = if y_edge { 0.5 * hy } else { hy };
            let below = grid.ux_slot(i, j).unwrap();
            let above = grid.ux_slot(i, j + 1).unwrap();
            let dy = grid.ux_y(j + 1) - grid.ux_y(j);
            let left = grid.uy_slot(i, j).unwrap();
            let right = grid.uy_slot(i + 1, j).unwrap();
            let dx = grid.uy_x(i + 1) - grid.uy_x(i);
            rows.push(StrainRow {
                weight: 2.0 * wx * wy,
                entries: vec![
                    (above, 0.5 / dy),
                    (below, -0.5 / dy),
                    (right, 0.5 / dx),
                    (left, -0.5 / dx),
                ],
            });
        }
    }
    rows
}

/// `||D(u)||^2` over the domain.
pub fn strain_norm_sq(grid: &Grid, u: &VelocityField) -> f64 {
    let v = u.values();
    strain_rows(grid)
        .iter()
        .map(|row| {
            let d: f64 = row.entries.iter().map(|&(s, c)| c * v[s]).sum();
            row.weight * d * d
        })
        .sum()
}

/// Tangential trace `u . tau` on every boundary record (zero at corners).
pub fn tangential_trace(grid: &Grid, u: &VelocityField) -> Vec<f64> {
    let v = u.values();
    grid.boundary_faces()
        .iter()
        .map(|face| match face.slot {
            None => 0.0,
            Some(s) => {
                let t = match grid.slot_component(s) {
                    Component::X => face.tangent[0],
                    Component::Y => face.tangent[1],
                };
                t * v[s]
            }
        })
        .collect()
}

/// `||(u - b)_tau||_{L2(boundary)}` by the midpoint rule over the boundary
/// records.
pub fn boundary_trace_norm(grid: &Grid, u: &VelocityField, b: &[f64]) -> f64 {
    let trace = tangential_trace(grid, u);
    grid.boundary_faces()
        .iter()
        .zip(trace.iter().zip(b))
        .map(|(face, (ut, bt))| face.length * (ut - bt) * (ut - bt))
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(sum_n dt * q_n)` for a sequence of squared spatial norms.
pub fn spacetime_from_sq(sq: impl IntoIterator<Item = f64>, dt: f64) -> f64 {
    sq.into_iter().map(|q| dt * q).sum::<f64>().sqrt()
}

/// Space-time L2 norm of a sequence of levels with the right-endpoint rule:
/// every level passed in is weighted by `dt`, so callers pass the levels
/// `t_1 ..= t_N`.
pub fn spacetime_l2(grid: &Grid, levels: &[VelocityField], dt: f64) -> f64 {
    spacetime_from_sq(levels.iter().map(|f| l2_norm(grid, f).powi(2)), dt)
}
