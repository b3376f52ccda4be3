//! Discrete operators on the full velocity slot space of a grid. Boundary
//! conditions are applied later by restricting to the free slots.

use crate::fields::strain_rows;
use crate::grid::{Grid, SlotKind};
use crate::linalg::sparse::CsrMatrix;

/// A bilinear map `(x, y) -> z` with `z_r = sum c * x_q * y_k`, stored as two
/// compressed patterns so that both partial Jacobians can be formed without
/// re-deriving any index: `matrix_in_second(x)` is `dz/dy` at fixed `x`,
/// `matrix_in_first(y)` is `dz/dx` at fixed `y`.
#[derive(Clone, Debug)]
pub struct BilinearForm {
    n: usize,
    by_second: Pattern,
    by_first: Pattern,
    terms: Vec<(usize, usize, usize, f64)>,
}

#[derive(Clone, Debug)]
struct Pattern {
    indptr: Vec<usize>,
    cols: Vec<usize>,
    term_ptr: Vec<usize>,
    terms: Vec<(usize, f64)>,
}

impl Pattern {
    /// Groups terms `(row, col, var, coef)` by `(row, col)`.
    fn build(n: usize, mut entries: Vec<(usize, usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c, v, _)| (r, c, v));
        let mut indptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut term_ptr = vec![0usize];
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        let mut group_start = 0;
        for (r, c, v, coef) in entries {
            if last != Some((r, c)) {
                if last.is_some() {
                    term_ptr.push(terms.len());
                }
                indptr[r + 1] += 1;
                cols.push(c);
                last = Some((r, c));
                group_start = terms.len();
                terms.push((v, coef));
            } else if terms.len() > group_start && terms[terms.len() - 1].0 == v {
                terms.last_mut().unwrap().1 += coef;
            } else {
                terms.push((v, coef));
            }
        }
        if last.is_some() {
            term_ptr.push(terms.len());
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Pattern {
            indptr,
            cols,
            term_ptr,
            terms,
        }
    }

    fn matrix(&self, n: usize, x: &[f64]) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.cols.len());
        for r in 0..n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let v: f64 = self.terms[self.term_ptr[k]..self.term_ptr[k + 1]]
                    .iter()
                    .map(|&(q, c)| c * x[q])
                    .sum();
                if v != 0.0 {
                    t.push((r, self.cols[k], v));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }
}

impl BilinearForm {
    pub fn new(n: usize, terms: Vec<(usize, usize, usize, f64)>) -> Self {
        // (row, first, second, coef)
        let by_second = Pattern::build(n, terms.iter().map(|&(r, q, k, c)| (r, k, q, c)).collect());
        let by_first = Pattern::build(n, terms.iter().map(|&(r, q, k, c)| (r, q, k, c)).collect());
        BilinearForm {
            n,
            by_second,
            by_first,
            terms,
        }
    }

    /// Matrix of `y -> B(x, y)`.
    pub fn matrix_in_second(&self, x: &[f64]) -> CsrMatrix {
        self.by_second.matrix(self.n, x)
    }

    /// Matrix of `x -> B(x, y)`.
    pub fn matrix_in_first(&self, y: &[f64]) -> CsrMatrix {
        self.by_first.matrix(self.n, y)
    }

    pub fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n];
        for &(r, q, k, c) in &self.terms {
            z[r] += c * x[q] * y[k];
        }
        z
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Operators of the velocity-pressure discretization, all in weak (test
/// function) form: rows are scaled by the quadrature weight of their slot.
#[derive(Clone, Debug)]
pub struct Operators {
    grid: Grid,
    mass: Vec<f64>,
    /// `u^T K u = ||D(u)||^2`
    stiffness: CsrMatrix,
    /// Boundary segment length of each tangential slot.
    friction: Vec<f64>,
    slot_face: Vec<Option<usize>>,
    /// `-|cell| * div`, shape `cells x slots`.
    divergence: CsrMatrix,
    /// Skew-symmetrized convection `(w, u) -> C(w) u`.
    convection: BilinearForm,
}

impl Operators {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n_velocity();
        let mass = grid.velocity_weights().to_vec();

        let mut k = Vec::new();
        for row in strain_rows(grid) {
            for &(a, ca) in &row.entries {
                for &(b, cb) in &row.entries {
                    k.push((a, b, row.weight * ca * cb));
                }
            }
        }
        let stiffness = CsrMatrix::from_triplets(n, n, k);

        let mut friction = vec![0.0; n];
        let mut slot_face = vec![None; n];
        for (f, face) in grid.boundary_faces().iter().enumerate() {
            if let Some(s) = face.slot {
                friction[s] += face.length;
                slot_face[s] = Some(f);
            }
        }

        Operators {
            grid: grid.clone(),
            mass,
            stiffness,
            friction,
            slot_face,
            divergence: divergence_operator(grid),
            convection: BilinearForm::new(n, skew_convection_terms(grid)),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn n_velocity(&self) -> usize {
        self.mass.len()
    }
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }
    pub fn friction(&self) -> &[f64] {
        &self.friction
    }
    pub fn slot_face(&self, slot: usize) -> Option<usize> {
        self.slot_face[slot]
    }
    pub fn divergence(&self) -> &CsrMatrix {
        &self.divergence
    }
    pub fn convection(&self) -> &BilinearForm {
        &self.convection
    }
}

fn divergence_operator(grid: &Grid) -> CsrMatrix {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut t = Vec::with_capacity(4 * grid.n_cells());
    for ci in 0..grid.nx() {
        for cj in 0..grid.ny() {
            let c = grid.cell_index(ci, cj);
            let i = ci as isize;
            t.push((c, grid.ux_slot(i + 1, cj + 1).unwrap(), -hy));
            t.push((c, grid.ux_slot(i, cj + 1).unwrap(), hy));
            t.push((c, grid.uy_slot(i + 1, cj + 1).unwrap(), -hx));
            t.push((c, grid.uy_slot(i + 1, cj).unwrap(), hx));
        }
    }
    CsrMatrix::from_triplets(grid.n_cells(), grid.n_velocity(), t)
}

/// Advective form `(w . grad) u` at every interior face, weighted by the
/// face area: central differences along each axis (non-uniform next to a
/// wall trace), advecting velocity interpolated from the four neighbouring
/// faces of the other component. Returned as `(row, w_slot, u_slot, coef)`.
pub fn advection_terms(grid: &Grid) -> Vec<(usize, usize, usize, f64)> {
    let mut t = Vec::new();
    let (nx, ny) = (grid.nx() as isize, grid.ny());
    let area = grid.cell_area();
    let x_cols: Vec<isize> = if grid.is_periodic_x() {
        (0..nx).collect()
    } else {
        (1..nx).collect()
    };
    for &i in &x_cols {
        for r in 1..=ny {
            let s = grid.ux_slot(i, r).unwrap();
            debug_assert_eq!(grid.slot_kind(s), SlotKind::Interior);
            let (e, w) = (grid.ux_slot(i + 1, r).unwrap(), grid.ux_slot(i - 1, r).unwrap());
            let dx = grid.ux_x(i + 1) - grid.ux_x(i - 1);
            t.push((s, s, e, area / dx));
            t.push((s, s, w, -area / dx));
            let (n, so) = (grid.ux_slot(i, r + 1).unwrap(), grid.ux_slot(i, r - 1).unwrap());
            let dy = grid.ux_y(r + 1) - grid.ux_y(r - 1);
            for q in [
                grid.uy_slot(i, r - 1),
                grid.uy_slot(i + 1, r - 1),
                grid.uy_slot(i, r),
                grid.uy_slot(i + 1, r),
            ] {
                let q = q.unwrap();
                t.push((s, q, n, 0.25 * area / dy));
                t.push((s, q, so, -0.25 * area / dy));
            }
        }
    }
    let y_cols: Vec<isize> = (1..=nx).collect();
    for &c in &y_cols {
        for j in 1..ny {
            let s = grid.uy_slot(c, j).unwrap();
            debug_assert_eq!(grid.slot_kind(s), SlotKind::Interior);
            let (n, so) = (grid.uy_slot(c, j + 1).unwrap(), grid.uy_slot(c, j - 1).unwrap());
            let dy = grid.uy_y(j + 1) - grid.uy_y(j - 1);
            t.push((s, s, n, area / dy));
            t.push((s, s, so, -area / dy));
            let (e, w) = (grid.uy_slot(c + 1, j).unwrap(), grid.uy_slot(c - 1, j).unwrap());
            let dx = grid.uy_x(c + 1) - grid.uy_x(c - 1);
            for q in [
                grid.ux_slot(c - 1, j),
                grid.ux_slot(c, j),
                grid.ux_slot(c - 1, j + 1),
                grid.ux_slot(c, j + 1),
            ] {
                let q = q.unwrap();
                t.push((s, q, e, 0.25 * area / dx));
                t.push((s, q, w, -0.25 * area / dx));
            }
        }
    }
    t
}

/// `C(w) = (N(w) - N(w)^T) / 2` with `N` from [`advection_terms`]; exactly
/// skew for every advecting field.
pub fn skew_convection_terms(grid: &Grid) -> Vec<(usize, usize, usize, f64)> {
    advection_terms(grid)
        .into_iter()
        .flat_map(|(s, q, k, c)| [(s, q, k, 0.5 * c), (k, q, s, -0.5 * c)])
        .collect()
}
