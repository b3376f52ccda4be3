//! Velocity-pressure saddle systems on the free slots of a grid and their
//! direct (sparse LU) or iterative (block-preconditioned GMRES) solution.
//!
//! The pressure gauge is imposed with a Lagrange multiplier on the value
//! in the first cell (a mean-value row would be dense and ruins the LU
//! fill), so the augmented matrix
//!
//! ```text
//! [ A  B^T  0 ]
//! [ B  0    e ]
//! [ 0  e^T  0 ]
//! ```
//!
//! is nonsingular and its transpose is the adjoint system.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{PressureField, VelocityField};
use crate::forward::{BcKind, BcSpec};
use crate::grid::{Component, Grid, SlotKind};
use crate::linalg::krylov::{gmres, Ilu0};
use crate::linalg::operators::Operators;
use crate::linalg::sparse::{norm2, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Direct,
    Gmres,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Relative residual target `||r|| <= tol * ||rhs||`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Direct,
            tol: 1e-10,
            max_iter: 5000,
            restart: 80,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("solver.tol", "must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "must be positive"));
        }
        if self.restart == 0 {
            return Err(Error::config("solver.restart", "must be positive"));
        }
        Ok(())
    }
}

/// Split of the velocity slots into unknowns and prescribed values.
#[derive(Clone, Debug)]
pub struct DofMap {
    free: Vec<usize>,
    index: Vec<Option<usize>>,
}

impl DofMap {
    /// Interior faces are always unknown, wall-trace slots only under slip;
    /// normal faces and corners are always prescribed.
    pub fn new(grid: &Grid, slip: bool) -> Self {
        let mut free = Vec::new();
        let mut index = vec![None; grid.n_velocity()];
        for (s, kind) in grid.slot_kinds().iter().enumerate() {
            let is_free = match kind {
                SlotKind::Interior => true,
                SlotKind::Tangential(_) => slip,
                SlotKind::Normal(_) | SlotKind::Corner => false,
            };
            if is_free {
                index[s] = Some(free.len());
                free.push(s);
            }
        }
        DofMap { free, index }
    }

    pub fn for_bc(grid: &Grid, bc: &BcSpec) -> Self {
        Self::new(grid, bc.is_slip())
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }
    pub fn n_slots(&self) -> usize {
        self.index.len()
    }
    pub fn free_slots(&self) -> &[usize] {
        &self.free
    }
    pub fn free_index(&self, slot: usize) -> Option<usize> {
        self.index[slot]
    }
    pub fn index_map(&self) -> &[Option<usize>] {
        &self.index
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&s| full[s]).collect()
    }

    /// Writes free values into `full`, leaving prescribed slots untouched.
    pub fn scatter(&self, free: &[f64], full: &mut [f64]) {
        for (&s, &v) in self.free.iter().zip(free) {
            full[s] = v;
        }
    }

    /// Zeroes every prescribed slot.
    pub fn mask_fixed(&self, full: &mut [f64]) {
        for (s, v) in full.iter_mut().enumerate() {
            if self.index[s].is_none() {
                *v = 0.0;
            }
        }
    }
}

fn tangent_component(grid: &Grid, slot: usize, tangent: [f64; 2]) -> f64 {
    match grid.slot_component(slot) {
        Component::X => tangent[0],
        Component::Y => tangent[1],
    }
}

/// Full-length vector holding the prescribed slot values at a time level:
/// the wall data on trace slots under Dirichlet conditions, zero elsewhere.
pub fn constrained_values(ops: &Operators, bc: &BcSpec, level: usize) -> Vec<f64> {
    let grid = ops.grid();
    let mut v = vec![0.0; grid.n_velocity()];
    if let BcKind::Dirichlet = bc.kind() {
        let b = bc.data().at(level);
        for (f, face) in grid.boundary_faces().iter().enumerate() {
            if let Some(s) = face.slot {
                v[s] = b[f] * tangent_component(grid, s, face.tangent);
            }
        }
    }
    v
}

/// Boundary friction coefficient per slot, `(alpha + (b . nu)/2) * length`
/// on trace slots under slip, zero otherwise.
pub fn friction_diagonal(ops: &Operators, bc: &BcSpec, level: usize) -> Vec<f64> {
    let grid = ops.grid();
    let mut d = vec![0.0; grid.n_velocity()];
    if let BcKind::NavierSlip { alpha } = bc.kind() {
        for (f, face) in grid.boundary_faces().iter().enumerate() {
            if let Some(s) = face.slot {
                d[s] += (alpha + 0.5 * bc.data().normal_velocity(level, f)) * face.length;
            }
        }
    }
    d
}

/// Weak-form load of the wall data under slip: `alpha * b_tau * length`.
pub fn boundary_load(ops: &Operators, bc: &BcSpec, level: usize) -> Vec<f64> {
    let grid = ops.grid();
    let mut l = vec![0.0; grid.n_velocity()];
    if let BcKind::NavierSlip { alpha } = bc.kind() {
        let b = bc.data().at(level);
        for (f, face) in grid.boundary_faces().iter().enumerate() {
            if let Some(s) = face.slot {
                l[s] += alpha * b[f] * face.length * tangent_component(grid, s, face.tangent);
            }
        }
    }
    l
}

/// `2 mu K + friction + C(w)` on the full slot space.
pub fn spatial_operator(ops: &Operators, bc: &BcSpec, mu: f64, advecting: Option<&[f64]>, level: usize) -> CsrMatrix {
    let mut t: Vec<(usize, usize, f64)> = ops.stiffness().triplets().map(|(r, c, v)| (r, c, 2.0 * mu * v)).collect();
    for (s, d) in friction_diagonal(ops, bc, level).into_iter().enumerate() {
        if d != 0.0 {
            t.push((s, s, d));
        }
    }
    if let Some(w) = advecting {
        t.extend(ops.convection().matrix_in_second(w).triplets());
    }
    let n = ops.n_velocity();
    CsrMatrix::from_triplets(n, n, t)
}

/// Diagonal matrix `diag(d)` added to `a`.
pub(crate) fn add_diagonal(a: &CsrMatrix, d: &[f64]) -> CsrMatrix {
    let mut t: Vec<_> = a.triplets().collect();
    t.extend(d.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, i, v)));
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), t)
}

/// One velocity-pressure system restricted to the free slots.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    a: CsrMatrix,
    b: CsrMatrix,
    rhs_u: Vec<f64>,
    rhs_p: Vec<f64>,
    gauge: Vec<f64>,
    dofs: Arc<DofMap>,
    fixed: Vec<f64>,
    grid: Grid,
}

impl SaddleSystem {
    /// Restricts a full-space velocity operator and load to the free slots,
    /// moving the prescribed values `fixed` to the right-hand side.
    pub fn new(ops: &Operators, dofs: Arc<DofMap>, a_full: &CsrMatrix, load: &[f64], fixed: &[f64]) -> Result<Self> {
        let n = ops.n_velocity();
        if a_full.nrows() != n || a_full.ncols() != n || load.len() != n || fixed.len() != n || dofs.n_slots() != n {
            return Err(Error::Shape("saddle system inputs do not match the slot count".into()));
        }
        let map = dofs.index_map();
        let nf = dofs.n_free();
        let a = a_full.restrict(map, nf, map, nf);
        let ncell = ops.grid().n_cells();
        let rows: Vec<Option<usize>> = (0..ncell).map(Some).collect();
        let b = ops.divergence().restrict(&rows, ncell, map, nf);

        let lifted = a_full.matvec(fixed);
        let rhs_u = dofs.free_slots().iter().map(|&s| load[s] - lifted[s]).collect();
        let rhs_p = ops.divergence().matvec(fixed).into_iter().map(|v| -v).collect();
        Ok(SaddleSystem {
            a,
            b,
            rhs_u,
            rhs_p,
            gauge: {
                let mut e = vec![0.0; ncell];
                e[0] = ops.grid().cell_area();
                e
            },
            dofs,
            fixed: fixed.to_vec(),
            grid: ops.grid().clone(),
        })
    }

    pub fn velocity_block(&self) -> &CsrMatrix {
        &self.a
    }
    pub fn divergence_block(&self) -> &CsrMatrix {
        &self.b
    }
    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }
    pub fn n_free(&self) -> usize {
        self.dofs.n_free()
    }
    pub fn n_cells(&self) -> usize {
        self.gauge.len()
    }
    /// Size of the augmented system.
    pub fn dim(&self) -> usize {
        self.n_free() + self.n_cells() + 1
    }

    /// Augmented right-hand side `[rhs_u; rhs_p; 0]`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_u.clone();
        r.extend_from_slice(&self.rhs_p);
        r.push(0.0);
        r
    }

    pub fn set_velocity_rhs(&mut self, rhs_u: Vec<f64>) -> Result<()> {
        if rhs_u.len() != self.n_free() {
            return Err(Error::Shape("velocity right-hand side length".into()));
        }
        self.rhs_u = rhs_u;
        Ok(())
    }

    /// The augmented matrix.
    pub fn matrix(&self) -> CsrMatrix {
        let (nf, nc) = (self.n_free(), self.n_cells());
        let lam = nf + nc;
        let mut t: Vec<_> = self.a.triplets().collect();
        for (r, c, v) in self.b.triplets() {
            t.push((nf + r, c, v));
            t.push((c, nf + r, v));
        }
        for (k, &e) in self.gauge.iter().enumerate().filter(|(_, e)| **e != 0.0) {
            t.push((nf + k, lam, e));
            t.push((lam, nf + k, e));
        }
        CsrMatrix::from_triplets(lam + 1, lam + 1, t)
    }

    /// Augmented product `K [u_free; p; 0]`; prescribed slots of `u` are
    /// ignored.
    pub fn apply(&self, u: &VelocityField, p: &PressureField) -> Vec<f64> {
        let mut x = self.dofs.gather(u.values());
        x.extend_from_slice(p.values());
        x.push(0.0);
        self.matrix().matvec(&x)
    }

    /// Full velocity (free values plus prescribed ones) and mean-zero
    /// pressure from an augmented solution vector.
    pub fn unpack(&self, x: &[f64]) -> Result<(VelocityField, PressureField)> {
        let nf = self.n_free();
        let mut full = self.fixed.clone();
        self.dofs.scatter(&x[..nf], &mut full);
        let u = VelocityField::from_values(&self.grid, full)?;
        let mut p = PressureField::from_values(&self.grid, x[nf..nf + self.n_cells()].to_vec())?;
        p.remove_mean();
        Ok((u, p))
    }

    pub fn factorize(&self, opts: &SolverOptions) -> Result<SaddleFactor> {
        opts.validate()?;
        let k = self.matrix();
        let inner = match opts.kind {
            SolverKind::Direct => FactorKind::Direct(Box::new(lu_factor(&k)?)),
            SolverKind::Gmres => FactorKind::Iterative(Box::new(BlockPreconditioner::new(self)?)),
        };
        Ok(SaddleFactor {
            k,
            inner,
            opts: opts.clone(),
            n_free: self.n_free(),
            n_cells: self.n_cells(),
        })
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SaddleSolution> {
        let factor = self.factorize(opts)?;
        let (x, residual) = factor.solve(&self.rhs())?;
        let (velocity, pressure) = self.unpack(&x)?;
        Ok(SaddleSolution {
            velocity,
            pressure,
            residual,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub velocity: VelocityField,
    pub pressure: PressureField,
    /// Relative residual of the augmented system.
    pub residual: f64,
}

/// Steady saddle system `M/dt + 2 mu K + friction + C(w)` with the wall
/// data of `level`. `dt = None` drops the mass term (steady Stokes/Oseen).
pub fn assemble_saddle(
    ops: &Operators,
    bc: &BcSpec,
    advecting: Option<&VelocityField>,
    dt: Option<f64>,
    mu: f64,
    level: usize,
) -> Result<SaddleSystem> {
    bc.validate()?;
    if !(mu > 0.0) {
        return Err(Error::config("fluid.mu", "must be positive"));
    }
    let mut a = spatial_operator(ops, bc, mu, advecting.map(|w| w.values()), level);
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            return Err(Error::config("time.dt", "must be positive"));
        }
        let m: Vec<f64> = ops.mass().iter().map(|m| m / dt).collect();
        a = add_diagonal(&a, &m);
    }
    let dofs = Arc::new(DofMap::for_bc(ops.grid(), bc));
    let load = boundary_load(ops, bc, level);
    SaddleSystem::new(ops, dofs, &a, &load, &constrained_values(ops, bc, level))
}

pub fn solve_saddle(system: &SaddleSystem, opts: &SolverOptions) -> Result<SaddleSolution> {
    system.solve(opts)
}

fn lu_factor(k: &CsrMatrix) -> Result<Lu<usize, f64>> {
    // CSC arrays of K are the CSR arrays of K^T.
    let kt = k.transpose();
    let (indptr, indices, values) = kt.parts();
    let n = k.nrows();
    let sym = SymbolicSparseColMat::new_checked(n, n, indptr.to_vec(), None, indices.to_vec());
    let mat = SparseColMat::new(sym, values.to_vec());
    mat.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))
}

enum FactorKind {
    Direct(Box<Lu<usize, f64>>),
    Iterative(Box<BlockPreconditioner>),
}

/// A factorized (or preconditioned) saddle system that can be solved
/// repeatedly with the matrix or its transpose.
pub struct SaddleFactor {
    k: CsrMatrix,
    inner: FactorKind,
    opts: SolverOptions,
    n_free: usize,
    n_cells: usize,
}

impl SaddleFactor {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.k
    }
    pub fn n_free(&self) -> usize {
        self.n_free
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Solves `K x = rhs`; returns `x` and the relative residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.run(rhs, false)
    }

    /// Solves `K^T x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.run(rhs, true)
    }

    fn residual(&self, rhs: &[f64], x: &[f64], transpose: bool) -> Vec<f64> {
        let kx = if transpose {
            let mut y = vec![0.0; x.len()];
            self.k.transpose_matvec_add(x, &mut y);
            y
        } else {
            self.k.matvec(x)
        };
        rhs.iter().zip(kx).map(|(b, a)| b - a).collect()
    }

    fn run(&self, rhs: &[f64], transpose: bool) -> Result<(Vec<f64>, f64)> {
        if rhs.len() != self.k.nrows() {
            return Err(Error::Shape(format!(
                "right-hand side has length {}, system has {}",
                rhs.len(),
                self.k.nrows()
            )));
        }
        let bnorm = norm2(rhs);
        if bnorm == 0.0 {
            return Ok((vec![0.0; rhs.len()], 0.0));
        }
        let tol = self.opts.tol;
        match &self.inner {
            FactorKind::Direct(lu) => {
                let lu_solve = |b: &[f64]| -> Vec<f64> {
                    let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                    if transpose {
                        lu.solve_transpose_in_place(m.as_mut());
                    } else {
                        lu.solve_in_place(m.as_mut());
                    }
                    (0..b.len()).map(|i| m[(i, 0)]).collect()
                };
                // Refine past the requested tolerance when cheap, so that
                // repeated solves stay consistent with each other.
                let target = tol * 1e-2;
                let mut x = lu_solve(rhs);
                let mut rel = f64::INFINITY;
                for sweep in 0..4 {
                    let r = self.residual(rhs, &x, transpose);
                    rel = norm2(&r) / bnorm;
                    if !rel.is_finite() {
                        return Err(Error::Solver {
                            residual: rel,
                            iterations: sweep,
                        });
                    }
                    if rel <= target || sweep == 3 {
                        break;
                    }
                    let dx = lu_solve(&r);
                    x.iter_mut().zip(dx).for_each(|(x, d)| *x += d);
                }
                if rel <= tol {
                    Ok((x, rel))
                } else {
                    Err(Error::Solver {
                        residual: rel,
                        iterations: 4,
                    })
                }
            }
            FactorKind::Iterative(pre) => {
                let mut x = vec![0.0; rhs.len()];
                let report = if transpose {
                    gmres(
                        |v| {
                            let mut y = vec![0.0; v.len()];
                            self.k.transpose_matvec_add(v, &mut y);
                            y
                        },
                        |v| pre.apply(v, true),
                        rhs,
                        &mut x,
                        tol,
                        self.opts.restart,
                        self.opts.max_iter,
                    )?
                } else {
                    gmres(
                        |v| self.k.matvec(v),
                        |v| pre.apply(v, false),
                        rhs,
                        &mut x,
                        tol,
                        self.opts.restart,
                        self.opts.max_iter,
                    )?
                };
                Ok((x, report.residual))
            }
        }
    }
}

/// Block upper-triangular preconditioner: ILU(0) of the velocity block
/// and a diagonal approximation `diag(B diag(A)^-1 B^T)` of the Schur
/// complement.
struct BlockPreconditioner {
    ilu: Ilu0,
    ilu_t: Ilu0,
    b: CsrMatrix,
    schur: Vec<f64>,
    n_free: usize,
}

impl BlockPreconditioner {
    fn new(sys: &SaddleSystem) -> Result<Self> {
        let nf = sys.n_free();
        let mut diag = vec![0.0; nf];
        for (r, c, v) in sys.a.triplets() {
            if r == c {
                diag[r] = v;
            }
        }
        if let Some(i) = diag.iter().position(|d| *d <= 0.0) {
            return Err(Error::Factorization(format!(
                "velocity block has non-positive diagonal at free dof {i}"
            )));
        }
        let mut schur = vec![0.0; sys.n_cells()];
        for (r, c, v) in sys.b.triplets() {
            schur[r] += v * v / diag[c];
        }
        let floor = schur.iter().cloned().fold(0.0, f64::max) * 1e-8;
        schur.iter_mut().for_each(|s| *s = s.max(floor).max(f64::MIN_POSITIVE));
        Ok(BlockPreconditioner {
            ilu: Ilu0::new(&sys.a)?,
            ilu_t: Ilu0::new(&sys.a.transpose())?,
            b: sys.b.clone(),
            schur,
            n_free: nf,
        })
    }

    fn apply(&self, z: &[f64], transpose: bool) -> Vec<f64> {
        let nf = self.n_free;
        let nc = self.schur.len();
        let mut y = vec![0.0; z.len()];
        for k in 0..nc {
            y[nf + k] = -z[nf + k] / self.schur[k];
        }
        y[nf + nc] = z[nf + nc];
        let mut u = z[..nf].to_vec();
        let mut btp = vec![0.0; nf];
        self.b.transpose_matvec_add(&y[nf..nf + nc], &mut btp);
        u.iter_mut().zip(btp).for_each(|(u, b)| *u -= b);
        if transpose {
            self.ilu_t.solve_in_place(&mut u);
        } else {
            self.ilu.solve_in_place(&mut u);
        }
        y[..nf].copy_from_slice(&u);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BoundaryData;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slip(grid: &Grid, alpha: f64) -> BcSpec {
        BcSpec::navier_slip(alpha, BoundaryData::zero(grid)).unwrap()
    }

    #[test]
    fn friction_diagonal_is_linear_in_alpha() {
        let g = Grid::build((1.0, 1.0), (8, 8)).unwrap();
        let ops = Operators::new(&g);
        let s1 = assemble_saddle(&ops, &slip(&g, 10.0), None, Some(0.1), 1.0, 0).unwrap();
        let s2 = assemble_saddle(&ops, &slip(&g, 20.0), None, Some(0.1), 1.0, 0).unwrap();
        let diff = s2.velocity_block().add_scaled(-1.0, s1.velocity_block()).unwrap();
        for (r, c, v) in diff.triplets() {
            assert_eq!(r, c);
            let slot = s1.dofs().free_slots()[r];
            assert!((v - 10.0 * ops.friction()[slot]).abs() < 1e-12);
        }
        assert_eq!(diff.nnz(), 4 * 7);
    }

    #[test]
    fn zero_convection_gives_symmetric_block() {
        let g = Grid::build((1.0, 1.0), (8, 8)).unwrap();
        let ops = Operators::new(&g);
        for bc in [slip(&g, 10.0), BcSpec::dirichlet(BoundaryData::zero(&g))] {
            let s = assemble_saddle(&ops, &bc, None, Some(0.05), 0.7, 0).unwrap();
            let a = s.velocity_block();
            let skew = a.add_scaled(-1.0, &a.transpose()).unwrap();
            assert!(skew.max_abs() <= 1e-14 * a.max_abs());
        }
    }

    #[test]
    fn manufactured_round_trip_both_solvers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Grid::build((1.0, 1.0), (10, 10)).unwrap();
        let ops = Operators::new(&g);
        let w = VelocityField::from_values(&g, (0..g.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let sys = assemble_saddle(&ops, &slip(&g, 12.0), Some(&w), Some(0.05), 1.0, 0).unwrap();
        let mut u = vec![0.0; g.n_velocity()];
        for &s in sys.dofs().free_slots() {
            u[s] = rng.random_range(-1.0..1.0);
        }
        let u = VelocityField::from_values(&g, u).unwrap();
        let mut p = PressureField::from_values(&g, (0..g.n_cells()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let rhs = sys.apply(&u, &p);
        p.remove_mean();
        for kind in [SolverKind::Direct, SolverKind::Gmres] {
            let opts = SolverOptions {
                kind,
                tol: 1e-11,
                ..Default::default()
            };
            let fac = sys.factorize(&opts).unwrap();
            let (x, res) = fac.solve(&rhs).unwrap();
            assert!(res <= 1e-11);
            let (uu, pp) = sys.unpack(&x).unwrap();
            assert!(uu.difference(&u).max_abs() < 1e-8, "{kind:?}");
            let dp = pp.values().iter().zip(p.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(dp < 1e-7, "{kind:?} {dp}");

            let (xt, rt) = fac.solve_transpose(&rhs).unwrap();
            assert!(rt <= 1e-11);
            let mut kt_x = vec![0.0; xt.len()];
            fac.matrix().transpose_matvec_add(&xt, &mut kt_x);
            let err = norm2(&kt_x.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-10 * norm2(&rhs));
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let g = Grid::build((1.0, 1.0), (6, 6)).unwrap();
        let ops = Operators::new(&g);
        let sys = assemble_saddle(&ops, &BcSpec::dirichlet(BoundaryData::zero(&g)), None, Some(1.0), 1.0, 0).unwrap();
        let sol = sys.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.velocity.max_abs(), 0.0);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn rejects_bad_dt() {
        let g = Grid::build((1.0, 1.0), (6, 6)).unwrap();
        let ops = Operators::new(&g);
        let bc = BcSpec::dirichlet(BoundaryData::zero(&g));
        assert!(assemble_saddle(&ops, &bc, None, Some(0.0), 1.0, 0).is_err());
        assert!(assemble_saddle(&ops, &bc, None, Some(1.0), -1.0, 0).is_err());
    }
}
