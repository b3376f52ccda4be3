//! Restarted GMRES and an ILU(0) factorization used to build the block
//! preconditioner of the iterative saddle solver.

use crate::error::{Error, Result};
use crate::linalg::sparse::{dot, norm2, CsrMatrix};

/// Incomplete LU factorization with the sparsity pattern of the input.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let (indptr, indices, values) = a.parts();
        let (indptr, indices, mut values) = (indptr.to_vec(), indices.to_vec(), values.to_vec());
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                if indices[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Factorization(format!("ILU(0): row {i} has no diagonal entry")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = k;
            }
            for kk in indptr[i]..indptr[i + 1] {
                let k = indices[kk];
                if k >= i {
                    break;
                }
                let pivot = values[diag[k]];
                values[kk] /= pivot;
                let lik = values[kk];
                for jj in diag[k] + 1..indptr[k + 1] {
                    let p = pos[indices[jj]];
                    if p != usize::MAX {
                        values[p] -= lik * values[jj];
                    }
                }
            }
            for k in indptr[i]..indptr[i + 1] {
                pos[indices[k]] = usize::MAX;
            }
            let d = values[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Factorization(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 {
            indptr,
            indices,
            values,
            diag,
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = x[i];
            for k in self.indptr[i]..self.diag[i] {
                s -= self.values[k] * x[self.indices[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..self.indptr[i + 1] {
                s -= self.values[k] * x[self.indices[k]];
            }
            x[i] = s / self.values[self.diag[i]];
        }
    }
}

/// Outcome of a GMRES run.
#[derive(Clone, Debug)]
pub struct KrylovReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Right-preconditioned restarted GMRES for `a x = b` starting from `x`.
/// The reported residual is relative to `||b||`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<KrylovReport> {
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let m = restart.max(1);
    let mut iterations = 0;
    while iterations < max_iter {
        let ax = apply(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm2(&r);
        if beta / bnorm <= tol {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|r| r / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if iterations >= max_iter {
                break;
            }
            iterations += 1;
            let zk = precondition(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for (j, vj) in v.iter().enumerate() {
                let hjk = dot(&w, vj);
                h[j][k] = hjk;
                w.iter_mut().zip(vj).for_each(|(w, v)| *w -= hjk * v);
            }
            let wn = norm2(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|w| w / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(x, z)| *x += yi * z);
        }
        if k_used == 0 {
            break;
        }
    }
    let ax = apply(x);
    let true_rel = norm2(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
    if true_rel <= tol {
        Ok(KrylovReport {
            iterations,
            residual: true_rel,
        })
    } else {
        Err(Error::Solver {
            residual: true_rel,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn ilu0_is_exact_on_tridiagonal() {
        let a = tridiag(20);
        let ilu = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let mut b = a.matvec(&x);
        ilu.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 200;
        let mut t: Vec<_> = tridiag(n).triplets().collect();
        for i in 0..n - 7 {
            t.push((i, i + 7, 0.3));
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut x = vec![0.0; n];
        let rep = gmres(|v| a.matvec(v), |v| v.to_vec(), &b, &mut x, 1e-11, 30, 2000).unwrap();
        assert!(rep.residual <= 1e-11);
    }
}
