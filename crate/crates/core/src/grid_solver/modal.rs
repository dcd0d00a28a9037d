//! Fast direct solver for the linear Robin problem on the rectangle.
//!
//! Unknowns are the nodes `i = 1..nx-1`, `j = 0..ny-1`. The bottom row carries
//! the ghost-node Robin condition `v_y - kappa v = s`, the other three sides are
//! Dirichlet. The operator splits as `Ty (x) I + I (x) Tx`; `Ty` is diagonalized
//! once (after a diagonal similarity that makes it symmetric) and every `y`-mode
//! reduces to a constant-coefficient tridiagonal solve in `x`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::grid::GridSpec;

pub(crate) struct ModalSolver {
    /// Number of `y` unknowns per column (`ny`).
    m: usize,
    /// Number of `x` unknowns per row (`nx - 1`).
    n: usize,
    /// Coefficients of `v_{i-1}` and `v_{i+1}` in the `x` stencil.
    pub(crate) west: f64,
    pub(crate) east: f64,
    /// `P` and `P^{-1}` with `Ty = P diag(lambda) P^{-1}`.
    p: DMatrix<f64>,
    pinv: DMatrix<f64>,
    p_row0: Vec<f64>,
    pinv_col0: Vec<f64>,
    /// Thomas factors per mode, stored at `i * m + k`.
    cp: Vec<f64>,
    inv: Vec<f64>,
}

/// Symmetric eigendecomposition `s = q diag(lambda) q^T`. `SymmetricEigen`
/// alone leaves residuals of ~1e-9 relative once the Robin shift is large, so
/// its result is polished with cyclic Jacobi sweeps on `q^T s q`.
fn eigen(s: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let m = s.nrows();
    let mut q = SymmetricEigen::new(s.clone()).eigenvectors;
    let mut b = q.transpose() * &s * &q;
    let scale = b.amax().max(f64::MIN_POSITIVE);
    for _ in 0..50 {
        let mut off: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                off = off.max(b[(i, j)].abs());
            }
        }
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..m {
            for r in p + 1..m {
                let apr = b[(p, r)];
                if apr.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = 0.5 * (b[(r, r)] - b[(p, p)]) / apr;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..m {
                    let (bkp, bkr) = (b[(k, p)], b[(k, r)]);
                    b[(k, p)] = cs * bkp - sn * bkr;
                    b[(k, r)] = sn * bkp + cs * bkr;
                }
                for k in 0..m {
                    let (bpk, brk) = (b[(p, k)], b[(r, k)]);
                    b[(p, k)] = cs * bpk - sn * brk;
                    b[(r, k)] = sn * bpk + cs * brk;
                }
                for k in 0..m {
                    let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
                    q[(k, p)] = cs * qkp - sn * qkr;
                    q[(k, r)] = sn * qkp + cs * qkr;
                }
            }
        }
    }
    (q, b.diagonal())
}

impl ModalSolver {
    pub(crate) fn new(grid: &GridSpec, c: f64, kappa: f64) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let m = grid.ny;
        let n = grid.nx - 1;
        let iy2 = 1.0 / (hy * hy);
        // Symmetrized Ty: D Ty D^{-1} with D = diag(1/sqrt2, 1, ..., 1).
        let mut s = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            s[(j, j)] = -2.0 * iy2;
            if j + 1 < m {
                let off = if j == 0 { std::f64::consts::SQRT_2 * iy2 } else { iy2 };
                s[(j, j + 1)] = off;
                s[(j + 1, j)] = off;
            }
        }
        s[(0, 0)] -= 2.0 * kappa / hy;
        let (q, lambda) = eigen(s);
        let mut p = q.clone();
        let mut pinv = q.transpose();
        for k in 0..m {
            p[(0, k)] *= std::f64::consts::SQRT_2;
            pinv[(k, 0)] /= std::f64::consts::SQRT_2;
        }

        let ix2 = 1.0 / (hx * hx);
        let west = ix2 - 0.5 * c / hx;
        let east = ix2 + 0.5 * c / hx;
        let mut cp = vec![0.0; m * n];
        let mut inv = vec![0.0; m * n];
        for k in 0..m {
            let d = -2.0 * ix2 + lambda[k];
            let mut den = d;
            inv[k] = 1.0 / den;
            cp[k] = east * inv[k];
            for i in 1..n {
                den = d - west * cp[(i - 1) * m + k];
                inv[i * m + k] = 1.0 / den;
                cp[i * m + k] = east * inv[i * m + k];
            }
        }
        let p_row0 = (0..m).map(|k| p[(0, k)]).collect();
        let pinv_col0 = (0..m).map(|k| pinv[(k, 0)]).collect();
        ModalSolver {
            m,
            n,
            west,
            east,
            p,
            pinv,
            p_row0,
            pinv_col0,
            cp,
            inv,
        }
    }

    pub(crate) fn rows(&self) -> usize {
        self.m
    }

    pub(crate) fn cols(&self) -> usize {
        self.n
    }

    /// Applies `(lambda_k + Tx)^{-1}` to every mode row of `w` (column-major `m x n`).
    fn sweep(&self, w: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        for k in 0..m {
            w[k] *= self.inv[k];
        }
        for i in 1..n {
            let (prev, cur) = w[(i - 1) * m..(i + 1) * m].split_at_mut(m);
            let inv = &self.inv[i * m..(i + 1) * m];
            for k in 0..m {
                cur[k] = (cur[k] - self.west * prev[k]) * inv[k];
            }
        }
        for i in (0..n - 1).rev() {
            let (cur, next) = w[i * m..(i + 2) * m].split_at_mut(m);
            let cp = &self.cp[i * m..(i + 1) * m];
            for k in 0..m {
                cur[k] -= cp[k] * next[k];
            }
        }
    }

    pub(crate) fn to_modes(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.pinv * rhs
    }

    /// Runs the tridiagonal sweeps on transformed data and maps back.
    pub(crate) fn from_modes(&self, mut w: DMatrix<f64>) -> DMatrix<f64> {
        self.sweep(w.as_mut_slice());
        &self.p * w
    }

    /// Bottom row of the solution whose transformed right-hand side is `w`.
    pub(crate) fn bottom_of_modes(&self, mut w: DMatrix<f64>) -> Vec<f64> {
        self.sweep(w.as_mut_slice());
        w.as_slice()
            .chunks_exact(self.m)
            .map(|col| col.iter().zip(&self.p_row0).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `E^T A^{-1} E x`: bottom trace of the solution driven by `x` in the bottom row.
    pub(crate) fn trace_apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        let col0 = &self.pinv_col0;
        let mut w = vec![0.0; m * self.n];
        for (i, xi) in x.iter().enumerate() {
            for k in 0..m {
                w[i * m + k] = col0[k] * xi;
            }
        }
        self.sweep(&mut w);
        for (o, col) in out.iter_mut().zip(w.chunks_exact(m)) {
            *o = col.iter().zip(&self.p_row0).map(|(a, b)| a * b).sum();
        }
    }

    /// Maps `x` to the transformed right-hand side of a source in the bottom row.
    pub(crate) fn bottom_source_modes(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.n, |k, i| self.pinv_col0[k] * x[i])
    }
}
