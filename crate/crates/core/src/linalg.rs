//! Matrix-free GMRES.

/// Outcome of a GMRES solve.
#[derive(Debug, Clone, Copy)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES for `A x = b` with a matrix-free `apply(x, out)`.
///
/// Stops when the Euclidean residual drops below `tol * |b|` or after
/// `max_iter` Arnoldi steps in total. `x` holds the initial guess on entry.
pub fn gmres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let target = tol * bnorm;
    let mut total = 0;
    let mut ax = vec![0.0; n];
    let mut w = vec![0.0; n];
    loop {
        apply(x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta <= target || total >= max_iter {
            return GmresOutcome {
                iterations: total,
                residual: beta / bnorm,
            };
        }
        let m = restart.min(max_iter - total).max(1);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns after Givens rotations.
        let mut h = vec![vec![0.0; m + 1]; m];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            apply(&basis[k], &mut w);
            total += 1;
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                h[k][i] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            h[k][k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * h[k][i] + sn[i] * h[k][i + 1];
                h[k][i + 1] = -sn[i] * h[k][i] + cs[i] * h[k][i + 1];
                h[k][i] = t;
            }
            let (a, bb) = (h[k][k], h[k][k + 1]);
            let rho = a.hypot(bb);
            cs[k] = if rho == 0.0 { 1.0 } else { a / rho };
            sn[k] = if rho == 0.0 { 0.0 } else { bb / rho };
            h[k][k] = rho;
            h[k][k + 1] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
}
