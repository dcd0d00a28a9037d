//! Small quadrature helpers shared by the closed-form and diagnostic layers.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut depth_hit = false;
    let v = simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 50, &mut depth_hit);
    if depth_hit || !v.is_finite() {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson on [{a}, {b}] did not reach tolerance {tol:e}"
        )));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    depth_hit: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 {
        *depth_hit = true;
        return left + right + delta / 15.0;
    }
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-15 * a.abs().max(1.0) {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, depth_hit)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, depth_hit)
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid_uniform(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (samples[0] + samples[n - 1]) + samples[1..n - 1].iter().sum::<f64>()),
    }
}
