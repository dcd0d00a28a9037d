//! Checks of a computed wave against the identities it should satisfy: the
//! integral speed identity, monotonicity, the Gaussian-tail envelope, the
//! `e^{-cx}/sqrt(x)` tail law and its boundary-integral reconstruction.

use serde::{Deserialize, Serialize};

use crate::closed_forms::{self, ClosedFormParams};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::quadrature::adaptive_simpson;
use crate::reaction::{Nonlinearity, ReactionTerm};
use crate::special::{bessel_k0, erfc};

/// Tolerances of the wave checks.
pub mod tolerances {
    /// Relative gap of the integral identity on manufactured waves.
    pub const IDENTITY_MANUFACTURED: f64 = 0.02;
    /// Relative gap of the integral identity on found waves.
    pub const IDENTITY_FOUND: f64 = 0.05;
    /// `speed_from_identity` against `c_R`.
    pub const SPEED_FROM_IDENTITY: f64 = 0.05;
    /// Fitted decay rate against `c_R`.
    pub const DECAY_RATE: f64 = 0.03;
    /// `mu0` from the fit against the integral formula.
    pub const MU0: f64 = 0.10;
    /// Boundary-integral reconstruction against the direct tail.
    pub const HELMHOLTZ: f64 = 0.10;
    /// Monotonicity defect of converged waves.
    pub const MONOTONICITY: f64 = 1e-9;
    /// Envelope violation allowance is `ENVELOPE_H2 * h^2 + ENVELOPE_ABS`.
    pub const ENVELOPE_H2: f64 = 2.0;
    pub const ENVELOPE_ABS: f64 = 1e-8;
    /// Probe points of the reconstruction.
    pub const HELMHOLTZ_PROBES: [f64; 3] = [2.0, 4.0, 8.0];
    /// Tail window: `1 - v` between these bounds, `x` below `TAIL_X_FRACTION * R`.
    pub const TAIL_LOWER: f64 = 1e-12;
    pub const TAIL_UPPER: f64 = 1e-2;
    pub const TAIL_X_FRACTION: f64 = 0.75;
    pub const TAIL_MIN_NODES: usize = 20;
}

use tolerances::*;

/// `dv/dx` at every node: centered inside, second-order one-sided at the ends.
fn x_derivative(v: &Field) -> Vec<f64> {
    let g = v.grid;
    let h = g.hx();
    let mut out = vec![0.0; v.values.len()];
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let d = if i == 0 {
                (-3.0 * v.at(0, j) + 4.0 * v.at(1, j) - v.at(2, j)) / (2.0 * h)
            } else if i == g.nx {
                (3.0 * v.at(i, j) - 4.0 * v.at(i - 1, j) + v.at(i - 2, j)) / (2.0 * h)
            } else {
                (v.at(i + 1, j) - v.at(i - 1, j)) / (2.0 * h)
            };
            out[v.index(i, j)] = d;
        }
    }
    out
}

/// Terms of the speed identity on the rectangle, boundary flux included:
/// `c Q = M - top - right + left`, with `Q` the `x`-Dirichlet energy,
/// `top = int v_x v_y dx` at `y = H` and `right`, `left` the values of
/// `1/2 int (v_x^2 - v_y^2) dy` at `x = R` and `x = -R`. `M` is the mass of
/// `f` between the end values of the bottom trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityClosure {
    pub mass: f64,
    pub dissipation: f64,
    pub top: f64,
    pub right: f64,
    pub left: f64,
    /// `|c Q - (M - top - right + left)| / M`.
    pub residual: f64,
}

fn y_derivative_at(v: &Field, i: usize, j: usize) -> f64 {
    let g = v.grid;
    let h = g.hy();
    if j == 0 {
        (-3.0 * v.at(i, 0) + 4.0 * v.at(i, 1) - v.at(i, 2)) / (2.0 * h)
    } else if j == g.ny {
        (3.0 * v.at(i, j) - 4.0 * v.at(i, j - 1) + v.at(i, j - 2)) / (2.0 * h)
    } else {
        (v.at(i, j + 1) - v.at(i, j - 1)) / (2.0 * h)
    }
}

pub fn identity_closure(v: &Field, c: f64, f: &dyn Nonlinearity) -> Result<IdentityClosure> {
    let g = v.grid;
    let dx = x_derivative(v);
    let weight = |k: usize, n: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
    let top = (0..=g.nx)
        .map(|i| weight(i, g.nx) * dx[v.index(i, g.ny)] * y_derivative_at(v, i, g.ny))
        .sum::<f64>()
        * g.hx();
    let side = |i: usize| {
        (0..=g.ny)
            .map(|j| {
                let (a, b) = (dx[v.index(i, j)], y_derivative_at(v, i, j));
                weight(j, g.ny) * 0.5 * (a * a - b * b)
            })
            .sum::<f64>()
            * g.hy()
    };
    let (right, left) = (side(g.nx), side(0));
    let (lo, hi) = (v.at(0, 0).clamp(0.0, 1.0), v.at(g.nx, 0).clamp(0.0, 1.0));
    let value = |u: f64| f.value(u);
    let mut mass = f.mass();
    if lo > 0.0 {
        mass -= adaptive_simpson(value, 0.0, lo, 1e-13)?;
    }
    if hi < 1.0 {
        mass -= adaptive_simpson(value, hi, 1.0, 1e-13)?;
    }
    let dissipation = c * dirichlet_energy_x(v);
    let residual = (dissipation - (mass - top - right + left)).abs() / mass.abs().max(f64::MIN_POSITIVE);
    Ok(IdentityClosure {
        mass,
        dissipation,
        top,
        right,
        left,
        residual,
    })
}

/// Trapezoid rule of `|dv/dx|^2` over the rectangle.
pub fn dirichlet_energy_x(v: &Field) -> f64 {
    let g = v.grid;
    let d = x_derivative(v);
    let mut sum = 0.0;
    for j in 0..=g.ny {
        let wy = if j == 0 || j == g.ny { 0.5 } else { 1.0 };
        for i in 0..=g.nx {
            let wx = if i == 0 || i == g.nx { 0.5 } else { 1.0 };
            let dx = d[v.index(i, j)];
            sum += wx * wy * dx * dx;
        }
    }
    sum * g.hx() * g.hy()
}

/// `|M - c Q| / M` with `Q` the trapezoid integral of `|dv/dx|^2`; zero when
/// both sides vanish.
pub fn integral_identity_gap(v: &Field, c: f64, f: &dyn Nonlinearity) -> f64 {
    let m = f.mass();
    let rhs = c * dirichlet_energy_x(v);
    if m == 0.0 {
        return if rhs == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (m - rhs).abs() / m
}

/// `M / Q`, the speed implied by the integral identity.
pub fn speed_from_identity(v: &Field, f: &dyn Nonlinearity) -> Result<f64> {
    let q = dirichlet_energy_x(v);
    if q < 1e-14 {
        return Err(Error::Degenerate(format!("int |v_x|^2 = {q:e}")));
    }
    Ok(f.mass() / q)
}

/// Largest `(1 - v(x, 0)) - erfc(sqrt(c x))` over bottom nodes with
/// `1 <= x <= 0.75 R`; `None` when no node lies in that window.
pub fn decay_envelope_violation(v: &Field, c: f64) -> Option<f64> {
    let g = v.grid;
    let x_max = TAIL_X_FRACTION * g.half_width;
    (0..=g.nx)
        .filter(|&i| (1.0..=x_max).contains(&g.x(i)))
        .map(|i| (1.0 - v.at(i, 0)) - erfc((c * g.x(i)).sqrt()))
        .reduce(f64::max)
}

/// Allowed envelope violation on grid `v.grid`.
pub fn envelope_allowance(v: &Field) -> f64 {
    let h = v.grid.hx().max(v.grid.hy());
    ENVELOPE_H2 * h * h + ENVELOPE_ABS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Prefactor with the decay rate fixed to `c`.
    pub mu0_fit: f64,
    pub mu0_formula: Option<f64>,
    /// Rate of the free two-parameter fit.
    pub rate: f64,
    /// `(rate - c) / c`.
    pub exponent_residual: f64,
    pub window: (f64, f64),
    pub nodes: usize,
}

/// Least-squares fit of `log(1 - v(x, 0)) + log(x)/2` by `log mu0 - k x`.
pub fn tail_fit(v: &Field, c: f64) -> Result<TailFit> {
    let g = v.grid;
    let x_max = TAIL_X_FRACTION * g.half_width;
    let pts: Vec<(f64, f64)> = (0..=g.nx)
        .filter_map(|i| {
            let x = g.x(i);
            let w = 1.0 - v.at(i, 0);
            (x > 0.0 && x < x_max && w > TAIL_LOWER && w < TAIL_UPPER)
                .then(|| (x, w.ln() + 0.5 * x.ln()))
        })
        .collect();
    if pts.len() < TAIL_MIN_NODES {
        return Err(Error::WindowTooSmall {
            found: pts.len(),
            needed: TAIL_MIN_NODES,
        });
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let rate = -sxy / sxx;
    let log_mu0 = pts.iter().map(|p| p.1 + c * p.0).sum::<f64>() / n;
    Ok(TailFit {
        mu0_fit: log_mu0.exp(),
        mu0_formula: None,
        rate,
        exponent_residual: (rate - c) / c,
        window: (pts[0].0, pts[pts.len() - 1].0),
        nodes: pts.len(),
    })
}

/// Bottom nodes with `x <= 0`, as `(x' = -x, f(v(x, 0)))` with `x'` increasing.
fn source_trace(v: &Field, f: &dyn Nonlinearity) -> Vec<(f64, f64)> {
    let g = v.grid;
    (0..=g.center_index())
        .rev()
        .map(|i| (-g.x(i), f.value(v.at(i, 0))))
        .collect()
}

fn trapezoid(pts: &[(f64, f64)], mut weight: impl FnMut(f64) -> f64) -> f64 {
    pts.windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 * weight(w[0].0) + w[1].1 * weight(w[1].0)))
        .sum()
}

/// `mu0 = (1/sqrt(pi c)) int_0^inf e^{-c x'} f(v(-x', 0)) dx'` on the trace.
pub fn mu0_from_formula(v: &Field, c: f64, f: &dyn Nonlinearity) -> Result<f64> {
    let g = v.grid;
    for i in g.center_index() + 1..=g.nx {
        let value = f.value(v.at(i, 0));
        if value > 1e-10 {
            return Err(Error::Normalization { x: g.x(i), value });
        }
    }
    let pts = source_trace(v, f);
    let integral = trapezoid(&pts, |x| (-c * x).exp());
    Ok(integral / (std::f64::consts::PI * c).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelmholtzProbe {
    pub x: f64,
    pub reconstructed: f64,
    /// `e^{cx/2} (1 - v(x, 0))`.
    pub direct: f64,
    pub relative: f64,
}

/// `w(x, 0) = 2 int_0^inf phi(|x + x'|) e^{-c x'/2} f(v(-x', 0)) dx'` with
/// `phi(r) = K0(c r / 2) / (2 pi)`.
pub fn helmholtz_reconstruct(v: &Field, c: f64, f: &dyn Nonlinearity, x: f64) -> Result<f64> {
    if !(x > 1.0) {
        return Err(Error::param("x", format!("probe must exceed 1, got {x}")));
    }
    let pts = source_trace(v, f);
    if pts.len() < 8 {
        return Err(Error::Quadrature(format!("only {} trace nodes on x <= 0", pts.len())));
    }
    let mut bad = None;
    let integral = trapezoid(&pts, |xp| {
        let k0 = bessel_k0(0.5 * c * (x + xp)).unwrap_or_else(|e| {
            bad = Some(e);
            0.0
        });
        k0 * (-0.5 * c * xp).exp()
    });
    if let Some(e) = bad {
        return Err(e);
    }
    Ok(integral / std::f64::consts::PI)
}

/// Linear interpolation of the bottom trace.
fn bottom_at(v: &Field, x: f64) -> f64 {
    let g = v.grid;
    let s = ((x + g.half_width) / g.hx()).clamp(0.0, g.nx as f64);
    let i = (s.floor() as usize).min(g.nx - 1);
    let t = s - i as f64;
    (1.0 - t) * v.at(i, 0) + t * v.at(i + 1, 0)
}

pub fn helmholtz_probe(v: &Field, c: f64, f: &dyn Nonlinearity, x: f64) -> Result<HelmholtzProbe> {
    let reconstructed = helmholtz_reconstruct(v, c, f, x)?;
    let direct = (0.5 * c * x).exp() * (1.0 - bottom_at(v, x));
    Ok(HelmholtzProbe {
        x,
        reconstructed,
        direct,
        relative: (reconstructed - direct).abs() / direct.abs(),
    })
}

/// Largest decrease of `v` along `x` and along `y` (zero when monotone).
pub fn monotonicity_violation(v: &Field) -> (f64, f64) {
    let g = v.grid;
    let (mut mx, mut my) = (0.0f64, 0.0f64);
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            if i < g.nx {
                mx = mx.max(v.at(i, j) - v.at(i + 1, j));
            }
            if j < g.ny {
                my = my.max(v.at(i, j) - v.at(i, j + 1));
            }
        }
    }
    (mx, my)
}

/// JSON-ready summary of all checks; entries that could not be evaluated are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBundle {
    pub identity_gap: Option<f64>,
    pub identity_closure: Option<IdentityClosure>,
    pub speed_from_identity: Option<f64>,
    pub envelope_violation: Option<f64>,
    pub mu0_fit: Option<f64>,
    pub mu0_formula: Option<f64>,
    pub exponent_residual: Option<f64>,
    pub mono_x: f64,
    pub mono_y: f64,
    pub helmholtz_probes: Vec<HelmholtzProbe>,
}

pub fn bundle(v: &Field, c: f64, f: &dyn Nonlinearity) -> DiagnosticsBundle {
    let fit = tail_fit(v, c).ok();
    let (mono_x, mono_y) = monotonicity_violation(v);
    DiagnosticsBundle {
        identity_gap: Some(integral_identity_gap(v, c, f)).filter(|g| g.is_finite()),
        identity_closure: identity_closure(v, c, f).ok(),
        speed_from_identity: speed_from_identity(v, f).ok(),
        envelope_violation: decay_envelope_violation(v, c),
        mu0_fit: fit.map(|t| t.mu0_fit),
        mu0_formula: mu0_from_formula(v, c, f).ok(),
        exponent_residual: fit.map(|t| t.exponent_residual),
        mono_x,
        mono_y,
        helmholtz_probes: HELMHOLTZ_PROBES
            .iter()
            .filter(|&&x| x < v.grid.half_width)
            .filter_map(|&x| helmholtz_probe(v, c, f, x).ok())
            .collect(),
    }
}

/// Outcome of the first comparison inequality at one speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub c: f64,
    pub holds: bool,
    /// Smallest `g(u + eta) - f(u)` over the samples.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub eta: f64,
    pub a: f64,
    pub item1: Vec<ComparisonPoint>,
    /// Smallest sampled `c` from which the first inequality holds at every
    /// larger sampled speed.
    pub threshold: Option<f64>,
    /// Samples of `g_{delta,c}(u) <= eta` taken with `sqrt(c)/delta <= eta/||beta||`.
    pub item2_samples: usize,
    pub item2_passed: usize,
    /// Largest `g_{delta,c}(u) / eta` seen in those samples.
    pub item2_worst_ratio: f64,
}

/// Scans both comparison inequalities between `f` and `g_{delta,c}`.
///
/// First inequality: `g_{delta,c}(u + eta) >= f(u)` with `delta = a / sqrt(c)`,
/// for every `c` in `c_samples`. Second: `g_{delta,c}(u) <= eta` at every `c`
/// with `delta = sqrt(c) ||beta|| / (eta s)` for each fraction `s` in `(0, 1]`.
pub fn comparison_scan(
    f: &ReactionTerm,
    eta: f64,
    a: f64,
    c_samples: &[f64],
    u_samples: &[f64],
    fractions: &[f64],
) -> Result<ComparisonReport> {
    if !(eta > 0.0 && eta < 0.5 * f.alpha.min(1.0 - f.alpha)) {
        return Err(Error::param("eta", format!("must lie in (0, min(alpha, 1 - alpha)/2), got {eta}")));
    }
    if !(a > 0.0) {
        return Err(Error::param("A", format!("must be positive, got {a}")));
    }
    if fractions.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
        return Err(Error::param("fractions", "must lie in (0, 1]"));
    }
    let mut item1 = Vec::with_capacity(c_samples.len());
    for &c in c_samples {
        let params = ClosedFormParams::new(a / c.sqrt(), c)?;
        let mut margin = f64::INFINITY;
        for &u in u_samples {
            let lhs = closed_forms::g_nonlinearity((u + eta).min(1.0), &params)?;
            margin = margin.min(lhs - f.evaluate(u));
        }
        item1.push(ComparisonPoint {
            c,
            holds: margin >= 0.0,
            margin,
        });
    }
    let mut sorted = item1.clone();
    sorted.sort_by(|x, y| x.c.total_cmp(&y.c));
    let threshold = match sorted.iter().rposition(|p| !p.holds) {
        None => sorted.first().map(|p| p.c),
        Some(k) if k + 1 < sorted.len() => Some(sorted[k + 1].c),
        Some(_) => None,
    };

    let bmax = closed_forms::beta_max();
    let (mut samples, mut passed, mut worst) = (0, 0, 0.0f64);
    for &c in c_samples {
        for &s in fractions {
            let delta = c.sqrt() * bmax / (eta * s);
            let params = ClosedFormParams::new(delta, c)?;
            for &u in u_samples {
                let g = closed_forms::g_nonlinearity(u, &params)?;
                samples += 1;
                if g <= eta {
                    passed += 1;
                }
                worst = worst.max(g / eta);
            }
        }
    }
    Ok(ComparisonReport {
        eta,
        a,
        item1,
        threshold,
        item2_samples: samples,
        item2_passed: passed,
        item2_worst_ratio: worst,
    })
}
