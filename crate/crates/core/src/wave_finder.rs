//! Speed selection: the speed `c_R` at which the truncated solution satisfies
//! `v(0, 0) = alpha`, and its behavior as `R` grows.
//!
//! At a fixed speed the truncated problem may have several ordered solutions
//! (an unignited minimal one next to the ignited maximal one), so `h(c)` is
//! taken on the maximal solution, reached by the monotone iteration from
//! `v = 1`. Those iterates decrease, so a center value below `alpha` certifies
//! `h(c) < 0` before convergence. Near `c_R` the fixed-speed iteration slows
//! down without bound (the front drifts), so the bracket is refined by Newton
//! on the pinned system `F_c(t) = 0`, `t(0) = alpha` with `c` as an unknown,
//! kept inside the certified bracket. Bisection is the fallback.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_forms;
use crate::diagnostics::{self, DiagnosticsBundle};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, HeightPolicy};
use crate::grid_solver::{
    center_value, DirichletSource, SolveReport, SolverOptions, Start, TruncatedProblem,
};
use crate::linalg::gmres;
use crate::reaction::Nonlinearity;

/// Everything that stays fixed while the speed varies.
#[derive(Clone, Copy)]
pub struct WaveSetup<'a> {
    pub grid: GridSpec,
    pub f: &'a dyn Nonlinearity,
    pub alpha: f64,
    pub source: DirichletSource,
}

impl<'a> WaveSetup<'a> {
    pub fn new(grid: GridSpec, f: &'a dyn Nonlinearity, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        Ok(WaveSetup {
            grid,
            f,
            alpha,
            source: DirichletSource::Truncated,
        })
    }

    pub fn with_source(mut self, source: DirichletSource) -> Self {
        self.source = source;
        self
    }

    fn problem(&self, c: f64) -> Result<TruncatedProblem<'a>> {
        TruncatedProblem::with_source(c, self.grid, self.f, &self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedOptions {
    /// The scan visits `c = 2^k` for `k` in `scan_min_exp..=scan_max_exp`.
    pub scan_min_exp: i32,
    pub scan_max_exp: i32,
    /// Evaluate every scan point (in parallel) instead of halting at the
    /// first sign change; all brackets are then reported.
    pub full_scan: bool,
    pub speed_tol: f64,
    pub width_tol: f64,
    pub max_bisections: usize,
    /// Newton iterations on the pinned system before falling back to bisection.
    pub newton_max_iter: usize,
    pub solver: SolverOptions,
}

impl Default for SpeedOptions {
    fn default() -> Self {
        SpeedOptions {
            scan_min_exp: -8,
            scan_max_exp: 6,
            full_scan: false,
            speed_tol: 1e-6,
            width_tol: 1e-8,
            max_bisections: 60,
            newton_max_iter: 40,
            solver: SolverOptions::default(),
        }
    }
}

/// How the sign of `h(c)` was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// The maximal solution was computed to tolerance.
    Converged,
    /// A monotone iterate from above already sat below `alpha`.
    UpperBound,
}

/// `h(c) = v_c(0, 0) - alpha` on the maximal solution. For an `UpperBound`
/// certificate `h` is only an upper bound (and negative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub c: f64,
    pub h: f64,
    pub certificate: Certificate,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedBracket {
    pub c_lo: f64,
    pub c_hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

impl SpeedBracket {
    fn new(lo: &SpeedSample, hi: &SpeedSample) -> Option<Self> {
        (lo.c < hi.c && lo.h < 0.0 && hi.h > 0.0).then_some(SpeedBracket {
            c_lo: lo.c,
            c_hi: hi.c,
            h_lo: lo.h,
            h_hi: hi.h,
        })
    }

    pub fn width(&self) -> f64 {
        self.c_hi - self.c_lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    PinnedNewton,
    Bisection,
}

#[derive(Debug, Clone)]
pub struct WaveResult {
    pub half_width: f64,
    pub speed: f64,
    pub field: Field,
    pub report: SolveReport,
    pub bracket: SpeedBracket,
    /// Every bracket seen by the scan (more than one only with `full_scan`).
    pub brackets: Vec<SpeedBracket>,
    pub samples: Vec<SpeedSample>,
    pub refinement: Refinement,
    pub diagnostics: DiagnosticsBundle,
}

impl WaveResult {
    pub fn center_value(&self) -> f64 {
        center_value(&self.field)
    }
}

/// `v_c(0, 0)` of the maximal solution at speed `c`.
pub fn center_value_of_speed(setup: &WaveSetup, c: f64, opts: &SolverOptions) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    let (v, _) = setup.problem(c)?.solve(&Start::Super, opts)?;
    Ok(center_value(&v))
}

/// Sign of `h(c)`, stopping the iteration from above as soon as it is certain.
pub fn sample_speed(setup: &WaveSetup, c: f64, opts: &SolverOptions) -> Result<SpeedSample> {
    sample_with_trace(setup, c, opts).map(|(s, _)| s)
}

fn sample_with_trace(
    setup: &WaveSetup,
    c: f64,
    opts: &SolverOptions,
) -> Result<(SpeedSample, Vec<f64>)> {
    let p = setup.problem(c)?;
    let k = p.center_slot();
    let alpha = setup.alpha;
    let below = |t: &[f64]| t[k] < alpha;
    let (t, report, stopped) = p.iterate(&Start::Super, opts, Some(&below))?;
    let sample = SpeedSample {
        c,
        h: t[k].clamp(0.0, 1.0) - alpha,
        certificate: if stopped {
            Certificate::UpperBound
        } else {
            Certificate::Converged
        },
        iterations: report.outer_iterations,
    };
    log::debug!("h({c}) = {:.3e} ({:?}, {} its)", sample.h, sample.certificate, sample.iterations);
    Ok((sample, t))
}

/// Geometric scan over `c = 2^k`. Returns the samples and every bracket found.
pub fn scan_speeds(setup: &WaveSetup, opts: &SpeedOptions) -> Result<(Vec<SpeedSample>, Vec<SpeedBracket>)> {
    if opts.scan_min_exp >= opts.scan_max_exp {
        return Err(Error::param("scan", "scan_min_exp must be below scan_max_exp"));
    }
    // Speeds beyond the cell-Peclet limit of the grid are skipped.
    let speeds: Vec<f64> = (opts.scan_min_exp..=opts.scan_max_exp)
        .map(|k| 2f64.powi(k))
        .filter(|&c| setup.grid.check_peclet(c).is_ok())
        .collect();
    let samples = if opts.full_scan {
        speeds
            .par_iter()
            .map(|&c| sample_speed(setup, c, &opts.solver))
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut samples: Vec<SpeedSample> = Vec::new();
        for &c in &speeds {
            let s = sample_speed(setup, c, &opts.solver)?;
            let done = samples.last().is_some_and(|prev| SpeedBracket::new(prev, &s).is_some());
            samples.push(s);
            if done {
                break;
            }
        }
        samples
    };
    let brackets: Vec<SpeedBracket> = samples
        .windows(2)
        .filter_map(|w| SpeedBracket::new(&w[0], &w[1]))
        .collect();
    if brackets.len() > 1 {
        log::warn!(
            "{} sign changes on the speed scan; using the smallest bracket [{}, {}]",
            brackets.len(),
            brackets[0].c_lo,
            brackets[0].c_hi
        );
    }
    Ok((samples, brackets))
}

/// Trace of the free-boundary profile shifted so that it equals `alpha` at `x = 0`.
fn initial_trace(setup: &WaveSetup, c: f64) -> Result<Vec<f64>> {
    let g = &setup.grid;
    let u0 = closed_forms::wave_profile_inverse(setup.alpha, c)?;
    let shift = u0 * u0;
    Ok((1..g.nx)
        .map(|i| closed_forms::wave_profile_c((g.x(i) + shift).max(0.0).sqrt(), c))
        .collect())
}

struct Pinned {
    speed: f64,
    trace: Vec<f64>,
    iterations: usize,
}

fn pinned_residual(p: &TruncatedProblem, t: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let mut r = p.trace_residual(t);
    r.push(t[p.center_slot()] - alpha);
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    (r, norm)
}

/// Newton-GMRES on `(t, c)` for `F_c(t) = 0`, `t(0) = alpha`, with `c` kept in
/// the bracket. `dF/dc` is a central difference.
fn pinned_newton(setup: &WaveSetup, bracket: &SpeedBracket, opts: &SpeedOptions) -> Result<Pinned> {
    let alpha = setup.alpha;
    let mut c = (bracket.c_lo * bracket.c_hi).sqrt();
    let mut t = initial_trace(setup, c)?;
    let n = t.len();
    let mut p = setup.problem(c)?;
    let k0 = p.center_slot();
    let (mut r, mut norm) = pinned_residual(&p, &t, alpha);
    let tol = opts.solver.tol_outer;
    for it in 0..opts.newton_max_iter {
        let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        log::debug!("pinned newton {it}: c = {c:.12}, |F| = {worst:.3e}");
        if worst <= tol {
            return Ok(Pinned {
                speed: c,
                trace: t,
                iterations: it,
            });
        }
        let eps = 1e-6 * c;
        let fp = setup.problem(c + eps)?.trace_residual(&t);
        let fm = setup.problem(c - eps)?.trace_residual(&t);
        let dfdc: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let weights = p.jacobian_weights(&t);
        let apply = |x: &[f64], out: &mut [f64]| {
            p.jacobian_apply(&weights, &x[..n], &mut out[..n]);
            let xc = x[n];
            for (o, d) in out[..n].iter_mut().zip(&dfdc) {
                *o += d * xc;
            }
            out[n] = x[k0];
        };
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let mut dx = vec![0.0; n + 1];
        let lin = gmres(apply, &rhs, &mut dx, 1e-10, 100, opts.solver.linear_max_iter);
        if !(lin.residual < 1e-3) {
            return Err(Error::SpeedNotResolved {
                residual: worst,
                width: bracket.width(),
            });
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let c_trial = (c + lambda * dx[n]).clamp(bracket.c_lo, bracket.c_hi);
            let t_trial: Vec<f64> = t
                .iter()
                .zip(&dx)
                .map(|(a, d)| (a + lambda * d).clamp(0.0, 1.0))
                .collect();
            let p_trial = setup.problem(c_trial)?;
            let (r_trial, n_trial) = pinned_residual(&p_trial, &t_trial, alpha);
            if n_trial <= (1.0 - 1e-4 * lambda) * norm {
                (c, t, p, r, norm) = (c_trial, t_trial, p_trial, r_trial, n_trial);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::SpeedNotResolved {
        residual: r.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        width: bracket.width(),
    })
}

/// Illinois-modified regula falsi on the certified signs. Only samples that
/// were computed to convergence can end the search by `|h| <= speed_tol`.
fn bisect(setup: &WaveSetup, bracket: &SpeedBracket, opts: &SpeedOptions) -> Result<(f64, Vec<f64>)> {
    let (mut a, mut fa) = (bracket.c_lo, bracket.h_lo);
    let (mut b, mut fb) = (bracket.c_hi, bracket.h_hi);
    let mut side = 0i8;
    for _ in 0..opts.max_bisections {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let (s, t) = sample_with_trace(setup, c, &opts.solver)?;
        if s.certificate == Certificate::Converged && s.h.abs() <= opts.speed_tol {
            return Ok((c, t));
        }
        if s.h < 0.0 {
            a = c;
            fa = s.h;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = s.h;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a <= opts.width_tol {
            break;
        }
    }
    Err(Error::SpeedNotResolved {
        residual: fa.abs().min(fb.abs()),
        width: b - a,
    })
}

/// Finds `c_R` with `v_{c_R}(0, 0) = alpha` and the corresponding wave.
pub fn find_speed(setup: &WaveSetup, opts: &SpeedOptions) -> Result<WaveResult> {
    let (samples, brackets) = scan_speeds(setup, opts)?;
    let bracket = *brackets.first().ok_or(Error::NoBracket)?;
    let (speed, trace, newton_iterations, refinement) = match pinned_newton(setup, &bracket, opts) {
        Ok(p) => (p.speed, p.trace, p.iterations, Refinement::PinnedNewton),
        Err(e) => {
            log::warn!("pinned Newton failed ({e}); bisecting");
            let (c, t) = bisect(setup, &bracket, opts)?;
            (c, t, 0, Refinement::Bisection)
        }
    };
    let p = setup.problem(speed)?;
    let report = SolveReport {
        outer_iterations: newton_iterations,
        newton_iterations,
        converged: true,
        ..SolveReport::default()
    };
    let (field, report) = p.finish(&trace, report, &opts.solver);
    let miss = (center_value(&field) - setup.alpha).abs();
    if miss > opts.speed_tol {
        return Err(Error::SpeedNotResolved {
            residual: miss,
            width: bracket.width(),
        });
    }
    let diagnostics = diagnostics::bundle(&field, speed, setup.f);
    Ok(WaveResult {
        half_width: setup.grid.half_width,
        speed,
        field,
        report,
        bracket,
        brackets,
        samples,
        refinement,
        diagnostics,
    })
}

/// Grid used for each radius of a continuation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    #[serde(default)]
    pub height: HeightPolicy,
    pub hx: f64,
    pub hy: f64,
}

impl GridPolicy {
    pub fn grid(&self, half_width: f64) -> Result<GridSpec> {
        GridSpec::with_spacing(half_width, self.height.height(half_width), self.hx, self.hy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationEntry {
    pub half_width: f64,
    pub speed: Option<f64>,
    pub center_value: Option<f64>,
    pub outer_iterations: Option<usize>,
    pub residual: Option<f64>,
    pub diagnostics: Option<DiagnosticsBundle>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub entries: Vec<ContinuationEntry>,
    /// `c_{R_{k+1}} - c_{R_k}` over consecutive successful entries.
    pub differences: Vec<f64>,
    pub limit: Option<f64>,
    pub error_bar: Option<f64>,
}

/// Aitken extrapolation from the last three values when the differences
/// contract geometrically; otherwise the last value with its last difference.
pub fn extrapolate(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    match n {
        0 => None,
        1 => Some((values[0], f64::INFINITY)),
        2 => Some((values[1], (values[1] - values[0]).abs())),
        _ => {
            let (a, b, c) = (values[n - 3], values[n - 2], values[n - 1]);
            let (d1, d2) = (b - a, c - b);
            let q = d2 / d1;
            if d1 != 0.0 && q > 0.0 && q < 1.0 {
                let tail = d2 * q / (1.0 - q);
                Some((c + tail, tail.abs().max(d2.abs() * q)))
            } else {
                Some((c, d2.abs()))
            }
        }
    }
}

/// Runs `find_speed` along an increasing schedule of half-widths. Failures
/// are recorded per entry. `parallel` runs the entries on the rayon pool.
pub fn continuation(
    schedule: &[f64],
    f: &dyn Nonlinearity,
    alpha: f64,
    policy: &GridPolicy,
    source: DirichletSource,
    opts: &SpeedOptions,
    parallel: bool,
) -> Result<ContinuationReport> {
    if schedule.is_empty() || schedule.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("schedule", "must be nonempty and strictly increasing"));
    }
    let run = |&r: &f64| -> ContinuationEntry {
        let result = policy
            .grid(r)
            .and_then(|g| WaveSetup::new(g, f, alpha))
            .and_then(|s| find_speed(&s.with_source(source), opts));
        match result {
            Ok(w) => ContinuationEntry {
                half_width: r,
                speed: Some(w.speed),
                center_value: Some(w.center_value()),
                outer_iterations: Some(w.report.outer_iterations),
                residual: Some(w.report.final_residual),
                diagnostics: Some(w.diagnostics),
                error: None,
            },
            Err(e) => {
                log::warn!("R = {r}: {e}");
                ContinuationEntry {
                    half_width: r,
                    speed: None,
                    center_value: None,
                    outer_iterations: None,
                    residual: None,
                    diagnostics: None,
                    error: Some(e.to_string()),
                }
            }
        }
    };
    let entries: Vec<ContinuationEntry> = if parallel {
        schedule.par_iter().map(run).collect()
    } else {
        schedule.iter().map(run).collect()
    };
    let speeds: Vec<f64> = entries.iter().filter_map(|e| e.speed).collect();
    let differences = speeds.windows(2).map(|w| w[1] - w[0]).collect();
    let (limit, error_bar) = match extrapolate(&speeds) {
        Some((l, e)) => (Some(l), Some(e)),
        None => (None, None),
    };
    Ok(ContinuationReport {
        entries,
        differences,
        limit,
        error_bar,
    })
}

/// Speed table CSV: `R,c_R,center_value,outer_iterations,residual,identity_gap`.
/// Failed entries leave the numeric columns empty.
pub fn write_speed_table<W: Write>(entries: &[ContinuationEntry], mut out: W) -> std::io::Result<()> {
    fn cell(v: Option<f64>) -> String {
        v.map(|x| format!("{x:.16e}")).unwrap_or_default()
    }
    writeln!(out, "R,c_R,center_value,outer_iterations,residual,identity_gap")?;
    for e in entries {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.half_width,
            cell(e.speed),
            cell(e.center_value),
            e.outer_iterations.map(|n| n.to_string()).unwrap_or_default(),
            cell(e.residual),
            cell(e.diagnostics.as_ref().and_then(|d| d.identity_gap)),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
