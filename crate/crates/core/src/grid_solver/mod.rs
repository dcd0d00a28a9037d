//! Finite-difference solver for the truncated wave problem at a fixed speed.
//!
//! Interior: 5-point Laplacian plus centered drift. Bottom: ghost node
//! `v_{i,-1} = v_{i,1} - 2 hy f(v_{i,0})`. Lateral and top sides: Dirichlet.
//!
//! The nonlinearity lives only on the bottom row, so the problem is reduced to
//! the bottom trace `t`. With `L` the Lipschitz constant and `G` the trace of
//! the linear Robin solve (penalty `L`), the plain monotone iteration reads
//! `t <- t_b + (2/hy) G (f(t) - L t)`. Its rate degrades as `L` grows, so once
//! the monotone steps are small the same fixed-point equation is finished with
//! damped Newton-GMRES (falling back to monotone steps when a Newton step fails).

mod modal;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closed_forms::{self, ClosedFormParams};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::linalg::gmres;
use crate::reaction::Nonlinearity;
use modal::ModalSolver;

/// Where the Dirichlet data on the lateral and top sides comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DirichletSource {
    /// Clamped, normalized free-boundary wave at the solve speed.
    #[default]
    Truncated,
    /// The explicit regularized wave with fixed parameters.
    ExplicitWave { delta: f64, speed: f64 },
    Constant { value: f64 },
}

/// Dirichlet values: `left`/`right` indexed by `j`, `top` by `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValues {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub top: Vec<f64>,
}

impl BoundaryValues {
    fn sample(grid: &GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        BoundaryValues {
            left: (0..=grid.ny).map(|j| f(0, j)).collect(),
            right: (0..=grid.ny).map(|j| f(grid.nx, j)).collect(),
            top: (0..=grid.nx).map(|i| f(i, grid.ny)).collect(),
        }
    }
}

/// Samples `Psi_{c,R} = clamp((phi_c - phi_c(-R,H)) / (phi_c(R,0) - phi_c(-R,H)), 0, 1)`
/// on the Dirichlet sides.
pub fn dirichlet_data(c: f64, grid: &GridSpec) -> Result<BoundaryValues> {
    if !(c > 0.0) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    let (r, h) = (grid.half_width, grid.height);
    let lo = closed_forms::free_boundary_wave(closed_forms::Point::new(-r, h), c);
    let hi = closed_forms::free_boundary_wave(closed_forms::Point::new(r, 0.0), c);
    let gap = hi - lo;
    if !(gap > 1e-12) {
        return Err(Error::DegenerateNormalization { gap });
    }
    Ok(BoundaryValues::sample(grid, |i, j| {
        if i == 0 {
            0.0
        } else if i == grid.nx {
            1.0
        } else {
            let phi = closed_forms::free_boundary_wave(grid.point(i, j), c);
            ((phi - lo) / gap).clamp(0.0, 1.0)
        }
    }))
}

impl DirichletSource {
    pub fn boundary_values(&self, c: f64, grid: &GridSpec) -> Result<BoundaryValues> {
        match *self {
            DirichletSource::Truncated => dirichlet_data(c, grid),
            DirichletSource::ExplicitWave { delta, speed } => {
                let params = ClosedFormParams::new(delta, speed)?;
                Ok(BoundaryValues::sample(grid, |i, j| {
                    closed_forms::explicit_wave(grid.point(i, j), &params)
                }))
            }
            DirichletSource::Constant { value } => Ok(BoundaryValues::sample(grid, |_, _| value)),
        }
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Max-norm residual of the scheme: interior stencil and the bottom flux
/// residual `(v_{i,1} - v_{i,0})/hy + (hy/2)(v_xx + c v_x) - f(v_{i,0})`.
pub fn discrete_residual(v: &Field, c: f64, f: &dyn Nonlinearity) -> f64 {
    let g = v.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let (ix2, iy2) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let drift = 0.5 * c / hx;
    let mut worst: f64 = 0.0;
    for j in 0..g.ny {
        for i in 1..g.nx {
            let (w, e, here) = (v.at(i - 1, j), v.at(i + 1, j), v.at(i, j));
            let horizontal = (w - 2.0 * here + e) * ix2 + drift * (e - w);
            let r = if j == 0 {
                (v.at(i, 1) - here) / hy + 0.5 * hy * horizontal - f.value(here)
            } else {
                horizontal + (v.at(i, j - 1) - 2.0 * here + v.at(i, j + 1)) * iy2
            };
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// `v(0, 0)`.
pub fn center_value(v: &Field) -> f64 {
    v.at(v.grid.center_index(), 0)
}

/// Initial guess for the bottom trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// `v = 0`, a subsolution.
    Sub,
    /// `v = 1`, a supersolution.
    Super,
    /// Interior bottom trace (`i = 1..nx-1`) of a previous solve.
    Warm(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop once successive bottom traces differ by less than this.
    pub tol_outer: f64,
    pub max_outer: usize,
    /// Monotone steps taken before the first Newton attempt.
    pub monotone_steps: usize,
    /// Newton is only tried once a monotone step is smaller than this.
    pub newton_switch: f64,
    /// Disable to run the plain monotone iteration to convergence.
    pub newton: bool,
    /// Relative tolerance and iteration cap of the GMRES solves in Newton steps.
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// A converged solve must also reach this discrete residual.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_outer: 1e-10,
            max_outer: 200_000,
            monotone_steps: 10,
            newton_switch: 1e-3,
            newton: true,
            linear_tol: 1e-12,
            linear_max_iter: 400,
            residual_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub outer_iterations: usize,
    pub monotone_iterations: usize,
    pub newton_iterations: usize,
    pub final_residual: f64,
    /// Max-norm gap between the runs from the sub- and supersolution, if both ran.
    pub sub_super_gap: Option<f64>,
    /// Largest step of the iterates against their expected direction.
    pub monotonicity_defect: f64,
    pub converged: bool,
}

/// The discretized problem at a fixed speed: operator factorization and
/// Dirichlet contributions, reusable across starts.
pub struct TruncatedProblem<'a> {
    grid: GridSpec,
    c: f64,
    f: &'a dyn Nonlinearity,
    kappa: f64,
    boundary: BoundaryValues,
    solver: ModalSolver,
    /// Transformed Dirichlet right-hand side.
    dirichlet_modes: DMatrix<f64>,
    /// Bottom trace of the solution with zero flux source.
    base_trace: Vec<f64>,
}

impl<'a> TruncatedProblem<'a> {
    pub fn new(
        c: f64,
        grid: GridSpec,
        f: &'a dyn Nonlinearity,
        boundary: BoundaryValues,
    ) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("must be nonnegative, got {c}")));
        }
        grid.check_peclet(c)?;
        if boundary.left.len() != grid.ny + 1
            || boundary.right.len() != grid.ny + 1
            || boundary.top.len() != grid.nx + 1
        {
            return Err(Error::param("boundary", "sizes do not match the grid"));
        }
        let kappa = f.lipschitz();
        let solver = ModalSolver::new(&grid, c, kappa);
        let (m, n) = (solver.rows(), solver.cols());
        let iy2 = 1.0 / (grid.hy() * grid.hy());
        let mut rhs = DMatrix::<f64>::zeros(m, n);
        for j in 0..m {
            rhs[(j, 0)] -= solver.west * boundary.left[j];
            rhs[(j, n - 1)] -= solver.east * boundary.right[j];
        }
        for i in 0..n {
            rhs[(m - 1, i)] -= iy2 * boundary.top[i + 1];
        }
        let dirichlet_modes = solver.to_modes(&rhs);
        let base_trace = solver.bottom_of_modes(dirichlet_modes.clone());
        Ok(TruncatedProblem {
            grid,
            c,
            f,
            kappa,
            boundary,
            solver,
            dirichlet_modes,
            base_trace,
        })
    }

    /// Builds the Dirichlet data from `source` at speed `c` and sets up the problem.
    pub fn with_source(
        c: f64,
        grid: GridSpec,
        f: &'a dyn Nonlinearity,
        source: &DirichletSource,
    ) -> Result<Self> {
        let boundary = source.boundary_values(c, &grid)?;
        Self::new(c, grid, f, boundary)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn speed(&self) -> f64 {
        self.c
    }

    fn source(&self, t: &[f64]) -> Vec<f64> {
        let scale = 2.0 / self.grid.hy();
        t.iter()
            .map(|&u| scale * (self.f.value(u) - self.kappa * u))
            .collect()
    }

    /// One step of the monotone iteration `t <- t_b + G s(t)`, clamped to `[0, 1]`.
    fn monotone_step(&self, t: &[f64]) -> Vec<f64> {
        let mut out = self.linear_trace(t);
        for v in out.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    fn linear_trace(&self, t: &[f64]) -> Vec<f64> {
        let s = self.source(t);
        let mut out = vec![0.0; t.len()];
        self.solver.trace_apply(&s, &mut out);
        for (o, b) in out.iter_mut().zip(&self.base_trace) {
            *o += b;
        }
        out
    }

    /// `F(t) = t - t_b - G s(t)`; zero exactly at solutions.
    pub(crate) fn trace_residual(&self, t: &[f64]) -> Vec<f64> {
        let mut out = self.linear_trace(t);
        for (o, ti) in out.iter_mut().zip(t) {
            *o = ti - *o;
        }
        out
    }

    /// Applies the Jacobian of `trace_residual` at `t` to `x`.
    pub(crate) fn jacobian_apply(&self, weights: &[f64], x: &[f64], out: &mut [f64]) {
        let scaled: Vec<f64> = weights.iter().zip(x).map(|(w, xi)| w * xi).collect();
        self.solver.trace_apply(&scaled, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - *o;
        }
    }

    /// Diagonal of `(2/hy)(f'(t) - L)`, used by `jacobian_apply`.
    pub(crate) fn jacobian_weights(&self, t: &[f64]) -> Vec<f64> {
        let scale = 2.0 / self.grid.hy();
        t.iter()
            .map(|&u| scale * (self.f.derivative(u) - self.kappa))
            .collect()
    }

    /// Center node position within the trace vector.
    pub(crate) fn center_slot(&self) -> usize {
        self.grid.center_index() - 1
    }

    /// Damped Newton update clamped to `[0, 1]`; `None` if GMRES stalls or the
    /// line search finds no decrease of `|F|`. Returns the new trace and its `|F|`.
    fn newton_update(&self, t: &[f64], opts: &SolverOptions) -> Option<(Vec<f64>, f64)> {
        let r = self.trace_residual(t);
        let r0 = l2(&r);
        let weights = self.jacobian_weights(t);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut dx = vec![0.0; t.len()];
        let out = gmres(
            |x, o| self.jacobian_apply(&weights, x, o),
            &rhs,
            &mut dx,
            opts.linear_tol,
            100,
            opts.linear_max_iter,
        );
        log::trace!("newton: gmres {} its, rel {:e}", out.iterations, out.residual);
        if !(out.residual < 1e-3) {
            return None;
        }
        let mut lambda = 1.0;
        for _ in 0..20 {
            let trial: Vec<f64> = t
                .iter()
                .zip(&dx)
                .map(|(a, d)| (a + lambda * d).clamp(0.0, 1.0))
                .collect();
            let rt = l2(&self.trace_residual(&trial));
            if rt <= (1.0 - 1e-4 * lambda) * r0 || rt < 1e-13 {
                return Some((trial, rt));
            }
            lambda *= 0.5;
        }
        None
    }

    fn solve_trace(&self, start: &Start, opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
        self.iterate(start, opts, None).map(|(t, report, _)| (t, report))
    }

    /// Runs the monotone iteration; once its steps are small, tries Newton
    /// steps on the same fixed-point equation. `stop` is checked on every
    /// iterate of the pure monotone phase; the flag reports an early stop.
    pub(crate) fn iterate(
        &self,
        start: &Start,
        opts: &SolverOptions,
        stop: Option<&dyn Fn(&[f64]) -> bool>,
    ) -> Result<(Vec<f64>, SolveReport, bool)> {
        let n = self.solver.cols();
        let (mut t, direction) = match start {
            Start::Sub => (vec![0.0; n], 1.0),
            Start::Super => (vec![1.0; n], -1.0),
            Start::Warm(t) => {
                if t.len() != n {
                    return Err(Error::param("start", "warm trace has the wrong length"));
                }
                (t.iter().map(|v| v.clamp(0.0, 1.0)).collect(), 0.0)
            }
        };
        let mut report = SolveReport::default();
        let mut last_step = f64::INFINITY;
        // Monotone steps to take before the next Newton attempt; doubled after
        // every failed attempt.
        let mut cooldown = opts.monotone_steps;
        let mut backoff = 4 * opts.monotone_steps.max(1);
        // `|F|` after the last accepted Newton step. Newton steps that do not
        // halve it count as failures: Picard steps in between can undo them
        // and the two fall into a cycle.
        let mut newton_residual = f64::INFINITY;
        while report.outer_iterations < opts.max_outer {
            report.outer_iterations += 1;
            let try_newton = opts.newton && cooldown == 0 && last_step < opts.newton_switch;
            let newton = if try_newton {
                let step = self
                    .newton_update(&t, opts)
                    .filter(|(_, r)| *r <= 0.5 * newton_residual);
                log::trace!(
                    "it {}: newton {}",
                    report.outer_iterations,
                    if step.is_some() { "accepted" } else { "rejected" }
                );
                match &step {
                    Some((_, r)) => newton_residual = *r,
                    None => {
                        newton_residual = f64::INFINITY;
                        cooldown = backoff;
                        backoff *= 2;
                    }
                }
                step.map(|(v, _)| v)
            } else {
                None
            };
            let next = match newton {
                Some(v) => {
                    report.newton_iterations += 1;
                    v
                }
                None => {
                    cooldown = cooldown.saturating_sub(1);
                    let v = self.monotone_step(&t);
                    if report.newton_iterations == 0 && direction != 0.0 {
                        for (a, b) in t.iter().zip(&v) {
                            report.monotonicity_defect =
                                report.monotonicity_defect.max(direction * (a - b));
                        }
                    }
                    report.monotone_iterations += 1;
                    v
                }
            };
            last_step = max_diff(&t, &next);
            t = next;
            if last_step < opts.tol_outer {
                report.converged = true;
                return Ok((t, report, false));
            }
            if let Some(stop) = stop {
                if report.newton_iterations == 0 && stop(&t) {
                    return Ok((t, report, true));
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: report.outer_iterations,
            last_step,
        })
    }

    /// Full field whose bottom trace drives the Robin source `s(t)`.
    fn reconstruct(&self, t: &[f64]) -> Field {
        let s = self.source(t);
        let modes = &self.dirichlet_modes + self.solver.bottom_source_modes(&s);
        let interior = self.solver.from_modes(modes);
        let g = self.grid;
        let mut field = Field::constant(g, 0.0);
        for j in 0..=g.ny {
            field.set(0, j, self.boundary.left[j]);
            field.set(g.nx, j, self.boundary.right[j]);
        }
        for i in 1..g.nx {
            field.set(i, g.ny, self.boundary.top[i]);
            for j in 0..g.ny {
                field.set(i, j, interior[(j, i - 1)].clamp(0.0, 1.0));
            }
        }
        field
    }

    pub fn solve(&self, start: &Start, opts: &SolverOptions) -> Result<(Field, SolveReport)> {
        let (t, report) = self.solve_trace(start, opts)?;
        Ok(self.finish(&t, report, opts))
    }

    pub(crate) fn finish(
        &self,
        t: &[f64],
        mut report: SolveReport,
        opts: &SolverOptions,
    ) -> (Field, SolveReport) {
        let field = self.reconstruct(t);
        report.final_residual = discrete_residual(&field, self.c, self.f);
        report.converged = report.converged && report.final_residual <= opts.residual_tol;
        (field, report)
    }

    /// Runs from both the sub- and the supersolution; returns the minimal
    /// solution with the gap to the maximal one recorded.
    pub fn solve_both(&self, opts: &SolverOptions) -> Result<(Field, SolveReport)> {
        let (t_low, low) = self.solve_trace(&Start::Sub, opts)?;
        let (t_high, high) = self.solve_trace(&Start::Super, opts)?;
        let (field, mut report) = self.finish(&t_low, low, opts);
        let (upper, high) = self.finish(&t_high, high, opts);
        report.sub_super_gap = Some(field.max_abs_diff(&upper));
        report.outer_iterations += high.outer_iterations;
        report.monotone_iterations += high.monotone_iterations;
        report.newton_iterations += high.newton_iterations;
        report.monotonicity_defect = report.monotonicity_defect.max(high.monotonicity_defect);
        report.final_residual = report.final_residual.max(high.final_residual);
        report.converged = report.converged && high.converged;
        Ok((field, report))
    }
}

/// One-shot solve at speed `c` with Dirichlet data from `source`.
pub fn solve_truncated(
    c: f64,
    grid: GridSpec,
    f: &dyn Nonlinearity,
    source: &DirichletSource,
    start: &Start,
    opts: &SolverOptions,
) -> Result<(Field, SolveReport)> {
    TruncatedProblem::with_source(c, grid, f, source)?.solve(start, opts)
}

/// Interior part (`i = 1..nx-1`) of the bottom row, for warm starts.
pub fn warm_trace(v: &Field) -> Vec<f64> {
    let t = v.bottom_trace();
    t[1..t.len() - 1].to_vec()
}

#[cfg(test)]
mod tests;
