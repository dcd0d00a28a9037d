//! `hpwave`: runs one experiment from a config file and writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 solver non-convergence.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::closed_forms::{self, ClosedFormParams, Point};
use crate::diagnostics::{self, tolerances};
use crate::error::Error;
use crate::grid::{Field, GridSpec, HeightPolicy};
use crate::grid_solver::{
    center_value, discrete_residual, DirichletSource, SolveReport, SolverOptions, Start,
    TruncatedProblem,
};
use crate::reaction::{self, Family, Nonlinearity, RegularizedReaction, StationaryFlux};
use crate::special;
use crate::wave_finder::{self, GridPolicy, SpeedOptions, WaveSetup};

/// Stamped into every artifact.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "hpwave", version, about = "Traveling waves for a boundary reaction-diffusion equation")]
pub struct Args {
    /// Experiment config (TOML, or JSON when the file ends in .json or starts with `{`).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long)]
    pub serial: bool,
    /// Size of the worker pool.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Validate,
    Solve,
    Wave,
    Continue,
    Tail,
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionFamily {
    Bump,
    Tent,
    /// `g_{delta,c}` with the parameters of the `closed_form` block.
    Regularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReactionConfig {
    pub family: ReactionFamily,
    pub alpha: f64,
    pub mass: f64,
}

impl Default for ReactionConfig {
    fn default() -> Self {
        ReactionConfig {
            family: ReactionFamily::Bump,
            alpha: 0.25,
            mass: PI / 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "R")]
    pub half_width: f64,
    pub height: HeightPolicy,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: 16.0,
            height: HeightPolicy::QuarterPower,
            nx: 2048,
            ny: 128,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> crate::Result<GridSpec> {
        GridSpec::new(
            self.half_width,
            self.height.height(self.half_width),
            self.nx,
            self.ny,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedFormConfig {
    pub delta: f64,
    pub c: f64,
}

impl Default for ClosedFormConfig {
    fn default() -> Self {
        ClosedFormConfig { delta: 1.0, c: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartChoice {
    Sub,
    Super,
    /// Both starts; the minimal solution is written, the gap reported.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub c: f64,
    pub start: StartChoice,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            c: 0.9,
            start: StartChoice::Super,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub schedule: Vec<f64>,
    pub hx: f64,
    pub hy: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            schedule: vec![8.0, 16.0, 32.0],
            hx: 1.0 / 64.0,
            hy: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailConfig {
    /// Field CSV written by `solve` or `wave`.
    pub field: Option<PathBuf>,
    pub c: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { field: None, c: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub eta: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// Speeds are `2^k` for `k` in `[c_min_exp, c_max_exp]`, `c_count` points.
    pub c_min_exp: f64,
    pub c_max_exp: f64,
    pub c_count: usize,
    pub u_count: usize,
    pub fraction_count: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            eta: 0.05,
            a: 1.0,
            c_min_exp: -4.0,
            c_max_exp: 12.0,
            c_count: 20,
            u_count: 50,
            fraction_count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// `nx` of the manufactured-wave refinements on `[-2, 2] x [0, 1]`.
    pub manufactured_nx: Vec<usize>,
    /// Spacings of the stationary-solution residual study.
    pub stationary_h: Vec<f64>,
    pub min_order: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            manufactured_nx: vec![32, 64, 128],
            stationary_h: vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
            min_order: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Forces a single worker so that artifacts are byte-identical across runs.
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default)]
    pub reaction: ReactionConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub boundary: DirichletSource,
    #[serde(default)]
    pub speed: SpeedOptions,
    #[serde(default)]
    pub closed_form: ClosedFormConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default, rename = "continue")]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self, CliError> {
        if json || text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, json)
    }

    fn reaction(&self) -> crate::Result<Box<dyn Nonlinearity>> {
        let r = &self.reaction;
        Ok(match r.family {
            ReactionFamily::Bump => Box::new(reaction::make_reaction(Family::Bump, r.alpha, r.mass)?),
            ReactionFamily::Tent => Box::new(reaction::make_reaction(Family::Tent, r.alpha, r.mass)?),
            ReactionFamily::Regularized => Box::new(RegularizedReaction::new(self.closed_form_params()?)?),
        })
    }

    fn closed_form_params(&self) -> crate::Result<ClosedFormParams> {
        ClosedFormParams::new(self.closed_form.delta, self.closed_form.c)
    }

    /// The pinning value: `reaction.alpha`, or `v(0, 0)` of the explicit wave
    /// for the regularized family.
    fn alpha(&self) -> crate::Result<f64> {
        match self.reaction.family {
            ReactionFamily::Regularized => Ok(self.closed_form_params()?.origin_value()),
            _ => Ok(self.reaction.alpha),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(Error),
    Io(String),
    /// Ran to completion but some check is out of tolerance.
    Validation(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } | Error::NoBracket | Error::SpeedNotResolved { .. } => {
                CliError::Solver(e)
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    format_version: u32,
    config: &'a ExperimentConfig,
    result: &'a T,
}

struct Output<'a> {
    dir: PathBuf,
    config: &'a ExperimentConfig,
}

impl Output<'_> {
    fn json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf, CliError> {
        let doc = Artifact {
            format_version: FORMAT_VERSION,
            config: self.config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    /// CSV preceded by `#` lines carrying the format version and the config.
    fn csv(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# format_version={FORMAT_VERSION}")?;
        let config = serde_json::to_string(self.config).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(buf, "# config={config}")?;
        body(&mut buf)?;
        let path = self.dir.join(name);
        write_atomic(&path, &buf)?;
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// Errors (or residuals) on successive refinements and the observed orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub spacing: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    fn new(spacing: Vec<f64>, errors: Vec<f64>) -> Self {
        let orders = spacing
            .windows(2)
            .zip(errors.windows(2))
            .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
            .collect();
        ConvergenceStudy {
            spacing,
            errors,
            orders,
        }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Max-norm error of the truncated solve against `explicit_wave` on
/// `[-2, 2] x [0, 1]` with `ny = nx / 4`, for each `nx`.
pub fn manufactured_study(params: ClosedFormParams, nxs: &[usize]) -> crate::Result<ConvergenceStudy> {
    let f = RegularizedReaction::new(params)?;
    let source = DirichletSource::ExplicitWave {
        delta: params.delta,
        speed: params.speed,
    };
    let mut spacing = Vec::new();
    let mut errors = Vec::new();
    for &nx in nxs {
        let grid = GridSpec::new(2.0, 1.0, nx, (nx / 4).max(8))?;
        let p = TruncatedProblem::with_source(params.speed, grid, &f, &source)?;
        let (v, _) = p.solve(&Start::Sub, &SolverOptions::default())?;
        let exact = Field::from_fn(grid, |pt| closed_forms::explicit_wave(pt, &params));
        spacing.push(grid.hx());
        errors.push(v.max_abs_diff(&exact));
    }
    Ok(ConvergenceStudy::new(spacing, errors))
}

/// Discrete residual of the shifted root `u^delta` for `Delta u = 0`,
/// `u_y = beta_delta(u)` on `[-1, 1] x [0, 1]` with spacing `h`.
pub fn stationary_study(delta: f64, hs: &[f64]) -> crate::Result<ConvergenceStudy> {
    let flux = StationaryFlux { delta };
    let mut errors = Vec::new();
    for &h in hs {
        let grid = GridSpec::with_spacing(1.0, 1.0, h, h)?;
        let v = Field::from_fn(grid, |p| closed_forms::shifted_root(p, delta));
        errors.push(discrete_residual(&v, 0.0, &flux));
    }
    Ok(ConvergenceStudy::new(hs.to_vec(), errors))
}

/// Invariants of the closed-form layer, each with its tolerance.
pub fn closed_form_checks() -> crate::Result<Vec<Check>> {
    let mut checks = Vec::new();
    let trace_err = (0..10_000)
        .map(|k| -10.0 + 20.0 * k as f64 / 9_999.0)
        .map(|x| (closed_forms::harmonic_root(Point::new(x, 0.0)) - x.max(0.0).sqrt()).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("harmonic_root_trace", trace_err, 0.0));

    let harmonic = [(-1.3, 0.4), (0.2, 0.7), (2.5, 1.1), (-4.0, 3.0)]
        .iter()
        .map(|&(x, y)| {
            let h = 1e-3;
            let u = |a: f64, b: f64| closed_forms::harmonic_root(Point::new(a, b));
            ((u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4.0 * u(x, y)) / (h * h)).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::new("harmonic_root_laplacian", harmonic, 1e-4));

    let mut inverse = 0.0f64;
    for c in [0.3, 1.0, 4.0] {
        for k in 1..100 {
            let v = k as f64 / 100.0;
            let u = closed_forms::wave_profile_inverse(v, c)?;
            inverse = inverse.max((closed_forms::wave_profile_c(u, c) - v).abs());
        }
    }
    checks.push(Check::new("wave_profile_inverse_round_trip", inverse, 1e-13));

    let params = ClosedFormParams::new(1.0, 1.0)?;
    let origin = closed_forms::explicit_wave(Point::new(0.0, 0.0), &params);
    checks.push(Check::new(
        "explicit_wave_origin",
        (origin - special::erf(std::f64::consts::FRAC_1_SQRT_2)).abs(),
        1e-15,
    ));
    checks.push(Check::new(
        "beta_max",
        (closed_forms::beta_max() - 0.75 * 12f64.powf(-0.25)).abs(),
        1e-15,
    ));
    let small = ClosedFormParams::new(1e-3, PI / 4.0)?;
    checks.push(Check::new(
        "g_mass_free_boundary_limit",
        (closed_forms::g_mass(&small)? - PI / 8.0).abs() / (PI / 8.0),
        1e-2,
    ));
    let k0 = special::bessel_k0(20.0)?;
    checks.push(Check::new(
        "k0_leading_asymptotic_s20",
        (special::bessel_k0_asymptotic(20.0, 0) - k0).abs() / k0,
        0.05,
    ));
    checks.push(Check::new(
        "k0_two_corrections_s20",
        (special::bessel_k0_asymptotic(20.0, 2) - k0).abs() / k0,
        0.005,
    ));
    Ok(checks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub manufactured: ConvergenceStudy,
    pub stationary: ConvergenceStudy,
    pub min_order: f64,
    pub pass: bool,
}

pub fn validate(cfg: &ExperimentConfig) -> crate::Result<ValidationReport> {
    let checks = closed_form_checks()?;
    let manufactured = manufactured_study(cfg.closed_form_params()?, &cfg.validate.manufactured_nx)?;
    let stationary = stationary_study(cfg.closed_form.delta, &cfg.validate.stationary_h)?;
    let min_order = cfg.validate.min_order;
    let pass = checks.iter().all(|c| c.pass)
        && manufactured.min_order() >= min_order
        && stationary.min_order() >= min_order;
    Ok(ValidationReport {
        checks,
        manufactured,
        stationary,
        min_order,
        pass,
    })
}

#[derive(Serialize)]
struct SolveOutput {
    c: f64,
    center_value: f64,
    report: SolveReport,
}

#[derive(Serialize)]
struct WaveOutput<'a> {
    half_width: f64,
    c_r: f64,
    center_value: f64,
    report: &'a SolveReport,
    bracket: &'a wave_finder::SpeedBracket,
    brackets: &'a [wave_finder::SpeedBracket],
    samples: &'a [wave_finder::SpeedSample],
    refinement: wave_finder::Refinement,
    diagnostics: &'a diagnostics::DiagnosticsBundle,
}

#[derive(Serialize)]
struct TailOutput {
    c: f64,
    fit: Option<diagnostics::TailFit>,
    fit_error: Option<String>,
    mu0_formula: Option<f64>,
    envelope_violation: Option<f64>,
    helmholtz_probes: Vec<diagnostics::HelmholtzProbe>,
}

fn write_trace(v: &Field, buf: &mut Vec<u8>) -> std::io::Result<()> {
    writeln!(buf, "x,v")?;
    for i in 0..=v.grid.nx {
        writeln!(buf, "{:.16e},{:.16e}", v.grid.x(i), v.at(i, 0))?;
    }
    Ok(())
}

fn log_spaced(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / (n.max(2) - 1) as f64))
        .collect()
}

/// Runs the configured command; returns the artifacts written.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let out = Output {
        dir: out_dir.to_path_buf(),
        config: cfg,
    };
    let mut written = Vec::new();
    match cfg.command {
        Command::Validate => {
            let report = validate(cfg)?;
            written.push(out.json("validate.json", &report)?);
            if !report.pass {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                return Err(CliError::Validation(format!(
                    "failed checks {failed:?}, manufactured order {:.3}, stationary order {:.3}",
                    report.manufactured.min_order(),
                    report.stationary.min_order()
                )));
            }
        }
        Command::Solve => {
            let f = cfg.reaction()?;
            let grid = cfg.grid.grid()?;
            let p = TruncatedProblem::with_source(cfg.solve.c, grid, f.as_ref(), &cfg.boundary)?;
            let opts = cfg.speed.solver;
            let (v, report) = match cfg.solve.start {
                StartChoice::Sub => p.solve(&Start::Sub, &opts)?,
                StartChoice::Super => p.solve(&Start::Super, &opts)?,
                StartChoice::Both => p.solve_both(&opts)?,
            };
            written.push(out.csv("field.csv", |b| v.write_csv(b))?);
            written.push(out.json(
                "solve.json",
                &SolveOutput {
                    c: cfg.solve.c,
                    center_value: center_value(&v),
                    report,
                },
            )?);
        }
        Command::Wave => {
            let f = cfg.reaction()?;
            let setup = WaveSetup::new(cfg.grid.grid()?, f.as_ref(), cfg.alpha()?)?.with_source(cfg.boundary);
            let w = wave_finder::find_speed(&setup, &cfg.speed)?;
            written.push(out.csv("wave_field.csv", |b| w.field.write_csv(b))?);
            written.push(out.csv("wave_trace.csv", |b| write_trace(&w.field, b))?);
            written.push(out.json(
                "wave.json",
                &WaveOutput {
                    half_width: w.half_width,
                    c_r: w.speed,
                    center_value: w.center_value(),
                    report: &w.report,
                    bracket: &w.bracket,
                    brackets: &w.brackets,
                    samples: &w.samples,
                    refinement: w.refinement,
                    diagnostics: &w.diagnostics,
                },
            )?);
        }
        Command::Continue => {
            let f = cfg.reaction()?;
            let policy = GridPolicy {
                height: cfg.grid.height,
                hx: cfg.continuation.hx,
                hy: cfg.continuation.hy,
            };
            let report = wave_finder::continuation(
                &cfg.continuation.schedule,
                f.as_ref(),
                cfg.alpha()?,
                &policy,
                cfg.boundary,
                &cfg.speed,
                rayon::current_num_threads() > 1,
            )?;
            written.push(out.csv("speed_table.csv", |b| wave_finder::write_speed_table(&report.entries, b))?);
            written.push(out.json("continuation.json", &report)?);
        }
        Command::Tail => {
            let path = cfg
                .tail
                .field
                .as_ref()
                .ok_or_else(|| CliError::Config("tail.field is required for `tail`".into()))?;
            let file = fs::File::open(path).map_err(|e| CliError::Config(format!("tail.field {}: {e}", path.display())))?;
            let v = Field::read_csv(std::io::BufReader::new(file))?;
            let f = cfg.reaction()?;
            let c = cfg.tail.c;
            let fit = diagnostics::tail_fit(&v, c);
            let mu0_formula = diagnostics::mu0_from_formula(&v, c, f.as_ref()).ok();
            let probes = tolerances::HELMHOLTZ_PROBES
                .iter()
                .filter(|&&x| x < v.grid.half_width)
                .map(|&x| diagnostics::helmholtz_probe(&v, c, f.as_ref(), x))
                .collect::<crate::Result<Vec<_>>>()?;
            let result = TailOutput {
                c,
                fit: fit.as_ref().ok().map(|t| diagnostics::TailFit { mu0_formula, ..*t }),
                fit_error: fit.as_ref().err().map(|e| e.to_string()),
                mu0_formula,
                envelope_violation: diagnostics::decay_envelope_violation(&v, c),
                helmholtz_probes: probes,
            };
            written.push(out.csv("tail.csv", |b| {
                writeln!(b, "x,one_minus_v,envelope")?;
                for i in v.grid.center_index()..=v.grid.nx {
                    let x = v.grid.x(i);
                    writeln!(b, "{:.16e},{:.16e},{:.16e}", x, 1.0 - v.at(i, 0), special::erfc((c * x).sqrt()))?;
                }
                Ok(())
            })?);
            written.push(out.json("tail.json", &result)?);
        }
        Command::Scan => {
            let r = &cfg.reaction;
            let f = match r.family {
                ReactionFamily::Bump => reaction::make_bump(r.alpha, r.mass)?,
                ReactionFamily::Tent => reaction::make_tent(r.alpha, r.mass)?,
                ReactionFamily::Regularized => {
                    return Err(CliError::Config("scan needs an ignition family (bump or tent)".into()))
                }
            };
            let s = &cfg.scan;
            let cs = log_spaced(s.c_min_exp, s.c_max_exp, s.c_count);
            let us: Vec<f64> = (0..s.u_count).map(|k| k as f64 / (s.u_count.max(2) - 1) as f64).collect();
            let fr: Vec<f64> = (1..=s.fraction_count).map(|k| k as f64 / s.fraction_count as f64).collect();
            let report = diagnostics::comparison_scan(&f, s.eta, s.a, &cs, &us, &fr)?;
            written.push(out.json("scan.json", &report)?);
            if report.item2_passed < report.item2_samples {
                return Err(CliError::Validation(format!(
                    "g <= eta failed at {} of {} samples",
                    report.item2_samples - report.item2_passed,
                    report.item2_samples
                )));
            }
        }
    }
    Ok(written)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args(args: Args) -> i32 {
    let cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("hpwave: {e}");
            return e.exit_code();
        }
    };
    let threads = if args.serial || cfg.deterministic {
        1
    } else {
        args.workers.unwrap_or(0)
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::debug!("worker pool already initialized: {e}");
    }
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match run(&cfg, &dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("hpwave: {e}");
            e.exit_code()
        }
    }
}
