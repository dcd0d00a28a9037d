use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("invalid parameter `{name}`: {detail}")]
    Parameter { name: &'static str, detail: String },

    #[error("degenerate boundary normalization: phi(R,0) - phi(-R,H) = {gap:e}")]
    DegenerateNormalization { gap: f64 },

    #[error("cell Peclet bound violated: c * hx = {product} > 1")]
    Peclet { product: f64 },

    #[error("nonlinear solve did not converge after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    #[error("no sign change of v_c(0,0) - alpha found on the speed scan")]
    NoBracket,

    #[error("speed bisection stalled: |h| = {residual:e} with bracket width {width:e}")]
    SpeedNotResolved { residual: f64, width: f64 },

    #[error("tail fit window has {found} nodes, need at least {needed}")]
    WindowTooSmall { found: usize, needed: usize },

    #[error("wave not normalized: f(v(x,0)) = {value:e} at x = {x} > 0")]
    Normalization { x: f64, value: f64 },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("degenerate quantity: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
