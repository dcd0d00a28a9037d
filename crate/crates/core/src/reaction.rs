//! Boundary nonlinearities.
//!
//! The solver only needs values, a derivative for Newton steps, a Lipschitz
//! bound for the monotone iteration and the mass `int_0^1 f`. Ignition
//! terms (`ReactionTerm`) vanish outside `(0, alpha)`; the closed-form
//! nonlinearities `g_{delta,c}` and `beta_delta` are wrapped here too so that
//! manufactured solutions run through the same code path.

use serde::{Deserialize, Serialize};

use crate::closed_forms::{self, ClosedFormParams};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

pub trait Nonlinearity: Send + Sync {
    fn value(&self, u: f64) -> f64;

    /// Derivative (one-sided at kinks, right derivative by convention).
    fn derivative(&self, u: f64) -> f64;

    /// A valid Lipschitz constant on `[0, 1]`.
    fn lipschitz(&self) -> f64;

    /// `int_0^1 f(u) du`.
    fn mass(&self) -> f64;
}

/// Parametric ignition families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `lambda u (alpha - u)` on `[0, alpha]`.
    Bump,
    /// Piecewise-linear tent with peak at `alpha / 2`.
    Tent,
}

/// An ignition-type reaction term: positive on `(0, alpha)`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionTerm {
    pub family: Family,
    pub alpha: f64,
    /// Scale parameter: `lambda` for the bump, the peak height for the tent.
    pub amplitude: f64,
    pub lipschitz: f64,
    pub mass: f64,
}

fn check_params(alpha: f64, target_mass: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if !(target_mass > 0.0 && target_mass.is_finite()) {
        return Err(Error::param("mass", format!("must be positive, got {target_mass}")));
    }
    Ok(())
}

/// `f(u) = lambda u (alpha - u)` on `[0, alpha]` with `lambda = 6 M / alpha^3`.
pub fn make_bump(alpha: f64, target_mass: f64) -> Result<ReactionTerm> {
    check_params(alpha, target_mass)?;
    let lambda = 6.0 * target_mass / alpha.powi(3);
    Ok(ReactionTerm {
        family: Family::Bump,
        alpha,
        amplitude: lambda,
        lipschitz: lambda * alpha,
        mass: target_mass,
    })
}

/// Tent of height `2 M / alpha` peaking at `alpha / 2`.
pub fn make_tent(alpha: f64, target_mass: f64) -> Result<ReactionTerm> {
    check_params(alpha, target_mass)?;
    let peak = 2.0 * target_mass / alpha;
    Ok(ReactionTerm {
        family: Family::Tent,
        alpha,
        amplitude: peak,
        lipschitz: 2.0 * peak / alpha,
        mass: target_mass,
    })
}

pub fn make_reaction(family: Family, alpha: f64, target_mass: f64) -> Result<ReactionTerm> {
    match family {
        Family::Bump => make_bump(alpha, target_mass),
        Family::Tent => make_tent(alpha, target_mass),
    }
}

impl ReactionTerm {
    pub fn evaluate(&self, u: f64) -> f64 {
        let a = self.alpha;
        if !(u > 0.0 && u < a) {
            return 0.0;
        }
        match self.family {
            Family::Bump => self.amplitude * u * (a - u),
            Family::Tent => {
                let half = 0.5 * a;
                self.amplitude * (1.0 - (u - half).abs() / half)
            }
        }
    }

    /// `F(u) = int_0^u f`, in closed form.
    pub fn antiderivative(&self, u: f64) -> f64 {
        let a = self.alpha;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= a {
            return self.mass;
        }
        match self.family {
            Family::Bump => self.amplitude * (a * u * u / 2.0 - u * u * u / 3.0),
            Family::Tent => {
                let half = 0.5 * a;
                let slope = self.amplitude / half;
                if u <= half {
                    0.5 * slope * u * u
                } else {
                    let rest = a - u;
                    self.mass - 0.5 * slope * rest * rest
                }
            }
        }
    }
}

impl Nonlinearity for ReactionTerm {
    fn value(&self, u: f64) -> f64 {
        self.evaluate(u)
    }

    fn derivative(&self, u: f64) -> f64 {
        let a = self.alpha;
        if !(u >= 0.0 && u < a) {
            return 0.0;
        }
        match self.family {
            Family::Bump => self.amplitude * (a - 2.0 * u),
            Family::Tent => {
                let slope = 2.0 * self.amplitude / a;
                if u < 0.5 * a {
                    slope
                } else {
                    -slope
                }
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn mass(&self) -> f64 {
        self.mass
    }
}

/// `F(u)` for any reaction term.
pub fn antiderivative(f: &ReactionTerm, u: f64) -> f64 {
    f.antiderivative(u.clamp(0.0, 1.0))
}

/// Adaptive quadrature of `f` over `[0, 1]` (absolute tolerance 1e-12),
/// split at the ignition threshold where `f` has a kink.
pub fn mass(f: &ReactionTerm) -> Result<f64> {
    let g = |u: f64| f.evaluate(u);
    Ok(adaptive_simpson(g, 0.0, f.alpha, 5e-13)? + adaptive_simpson(g, f.alpha, 1.0, 5e-13)?)
}

/// `f = 0`. Not a valid ignition term; used for linear solver checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroReaction;

impl Nonlinearity for ZeroReaction {
    fn value(&self, _u: f64) -> f64 {
        0.0
    }
    fn derivative(&self, _u: f64) -> f64 {
        0.0
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn mass(&self) -> f64 {
        0.0
    }
}

/// The nonlinearity `g_{delta,c}` for which `explicit_wave` is an exact traveling wave.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedReaction {
    pub params: ClosedFormParams,
    lipschitz: f64,
    mass: f64,
}

impl RegularizedReaction {
    pub fn new(params: ClosedFormParams) -> Result<Self> {
        Ok(RegularizedReaction {
            params,
            lipschitz: closed_forms::g_lipschitz(&params),
            mass: closed_forms::g_mass(&params)?,
        })
    }
}

impl Nonlinearity for RegularizedReaction {
    fn value(&self, u: f64) -> f64 {
        closed_forms::g_nonlinearity(u, &self.params).unwrap_or(0.0)
    }
    fn derivative(&self, u: f64) -> f64 {
        closed_forms::g_derivative(u, &self.params).unwrap_or(0.0)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn mass(&self) -> f64 {
        self.mass
    }
}

/// `beta_delta`, the flux of the shifted stationary root. Defined on `[0, inf)`.
#[derive(Debug, Clone, Copy)]
pub struct StationaryFlux {
    pub delta: f64,
}

impl Nonlinearity for StationaryFlux {
    fn value(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            closed_forms::beta_delta(u, self.delta)
        }
    }
    fn derivative(&self, u: f64) -> f64 {
        if u < 0.0 {
            0.0
        } else {
            closed_forms::beta_delta_derivative(u, self.delta)
        }
    }
    fn lipschitz(&self) -> f64 {
        1.0 / (self.delta * self.delta)
    }
    fn mass(&self) -> f64 {
        std::f64::consts::PI / 8.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
    }

    #[test]
    fn bump_examples() {
        let f = make_bump(0.5, PI / 8.0).unwrap();
        assert!((f.amplitude - 6.0 * PI).abs() < 1e-12);
        assert!((f.evaluate(0.25) - f.amplitude * 0.0625).abs() < 1e-15);
        assert_eq!(f.evaluate(0.5), 0.0);
        assert_eq!(f.evaluate(0.0), 0.0);
        assert!((mass(&f).unwrap() - PI / 8.0).abs() < 1e-12);
        let small = make_bump(0.05, PI / 8.0).unwrap();
        assert!((mass(&small).unwrap() - PI / 8.0).abs() < 1e-12);
    }

    #[test]
    fn antiderivative_examples() {
        for f in [make_bump(0.3, 0.7).unwrap(), make_tent(0.3, 0.7).unwrap()] {
            assert_eq!(antiderivative(&f, 0.0), 0.0);
            assert!((antiderivative(&f, 1.0) - f.mass).abs() < 1e-15);
            for u in samples(0.0, 1.0, 37) {
                let q = adaptive_simpson(|s| f.evaluate(s), 0.0, u, 1e-14).unwrap();
                assert!((q - antiderivative(&f, u)).abs() < 1e-11, "{:?} u={u}", f.family);
            }
        }
        let f = make_bump(0.4, 1.0).unwrap();
        let u = 0.2;
        let want = f.amplitude * (0.4 * u * u / 2.0 - u * u * u / 3.0);
        assert!((antiderivative(&f, u) - want).abs() < 1e-15);
    }

    #[test]
    fn parameter_errors() {
        assert!(make_bump(0.0, 1.0).is_err());
        assert!(make_bump(1.0, 1.0).is_err());
        assert!(make_tent(0.5, 0.0).is_err());
        assert!(make_tent(0.5, -1.0).is_err());
    }

    #[test]
    fn structural_hypotheses_hold() {
        for f in [
            make_bump(0.25, PI / 8.0).unwrap(),
            make_tent(0.25, PI / 8.0).unwrap(),
            make_bump(0.05, PI / 8.0).unwrap(),
        ] {
            let a = f.alpha;
            for u in samples(-1.0, 0.0, 5_000).chain(samples(a, 2.0, 5_000)) {
                assert_eq!(f.evaluate(u), 0.0);
            }
            assert_eq!(f.evaluate(a), 0.0);
            for u in samples(0.0, a, 10_000) {
                assert!(f.evaluate(u) > 0.0);
            }
            let pts: Vec<f64> = samples(0.0, 1.0, 400).collect();
            let mut worst: f64 = 0.0;
            for (i, &u) in pts.iter().enumerate() {
                for &w in &pts[i + 1..] {
                    worst = worst.max((f.evaluate(u) - f.evaluate(w)).abs() / (w - u));
                }
            }
            assert!(worst <= f.lipschitz * (1.0 + 1e-10));
            assert!((mass(&f).unwrap() - f.mass).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_differences() {
        let f = make_bump(0.3, 0.5).unwrap();
        for u in [0.01, 0.1, 0.2, 0.29] {
            let h = 1e-7;
            let fd = (f.evaluate(u + h) - f.evaluate(u - h)) / (2.0 * h);
            assert!((f.derivative(u) - fd).abs() < 1e-5);
        }
        assert_eq!(f.derivative(0.5), 0.0);
    }
}
