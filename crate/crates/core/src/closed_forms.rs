//! Explicit solutions of the free-boundary and regularized problems.
//!
//! Everything here is a pure function of its arguments. These evaluators are
//! the oracles the finite-difference solver is checked against:
//!
//! * `harmonic_root` is `Re sqrt(x + iy)`, harmonic in the upper half-plane
//!   with trace `sqrt(x_+)`;
//! * `shifted_root` lifts it by `delta^2` in `y`, which turns the free
//!   boundary into a smooth flux condition with nonlinearity `beta_delta`;
//! * `explicit_wave` composes the shifted root with the error-function
//!   profile `Phi_c`, giving an exact traveling wave of speed `c` for the
//!   nonlinearity `g_{delta,c}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::special::{erf, erfc, TWO_OVER_SQRT_PI};

/// A point of the closed upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Parameters `(delta, c)` of the regularized explicit traveling wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormParams {
    pub delta: f64,
    pub speed: f64,
}

impl ClosedFormParams {
    pub fn new(delta: f64, speed: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("must be positive, got {delta}")));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::param("speed", format!("must be positive, got {speed}")));
        }
        Ok(ClosedFormParams { delta, speed })
    }

    /// Parameters with `delta = a / sqrt(c)`, the scaling used in the
    /// comparison argument for large speeds.
    pub fn from_scaled(a: f64, speed: f64) -> Result<Self> {
        Self::new(a / speed.sqrt(), speed)
    }

    /// `A = delta * sqrt(c)`.
    pub fn scaled_delta(&self) -> f64 {
        self.delta * self.speed.sqrt()
    }

    /// Value of the explicit wave at the origin, `Phi(A / sqrt 2)`
    /// (`u^delta(0, 0) = delta / sqrt 2`).
    pub fn origin_value(&self) -> f64 {
        wave_profile(self.scaled_delta() * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// `(rho + x) / 2` and `(rho - x) / 2` without cancellation.
fn half_sums(x: f64, y: f64) -> (f64, f64) {
    let rho = x.hypot(y);
    if x >= 0.0 {
        let plus = 0.5 * (rho + x);
        let minus = if plus > 0.0 { 0.25 * y * y / plus } else { 0.0 };
        (plus, minus)
    } else {
        let minus = 0.5 * (rho - x);
        let plus = 0.25 * y * y / minus;
        (plus, minus)
    }
}

/// `u(x, y) = ((x^2 + y^2)^{1/2} + x)^{1/2} / sqrt(2)`, the real part of `sqrt(x + iy)`.
pub fn harmonic_root(p: Point) -> f64 {
    if p.y == 0.0 {
        return p.x.max(0.0).sqrt();
    }
    half_sums(p.x, p.y).0.sqrt()
}

/// Gradient of `harmonic_root`: `(1/2) rho^{-1/2} (cos(theta/2), sin(theta/2))`.
///
/// On the negative axis this returns the `theta -> pi` limit `(0, 1/(2 sqrt|x|))`.
pub fn harmonic_root_gradient(p: Point) -> Result<(f64, f64)> {
    let rho = p.x.hypot(p.y);
    if !(rho >= 1e-12) {
        return Err(Error::domain(
            "harmonic_root_gradient",
            format!("gradient is singular at the origin (rho = {rho:e})"),
        ));
    }
    let (plus, minus) = half_sums(p.x, p.y);
    let scale = 0.5 / rho;
    Ok((scale * plus.sqrt(), scale * minus.sqrt()))
}

/// `u^delta(x, y) = u(x, y + delta^2)`.
pub fn shifted_root(p: Point, delta: f64) -> f64 {
    harmonic_root(Point::new(p.x, p.y + delta * delta))
}

/// `Phi(u) = (2/sqrt(pi)) int_0^u e^{-s^2} ds`.
pub fn wave_profile(u: f64) -> f64 {
    erf(u)
}

/// `Phi_c(u) = Phi(sqrt(c) u)`.
pub fn wave_profile_c(u: f64, c: f64) -> f64 {
    erf(c.sqrt() * u)
}

/// `1 - Phi_c(u)`, computed without cancellation.
pub fn wave_profile_c_complement(u: f64, c: f64) -> f64 {
    erfc(c.sqrt() * u)
}

/// `Phi_c'(u) = 2 sqrt(c/pi) e^{-c u^2}`.
pub fn wave_profile_c_derivative(u: f64, c: f64) -> f64 {
    TWO_OVER_SQRT_PI * c.sqrt() * (-c * u * u).exp()
}

/// Inverse of `Phi_c` on `[0, 1)`: Newton iteration on `z = sqrt(c) u`
/// safeguarded by the bracket `[0, 10]`.
pub fn wave_profile_inverse(v: f64, c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::domain("wave_profile_inverse", format!("v = {v} outside [0, 1)")));
    }
    if !(c > 0.0) {
        return Err(Error::domain("wave_profile_inverse", format!("c = {c} must be positive")));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    // For v above 1/2 the residual is formed from erfc to keep relative accuracy near 1.
    let complement = 1.0 - v;
    let residual = |z: f64| {
        if v > 0.5 {
            complement - erfc(z)
        } else {
            erf(z) - v
        }
    };
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    let mut z = if v > 0.5 {
        (-complement.ln()).sqrt().min(hi)
    } else {
        0.5 * std::f64::consts::PI.sqrt() * v
    };
    for _ in 0..200 {
        let r = residual(z);
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = TWO_OVER_SQRT_PI * (-z * z).exp();
        let mut next = z - r / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - z).abs();
        z = next;
        if step <= 1e-16 * z.max(1.0) || hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(z / c.sqrt())
}

/// `beta(u) = u / (1 + 4 u^4)`.
pub fn beta(u: f64) -> f64 {
    let u2 = u * u;
    u / (1.0 + 4.0 * u2 * u2)
}

pub fn beta_derivative(u: f64) -> f64 {
    let u4 = u * u * u * u;
    let den = 1.0 + 4.0 * u4;
    (1.0 - 12.0 * u4) / (den * den)
}

/// `beta_delta(u) = beta(u / delta) / delta`.
pub fn beta_delta(u: f64, delta: f64) -> f64 {
    beta(u / delta) / delta
}

pub fn beta_delta_derivative(u: f64, delta: f64) -> f64 {
    beta_derivative(u / delta) / (delta * delta)
}

/// Location `12^{-1/4}` of the maximum of `beta`.
pub fn beta_argmax() -> f64 {
    12f64.powf(-0.25)
}

/// `||beta||_inf = (3/4) 12^{-1/4}`.
pub fn beta_max() -> f64 {
    beta(beta_argmax())
}

/// `g_{delta,c}` defined through `g(Phi_c(u)) = Phi_c'(u) beta_delta(u)`.
///
/// Extended by zero for `v >= 1` (its limit) and for `v <= 0`.
pub fn g_nonlinearity(v: f64, params: &ClosedFormParams) -> Result<f64> {
    if v.is_nan() {
        return Err(Error::domain("g_nonlinearity", "v is NaN"));
    }
    if v <= 0.0 || v >= 1.0 {
        return Ok(0.0);
    }
    let u = wave_profile_inverse(v, params.speed)?;
    Ok(wave_profile_c_derivative(u, params.speed) * beta_delta(u, params.delta))
}

/// `dg/dv = beta_delta'(u) - 2 c u beta_delta(u)` at `u = Phi_c^{-1}(v)`.
pub fn g_derivative(v: f64, params: &ClosedFormParams) -> Result<f64> {
    if v.is_nan() {
        return Err(Error::domain("g_derivative", "v is NaN"));
    }
    if !(0.0..1.0).contains(&v) {
        return Ok(0.0);
    }
    let u = wave_profile_inverse(v, params.speed)?;
    Ok(beta_delta_derivative(u, params.delta) - 2.0 * params.speed * u * beta_delta(u, params.delta))
}

/// Length of the `u`-interval carrying all but ~1e-18 of the mass integrands.
fn u_cutoff(params: &ClosedFormParams) -> f64 {
    // Phi_c' is below 1e-18 relative beyond sqrt(c) u = 6.5.
    6.5 / params.speed.sqrt()
}

/// `int_0^1 g_{delta,c}(v) dv = int_0^inf Phi_c'(u)^2 beta_delta(u) du`.
pub fn g_mass(params: &ClosedFormParams) -> Result<f64> {
    let c = params.speed;
    let d = params.delta;
    let upper = u_cutoff(params);
    let integrand = |u: f64| {
        let p = wave_profile_c_derivative(u, c);
        p * p * beta_delta(u, d)
    };
    // Split at the beta peak, whose width scales with delta.
    let knee = (4.0 * d).min(upper);
    Ok(adaptive_simpson(integrand, 0.0, knee, 1e-14)? + adaptive_simpson(integrand, knee, upper, 1e-14)?)
}

/// Lipschitz bound for `g_{delta,c}` from a dense scan of `|dg/dv|` in the `u` variable.
pub fn g_lipschitz(params: &ClosedFormParams) -> f64 {
    let c = params.speed;
    let d = params.delta;
    let upper = u_cutoff(params).max(10.0 * d);
    let n = 20_000;
    let mut best: f64 = 0.0;
    for k in 0..=n {
        let u = upper * k as f64 / n as f64;
        let slope = beta_delta_derivative(u, d) - 2.0 * c * u * beta_delta(u, d);
        best = best.max(slope.abs());
    }
    1.05 * best
}

/// The regularized traveling wave `phi_{delta,c} = Phi_c(u^delta)`.
pub fn explicit_wave(p: Point, params: &ClosedFormParams) -> f64 {
    wave_profile_c(shifted_root(p, params.delta), params.speed)
}

/// The free-boundary traveling wave `phi_c = Phi_c(u)` (the `delta = 0` member).
pub fn free_boundary_wave(p: Point, c: f64) -> f64 {
    wave_profile_c(harmonic_root(p), c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn harmonic_root_examples() {
        assert_eq!(harmonic_root(Point::new(1.0, 0.0)), 1.0);
        assert_eq!(harmonic_root(Point::new(-3.0, 0.0)), 0.0);
        assert!(close(harmonic_root(Point::new(3.0, 4.0)), 2.0, 1e-15));
        assert!(close(harmonic_root(Point::new(0.0, 2.0)), 1.0, 1e-15));
    }

    #[test]
    fn harmonic_root_stable_far_left() {
        // u(x, y) ~ y / (2 sqrt|x|) for x -> -inf.
        let u = harmonic_root(Point::new(-1e12, 1.0));
        assert!(close(u, 0.5e-6, 1e-18));
    }

    #[test]
    fn gradient_examples() {
        let (gx, gy) = harmonic_root_gradient(Point::new(1.0, 0.0)).unwrap();
        assert!(close(gx, 0.5, 1e-15) && gy == 0.0);
        let (gx, gy) = harmonic_root_gradient(Point::new(0.0, 1.0)).unwrap();
        assert!(close(gx, SQRT_2 / 4.0, 1e-15) && close(gy, SQRT_2 / 4.0, 1e-15));
        let (gx, gy) = harmonic_root_gradient(Point::new(-1.0, 0.0)).unwrap();
        assert!(close(gx, 0.0, 1e-15) && close(gy, 0.5, 1e-15));
        assert!(harmonic_root_gradient(Point::new(0.0, 0.0)).is_err());
        assert!(harmonic_root_gradient(Point::new(1e-13, 0.0)).is_err());
    }

    #[test]
    fn shifted_root_examples() {
        assert!(close(shifted_root(Point::new(0.0, 0.0), 1.0), 1.0 / SQRT_2, 1e-15));
        let want = ((13f64.sqrt() + 3.0) / 2.0).sqrt();
        assert!(close(shifted_root(Point::new(3.0, 0.0), SQRT_2), want, 1e-14));
        assert!(close(shifted_root(Point::new(4.0, 0.0), 1e-9), 2.0, 1e-9));
        assert!(shifted_root(Point::new(-4.0, 0.0), 1e-9) < 1e-9);
    }

    #[test]
    fn profile_examples() {
        assert_eq!(wave_profile(0.0), 0.0);
        assert!(close(wave_profile(1.0), 0.842_700_792_949_714_9, 1e-15));
        assert!(wave_profile(7.0) == 1.0 || close(wave_profile(7.0), 1.0, 1e-16));
        let c = 2.5;
        let h = 1e-6;
        let fd = (wave_profile_c(h, c) - wave_profile_c(-h, c)) / (2.0 * h);
        assert!(close(fd, 2.0 * (c / PI).sqrt(), 1e-9));
        assert!(close(wave_profile_c_derivative(0.0, c), 2.0 * (c / PI).sqrt(), 1e-15));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(wave_profile_inverse(0.0, 3.0).unwrap(), 0.0);
        assert!(close(wave_profile_inverse(0.5, 1.0).unwrap(), 0.476_936_276_204_469_9, 1e-13));
        assert!(wave_profile_inverse(1.0, 1.0).is_err());
        assert!(wave_profile_inverse(-0.1, 1.0).is_err());
        // deep in the tail
        let u = wave_profile_inverse(1.0 - 1e-15, 1.0).unwrap();
        assert!(u > 5.0 && u < 6.0);
    }

    #[test]
    fn beta_examples() {
        assert!(close(beta(1.0), 0.2, 1e-16));
        assert!(close(beta_delta(2.0, 2.0), 0.1, 1e-16));
        // (1/4) arctan(2 u^2) is an antiderivative with limit pi/8
        let head = adaptive_simpson(beta, 0.0, 100.0, 1e-13).unwrap();
        let tail = 0.25 * (0.5 * PI - (2.0f64 * 1e4).atan());
        assert!(close(head + tail, PI / 8.0, 1e-11));
        assert!(close(beta_max(), 0.402_963_724_433_828_2, 1e-15));
    }

    #[test]
    fn beta_delta_mass_is_scale_free() {
        for d in [0.3, 1.0, 2.0] {
            // int_0^U beta_delta = (1/4) arctan(2 U^2 / delta^2)
            let upper = 50.0;
            let q = adaptive_simpson(|u| beta_delta(u, d), 0.0, upper, 1e-13).unwrap();
            let exact = 0.25 * (2.0 * upper * upper / (d * d)).atan();
            assert!(close(q, exact, 1e-11));
        }
    }

    #[test]
    fn g_examples() {
        let p = ClosedFormParams::new(1.0, 1.0).unwrap();
        assert_eq!(g_nonlinearity(0.0, &p).unwrap(), 0.0);
        assert_eq!(g_nonlinearity(1.0, &p).unwrap(), 0.0);
        let v = wave_profile(1.0);
        let want = TWO_OVER_SQRT_PI * (-1.0f64).exp() * 0.2;
        assert!(close(g_nonlinearity(v, &p).unwrap(), want, 1e-13));
        assert!(close(want, 0.083_021_499_484_118_9, 1e-15));
    }

    #[test]
    fn g_derivative_matches_differences() {
        let p = ClosedFormParams::new(0.7, 1.3).unwrap();
        for v in [0.05, 0.3, 0.6, 0.9] {
            let h = 1e-6;
            let fd = (g_nonlinearity(v + h, &p).unwrap() - g_nonlinearity(v - h, &p).unwrap()) / (2.0 * h);
            assert!(close(g_derivative(v, &p).unwrap(), fd, 1e-6), "v={v}");
        }
        assert!(g_lipschitz(&p) >= g_derivative(0.0, &p).unwrap());
    }

    #[test]
    fn g_mass_small_delta_limit() {
        // Phi_c'(0)^2 * pi/8 = c/2, which is pi/8 at c = pi/4.
        for c in [1.0, PI / 4.0] {
            let mut prev = 0.0;
            for d in [1.0, 0.1, 0.01, 0.001] {
                let m = g_mass(&ClosedFormParams::new(d, c).unwrap()).unwrap();
                assert!(m > prev);
                prev = m;
            }
            assert!(close(prev, 0.5 * c, 5e-3), "c={c}: {prev}");
        }
        // cross-check against the v-form of the integral
        let p = ClosedFormParams::new(0.5, 1.0).unwrap();
        let direct = adaptive_simpson(|v| g_nonlinearity(v, &p).unwrap(), 0.0, 1.0 - 1e-12, 1e-12).unwrap();
        assert!(close(direct, g_mass(&p).unwrap(), 1e-9));
    }

    #[test]
    fn explicit_wave_examples() {
        let p = ClosedFormParams::new(0.8, 1.7).unwrap();
        let origin = explicit_wave(Point::new(0.0, 0.0), &p);
        let u0 = shifted_root(Point::new(0.0, 0.0), p.delta);
        assert!(close(u0, p.delta / SQRT_2, 1e-15));
        assert!(close(origin, wave_profile(p.scaled_delta() / SQRT_2), 1e-15));
        assert_eq!(origin, p.origin_value());
        assert!(explicit_wave(Point::new(-1e12, 0.0), &p) < 1e-5);
        // delta = 0 member at c = pi/4: Phi_c(1) = int_0^1 e^{-pi s^2 / 4} ds
        let c = PI / 4.0;
        let q = adaptive_simpson(|s| (-c * s * s).exp(), 0.0, 1.0, 1e-15).unwrap();
        assert!(close(free_boundary_wave(Point::new(1.0, 0.0), c), q, 1e-14));
    }
}
