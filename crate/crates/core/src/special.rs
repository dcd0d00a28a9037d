//! Special functions: the normalized error integral and the modified Bessel
//! function `K0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// 2/sqrt(pi).
pub const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument `K0` is summed from its logarithmic power series;
/// above it Steed's continued fraction is used.
pub const K0_SERIES_SWITCH: f64 = 2.0;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Modified Bessel function of the second kind of order zero.
pub fn bessel_k0(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain("bessel_k0", format!("argument {s} must be positive and finite")));
    }
    if s <= K0_SERIES_SWITCH {
        Ok(k0_series(s))
    } else {
        Ok(k0_continued_fraction(s))
    }
}

/// `K0(s) = -(ln(s/2) + gamma) I0(s) + sum_k (s^2/4)^k / (k!)^2 H_k`.
pub(crate) fn k0_series(s: f64) -> f64 {
    let q = 0.25 * s * s;
    let log_term = (0.5 * s).ln() + EULER_GAMMA;
    let mut term = 1.0; // (q^k / (k!)^2)
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term * harmonic.max(1.0) < 1e-17 * (i0 + tail) {
            break;
        }
    }
    -log_term * i0 + tail
}

/// Steed's evaluation of the second continued fraction (Temme's CF2) for
/// order zero. Converges quickly for `s >= 2`.
pub(crate) fn k0_continued_fraction(s: f64) -> f64 {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + s);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut sum = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        sum += dels;
        if (dels / sum).abs() < 1e-17 {
            break;
        }
    }
    (PI / (2.0 * s)).sqrt() * (-s).exp() / sum
}

/// Large-argument expansion `K0(s) ~ sqrt(pi/2s) e^{-s} sum_k a_k / s^k`
/// truncated after `corrections` correction terms (0 gives the leading term).
pub fn bessel_k0_asymptotic(s: f64, corrections: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=corrections {
        let odd = (2 * k - 1) as f64;
        term *= -(odd * odd) / (k as f64 * 8.0 * s);
        sum += term;
    }
    (PI / (2.0 * s)).sqrt() * (-s).exp() * sum
}
