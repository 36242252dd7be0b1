//! Beta density, regularized incomplete beta and finite differences.
//!
//! Every estimator weight in the crate is ultimately an evaluation of
//! `beta_pdf` or `beta_cdf`, so these routines are kept small and exact at
//! the interval ends.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Shape pair of a Beta(a, b) law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::Domain(format!(
                "beta shapes must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// The mirrored law Beta(b, a).
    pub fn swapped(&self) -> Self {
        Self {
            a: self.b,
            b: self.a,
        }
    }

    /// `ln B(a, b)` through log-gamma.
    pub fn ln_beta(&self) -> f64 {
        ln_gamma(self.a) + ln_gamma(self.b) - ln_gamma(self.a + self.b)
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        Ok(pdf_unchecked(self.a, self.b, t))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        Ok(cdf_unchecked(self.a, self.b, t))
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument {t} lies outside [0, 1]")))
    }
}

/// Beta(a, b) density at `t`.
pub fn beta_pdf(params: BetaParams, t: f64) -> Result<f64> {
    params.pdf(t)
}

/// Regularized incomplete beta `I_{a,b}(t)`.
pub fn beta_cdf(params: BetaParams, t: f64) -> Result<f64> {
    params.cdf(t)
}

/// Returns whether `I_{a,b}(t) + I_{b,a}(1 - t)` equals one to 1e-12.
pub fn beta_cdf_complement_identity_check(a: f64, b: f64, t: f64) -> bool {
    let Ok(params) = BetaParams::new(a, b) else {
        return false;
    };
    match (params.cdf(t), params.swapped().cdf(1.0 - t)) {
        (Ok(lhs), Ok(rhs)) => (lhs + rhs - 1.0).abs() <= 1e-12,
        _ => false,
    }
}

pub(crate) fn pdf_unchecked(a: f64, b: f64, t: f64) -> f64 {
    // Closed forms for unit shapes keep Beta(1, 1) exactly uniform.
    if b == 1.0 {
        return a * t.powf(a - 1.0);
    }
    if a == 1.0 {
        return b * (1.0 - t).powf(b - 1.0);
    }
    if t == 0.0 {
        return if a < 1.0 { f64::INFINITY } else { 0.0 };
    }
    if t == 1.0 {
        return if b < 1.0 { f64::INFINITY } else { 0.0 };
    }
    let ln = (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - BetaParams { a, b }.ln_beta();
    ln.exp()
}

pub(crate) fn cdf_unchecked(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    if b == 1.0 {
        return t.powf(a);
    }
    if a == 1.0 {
        return -(b * (-t).ln_1p()).exp_m1();
    }
    // Swap at most once: with rounding, 1 - t can land on the far side of
    // b / (a + b) as well.
    if t > a / (a + b) {
        1.0 - lentz_side(b, a, 1.0 - t)
    } else {
        lentz_side(a, b, t)
    }
}

fn lentz_side(a: f64, b: f64, t: f64) -> f64 {
    // Prefactor t^a (1-t)^b / (a B(a,b)) in log space.
    let ln_front = a * t.ln() + b * (-t).ln_1p() - BetaParams { a, b }.ln_beta() - a.ln();
    let value = ln_front.exp() * continued_fraction(a, b, t);
    value.clamp(0.0, 1.0)
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn continued_fraction(a: f64, b: f64, t: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * t / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for step in 1..=CF_MAX_ITER {
        let m = step as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * t / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * t / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Symmetric difference quotient `(f(t+h) - f(t-h)) / 2h`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    Ok((f(t + h) - f(t - h)) / (2.0 * h))
}

/// Derivative of a function defined on `[0, 1]`.
///
/// Falls back to second-order one-sided differences when the symmetric
/// stencil would leave the unit interval.
pub fn central_diff_unit<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    check_unit(t)?;
    if t - h < 0.0 {
        Ok((-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h))
    } else if t + h > 1.0 {
        Ok((3.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / (2.0 * h))
    } else {
        Ok((f(t + h) - f(t - h)) / (2.0 * h))
    }
}
