//! Cauchy and Half-Cauchy log densities, plus their partial derivatives.
//!
//! The checked functions validate the scale; the `*_with_grad` versions are
//! for hot loops where the caller already guarantees `scale > 0`.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// `log Cauchy(x | loc, scale)`.
pub fn cauchy_logpdf(x: f64, loc: f64, scale: f64) -> Result<f64> {
    check_scale(scale)?;
    Ok(cauchy_with_grad(x, loc, scale).value)
}

/// `log HalfCauchy(x | 0, scale)`; negative infinity for `x < 0`.
pub fn half_cauchy_logpdf(x: f64, scale: f64) -> Result<f64> {
    check_scale(scale)?;
    if x < 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(half_cauchy_with_grad(x, scale).value)
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("scale must be positive and finite, got {scale}")))
    }
}

/// Log density and its partials with respect to the argument, the location
/// and the scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensityTerm {
    pub value: f64,
    pub d_x: f64,
    pub d_loc: f64,
    pub d_scale: f64,
}

#[inline]
pub fn cauchy_with_grad(x: f64, loc: f64, scale: f64) -> LogDensityTerm {
    let z = (x - loc) / scale;
    let z2 = z * z;
    let denom = 1.0 + z2;
    // ln_1p keeps precision for |z| << 1; for huge z fall back to a form
    // that does not overflow z².
    let log_denom = if z.abs() < 1e150 {
        z2.ln_1p()
    } else {
        2.0 * z.abs().ln()
    };
    let d_x = -2.0 * z / (scale * denom);
    LogDensityTerm {
        value: -LN_PI - scale.ln() - log_denom,
        d_x,
        d_loc: -d_x,
        d_scale: (z2 - 1.0) / (scale * denom),
    }
}

/// Half-Cauchy on `x >= 0`; no support check.
#[inline]
pub fn half_cauchy_with_grad(x: f64, scale: f64) -> LogDensityTerm {
    let mut t = cauchy_with_grad(x, 0.0, scale);
    t.value += LN_2;
    t
}

/// `log(2/pi)`, the Half-Cauchy log density at zero for unit scale.
pub const LOG_TWO_OVER_PI: f64 = LN_2 - LN_PI;

/// Standard Cauchy quantile function.
pub fn cauchy_quantile(p: f64, loc: f64, scale: f64) -> f64 {
    loc + scale * (PI * (p - 0.5)).tan()
}
