//! Standard normal distribution functions.
//!
//! `erfc` comes from `libm`. Quantiles start from `statrs`' `erfc_inv` and are
//! polished by Newton steps against that `erfc`. Tail arguments never pass
//! through `1 - x` and lose their low-order bits.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF `Φ(x)`.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate for large positive `x`.
pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

/// Standard normal quantile `Φ⁻¹(p)`; returns ±∞ at the endpoints.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        // erfc_inv near 2 is ill-conditioned; reflect instead.
        return norm_isf_upper(1.0 - p);
    }
    -norm_isf_upper(p)
}

/// Inverse survival function `Φ⁻¹(1 - q)` evaluated without forming `1 - q`.
pub fn norm_isf(q: f64) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    if q >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if q > 0.5 {
        return -norm_isf_upper(1.0 - q);
    }
    norm_isf_upper(q)
}

fn norm_isf_upper(q: f64) -> f64 {
    let mut x = SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..2 {
        let d = norm_pdf(x);
        if !(d > 0.0 && x.is_finite()) {
            break;
        }
        x += (norm_sf(x) - q) / d;
    }
    x
}
