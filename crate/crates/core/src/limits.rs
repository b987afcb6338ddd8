//! Information-theoretic limits of recovering canary bits from an f-DP mechanism.
//!
//! Each canary bit crosses a binary channel whose false-positive and
//! false-negative rates are tied together by the trade-off curve. Maximizing the
//! mutual information over the curve bounds what any decoder can learn, and
//! inverting the binary entropy turns that bound into a per-bit error floor.

use crate::error::{check_open_unit, check_probability, Result};
use crate::optimize::{grid_then_golden, linspace};
use crate::tradeoff::TradeoffCurve;
use serde::{Deserialize, Serialize};

/// Grid endpoints stay this far from 0 and 1.
pub const X_CLAMP: f64 = 1e-12;
const UNIFORM_POINTS: usize = 1024;
const TAIL_POINTS: usize = 128;
const X_TOL: f64 = 1e-10;
const P_GRID_POINTS: usize = 129;
const P_TOL: f64 = 1e-9;

/// Derived limits for one curve and input prior.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitProfile {
    pub curve: TradeoffCurve,
    pub p: f64,
    /// Upper bound on `MI(B_i; B̂_i)` in bits.
    pub u: f64,
    pub argmax_x: f64,
    /// Per-bit error floor at the balanced prior.
    pub p_floor: f64,
    pub capacity: f64,
}

impl LimitProfile {
    pub fn compute(curve: &TradeoffCurve, p: f64) -> Result<Self> {
        let bound = mi_upper_bound(curve, p)?;
        Ok(Self {
            curve: curve.clone(),
            p,
            u: bound.u,
            argmax_x: bound.argmax_x,
            p_floor: bit_error_floor(curve),
            capacity: capacity(curve),
        })
    }
}

/// Result of maximizing `F_f(·, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiBound {
    pub u: f64,
    pub argmax_x: f64,
}

/// Binary entropy in bits, with `0·log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    Ok(h2(x))
}

pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let nats = -x * x.ln() - (1.0 - x) * (-x).ln_1p();
    nats / std::f64::consts::LN_2
}

/// Inverse of the increasing half of the binary entropy: the `x ∈ [0, 1/2]`
/// with `h(x) = y`, found by bisection down to floating-point resolution.
pub fn inv_binary_entropy(y: f64) -> Result<f64> {
    check_probability("y", y)?;
    Ok(inv_h2(y))
}

pub(crate) fn inv_h2(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    // Subnormal targets need ~1075 halvings; the loop exits as soon as the
    // bracket cannot shrink further.
    for _ in 0..1100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h2(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `F_f(x, p) = h(p·f(x) + (1-p)(1-x)) - p·h(f(x)) - (1-p)·h(1-x)`.
pub fn mi_bound_integrand(curve: &TradeoffCurve, x: f64, p: f64) -> Result<f64> {
    check_probability("x", x)?;
    check_open_unit("p", p)?;
    Ok(integrand(curve, x, p))
}

fn integrand(curve: &TradeoffCurve, x: f64, p: f64) -> f64 {
    let fx = curve.eval(x);
    let y = 1.0 - x;
    // Grouped against h(1-x) so the diagonal gives exactly zero.
    (h2(y + p * (fx - y)) - h2(y)) - p * (h2(fx) - h2(y))
}

/// The x-grid used for the coarse stage: uniform on `[1e-12, 1-1e-12]` plus
/// log-spaced points toward both ends, where steep curves put their maximizers.
pub fn x_grid() -> Vec<f64> {
    let mut g = linspace(X_CLAMP, 1.0 - X_CLAMP, UNIFORM_POINTS);
    let step = 1.0 / UNIFORM_POINTS as f64;
    for k in 0..TAIL_POINTS {
        let e = X_CLAMP.log10() + (step.log10() - X_CLAMP.log10()) * k as f64 / TAIL_POINTS as f64;
        let x = 10f64.powf(e);
        g.push(x);
        g.push(1.0 - x);
    }
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    g
}

/// `u_f(p) = max_x F_f(x, p)` together with its maximizer.
pub fn mi_upper_bound(curve: &TradeoffCurve, p: f64) -> Result<MiBound> {
    check_open_unit("p", p)?;
    Ok(mi_upper_bound_on(curve, p, &x_grid()))
}

fn mi_upper_bound_on(curve: &TradeoffCurve, p: f64, grid: &[f64]) -> MiBound {
    let (x, u) = grid_then_golden(|x| integrand(curve, x, p), grid, X_TOL);
    MiBound {
        u: u.max(0.0),
        argmax_x: x,
    }
}

/// Channel capacity `max_p u_f(p)`.
pub fn capacity(curve: &TradeoffCurve) -> f64 {
    let xs = x_grid();
    let u_at = |p: f64| mi_upper_bound_on(curve, p, &xs).u;
    let ps = linspace(1e-6, 1.0 - 1e-6, P_GRID_POINTS);
    let (_, best) = grid_then_golden(u_at, &ps, P_TOL);
    best.max(u_at(0.5))
}

/// Bit-error floor `p_f^e = h⁻¹(1 - u_f(1/2))`.
pub fn bit_error_floor(curve: &TradeoffCurve) -> f64 {
    let u = mi_upper_bound_on(curve, 0.5, &x_grid()).u;
    inv_h2((1.0 - u).clamp(0.0, 1.0))
}

/// Plug-in mutual information (bits) of a 2x2 contingency table
/// `counts[truth][guess]`.
pub fn empirical_mutual_information(counts: [[u64; 2]; 2]) -> f64 {
    let n: u64 = counts.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let row = [(counts[0][0] + counts[0][1]) as f64, (counts[1][0] + counts[1][1]) as f64];
    let col = [(counts[0][0] + counts[1][0]) as f64, (counts[0][1] + counts[1][1]) as f64];
    let mut mi = 0.0;
    for (i, r) in counts.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * (c * n / (row[i] * col[j])).log2();
        }
    }
    mi.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // 40-digit reference.
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528).abs() < 1e-14);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn inverse_entropy_examples() {
        assert_eq!(inv_binary_entropy(1.0).unwrap(), 0.5);
        assert_eq!(inv_binary_entropy(0.0).unwrap(), 0.0);
        let x = inv_binary_entropy(0.499_915_958_164_528).unwrap();
        assert!((x - 0.11).abs() < 1e-12);
        assert!(inv_binary_entropy(-0.1).is_err());
    }

    #[test]
    fn inverse_entropy_round_trip() {
        for k in 0..=2000 {
            let y = k as f64 / 2000.0;
            let x = inv_binary_entropy(y).unwrap();
            assert!((0.0..=0.5).contains(&x));
            assert!((h2(x) - y).abs() <= 1e-10, "y = {y}");
        }
        // Tiny targets keep relative accuracy too.
        let x = inv_h2(1e-200);
        assert!(((h2(x) - 1e-200) / 1e-200).abs() < 1e-9);
    }

    #[test]
    fn integrand_examples() {
        let diag = TradeoffCurve::identity();
        for x in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert!(mi_bound_integrand(&diag, x, 0.5).unwrap().abs() < 1e-15);
        }
        // At the symmetric point f(x) = x of G_2, F reduces to 1 - h(x).
        let g = TradeoffCurve::gaussian(2.0).unwrap();
        let x = norm_cdf(-1.0);
        let want = 1.0 - h2(x);
        assert!((mi_bound_integrand(&g, x, 0.5).unwrap() - want).abs() < 1e-10);
        assert!((want - 0.368_917_232_594_458_1).abs() < 1e-12);
        let ed = TradeoffCurve::eps_delta(1.0, 0.0).unwrap();
        assert!(mi_bound_integrand(&ed, 0.0, 0.5).unwrap().abs() < 1e-15);
        assert!(mi_bound_integrand(&ed, 0.5, 0.0).is_err());
        assert!(mi_bound_integrand(&ed, 0.5, 1.0).is_err());
    }

    #[test]
    fn integrand_never_exceeds_source_entropy() {
        let curves = [
            TradeoffCurve::gaussian(3.2).unwrap(),
            TradeoffCurve::eps_delta(4.0, 1e-5).unwrap(),
            TradeoffCurve::laplace(3.2).unwrap(),
        ];
        for curve in &curves {
            for p in [0.05, 0.3, 0.5, 0.9] {
                for &x in &x_grid() {
                    assert!(integrand(curve, x, p) <= h2(p) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn diagonal_has_no_information() {
        let diag = TradeoffCurve::identity();
        assert!(mi_upper_bound(&diag, 0.5).unwrap().u < 1e-15);
        assert!(capacity(&diag) < 1e-15);
        assert!((bit_error_floor(&diag) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn gaussian_bound_at_symmetric_point() {
        // 1 - h(Φ(-μ/2)) from 40-digit arithmetic.
        for (mu, want) in [
            (0.2, 0.004_581_821_616_118_509),
            (0.8, 0.070_867_449_908_058_2),
            (3.2, 0.693_555_668_053_438_2),
        ] {
            let b = mi_upper_bound(&TradeoffCurve::gaussian(mu).unwrap(), 0.5).unwrap();
            assert!((b.u - want).abs() < 1e-10, "mu = {mu}: {} vs {want}", b.u);
            assert!((b.argmax_x - norm_cdf(-mu / 2.0)).abs() < 1e-4);
        }
    }

    #[test]
    fn prior_sweep_has_single_interior_peak() {
        let c = TradeoffCurve::eps_delta(1.0, 1e-5).unwrap();
        let us: Vec<f64> = (1..100).map(|k| mi_upper_bound(&c, k as f64 / 100.0).unwrap().u).collect();
        let peak = us.iter().enumerate().fold(0, |b, (i, &u)| if u > us[b] { i } else { b });
        assert!(peak > 10 && peak < 88);
        assert!(us[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(us[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(us[0] < 0.2 * us[peak] && us[98] < 0.2 * us[peak]);
    }

    #[test]
    fn capacity_examples() {
        assert!((capacity(&TradeoffCurve::gaussian(50.0).unwrap()) - 1.0).abs() < 1e-9);
        let g = TradeoffCurve::gaussian(0.8).unwrap();
        let cap = capacity(&g);
        let half = mi_upper_bound(&g, 0.5).unwrap().u;
        assert!(cap >= half);
        // Dense prior grid oracle.
        let xs = x_grid();
        let dense = (1..2000)
            .map(|k| mi_upper_bound_on(&g, k as f64 / 2000.0, &xs).u)
            .fold(0.0, f64::max);
        assert!(cap >= dense - 1e-12 && cap - dense < 1e-7, "{cap} vs {dense}");
    }

    #[test]
    fn floor_examples() {
        for mu in [0.2, 0.8, 3.2] {
            let pf = bit_error_floor(&TradeoffCurve::gaussian(mu).unwrap());
            assert!((pf - norm_cdf(-mu / 2.0)).abs() < 1e-8, "mu = {mu}");
        }
        let e1 = bit_error_floor(&TradeoffCurve::eps_delta(1.0, 1e-5).unwrap());
        let e4 = bit_error_floor(&TradeoffCurve::eps_delta(4.0, 1e-5).unwrap());
        assert!(e4 > 0.0 && e4 < 0.5 && e4 < e1);
    }

    #[test]
    fn floor_and_bound_round_trip() {
        for c in [
            TradeoffCurve::gaussian(0.8).unwrap(),
            TradeoffCurve::eps_delta(0.25, 1e-5).unwrap(),
            TradeoffCurve::laplace(3.2).unwrap(),
        ] {
            let u = mi_upper_bound(&c, 0.5).unwrap().u;
            assert!((h2(bit_error_floor(&c)) + u - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn floor_monotone_in_parameter() {
        let params: Vec<f64> = (1..=32).map(|k| 0.1 * k as f64).collect();
        for make in [
            (|t: f64| TradeoffCurve::gaussian(t).unwrap()) as fn(f64) -> TradeoffCurve,
            |t| TradeoffCurve::eps_delta(t, 1e-5).unwrap(),
            |t| TradeoffCurve::laplace(t).unwrap(),
        ] {
            let floors: Vec<f64> = params.iter().map(|&t| bit_error_floor(&make(t))).collect();
            assert!(floors.windows(2).all(|w| w[1] < w[0]), "{floors:?}");
        }
    }

    #[test]
    fn empirical_mi_of_tables() {
        assert_eq!(empirical_mutual_information([[50, 0], [0, 50]]), 1.0);
        assert!(empirical_mutual_information([[25, 25], [25, 25]]).abs() < 1e-15);
        assert_eq!(empirical_mutual_information([[0, 0], [0, 0]]), 0.0);
    }
}
