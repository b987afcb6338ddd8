//! Trade-off functions (f-DP curves).
//!
//! A trade-off curve maps a type-I error level `α` to the smallest type-II error
//! `β` any test can reach when telling two neighbouring outputs apart. Every curve
//! here is convex, non-increasing and lies on or below the diagonal `1 - α`.

mod np;

pub use np::{np_curve, Density, FnDensity, LaplaceDensity, NormalDensity, DEFAULT_GRID_SIZE};

use crate::error::{check_nonneg, check_probability, AuditError, Result};
use crate::special::{norm_cdf, norm_isf};
use serde::{Deserialize, Serialize};

/// An f-DP curve from one of the supported families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TradeoffCurve {
    /// `f_{ε,δ}(x) = max(0, 1-δ-e^ε x, e^{-ε}(1-δ-x))`.
    EpsDelta { params: EpsDeltaParams },
    /// `G_μ(x) = Φ(Φ⁻¹(1-x) - μ)`.
    Gaussian { params: GaussianParams },
    /// Optimal test between `Lap(0,1)` and `Lap(μ,1)`.
    Laplace { params: LaplaceParams },
    /// Tabulated curve with piecewise-linear interpolation.
    Numeric { table: CurveTable },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsDeltaParams {
    pub eps: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    pub mu: f64,
}

/// Convex table of `(α, β)` points, `α` strictly increasing from 0 to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Slack allowed when validating tabulated curves.
const TABLE_TOL: f64 = 1e-9;

impl TradeoffCurve {
    pub fn eps_delta(eps: f64, delta: f64) -> Result<Self> {
        check_nonneg("eps", eps)?;
        check_probability("delta", delta)?;
        Ok(Self::EpsDelta {
            params: EpsDeltaParams { eps, delta },
        })
    }

    pub fn gaussian(mu: f64) -> Result<Self> {
        check_nonneg("mu", mu)?;
        Ok(Self::Gaussian {
            params: GaussianParams { mu },
        })
    }

    pub fn laplace(mu: f64) -> Result<Self> {
        check_nonneg("mu_l", mu)?;
        Ok(Self::Laplace {
            params: LaplaceParams { mu },
        })
    }

    /// The perfect-privacy curve `f(x) = 1 - x`.
    pub fn identity() -> Self {
        Self::Gaussian {
            params: GaussianParams { mu: 0.0 },
        }
    }

    /// Build a numeric curve from a table. The lower convex hull of the points is
    /// kept, so slightly non-convex input is repaired rather than rejected.
    pub fn from_table(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let table = CurveTable::new(alpha, beta)?;
        Ok(Self::Numeric { table })
    }

    /// Parse a curve from JSON and check its parameters.
    pub fn from_json(text: &str) -> Result<Self> {
        let curve: Self = serde_json::from_str(text)?;
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::EpsDelta { params } => {
                check_nonneg("eps", params.eps)?;
                check_probability("delta", params.delta)?;
            }
            Self::Gaussian { params } => {
                check_nonneg("mu", params.mu)?;
            }
            Self::Laplace { params } => {
                check_nonneg("mu_l", params.mu)?;
            }
            Self::Numeric { table } => table.validate()?,
        }
        Ok(())
    }

    /// Evaluate `f(x)`. `x` is clamped into `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Self::EpsDelta { params } => eps_delta_unchecked(params.eps, params.delta, x),
            Self::Gaussian { params } => gdp_unchecked(params.mu, x),
            Self::Laplace { params } => laplace_unchecked(params.mu, x),
            Self::Numeric { table } => table.eval(x),
        }
    }

    /// Evaluate `f(x)`, rejecting `x` outside `[0, 1]`.
    pub fn try_eval(&self, x: f64) -> Result<f64> {
        check_probability("x", x)?;
        Ok(self.eval(x))
    }

    /// Points in `(0, 1)` where the curve is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Self::EpsDelta { params } => {
                let EpsDeltaParams { eps, delta } = *params;
                let mut k = vec![(1.0 - delta) / (1.0 + eps.exp())];
                if delta > 0.0 {
                    k.push(1.0 - delta);
                }
                k.retain(|x| *x > 0.0 && *x < 1.0);
                k
            }
            Self::Gaussian { .. } | Self::Laplace { .. } => Vec::new(),
            Self::Numeric { table } => {
                table.alpha[1..table.alpha.len() - 1].to_vec()
            }
        }
    }

    /// Short family name used in reports.
    pub fn family_name(&self) -> &'static str {
        match self {
            Self::EpsDelta { .. } => "eps_delta",
            Self::Gaussian { .. } => "gaussian",
            Self::Laplace { .. } => "laplace",
            Self::Numeric { .. } => "numeric",
        }
    }
}

/// `f_{ε,δ}(x)`.
pub fn eval_eps_delta(eps: f64, delta: f64, x: f64) -> Result<f64> {
    check_nonneg("eps", eps)?;
    check_probability("delta", delta)?;
    check_probability("x", x)?;
    Ok(eps_delta_unchecked(eps, delta, x))
}

/// `G_μ(x) = Φ(Φ⁻¹(1-x) - μ)`, with `G_μ(0) = 1` and `G_μ(1) = 0`.
pub fn eval_gdp(mu: f64, x: f64) -> Result<f64> {
    check_nonneg("mu", mu)?;
    check_probability("x", x)?;
    Ok(gdp_unchecked(mu, x))
}

/// Type-II error of the most powerful level-`x` test of `Lap(0,1)` against `Lap(μ_l,1)`.
pub fn eval_laplace(mu: f64, x: f64) -> Result<f64> {
    check_nonneg("mu_l", mu)?;
    check_probability("x", x)?;
    Ok(laplace_unchecked(mu, x))
}

fn eps_delta_unchecked(eps: f64, delta: f64, x: f64) -> f64 {
    let a = 1.0 - delta - eps.exp() * x;
    let b = (-eps).exp() * (1.0 - delta - x);
    a.max(b).max(0.0)
}

fn gdp_unchecked(mu: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    if mu == 0.0 {
        return 1.0 - x;
    }
    norm_cdf(norm_isf(x) - mu)
}

// The likelihood ratio of Lap(μ,1) to Lap(0,1) is e^{-μ} left of 0, e^{2t-μ} on
// [0, μ] and e^{μ} right of μ. Threshold tests `reject when X > t` trace the three
// pieces below; the two flat ratio regions give the linear end segments.
fn laplace_unchecked(mu: f64, x: f64) -> f64 {
    if mu == 0.0 {
        return 1.0 - x;
    }
    if x <= 0.0 {
        return 1.0;
    }
    let tail = 0.5 * (-mu).exp();
    if x <= tail {
        (1.0 - mu.exp() * x).max(0.0)
    } else if x <= 0.5 {
        (-mu).exp() / (4.0 * x)
    } else {
        (-mu).exp() * (1.0 - x)
    }
}

impl CurveTable {
    /// Validate a raw table and replace it by its lower convex hull.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(AuditError::ShapeMismatch(format!(
                "alpha has {} entries, beta has {}",
                alpha.len(),
                beta.len()
            )));
        }
        if alpha.len() < 2 {
            return Err(AuditError::ShapeMismatch("a curve table needs at least two points".into()));
        }
        for (&a, &b) in alpha.iter().zip(&beta) {
            check_probability("alpha", a)?;
            check_probability("beta", b)?;
        }
        if alpha[0] != 0.0 || *alpha.last().unwrap() != 1.0 {
            return Err(AuditError::ShapeMismatch("alpha must run from 0 to 1".into()));
        }
        if alpha.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AuditError::ShapeMismatch("alpha must be strictly increasing".into()));
        }
        let (alpha, beta) = lower_convex_hull(&alpha, &beta);
        let table = Self { alpha, beta };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if n < 2 || n != self.beta.len() {
            return Err(AuditError::ShapeMismatch("malformed curve table".into()));
        }
        if self.alpha[0] != 0.0 || self.alpha[n - 1] != 1.0 {
            return Err(AuditError::ShapeMismatch("alpha must run from 0 to 1".into()));
        }
        for i in 0..n {
            check_probability("beta", self.beta[i])?;
            if i > 0 && self.alpha[i] <= self.alpha[i - 1] {
                return Err(AuditError::ShapeMismatch("alpha must be strictly increasing".into()));
            }
            if i > 0 && self.beta[i] > self.beta[i - 1] + TABLE_TOL {
                return Err(AuditError::ShapeMismatch(format!(
                    "beta increases at alpha = {}",
                    self.alpha[i]
                )));
            }
            if self.alpha[i] + self.beta[i] > 1.0 + TABLE_TOL {
                return Err(AuditError::ShapeMismatch(format!(
                    "curve lies above the diagonal at alpha = {}",
                    self.alpha[i]
                )));
            }
        }
        for i in 1..n - 1 {
            if cross(
                (self.alpha[i - 1], self.beta[i - 1]),
                (self.alpha[i], self.beta[i]),
                (self.alpha[i + 1], self.beta[i + 1]),
            ) < -TABLE_TOL
            {
                return Err(AuditError::ShapeMismatch(format!(
                    "curve is not convex at alpha = {}",
                    self.alpha[i]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Linear interpolation between neighbouring table points.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.alpha.partition_point(|&a| a <= x);
        if i == 0 {
            return self.beta[0];
        }
        if i >= self.alpha.len() {
            return *self.beta.last().unwrap();
        }
        let (a0, a1) = (self.alpha[i - 1], self.alpha[i]);
        let (b0, b1) = (self.beta[i - 1], self.beta[i]);
        let t = (x - a0) / (a1 - a0);
        (b0 + t * (b1 - b0)).clamp(0.0, 1.0)
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain, lower half. Collinear points are kept.
fn lower_convex_hull(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(alpha.len());
    for (&a, &b) in alpha.iter().zip(beta) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], (a, b)) < 0.0 {
            hull.pop();
        }
        hull.push((a, b));
    }
    hull.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::linspace;

    fn sweep_curves() -> Vec<TradeoffCurve> {
        let mut curves = Vec::new();
        for eps in [0.25, 1.0, 4.0] {
            curves.push(TradeoffCurve::eps_delta(eps, 1e-5).unwrap());
        }
        for mu in [0.2, 0.8, 3.2] {
            curves.push(TradeoffCurve::gaussian(mu).unwrap());
            curves.push(TradeoffCurve::laplace(mu).unwrap());
        }
        curves
    }

    #[test]
    fn eps_delta_examples() {
        assert!((eval_eps_delta(2.7, 0.1, 0.0).unwrap() - 0.9).abs() < 1e-15);
        assert!((eval_eps_delta(0.0, 0.0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert!((eval_eps_delta(2f64.ln(), 0.0, 0.25).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gdp_examples() {
        assert!((eval_gdp(0.0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(eval_gdp(3.0, 0.0).unwrap(), 1.0);
        assert_eq!(eval_gdp(3.0, 1.0).unwrap(), 0.0);
        // Φ(-2) from 40-digit arithmetic.
        assert!((eval_gdp(2.0, 0.5).unwrap() - 0.022_750_131_948_179_207).abs() < 1e-14);
    }

    #[test]
    fn laplace_examples() {
        assert!((eval_laplace(0.0, 0.4).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(eval_laplace(1.3, 1.0).unwrap(), 0.0);
        // Middle branch e^{-μ}/(4x) at μ = 1, x = 1/4 is e^{-1}.
        assert!((eval_laplace(1.0, 0.25).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(eval_eps_delta(-1.0, 0.0, 0.5).is_err());
        assert!(eval_eps_delta(1.0, 1.5, 0.5).is_err());
        assert!(eval_gdp(1.0, 1.1).is_err());
        assert!(eval_gdp(f64::NAN, 0.1).is_err());
        assert!(eval_laplace(-0.1, 0.5).is_err());
        assert!(TradeoffCurve::gaussian(1.0).unwrap().try_eval(-0.01).is_err());
    }

    #[test]
    fn curve_invariants_on_sweep() {
        let xs = linspace(0.0, 1.0, 1000);
        for curve in sweep_curves() {
            let f: Vec<f64> = xs.iter().map(|&x| curve.eval(x)).collect();
            assert!(f[0] <= 1.0 && *f.last().unwrap() >= 0.0, "{curve:?}");
            for i in 0..xs.len() {
                assert!(xs[i] + f[i] <= 1.0 + 1e-12, "{curve:?} above diagonal at {}", xs[i]);
                if i > 0 {
                    assert!(f[i] <= f[i - 1] + 1e-15, "{curve:?} increases at {}", xs[i]);
                }
            }
            // Convexity: midpoint of every pair of grid neighbours two steps apart.
            for i in 1..xs.len() - 1 {
                assert!(f[i] <= 0.5 * (f[i - 1] + f[i + 1]) + 1e-12, "{curve:?} not convex at {}", xs[i]);
            }
            // And along random chords.
            for (i, j, t) in [(0, 999, 0.3), (10, 500, 0.5), (100, 900, 0.77), (1, 3, 0.5)] {
                let x = t * xs[i] + (1.0 - t) * xs[j];
                assert!(curve.eval(x) <= t * f[i] + (1.0 - t) * f[j] + 1e-12);
            }
        }
    }

    #[test]
    fn monotone_in_privacy_parameter() {
        for &x in &[0.01, 0.1, 0.3, 0.5, 0.8, 0.99] {
            let mut prev = f64::INFINITY;
            for k in 0..40 {
                let v = eval_gdp(0.1 * k as f64, x).unwrap();
                assert!(v < prev, "G_mu not strictly decreasing at x = {x}");
                prev = v;
            }
            for &delta in &[0.0, 1e-5, 0.1] {
                let mut prev = f64::INFINITY;
                for k in 0..40 {
                    let v = eval_eps_delta(0.1 * k as f64, delta, x).unwrap();
                    assert!(v <= prev);
                    prev = v;
                }
            }
            let mut prev = f64::INFINITY;
            for k in 0..20 {
                let v = eval_eps_delta(1.0, 0.05 * k as f64, x).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn gdp_fixed_point_is_phi_of_half_mu() {
        for &mu in &[0.2, 0.8, 1.0, 3.2, 6.0] {
            let (mut lo, mut hi) = (0.0f64, 0.5f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if eval_gdp(mu, mid).unwrap() > mid {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let want = norm_cdf(-mu / 2.0);
            assert!((lo - want).abs() < 1e-8, "mu = {mu}: {lo} vs {want}");
        }
    }

    #[test]
    fn json_shape() {
        let c = TradeoffCurve::gaussian(0.8).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"family":"gaussian","params":{"mu":0.8}}"#);
        let back = TradeoffCurve::from_json(&s).unwrap();
        assert_eq!(back, c);
        let t = TradeoffCurve::from_table(vec![0.0, 0.5, 1.0], vec![1.0, 0.2, 0.0]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"family":"numeric","table":{"alpha":[0.0,0.5,1.0],"beta":[1.0,0.2,0.0]}}"#);
        assert!(TradeoffCurve::from_json(r#"{"family":"gaussian","params":{"mu":-1}}"#).is_err());
    }

    #[test]
    fn table_rejects_bad_input() {
        assert!(TradeoffCurve::from_table(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TradeoffCurve::from_table(vec![0.1, 1.0], vec![0.9, 0.0]).is_err());
        assert!(TradeoffCurve::from_table(vec![0.0, 0.5, 0.4, 1.0], vec![1.0, 0.2, 0.3, 0.0]).is_err());
        // Increasing, and above the diagonal near α = 1.
        assert!(TradeoffCurve::from_table(vec![0.0, 0.5, 1.0], vec![1.0, 0.2, 0.3]).is_err());
    }

    #[test]
    fn table_hull_repairs_concavity() {
        let c = TradeoffCurve::from_table(vec![0.0, 0.25, 0.5, 1.0], vec![1.0, 0.5, 0.45, 0.0]).unwrap();
        // (0.5, 0.45) lies above the chord from (0.25, 0.5) to (1, 0) and is dropped.
        let TradeoffCurve::Numeric { table } = &c else { unreachable!() };
        assert_eq!(table.alpha, vec![0.0, 0.25, 1.0]);
        assert!((c.eval(0.5) - 0.5 * 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kinks_of_eps_delta() {
        let c = TradeoffCurve::eps_delta(1.0, 1e-5).unwrap();
        let k = c.kinks();
        assert!((k[0] - (1.0 - 1e-5) / (1.0 + 1f64.exp())).abs() < 1e-15);
        assert!((c.eval(k[0]) - k[0]).abs() < 1e-12);
    }
}
