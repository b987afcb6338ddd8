//! Confidence intervals for the average bit error.
//!
//! Binomial CDF and quantiles back the Advanced CI fixed point and the
//! Clopper–Pearson limits used by the classical multi-run baseline.

use crate::error::{check_open_unit, check_probability, AuditError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::lgamma as ln_gamma;
use std::f64::consts::PI;

/// Largest `n` summed term by term; above it the incomplete-beta route is used.
const DIRECT_SUM_MAX_N: u64 = 1000;

/// Bracket and stopping tolerance of the Advanced CI bisection.
pub const ACI_LOWER: f64 = 0.001;
pub const ACI_UPPER: f64 = 0.5;
pub const ACI_TOL: f64 = 1e-4;
pub const ACI_MAX_ITER: usize = 64;
const EDGE_ITER: usize = 64;
const EDGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Hoeffding,
    Advanced,
    ClopperPearson,
}

impl CiMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hoeffding => "hoeffding",
            Self::Advanced => "advanced",
            Self::ClopperPearson => "clopper_pearson",
        }
    }
}

impl std::fmt::Display for CiMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How an Advanced CI computation ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiStatus {
    Converged,
    /// Observed error at or above 1/2: nothing to conclude.
    Vacuous,
    /// The self-consistent point lies below the bracket; the lower end is returned.
    BelowBracket,
    /// The self-consistent point lies above the bracket; the upper end is returned.
    AboveBracket,
    /// Iteration cap reached before the tolerance was met.
    NotConverged,
}

/// Upper confidence estimate for the bit-error floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub n: u64,
    pub e_bar: f64,
    pub gamma: f64,
    pub method: CiMethod,
    pub upper: f64,
    pub status: CiStatus,
}

impl ErrorEstimate {
    /// `[0, ē + v]` with the Hoeffding radius `v`.
    pub fn hoeffding(e_bar: f64, gamma: f64, n: u64) -> Result<Self> {
        check_probability("e_bar", e_bar)?;
        let v = hoeffding_radius(n, gamma)?;
        Ok(Self {
            n,
            e_bar,
            gamma,
            method: CiMethod::Hoeffding,
            upper: e_bar + v,
            status: CiStatus::Converged,
        })
    }

    pub fn advanced(e_bar: f64, gamma: f64, n: u64) -> Result<Self> {
        let aci = advanced_ci_detailed(e_bar, gamma, n)?;
        Ok(Self {
            n,
            e_bar,
            gamma,
            method: CiMethod::Advanced,
            upper: aci.upper,
            status: aci.status,
        })
    }

    /// One-sided Clopper–Pearson upper limit on the error rate at level `gamma`.
    pub fn clopper_pearson(errors: u64, n: u64, gamma: f64) -> Result<Self> {
        if errors > n || n == 0 {
            return Err(AuditError::Domain {
                name: "errors",
                value: errors as f64,
                domain: "[0, n] with n >= 1",
            });
        }
        Ok(Self {
            n,
            e_bar: errors as f64 / n as f64,
            gamma,
            method: CiMethod::ClopperPearson,
            upper: clopper_pearson_upper(errors, n, gamma)?,
            status: CiStatus::Converged,
        })
    }

    /// Dispatch on `method`. Clopper–Pearson needs an integer count, recovered
    /// by rounding `e_bar * n`.
    pub fn compute(method: CiMethod, e_bar: f64, gamma: f64, n: u64) -> Result<Self> {
        match method {
            CiMethod::Hoeffding => Self::hoeffding(e_bar, gamma, n),
            CiMethod::Advanced => Self::advanced(e_bar, gamma, n),
            CiMethod::ClopperPearson => {
                check_probability("e_bar", e_bar)?;
                Self::clopper_pearson((e_bar * n as f64).round() as u64, n, gamma)
            }
        }
    }
}

/// `P[Bin(n, p) <= k]`.
pub fn binom_cdf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_probability("p", p)?;
    if k > n {
        return Err(AuditError::Domain {
            name: "k",
            value: k as f64,
            domain: "[0, n]",
        });
    }
    Ok(binom_cdf_unchecked(k, n, p))
}

pub(crate) fn binom_cdf_unchecked(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    if n <= DIRECT_SUM_MAX_N {
        direct_sum_cdf(k, n, p)
    } else {
        incomplete_beta_cdf(k, n, p)
    }
}

fn direct_sum_cdf(k: u64, n: u64, p: f64) -> f64 {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ln_nf = ln_gamma(n as f64 + 1.0);
    let terms: Vec<f64> = (0..=k)
        .map(|j| {
            let j_f = j as f64;
            ln_nf - ln_gamma(j_f + 1.0) - ln_gamma((n - j) as f64 + 1.0) + j_f * lp + (n - j) as f64 * lq
        })
        .collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max.exp() * s).min(1.0)
}

// P[X <= k] = I_q(n-k, k+1) = p·pmf(k)·cf(n-k, k+1; q). The continued fraction
// converges fast only when q < (n-k+1)/(n+3); otherwise the complement
// 1 - I_p(k+1, n-k) = 1 - q·pmf(k+1)·cf(k+1, n-k; p) is used. Both prefactors
// come from the saddle-point pmf, which keeps full relative accuracy at
// n ~ 10^6 where log-gamma differences do not.
fn incomplete_beta_cdf(k: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let (nf, kf) = (n as f64, k as f64);
    if q < (nf - kf + 1.0) / (nf + 3.0) {
        let pmf = binom_pmf_raw(k, n, p, q);
        (p * pmf * beta_cf(nf - kf, kf + 1.0, q)).clamp(0.0, 1.0)
    } else {
        let pmf = binom_pmf_raw(k + 1, n, p, q);
        (1.0 - q * pmf * beta_cf(kf + 1.0, nf - kf, p)).clamp(0.0, 1.0)
    }
}

/// Binomial pmf by Loader's saddle-point expansion.
fn binom_pmf_raw(x: u64, n: u64, p: f64, q: f64) -> f64 {
    let (xf, nf) = (x as f64, n as f64);
    if p == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    if x == 0 {
        if n == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 { -bd0(nf, nf * q) - nf * p } else { nf * q.ln() };
        return lc.exp();
    }
    if x == n {
        let lc = if q < 0.1 { -bd0(nf, nf * p) - nf * q } else { nf * p.ln() };
        return lc.exp();
    }
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(nf - xf) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = (2.0 * PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `ln(n!) - [(n + 1/2) ln n - n + ln √(2π)]`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        if n == 0.0 {
            return 0.0;
        }
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// Continued fraction of the regularized incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..200_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Inverse of `x ↦ I_x(a, b)` by bisection.
fn beta_quantile(a: f64, b: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `k` with `P[Bin(n, p) <= k] >= q`.
pub fn binom_inv_cdf(q: f64, n: u64, p: f64) -> Result<u64> {
    check_open_unit("q", q)?;
    check_probability("p", p)?;
    Ok(binom_inv_cdf_unchecked(q, n, p))
}

pub(crate) fn binom_inv_cdf_unchecked(q: f64, n: u64, p: f64) -> u64 {
    if p <= 0.0 || binom_cdf_unchecked(0, n, p) >= q {
        return 0;
    }
    // Invariant: cdf(lo) < q <= cdf(hi).
    let (mut lo, mut hi) = (0u64, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binom_cdf_unchecked(mid, n, p) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Hoeffding radius `v = sqrt(ln(1/(1-γ)) / (2n))`.
pub fn hoeffding_radius(n: u64, gamma: f64) -> Result<f64> {
    check_open_unit("gamma", gamma)?;
    if n == 0 {
        return Err(AuditError::Domain {
            name: "n",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    Ok(((1.0 / (1.0 - gamma)).ln() / (2.0 * n as f64)).sqrt())
}

/// Outcome of the Advanced CI bisection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvancedCi {
    pub upper: f64,
    pub iterations: usize,
    pub status: CiStatus,
}

/// Advanced CI: the self-consistent `p` with `p ≈ ē + v(p, n, γ)`, where
/// `v(p) = p - F⁻¹(1-γ; n, p)/n`.
pub fn advanced_ci(e_bar: f64, gamma: f64, n: u64) -> Result<f64> {
    Ok(advanced_ci_detailed(e_bar, gamma, n)?.upper)
}

pub fn advanced_ci_detailed(e_bar: f64, gamma: f64, n: u64) -> Result<AdvancedCi> {
    check_probability("e_bar", e_bar)?;
    check_open_unit("gamma", gamma)?;
    if n == 0 {
        return Err(AuditError::Domain {
            name: "n",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    if e_bar >= 0.5 {
        return Ok(AdvancedCi {
            upper: 0.5,
            iterations: 0,
            status: CiStatus::Vacuous,
        });
    }

    let nf = n as f64;
    let radius = |p: f64| p - binom_inv_cdf_unchecked(1.0 - gamma, n, p) as f64 / nf;
    // Signed gap p - (ē + v(p)); non-decreasing in p.
    let gap = |p: f64| p - (e_bar + radius(p));

    if gap(ACI_LOWER) > ACI_TOL {
        return Ok(AdvancedCi {
            upper: ACI_LOWER,
            iterations: 0,
            status: CiStatus::BelowBracket,
        });
    }
    if gap(ACI_UPPER) < -ACI_TOL {
        return Ok(AdvancedCi {
            upper: ACI_UPPER,
            iterations: 0,
            status: CiStatus::AboveBracket,
        });
    }

    let (mut lo, mut hi) = (ACI_LOWER, ACI_UPPER);
    let mut p = 0.5 * (lo + hi);
    let mut g = gap(p);
    let mut iterations = 0;
    while g.abs() > ACI_TOL {
        if iterations == ACI_MAX_ITER {
            return Ok(AdvancedCi {
                upper: p,
                iterations,
                status: CiStatus::NotConverged,
            });
        }
        if g > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
        p = 0.5 * (lo + hi);
        g = gap(p);
        iterations += 1;
    }
    Ok(AdvancedCi {
        upper: right_edge(&gap, p),
        iterations,
        status: CiStatus::Converged,
    })
}

/// Largest `q ≥ p` in the bracket still meeting the stopping rule. `gap` is a
/// step function, so the first hit may sit anywhere on a flat stretch.
fn right_edge(gap: &impl Fn(f64) -> f64, p: f64) -> f64 {
    if gap(ACI_UPPER) <= ACI_TOL {
        return ACI_UPPER;
    }
    let (mut lo, mut hi) = (p, ACI_UPPER);
    for _ in 0..EDGE_ITER {
        if hi - lo <= EDGE_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gap(mid) <= ACI_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Two-sided Clopper–Pearson interval with coverage `gamma`.
pub fn clopper_pearson(successes: u64, trials: u64, gamma: f64) -> Result<(f64, f64)> {
    check_open_unit("gamma", gamma)?;
    check_counts(successes, trials)?;
    let tail = 0.5 * (1.0 - gamma);
    let (s, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 { 0.0 } else { beta_quantile(s, n - s + 1.0, tail) };
    let hi = if successes == trials { 1.0 } else { beta_quantile(s + 1.0, n - s, 1.0 - tail) };
    Ok((lo, hi))
}

/// One-sided Clopper–Pearson upper limit: the `p` with `P[Bin(n, p) <= s] = 1 - γ`.
pub fn clopper_pearson_upper(successes: u64, trials: u64, gamma: f64) -> Result<f64> {
    check_open_unit("gamma", gamma)?;
    check_counts(successes, trials)?;
    if successes == trials {
        return Ok(1.0);
    }
    let (s, n) = (successes as f64, trials as f64);
    Ok(beta_quantile(s + 1.0, n - s, gamma))
}

fn check_counts(successes: u64, trials: u64) -> Result<()> {
    if trials == 0 || successes > trials {
        return Err(AuditError::Domain {
            name: "successes",
            value: successes as f64,
            domain: "[0, trials] with trials >= 1",
        });
    }
    Ok(())
}

/// Fraction of `reps` simulated audits whose upper estimate covers `p_true`,
/// each repetition drawing `n` Bernoulli(`p_true`) errors from its own stream.
pub fn ci_coverage(method: CiMethod, p_true: f64, n: u64, gamma: f64, reps: u64, seed: u64) -> Result<f64> {
    check_probability("p_true", p_true)?;
    check_open_unit("gamma", gamma)?;
    let covered: Result<Vec<bool>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let errors = (0..n).filter(|_| rng.random::<f64>() < p_true).count() as u64;
            let est = ErrorEstimate::compute(method, errors as f64 / n as f64, gamma, n)?;
            Ok(est.upper >= p_true)
        })
        .collect();
    let covered = covered?;
    Ok(covered.iter().filter(|&&c| c).count() as f64 / reps as f64)
}
