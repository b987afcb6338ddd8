//! From observed bit errors to privacy lower bounds.
//!
//! The pipeline turns an upper confidence limit on the bit-error floor into a
//! fitted curve of a declared family, then converts that curve to `(ε, δ)`.

use crate::channel::{Arrangement, AuditTranscript};
use crate::error::{check_probability, AuditError, Result};
use crate::estimate::{clopper_pearson_upper, CiMethod, CiStatus, ErrorEstimate};
use crate::limits::bit_error_floor;
use crate::optimize::{golden_section_max, linspace};
use crate::tradeoff::TradeoffCurve;
use serde::{Deserialize, Serialize};

/// Initial upper end of the ε search.
pub const EPS_BRACKET: f64 = 64.0;
/// Beyond this the conversion reports infinity.
const EPS_CAP: f64 = 512.0;
const EPS_TOL: f64 = 1e-10;
/// Slack on `f(x) - (1 - δ - e^ε x) >= 0`.
const FEASIBILITY_TOL: f64 = 1e-12;
const GEOMETRIC_POINTS: usize = 2048;
const UNIFORM_POINTS: usize = 2048;
const X_TOL: f64 = 1e-15;

/// Largest family parameter tried when fitting a floor.
pub const THETA_MAX: f64 = 50.0;
const THETA_TOL: f64 = 1e-9;

/// Parametric family used to turn an error floor into a curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveFamily {
    /// `G_μ`, fitted over `μ`.
    Gaussian,
    /// Laplace location test, fitted over `μ_l`.
    Laplace,
    /// `f_{ε,δ}` with `δ` held fixed, fitted over `ε`.
    EpsDelta { delta: f64 },
}

impl CurveFamily {
    pub fn curve(&self, theta: f64) -> Result<TradeoffCurve> {
        match *self {
            Self::Gaussian => TradeoffCurve::gaussian(theta),
            Self::Laplace => TradeoffCurve::laplace(theta),
            Self::EpsDelta { delta } => TradeoffCurve::eps_delta(theta, delta),
        }
    }

    /// Floor of the family member with parameter 0.
    pub fn vacuous_floor(&self) -> f64 {
        match *self {
            Self::Gaussian | Self::Laplace => 0.5,
            Self::EpsDelta { delta } => 0.5 * (1.0 - delta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Laplace => "laplace",
            Self::EpsDelta { .. } => "eps_delta",
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::EpsDelta { delta } = *self {
            check_probability("family.delta", delta)?;
        }
        Ok(())
    }
}

/// Parameter of the curve whose floor matches a target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedParam {
    pub theta: f64,
    /// The target lies below every floor the family reaches on `[0, THETA_MAX]`.
    pub saturated: bool,
}

/// Outcome of one audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub delta: f64,
    pub gamma: f64,
    pub n: u64,
    pub e_bar: f64,
    pub ci_method: CiMethod,
    pub ci_upper: f64,
    pub ci_status: CiStatus,
    pub family: CurveFamily,
    pub fitted_param: f64,
    pub saturated: bool,
    #[serde(with = "inf_float")]
    pub eps_lower: f64,
    pub vacuous: bool,
}

/// `ε = inf{a : f(x) >= 1 - δ - e^a x for all x}`, or infinity when no finite
/// `a` works.
pub fn fdp_to_eps(curve: &TradeoffCurve, delta: f64) -> Result<f64> {
    check_probability("delta", delta)?;
    if delta >= 1.0 {
        return Ok(0.0);
    }
    if delta < 1.0 - curve.eval(0.0) {
        return Ok(f64::INFINITY);
    }
    if let TradeoffCurve::Gaussian { params } = curve {
        if params.mu > 0.0 && delta == 0.0 {
            return Ok(f64::INFINITY);
        }
    }

    let mut xs = vec![0.0];
    let lo_exp = -18.0f64;
    let hi_exp = -3.0f64;
    xs.extend((0..GEOMETRIC_POINTS).map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / GEOMETRIC_POINTS as f64)));
    xs.extend(linspace(1e-3, 1.0, UNIFORM_POINTS));
    xs.extend(curve.kinks());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let fs: Vec<f64> = xs.iter().map(|&x| curve.eval(x)).collect();

    let feasible = |a: f64| {
        let slope = a.exp();
        let gap = |x: f64, fx: f64| fx - (1.0 - delta - slope * x);
        let (best, _) = xs
            .iter()
            .zip(&fs)
            .map(|(&x, &fx)| gap(x, fx))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, g)| if g < acc.1 { (i, g) } else { acc });
        let lo = xs[best.saturating_sub(1)];
        let hi = xs[(best + 1).min(xs.len() - 1)];
        let grid_min = gap(xs[best], fs[best]);
        let refined = if hi > lo {
            -golden_section_max(|x| -gap(x, curve.eval(x)), lo, hi, X_TOL * hi.max(1e-300)).1
        } else {
            grid_min
        };
        grid_min.min(refined) >= -FEASIBILITY_TOL
    };

    if feasible(0.0) {
        return Ok(0.0);
    }
    let mut hi = EPS_BRACKET;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > EPS_CAP {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > EPS_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.max(0.0))
}

/// Family parameter whose bit-error floor equals `p_floor`, by bisection.
pub fn floor_to_param(family: CurveFamily, p_floor: f64) -> Result<FittedParam> {
    check_probability("p_floor", p_floor)?;
    family.validate()?;
    if p_floor >= family.vacuous_floor() {
        return Ok(FittedParam {
            theta: 0.0,
            saturated: false,
        });
    }
    let floor_at = |theta: f64| -> Result<f64> { Ok(bit_error_floor(&family.curve(theta)?)) };
    if floor_at(THETA_MAX)? > p_floor {
        return Ok(FittedParam {
            theta: THETA_MAX,
            saturated: true,
        });
    }
    let (mut lo, mut hi) = (0.0, THETA_MAX);
    while hi - lo > THETA_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if floor_at(mid)? > p_floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FittedParam {
        theta: 0.5 * (lo + hi),
        saturated: false,
    })
}

/// Confidence limit, family fit and `(ε, δ)` conversion in one call.
pub fn privacy_lower_bound(
    delta: f64,
    e_bar: f64,
    gamma: f64,
    n: u64,
    family: CurveFamily,
    ci_method: CiMethod,
) -> Result<AuditResult> {
    check_probability("delta", delta)?;
    family.validate()?;
    let est = ErrorEstimate::compute(ci_method, e_bar, gamma, n)?;
    let ci_upper = est.upper;
    let (fitted, eps_lower) = if ci_upper >= family.vacuous_floor() {
        (
            FittedParam {
                theta: 0.0,
                saturated: false,
            },
            0.0,
        )
    } else {
        let fit = floor_to_param(family, ci_upper)?;
        let eps = if fit.theta == 0.0 {
            0.0
        } else {
            fdp_to_eps(&family.curve(fit.theta)?, delta)?
        };
        (fit, eps)
    };
    Ok(AuditResult {
        delta,
        gamma,
        n,
        e_bar,
        ci_method,
        ci_upper,
        ci_status: est.status,
        family,
        fitted_param: fitted.theta,
        saturated: fitted.saturated,
        eps_lower,
        vacuous: eps_lower == 0.0,
    })
}

/// Classical lower bound from false-positive and false-negative counts, using
/// one-sided Clopper–Pearson upper limits at level `gamma` on both rates.
pub fn testing_region_eps(false_pos: u64, negatives: u64, false_neg: u64, positives: u64, delta: f64, gamma: f64) -> Result<f64> {
    check_probability("delta", delta)?;
    if negatives == 0 || positives == 0 {
        return Err(AuditError::ShapeMismatch(
            "both classes need at least one trial".into(),
        ));
    }
    let alpha = clopper_pearson_upper(false_pos, negatives, gamma)?;
    let beta = clopper_pearson_upper(false_neg, positives, gamma)?;
    let term = |num: f64, den: f64| if num > 0.0 && den > 0.0 { (num / den).ln() } else { f64::NEG_INFINITY };
    Ok(term(1.0 - delta - alpha, beta)
        .max(term(1.0 - delta - beta, alpha))
        .max(0.0))
}

/// [`testing_region_eps`] on a transcript of independent runs.
pub fn testing_region_baseline(transcript: &AuditTranscript, delta: f64, gamma: f64) -> Result<f64> {
    if transcript.arrangement == Arrangement::OneRunInterfering {
        return Err(AuditError::Arrangement(transcript.arrangement));
    }
    let c = transcript.confusion();
    testing_region_eps(c[0][1], c[0][0] + c[0][1], c[1][0], c[1][0] + c[1][1], delta, gamma)
}

/// Serializes positive infinity as the string `"inf"`.
pub mod inf_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}
