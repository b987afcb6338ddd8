use thiserror::Error;

/// Errors raised by the audit toolkit.
#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("density does not integrate to one (mass {mass:.9} over its support)")]
    NotNormalized { mass: f64 },

    #[error("invalid mechanism spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("arrangement {0:?} is not valid for this estimator")]
    Arrangement(crate::channel::Arrangement),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AuditError>;

/// Check `lo <= value <= hi`, rejecting NaN.
pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(AuditError::Domain {
            name,
            value,
            domain: domain_label(lo, hi),
        })
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    check_range(name, value, 0.0, 1.0)
}

/// Confidence levels must lie strictly inside (0, 1).
pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(AuditError::Domain {
            name,
            value,
            domain: "(0, 1)",
        })
    }
}

pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<f64> {
    check_range(name, value, 0.0, f64::INFINITY)
}

fn domain_label(lo: f64, hi: f64) -> &'static str {
    match (lo, hi) {
        (l, h) if l == 0.0 && h == 1.0 => "[0, 1]",
        (l, h) if l == 0.0 && h == 0.5 => "[0, 1/2]",
        (l, h) if l == 0.0 && h.is_infinite() => "[0, inf)",
        _ => "the documented range",
    }
}
