//! Experiment orchestration: configs, seeded sweeps and the flawed-mechanism check.

use crate::bounds::{fdp_to_eps, inf_float, privacy_lower_bound, CurveFamily};
use crate::channel::{derive_seed, simulate, Arrangement, MechanismKind, MechanismSpec};
use crate::error::{AuditError, Result};
use crate::estimate::CiMethod;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DEFAULT_GAMMA: f64 = 0.95;
pub const DEFAULT_DELTA: f64 = 1e-5;

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_methods() -> Vec<CiMethod> {
    vec![CiMethod::Advanced]
}

fn default_arrangement() -> Arrangement {
    Arrangement::OneRunMemoryless
}

fn default_prior() -> f64 {
    0.5
}

/// A sweep over `n_values × repetitions`, read from a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanism: MechanismSpec,
    pub n_values: Vec<u64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub repetitions: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_methods")]
    pub ci_methods: Vec<CiMethod>,
    /// Defaults to the mechanism's own family.
    #[serde(default)]
    pub family: Option<CurveFamily>,
    #[serde(default = "default_arrangement")]
    pub arrangement: Arrangement,
    #[serde(default = "default_prior")]
    pub prior_p: f64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn config_err(path: &str, message: impl Into<String>) -> AuditError {
    AuditError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parse and validate. Schema errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.mechanism.validate().map_err(|e| config_err("mechanism", e.to_string()))?;
        if self.n_values.is_empty() {
            return Err(config_err("n_values", "must not be empty"));
        }
        if let Some(i) = self.n_values.iter().position(|&n| n == 0) {
            return Err(config_err(&format!("n_values[{i}]"), "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(config_err("repetitions", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(config_err("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(config_err("delta", format!("must lie in [0, 1], got {}", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.prior_p) {
            return Err(config_err("prior_p", format!("must lie in [0, 1], got {}", self.prior_p)));
        }
        if self.ci_methods.is_empty() {
            return Err(config_err("ci_methods", "must not be empty"));
        }
        if let Some(CurveFamily::EpsDelta { delta }) = self.family {
            if !(0.0..=1.0).contains(&delta) {
                return Err(config_err("family.delta", format!("must lie in [0, 1], got {delta}")));
            }
        }
        if self.arrangement == Arrangement::OneRunInterfering {
            match self.mechanism.dimension {
                None => return Err(config_err("mechanism.dimension", "required for the interfering arrangement")),
                Some(d) => {
                    if let Some(i) = self.n_values.iter().position(|&n| (d as u64) > n) {
                        return Err(config_err(&format!("n_values[{i}]"), format!("smaller than dimension {d}")));
                    }
                }
            }
        } else if self.arrangement == Arrangement::OneRunMemoryless {
            if let Some(d) = self.mechanism.dimension {
                if let Some(i) = self.n_values.iter().position(|&n| n > d as u64) {
                    return Err(config_err(&format!("n_values[{i}]"), format!("exceeds dimension {d}")));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> CurveFamily {
        self.family.unwrap_or_else(|| self.mechanism.natural_family())
    }
}

/// Seed for repetition `rep` at size `n`: `base_seed` plus a fixed 64-bit mix of
/// `(n, rep)`.
pub fn job_seed(base_seed: u64, n: u64, rep: u64) -> u64 {
    base_seed.wrapping_add(derive_seed(derive_seed(n, 0), rep))
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mechanism: MechanismKind,
    pub param: f64,
    pub n: u64,
    pub seed: u64,
    pub arrangement: Arrangement,
    pub ci_method: CiMethod,
    pub e_bar: f64,
    pub ci_upper: f64,
    pub eps_lower: f64,
    pub eps_claimed: f64,
    pub vacuous: bool,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "mechanism",
    "param",
    "n",
    "seed",
    "arrangement",
    "ci_method",
    "e_bar",
    "ci_upper",
    "eps_lower",
    "eps_claimed",
    "vacuous",
];

/// Run every `(n, repetition)` job and return rows ordered by `n`, repetition
/// and the config's method order. `jobs` caps the worker count; the output does
/// not depend on it.
pub fn run_sweep(config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let family = config.family();
    let eps_claimed = fdp_to_eps(&config.mechanism.claimed_curve()?, config.delta)?;
    let tasks: Vec<(u64, u64)> = config
        .n_values
        .iter()
        .flat_map(|&n| (0..config.repetitions).map(move |r| (n, r)))
        .collect();

    let run = || -> Result<Vec<Vec<SweepRow>>> {
        tasks
            .par_iter()
            .map(|&(n, rep)| {
                let seed = job_seed(config.base_seed, n, rep);
                let t = simulate(&config.mechanism, config.arrangement, n as usize, config.prior_p, seed)?;
                let e_bar = t.e_bar();
                config
                    .ci_methods
                    .iter()
                    .map(|&m| {
                        let r = privacy_lower_bound(config.delta, e_bar, config.gamma, n, family, m)?;
                        Ok(SweepRow {
                            mechanism: config.mechanism.kind,
                            param: config.mechanism.privacy_param,
                            n,
                            seed,
                            arrangement: config.arrangement,
                            ci_method: m,
                            e_bar,
                            ci_upper: r.ci_upper,
                            eps_lower: r.eps_lower,
                            eps_claimed,
                            vacuous: r.vacuous,
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let nested = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| AuditError::Io(std::io::Error::other(e)))?
            .install(run)?,
        None => run()?,
    };
    Ok(nested.into_iter().flatten().collect())
}

fn csv_err(e: csv::Error) -> AuditError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => AuditError::Io(io),
            _ => unreachable!(),
        }
    } else {
        AuditError::Io(std::io::Error::other(e))
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

/// Outcome of auditing a mechanism against the curve it claims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claimed_mu: f64,
    pub actual_noise: f64,
    pub n: u64,
    pub seed: u64,
    pub e_bar: f64,
    pub ci_upper: f64,
    pub fitted_mu: f64,
    pub saturated: bool,
    #[serde(with = "inf_float")]
    pub eps_lower: f64,
    #[serde(with = "inf_float")]
    pub eps_claimed: f64,
    pub violated: bool,
}

/// Simulate a Gaussian mechanism claiming `claimed`'s μ but adding noise of
/// scale `actual_noise`, then audit it with the Advanced CI against `G_μ`.
pub fn detect_violation(claimed: &MechanismSpec, actual_noise: f64, n: u64, gamma: f64, delta: f64, seed: u64) -> Result<Verdict> {
    if !matches!(claimed.kind, MechanismKind::GaussianSum | MechanismKind::FlawedGaussian) {
        return Err(AuditError::InvalidSpec("violation detection needs a Gaussian claim".into()));
    }
    let mu = claimed.privacy_param;
    let actual = MechanismSpec::flawed_gaussian(mu, actual_noise);
    actual.validate()?;
    let t = simulate(&actual, Arrangement::OneRunMemoryless, n as usize, 0.5, seed)?;
    let r = privacy_lower_bound(delta, t.e_bar(), gamma, n, CurveFamily::Gaussian, CiMethod::Advanced)?;
    let eps_claimed = fdp_to_eps(&actual.claimed_curve()?, delta)?;
    Ok(Verdict {
        claimed_mu: mu,
        actual_noise,
        n,
        seed,
        e_bar: r.e_bar,
        ci_upper: r.ci_upper,
        fitted_mu: r.fitted_param,
        saturated: r.saturated,
        eps_lower: r.eps_lower,
        eps_claimed,
        violated: r.eps_lower > eps_claimed,
    })
}
