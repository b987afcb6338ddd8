//! Simulated audits: canary bits go in, a mechanism runs, a decoder guesses.
//!
//! Canary `i` is a one-hot vector on coordinate `i` when `b_i = 1` and absent when
//! `b_i = 0`. The mechanism sees the sum of present canaries. Background data is
//! empty throughout.

use crate::bounds::CurveFamily;
use crate::error::{check_probability, AuditError, Result};
use crate::tradeoff::TradeoffCurve;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Decision threshold on a received coordinate; ties decode to 0.
pub const THRESHOLD: f64 = 0.5;

/// splitmix64 finalizer applied to `base ^ tag·φ`.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Input bits with the prior they were drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct BitVector {
    pub bits: Vec<bool>,
    pub prior_p: f64,
}

impl BitVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// `n` independent Bernoulli(`p`) bits.
pub fn generate_bits(n: usize, p: f64, seed: u64) -> Result<BitVector> {
    check_probability("p", p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..n).map(|_| rng.random::<f64>() < p).collect();
    Ok(BitVector { bits, prior_p: p })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    GaussianSum,
    LaplaceSum,
    RandomizedResponse,
    FlawedGaussian,
}

impl MechanismKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GaussianSum => "gaussian_sum",
            Self::LaplaceSum => "laplace_sum",
            Self::RandomizedResponse => "randomized_response",
            Self::FlawedGaussian => "flawed_gaussian",
        }
    }
}

/// A simulated mechanism.
///
/// `privacy_param` is `μ` for the Gaussian kinds, `μ_l` for Laplace and `ε` for
/// randomized response. A missing `dimension` means one coordinate per canary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    pub privacy_param: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_scale_override: Option<f64>,
}

impl MechanismSpec {
    fn base(kind: MechanismKind, privacy_param: f64) -> Self {
        Self {
            kind,
            privacy_param,
            delta: 0.0,
            dimension: None,
            noise_scale_override: None,
        }
    }

    pub fn gaussian(mu: f64) -> Self {
        Self::base(MechanismKind::GaussianSum, mu)
    }

    pub fn laplace(mu_l: f64) -> Self {
        Self::base(MechanismKind::LaplaceSum, mu_l)
    }

    pub fn randomized_response(eps: f64, delta: f64) -> Self {
        Self {
            delta,
            ..Self::base(MechanismKind::RandomizedResponse, eps)
        }
    }

    /// Claims `μ`-GDP but adds noise of standard deviation `actual_sigma`.
    pub fn flawed_gaussian(mu: f64, actual_sigma: f64) -> Self {
        Self {
            noise_scale_override: Some(actual_sigma),
            ..Self::base(MechanismKind::FlawedGaussian, mu)
        }
    }

    pub fn with_dimension(mut self, d: usize) -> Self {
        self.dimension = Some(d);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AuditError::InvalidSpec(msg));
        if !(self.privacy_param > 0.0 && self.privacy_param.is_finite()) {
            return bad(format!("privacy_param must be positive and finite, got {}", self.privacy_param));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        if self.dimension == Some(0) {
            return bad("dimension must be at least 1".into());
        }
        match (self.kind, self.noise_scale_override) {
            (MechanismKind::FlawedGaussian, None) => bad("flawed_gaussian needs noise_scale_override".into()),
            (MechanismKind::FlawedGaussian, Some(s)) if !(s >= 0.0 && s <= 1.0 / self.privacy_param) => bad(format!(
                "noise_scale_override {s} must lie in [0, 1/privacy_param = {}]",
                1.0 / self.privacy_param
            )),
            (MechanismKind::FlawedGaussian, _) => Ok(()),
            (_, Some(_)) => bad("noise_scale_override only applies to flawed_gaussian".into()),
            _ => Ok(()),
        }
    }

    /// Standard deviation (Gaussian) or scale (Laplace) of the injected noise.
    pub fn noise_scale(&self) -> f64 {
        match self.kind {
            MechanismKind::FlawedGaussian => self.noise_scale_override.unwrap_or(1.0 / self.privacy_param),
            _ => 1.0 / self.privacy_param,
        }
    }

    /// The curve the mechanism claims to satisfy.
    pub fn claimed_curve(&self) -> Result<TradeoffCurve> {
        match self.kind {
            MechanismKind::GaussianSum | MechanismKind::FlawedGaussian => TradeoffCurve::gaussian(self.privacy_param),
            MechanismKind::LaplaceSum => TradeoffCurve::laplace(self.privacy_param),
            MechanismKind::RandomizedResponse => TradeoffCurve::eps_delta(self.privacy_param, self.delta),
        }
    }

    /// Family the audit fits by default.
    pub fn natural_family(&self) -> CurveFamily {
        match self.kind {
            MechanismKind::GaussianSum | MechanismKind::FlawedGaussian => CurveFamily::Gaussian,
            MechanismKind::LaplaceSum => CurveFamily::Laplace,
            MechanismKind::RandomizedResponse => CurveFamily::EpsDelta { delta: self.delta },
        }
    }

    fn expect_kind(&self, kinds: &[MechanismKind]) -> Result<()> {
        self.validate()?;
        if kinds.contains(&self.kind) {
            Ok(())
        } else {
            Err(AuditError::InvalidSpec(format!("{} is not accepted here", self.kind.as_str())))
        }
    }
}

/// How canaries share mechanism runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrangement {
    /// One run, one coordinate per canary.
    OneRunMemoryless,
    /// One independent run per canary.
    MultiRun,
    /// One run with fewer coordinates than canaries.
    OneRunInterfering,
}

impl Arrangement {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OneRunMemoryless => "one_run_memoryless",
            Self::MultiRun => "multi_run",
            Self::OneRunInterfering => "one_run_interfering",
        }
    }
}

/// What the auditor observes.
#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Real(Vec<f64>),
    /// Randomized-response outputs in `{0, 1, 2, 3}`.
    Symbols(Vec<u8>),
}

impl Message {
    pub fn len(&self) -> usize {
        match self {
            Self::Real(v) => v.len(),
            Self::Symbols(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn laplace_sample<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    if rng.random::<bool>() {
        scale * e
    } else {
        -scale * e
    }
}

fn rr_symbol<R: Rng>(rng: &mut R, bit: bool, eps: f64, delta: f64) -> u8 {
    let keep = (1.0 - delta) / (1.0 + (-eps).exp());
    let flip = (1.0 - delta) / (1.0 + eps.exp());
    let u: f64 = rng.random();
    let b = bit as u8;
    if u < keep {
        b
    } else if u < keep + flip {
        1 - b
    } else {
        2 + b
    }
}

fn memoryless_dim(bits: &BitVector, spec: &MechanismSpec) -> Result<usize> {
    let d = spec.dimension.unwrap_or(bits.len());
    if d < bits.len() {
        return Err(AuditError::InvalidSpec(format!(
            "dimension {d} is smaller than the {} canaries; use the interfering arrangement",
            bits.len()
        )));
    }
    Ok(d)
}

fn one_hot_sum_plus<F: FnMut(&mut ChaCha8Rng) -> f64>(bits: &BitVector, d: usize, seed: u64, mut noise: F) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<f64> = (0..d).map(|_| noise(&mut rng)).collect();
    for (i, &b) in bits.bits.iter().enumerate() {
        if b {
            out[i % d] += 1.0;
        }
    }
    out
}

/// One run of the Gaussian sum mechanism with `σ = 1/μ`.
pub fn run_one_run_gaussian(bits: &BitVector, spec: &MechanismSpec, seed: u64) -> Result<Message> {
    spec.expect_kind(&[MechanismKind::GaussianSum])?;
    let d = memoryless_dim(bits, spec)?;
    Ok(gaussian_message(bits, d, spec.noise_scale(), seed))
}

fn gaussian_message(bits: &BitVector, d: usize, sigma: f64, seed: u64) -> Message {
    Message::Real(one_hot_sum_plus(bits, d, seed, |r| sigma * r.sample::<f64, _>(StandardNormal)))
}

/// One run of the Laplace sum mechanism with scale `1/μ_l`.
pub fn run_one_run_laplace(bits: &BitVector, spec: &MechanismSpec, seed: u64) -> Result<Message> {
    spec.expect_kind(&[MechanismKind::LaplaceSum])?;
    let d = memoryless_dim(bits, spec)?;
    let c = spec.noise_scale();
    Ok(Message::Real(one_hot_sum_plus(bits, d, seed, |r| laplace_sample(r, c))))
}

/// Per-bit randomized response; symbols 2 and 3 reveal the bit outright.
pub fn run_randomized_response(bits: &BitVector, eps: f64, delta: f64, seed: u64) -> Result<Message> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(AuditError::Domain {
            name: "eps",
            value: eps,
            domain: "(0, inf)",
        });
    }
    check_probability("delta", delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Message::Symbols(
        bits.bits.iter().map(|&b| rr_symbol(&mut rng, b, eps, delta)).collect(),
    ))
}

/// The Gaussian pipeline with the under-scaled noise of a flawed implementation.
pub fn run_flawed_gaussian(bits: &BitVector, spec: &MechanismSpec, seed: u64) -> Result<Message> {
    spec.expect_kind(&[MechanismKind::FlawedGaussian])?;
    let d = memoryless_dim(bits, spec)?;
    Ok(gaussian_message(bits, d, spec.noise_scale(), seed))
}

/// One independent run per canary. Run `i` draws from its own stream and only
/// the coordinate carrying canary `i` is kept.
pub fn run_multi_run(bits: &BitVector, spec: &MechanismSpec, seed: u64) -> Result<Message> {
    spec.validate()?;
    let scale = spec.noise_scale();
    let rng_for = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        rng
    };
    Ok(match spec.kind {
        MechanismKind::RandomizedResponse => Message::Symbols(
            bits.bits
                .par_iter()
                .enumerate()
                .map(|(i, &b)| rr_symbol(&mut rng_for(i), b, spec.privacy_param, spec.delta))
                .collect(),
        ),
        MechanismKind::LaplaceSum => Message::Real(
            bits.bits
                .par_iter()
                .enumerate()
                .map(|(i, &b)| b as u8 as f64 + laplace_sample(&mut rng_for(i), scale))
                .collect(),
        ),
        MechanismKind::GaussianSum | MechanismKind::FlawedGaussian => Message::Real(
            bits.bits
                .par_iter()
                .enumerate()
                .map(|(i, &b)| b as u8 as f64 + scale * rng_for(i).sample::<f64, _>(StandardNormal))
                .collect(),
        ),
    })
}

/// One Gaussian run on `d` coordinates; canary `i` lands on coordinate `i mod d`.
pub fn run_interfering_gaussian(bits: &BitVector, d: usize, spec: &MechanismSpec, seed: u64) -> Result<Message> {
    spec.expect_kind(&[MechanismKind::GaussianSum, MechanismKind::FlawedGaussian])?;
    if d == 0 || d > bits.len() {
        return Err(AuditError::InvalidSpec(format!(
            "interfering dimension must lie in [1, {}], got {d}",
            bits.len()
        )));
    }
    Ok(gaussian_message(bits, d, spec.noise_scale(), seed))
}

/// Guess every bit from the message.
///
/// Real messages are thresholded at 0.5. Under interference the threshold moves
/// up by the expected contribution `(⌈n/d⌉ - 1)·prior_p` of the other canaries
/// sharing a coordinate. Symbols are decoded by MAP.
pub fn decode(message: &Message, arrangement: Arrangement, n: usize, prior_p: f64) -> Result<Vec<bool>> {
    match message {
        Message::Symbols(s) => {
            if s.len() != n {
                return Err(AuditError::ShapeMismatch(format!("{} symbols for {n} bits", s.len())));
            }
            s.iter()
                .map(|&x| match x {
                    0 | 2 => Ok(false),
                    1 | 3 => Ok(true),
                    other => Err(AuditError::ShapeMismatch(format!("symbol {other} outside 0..=3"))),
                })
                .collect()
        }
        Message::Real(v) => match arrangement {
            Arrangement::OneRunMemoryless | Arrangement::MultiRun => {
                if v.len() < n || (arrangement == Arrangement::MultiRun && v.len() != n) {
                    return Err(AuditError::ShapeMismatch(format!("{} coordinates for {n} bits", v.len())));
                }
                Ok(v[..n].iter().map(|&x| x > THRESHOLD).collect())
            }
            Arrangement::OneRunInterfering => {
                let d = v.len();
                if d == 0 || d > n {
                    return Err(AuditError::ShapeMismatch(format!("{d} coordinates for {n} interfering bits")));
                }
                let t = THRESHOLD + (n.div_ceil(d) - 1) as f64 * prior_p;
                Ok((0..n).map(|i| v[i % d] > t).collect())
            }
        },
    }
}

/// Error tally stored alongside a transcript.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub errors: u64,
    pub n: u64,
}

/// Truth and guessed bits of one audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TranscriptFile", into = "TranscriptFile")]
pub struct AuditTranscript {
    pub truth: BitVector,
    pub guesses: Vec<bool>,
    pub arrangement: Arrangement,
    pub mechanism: MechanismSpec,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptFile {
    spec: MechanismSpec,
    seed: u64,
    arrangement: Arrangement,
    prior_p: f64,
    /// Base64 bitmap, least significant bit first.
    truth: String,
    guesses: String,
    counts: Counts,
}

impl From<AuditTranscript> for TranscriptFile {
    fn from(t: AuditTranscript) -> Self {
        let counts = t.counts();
        Self {
            spec: t.mechanism,
            seed: t.seed,
            arrangement: t.arrangement,
            prior_p: t.truth.prior_p,
            truth: encode_bitmap(&t.truth.bits),
            guesses: encode_bitmap(&t.guesses),
            counts,
        }
    }
}

impl TryFrom<TranscriptFile> for AuditTranscript {
    type Error = AuditError;

    fn try_from(f: TranscriptFile) -> Result<Self> {
        let n = f.counts.n as usize;
        let t = Self {
            truth: BitVector {
                bits: decode_bitmap(&f.truth, n)?,
                prior_p: f.prior_p,
            },
            guesses: decode_bitmap(&f.guesses, n)?,
            arrangement: f.arrangement,
            mechanism: f.spec,
            seed: f.seed,
        };
        if t.counts() != f.counts {
            return Err(AuditError::ShapeMismatch(format!(
                "recorded counts {:?} disagree with the bitmaps ({:?})",
                f.counts,
                t.counts()
            )));
        }
        Ok(t)
    }
}

fn encode_bitmap(bits: &[bool]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    B64.encode(bytes)
}

fn decode_bitmap(text: &str, n: usize) -> Result<Vec<bool>> {
    let bytes = B64
        .decode(text)
        .map_err(|e| AuditError::ShapeMismatch(format!("bad base64 bitmap: {e}")))?;
    if bytes.len() != n.div_ceil(8) {
        return Err(AuditError::ShapeMismatch(format!("bitmap of {} bytes for {n} bits", bytes.len())));
    }
    Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

impl AuditTranscript {
    pub fn new(truth: BitVector, guesses: Vec<bool>, arrangement: Arrangement, mechanism: MechanismSpec, seed: u64) -> Result<Self> {
        if truth.len() != guesses.len() {
            return Err(AuditError::ShapeMismatch(format!(
                "{} truth bits but {} guesses",
                truth.len(),
                guesses.len()
            )));
        }
        Ok(Self {
            truth,
            guesses,
            arrangement,
            mechanism,
            seed,
        })
    }

    pub fn n(&self) -> u64 {
        self.guesses.len() as u64
    }

    pub fn errors(&self) -> u64 {
        self.truth.bits.iter().zip(&self.guesses).filter(|(a, b)| a != b).count() as u64
    }

    pub fn counts(&self) -> Counts {
        Counts {
            errors: self.errors(),
            n: self.n(),
        }
    }

    /// Average bit error `ē`.
    pub fn e_bar(&self) -> f64 {
        if self.guesses.is_empty() {
            return 0.0;
        }
        self.errors() as f64 / self.n() as f64
    }

    /// `counts[truth][guess]`.
    pub fn confusion(&self) -> [[u64; 2]; 2] {
        let mut c = [[0u64; 2]; 2];
        for (&t, &g) in self.truth.bits.iter().zip(&self.guesses) {
            c[t as usize][g as usize] += 1;
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Draw bits, run the mechanism under `arrangement` and decode. Bits and noise
/// use separate streams derived from `seed`, so two arrangements run with the
/// same seed see the same bits.
pub fn simulate(spec: &MechanismSpec, arrangement: Arrangement, n: usize, prior_p: f64, seed: u64) -> Result<AuditTranscript> {
    spec.validate()?;
    if n == 0 {
        return Err(AuditError::InvalidSpec("need at least one canary".into()));
    }
    let bits = generate_bits(n, prior_p, derive_seed(seed, 0))?;
    let noise_seed = derive_seed(seed, 1);
    let message = match (arrangement, spec.kind) {
        (Arrangement::MultiRun, _) => run_multi_run(&bits, spec, noise_seed)?,
        (Arrangement::OneRunMemoryless, MechanismKind::GaussianSum) => run_one_run_gaussian(&bits, spec, noise_seed)?,
        (Arrangement::OneRunMemoryless, MechanismKind::FlawedGaussian) => run_flawed_gaussian(&bits, spec, noise_seed)?,
        (Arrangement::OneRunMemoryless, MechanismKind::LaplaceSum) => run_one_run_laplace(&bits, spec, noise_seed)?,
        (_, MechanismKind::RandomizedResponse) => {
            if arrangement == Arrangement::OneRunInterfering {
                return Err(AuditError::InvalidSpec("randomized response has no interfering form".into()));
            }
            run_randomized_response(&bits, spec.privacy_param, spec.delta, noise_seed)?
        }
        (Arrangement::OneRunInterfering, MechanismKind::LaplaceSum) => {
            return Err(AuditError::InvalidSpec("the interfering arrangement is Gaussian only".into()));
        }
        (Arrangement::OneRunInterfering, _) => {
            let d = spec.dimension.ok_or_else(|| AuditError::InvalidSpec("interfering arrangement needs a dimension".into()))?;
            run_interfering_gaussian(&bits, d, spec, noise_seed)?
        }
    };
    let guesses = decode(&message, arrangement, n, prior_p)?;
    AuditTranscript::new(bits, guesses, arrangement, spec.clone(), seed)
}
