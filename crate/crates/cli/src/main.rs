use bitaudit::bounds::{testing_region_baseline, inf_float, privacy_lower_bound, CurveFamily};
use bitaudit::channel::{simulate, Arrangement, AuditTranscript, MechanismSpec};
use bitaudit::estimate::CiMethod;
use bitaudit::harness::{detect_violation, run_sweep, write_csv, ExperimentConfig, DEFAULT_DELTA, DEFAULT_GAMMA};
use bitaudit::limits::LimitProfile;
use bitaudit::{AuditError, Result, TradeoffCurve};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Privacy audits by bit transmission.
#[derive(Parser)]
#[command(name = "bitaudit", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Audit a transcript file, or simulate a mechanism and audit the result.
    Audit(AuditArgs),
    /// Run a sweep config and write CSV.
    Sweep(SweepArgs),
    /// Mutual-information bound, error floor and capacity of a curve.
    Limits(LimitsArgs),
    /// Audit a Gaussian mechanism whose noise is smaller than it claims.
    Detect(DetectArgs),
}

#[derive(Args)]
struct AuditArgs {
    /// Transcript JSON to audit.
    #[arg(long, conflicts_with = "mechanism", required_unless_present = "mechanism")]
    transcript: Option<PathBuf>,
    /// Mechanism spec as a JSON file or inline JSON object.
    #[arg(long)]
    mechanism: Option<String>,
    /// Canaries to simulate.
    #[arg(long, default_value_t = 10_000, requires = "mechanism")]
    n: u64,
    #[arg(long, default_value_t = 0, requires = "mechanism")]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ArrangementArg::OneRunMemoryless, requires = "mechanism")]
    arrangement: ArrangementArg,
    /// Prior of the canary bits.
    #[arg(long, default_value_t = 0.5, requires = "mechanism")]
    prior: f64,
    /// Also write the simulated transcript here.
    #[arg(long, requires = "mechanism")]
    save_transcript: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Advanced)]
    method: MethodArg,
    /// Family to fit; defaults to the mechanism's own. `eps-delta` holds δ at `--delta`.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Report the classical Clopper–Pearson bound from FP/FN counts instead.
    #[arg(long)]
    baseline: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV destination; overrides `output_path` in the config. `-` is stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LimitsArgs {
    /// Curve as a JSON file or inline JSON object.
    #[arg(long)]
    curve: String,
    /// Prior of the input bit.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
}

#[derive(Args)]
struct DetectArgs {
    /// Claimed GDP parameter.
    #[arg(long, default_value_t = 0.8)]
    mu: f64,
    /// Noise standard deviation actually added.
    #[arg(long, default_value_t = 0.125)]
    actual_noise: f64,
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArrangementArg {
    OneRunMemoryless,
    MultiRun,
    OneRunInterfering,
}

impl From<ArrangementArg> for Arrangement {
    fn from(a: ArrangementArg) -> Self {
        match a {
            ArrangementArg::OneRunMemoryless => Arrangement::OneRunMemoryless,
            ArrangementArg::MultiRun => Arrangement::MultiRun,
            ArrangementArg::OneRunInterfering => Arrangement::OneRunInterfering,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Advanced,
    Hoeffding,
    ClopperPearson,
}

impl From<MethodArg> for CiMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Advanced => CiMethod::Advanced,
            MethodArg::Hoeffding => CiMethod::Hoeffding,
            MethodArg::ClopperPearson => CiMethod::ClopperPearson,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Laplace,
    EpsDelta,
}

fn read_json_arg(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        Ok(std::fs::read_to_string(arg)?)
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn audit(a: AuditArgs) -> Result<()> {
    let transcript = match (&a.transcript, &a.mechanism) {
        (Some(path), _) => AuditTranscript::read(path)?,
        (None, Some(m)) => {
            let spec: MechanismSpec = serde_json::from_str(&read_json_arg(m)?)?;
            let t = simulate(&spec, a.arrangement.into(), a.n as usize, a.prior, a.seed)?;
            if let Some(p) = &a.save_transcript {
                t.write(p)?;
            }
            t
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    if a.baseline {
        #[derive(serde::Serialize)]
        struct Baseline {
            method: &'static str,
            n: u64,
            delta: f64,
            gamma: f64,
            #[serde(with = "inf_float")]
            eps_lower: f64,
        }
        let eps = testing_region_baseline(&transcript, a.delta, a.gamma)?;
        return print_json(&Baseline {
            method: "testing_region",
            n: transcript.n(),
            delta: a.delta,
            gamma: a.gamma,
            eps_lower: eps,
        });
    }
    let family = match a.family {
        None => transcript.mechanism.natural_family(),
        Some(FamilyArg::Gaussian) => CurveFamily::Gaussian,
        Some(FamilyArg::Laplace) => CurveFamily::Laplace,
        Some(FamilyArg::EpsDelta) => CurveFamily::EpsDelta { delta: a.delta },
    };
    let r = privacy_lower_bound(a.delta, transcript.e_bar(), a.gamma, transcript.n(), family, a.method.into())?;
    print_json(&r)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let rows = run_sweep(&cfg, a.jobs)?;
    match a.output.or(cfg.output_path) {
        Some(p) if p != Path::new("-") => write_csv(&rows, std::fs::File::create(&p)?),
        _ => write_csv(&rows, std::io::stdout().lock()),
    }
}

fn limits(a: LimitsArgs) -> Result<()> {
    let curve = TradeoffCurve::from_json(&read_json_arg(&a.curve)?)?;
    print_json(&LimitProfile::compute(&curve, a.p)?)
}

fn detect(a: DetectArgs) -> Result<()> {
    let v = detect_violation(&MechanismSpec::gaussian(a.mu), a.actual_noise, a.n, a.gamma, a.delta, a.seed)?;
    print_json(&v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Audit(a) => audit(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Limits(a) => limits(a),
        Cmd::Detect(a) => detect(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                AuditError::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
