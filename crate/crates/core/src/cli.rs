//! The `qconsist` command line.
//!
//! Every subcommand accepts `--config <path>`: a flat `key = value` file
//! whose keys are the subcommand's long flag names (`#` starts a comment).
//! Flags given on the command line take precedence over the file.

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{
    covering_bound, min_measurements_grfcq, min_measurements_qcs, min_measurements_relaxed, predicted_eps,
    rho_constants, BoundMode, BoundParams,
};
use crate::check::{run_check, Tier};
use crate::error::{Error, Result};
use crate::experiments::{
    bias_experiment, buffon_grid, decay_sweep, noise_power_check, relaxed_sweep, write_csv, ExperimentConfig, Mode,
    RunRecord,
};
use crate::quantizer::QuantizerSpec;
use crate::randkit::{derive_stream, Seed};
use crate::reconstruct::{linear_baseline, pocs_consistent, qcs_enumerate, PocsOptions};
use crate::sensing::{gen_ensemble, sample_signal, sense, SensingEnsemble, SignalModel};

/// Comma-separated list flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("'{p}': {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qconsist",
    version,
    about = "Dithered quantized random projections: consistent reconstruction, cell widths and bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed (unsigned 64-bit integer)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    threads: Option<usize>,
    /// Output path [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config file of `key = value` lines using the long flag names
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw an ensemble, sense a signal and print its codes as JSON
    Sense(SenseArgs),
    /// Recover a signal from its codes
    Reconstruct(ReconstructArgs),
    /// Strict consistency-cell widths over a sweep of M (CSV)
    Decay(SweepArgs),
    /// Widths of cells tolerating r inconsistent measurements (CSV)
    Relaxed(RelaxedArgs),
    /// Code discrepancy of a fixed offset as M grows (CSV)
    Bias(BiasArgs),
    /// Single-projection dumbbell probabilities against their bound (CSV)
    Buffon(BuffonArgs),
    /// Evaluate a sample-complexity formula or constant
    Bounds(BoundsArgs),
    /// Quantization noise energy against M·δ²/12 (CSV)
    Noise(NoiseArgs),
    /// Run the acceptance suite; exit status 2 if a criterion fails
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct SenseArgs {
    #[command(flatten)]
    common: Common,
    /// Number of measurements M
    #[arg(long, default_value_t = 64)]
    m: usize,
    /// Signal dimension N
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Sparsity K of the sampled signal [default: N, dense]
    #[arg(long)]
    k: Option<usize>,
    /// Quantizer resolution δ (signal amplitude units)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Signal to sense, comma-separated N values [default: sampled from the unit ball]
    #[arg(long)]
    signal: Option<List<f64>>,
    /// Write the ensemble as a binary dump to this path
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Cyclic projections onto the consistency cell
    Pocs,
    /// Exhaustive search over K-sparse supports
    Qcs,
    /// Least squares on the decoded values
    Linear,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[command(flatten)]
    common: Common,
    /// Load the ensemble from a binary dump instead of drawing one
    #[arg(long)]
    ensemble: Option<PathBuf>,
    /// Number of measurements M (ignored with --ensemble)
    #[arg(long, default_value_t = 64)]
    m: usize,
    /// Signal dimension N (ignored with --ensemble)
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Quantizer resolution δ (ignored with --ensemble)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Sparsity K for sampling and for --method qcs [default: N]
    #[arg(long)]
    k: Option<usize>,
    /// Codes to invert, comma-separated integers [default: codes of a sampled signal]
    #[arg(long)]
    codes: Option<List<i64>>,
    /// Reconstruction method
    #[arg(long, value_enum, default_value_t = Method::Pocs)]
    method: Method,
    /// Signal-ball radius R (signal amplitude units)
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Slab margin μ (signal amplitude units) [default: 1e-9·δ]
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum projection sweeps
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Maximum number of supports for --method qcs
    #[arg(long, default_value_t = 100_000)]
    cap: u128,
}

#[derive(Debug, Args)]
struct SweepKeys {
    /// Signal dimension N
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Sparsity K; K < N measures widths inside the signal support [default: N]
    #[arg(long)]
    k: Option<usize>,
    /// Measurement counts M, ascending, comma-separated
    #[arg(long, default_value = "32,64,128,256,512,1024")]
    m_list: List<usize>,
    /// Trials per M
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Random directions S per width estimate
    #[arg(long, default_value_t = 512)]
    directions: usize,
    /// Quantizer resolution δ (signal amplitude units)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Failure probability η used for the predicted proximity column
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Write per-M medians and fits as JSON to this path
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    keys: SweepKeys,
}

#[derive(Debug, Args)]
struct RelaxedArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    keys: SweepKeys,
    /// Tolerated inconsistent measurements r
    #[arg(long, default_value_t = 2)]
    r: usize,
}

#[derive(Debug, Args)]
struct BiasArgs {
    #[command(flatten)]
    common: Common,
    /// Signal dimension N
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Sparsity K [default: N]
    #[arg(long)]
    k: Option<usize>,
    /// Measurement counts M, ascending, comma-separated
    #[arg(long, default_value = "1000,10000")]
    m_list: List<usize>,
    /// Trials per M
    #[arg(long, default_value_t = 400)]
    trials: usize,
    /// Offset λ in units of δ
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    lambda: f64,
    /// Quantizer resolution δ (signal amplitude units)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Write per-M means and the fitted constant as JSON to this path
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuffonArgs {
    #[command(flatten)]
    common: Common,
    /// Dimensions N, comma-separated
    #[arg(long, default_value = "2,4,8")]
    dims: List<usize>,
    /// Separations α = ‖p − q‖/δ, comma-separated
    #[arg(long, default_value = "0.5,1,2,4")]
    alphas: List<f64>,
    /// Monte Carlo throws per cell
    #[arg(long, default_value_t = 100_000)]
    throws: u64,
    /// Write the per-cell table as JSON to this path
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundKind {
    /// Measurements for proximity ε₀ with unit-ball signals (relaxed when r > 0)
    Grfcq,
    /// Measurements for proximity ε₀ with K-sparse signals (relaxed when r > 0)
    Qcs,
    /// Proximity ε₀ that saturates the condition at M (K-sparse when --k is given)
    Eps,
    /// ρ̄, C_ρ and D_ρ for an inconsistency fraction ρ
    Rho,
    /// Covering number bound (3/s)^N
    Covering,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Formula to evaluate
    #[arg(long, value_enum, default_value_t = BoundKind::Grfcq)]
    mode: BoundKind,
    /// Signal dimension N
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Sparsity K (qcs and eps modes)
    #[arg(long)]
    k: Option<usize>,
    /// Target proximity ε₀ (signal amplitude units)
    #[arg(long, default_value_t = 0.5)]
    eps0: f64,
    /// Failure probability η
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Quantizer resolution δ (signal amplitude units)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Tolerated inconsistent measurements r
    #[arg(long, default_value_t = 0)]
    r: usize,
    /// Number of measurements M (eps mode)
    #[arg(long, default_value_t = 10_000)]
    m: u64,
    /// Inconsistency fraction ρ (rho mode)
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    /// Net radius s (covering mode)
    #[arg(long, default_value_t = 1.0)]
    s: f64,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[command(flatten)]
    common: Common,
    /// Signal dimension N
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Measurement counts M, ascending, comma-separated
    #[arg(long, default_value = "1000")]
    m_list: List<usize>,
    /// Trials per M
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Quantizer resolution δ (signal amplitude units)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Write per-M energy ratios and ζ̂ percentiles as JSON to this path
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Master seed (unsigned 64-bit integer)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for CSV artifacts and summary.json [default: none written]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config file of `key = value` lines using the long flag names
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reduced campaign sizes (the default)
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    /// Campaign sizes as stated for every criterion
    #[arg(long)]
    full: bool,
}

/// Parses `argv`, runs the subcommand and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn clap_exit(e: clap::Error) -> i32 {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => 1,
    }
}

fn command() -> clap::Command {
    // a repeated flag keeps its last value, so config pairs can be overridden
    Cli::command().mut_subcommands(|s| s.args_override_self(true))
}

fn try_parse(argv: &[OsString]) -> std::result::Result<Cli, clap::Error> {
    let matches = command().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

fn parse(argv: &[OsString]) -> std::result::Result<Cli, i32> {
    let first = try_parse(argv).map_err(clap_exit)?;
    let Some(path) = first.command.config_path() else {
        return Ok(first);
    };
    let sub = first.command.name();
    let merged = match config_args(path, sub) {
        Ok(extra) => {
            // config pairs go first so later command-line occurrences win
            let pos = argv.iter().position(|a| a == sub).expect("subcommand present");
            let mut merged: Vec<OsString> = argv[..=pos].to_vec();
            merged.extend(extra.into_iter().map(OsString::from));
            merged.extend(argv[pos + 1..].iter().cloned());
            merged
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Err(1);
        }
    };
    try_parse(&merged).map_err(clap_exit)
}

/// Reads a config file into flag arguments for subcommand `sub`.
fn config_args(path: &Path, sub: &str) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let cmd = command();
    let subcmd = cmd.find_subcommand(sub).expect("known subcommand");
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected `key = value`", path.display(), lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = subcmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config" && key != "help")
            .ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: unknown key '{key}' for `{sub}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                other => {
                    return Err(Error::Config(format!(
                        "{}:{}: '{key}' expects true or false, got '{other}'",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        } else {
            out.push(format!("--{key}"));
            out.push(value.to_string());
        }
    }
    Ok(out)
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sense(_) => "sense",
            Command::Reconstruct(_) => "reconstruct",
            Command::Decay(_) => "decay",
            Command::Relaxed(_) => "relaxed",
            Command::Bias(_) => "bias",
            Command::Buffon(_) => "buffon",
            Command::Bounds(_) => "bounds",
            Command::Noise(_) => "noise",
            Command::Check(_) => "check",
        }
    }

    fn config_path(&self) -> Option<&Path> {
        match self {
            Command::Sense(a) => a.common.config.as_deref(),
            Command::Reconstruct(a) => a.common.config.as_deref(),
            Command::Decay(a) => a.common.config.as_deref(),
            Command::Relaxed(a) => a.common.config.as_deref(),
            Command::Bias(a) => a.common.config.as_deref(),
            Command::Buffon(a) => a.common.config.as_deref(),
            Command::Bounds(a) => a.common.config.as_deref(),
            Command::Noise(a) => a.common.config.as_deref(),
            Command::Check(a) => a.config.as_deref(),
        }
    }

    fn threads(&self) -> Option<usize> {
        match self {
            Command::Sense(a) => a.common.threads,
            Command::Reconstruct(a) => a.common.threads,
            Command::Decay(a) => a.common.threads,
            Command::Relaxed(a) => a.common.threads,
            Command::Bias(a) => a.common.threads,
            Command::Buffon(a) => a.common.threads,
            Command::Bounds(a) => a.common.threads,
            Command::Noise(a) => a.common.threads,
            Command::Check(a) => a.threads,
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.command.threads() {
        if t == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Sense(a) => cmd_sense(a).map(|_| 0),
        Command::Reconstruct(a) => cmd_reconstruct(a).map(|_| 0),
        Command::Decay(a) => cmd_sweep(a.common, a.keys, None).map(|_| 0),
        Command::Relaxed(a) => cmd_sweep(a.common, a.keys, Some(a.r)).map(|_| 0),
        Command::Bias(a) => cmd_bias(a).map(|_| 0),
        Command::Buffon(a) => cmd_buffon(a).map(|_| 0),
        Command::Bounds(a) => cmd_bounds(a).map(|_| 0),
        Command::Noise(a) => cmd_noise(a).map(|_| 0),
        Command::Check(a) => cmd_check(a),
    })
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = open_out(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn emit_records(records: &[RunRecord], out: Option<&Path>) -> Result<()> {
    let mut w = open_out(out)?;
    write_csv(records, &mut w)?;
    w.flush()?;
    Ok(())
}

fn model(n: usize, k: Option<usize>) -> Result<SignalModel> {
    match k {
        Some(k) if k != n => SignalModel::sparse_ball(n, k),
        _ => SignalModel::unit_ball(n),
    }
}

#[derive(Serialize)]
struct SenseOutput {
    m: usize,
    n: usize,
    delta: f64,
    seed: u64,
    x: Vec<f64>,
    codes: Vec<i64>,
}

fn cmd_sense(a: SenseArgs) -> Result<()> {
    let seed = Seed(a.common.seed);
    let ensemble = gen_ensemble(a.m, a.n, QuantizerSpec::new(a.delta)?, derive_stream(seed, 0))?;
    let x = match a.signal {
        Some(List(x)) => x,
        None => sample_signal(model(a.n, a.k)?, &mut derive_stream(seed, 1).stream())?.x,
    };
    let codes = sense(&ensemble, &x)?.codes;
    if let Some(p) = &a.dump {
        let mut w = BufWriter::new(File::create(p)?);
        ensemble.write_to(&mut w)?;
        w.flush()?;
        eprintln!("wrote ensemble ({} x {}) to {}", a.m, a.n, p.display());
    }
    write_json(
        &SenseOutput {
            m: a.m,
            n: a.n,
            delta: a.delta,
            seed: a.common.seed,
            x,
            codes,
        },
        a.common.out.as_deref(),
    )
}

#[derive(Serialize)]
struct ReconstructOutput {
    method: String,
    x_star: Vec<f64>,
    iterations: Option<usize>,
    consistent: Option<bool>,
    residual: Option<f64>,
    support: Option<Vec<usize>>,
    /// `‖x* − x‖` when the signal was sampled here.
    error: Option<f64>,
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let seed = Seed(a.common.seed);
    let ensemble = match &a.ensemble {
        Some(p) => SensingEnsemble::read_from(io::BufReader::new(File::open(p)?))?,
        None => gen_ensemble(a.m, a.n, QuantizerSpec::new(a.delta)?, derive_stream(seed, 0))?,
    };
    let n = ensemble.n();
    let (codes, truth) = match a.codes {
        Some(List(c)) => (c, None),
        None => {
            let x = sample_signal(model(n, a.k)?, &mut derive_stream(seed, 1).stream())?.x;
            (sense(&ensemble, &x)?.codes, Some(x))
        }
    };
    let opts = PocsOptions {
        radius: a.radius,
        tol: a.tol,
        max_iter: a.max_iter,
        start: None,
    };
    let mut out = match a.method {
        Method::Pocs => {
            let r = pocs_consistent(&ensemble, &codes, &opts)?;
            ReconstructOutput {
                method: "pocs".into(),
                x_star: r.x_star,
                iterations: Some(r.iterations),
                consistent: Some(r.consistent),
                residual: Some(r.residual),
                support: None,
                error: None,
            }
        }
        Method::Qcs => {
            let k = a.k.ok_or_else(|| Error::Config("--method qcs needs --k".into()))?;
            let r = qcs_enumerate(&ensemble, &codes, k, &opts, a.cap)?;
            eprintln!("tried {} supports", r.supports_tried);
            ReconstructOutput {
                method: "qcs".into(),
                x_star: r.result.x_star,
                iterations: Some(r.result.iterations),
                consistent: Some(r.result.consistent),
                residual: Some(r.result.residual),
                support: Some(r.support),
                error: None,
            }
        }
        Method::Linear => ReconstructOutput {
            method: "linear".into(),
            x_star: linear_baseline(&ensemble, &codes)?,
            iterations: None,
            consistent: None,
            residual: None,
            support: None,
            error: None,
        },
    };
    out.error = truth.map(|x| {
        x.iter()
            .zip(&out.x_star)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    write_json(&out, a.common.out.as_deref())
}

fn sweep_config(common: &Common, keys: &SweepKeys, r: usize) -> ExperimentConfig {
    let k = keys.k.unwrap_or(keys.n);
    ExperimentConfig {
        mode: if r > 0 {
            Mode::Relaxed
        } else if k == keys.n {
            Mode::Grfcq
        } else {
            Mode::Qcs
        },
        n: keys.n,
        k,
        r,
        m_list: keys.m_list.0.clone(),
        trials: keys.trials,
        directions: keys.directions,
        delta: keys.delta,
        eta: keys.eta,
        seed: Seed(common.seed),
        ..Default::default()
    }
}

fn cmd_sweep(common: Common, keys: SweepKeys, r: Option<usize>) -> Result<()> {
    let cfg = sweep_config(&common, &keys, r.unwrap_or(0));
    let start = Instant::now();
    let rep = match r {
        Some(_) => relaxed_sweep(&cfg)?,
        None => decay_sweep(&cfg)?,
    };
    eprintln!(
        "{}: {} trials over {} values of M in {:.1}s",
        if r.is_some() { "relaxed" } else { "decay" },
        rep.records.len(),
        cfg.m_list.len(),
        start.elapsed().as_secs_f64()
    );
    emit_records(&rep.records, common.out.as_deref())?;
    if let Some(p) = &keys.summary {
        write_json(&serde_json::json!({ "config": cfg, "report": rep }), Some(p))?;
    }
    Ok(())
}

fn cmd_bias(a: BiasArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        mode: Mode::Bias,
        n: a.n,
        k: a.k.unwrap_or(a.n),
        m_list: a.m_list.0,
        trials: a.trials,
        lambda: a.lambda,
        delta: a.delta,
        seed: Seed(a.common.seed),
        ..Default::default()
    };
    let start = Instant::now();
    let rep = bias_experiment(&cfg)?;
    eprintln!(
        "bias: {} trials in {:.1}s",
        rep.records.len(),
        start.elapsed().as_secs_f64()
    );
    emit_records(&rep.records, a.common.out.as_deref())?;
    if let Some(p) = &a.summary {
        write_json(&serde_json::json!({ "config": cfg, "report": rep }), Some(p))?;
    }
    Ok(())
}

fn cmd_noise(a: NoiseArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        mode: Mode::Noise,
        n: a.n,
        k: a.n,
        m_list: a.m_list.0,
        trials: a.trials,
        delta: a.delta,
        seed: Seed(a.common.seed),
        ..Default::default()
    };
    let start = Instant::now();
    let rep = noise_power_check(&cfg)?;
    eprintln!(
        "noise: {} trials in {:.1}s",
        rep.records.len(),
        start.elapsed().as_secs_f64()
    );
    emit_records(&rep.records, a.common.out.as_deref())?;
    if let Some(p) = &a.summary {
        write_json(&serde_json::json!({ "config": cfg, "report": rep }), Some(p))?;
    }
    Ok(())
}

fn cmd_buffon(a: BuffonArgs) -> Result<()> {
    let start = Instant::now();
    let rep = buffon_grid(&a.dims.0, &a.alphas.0, a.throws, Seed(a.common.seed))?;
    eprintln!(
        "buffon: {} cells in {:.1}s",
        rep.cells.len(),
        start.elapsed().as_secs_f64()
    );
    emit_records(&rep.records, a.common.out.as_deref())?;
    if let Some(p) = &a.summary {
        write_json(&rep, Some(p))?;
    }
    Ok(())
}

fn cmd_bounds(a: BoundsArgs) -> Result<()> {
    let text = match a.mode {
        BoundKind::Grfcq | BoundKind::Qcs => {
            let mode = if a.mode == BoundKind::Grfcq {
                BoundMode::Grfcq
            } else {
                BoundMode::Qcs
            };
            let k = match mode {
                BoundMode::Grfcq => 0,
                BoundMode::Qcs => a.k.ok_or_else(|| Error::Config("--mode qcs needs --k".into()))?,
            };
            let m = if a.r > 0 {
                let p = BoundParams {
                    epsilon0: a.eps0,
                    eta: a.eta,
                    delta: a.delta,
                    n: a.n,
                    k,
                    r: a.r,
                };
                min_measurements_relaxed(&p, mode)?
            } else if mode == BoundMode::Grfcq {
                min_measurements_grfcq(a.eps0, a.eta, a.delta, a.n)?
            } else {
                min_measurements_qcs(a.eps0, a.eta, a.delta, a.n, k)?
            };
            m.to_string()
        }
        BoundKind::Eps => {
            let mode = if a.k.is_some() {
                BoundMode::Qcs
            } else {
                BoundMode::Grfcq
            };
            predicted_eps(a.m, a.eta, a.delta, a.n, a.k, mode)?.to_string()
        }
        BoundKind::Rho => {
            let c = rho_constants(a.rho)?;
            format!("rho_bar = {}\nC_rho = {}\nD_rho = {}", c.rho_bar, c.c_rho, c.d_rho)
        }
        BoundKind::Covering => covering_bound(a.s, a.n)?.to_string(),
    };
    let mut w = open_out(a.common.out.as_deref())?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<i32> {
    let tier = if a.full { Tier::Full } else { Tier::Quick };
    eprintln!(
        "running the {} acceptance suite with seed {}",
        if a.full { "full" } else { "quick" },
        a.seed
    );
    let mut stdout = io::stdout().lock();
    let report = run_check(tier, Seed(a.seed), a.out.as_deref(), &mut |o| {
        let _ = writeln!(stdout, "{}", o.line());
        let _ = stdout.flush();
    })?;
    let failed = report.outcomes.iter().filter(|o| !o.passed).count();
    eprintln!(
        "{} of {} criteria passed",
        report.outcomes.len() - failed,
        report.outcomes.len()
    );
    if let Some(dir) = &a.out {
        eprintln!("artifacts written to {}", dir.display());
    }
    Ok(if failed == 0 { 0 } else { 2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!("1, 2,3".parse::<List<usize>>().unwrap(), List(vec![1, 2, 3]));
        assert!("1,x".parse::<List<usize>>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        fs::write(&p, "# sweep\nn = 4\nm_list = 8,16 # inline\n\ntrials=3\n").unwrap();
        assert_eq!(
            config_args(&p, "decay").unwrap(),
            ["--n", "4", "--m-list", "8,16", "--trials", "3"]
        );
        fs::write(&p, "bogus = 1\n").unwrap();
        assert!(matches!(config_args(&p, "decay"), Err(Error::Config(_))));
        fs::write(&p, "quick = true\n").unwrap();
        assert_eq!(config_args(&p, "check").unwrap(), ["--quick"]);
        fs::write(&p, "config = other\n").unwrap();
        assert!(config_args(&p, "decay").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        fs::write(&p, "n = 4\ntrials = 3\n").unwrap();
        let argv: Vec<OsString> = ["qconsist", "decay", "--config", p.to_str().unwrap(), "--trials", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        let cli = parse(&argv).unwrap();
        let Command::Decay(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.keys.n, 4);
        assert_eq!(a.keys.trials, 9);
    }
}
