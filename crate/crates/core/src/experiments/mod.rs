//! Monte Carlo campaigns and their CSV / JSON artifacts.
//!
//! Every trial draws its randomness from `derive_stream(master, index)`,
//! where `index` depends only on the position of `(M, trial)` in the
//! sweep, so results do not depend on the thread count and relaxed sweeps
//! at different `r` see identical ensembles and signals.

mod bias;
mod lemma;
mod noise;
mod scan;
mod sweep;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::randkit::{derive_stream, Seed};

pub use bias::{bias_experiment, BiasReport, BiasRow};
pub use lemma::{buffon_grid, BuffonCell, BuffonReport};
pub use noise::{noise_power_check, NoiseReport};
pub use scan::{theorem_violation_scan, ScanReport};
pub use sweep::{decay_sweep, relaxed_sweep, MedianRow, SweepReport};

/// Exact CSV header of every experiment artifact.
pub const CSV_HEADER: &str = "mode,N,K,M,r,trial,seed,value,baseline,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Grfcq,
    Qcs,
    Relaxed,
    Bias,
    Buffon,
    Noise,
    Scan,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Grfcq => "grfcq",
            Mode::Qcs => "qcs",
            Mode::Relaxed => "relaxed",
            Mode::Bias => "bias",
            Mode::Buffon => "buffon",
            Mode::Noise => "noise",
            Mode::Scan => "scan",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "grfcq" => Mode::Grfcq,
            "qcs" => Mode::Qcs,
            "relaxed" => Mode::Relaxed,
            "bias" => Mode::Bias,
            "buffon" => Mode::Buffon,
            "noise" => Mode::Noise,
            "scan" => Mode::Scan,
            other => return Err(Error::Config(format!("unknown mode '{other}'"))),
        })
    }
}

/// Parameters shared by all campaigns; each one reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    /// Sparsity; `k == n` means dense unit-ball signals.
    pub k: usize,
    pub r: usize,
    pub m_list: Vec<usize>,
    pub trials: usize,
    /// Random directions per width estimate.
    pub directions: usize,
    pub delta: f64,
    pub eta: f64,
    pub rho: f64,
    /// Bias offset in units of `δ`.
    pub lambda: f64,
    /// Proximity target for the theorem scan.
    pub epsilon0: f64,
    /// Signals searched per ensemble in the theorem scan.
    pub signals: usize,
    #[serde(serialize_with = "ser_seed")]
    pub seed: Seed,
}

fn ser_seed<S: serde::Serializer>(seed: &Seed, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(seed.value())
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Grfcq,
            n: 8,
            k: 8,
            r: 0,
            m_list: vec![32, 64, 128, 256, 512, 1024],
            trials: 50,
            directions: 512,
            delta: 1.0,
            eta: 0.1,
            rho: 0.1,
            lambda: 0.25,
            epsilon0: 0.8,
            signals: 200,
            seed: Seed(0),
        }
    }
}

impl ExperimentConfig {
    /// Checks the fields every campaign relies on.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return fail("N must be >= 1".into());
        }
        if self.k == 0 || self.k > self.n {
            return fail(format!("K must lie in 1..=N (K={}, N={})", self.k, self.n));
        }
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return fail("M list must be non-empty and positive".into());
        }
        if self.m_list.windows(2).any(|w| w[0] >= w[1]) {
            return fail("M list must be strictly ascending".into());
        }
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return fail(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return fail(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        Ok(())
    }

    /// Seed of the `trial`-th trial at the `m_index`-th entry of the M list.
    pub fn trial_seed(&self, m_index: usize, trial: usize) -> Seed {
        derive_stream(self.seed, (m_index * self.trials + trial) as u64)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub r: usize,
    pub trial: usize,
    pub seed: u64,
    pub value: f64,
    pub baseline: Option<f64>,
    pub wall_ms: f64,
}

impl RunRecord {
    fn csv_line(&self) -> String {
        let baseline = self.baseline.map(|b| b.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3}",
            self.mode, self.n, self.k, self.m, self.r, self.trial, self.seed, self.value, baseline, self.wall_ms
        )
    }
}

/// Writes `records` as CSV (LF line endings) with [`CSV_HEADER`].
pub fn write_csv<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Drops the trailing `wall_ms` column, which is outside the determinism contract.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Ordinary least squares on `(ln M, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points
        .iter()
        .any(|&(m, v)| !(m > 0.0 && v > 0.0 && m.is_finite() && v.is_finite()))
    {
        return Err(Error::Fit("all M and values must be positive and finite".into()));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 distinct M values, got {}",
            distinct.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Elapsed milliseconds since `start`.
pub(crate) fn millis(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
