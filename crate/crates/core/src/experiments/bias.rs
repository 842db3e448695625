use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{millis, ExperimentConfig, Mode, RunRecord};
use crate::error::{Error, Result};
use crate::quantizer::{l1_discrepancy, QuantizerSpec};
use crate::randkit::derive_stream;
use crate::sensing::{gen_ensemble, sample_signal, sense, SignalModel};
use crate::stats::{mean, stderr_of_mean};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRow {
    pub m: usize,
    /// Mean of `Σ|Δcode| / M`.
    pub mean: f64,
    pub stderr: f64,
    /// `‖x − x*‖`, identical for every trial up to rounding.
    pub distance: f64,
    /// `mean / |λ|`; undefined for `λ = 0`.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    #[serde(skip)]
    pub records: Vec<RunRecord>,
    pub lambda: f64,
    pub rows: Vec<BiasRow>,
    /// `(max c − min c) / mean c` across M.
    pub c_spread: Option<f64>,
}

/// Moves each signal by `λδ` along one coordinate of its support and
/// measures how many quantization steps the codes move per measurement.
///
/// The signal is first shrunk by `1 − |λ|δ` so the shifted point stays in
/// the unit ball. The distance `|λ|δ` does not depend on `M`, while the
/// per-measurement discrepancy settles to a constant times `|λ|`.
pub fn bias_experiment(cfg: &ExperimentConfig) -> Result<BiasReport> {
    cfg.validate()?;
    let shift = cfg.lambda * cfg.delta;
    if !(shift.abs() < 1.0) {
        return Err(Error::Config(format!(
            "|lambda|·delta = {} leaves no room inside the unit ball",
            shift.abs()
        )));
    }
    let model = if cfg.k == cfg.n {
        SignalModel::unit_ball(cfg.n)?
    } else {
        SignalModel::sparse_ball(cfg.n, cfg.k)?
    };
    let spec = QuantizerSpec::new(cfg.delta)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.m_list.len())
        .flat_map(|mi| (0..cfg.trials).map(move |t| (mi, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(mi, trial)| {
            let start = Instant::now();
            let m = cfg.m_list[mi];
            let seed = cfg.trial_seed(mi, trial);
            let ensemble = gen_ensemble(m, cfg.n, spec, derive_stream(seed, 0))?;
            let mut stream = derive_stream(seed, 1).stream();
            let signal = sample_signal(model, &mut stream)?;
            let support = signal.support.clone().unwrap_or_else(|| (0..cfg.n).collect());
            let i = support[stream.subset(support.len(), 1)[0]];
            let x: Vec<f64> = signal.x.iter().map(|v| v * (1.0 - shift.abs())).collect();
            let mut moved = x.clone();
            moved[i] += shift;
            let disc = l1_discrepancy(&sense(&ensemble, &x)?, &sense(&ensemble, &moved)?)?;
            let distance = x.iter().zip(&moved).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            Ok(RunRecord {
                mode: Mode::Bias,
                n: cfg.n,
                k: cfg.k,
                m,
                r: 0,
                trial,
                seed: seed.value(),
                value: disc as f64 / m as f64,
                baseline: Some(distance),
                wall_ms: millis(start),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<BiasRow> = cfg
        .m_list
        .iter()
        .map(|&m| {
            let vals: Vec<f64> = records.iter().filter(|r| r.m == m).map(|r| r.value).collect();
            let dists: Vec<f64> = records.iter().filter(|r| r.m == m).filter_map(|r| r.baseline).collect();
            let mu = mean(&vals);
            BiasRow {
                m,
                mean: mu,
                stderr: if vals.len() > 1 {
                    stderr_of_mean(&vals)
                } else {
                    f64::NAN
                },
                distance: dists.iter().copied().fold(0.0, f64::max),
                c: (cfg.lambda != 0.0).then(|| mu / cfg.lambda.abs()),
            }
        })
        .collect();
    let cs: Option<Vec<f64>> = rows.iter().map(|r| r.c).collect();
    let c_spread = cs.filter(|c| !c.is_empty()).map(|c| {
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / mean(&c)
    });
    Ok(BiasReport {
        records,
        lambda: cfg.lambda,
        rows,
        c_spread,
    })
}
