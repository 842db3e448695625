use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{fit_loglog, millis, DecayFit, ExperimentConfig, Mode, RunRecord};
use crate::bounds::{predicted_eps, BoundMode};
use crate::cellgeom::signal_cell_width;
use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::randkit::derive_stream;
use crate::reconstruct::linear_baseline;
use crate::sensing::{gen_ensemble, sense, SignalModel};
use crate::stats::{mean, median, sign_test_upper};

/// Per-M aggregates of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianRow {
    pub m: usize,
    pub median: f64,
    pub max: f64,
    pub baseline_median: Option<f64>,
    /// `sqrt(mean ‖x̂ − x‖²)` of the least-squares estimate.
    pub baseline_rmse: Option<f64>,
    /// Proximity that saturates the sample-complexity condition at this M.
    pub predicted_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    #[serde(skip)]
    pub records: Vec<RunRecord>,
    pub rows: Vec<MedianRow>,
    /// Fit of median widths; `None` with `fit_note` set when undefined.
    pub fit: Option<DecayFit>,
    pub fit_note: Option<String>,
    pub baseline_fit: Option<DecayFit>,
    /// Smallest sign-test p-value for "width grows from one M to the next".
    pub min_sign_p: f64,
    /// `min_sign_p >= 0.01`.
    pub monotone: bool,
}

impl SweepReport {
    /// Trial values grouped by M, in trial order.
    pub fn values_by_m(&self) -> Vec<Vec<f64>> {
        group(&self.records, &self.rows, |r| r.value)
    }
}

fn group(records: &[RunRecord], rows: &[MedianRow], f: impl Fn(&RunRecord) -> f64) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| records.iter().filter(|r| r.m == row.m).map(&f).collect())
        .collect()
}

fn model_of(cfg: &ExperimentConfig) -> Result<SignalModel> {
    if cfg.k == cfg.n {
        SignalModel::unit_ball(cfg.n)
    } else {
        SignalModel::sparse_ball(cfg.n, cfg.k)
    }
}

fn run(cfg: &ExperimentConfig, mode: Mode, r: usize) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.directions == 0 {
        return Err(Error::Config("directions must be >= 1".into()));
    }
    let model = model_of(cfg)?;
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
            let tw = signal_cell_width(&ensemble, model, cfg.directions, r as u64, &mut stream)?;
            let baseline = if m >= cfg.n {
                let codes = sense(&ensemble, &tw.signal)?.codes;
                let est = linear_baseline(&ensemble, &codes)?;
                Some(
                    est.iter()
                        .zip(&tw.signal)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt(),
                )
            } else {
                None
            };
            Ok(RunRecord {
                mode,
                n: cfg.n,
                k: cfg.k,
                m,
                r,
                trial,
                seed: seed.value(),
                value: tw.width.value,
                baseline,
                wall_ms: millis(start),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let bound_mode = if cfg.k == cfg.n {
        BoundMode::Grfcq
    } else {
        BoundMode::Qcs
    };
    let mut rows = Vec::with_capacity(cfg.m_list.len());
    for &m in &cfg.m_list {
        let at_m: Vec<&RunRecord> = records.iter().filter(|r| r.m == m).collect();
        let values: Vec<f64> = at_m.iter().map(|r| r.value).collect();
        let base: Vec<f64> = at_m.iter().filter_map(|r| r.baseline).collect();
        let (baseline_median, baseline_rmse) = if base.len() == values.len() {
            let sq: Vec<f64> = base.iter().map(|b| b * b).collect();
            (Some(median(&base)), Some(mean(&sq).sqrt()))
        } else {
            (None, None)
        };
        rows.push(MedianRow {
            m,
            median: median(&values),
            max: values.iter().copied().fold(0.0, f64::max),
            baseline_median,
            baseline_rmse,
            predicted_eps: predicted_eps(m as u64, cfg.eta, cfg.delta, cfg.n, Some(cfg.k), bound_mode).ok(),
        });
    }

    let (fit, fit_note) = match fit_loglog(&rows.iter().map(|r| (r.m as f64, r.median)).collect::<Vec<_>>()) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let baseline_pts: Option<Vec<(f64, f64)>> = rows.iter().map(|r| r.baseline_rmse.map(|b| (r.m as f64, b))).collect();
    let baseline_fit = baseline_pts.and_then(|p| fit_loglog(&p).ok());

    let by_m = group(&records, &rows, |r| r.value);
    let min_sign_p = by_m
        .windows(2)
        .map(|w| {
            let ups = w[0].iter().zip(&w[1]).filter(|(a, b)| b > a).count();
            sign_test_upper(ups, w[0].len())
        })
        .fold(1.0, f64::min);
    Ok(SweepReport {
        records,
        rows,
        fit,
        fit_note,
        baseline_fit,
        min_sign_p,
        monotone: min_sign_p >= 0.01,
    })
}

/// Strict-cell widths over the M list, with the least-squares baseline.
/// Sparse signals (`K < N`) are measured inside their support.
pub fn decay_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let mode = if cfg.k == cfg.n { Mode::Grfcq } else { Mode::Qcs };
    run(cfg, mode, 0)
}

/// As [`decay_sweep`] with widths of the cell that tolerates `cfg.r`
/// inconsistent measurements.
pub fn relaxed_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    run(cfg, Mode::Relaxed, cfg.r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::Seed;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n: 4,
            k: 4,
            m_list: vec![16, 32, 64],
            trials: 6,
            directions: 32,
            seed: Seed(5),
            ..Default::default()
        }
    }

    #[test]
    fn single_trial_has_no_fit() {
        let cfg = ExperimentConfig {
            m_list: vec![32],
            trials: 1,
            ..small()
        };
        let rep = decay_sweep(&cfg).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert!(rep.fit.is_none() && rep.fit_note.is_some());
    }

    #[test]
    fn widths_are_bounded_and_ordered() {
        let rep = decay_sweep(&small()).unwrap();
        assert_eq!(rep.records.len(), 18);
        assert!(rep.records.iter().all(|r| r.value > 0.0 && r.value <= 2.0));
        let keys: Vec<(usize, usize)> = rep.records.iter().map(|r| (r.m, r.trial)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(rep.fit.is_some());
    }

    #[test]
    fn independent_of_thread_count() {
        let a = decay_sweep(&small()).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| decay_sweep(&small()).unwrap());
        let strip = |r: &SweepReport| {
            r.records
                .iter()
                .map(|x| RunRecord {
                    wall_ms: 0.0,
                    ..x.clone()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn relaxed_zero_matches_strict_and_nests() {
        let strict = decay_sweep(&small()).unwrap();
        let mut last: Option<Vec<f64>> = None;
        for r in [0, 1, 3] {
            let rep = relaxed_sweep(&ExperimentConfig { r, ..small() }).unwrap();
            let vals: Vec<f64> = rep.records.iter().map(|x| x.value).collect();
            if r == 0 {
                assert_eq!(vals, strict.records.iter().map(|x| x.value).collect::<Vec<_>>());
            }
            if let Some(prev) = &last {
                assert!(prev.iter().zip(&vals).all(|(a, b)| b >= a));
            }
            last = Some(vals);
        }
    }

    #[test]
    fn sparse_sweep_tags_qcs() {
        let cfg = ExperimentConfig {
            n: 10,
            k: 2,
            m_list: vec![20, 40, 80],
            trials: 4,
            directions: 16,
            ..Default::default()
        };
        let rep = decay_sweep(&cfg).unwrap();
        assert!(rep.records.iter().all(|r| r.mode == Mode::Qcs && r.k == 2));
        assert!(rep.rows.iter().all(|r| r.baseline_rmse.is_some()));
    }
}
