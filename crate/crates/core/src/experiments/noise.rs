use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{millis, ExperimentConfig, Mode, RunRecord};
use crate::error::Result;
use crate::quantizer::{quantization_error, QuantizerSpec};
use crate::randkit::derive_stream;
use crate::sensing::{gen_ensemble, sample_signal, SignalModel};
use crate::stats::{mean, quantile};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRow {
    pub m: usize,
    pub mean_energy: f64,
    /// `Mδ²/12`.
    pub expected: f64,
    pub ratio: f64,
    /// 99th percentile of `ζ̂ = (‖n‖² − Mδ²/12) / (δ²√M/12)`.
    pub zeta_p99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseReport {
    #[serde(skip)]
    pub records: Vec<RunRecord>,
    pub rows: Vec<NoiseRow>,
}

/// Energy of the dithered quantization noise `n = Q(Φx + ξ) − (Φx + ξ)`
/// against its expectation `Mδ²/12`.
pub fn noise_power_check(cfg: &ExperimentConfig) -> Result<NoiseReport> {
    cfg.validate()?;
    let spec = QuantizerSpec::new(cfg.delta)?;
    let model = SignalModel::unit_ball(cfg.n)?;
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
            let x = sample_signal(model, &mut derive_stream(seed, 1).stream())?;
            let y = ensemble.project(&x.x)?;
            let err = quantization_error(&y, ensemble.dither(), spec)?;
            Ok(RunRecord {
                mode: Mode::Noise,
                n: cfg.n,
                k: cfg.n,
                m,
                r: 0,
                trial,
                seed: seed.value(),
                value: err.iter().map(|e| e * e).sum(),
                baseline: Some(m as f64 * cfg.delta * cfg.delta / 12.0),
                wall_ms: millis(start),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let d2 = cfg.delta * cfg.delta;
    let rows = cfg
        .m_list
        .iter()
        .map(|&m| {
            let energy: Vec<f64> = records.iter().filter(|r| r.m == m).map(|r| r.value).collect();
            let expected = m as f64 * d2 / 12.0;
            let zeta: Vec<f64> = energy
                .iter()
                .map(|e| (e - expected) / (d2 * (m as f64).sqrt() / 12.0))
                .collect();
            let mean_energy = mean(&energy);
            NoiseRow {
                m,
                mean_energy,
                expected,
                ratio: mean_energy / expected,
                zeta_p99: quantile(&zeta, 0.99),
            }
        })
        .collect();
    Ok(NoiseReport { records, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_scales_with_delta_squared() {
        let base = ExperimentConfig {
            mode: Mode::Noise,
            m_list: vec![200],
            trials: 200,
            ..Default::default()
        };
        let a = noise_power_check(&base).unwrap();
        let b = noise_power_check(&ExperimentConfig { delta: 4.0, ..base }).unwrap();
        let ratio = b.rows[0].mean_energy / a.rows[0].mean_energy;
        assert!((ratio / 16.0 - 1.0).abs() < 0.05, "{ratio}");
        for rep in [&a, &b] {
            assert!((rep.rows[0].ratio - 1.0).abs() < 0.03);
            assert!(rep.rows[0].zeta_p99 < 10.0);
        }
    }
}
