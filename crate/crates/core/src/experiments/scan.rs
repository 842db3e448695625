use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{millis, ExperimentConfig, Mode, RunRecord};
use crate::cellgeom::empirical_worst_case;
use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::randkit::derive_stream;
use crate::sensing::{gen_ensemble, SignalModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    #[serde(skip)]
    pub records: Vec<RunRecord>,
    pub m: usize,
    pub epsilon0: f64,
    pub draws: usize,
    pub violations: usize,
    pub rate: f64,
    /// `η + 2·sqrt(η(1−η)/draws)`.
    pub threshold: f64,
}

/// For each of `cfg.trials` ensembles at `M = cfg.m_list[0]`, searches
/// `cfg.signals` cells for a consistent pair farther apart than `ε₀`.
/// The search only finds lower bounds on widths, so the violation rate
/// underestimates the true failure probability.
pub fn theorem_violation_scan(cfg: &ExperimentConfig) -> Result<ScanReport> {
    cfg.validate()?;
    if cfg.signals == 0 || cfg.directions == 0 {
        return Err(Error::Config("signals and directions must be >= 1".into()));
    }
    if !(cfg.epsilon0 > 0.0) {
        return Err(Error::Config(format!(
            "epsilon0 must be positive, got {}",
            cfg.epsilon0
        )));
    }
    let m = cfg.m_list[0];
    let model = if cfg.k == cfg.n {
        SignalModel::unit_ball(cfg.n)?
    } else {
        SignalModel::sparse_ball(cfg.n, cfg.k)?
    };
    let spec = QuantizerSpec::new(cfg.delta)?;
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|draw| {
            let start = Instant::now();
            let seed = cfg.trial_seed(0, draw);
            let ensemble = gen_ensemble(m, cfg.n, spec, derive_stream(seed, 0))?;
            let mut stream = derive_stream(seed, 1).stream();
            let report = empirical_worst_case(&ensemble, model, cfg.signals, cfg.directions, &mut stream)?;
            Ok(RunRecord {
                mode: Mode::Scan,
                n: cfg.n,
                k: cfg.k,
                m,
                r: 0,
                trial: draw,
                seed: seed.value(),
                value: report.max,
                baseline: Some(cfg.epsilon0),
                wall_ms: millis(start),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = records.iter().filter(|r| r.value > cfg.epsilon0).count();
    let draws = cfg.trials;
    let eta = cfg.eta;
    Ok(ScanReport {
        records,
        m,
        epsilon0: cfg.epsilon0,
        draws,
        violations,
        rate: violations as f64 / draws as f64,
        threshold: eta + 2.0 * (eta * (1.0 - eta) / draws as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::Seed;

    #[test]
    fn diameter_is_never_violated() {
        let cfg = ExperimentConfig {
            n: 3,
            k: 3,
            m_list: vec![10],
            trials: 5,
            signals: 10,
            directions: 16,
            epsilon0: 2.0,
            ..Default::default()
        };
        let rep = theorem_violation_scan(&cfg).unwrap();
        assert_eq!(rep.violations, 0);
        let again = theorem_violation_scan(&cfg).unwrap();
        assert_eq!(rep.rate, again.rate);
        let tight = theorem_violation_scan(&ExperimentConfig {
            epsilon0: 1e-3,
            seed: Seed(1),
            ..cfg
        })
        .unwrap();
        assert!((0.0..=1.0).contains(&tight.rate));
        assert_eq!(tight.violations, 5);
    }
}
