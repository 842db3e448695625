use std::time::Instant;

use serde::Serialize;

use super::{millis, Mode, RunRecord};
use crate::buffon::{chi_mixture, estimate_p1, kappa, lemma1_bound, DirectionLaw, DumbbellConfig, LAMBDA};
use crate::error::{Error, Result};
use crate::randkit::{derive_stream, Seed};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuffonCell {
    pub n: usize,
    pub alpha: f64,
    pub p_hat: f64,
    pub stderr: f64,
    /// Quadrature value of the same probability.
    pub mixture: f64,
    /// Single-projection bound `1 − 3α/(8 + 4α)`.
    pub bound: f64,
    /// `p̂ <= bound + 3·stderr`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuffonReport {
    #[serde(skip)]
    pub records: Vec<RunRecord>,
    pub cells: Vec<BuffonCell>,
}

/// Single-projection dumbbell probabilities over a grid of dimensions and
/// separations `α`, each with the lemma's ball radius and Gaussian `φ`.
pub fn buffon_grid(dims: &[usize], alphas: &[f64], throws: u64, seed: Seed) -> Result<BuffonReport> {
    if dims.is_empty() || alphas.is_empty() {
        return Err(Error::Config("buffon grid needs at least one N and one alpha".into()));
    }
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for (i, (&n, &alpha)) in dims.iter().flat_map(|n| alphas.iter().map(move |a| (n, a))).enumerate() {
        let start = Instant::now();
        let cell_seed = derive_stream(seed, i as u64);
        let cfg = DumbbellConfig::lemma(n, alpha, 1.0)?;
        let est = estimate_p1(&cfg, throws, DirectionLaw::Gaussian, cell_seed)?;
        let bound = lemma1_bound(alpha, 1)?;
        let mixture = chi_mixture(n, alpha, LAMBDA / (2.0 * kappa(n)?))?;
        cells.push(BuffonCell {
            n,
            alpha,
            p_hat: est.p_hat,
            stderr: est.stderr,
            mixture,
            bound,
            holds: est.p_hat <= bound + 3.0 * est.stderr,
        });
        records.push(RunRecord {
            mode: Mode::Buffon,
            n,
            k: n,
            m: 1,
            r: 0,
            trial: i,
            seed: cell_seed.value(),
            value: est.p_hat,
            baseline: Some(bound),
            wall_ms: millis(start),
        });
    }
    Ok(BuffonReport { records, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let rep = buffon_grid(&[2, 4], &[1.0, 2.0, 4.0], 5000, Seed(1)).unwrap();
        assert_eq!(rep.cells.len(), 6);
        assert_eq!(
            rep.records.iter().map(|r| r.trial).collect::<Vec<_>>(),
            (0..6).collect::<Vec<_>>()
        );
        for c in &rep.cells {
            assert!(c.holds, "{c:?}");
            assert!((c.p_hat - c.mixture).abs() < 5.0 * c.stderr + 1e-3);
        }
        assert!(buffon_grid(&[], &[1.0], 10, Seed(0)).is_err());
    }
}
