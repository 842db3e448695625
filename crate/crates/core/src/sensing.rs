//! Gaussian sensing ensembles, test-signal sampling and the sensing map
//! `x ↦ Q_δ(Φx + ξ)`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::quantizer::{sense_quantize, QuantizedObservation, QuantizerSpec};
use crate::randkit::{Seed, Stream};

/// One sensing instance: Gaussian matrix, dither and resolution.
///
/// `phi` is stored row-major; row `j` is the measurement vector `φ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingEnsemble {
    m: usize,
    n: usize,
    phi: Vec<f64>,
    xi: Vec<f64>,
    spec: QuantizerSpec,
    seed: Seed,
}

impl SensingEnsemble {
    /// Builds an ensemble from explicit data. Checks every invariant.
    pub fn from_parts(
        m: usize,
        n: usize,
        phi: Vec<f64>,
        xi: Vec<f64>,
        spec: QuantizerSpec,
        seed: Seed,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidDimension(format!(
                "ensemble needs M >= 1 and N >= 1 (got M={m}, N={n})"
            )));
        }
        if phi.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                got: phi.len(),
            });
        }
        if xi.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: xi.len(),
            });
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        if xi.iter().any(|&d| !(0.0..spec.delta()).contains(&d)) {
            return Err(Error::InvalidInput(format!(
                "dither entries must lie in [0, {})",
                spec.delta()
            )));
        }
        Ok(Self {
            m,
            n,
            phi,
            xi,
            spec,
            seed,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> QuantizerSpec {
        self.spec
    }

    pub fn delta(&self) -> f64 {
        self.spec.delta()
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn dither(&self) -> &[f64] {
        &self.xi
    }

    pub fn matrix(&self) -> &[f64] {
        &self.phi
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.phi[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.phi.chunks_exact(self.n)
    }

    /// Unquantized projections `Φx`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.rows().map(|row| dot(row, x)).collect())
    }

    /// Writes the binary dump: `M, N` (u64), `δ` (f64), seed (u64), then the
    /// row-major matrix and the dither as f64, all little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.m as u64).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.spec.delta().to_le_bytes())?;
        w.write_all(&self.seed.0.to_le_bytes())?;
        for v in self.phi.iter().chain(&self.xi) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let m = u64::from_le_bytes(next(&mut r)?) as usize;
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let delta = f64::from_le_bytes(next(&mut r)?);
        let seed = Seed(u64::from_le_bytes(next(&mut r)?));
        let total = m
            .checked_mul(n)
            .and_then(|mn| mn.checked_add(m))
            .ok_or_else(|| Error::InvalidInput(format!("ensemble header too large (M={m}, N={n})")))?;
        let mut values = Vec::with_capacity(total.min(1 << 24));
        for _ in 0..total {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        let xi = values.split_off(m * n);
        Self::from_parts(m, n, values, xi, QuantizerSpec::new(delta)?, seed)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws `Φ ~ N(0,1)^{M×N}` (row-major order) then `ξ ~ U[0,δ)^M` from the stream of `seed`.
pub fn gen_ensemble(m: usize, n: usize, spec: QuantizerSpec, seed: Seed) -> Result<SensingEnsemble> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimension(format!(
            "ensemble needs M >= 1 and N >= 1 (got M={m}, N={n})"
        )));
    }
    let mut stream = seed.stream();
    let phi: Vec<f64> = (0..m * n).map(|_| stream.gauss()).collect();
    let xi = (0..m)
        .map(|_| stream.uniform(0.0, spec.delta()))
        .collect::<Result<Vec<_>>>()?;
    SensingEnsemble::from_parts(m, n, phi, xi, spec, seed)
}

/// Admissible signal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalModel {
    /// The unit ball of `R^N`.
    UnitBall { n: usize },
    /// `K`-sparse vectors of the unit ball of `R^N`.
    SparseBall { n: usize, k: usize },
}

impl SignalModel {
    pub fn unit_ball(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("N must be >= 1".into()));
        }
        Ok(Self::UnitBall { n })
    }

    pub fn sparse_ball(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::InvalidDimension(format!(
                "sparse model needs 1 <= K <= N (got N={n}, K={k})"
            )));
        }
        Ok(Self::SparseBall { n, k })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::UnitBall { n } | Self::SparseBall { n, .. } => n,
        }
    }

    /// Sparsity level; `N` for the ball.
    pub fn sparsity(&self) -> usize {
        match *self {
            Self::UnitBall { n } => n,
            Self::SparseBall { k, .. } => k,
        }
    }
}

/// A test signal with its support when sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub x: Vec<f64>,
    pub support: Option<Vec<usize>>,
}

impl Signal {
    pub fn dense(x: Vec<f64>) -> Self {
        Self { x, support: None }
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn uniform_ball(stream: &mut Stream, dim: usize) -> Result<Vec<f64>> {
    let dir = stream.unit_sphere(dim)?;
    let radius = stream.uniform(0.0, 1.0)?.powf(1.0 / dim as f64);
    Ok(dir.into_iter().map(|v| v * radius).collect())
}

/// Samples a signal of `model`: uniform in the ball, or a uniform random
/// support carrying coefficients uniform in the `K`-ball.
pub fn sample_signal(model: SignalModel, stream: &mut Stream) -> Result<Signal> {
    match model {
        SignalModel::UnitBall { n } => Ok(Signal::dense(uniform_ball(stream, n)?)),
        SignalModel::SparseBall { n, k } => {
            let support = stream.subset(n, k);
            let coeffs = uniform_ball(stream, k)?;
            let mut x = vec![0.0; n];
            for (&i, c) in support.iter().zip(coeffs) {
                x[i] = c;
            }
            Ok(Signal {
                x,
                support: Some(support),
            })
        }
    }
}

/// `Q_δ(Φx + ξ)`.
pub fn sense(ensemble: &SensingEnsemble, x: &[f64]) -> Result<QuantizedObservation> {
    let y = ensemble.project(x)?;
    sense_quantize(&y, ensemble.dither(), ensemble.spec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{encode, l1_discrepancy};
    use crate::randkit::derive_stream;

    fn spec(d: f64) -> QuantizerSpec {
        QuantizerSpec::new(d).unwrap()
    }

    #[test]
    fn ensemble_is_deterministic() {
        let a = gen_ensemble(2, 2, spec(1.0), Seed(5)).unwrap();
        let b = gen_ensemble(2, 2, spec(1.0), Seed(5)).unwrap();
        assert_eq!(a, b);
        assert!(gen_ensemble(0, 2, spec(1.0), Seed(5)).is_err());
        assert!(gen_ensemble(2, 0, spec(1.0), Seed(5)).is_err());
    }

    #[test]
    fn dither_and_column_norms() {
        let e = gen_ensemble(1000, 8, spec(1.0), Seed(8)).unwrap();
        assert!(e.dither().iter().all(|&d| (0.0..1.0).contains(&d)));
        for c in 0..8 {
            let sq: f64 = (0..1000).map(|j| e.row(j)[c].powi(2)).sum::<f64>() / 1000.0;
            assert!((sq - 1.0).abs() < 0.2, "column {c}: {sq}");
        }
    }

    #[test]
    fn signal_models() {
        let mut st = Seed(2).stream();
        assert!(SignalModel::sparse_ball(3, 4).is_err());
        assert!(SignalModel::unit_ball(0).is_err());
        for _ in 0..1000 {
            let s = sample_signal(SignalModel::unit_ball(1).unwrap(), &mut st).unwrap();
            assert!(s.x[0].abs() <= 1.0);
            let s = sample_signal(SignalModel::sparse_ball(10, 2).unwrap(), &mut st).unwrap();
            assert!(s.x.iter().filter(|v| **v != 0.0).count() <= 2);
            assert!(s.norm() <= 1.0 + 1e-12);
            let sup = s.support.unwrap();
            assert_eq!(sup.len(), 2);
            for (i, v) in s.x.iter().enumerate() {
                if *v != 0.0 {
                    assert!(sup.contains(&i));
                }
            }
        }
    }

    #[test]
    fn ball_radius_mean() {
        // E‖x‖ = N/(N+1) for x uniform in B^N
        let mut st = Seed(3).stream();
        let n = 100_000;
        let norms: Vec<f64> = (0..n)
            .map(|_| {
                sample_signal(SignalModel::unit_ball(3).unwrap(), &mut st)
                    .unwrap()
                    .norm()
            })
            .collect();
        let m = crate::stats::mean(&norms);
        let se = crate::stats::stderr_of_mean(&norms);
        assert!((m - 0.75).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn sensing_zero_and_repeat() {
        let e = gen_ensemble(16, 4, spec(0.5), Seed(4)).unwrap();
        let zero = sense(&e, &[0.0; 4]).unwrap();
        let expect: Vec<i64> = e.dither().iter().map(|&d| encode(d, e.spec()).unwrap()).collect();
        assert_eq!(zero.codes, expect);
        let x = [0.1, -0.3, 0.2, 0.05];
        let a = sense(&e, &x).unwrap();
        let b = sense(&e, &x).unwrap();
        assert_eq!(a, b);
        assert_eq!(l1_discrepancy(&a, &b).unwrap(), 0);
        assert!(matches!(sense(&e, &[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rotational_invariance_smoke() {
        // mean discrepancy between x and 0 should match that between Rx and 0
        let n = 4;
        let x = [0.5, 0.2, -0.1, 0.3];
        // rotation by 90 degrees in the (0,1) plane and a swap of (2,3)
        let rx = [-x[1], x[0], x[3], x[2]];
        let trials = 4000;
        let mut da = Vec::with_capacity(trials);
        let mut db = Vec::with_capacity(trials);
        for t in 0..trials {
            let ea = gen_ensemble(32, n, spec(0.5), derive_stream(Seed(10), t as u64)).unwrap();
            let eb = gen_ensemble(32, n, spec(0.5), derive_stream(Seed(11), t as u64)).unwrap();
            let z = [0.0; 4];
            da.push(l1_discrepancy(&sense(&ea, &x).unwrap(), &sense(&ea, &z).unwrap()).unwrap() as f64);
            db.push(l1_discrepancy(&sense(&eb, &rx).unwrap(), &sense(&eb, &z).unwrap()).unwrap() as f64);
        }
        let se = (crate::stats::variance(&da) / trials as f64 + crate::stats::variance(&db) / trials as f64).sqrt();
        let diff = crate::stats::mean(&da) - crate::stats::mean(&db);
        assert!(diff.abs() < 3.0 * se, "diff {diff} se {se}");
    }

    #[test]
    fn dump_roundtrip_and_layout() {
        let e = gen_ensemble(3, 2, spec(0.25), Seed(99)).unwrap();
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 8 * (6 + 3));
        assert_eq!(&buf[0..8], &3u64.to_le_bytes());
        assert_eq!(&buf[8..16], &2u64.to_le_bytes());
        assert_eq!(&buf[16..24], &0.25f64.to_le_bytes());
        assert_eq!(&buf[24..32], &99u64.to_le_bytes());
        assert_eq!(&buf[32..40], &e.row(0)[0].to_le_bytes());
        assert_eq!(&buf[buf.len() - 8..], &e.dither()[2].to_le_bytes());
        let back = SensingEnsemble::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, e);
        assert!(SensingEnsemble::read_from(&buf[..40]).is_err());
    }
}
