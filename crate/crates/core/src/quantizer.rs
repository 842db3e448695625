//! Uniform midrise quantization in integer-code form.
//!
//! A value `λ` is mapped to the code `k = ⌊λ/δ⌋`; the reconstruction level is
//! `δ(k + 1/2)`. Cells are half-open, `[δk, δ(k+1))`, so an input sitting
//! exactly on `δk` belongs to cell `k`. Observations are stored as codes and
//! compared as integers; decoded values are only produced on request.
//!
//! With the floor convention the per-sample error `decode(encode(λ)) − λ`
//! lies in `(−δ/2, δ/2]`; the closed right end is reached only when `λ` is a
//! grid point, a null event under a continuous dither.

use crate::error::{Error, Result};

const CODE_LIMIT: f64 = 4_611_686_018_427_387_904.0; // 2^62

/// Quantizer resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    delta: f64,
}

impl QuantizerSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "resolution must be positive and finite, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Integer codes of a quantized measurement vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedObservation {
    pub codes: Vec<i64>,
    pub delta: f64,
}

impl QuantizedObservation {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Decoded values `δ(k_j + 1/2)`.
    pub fn decoded(&self) -> Vec<f64> {
        self.codes.iter().map(|&k| self.delta * (k as f64 + 0.5)).collect()
    }
}

/// Code of the cell containing `lambda`.
pub fn encode(lambda: f64, spec: QuantizerSpec) -> Result<i64> {
    if !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "cannot quantize non-finite value {lambda}"
        )));
    }
    let scaled = lambda / spec.delta;
    if scaled.abs() >= CODE_LIMIT {
        return Err(Error::Overflow(scaled));
    }
    Ok(scaled.floor() as i64)
}

/// Reconstruction level `δ(code + 1/2)`.
pub fn decode(code: i64, spec: QuantizerSpec) -> f64 {
    spec.delta * (code as f64 + 0.5)
}

fn check_lengths(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Quantizes `y + dither` componentwise.
pub fn sense_quantize(y: &[f64], dither: &[f64], spec: QuantizerSpec) -> Result<QuantizedObservation> {
    check_lengths(y.len(), dither.len())?;
    if let Some(bad) = dither.iter().find(|&&d| !(0.0..spec.delta).contains(&d)) {
        return Err(Error::Precondition(format!(
            "dither entry {bad} outside [0, {})",
            spec.delta
        )));
    }
    let codes = y
        .iter()
        .zip(dither)
        .map(|(&v, &d)| encode(v + d, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedObservation {
        codes,
        delta: spec.delta,
    })
}

/// `‖a − b‖₁ / δ`, i.e. the sum of absolute code differences.
pub fn l1_discrepancy(a: &QuantizedObservation, b: &QuantizedObservation) -> Result<u64> {
    if a.delta != b.delta {
        return Err(Error::Incompatible(format!(
            "resolutions differ ({} vs {})",
            a.delta, b.delta
        )));
    }
    if a.len() != b.len() {
        return Err(Error::Incompatible(format!(
            "lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(code_distance(&a.codes, &b.codes))
}

pub(crate) fn code_distance(a: &[i64], b: &[i64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()
}

/// Per-measurement error `decode(encode(y + ξ)) − ξ − y`.
pub fn quantization_error(y: &[f64], dither: &[f64], spec: QuantizerSpec) -> Result<Vec<f64>> {
    let obs = sense_quantize(y, dither, spec)?;
    Ok(obs
        .codes
        .iter()
        .zip(y.iter().zip(dither))
        .map(|(&k, (&v, &d))| decode(k, spec) - d - v)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::Seed;
    use proptest::prelude::*;

    fn q(delta: f64) -> QuantizerSpec {
        QuantizerSpec::new(delta).unwrap()
    }

    #[test]
    fn encode_decode_examples() {
        assert_eq!(encode(0.3, q(1.0)).unwrap(), 0);
        assert_eq!(encode(-0.2, q(1.0)).unwrap(), -1);
        assert_eq!(encode(2.0, q(0.5)).unwrap(), 4);
        assert_eq!(decode(0, q(1.0)), 0.5);
        assert_eq!(decode(-1, q(1.0)), -0.5);
        assert_eq!(decode(4, q(0.5)), 2.25);
    }

    #[test]
    fn encode_rejects_bad_input() {
        assert!(QuantizerSpec::new(0.0).is_err());
        assert!(QuantizerSpec::new(-1.0).is_err());
        assert!(matches!(encode(f64::NAN, q(1.0)), Err(Error::InvalidInput(_))));
        assert!(matches!(encode(f64::INFINITY, q(1.0)), Err(Error::InvalidInput(_))));
        assert!(matches!(encode(1e19, q(1.0)), Err(Error::Overflow(_))));
        assert!(encode(1e18, q(1.0)).is_ok());
    }

    #[test]
    fn sense_quantize_examples() {
        let obs = sense_quantize(&[0.0, 0.0], &[0.0, 0.0], q(1.0)).unwrap();
        assert_eq!(obs.codes, vec![0, 0]);
        let obs = sense_quantize(&[0.6], &[0.5], q(1.0)).unwrap();
        assert_eq!(obs.codes, vec![1]);
        assert!(matches!(
            sense_quantize(&[0.0], &[0.0, 0.1], q(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(sense_quantize(&[0.0], &[1.0], q(1.0)).is_err());
    }

    #[test]
    fn discrepancy_examples() {
        let a = QuantizedObservation {
            codes: vec![0, 2],
            delta: 1.0,
        };
        let b = QuantizedObservation {
            codes: vec![1, 0],
            delta: 1.0,
        };
        assert_eq!(l1_discrepancy(&a, &a).unwrap(), 0);
        assert_eq!(l1_discrepancy(&a, &b).unwrap(), 3);
        let c = QuantizedObservation {
            codes: vec![1, 0],
            delta: 0.5,
        };
        assert!(matches!(l1_discrepancy(&a, &c), Err(Error::Incompatible(_))));
        let d = QuantizedObservation {
            codes: vec![1],
            delta: 1.0,
        };
        assert!(l1_discrepancy(&a, &d).is_err());
        // decoded l1 distance / delta equals the code distance exactly
        let e = QuantizedObservation {
            codes: vec![3, -4],
            delta: 0.25,
        };
        let f = QuantizedObservation {
            codes: vec![-1, 2],
            delta: 0.25,
        };
        let l1: f64 = e.decoded().iter().zip(f.decoded()).map(|(x, y)| (x - y).abs()).sum();
        assert_eq!(l1 / 0.25, l1_discrepancy(&e, &f).unwrap() as f64);
    }

    /// Brute-force oracle: count grid points of δZ in (u + ξ, v + ξ] by scanning integers.
    fn grid_points_between(lo: f64, hi: f64, delta: f64) -> u64 {
        let start = (lo / delta).floor() as i64 - 2;
        let end = (hi / delta).ceil() as i64 + 2;
        (start..=end)
            .filter(|&k| {
                let g = k as f64 * delta;
                g > lo && g <= hi
            })
            .count() as u64
    }

    #[test]
    fn discrepancy_counts_grid_points() {
        let mut st = Seed(17).stream();
        for _ in 0..2000 {
            let delta = st.uniform(0.1, 2.0).unwrap();
            let spec = q(delta);
            let mut u = st.uniform(-5.0, 5.0).unwrap();
            let mut v = st.uniform(-5.0, 5.0).unwrap();
            if u > v {
                std::mem::swap(&mut u, &mut v);
            }
            let xi = st.uniform(0.0, delta).unwrap();
            let a = sense_quantize(&[u], &[xi], spec).unwrap();
            let b = sense_quantize(&[v], &[xi], spec).unwrap();
            // grid test uses the same rounded sums as the quantizer input
            let expected = grid_points_between(u + xi, v + xi, delta);
            let got = l1_discrepancy(&a, &b).unwrap();
            assert_eq!(got, expected, "u={u} v={v} xi={xi} delta={delta}");
        }
    }

    #[test]
    fn random_errors_lie_in_half_cell() {
        let mut st = Seed(23).stream();
        let spec = q(0.8);
        for _ in 0..100_000 {
            let y = st.uniform(-50.0, 50.0).unwrap();
            let xi = st.uniform(0.0, 0.8).unwrap();
            let e = quantization_error(&[y], &[xi], spec).unwrap()[0];
            assert!(e > -0.4 - 1e-12 && e <= 0.4 + 1e-12, "e = {e}");
        }
    }

    #[test]
    fn boundary_error_is_plus_half_cell() {
        let e = quantization_error(&[0.0], &[0.0], q(1.0)).unwrap();
        assert_eq!(e, vec![0.5]);
        let e = quantization_error(&[0.25], &[0.0], q(1.0)).unwrap();
        assert_eq!(e, vec![0.25]);
    }

    #[test]
    fn dithered_error_moments() {
        let mut st = Seed(31).stream();
        let delta = 1.3;
        let spec = q(delta);
        let n = 1_000_000;
        let mut errs = Vec::with_capacity(n);
        for _ in 0..n {
            let y = 3.0 * st.gauss();
            let xi = st.uniform(0.0, delta).unwrap();
            errs.push(quantization_error(&[y], &[xi], spec).unwrap()[0]);
        }
        let mean = errs.iter().sum::<f64>() / n as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * delta / 12f64.sqrt() / 1000.0);
        assert!((var / (delta * delta / 12.0) - 1.0).abs() < 0.01);
        let ks = crate::stats::ks_uniform(&mut errs, -delta / 2.0, delta / 2.0);
        assert!(ks < 0.002, "KS {ks}");
    }

    proptest! {
        #[test]
        fn shift_covariance(j in -(1i64 << 40)..(1i64 << 40), k in -(1i64 << 20)..(1i64 << 20), e in -10i32..10) {
            // dyadic inputs keep λ + kδ and λ/δ exact in binary floating point
            let delta = 2f64.powi(e);
            let lambda = j as f64 * 2f64.powi(-20) * delta;
            let spec = q(delta);
            prop_assert_eq!(
                encode(lambda + k as f64 * delta, spec).unwrap(),
                encode(lambda, spec).unwrap() + k
            );
        }

        #[test]
        fn monotone(a in -1e6f64..1e6, b in -1e6f64..1e6, delta in 1e-3f64..10.0) {
            let spec = q(delta);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(encode(lo, spec).unwrap() <= encode(hi, spec).unwrap());
        }

        #[test]
        fn discrepancy_is_a_metric(
            a in proptest::collection::vec(-100i64..100, 6),
            b in proptest::collection::vec(-100i64..100, 6),
            c in proptest::collection::vec(-100i64..100, 6),
        ) {
            let o = |v: Vec<i64>| QuantizedObservation { codes: v, delta: 0.5 };
            let (a, b, c) = (o(a), o(b), o(c));
            let ab = l1_discrepancy(&a, &b).unwrap();
            prop_assert_eq!(ab, l1_discrepancy(&b, &a).unwrap());
            prop_assert!(ab <= l1_discrepancy(&a, &c).unwrap() + l1_discrepancy(&c, &b).unwrap());
            prop_assert_eq!(ab == 0, a == b);
        }
    }
}
