//! Sample-complexity formulas and the constants of the inconsistency bound.
//!
//! All logarithms are natural.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Signal class a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Signals in the unit ball of `R^N`.
    Grfcq,
    /// `K`-sparse signals in the unit ball.
    Qcs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub epsilon0: f64,
    pub eta: f64,
    pub delta: f64,
    pub n: usize,
    /// Sparsity; ignored for [`BoundMode::Grfcq`].
    pub k: usize,
    /// Number of tolerated inconsistent measurements.
    pub r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoConstants {
    pub rho_bar: f64,
    pub c_rho: f64,
    pub d_rho: f64,
}

fn check_common(epsilon0: f64, eta: f64, delta: f64, n: usize) -> Result<()> {
    if !(epsilon0 > 0.0 && epsilon0.is_finite()) {
        return Err(Error::Domain(format!("epsilon0 must be positive, got {epsilon0}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if n == 0 {
        return Err(Error::Domain("N must be >= 1".into()));
    }
    Ok(())
}

/// The entropy term `N ln(29√N/ε₀) + ln(1/2η)` (or its sparse analogue
/// `2K ln(56N/(√K ε₀)) + ln(1/2η)`) of the sample-complexity condition.
fn log_term(mode: BoundMode, epsilon0: f64, eta: f64, n: usize, k: usize) -> Result<f64> {
    let (n_f, k_f) = (n as f64, k as f64);
    let (count, arg) = match mode {
        BoundMode::Grfcq => (n_f, 29.0 * n_f.sqrt() / epsilon0),
        BoundMode::Qcs => {
            if k == 0 || k > n {
                return Err(Error::Domain(format!("need 1 <= K <= N (K={k}, N={n})")));
            }
            (2.0 * k_f, 56.0 * n_f / (k_f.sqrt() * epsilon0))
        }
    };
    if arg <= 1.0 {
        return Err(Error::Domain(format!(
            "epsilon0 = {epsilon0} makes the log argument {arg} <= 1"
        )));
    }
    Ok(count * arg.ln() + (1.0 / (2.0 * eta)).ln())
}

fn ceil_measurements(v: f64) -> Result<u64> {
    if !v.is_finite() || v >= u64::MAX as f64 {
        return Err(Error::Overflow(v));
    }
    Ok((v.ceil() as u64).max(1))
}

/// Measurements guaranteeing proximity `ε₀` for consistent unit-ball signals:
/// `⌈(4δ + 2ε₀)/ε₀ · (N ln(29√N/ε₀) + ln(1/2η))⌉`.
pub fn min_measurements_grfcq(epsilon0: f64, eta: f64, delta: f64, n: usize) -> Result<u64> {
    check_common(epsilon0, eta, delta, n)?;
    let factor = (4.0 * delta + 2.0 * epsilon0) / epsilon0;
    ceil_measurements(factor * log_term(BoundMode::Grfcq, epsilon0, eta, n, 0)?)
}

/// Sparse analogue: `⌈(4δ + 2ε₀)/ε₀ · (2K ln(56N/(√K ε₀)) + ln(1/2η))⌉`.
pub fn min_measurements_qcs(epsilon0: f64, eta: f64, delta: f64, n: usize, k: usize) -> Result<u64> {
    check_common(epsilon0, eta, delta, n)?;
    let factor = (4.0 * delta + 2.0 * epsilon0) / epsilon0;
    ceil_measurements(factor * log_term(BoundMode::Qcs, epsilon0, eta, n, k)?)
}

/// Right-hand side of the relaxed condition at `M`:
/// `r + (4δ + 2ε₀)/ε₀ · (r ln(eM/r) + entropy)`, with `r ln(eM/r) = 0` at `r = 0`.
pub fn relaxed_rhs(params: &BoundParams, mode: BoundMode, m: f64) -> Result<f64> {
    check_common(params.epsilon0, params.eta, params.delta, params.n)?;
    let factor = (4.0 * params.delta + 2.0 * params.epsilon0) / params.epsilon0;
    let entropy = log_term(mode, params.epsilon0, params.eta, params.n, params.k)?;
    let r = params.r as f64;
    let slack = if params.r == 0 { 0.0 } else { r * (E * m / r).ln() };
    Ok(r + factor * (slack + entropy))
}

/// Smallest integer `M` with `M >= relaxed_rhs(M)`, found by iterating
/// `M ← ⌈rhs(M)⌉` upward from the `r = 0` value. The iterates never pass
/// the smallest solution, so the first fixed point is it.
pub fn min_measurements_relaxed(params: &BoundParams, mode: BoundMode) -> Result<u64> {
    let strict = BoundParams { r: 0, ..*params };
    let mut m = ceil_measurements(relaxed_rhs(&strict, mode, 1.0)?)?;
    for _ in 0..100 {
        let next = ceil_measurements(relaxed_rhs(params, mode, m as f64)?)?.max(m);
        if next == m {
            return Ok(m);
        }
        m = next;
    }
    Err(Error::Iteration(format!(
        "relaxed measurement count did not settle (last M = {m})"
    )))
}

/// `ρ̄ = ρ(1 + 2 ln(e/ρ))`, `C_ρ = 1/(1 − ρ̄)`, `D_ρ = 4ρ C_ρ ln(e/ρ)`.
pub fn rho_constants(rho: f64) -> Result<RhoConstants> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    let l = (E / rho).ln();
    let rho_bar = rho * (1.0 + 2.0 * l);
    if rho_bar >= 1.0 {
        return Err(Error::Domain(format!(
            "rho_bar = {rho_bar:.6} >= 1 for rho = {rho}; rho <= 0.1 is sufficient"
        )));
    }
    let c_rho = 1.0 / (1.0 - rho_bar);
    Ok(RhoConstants {
        rho_bar,
        c_rho,
        d_rho: 4.0 * rho * c_rho * l,
    })
}

/// Upper bound `(3/s)^N` on the size of an `s`-net of the unit ball.
pub fn covering_bound(s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0 && s <= 3.0) {
        return Err(Error::Domain(format!("s must lie in (0, 3], got {s}")));
    }
    Ok((3.0 / s).powi(n as i32))
}

/// The proximity `ε₀` that saturates the sample-complexity condition at `M`:
/// the root of `ε = (4(δ+1)/M)·entropy(ε)` in `(0, 2]`.
pub fn predicted_eps(m: u64, eta: f64, delta: f64, n: usize, k: Option<usize>, mode: BoundMode) -> Result<f64> {
    check_common(1.0, eta, delta, n)?;
    if m == 0 {
        return Err(Error::Domain("M must be >= 1".into()));
    }
    let k = match mode {
        BoundMode::Grfcq => 0,
        BoundMode::Qcs => k.ok_or_else(|| Error::Domain("QCS mode needs K".into()))?,
    };
    let scale = 4.0 * (delta + 1.0) / m as f64;
    // increasing in ε; its root is the fixed point
    let h = |e: f64| -> Result<f64> { Ok(e - scale * log_term(mode, e, eta, n, k)?) };
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 2.0);
    if h(hi)? < 0.0 {
        return Err(Error::Domain(format!(
            "M = {m} is below the count needed for epsilon0 = 2"
        )));
    }
    let count = match mode {
        BoundMode::Grfcq => n as f64,
        BoundMode::Qcs => 2.0 * k as f64,
    };
    let mut e = hi;
    for _ in 0..200 {
        let v = h(e)?;
        if v.abs() < 1e-13 {
            return Ok(e);
        }
        if v > 0.0 {
            hi = e;
        } else {
            lo = e;
        }
        // h'(ε) = 1 + scale·count/ε
        let newton = e - v / (1.0 + scale * count / e);
        e = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi {
            return Ok(e);
        }
    }
    Err(Error::Iteration("predicted_eps solver did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // A second evaluator written from the formulas with products of logs
    // expanded and base-10 logs converted, to catch transcription slips.
    mod reference {
        pub fn ln(x: f64) -> f64 {
            x.log10() / std::f64::consts::LOG10_E
        }
        pub fn grfcq(eps: f64, eta: f64, delta: f64, n: f64) -> f64 {
            (4.0 * delta / eps + 2.0) * (n * (ln(29.0) + 0.5 * ln(n) - ln(eps)) - ln(2.0) - ln(eta))
        }
        pub fn qcs(eps: f64, eta: f64, delta: f64, n: f64, k: f64) -> f64 {
            (4.0 * delta / eps + 2.0) * (2.0 * k * (ln(56.0) + ln(n) - 0.5 * ln(k) - ln(eps)) - ln(2.0 * eta))
        }
        pub fn rho(rho: f64) -> (f64, f64, f64) {
            let rho_bar = rho + 2.0 * rho * (1.0 - ln(rho));
            let c = 1.0 / (1.0 - rho_bar);
            (rho_bar, c, 4.0 * rho * c * (1.0 - ln(rho)))
        }
    }

    #[test]
    fn theorem_one_example() {
        let expected = (10.0 * (4.0 * 116f64.ln() + 5f64.ln())).ceil() as u64;
        assert_eq!(min_measurements_grfcq(0.5, 0.1, 1.0, 4).unwrap(), expected);
        assert_eq!(expected, 207);
    }

    #[test]
    fn qcs_example() {
        let direct = (10.0 * (6.0 * (56.0 * 32.0 / (3f64.sqrt() * 0.5)).ln() + 5f64.ln())).ceil() as u64;
        assert_eq!(min_measurements_qcs(0.5, 0.1, 1.0, 32, 3).unwrap(), direct);
    }

    #[test]
    fn small_delta_limit() {
        let n = 6;
        let limit = (2.0 * (n as f64 * (29.0 * (n as f64).sqrt() / 0.7).ln() + (1.0 / 0.2f64).ln())).ceil() as u64;
        assert_eq!(min_measurements_grfcq(0.7, 0.1, 1e-13, n).unwrap(), limit);
    }

    #[test]
    fn qcs_at_full_sparsity_is_comparable() {
        for n in 1..=64 {
            for eps in [0.1, 0.5, 1.0, 2.0] {
                let a = min_measurements_grfcq(eps, 0.1, 1.0, n).unwrap() as f64;
                let b = min_measurements_qcs(eps, 0.1, 1.0, n, n).unwrap() as f64;
                let ratio = b / a;
                assert!((1.0..=3.0).contains(&ratio), "N={n} eps={eps}: {ratio}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(min_measurements_grfcq(29.0, 0.1, 1.0, 1).is_err());
        assert!(min_measurements_grfcq(0.5, 0.0, 1.0, 4).is_err());
        assert!(min_measurements_grfcq(0.5, 0.1, 0.0, 4).is_err());
        assert!(min_measurements_qcs(0.5, 0.1, 1.0, 4, 5).is_err());
        assert!(min_measurements_qcs(0.5, 0.1, 1.0, 4, 0).is_err());
        assert!(covering_bound(0.0, 3).is_err());
        assert!(covering_bound(3.5, 3).is_err());
    }

    #[test]
    fn relaxed_examples() {
        let p = BoundParams {
            epsilon0: 0.5,
            eta: 0.1,
            delta: 1.0,
            n: 8,
            k: 0,
            r: 2,
        };
        let m = min_measurements_relaxed(&p, BoundMode::Grfcq).unwrap();
        // substitute and verify minimality
        assert!(m as f64 >= relaxed_rhs(&p, BoundMode::Grfcq, m as f64).unwrap());
        assert!(((m - 1) as f64) < relaxed_rhs(&p, BoundMode::Grfcq, (m - 1) as f64).unwrap());
        let strict = BoundParams { r: 0, ..p };
        assert_eq!(
            min_measurements_relaxed(&strict, BoundMode::Grfcq).unwrap(),
            min_measurements_grfcq(0.5, 0.1, 1.0, 8).unwrap()
        );
        let mut last = 0;
        for r in 0..20 {
            let m = min_measurements_relaxed(&BoundParams { r, ..p }, BoundMode::Grfcq).unwrap();
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn rho_examples() {
        let c = rho_constants(0.1).unwrap();
        assert!((c.rho_bar - 0.1 * (1.0 + 2.0 * (10.0 * E).ln())).abs() < 1e-15);
        assert!((c.rho_bar - 0.76052).abs() < 1e-5);
        assert!(c.c_rho > 4.17 && c.c_rho < 4.2);
        assert!((c.d_rho - 5.516).abs() < 1e-2);
        let tiny = rho_constants(1e-9).unwrap();
        assert!((tiny.c_rho - 1.0).abs() < 1e-6 && tiny.d_rho < 1e-6);
        assert!(rho_constants(0.0).is_err());
        assert!(rho_constants(0.5).is_err());
    }

    #[test]
    fn rho_boundary_is_bracketed() {
        let bar = |r: f64| r * (1.0 + 2.0 * (E / r).ln());
        let (mut lo, mut hi) = (0.1, 0.2);
        assert!(bar(lo) < 1.0 && bar(hi) > 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if bar(mid) < 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!(rho_constants(lo * (1.0 - 1e-9)).is_ok());
        assert!(rho_constants(hi * (1.0 + 1e-9)).is_err());
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_bound(3.0, 7).unwrap(), 1.0);
        assert_eq!(covering_bound(1.5, 3).unwrap(), 8.0);
    }

    #[test]
    fn predicted_eps_examples() {
        let e = predicted_eps(10_000, 0.1, 1.0, 8, None, BoundMode::Grfcq).unwrap();
        let rhs = 8.0 / 1e4 * (8.0 * (29.0 * 8f64.sqrt() / e).ln() + 5f64.ln());
        assert!((e - rhs).abs() < 1e-10, "{e} vs {rhs}");
        let mut last = f64::INFINITY;
        for m in [300u64, 1000, 3000, 10_000, 100_000] {
            let e = predicted_eps(m, 0.1, 1.0, 8, None, BoundMode::Grfcq).unwrap();
            assert!(e < last);
            last = e;
        }
        assert!(predicted_eps(10, 0.1, 1.0, 8, None, BoundMode::Grfcq).is_err());
        let q = predicted_eps(5000, 0.1, 1.0, 32, Some(3), BoundMode::Qcs).unwrap();
        let rhs = 8.0 / 5000.0 * (6.0 * (56.0 * 32.0 / (3f64.sqrt() * q)).ln() + 5f64.ln());
        assert!((q - rhs).abs() < 1e-10);
        assert!(predicted_eps(5000, 0.1, 1.0, 32, None, BoundMode::Qcs).is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_reference(
            eps in 0.01f64..2.0, eta in 0.001f64..0.9, delta in 0.01f64..5.0, n in 1usize..200, kf in 0.0f64..1.0,
        ) {
            let k = 1 + ((n - 1) as f64 * kf) as usize;
            let a = min_measurements_grfcq(eps, eta, delta, n).unwrap();
            let b = reference::grfcq(eps, eta, delta, n as f64);
            prop_assert!((a as f64 - b.ceil().max(1.0)).abs() <= 1.0);
            prop_assert!(a as f64 >= b - 1e-9 * b.abs() && (a as f64) < b.max(0.0) + 1.0 + 1e-9 * b.abs());
            let a = min_measurements_qcs(eps, eta, delta, n, k).unwrap();
            let b = reference::qcs(eps, eta, delta, n as f64, k as f64);
            prop_assert!(a as f64 >= b - 1e-9 * b.abs() && (a as f64) < b.max(0.0) + 1.0 + 1e-9 * b.abs());
        }

        #[test]
        fn rho_agrees_with_reference(rho in 1e-6f64..0.15) {
            let (rb, c, d) = reference::rho(rho);
            match rho_constants(rho) {
                Ok(v) => {
                    prop_assert!((v.rho_bar - rb).abs() < 1e-12);
                    prop_assert!((v.c_rho - c).abs() < 1e-9 * c);
                    prop_assert!((v.d_rho - d).abs() < 1e-9 * d.max(1e-12));
                    prop_assert!(v.c_rho >= 1.0 && v.d_rho >= 4.0 * rho);
                }
                Err(_) => prop_assert!(rb >= 1.0 - 1e-12),
            }
        }

        #[test]
        fn relaxed_zero_matches_strict(
            eps in 0.05f64..2.0, eta in 0.001f64..0.5, delta in 0.05f64..3.0, n in 2usize..100, kf in 0.0f64..1.0,
        ) {
            let k = 1 + ((n - 1) as f64 * kf) as usize;
            let p = BoundParams { epsilon0: eps, eta, delta, n, k, r: 0 };
            prop_assert_eq!(min_measurements_relaxed(&p, BoundMode::Grfcq).unwrap(), min_measurements_grfcq(eps, eta, delta, n).unwrap());
            prop_assert_eq!(min_measurements_relaxed(&p, BoundMode::Qcs).unwrap(), min_measurements_qcs(eps, eta, delta, n, k).unwrap());
        }

        #[test]
        fn monotone_in_inputs(eps in 0.05f64..2.0, n in 1usize..100) {
            prop_assert!(min_measurements_grfcq(eps / 2.0, 0.1, 1.0, n).unwrap() > min_measurements_grfcq(eps, 0.1, 1.0, n).unwrap());
            prop_assert!(min_measurements_grfcq(eps, 0.1, 1.0, n + 1).unwrap() >= min_measurements_grfcq(eps, 0.1, 1.0, n).unwrap());
            let k = 1 + n / 3;
            prop_assert!(min_measurements_qcs(eps, 0.1, 1.0, n + 1, k).unwrap() >= min_measurements_qcs(eps, 0.1, 1.0, n, k).unwrap());
            if k < n {
                prop_assert!(min_measurements_qcs(eps, 0.1, 1.0, n, k + 1).unwrap() >= min_measurements_qcs(eps, 0.1, 1.0, n, k).unwrap());
            }
        }

        #[test]
        fn covering_decreases(s in 0.01f64..2.9, n in 1usize..20) {
            prop_assert!(covering_bound(s, n).unwrap() > covering_bound(s + 0.1, n).unwrap());
        }
    }
}
