//! Small descriptive-statistics helpers shared by the Monte Carlo code.

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() - 1) as f64
}

pub fn stderr_of_mean(values: &[f64]) -> f64 {
    (variance(values) / values.len() as f64).sqrt()
}

/// Linear-interpolated quantile (`q` in [0, 1]) of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Kolmogorov–Smirnov statistic of `samples` against U[a, b]. Sorts in place.
pub fn ks_uniform(samples: &mut [f64], a: f64, b: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - a) / (b - a)).clamp(0.0, 1.0);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// One-sided sign-test p-value `P[X >= successes]` for `X ~ Bin(trials, 1/2)`.
pub fn sign_test_upper(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    // log-space binomial tail
    let ln_half = -(trials as f64) * std::f64::consts::LN_2;
    let mut ln_c = 0.0f64; // ln C(trials, 0)
    let mut tail = 0.0;
    for k in 0..=trials {
        if k > 0 {
            ln_c += ((trials - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= successes {
            tail += (ln_c + ln_half).exp();
        }
    }
    tail.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_upper(0, 10) - 1.0).abs() < 1e-12);
        assert!((sign_test_upper(10, 10) - 2f64.powi(-10)).abs() < 1e-15);
        // P[X >= 8 | n = 10] = (45 + 10 + 1) / 1024
        assert!((sign_test_upper(8, 10) - 56.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn ks_of_grid_is_small() {
        let mut v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&mut v, 0.0, 1.0) <= 0.0005 + 1e-12);
    }
}
