//! Consistent reconstruction and the least-squares baseline.
//!
//! [`pocs_consistent`] finds a point of the consistency cell by cyclic
//! projections onto the slabs (shrunk inward by a margin `μ`, since the
//! cells are half-open) followed by a projection onto the ball. Success is
//! declared only after re-encoding the iterate and matching every code.
//!
//! The solver also stops early when the shrunk problem is provably empty.
//! For any point `z` of the intersection, one sweep of projections obeys
//! `‖u_k − z‖² − ‖u_{k+1} − z‖² ≥ Σ‖step‖²`, and both distances are at most
//! `2R`, so a feasible problem always satisfies
//! `Σ‖step‖² ≤ 4R·‖u_{k+1} − u_k‖`. A sweep that violates this inequality
//! certifies infeasibility.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantizer::decode;
use crate::sensing::{dot, sense, SensingEnsemble};

/// Ball projections land on this fraction of the radius so that ball
/// membership survives rounding.
const BALL_SHRINK: f64 = 1.0 - 1e-12;

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PocsOptions {
    /// Radius `R` of the signal ball.
    pub radius: f64,
    /// Slab margin `μ`; `None` means `1e-9·δ`.
    pub tol: Option<f64>,
    /// Maximum number of full sweeps.
    pub max_iter: usize,
    /// Starting point (ambient coordinates); zero when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for PocsOptions {
    fn default() -> Self {
        Self {
            radius: 1.0,
            tol: None,
            max_iter: 100_000,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub x_star: Vec<f64>,
    /// Full sweeps performed.
    pub iterations: usize,
    /// Re-encoded codes match the target and `‖x*‖ ≤ R`.
    pub consistent: bool,
    /// Largest slab violation of `x*` in the coordinate `φ_j·u`.
    pub residual: f64,
}

/// Default enumeration cap for [`qcs_enumerate`].
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000;

fn verify(ensemble: &SensingEnsemble, codes: &[i64], x: &[f64], radius: f64) -> Result<bool> {
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    Ok(norm2 <= radius * radius && sense(ensemble, x)?.codes == codes)
}

fn residual(ensemble: &SensingEnsemble, codes: &[i64], x: &[f64]) -> f64 {
    let delta = ensemble.delta();
    ensemble
        .rows()
        .zip(ensemble.dither())
        .zip(codes)
        .map(|((row, &xi), &k)| {
            let p = dot(row, x);
            let lo = delta * k as f64 - xi;
            let hi = delta * (k + 1) as f64 - xi;
            (lo - p).max(p - hi).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Core loop on the coordinates `support`. `observe` sees the ambient
/// iterate at the start of every sweep.
pub(crate) fn pocs_core(
    ensemble: &SensingEnsemble,
    codes: &[i64],
    support: &[usize],
    opts: &PocsOptions,
    observe: &mut dyn FnMut(&[f64]),
) -> Result<ReconstructionResult> {
    let (m, n) = (ensemble.m(), ensemble.n());
    if codes.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: codes.len(),
        });
    }
    if support.is_empty() || support.iter().any(|&i| i >= n) || support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "support must be sorted, unique, non-empty and within 0..{n}"
        )));
    }
    if !(opts.radius > 0.0) {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    let delta = ensemble.delta();
    let mu = opts.tol.unwrap_or(1e-9 * delta);
    if !(mu > 0.0) || 2.0 * mu >= delta {
        return Err(Error::InvalidInput(format!("margin {mu} must lie in (0, δ/2)")));
    }
    let dim = support.len();
    let rows: Vec<f64> = ensemble
        .rows()
        .flat_map(|row| support.iter().map(move |&i| row[i]))
        .collect();
    let row = |j: usize| &rows[j * dim..(j + 1) * dim];
    let norms2: Vec<f64> = (0..m).map(|j| dot(row(j), row(j))).collect();
    let bounds: Vec<(f64, f64)> = codes
        .iter()
        .zip(ensemble.dither())
        .map(|(&k, &xi)| (delta * k as f64 - xi + mu, delta * (k + 1) as f64 - xi - mu))
        .collect();

    let mut ambient = vec![0.0; n];
    let mut u: Vec<f64> = match &opts.start {
        Some(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
            support.iter().map(|&i| s[i]).collect()
        }
        None => vec![0.0; dim],
    };
    let to_ambient = |u: &[f64], out: &mut Vec<f64>| {
        out.iter_mut().for_each(|v| *v = 0.0);
        support.iter().zip(u).for_each(|(&i, &v)| out[i] = v);
    };
    let r = opts.radius;
    let mut iterations = 0;
    let mut previous = u.clone();
    loop {
        to_ambient(&u, &mut ambient);
        observe(&ambient);
        if verify(ensemble, codes, &ambient, r)? {
            return Ok(ReconstructionResult {
                residual: residual(ensemble, codes, &ambient),
                x_star: ambient,
                iterations,
                consistent: true,
            });
        }
        if iterations >= opts.max_iter {
            break;
        }
        previous.copy_from_slice(&u);
        let mut steps2 = 0.0;
        let mut blocked = false;
        for j in 0..m {
            let p = dot(row(j), &u);
            let (lo, hi) = bounds[j];
            let target = p.clamp(lo, hi);
            if target == p {
                continue;
            }
            if norms2[j] == 0.0 {
                // the row is blind on this support and its slab excludes 0
                blocked = true;
                break;
            }
            let scale = (target - p) / norms2[j];
            u.iter_mut().zip(row(j)).for_each(|(v, &a)| *v += scale * a);
            steps2 += scale * scale * norms2[j];
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > r * BALL_SHRINK {
            let s = r * BALL_SHRINK / norm;
            steps2 += (norm - r * BALL_SHRINK).powi(2);
            u.iter_mut().for_each(|v| *v *= s);
        }
        iterations += 1;
        let moved = u
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if blocked || steps2 > 4.0 * r * moved * (1.0 + 1e-6) + 1e-300 {
            break;
        }
    }
    to_ambient(&u, &mut ambient);
    let consistent = verify(ensemble, codes, &ambient, r)?;
    Ok(ReconstructionResult {
        residual: residual(ensemble, codes, &ambient),
        x_star: ambient,
        iterations,
        consistent,
    })
}

/// Finds a point of `B_R ∩ cell(codes)` by cyclic POCS.
pub fn pocs_consistent(ensemble: &SensingEnsemble, codes: &[i64], opts: &PocsOptions) -> Result<ReconstructionResult> {
    let all: Vec<usize> = (0..ensemble.n()).collect();
    pocs_on_support(ensemble, codes, &all, opts)
}

/// As [`pocs_consistent`], restricted to vectors supported on `support`.
pub fn pocs_on_support(
    ensemble: &SensingEnsemble,
    codes: &[i64],
    support: &[usize],
    opts: &PocsOptions,
) -> Result<ReconstructionResult> {
    pocs_core(ensemble, codes, support, opts, &mut |_| {})
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Visits the `k`-subsets of `0..n` in lexicographic order until `f` returns `Some`.
fn for_each_subset<T>(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> Option<T>) -> Option<T> {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if let Some(out) = f(&idx) {
            return Some(out);
        }
        let mut i = k;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Summary of a support enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub result: ReconstructionResult,
    pub support: Vec<usize>,
    pub supports_tried: usize,
}

/// Exact `K`-sparse consistent reconstruction by trying every support in
/// lexicographic order; the first consistent one is returned.
pub fn qcs_enumerate(
    ensemble: &SensingEnsemble,
    codes: &[i64],
    k: usize,
    opts: &PocsOptions,
    cap: u128,
) -> Result<EnumerationResult> {
    let n = ensemble.n();
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("need 1 <= K <= N (K={k}, N={n})")));
    }
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::EnumerationCap { n, k, count, cap });
    }
    let mut tried = 0;
    let mut failure = None;
    let found = for_each_subset(n, k, |support| {
        tried += 1;
        match pocs_on_support(ensemble, codes, support, opts) {
            Ok(res) if res.consistent => Some(EnumerationResult {
                result: res,
                support: support.to_vec(),
                supports_tried: tried,
            }),
            Ok(_) => None,
            Err(e) => {
                failure = Some(e);
                Some(EnumerationResult {
                    result: ReconstructionResult {
                        x_star: vec![],
                        iterations: 0,
                        consistent: false,
                        residual: 0.0,
                    },
                    support: vec![],
                    supports_tried: tried,
                })
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    found.ok_or_else(|| Error::NotFound(format!("none of the {count} supports of size {k} is consistent")))
}

/// Least-squares estimate `argmin ‖Φu − (q − ξ)‖` via Householder QR.
/// Not consistency-enforcing.
pub fn linear_baseline(ensemble: &SensingEnsemble, codes: &[i64]) -> Result<Vec<f64>> {
    let (m, n) = (ensemble.m(), ensemble.n());
    if codes.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: codes.len(),
        });
    }
    if m < n {
        return Err(Error::InvalidDimension(format!(
            "least squares needs M >= N (M={m}, N={n})"
        )));
    }
    let spec = ensemble.spec();
    let a = DMatrix::from_row_slice(m, n, ensemble.matrix());
    let b = DVector::from_iterator(
        m,
        codes
            .iter()
            .zip(ensemble.dither())
            .map(|(&k, &xi)| decode(k, spec) - xi),
    );
    let (q, r) = a.qr().unpack();
    let diag = r.diagonal().map(f64::abs);
    let (lo, hi) = (diag.min(), diag.max());
    if !(lo > 1e-12 * hi.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularMatrix(lo));
    }
    let rhs = q.tr_mul(&b);
    let x = r.solve_upper_triangular(&rhs).ok_or(Error::SingularMatrix(lo))?;
    Ok(x.iter().copied().collect())
}
