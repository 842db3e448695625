//! Consistency cells and their width.
//!
//! The cell of an observation `k` is the convex set
//! `{u : ‖u‖ ≤ R, supp(u) ⊆ T, ⌊(φ_j·u + ξ_j)/δ⌋ = k_j ∀j}`, an intersection of
//! half-open slabs `φ_j·u ∈ [δk_j − ξ_j, δ(k_j+1) − ξ_j)` with a ball (and
//! optionally a coordinate subspace). Relaxed cells allow an ℓ1 code
//! discrepancy of at most `r`.
//!
//! Widths are measured by shooting rays from a member point: along a ray the
//! projection on each row is affine in `t`, so the first slab exit, and more
//! generally every grid crossing, has a closed form. The maximum over a set
//! of directions is a certified lower bound on the cell radius around the
//! center, since each reported witness is re-quantized and verified with
//! integer codes.

use crate::error::{Error, Result};
use crate::quantizer::{code_distance, encode, QuantizerSpec};
use crate::randkit::Stream;
use crate::sensing::{dot, sample_signal, sense, SensingEnsemble, SignalModel};

/// Relative shrink applied to ray exits before a witness is emitted.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

const UNIT_TOL: f64 = 1e-9;

/// A strict consistency cell, optionally restricted to a coordinate support.
///
/// Rows are stored restricted to the support coordinates, so every ray
/// computation runs in the dimension of the subspace.
#[derive(Debug, Clone)]
pub struct ConsistencyCell {
    n: usize,
    coords: Option<Vec<usize>>,
    dim: usize,
    rows: Vec<f64>,
    xi: Vec<f64>,
    codes: Vec<i64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    spec: Option<QuantizerSpec>,
    radius: f64,
}

/// Result of a width search.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthEstimate {
    pub value: f64,
    pub witness: Vec<f64>,
    pub num_directions: usize,
    pub center: Vec<f64>,
}

/// Builds the cell of `codes` under `ensemble`, inside the ball of radius
/// `ball_radius` and, when given, the coordinate subspace `support`.
pub fn build_cell(
    ensemble: &SensingEnsemble,
    codes: &[i64],
    ball_radius: f64,
    support: Option<&[usize]>,
) -> Result<ConsistencyCell> {
    let n = ensemble.n();
    if codes.len() != ensemble.m() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.m(),
            got: codes.len(),
        });
    }
    if !(ball_radius > 0.0) || !ball_radius.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ball radius must be positive, got {ball_radius}"
        )));
    }
    let coords = match support {
        Some(t) => {
            if t.is_empty() || t.windows(2).any(|w| w[0] >= w[1]) || t.iter().any(|&i| i >= n) {
                return Err(Error::InvalidInput(format!(
                    "support must be sorted, unique, non-empty and within 0..{n}"
                )));
            }
            Some(t.to_vec())
        }
        None => None,
    };
    let dim = coords.as_ref().map_or(n, Vec::len);
    let mut rows = Vec::with_capacity(ensemble.m() * dim);
    for row in ensemble.rows() {
        match &coords {
            Some(t) => rows.extend(t.iter().map(|&i| row[i])),
            None => rows.extend_from_slice(row),
        }
    }
    let delta = ensemble.delta();
    let xi = ensemble.dither().to_vec();
    let lower = codes.iter().zip(&xi).map(|(&k, &x)| delta * k as f64 - x).collect();
    let upper = codes
        .iter()
        .zip(&xi)
        .map(|(&k, &x)| delta * (k + 1) as f64 - x)
        .collect();
    Ok(ConsistencyCell {
        n,
        coords,
        dim,
        rows,
        xi,
        codes: codes.to_vec(),
        lower,
        upper,
        spec: Some(ensemble.spec()),
        radius: ball_radius,
    })
}

/// Per-row geometry of a ray `x0 + t·d`: current projection and rate.
struct RayRow {
    offset: f64,
    rate: f64,
}

impl ConsistencyCell {
    /// The ball of radius `radius` in `R^n`, with no slab constraint.
    pub fn unconstrained(n: usize, radius: f64) -> Result<Self> {
        if n == 0 || !(radius > 0.0) {
            return Err(Error::InvalidInput("need n >= 1 and a positive radius".into()));
        }
        Ok(Self {
            n,
            coords: None,
            dim: n,
            rows: Vec::new(),
            xi: Vec::new(),
            codes: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            spec: None,
            radius,
        })
    }

    pub fn num_slabs(&self) -> usize {
        self.codes.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    /// Dimension of the subspace the cell lives in.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> Option<&[usize]> {
        self.coords.as_deref()
    }

    pub fn codes(&self) -> &[i64] {
        &self.codes
    }

    pub fn ball_radius(&self) -> f64 {
        self.radius
    }

    /// Slab bounds `(l_j, u_j)` in the coordinate `φ_j·u`.
    pub fn slab(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.dim..(j + 1) * self.dim]
    }

    /// Maps an ambient vector to subspace coordinates; `None` if it leaves the support.
    fn reduce(&self, v: &[f64]) -> Result<Option<Vec<f64>>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(match &self.coords {
            None => Some(v.to_vec()),
            Some(t) => {
                let mut inside = vec![false; self.n];
                t.iter().for_each(|&i| inside[i] = true);
                if v.iter().zip(&inside).any(|(x, &keep)| !keep && *x != 0.0) {
                    None
                } else {
                    Some(t.iter().map(|&i| v[i]).collect())
                }
            }
        })
    }

    fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        match &self.coords {
            None => reduced.to_vec(),
            Some(t) => {
                let mut out = vec![0.0; self.n];
                t.iter().zip(reduced).for_each(|(&i, &v)| out[i] = v);
                out
            }
        }
    }

    /// Codes of a subspace point, computed exactly as sensing does.
    fn codes_of(&self, reduced: &[f64]) -> Result<Vec<i64>> {
        let Some(spec) = self.spec else {
            return Ok(Vec::new());
        };
        (0..self.num_slabs())
            .map(|j| encode(dot(self.row(j), reduced) + self.xi[j], spec))
            .collect()
    }

    fn in_ball(&self, reduced: &[f64]) -> bool {
        reduced.iter().map(|v| v * v).sum::<f64>() <= self.radius * self.radius
    }

    /// ℓ1 code discrepancy of `u` to the cell codes, or `None` when `u` is
    /// outside the ball or the support.
    pub fn discrepancy(&self, u: &[f64]) -> Result<Option<u64>> {
        let Some(red) = self.reduce(u)? else {
            return Ok(None);
        };
        if !self.in_ball(&red) {
            return Ok(None);
        }
        Ok(Some(code_distance(&self.codes_of(&red)?, &self.codes)))
    }

    /// Strict membership, verified by integer code equality.
    pub fn contains(&self, u: &[f64]) -> Result<bool> {
        Ok(self.discrepancy(u)? == Some(0))
    }

    /// Relaxed membership: discrepancy at most `r`.
    pub fn contains_relaxed(&self, u: &[f64], r: u64) -> Result<bool> {
        Ok(matches!(self.discrepancy(u)?, Some(d) if d <= r))
    }

    fn check_ray(&self, x0: &[f64], d: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.contains(x0)? {
            return Err(Error::Precondition("ray origin is not in the cell".into()));
        }
        let red_d = self
            .reduce(d)?
            .ok_or_else(|| Error::Precondition("direction leaves the cell support".into()))?;
        let norm = red_d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Precondition(format!("direction must be unit norm, got {norm}")));
        }
        let red_x = self.reduce(x0)?.expect("member lies in the support");
        Ok((red_x, red_d))
    }

    fn ball_exit(&self, x0: &[f64], d: &[f64]) -> f64 {
        let b = dot(x0, d);
        let c = dot(x0, x0) - self.radius * self.radius;
        let disc = (b * b - c).max(0.0);
        (-b + disc.sqrt()).max(0.0)
    }

    fn ray_rows<'s>(&'s self, proj0: &'s [f64], d: &'s [f64]) -> impl Iterator<Item = RayRow> + 's {
        proj0.iter().enumerate().map(move |(j, &p)| RayRow {
            offset: p,
            rate: dot(self.row(j), d),
        })
    }

    /// Time of the first grid crossing of row `j`, or infinity when the row is parallel to the ray.
    fn first_crossing(&self, j: usize, row: &RayRow) -> f64 {
        if row.rate > 0.0 {
            ((self.upper[j] - row.offset) / row.rate).max(0.0)
        } else if row.rate < 0.0 {
            ((self.lower[j] - row.offset) / row.rate).max(0.0)
        } else {
            f64::INFINITY
        }
    }

    /// Exit time along a subspace ray whose origin has projections `proj0`.
    fn exit_time(&self, x0: &[f64], proj0: &[f64], d: &[f64], r: u64) -> f64 {
        let t_ball = self.ball_exit(x0, d);
        let delta = self.spec.map_or(1.0, |s| s.delta());
        if r == 0 {
            return self
                .ray_rows(proj0, d)
                .enumerate()
                .map(|(j, row)| self.first_crossing(j, &row))
                .fold(t_ball, f64::min);
        }
        // Each row crosses grid boundaries in an arithmetic progression of
        // times; the relaxed exit is the (r+1)-th smallest crossing overall.
        let mut events = Vec::new();
        for (j, row) in self.ray_rows(proj0, d).enumerate() {
            let t0 = self.first_crossing(j, &row);
            if t0 >= t_ball {
                continue;
            }
            let step = delta / row.rate.abs();
            for i in 0..=r {
                let t = t0 + i as f64 * step;
                if t >= t_ball {
                    break;
                }
                events.push(t);
            }
        }
        let r = r as usize;
        if events.len() <= r {
            return t_ball;
        }
        let (_, nth, _) = events.select_nth_unstable_by(r, f64::total_cmp);
        nth.min(t_ball)
    }

    fn projections(&self, x0: &[f64]) -> Vec<f64> {
        (0..self.num_slabs()).map(|j| dot(self.row(j), x0)).collect()
    }

    fn width_search(&self, center: &[f64], directions: usize, r: u64, stream: &mut Stream) -> Result<WidthEstimate> {
        if directions == 0 {
            return Err(Error::Precondition("need at least one direction".into()));
        }
        if !self.contains(center)? {
            return Err(Error::Precondition("center is not in the cell".into()));
        }
        let x0 = self.reduce(center)?.expect("member lies in the support");
        let proj0 = self.projections(&x0);
        let mut best_t = -1.0;
        let mut best_d = vec![0.0; self.dim];
        let mut consider = |d: Vec<f64>| {
            let t = self.exit_time(&x0, &proj0, &d, r);
            if t > best_t {
                best_t = t;
                best_d = d;
            }
        };
        for _ in 0..directions {
            consider(stream.unit_sphere(self.dim)?);
        }
        for axis in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; self.dim];
                d[axis] = sign;
                consider(d);
            }
        }
        // Pull the witness inside until it verifies with integer codes.
        let mut margin = BOUNDARY_MARGIN;
        let witness = loop {
            let t = best_t * (1.0 - margin);
            let w: Vec<f64> = x0.iter().zip(&best_d).map(|(a, b)| a + t * b).collect();
            let ok = self.in_ball(&w) && code_distance(&self.codes_of(&w)?, &self.codes) <= r;
            if ok {
                break w;
            }
            if margin >= 1e-3 {
                break x0.clone();
            }
            margin *= 10.0;
        };
        let value = witness
            .iter()
            .zip(&x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(WidthEstimate {
            value,
            witness: self.expand(&witness),
            num_directions: directions + 2 * self.dim,
            center: center.to_vec(),
        })
    }
}

/// `sup{t ≥ 0 : x0 + t·d ∈ cell}`.
pub fn ray_exit_strict(cell: &ConsistencyCell, x0: &[f64], d: &[f64]) -> Result<f64> {
    let (x, dir) = cell.check_ray(x0, d)?;
    Ok(cell.exit_time(&x, &cell.projections(&x), &dir, 0))
}

/// `sup{t ≥ 0 : at most r grid crossings on [x0, x0 + t·d] and ‖x0 + t·d‖ ≤ R}`.
pub fn ray_exit_relaxed(cell: &ConsistencyCell, x0: &[f64], d: &[f64], r: u64) -> Result<f64> {
    let (x, dir) = cell.check_ray(x0, d)?;
    Ok(cell.exit_time(&x, &cell.projections(&x), &dir, r))
}

/// Largest ray exit from `center` over `directions` random unit directions
/// plus the signed coordinate axes of the cell subspace.
pub fn estimate_width(
    cell: &ConsistencyCell,
    center: &[f64],
    directions: usize,
    stream: &mut Stream,
) -> Result<WidthEstimate> {
    cell.width_search(center, directions, 0, stream)
}

/// Width of the relaxed cell of discrepancy budget `r`, measured as in [`estimate_width`].
pub fn estimate_width_relaxed(
    cell: &ConsistencyCell,
    center: &[f64],
    directions: usize,
    r: u64,
    stream: &mut Stream,
) -> Result<WidthEstimate> {
    cell.width_search(center, directions, r, stream)
}

/// One trial of [`empirical_worst_case`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialWidth {
    pub signal: Vec<f64>,
    pub width: WidthEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseReport {
    pub max: f64,
    pub trials: Vec<TrialWidth>,
}

/// Width of the cell of one sampled signal. Sparse signals are measured
/// inside their own support.
pub fn signal_cell_width(
    ensemble: &SensingEnsemble,
    model: SignalModel,
    directions: usize,
    r: u64,
    stream: &mut Stream,
) -> Result<TrialWidth> {
    let signal = sample_signal(model, stream)?;
    let obs = sense(ensemble, &signal.x)?;
    let cell = build_cell(ensemble, &obs.codes, 1.0, signal.support.as_deref())?;
    let width = cell.width_search(&signal.x, directions, r, stream)?;
    Ok(TrialWidth {
        signal: signal.x,
        width,
    })
}

/// Monte Carlo outer maximization of the cell width over signals of `model`.
pub fn empirical_worst_case(
    ensemble: &SensingEnsemble,
    model: SignalModel,
    trials: usize,
    directions: usize,
    stream: &mut Stream,
) -> Result<WorstCaseReport> {
    if trials == 0 {
        return Err(Error::Precondition("need at least one trial".into()));
    }
    if model.dim() != ensemble.n() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.n(),
            got: model.dim(),
        });
    }
    let trials = (0..trials)
        .map(|_| signal_cell_width(ensemble, model, directions, 0, stream))
        .collect::<Result<Vec<_>>>()?;
    let max = trials.iter().map(|t| t.width.value).fold(0.0, f64::max);
    Ok(WorstCaseReport { max, trials })
}
