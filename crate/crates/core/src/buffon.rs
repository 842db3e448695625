//! The Buffon dumbbell: two balls joined by a segment, thrown onto a
//! randomly dithered 1-D grid through a random projection.
//!
//! The central quantity is the probability that the projected balls still
//! contain two points sharing a quantization code. This module computes it
//! three ways: Monte Carlo over `(φ, ξ)` via [`estimate_p1`], exact
//! quadrature of the conditional probability at fixed `‖φ‖` via
//! [`conditional_integral`], and the chain of closed-form upper bounds
//! ending in [`lemma1_bound`].

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_pieces};
use crate::quantizer::{encode, QuantizerSpec};
use crate::randkit::{derive_stream, Seed, Stream};
use crate::sensing::dot;

/// `λ = 1 − √(2/π)`, the fraction used to size the dumbbell's balls.
pub const LAMBDA: f64 = 0.202_115_439_197_134_6;

const CHUNK: u64 = 1 << 14;

/// `κ_N = Γ(N/2) / (√π Γ((N−1)/2))`; `2κ_N` is the density of `|⟨u, e⟩|`
/// at zero for `u` uniform on the sphere of `R^N`.
pub fn kappa(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("kappa needs N >= 2, got {n}")));
    }
    let n = n as f64;
    Ok((ln_gamma(n / 2.0) - ln_gamma((n - 1.0) / 2.0)).exp() / PI.sqrt())
}

/// Ball radius `s′ = λ‖p − q‖ / (4κ_N)`.
pub fn lemma_radius(p: &[f64], q: &[f64], n: usize) -> Result<f64> {
    if p.len() != n || q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if p.len() != n { p.len() } else { q.len() },
        });
    }
    let dist = distance(p, q);
    if dist == 0.0 {
        return Err(Error::Domain("p and q coincide".into()));
    }
    Ok(LAMBDA / (4.0 * kappa(n)?) * dist)
}

/// `(1 − 3α/(8 + 4α))^M`.
pub fn lemma1_bound(alpha: f64, m: u32) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok((1.0 - 3.0 * alpha / (8.0 + 4.0 * alpha)).powi(m as i32))
}

fn distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumbbellConfig {
    p: Vec<f64>,
    q: Vec<f64>,
    radius: f64,
    spec: QuantizerSpec,
}

impl DumbbellConfig {
    pub fn new(p: Vec<f64>, q: Vec<f64>, radius: f64, delta: f64) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: q.len(),
            });
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("radius must be >= 0, got {radius}")));
        }
        Ok(Self {
            p,
            q,
            radius,
            spec: QuantizerSpec::new(delta)?,
        })
    }

    /// Centres `0` and `α δ e_1` in `R^N` with the lemma's radius.
    pub fn lemma(n: usize, alpha: f64, delta: f64) -> Result<Self> {
        let p = vec![0.0; n];
        let mut q = vec![0.0; n];
        if let Some(first) = q.first_mut() {
            *first = alpha * delta;
        }
        let radius = lemma_radius(&p, &q, n)?;
        Self::new(p, q, radius, delta)
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn delta(&self) -> f64 {
        self.spec.delta()
    }

    /// `‖p − q‖ / δ`.
    pub fn alpha(&self) -> f64 {
        distance(&self.p, &self.q) / self.spec.delta()
    }
}

/// Whether some point of each ball maps to the same code under
/// `u ↦ Q_δ(⟨φ, u⟩ + ξ)`.
pub fn dumbbell_consistent_event(phi: &[f64], xi: f64, cfg: &DumbbellConfig) -> Result<bool> {
    if phi.len() != cfg.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim(),
            got: phi.len(),
        });
    }
    let (a, b) = (dot(phi, &cfg.p), dot(phi, &cfg.q));
    let h = cfg.radius * dot(phi, phi).sqrt();
    let lo = a.min(b) + h;
    let hi = a.max(b) - h;
    if lo >= hi {
        return Ok(true);
    }
    Ok(encode(lo + xi, cfg.spec)? == encode(hi + xi, cfg.spec)?)
}

/// Law of the projection vector in [`estimate_p1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionLaw {
    /// `φ ~ N(0, I_N)`.
    Gaussian,
    /// `φ` uniform on the unit sphere: the classic needle, and the law at fixed `‖φ‖ = 1`.
    UnitSphere,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbEstimate {
    pub p_hat: f64,
    pub throws: u64,
    pub stderr: f64,
}

impl ProbEstimate {
    fn from_counts(hits: u64, throws: u64) -> Self {
        let p_hat = hits as f64 / throws as f64;
        Self {
            p_hat,
            throws,
            stderr: (p_hat * (1.0 - p_hat) / throws as f64).sqrt(),
        }
    }
}

/// Monte Carlo estimate of the single-projection probability of
/// [`dumbbell_consistent_event`] with `ξ ~ U[0, δ)`. Throws are split into
/// fixed chunks with their own substreams, so the result does not depend on
/// the thread count.
pub fn estimate_p1(cfg: &DumbbellConfig, throws: u64, law: DirectionLaw, seed: Seed) -> Result<ProbEstimate> {
    if throws == 0 {
        return Err(Error::InvalidInput("throws must be >= 1".into()));
    }
    let n = cfg.dim();
    let delta = cfg.delta();
    let chunks = throws.div_ceil(CHUNK);
    let hits = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = Stream::new(derive_stream(seed, c));
            let count = CHUNK.min(throws - c * CHUNK);
            let mut hits = 0u64;
            let mut phi = vec![0.0; n];
            for _ in 0..count {
                match law {
                    DirectionLaw::Gaussian => phi.iter_mut().for_each(|v| *v = stream.gauss()),
                    DirectionLaw::UnitSphere => phi = stream.unit_sphere(n)?,
                }
                let xi = stream.uniform(0.0, delta)?;
                hits += dumbbell_consistent_event(&phi, xi, cfg)? as u64;
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(ProbEstimate::from_counts(hits, throws))
}

/// Probability of the dumbbell event for `φ` uniform on the sphere scaled
/// to a fixed norm, as a function of `a = L‖φ‖/δ` and `ρ = 2s′/L`:
/// `1 − 2κ_N a ∫₀¹ (1−v²)^{(N−3)/2} [(v−ρ)₊ − (v−ρ−1/a)₊] dv`.
///
/// The substitution `v = sin u` removes the endpoint singularity at `N = 2`.
pub fn conditional_integral(a: f64, rho_ratio: f64, n: usize) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    if !(rho_ratio >= 0.0 && rho_ratio.is_finite()) {
        return Err(Error::Domain(format!("rho ratio must be >= 0, got {rho_ratio}")));
    }
    let kappa = kappa(n)?;
    Ok(conditional(a, rho_ratio, n, kappa))
}

fn conditional(a: f64, rho: f64, n: usize, kappa: f64) -> f64 {
    if rho >= 1.0 || a == 0.0 {
        return 1.0;
    }
    let pow = (n - 2) as i32;
    let u1 = rho.asin();
    let top = rho + 1.0 / a;
    let u2 = if top >= 1.0 { FRAC_PI_2 } else { top.asin() };
    let ramp = integrate(|u| u.cos().powi(pow) * (u.sin() - rho), u1, u2, 1e-15, 1e-12);
    let flat = if u2 < FRAC_PI_2 {
        integrate(|u| u.cos().powi(pow), u2, FRAC_PI_2, 1e-15, 1e-12).map(|v| v / a)
    } else {
        Ok(0.0)
    };
    // smooth polynomial-trig integrands on finite intervals always converge
    let total = ramp.expect("ramp quadrature") + flat.expect("flat quadrature");
    1.0 - 2.0 * kappa * a * total
}

/// Density of `‖φ‖` for `φ ~ N(0, I_N)`: `c_N t^{N−1} e^{−t²/2}`,
/// `c_N = 2^{1−N/2} / Γ(N/2)`.
pub fn chi_density(n: usize, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let n = n as f64;
    ((1.0 - n / 2.0) * std::f64::consts::LN_2 - ln_gamma(n / 2.0) + (n - 1.0) * t.ln() - 0.5 * t * t).exp()
}

/// `E‖φ‖ = √2 Γ((N+1)/2) / Γ(N/2)`.
pub fn chi_mean(n: usize) -> f64 {
    let n = n as f64;
    std::f64::consts::SQRT_2 * (ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp()
}

/// `∫ P(αt, ρ | N) γ_N(t) dt` over `[0, E‖φ‖ + 10√N]`: the single-projection
/// probability for Gaussian `φ` and balls of relative size `ρ = 2s′/L`.
pub fn chi_mixture(n: usize, alpha: f64, rho_ratio: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let kappa = kappa(n)?;
    if !(rho_ratio >= 0.0) {
        return Err(Error::Domain(format!("rho ratio must be >= 0, got {rho_ratio}")));
    }
    let upper = chi_mean(n) + 10.0 * (n as f64).sqrt();
    let mut breaks = vec![chi_mean(n)];
    if rho_ratio < 1.0 {
        // kink where the far edge of the ramp reaches v = 1
        breaks.push(1.0 / (alpha * (1.0 - rho_ratio)));
    }
    integrate_pieces(
        |t| conditional(alpha * t, rho_ratio, n, kappa) * chi_density(n, t),
        0.0,
        upper,
        &breaks,
        1e-13,
        1e-10,
    )
}

/// `λ + (1−λ)·2 / (2 + √(π/2)(1−λ)α)`.
pub fn chain_bound(alpha: f64) -> f64 {
    LAMBDA + (1.0 - LAMBDA) * 2.0 / (2.0 + FRAC_PI_2.sqrt() * (1.0 - LAMBDA) * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaChainReport {
    pub n: usize,
    pub alpha: f64,
    pub estimate: ProbEstimate,
    pub mixture: f64,
    pub chain_bound: f64,
    pub lemma_bound: f64,
    /// `p̂ ≤ mixture` within three standard errors, `mixture ≤ chain_bound`, `chain_bound < lemma_bound`.
    pub holds: bool,
}

/// Evaluates every link from the Monte Carlo probability to the lemma's bound
/// for the dumbbell with ends `0` and `αδe₁`, the lemma's radius and Gaussian `φ`.
pub fn verify_lemma_chain(n: usize, alpha: f64, throws: u64, seed: Seed) -> Result<LemmaChainReport> {
    let cfg = DumbbellConfig::lemma(n, alpha, 1.0)?;
    let estimate = estimate_p1(&cfg, throws, DirectionLaw::Gaussian, seed)?;
    let rho = LAMBDA / (2.0 * kappa(n)?);
    let mixture = chi_mixture(n, alpha, rho)?;
    let chain = chain_bound(alpha);
    let lemma = lemma1_bound(alpha, 1)?;
    // the empirical stderr vanishes when p̂ hits 0 or 1; use the one implied by the mixture too
    let null_se = (mixture * (1.0 - mixture) / throws as f64).max(0.0).sqrt();
    let slack = 3.0 * estimate.stderr.max(null_se);
    let holds = estimate.p_hat <= mixture + slack && mixture <= chain + 1e-9 && chain < lemma;
    Ok(LemmaChainReport {
        n,
        alpha,
        estimate,
        mixture,
        chain_bound: chain,
        lemma_bound: lemma,
        holds,
    })
}
