//! Exponent geometry of the fixed-length, sequential and γ-almost-fixed-length
//! test classes.
//!
//! Along the tilted family `λ ↦ P^(λ)`, `f1(λ) = D(P^(λ) ‖ P1)` increases from
//! `0` to `D(P2 ‖ P1)` and `f2(λ) = D(P^(λ) ‖ P2)` decreases from `D(P1 ‖ P2)`
//! to `0`. Every quantity here is a root or endpoint of one of those two
//! monotone maps, so all solvers are plain bisections.

mod region;

pub use region::{
    fd_boundary, fd_region_contains, gamma_region, region_envelope, two_phase_region, BoundaryKind,
    BoundaryPoint, RegionBoundary,
};

use serde::{Deserialize, Serialize};

use crate::bisect::increasing_root;
use crate::error::{Error, Result};
use crate::pmf::HypothesisPair;

/// Default residual tolerance for every bisection, in nats.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_BISECTION_ITER: usize = 200;
/// Default number of λ grid points for boundary curves.
pub const DEFAULT_GRID: usize = 512;

/// An error-exponent pair `(E1, E2)` in nats per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub e1: f64,
    pub e2: f64,
}

impl ExponentPair {
    pub fn new(e1: f64, e2: f64) -> Self {
        Self { e1, e2 }
    }

    /// Weak coordinatewise dominance with slack `tol`.
    pub fn dominates(&self, other: &ExponentPair, tol: f64) -> bool {
        self.e1 >= other.e1 - tol && self.e2 >= other.e2 - tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffPoint {
    pub lambda_star: f64,
    pub d_star: f64,
}

/// Tilt λ* at which the two tilted divergences cross, and their common
/// value D*. Identical hypotheses give `(0.5, 0)`.
pub fn chernoff(pair: &HypothesisPair, tol: f64) -> Result<ChernoffPoint> {
    if pair.is_degenerate() {
        return Ok(ChernoffPoint {
            lambda_star: 0.5,
            d_star: 0.0,
        });
    }
    pair.require_finite()?;
    let lambda_star = increasing_root(
        |l| {
            let (d1, d2) = pair.tilted_divergences(l)?;
            Ok(d1 - d2)
        },
        0.0,
        1.0,
        tol,
        MAX_BISECTION_ITER,
    )?;
    let (d_star, _) = pair.tilted_divergences(lambda_star)?;
    Ok(ChernoffPoint { lambda_star, d_star })
}

/// Corner `(D(P2 ‖ P1), D(P1 ‖ P2))` of the sequential region.
pub fn seq_corner(pair: &HypothesisPair) -> Result<ExponentPair> {
    pair.require_finite()?;
    Ok(ExponentPair::new(pair.kl21(), pair.kl12()))
}

/// Corner `(E1(γ), E2(γ))` of the box that a γ-almost-fixed-length test adds
/// to the fixed-length region, with the tilts attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaCorner {
    pub gamma: f64,
    pub e1: f64,
    pub e2: f64,
    /// Maximizer for `E1`: `D(P^(λ_A) ‖ P2) = γ`, `λ_A ∈ [λ*, 1]`.
    pub lambda_a: f64,
    /// Maximizer for `E2`: `D(P^(λ_B) ‖ P1) = γ`, `λ_B ∈ [0, λ*]`.
    pub lambda_b: f64,
    /// The `E1` constraint set was empty and `λ_A` was clamped to `0`.
    pub clamped_a: bool,
    /// The `E2` constraint set was empty and `λ_B` was clamped to `1`.
    pub clamped_b: bool,
}

impl GammaCorner {
    pub fn exponents(&self) -> ExponentPair {
        ExponentPair::new(self.e1, self.e2)
    }

    pub fn clamped(&self) -> bool {
        self.clamped_a || self.clamped_b
    }
}

/// `E1(γ) = max{ f1(λ) : f2(λ) ≥ γ }` and `E2(γ) = max{ f2(λ) : f1(λ) ≥ γ }`.
///
/// By monotonicity the maximizers sit where the constraints bind. When `γ`
/// exceeds the reachable divergence, the tilt is clamped to the endpoint
/// that comes closest and its value is returned.
pub fn e_gamma(pair: &HypothesisPair, gamma: f64, tol: f64) -> Result<GammaCorner> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", format!("must be finite and ≥ 0, got {gamma}")));
    }
    if pair.is_degenerate() {
        return Ok(GammaCorner {
            gamma,
            e1: 0.0,
            e2: 0.0,
            lambda_a: 1.0,
            lambda_b: 0.0,
            clamped_a: gamma > 0.0,
            clamped_b: gamma > 0.0,
        });
    }
    pair.require_finite()?;
    let (kl12, kl21) = (pair.kl12(), pair.kl21());

    let (lambda_a, clamped_a) = if gamma == 0.0 {
        (1.0, false)
    } else if gamma >= kl12 {
        (0.0, gamma > kl12)
    } else {
        let l = increasing_root(
            |l| Ok(gamma - pair.tilted_divergences(l)?.1),
            0.0,
            1.0,
            tol,
            MAX_BISECTION_ITER,
        )?;
        (l, false)
    };
    let (lambda_b, clamped_b) = if gamma == 0.0 {
        (0.0, false)
    } else if gamma >= kl21 {
        (1.0, gamma > kl21)
    } else {
        let l = increasing_root(
            |l| Ok(pair.tilted_divergences(l)?.0 - gamma),
            0.0,
            1.0,
            tol,
            MAX_BISECTION_ITER,
        )?;
        (l, false)
    };
    let e1 = pair.tilted_divergences(lambda_a)?.0;
    let e2 = pair.tilted_divergences(lambda_b)?.1;
    Ok(GammaCorner {
        gamma,
        e1,
        e2,
        lambda_a,
        lambda_b,
        clamped_a,
        clamped_b,
    })
}

/// How the Phase-II threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase2Threshold {
    /// `λ = λ*`, threshold exactly `0`.
    Chernoff,
    /// Fixed-length threshold of the given tilt.
    Lambda(f64),
}

/// All parameters of one concrete two-phase test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseDesign {
    pub gamma: f64,
    pub k: usize,
    pub lambda_a: f64,
    pub lambda_b: f64,
    /// Phase-I upper threshold (stop and choose H1 at or above it).
    pub alpha1: f64,
    /// Phase-I lower threshold (stop and choose H2 at or below it).
    pub beta1: f64,
    pub phase2_lambda: f64,
    /// Phase-II threshold on the fresh-sample mean LLR.
    pub alpha2: f64,
    pub e1_target: f64,
    pub e2_target: f64,
    /// `γ = D*`: the continuation band is empty and the test is a plain
    /// fixed-length test.
    pub degenerate: bool,
}

/// Relative slack allowed when comparing a requested `γ` against `D*`.
const GAMMA_SLACK: f64 = 1e-9;

fn check_two_phase_gamma(gamma: f64, cp: &ChernoffPoint) -> Result<bool> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", format!("must be > 0, got {gamma}")));
    }
    let slack = GAMMA_SLACK * cp.d_star.max(1.0);
    if gamma > cp.d_star + slack {
        return Err(Error::param(
            "gamma",
            format!(
                "{gamma} exceeds the Chernoff exponent D* = {}; the γ-region equals the fixed-length region, use a fixed-length test",
                cp.d_star
            ),
        ));
    }
    Ok(gamma >= cp.d_star - slack)
}

/// Thresholds of the two-phase test for a given `γ ≤ D*`.
///
/// The Phase-I thresholds are the fixed-length thresholds of the two
/// constrained maximizers, assigned so that the band is nonempty:
/// `α1 = α(λ_B) = E2(γ) − γ` and `β1 = α(λ_A) = γ − E1(γ)`, where
/// `α(λ) = D(P^(λ) ‖ P2) − D(P^(λ) ‖ P1)`. With this assignment the Phase-I
/// error exponents are `E1(γ)` and `E2(γ)` and the continuation exponent is
/// `γ` under both hypotheses.
pub fn two_phase_design(
    pair: &HypothesisPair,
    gamma: f64,
    k: usize,
    phase2: Phase2Threshold,
    tol: f64,
) -> Result<TwoPhaseDesign> {
    if k == 0 {
        return Err(Error::param("k", "must be a positive integer"));
    }
    if pair.is_degenerate() {
        return Err(Error::DegeneratePair("D* = 0, no two-phase design exists".into()));
    }
    let cp = chernoff(pair, tol)?;
    let degenerate = check_two_phase_gamma(gamma, &cp)?;

    let (lambda_a, lambda_b, alpha1, beta1, e1_target, e2_target) = if degenerate {
        let a = pair.threshold_at(cp.lambda_star)?;
        (cp.lambda_star, cp.lambda_star, a, a, cp.d_star, cp.d_star)
    } else {
        let corner = e_gamma(pair, gamma, tol)?;
        (
            corner.lambda_a,
            corner.lambda_b,
            pair.threshold_at(corner.lambda_b)?,
            pair.threshold_at(corner.lambda_a)?,
            corner.e1,
            corner.e2,
        )
    };
    let (phase2_lambda, alpha2) = match phase2 {
        Phase2Threshold::Chernoff => (cp.lambda_star, 0.0),
        Phase2Threshold::Lambda(l) => (l, pair.threshold_at(l)?),
    };
    Ok(TwoPhaseDesign {
        gamma,
        k,
        lambda_a,
        lambda_b,
        alpha1,
        beta1,
        phase2_lambda,
        alpha2,
        e1_target,
        e2_target,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStar {
    pub raw: f64,
    pub k_min: usize,
}

/// `k* = max{D(P2 ‖ P1), D(P1 ‖ P2)} / D*` and the smallest integer `k ≥ k*`.
pub fn kstar(pair: &HypothesisPair) -> Result<KStar> {
    if pair.is_degenerate() {
        return Err(Error::DegeneratePair("k* is undefined when D* = 0".into()));
    }
    pair.require_finite()?;
    let cp = chernoff(pair, DEFAULT_TOL)?;
    if cp.d_star <= 0.0 {
        return Err(Error::DegeneratePair("k* is undefined when D* = 0".into()));
    }
    let raw = pair.kl21().max(pair.kl12()) / cp.d_star;
    Ok(KStar {
        raw,
        k_min: (raw.ceil() as usize).max(1),
    })
}
