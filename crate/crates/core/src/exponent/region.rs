//! Region boundaries in the `(E1, E2)` plane.
//!
//! A [`RegionBoundary`] stands for the down-closed region it generates: the
//! union of the boxes `[0, e1] × [0, e2]` over its points.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{chernoff, check_two_phase_gamma, e_gamma, ExponentPair, DEFAULT_TOL, MAX_BISECTION_ITER};
use crate::bisect::increasing_root;
use crate::error::{Error, Result};
use crate::pmf::HypothesisPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    FdCurve,
    BoxCorner,
    Envelope,
}

impl BoundaryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryKind::FdCurve => "fd_curve",
            BoundaryKind::BoxCorner => "box_corner",
            BoundaryKind::Envelope => "envelope",
        }
    }
}

/// A boundary point and the tilt that produced it (`None` for box corners).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub lambda: Option<f64>,
    pub exponents: ExponentPair,
}

impl BoundaryPoint {
    pub fn new(lambda: Option<f64>, e1: f64, e2: f64) -> Self {
        Self {
            lambda,
            exponents: ExponentPair::new(e1, e2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub kind: BoundaryKind,
    pub points: Vec<BoundaryPoint>,
}

impl RegionBoundary {
    pub fn box_corner(corner: ExponentPair) -> Self {
        Self {
            kind: BoundaryKind::BoxCorner,
            points: vec![BoundaryPoint {
                lambda: None,
                exponents: corner,
            }],
        }
    }

    pub fn exponents(&self) -> impl Iterator<Item = ExponentPair> + '_ {
        self.points.iter().map(|p| p.exponents)
    }

    /// Whether `point` lies in the down-closed region, with slack `tol`.
    pub fn contains_point(&self, point: &ExponentPair, tol: f64) -> bool {
        self.exponents().any(|q| q.dominates(point, tol))
    }

    /// Whether every point of `other` lies in this region.
    pub fn contains(&self, other: &RegionBoundary, tol: f64) -> bool {
        other.exponents().all(|p| self.contains_point(&p, tol))
    }

    /// `other ⊂ self` and some point of `self` lies outside `other` by more
    /// than `tol`.
    pub fn strictly_contains(&self, other: &RegionBoundary, tol: f64) -> bool {
        self.contains(other, tol) && self.exponents().any(|p| !other.contains_point(&p, -tol))
    }
}

fn uniform_grid(grid: usize) -> Result<Vec<f64>> {
    if grid < 2 {
        return Err(Error::param("grid", format!("need at least 2 points, got {grid}")));
    }
    let last = (grid - 1) as f64;
    Ok((0..grid).map(|i| i as f64 / last).collect())
}

/// Fixed-length tradeoff curve `λ ↦ (D(P^(λ) ‖ P1), D(P^(λ) ‖ P2))` sampled
/// on a uniform grid over `[0, 1]` (both endpoints exact), ordered by λ.
pub fn fd_boundary(pair: &HypothesisPair, grid: usize) -> Result<RegionBoundary> {
    pair.require_finite()?;
    let points = uniform_grid(grid)?
        .into_iter()
        .map(|l| {
            let (d1, d2) = pair.tilted_divergences(l)?;
            Ok(BoundaryPoint::new(Some(l), d1, d2))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionBoundary {
        kind: BoundaryKind::FdCurve,
        points,
    })
}

/// Exact membership test for the continuous fixed-length region: the best
/// `E2` compatible with `E1 ≥ point.e1` is `f2` at the tilt where `f1`
/// equals `point.e1`.
pub fn fd_region_contains(pair: &HypothesisPair, point: &ExponentPair, tol: f64) -> Result<bool> {
    pair.require_finite()?;
    let (kl12, kl21) = (pair.kl12(), pair.kl21());
    if point.e1 <= tol {
        return Ok(point.e2 <= kl12 + tol);
    }
    if point.e1 > kl21 + tol {
        return Ok(false);
    }
    let target = point.e1.min(kl21);
    let lambda = increasing_root(
        |l| Ok(pair.tilted_divergences(l)?.0 - target),
        0.0,
        1.0,
        1e-13,
        MAX_BISECTION_ITER,
    )?;
    Ok(pair.tilted_divergences(lambda)?.1 >= point.e2 - tol)
}

/// Pareto frontier (maximal points under coordinatewise `≤`) of the union of
/// the given curves, sorted by increasing `e1`. Duplicates collapse to one.
pub fn region_envelope(curves: &[RegionBoundary]) -> Result<RegionBoundary> {
    let mut points: Vec<BoundaryPoint> = curves.iter().flat_map(|c| c.points.iter().copied()).collect();
    if points.is_empty() {
        return Err(Error::param("curves", "no points to envelope"));
    }
    if points
        .iter()
        .any(|p| !p.exponents.e1.is_finite() || !p.exponents.e2.is_finite())
    {
        return Err(Error::param("curves", "non-finite exponent in input"));
    }
    // e1 descending, then e2 descending; λ breaks exact ties deterministically.
    points.sort_by(|a, b| {
        b.exponents
            .e1
            .total_cmp(&a.exponents.e1)
            .then(b.exponents.e2.total_cmp(&a.exponents.e2))
            .then_with(|| match (a.lambda, b.lambda) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
    });
    let mut frontier: Vec<BoundaryPoint> = Vec::new();
    let mut best_e2 = f64::NEG_INFINITY;
    for p in points {
        if p.exponents.e2 > best_e2 {
            best_e2 = p.exponents.e2;
            frontier.push(p);
        }
    }
    frontier.reverse();
    Ok(RegionBoundary {
        kind: BoundaryKind::Envelope,
        points: frontier,
    })
}

/// Boundary of `R_FD ∪ ([0, E1(γ)] × [0, E2(γ)])`.
///
/// The corner is dropped when it already lies in the continuous fixed-length
/// region, so for `γ ≥ D*` the result is exactly the envelope of the curve.
pub fn gamma_region(pair: &HypothesisPair, gamma: f64, grid: usize) -> Result<RegionBoundary> {
    let corner = e_gamma(pair, gamma, DEFAULT_TOL)?;
    let fd = fd_boundary(pair, grid)?;
    if fd_region_contains(pair, &corner.exponents(), 1e-12)? {
        region_envelope(&[fd])
    } else {
        region_envelope(&[fd, RegionBoundary::box_corner(corner.exponents())])
    }
}

/// Exponents achieved by the two-phase test with `k·n` Phase-II samples,
/// swept over the Phase-II tilt: for each λ,
/// `(min{E1(γ), γ + k f1(λ)}, min{E2(γ), γ + k f2(λ)})`. The sweep is the
/// uniform grid plus λ*.
pub fn two_phase_region(pair: &HypothesisPair, gamma: f64, k: usize, grid: usize) -> Result<RegionBoundary> {
    if k == 0 {
        return Err(Error::param("k", "must be a positive integer"));
    }
    if pair.is_degenerate() {
        return Err(Error::DegeneratePair("D* = 0, no two-phase region exists".into()));
    }
    pair.require_finite()?;
    let cp = chernoff(pair, DEFAULT_TOL)?;
    let degenerate = check_two_phase_gamma(gamma, &cp)?;
    let target = if degenerate {
        ExponentPair::new(cp.d_star, cp.d_star)
    } else {
        e_gamma(pair, gamma, DEFAULT_TOL)?.exponents()
    };
    let mut lambdas = uniform_grid(grid)?;
    lambdas.push(cp.lambda_star);
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let kf = k as f64;
    let points = lambdas
        .into_iter()
        .map(|l| {
            let (d1, d2) = pair.tilted_divergences(l)?;
            Ok(BoundaryPoint::new(
                Some(l),
                target.e1.min(gamma + kf * d1),
                target.e2.min(gamma + kf * d2),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    region_envelope(&[RegionBoundary {
        kind: BoundaryKind::Envelope,
        points,
    }])
}
