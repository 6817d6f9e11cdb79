//! Exact (non-simulated) outcome probabilities of the decision procedures.
//!
//! Window statistics depend on the samples only through their type, so the
//! `|X|^n` sequences collapse to `C(n + |X| − 1, |X| − 1)` type classes with
//! multinomial weights. All accumulation is in log space; probabilities far
//! below `f64::MIN_POSITIVE` keep their exponents.

mod types;

use std::collections::BTreeMap;

use serde::ser::{Serialize, SerializeMap, Serializer};

pub use types::{composition_count, ENUMERATION_GUARD};

use crate::error::{Error, Result};
use crate::exponent::TwoPhaseDesign;
use crate::pmf::{Hypothesis, HypothesisPair};
use crate::testbench::{classify, Band, Procedure, SprtBounds};
use types::{for_each_type, ln_add, LogSum};

/// A probability stored by its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    pub fn from_ln(ln: f64) -> Self {
        LogProb(ln.min(0.0))
    }

    pub fn from_prob(p: f64) -> Self {
        LogProb::from_ln(p.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `−ln(p) / n` in nats per sample (`+inf` for a zero probability).
    pub fn exponent(self, n: usize) -> f64 {
        -self.0 / n as f64
    }
}

/// Outcome probabilities under one hypothesis. `choose_h1`, `choose_h2` and
/// `reject_both` partition the sample space; `continued` is the probability
/// of sampling past `n` (Phase II for the two-phase test, truncation for the
/// SPRT).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbs {
    pub choose_h1: LogProb,
    pub choose_h2: LogProb,
    pub reject_both: LogProb,
    pub continued: LogProb,
}

impl OutcomeProbs {
    /// Total terminal mass; 1 up to rounding.
    pub fn total(&self) -> f64 {
        self.choose_h1.prob() + self.choose_h2.prob() + self.reject_both.prob()
    }
}

/// Exact error, continuation and rejection probabilities of one test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Sample size used to express probabilities as exponents.
    pub n: usize,
    pub h1: OutcomeProbs,
    pub h2: OutcomeProbs,
}

impl ErrorReport {
    pub fn under(&self, h: Hypothesis) -> &OutcomeProbs {
        match h {
            Hypothesis::H1 => &self.h1,
            Hypothesis::H2 => &self.h2,
        }
    }

    /// Probability of deciding for the wrong hypothesis when `truth` holds.
    pub fn error(&self, truth: Hypothesis) -> LogProb {
        match truth {
            Hypothesis::H1 => self.h1.choose_h2,
            Hypothesis::H2 => self.h2.choose_h1,
        }
    }

    /// Type-I error `P1(A2)`.
    pub fn p1_err(&self) -> LogProb {
        self.h1.choose_h2
    }

    /// Type-II error `P2(A1)`.
    pub fn p2_err(&self) -> LogProb {
        self.h2.choose_h1
    }

    pub fn p1_continue(&self) -> LogProb {
        self.h1.continued
    }

    pub fn p2_continue(&self) -> LogProb {
        self.h2.continued
    }

    pub fn p1_reject(&self) -> LogProb {
        self.h1.reject_both
    }

    pub fn p2_reject(&self) -> LogProb {
        self.h2.reject_both
    }

    fn entries(&self) -> [(&'static str, LogProb); 6] {
        [
            ("p1_err", self.p1_err()),
            ("p2_err", self.p2_err()),
            ("p1_continue", self.p1_continue()),
            ("p2_continue", self.p2_continue()),
            ("p1_reject", self.p1_reject()),
            ("p2_reject", self.p2_reject()),
        ]
    }
}

#[derive(serde::Serialize)]
struct JsonEntry {
    prob: f64,
    /// `null` encodes `+inf` (zero probability).
    exponent: Option<f64>,
    ln_prob: Option<f64>,
}

/// JSON form: `{"n": .., "p1_err": {"prob", "exponent", "ln_prob"}, ...}`.
impl Serialize for ErrorReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(7))?;
        map.serialize_entry("n", &self.n)?;
        for (key, p) in self.entries() {
            let entry = JsonEntry {
                prob: p.prob(),
                exponent: (!p.is_zero()).then(|| p.exponent(self.n)),
                ln_prob: (!p.is_zero()).then(|| p.ln()),
            };
            map.serialize_entry(key, &entry)?;
        }
        map.end()
    }
}

/// Log-probabilities of the three bands of one window.
#[derive(Debug, Clone, Copy)]
struct BandProbs {
    upper: [f64; 2],
    lower: [f64; 2],
    between: [f64; 2],
}

fn band_probs(pair: &HypothesisPair, t: usize, upper: f64, lower: f64) -> Result<BandProbs> {
    let mut acc = [[LogSum::new(); 2]; 3];
    for_each_type(pair, t, |stat, ln_w| {
        let b = match classify(stat, upper, lower) {
            Band::Upper => 0,
            Band::Lower => 1,
            Band::Between => 2,
        };
        acc[b][0].add(ln_w[0]);
        acc[b][1].add(ln_w[1]);
    })?;
    let ln = |b: usize| [acc[b][0].ln(), acc[b][1].ln()];
    Ok(BandProbs {
        upper: ln(0),
        lower: ln(1),
        between: ln(2),
    })
}

fn single_window(n: usize, bands: &BandProbs, between_is_reject: bool) -> ErrorReport {
    let outcome = |h: usize| OutcomeProbs {
        choose_h1: LogProb::from_ln(bands.upper[h]),
        choose_h2: LogProb::from_ln(bands.lower[h]),
        reject_both: if between_is_reject {
            LogProb::from_ln(bands.between[h])
        } else {
            LogProb::ZERO
        },
        continued: LogProb::ZERO,
    };
    ErrorReport {
        n,
        h1: outcome(0),
        h2: outcome(1),
    }
}

/// Fixed-length LRT with threshold `alpha` on the mean LLR.
pub fn exact_fixed(pair: &HypothesisPair, n: usize, alpha: f64) -> Result<ErrorReport> {
    let bands = band_probs(pair, n, alpha, alpha)?;
    Ok(single_window(n, &bands, false))
}

/// Fixed-length test with rejection band `(beta, alpha)`.
pub fn exact_rejection(pair: &HypothesisPair, n: usize, alpha: f64, beta: f64) -> Result<ErrorReport> {
    if alpha < beta {
        return Err(Error::param("beta", format!("must not exceed alpha ({beta} > {alpha})")));
    }
    let bands = band_probs(pair, n, alpha, beta)?;
    Ok(single_window(n, &bands, true))
}

/// Two-phase test: Phase-I bands from `n`-sample types, Phase-II decision
/// from `k·n`-sample types, combined by independence of the fresh samples:
/// `P_i(A_j) = P_i(phase I → j) + P_i(continue)·P_i(phase II → j)`.
pub fn exact_two_phase(pair: &HypothesisPair, design: &TwoPhaseDesign, n: usize) -> Result<ErrorReport> {
    if design.k == 0 {
        return Err(Error::param("k", "must be a positive integer"));
    }
    types::check_guard(design.k * n, pair.alphabet_size())?;
    let phase1 = band_probs(pair, n, design.alpha1, design.beta1)?;
    let has_band = phase1.between.iter().any(|&v| v > f64::NEG_INFINITY);
    let phase2 = if has_band {
        Some(band_probs(pair, design.k * n, design.alpha2, design.alpha2)?)
    } else {
        None
    };
    let outcome = |h: usize| {
        let cont = phase1.between[h];
        let (to_h1, to_h2) = match &phase2 {
            Some(p2) => (cont + p2.upper[h], cont + p2.lower[h]),
            None => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        OutcomeProbs {
            choose_h1: LogProb::from_ln(ln_add(phase1.upper[h], to_h1)),
            choose_h2: LogProb::from_ln(ln_add(phase1.lower[h], to_h2)),
            reject_both: LogProb::ZERO,
            continued: LogProb::from_ln(cont),
        }
    };
    Ok(ErrorReport {
        n,
        h1: outcome(0),
        h2: outcome(1),
    })
}

/// Width of the lattice on which accumulated LLR values are merged.
pub const SPRT_LATTICE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct SprtState {
    sum: f64,
    mass: [f64; 2],
}

/// Truncated SPRT by forward dynamic programming over the accumulated LLR.
/// Sums that agree on a `1e-9` lattice are merged, which is exact when the
/// per-symbol LLRs are commensurable. `continued` holds the truncation
/// probability.
pub fn exact_sprt_truncated(pair: &HypothesisPair, bounds: &SprtBounds) -> Result<ErrorReport> {
    let bounds = bounds.validated()?;
    let llr = pair.llr();
    let probs = [pair.p1().probs(), pair.p2().probs()];
    let mut absorbed = [[0.0f64; 2]; 2]; // [decision][hypothesis]
    let mut states: BTreeMap<i64, SprtState> = BTreeMap::new();
    states.insert(
        0,
        SprtState {
            sum: 0.0,
            mass: [1.0, 1.0],
        },
    );
    let mut work = 0f64;
    for _ in 0..bounds.max_samples {
        work += states.len() as f64;
        if work > ENUMERATION_GUARD {
            return Err(Error::GuardExceeded {
                what: "SPRT state-steps",
                count: work,
                limit: ENUMERATION_GUARD,
            });
        }
        let mut next: BTreeMap<i64, SprtState> = BTreeMap::new();
        for state in states.values() {
            for (x, &step) in llr.iter().enumerate() {
                let w = [state.mass[0] * probs[0][x], state.mass[1] * probs[1][x]];
                if w[0] == 0.0 && w[1] == 0.0 {
                    continue;
                }
                let sum = state.sum + step;
                match classify(sum, bounds.upper, bounds.lower) {
                    Band::Upper => {
                        absorbed[0][0] += w[0];
                        absorbed[0][1] += w[1];
                    }
                    Band::Lower => {
                        absorbed[1][0] += w[0];
                        absorbed[1][1] += w[1];
                    }
                    Band::Between => {
                        let key = (sum / SPRT_LATTICE).round() as i64;
                        let e = next.entry(key).or_insert(SprtState { sum, mass: [0.0, 0.0] });
                        e.mass[0] += w[0];
                        e.mass[1] += w[1];
                    }
                }
            }
        }
        states = next;
        if states.is_empty() {
            break;
        }
    }
    let mut truncated = [0.0f64; 2];
    for state in states.values() {
        let d = if state.sum >= 0.0 { 0 } else { 1 };
        for h in 0..2 {
            absorbed[d][h] += state.mass[h];
            truncated[h] += state.mass[h];
        }
    }
    let outcome = |h: usize| OutcomeProbs {
        choose_h1: LogProb::from_prob(absorbed[0][h]),
        choose_h2: LogProb::from_prob(absorbed[1][h]),
        reject_both: LogProb::ZERO,
        continued: LogProb::from_prob(truncated[h]),
    };
    Ok(ErrorReport {
        n: bounds.n,
        h1: outcome(0),
        h2: outcome(1),
    })
}

/// Exact report for any [`Procedure`].
pub fn evaluate(pair: &HypothesisPair, procedure: &Procedure) -> Result<ErrorReport> {
    match procedure {
        Procedure::Fixed { n, alpha } => exact_fixed(pair, *n, *alpha),
        Procedure::Rejection { n, alpha, beta } => exact_rejection(pair, *n, *alpha, *beta),
        Procedure::TwoPhase { n, design } => exact_two_phase(pair, design, *n),
        Procedure::Sprt(b) => exact_sprt_truncated(pair, b),
    }
}

/// Exact stopping-time statistics of a two-phase test, whose stopping time
/// is `n` with probability `1 − q` and `(k + 1)n` with probability `q`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TauStats {
    pub continue_prob: f64,
    /// `E[(τ/n)^l]` keyed by `l`.
    pub scaled_moments: BTreeMap<u32, f64>,
    pub var_tau: f64,
}

pub fn two_phase_tau_stats(continue_prob: f64, k: usize, n: usize, orders: &[u32]) -> TauStats {
    let q = continue_prob;
    let big = (k + 1) as f64;
    let scaled_moments = orders
        .iter()
        .map(|&l| (l, (1.0 - q) + q * big.powi(l as i32)))
        .collect();
    let kn = (k * n) as f64;
    TauStats {
        continue_prob: q,
        scaled_moments,
        var_tau: kn * kn * q * (1.0 - q),
    }
}

/// Least-squares line through `(n, −ln p)`; the slope estimates the error
/// exponent in nats per sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Fits probabilities `p ∈ (0, 1]`. A zero probability yields
/// [`Error::ZeroProbability`] (the empirical exponent is `+inf`).
pub fn exponent_fit(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let ln_points = points
        .iter()
        .map(|&(n, p)| {
            if p == 0.0 {
                Err(Error::ZeroProbability { n })
            } else if !(p > 0.0 && p <= 1.0) {
                Err(Error::param("points", format!("probability {p} at n = {n} outside (0, 1]")))
            } else {
                Ok((n, p.ln()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    exponent_fit_ln(&ln_points)
}

/// Same as [`exponent_fit`] on `(n, ln p)` pairs, for probabilities that
/// underflow `f64`.
pub fn exponent_fit_ln(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 2 {
        return Err(Error::param("points", "need at least 2 points"));
    }
    for &(n, lp) in points {
        if lp == f64::NEG_INFINITY {
            return Err(Error::ZeroProbability { n });
        }
        if !n.is_finite() || !(lp <= 0.0) {
            return Err(Error::param("points", format!("invalid point ({n}, ln p = {lp})")));
        }
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| -p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("points", "all n values are equal"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (-p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (-p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (-p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ExponentFit { slope, intercept, r2 })
}
