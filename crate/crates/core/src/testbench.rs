//! Decision procedures that consume a stream of symbol ids and return a
//! decision together with the number of samples used.
//!
//! Boundary ties follow the inequality directions of each rule: a statistic
//! equal to an upper threshold chooses H1, one equal to a lower threshold
//! chooses H2. Window statistics go through
//! [`HypothesisPair::mean_llr_from_counts`], which the exact enumerator also
//! uses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::TwoPhaseDesign;
use crate::pmf::HypothesisPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    ChooseH1,
    ChooseH2,
    /// Only produced by the rejection-option test.
    RejectBoth,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::ChooseH1 => "choose_h1",
            Decision::ChooseH2 => "choose_h2",
            Decision::RejectBoth => "reject_both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub decision: Decision,
    /// Samples consumed.
    pub tau: usize,
    /// The SPRT hit its horizon and decided by the sign of the LLR.
    pub truncated: bool,
}

impl TestOutcome {
    fn stopped(decision: Decision, tau: usize) -> Self {
        Self {
            decision,
            tau,
            truncated: false,
        }
    }
}

/// Where a statistic falls relative to an upper and a lower threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Band {
    /// `stat ≥ upper`
    Upper,
    /// `stat ≤ lower` (and below `upper`)
    Lower,
    Between,
}

/// With `upper == lower` this is the fixed-length rule `≥ α → H1, < α → H2`.
#[inline]
pub(crate) fn classify(stat: f64, upper: f64, lower: f64) -> Band {
    if stat >= upper {
        Band::Upper
    } else if stat <= lower {
        Band::Lower
    } else {
        Band::Between
    }
}

/// Pulls `len` symbols and returns their counts.
fn take_window<I>(pair: &HypothesisPair, stream: &mut I, len: usize, consumed: usize, needed: usize) -> Result<Vec<usize>>
where
    I: Iterator<Item = usize>,
{
    let mut counts = vec![0usize; pair.alphabet_size()];
    for i in 0..len {
        let x = stream.next().ok_or(Error::StreamExhausted {
            needed,
            got: consumed + i,
        })?;
        if x >= counts.len() {
            return Err(Error::SymbolOutOfRange {
                symbol: x,
                size: counts.len(),
            });
        }
        counts[x] += 1;
    }
    Ok(counts)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::param("n", "must be a positive integer"))
    } else {
        Ok(())
    }
}

/// Fixed-length likelihood-ratio test: choose H1 iff the mean LLR of the
/// first `n` samples is `≥ alpha`.
pub fn run_fixed<I>(pair: &HypothesisPair, n: usize, alpha: f64, stream: &mut I) -> Result<TestOutcome>
where
    I: Iterator<Item = usize>,
{
    check_n(n)?;
    let counts = take_window(pair, stream, n, 0, n)?;
    let stat = pair.mean_llr_from_counts(&counts)?;
    let decision = match classify(stat, alpha, alpha) {
        Band::Upper => Decision::ChooseH1,
        _ => Decision::ChooseH2,
    };
    Ok(TestOutcome::stopped(decision, n))
}

/// Fixed-length test with a rejection option: `≥ alpha → H1`,
/// `≤ beta → H2`, otherwise reject both.
pub fn run_rejection<I>(pair: &HypothesisPair, n: usize, alpha: f64, beta: f64, stream: &mut I) -> Result<TestOutcome>
where
    I: Iterator<Item = usize>,
{
    check_n(n)?;
    if alpha < beta {
        return Err(Error::param("beta", format!("must not exceed alpha ({beta} > {alpha})")));
    }
    let counts = take_window(pair, stream, n, 0, n)?;
    let decision = match classify(pair.mean_llr_from_counts(&counts)?, alpha, beta) {
        Band::Upper => Decision::ChooseH1,
        Band::Lower => Decision::ChooseH2,
        Band::Between => Decision::RejectBoth,
    };
    Ok(TestOutcome::stopped(decision, n))
}

/// Two-phase test. Phase I classifies the mean LLR of `n` samples against
/// `(α1, β1)`; inside the band it draws `k·n` fresh samples and decides on
/// their mean LLR alone against `α2`.
pub fn run_two_phase<I>(pair: &HypothesisPair, design: &TwoPhaseDesign, n: usize, stream: &mut I) -> Result<TestOutcome>
where
    I: Iterator<Item = usize>,
{
    check_n(n)?;
    let total = (design.k + 1) * n;
    let counts = take_window(pair, stream, n, 0, total)?;
    match classify(pair.mean_llr_from_counts(&counts)?, design.alpha1, design.beta1) {
        Band::Upper => Ok(TestOutcome::stopped(Decision::ChooseH1, n)),
        Band::Lower => Ok(TestOutcome::stopped(Decision::ChooseH2, n)),
        Band::Between => {
            let fresh = take_window(pair, stream, design.k * n, n, total)?;
            let decision = match classify(pair.mean_llr_from_counts(&fresh)?, design.alpha2, design.alpha2) {
                Band::Upper => Decision::ChooseH1,
                _ => Decision::ChooseH2,
            };
            Ok(TestOutcome::stopped(decision, total))
        }
    }
}

/// Wald SPRT parameters: thresholds `A = (D(P2‖P1) − δ)·n` and
/// `B = −(D(P1‖P2) − δ)·n` on the running LLR, truncated at `max_samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprtConfig {
    pub n: usize,
    pub delta: f64,
    pub max_samples: usize,
}

/// Resolved SPRT thresholds on the unnormalized running LLR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprtBounds {
    /// Nominal sample size used to scale stopping times.
    pub n: usize,
    pub upper: f64,
    pub lower: f64,
    pub max_samples: usize,
}

impl SprtConfig {
    pub fn bounds(&self, pair: &HypothesisPair) -> Result<SprtBounds> {
        check_n(self.n)?;
        pair.require_finite()?;
        let (kl12, kl21) = (pair.kl12(), pair.kl21());
        if !(self.delta > 0.0) || self.delta >= kl12.min(kl21) {
            return Err(Error::param(
                "delta",
                format!(
                    "must lie in (0, min(D(P1‖P2), D(P2‖P1)) = {}), got {}",
                    kl12.min(kl21),
                    self.delta
                ),
            ));
        }
        let n = self.n as f64;
        SprtBounds {
            n: self.n,
            upper: (kl21 - self.delta) * n,
            lower: -(kl12 - self.delta) * n,
            max_samples: self.max_samples,
        }
        .validated()
    }
}

impl SprtBounds {
    pub fn validated(self) -> Result<Self> {
        check_n(self.n)?;
        if self.max_samples == 0 {
            return Err(Error::param("max_samples", "must be a positive integer"));
        }
        if !(self.upper > 0.0 && self.lower < 0.0) {
            return Err(Error::param(
                "thresholds",
                format!("need upper > 0 > lower, got ({}, {})", self.upper, self.lower),
            ));
        }
        Ok(self)
    }
}

/// Truncated SPRT on explicit thresholds. At the horizon the sign of the
/// running LLR decides (zero chooses H1) and `truncated` is set.
pub fn run_sprt_bounds<I>(pair: &HypothesisPair, bounds: &SprtBounds, stream: &mut I) -> Result<TestOutcome>
where
    I: Iterator<Item = usize>,
{
    let bounds = bounds.validated()?;
    let llr = pair.llr();
    let mut sum = 0.0;
    for t in 1..=bounds.max_samples {
        let x = stream.next().ok_or(Error::StreamExhausted {
            needed: t,
            got: t - 1,
        })?;
        let step = *llr.get(x).ok_or(Error::SymbolOutOfRange {
            symbol: x,
            size: llr.len(),
        })?;
        sum += step;
        match classify(sum, bounds.upper, bounds.lower) {
            Band::Upper => return Ok(TestOutcome::stopped(Decision::ChooseH1, t)),
            Band::Lower => return Ok(TestOutcome::stopped(Decision::ChooseH2, t)),
            Band::Between => {}
        }
    }
    let decision = if sum >= 0.0 {
        Decision::ChooseH1
    } else {
        Decision::ChooseH2
    };
    Ok(TestOutcome {
        decision,
        tau: bounds.max_samples,
        truncated: true,
    })
}

pub fn run_sprt<I>(pair: &HypothesisPair, cfg: &SprtConfig, stream: &mut I) -> Result<TestOutcome>
where
    I: Iterator<Item = usize>,
{
    run_sprt_bounds(pair, &cfg.bounds(pair)?, stream)
}

/// A fully parameterized test, as run by the simulator and evaluated by the
/// exact enumerator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Procedure {
    Fixed { n: usize, alpha: f64 },
    Rejection { n: usize, alpha: f64, beta: f64 },
    TwoPhase { n: usize, design: TwoPhaseDesign },
    Sprt(SprtBounds),
}

impl Procedure {
    pub fn run<I>(&self, pair: &HypothesisPair, stream: &mut I) -> Result<TestOutcome>
    where
        I: Iterator<Item = usize>,
    {
        match self {
            Procedure::Fixed { n, alpha } => run_fixed(pair, *n, *alpha, stream),
            Procedure::Rejection { n, alpha, beta } => run_rejection(pair, *n, *alpha, *beta, stream),
            Procedure::TwoPhase { n, design } => run_two_phase(pair, design, *n, stream),
            Procedure::Sprt(b) => run_sprt_bounds(pair, b, stream),
        }
    }

    /// The nominal sample size `n` that stopping times are scaled by.
    pub fn base_n(&self) -> usize {
        match self {
            Procedure::Fixed { n, .. } | Procedure::Rejection { n, .. } | Procedure::TwoPhase { n, .. } => *n,
            Procedure::Sprt(b) => b.n,
        }
    }

    /// Largest stopping time the procedure can produce.
    pub fn max_tau(&self) -> usize {
        match self {
            Procedure::Fixed { n, .. } | Procedure::Rejection { n, .. } => *n,
            Procedure::TwoPhase { n, design } => (design.k + 1) * n,
            Procedure::Sprt(b) => b.max_samples,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Procedure::Fixed { .. } => "fixed",
            Procedure::Rejection { .. } => "rejection",
            Procedure::TwoPhase { .. } => "two_phase",
            Procedure::Sprt(_) => "sprt",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{two_phase_design, Phase2Threshold, DEFAULT_TOL};

    fn example() -> HypothesisPair {
        HypothesisPair::bernoulli(0.9, 0.2).unwrap()
    }

    fn design(pair: &HypothesisPair) -> TwoPhaseDesign {
        two_phase_design(pair, 0.2, 2, Phase2Threshold::Chernoff, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn fixed_examples() {
        let pair = example();
        let out = run_fixed(&pair, 2, 0.0, &mut [1, 1].into_iter()).unwrap();
        assert_eq!(out, TestOutcome::stopped(Decision::ChooseH1, 2));
        let out = run_fixed(&pair, 2, 0.0, &mut [0, 0].into_iter()).unwrap();
        assert_eq!(out.decision, Decision::ChooseH2);
    }

    #[test]
    fn fixed_tie_chooses_h1() {
        let pair = example();
        let samples = [1, 0, 1, 1, 0];
        let alpha = pair
            .mean_llr_from_counts(&pair.symbol_counts(samples).unwrap())
            .unwrap();
        let out = run_fixed(&pair, 5, alpha, &mut samples.into_iter()).unwrap();
        assert_eq!(out.decision, Decision::ChooseH1);
        let out = run_fixed(&pair, 5, alpha.next_up(), &mut samples.into_iter()).unwrap();
        assert_eq!(out.decision, Decision::ChooseH2);
    }

    #[test]
    fn fixed_errors() {
        let pair = example();
        assert_eq!(
            run_fixed(&pair, 3, 0.0, &mut [1, 1].into_iter()),
            Err(Error::StreamExhausted { needed: 3, got: 2 })
        );
        assert!(run_fixed(&pair, 0, 0.0, &mut [1].into_iter()).is_err());
        assert!(matches!(
            run_fixed(&pair, 1, 0.0, &mut [5].into_iter()),
            Err(Error::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn sprt_absorbs_after_nine_ones() {
        let pair = example();
        let cfg = SprtConfig {
            n: 10,
            delta: 0.1,
            max_samples: 1000,
        };
        let out = run_sprt(&pair, &cfg, &mut std::iter::repeat(1)).unwrap();
        assert_eq!(out, TestOutcome::stopped(Decision::ChooseH1, 9));
    }

    #[test]
    fn sprt_truncates() {
        let pair = example();
        let b = SprtBounds {
            n: 10,
            upper: 1e9,
            lower: -1e9,
            max_samples: 5,
        };
        let out = run_sprt_bounds(&pair, &b, &mut std::iter::repeat(0)).unwrap();
        assert_eq!(
            out,
            TestOutcome {
                decision: Decision::ChooseH2,
                tau: 5,
                truncated: true
            }
        );
    }

    #[test]
    fn sprt_single_step_lower_exit() {
        let pair = example();
        let cfg = SprtConfig {
            n: 1,
            delta: 0.1,
            max_samples: 100,
        };
        let b = cfg.bounds(&pair).unwrap();
        assert!((b.lower + 1.045725).abs() < 1e-6);
        let out = run_sprt(&pair, &cfg, &mut [0].into_iter()).unwrap();
        assert_eq!(out, TestOutcome::stopped(Decision::ChooseH2, 1));
        // With n = 10 one step of -2.079 stays inside the band.
        let cfg10 = SprtConfig { n: 10, ..cfg };
        assert_eq!(
            run_sprt(&pair, &cfg10, &mut [0].into_iter()),
            Err(Error::StreamExhausted { needed: 2, got: 1 })
        );
    }

    #[test]
    fn sprt_config_validation() {
        let pair = example();
        let bad = SprtConfig {
            n: 10,
            delta: 1.2,
            max_samples: 10,
        };
        assert!(bad.bounds(&pair).is_err());
        let zero = SprtConfig {
            n: 10,
            delta: 0.0,
            max_samples: 10,
        };
        assert!(zero.bounds(&pair).is_err());
    }

    #[test]
    fn two_phase_immediate_stop() {
        let pair = example();
        let d = design(&pair);
        assert!((d.alpha1 - 0.313).abs() < 1e-2 && (d.beta1 + 0.349).abs() < 1e-2);
        let out = run_two_phase(&pair, &d, 4, &mut [1, 1, 0, 1].into_iter()).unwrap();
        assert_eq!(out, TestOutcome::stopped(Decision::ChooseH1, 4));
    }

    #[test]
    fn two_phase_second_phase_uses_fresh_samples_only() {
        let pair = example();
        let d = design(&pair);
        // Phase I: [1, 0, 1, 0] has mean -0.288, inside (β1, α1).
        // Phase II: 8 fresh samples; mean decides.
        let mut s = [1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1].into_iter();
        let out = run_two_phase(&pair, &d, 4, &mut s).unwrap();
        assert_eq!(out, TestOutcome::stopped(Decision::ChooseH1, 12));
        let mut s = [1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0].into_iter();
        let out = run_two_phase(&pair, &d, 4, &mut s).unwrap();
        assert_eq!(out, TestOutcome::stopped(Decision::ChooseH2, 12));
    }

    #[test]
    fn two_phase_phase2_tie_chooses_h1() {
        let pair = example();
        let mut d = design(&pair);
        let fresh = [1, 0, 0, 1, 1, 1, 0, 1];
        d.alpha2 = pair.mean_llr_from_counts(&pair.symbol_counts(fresh).unwrap()).unwrap();
        let samples: Vec<usize> = [1, 0, 1, 0].into_iter().chain(fresh).collect();
        let out = run_two_phase(&pair, &d, 4, &mut samples.into_iter()).unwrap();
        assert_eq!(out.decision, Decision::ChooseH1);
        assert_eq!(out.tau, 12);
    }

    #[test]
    fn two_phase_exhaustion_reports_total_need() {
        let pair = example();
        let d = design(&pair);
        assert_eq!(
            run_two_phase(&pair, &d, 4, &mut [1, 0, 1, 0, 1].into_iter()),
            Err(Error::StreamExhausted { needed: 12, got: 5 })
        );
    }

    #[test]
    fn rejection_examples() {
        let pair = example();
        let out = run_rejection(&pair, 4, 0.313, -0.349, &mut [1, 0, 1, 0].into_iter()).unwrap();
        assert_eq!(out.decision, Decision::RejectBoth);
        assert!(run_rejection(&pair, 4, -0.4, 0.3, &mut [1, 0, 1, 0].into_iter()).is_err());
        // Empty band never rejects.
        for s in [[1, 0, 1, 0], [1, 1, 1, 1], [0, 0, 0, 0]] {
            let out = run_rejection(&pair, 4, -0.288, -0.288, &mut s.into_iter()).unwrap();
            assert_ne!(out.decision, Decision::RejectBoth);
        }
    }

    #[test]
    fn procedure_metadata() {
        let pair = example();
        let d = design(&pair);
        let p = Procedure::TwoPhase { n: 5, design: d };
        assert_eq!((p.base_n(), p.max_tau(), p.name()), (5, 15, "two_phase"));
        let json = serde_json::to_string(&Procedure::Fixed { n: 3, alpha: 0.0 }).unwrap();
        assert_eq!(json, r#"{"kind":"fixed","n":3,"alpha":0.0}"#);
    }
}
