//! Finite-alphabet distributions, KL divergence, the geometric (λ-tilted)
//! family between two hypotheses, and log-likelihood-ratio statistics.
//!
//! Everything is in nats. Divergences follow the usual zero conventions:
//! a term with `p(x) = 0` contributes nothing, and a term with `p(x) > 0`,
//! `q(x) = 0` makes the divergence `+inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p = 1` for a stored distribution.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A probability mass function on symbols `0..m`, `m ≥ 2`.
///
/// Serialized as a plain JSON array of probabilities. Deserialization
/// renormalizes the same way [`Pmf::new`] does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Normalizes a vector of nonnegative weights into a distribution.
    /// Entries that are exactly zero stay zero.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidPmf(format!(
                "need at least 2 symbols, got {}",
                raw.len()
            )));
        }
        if let Some((i, v)) = raw.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidPmf(format!("entry {i} is not finite ({v})")));
        }
        if let Some((i, v)) = raw.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::InvalidPmf(format!("entry {i} is negative ({v})")));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPmf("all entries are zero".into()));
        }
        let probs = if (total - 1.0).abs() <= SUM_TOLERANCE {
            raw
        } else {
            raw.into_iter().map(|v| v / total).collect()
        };
        Ok(Self { probs })
    }

    /// `Ber(p)` as the two-symbol distribution `[1 - p, p]`, so symbol `1`
    /// is the "success" outcome.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPmf(format!(
                "Bernoulli parameter {p} outside [0, 1]"
            )));
        }
        Self::new(vec![1.0 - p, p])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    /// Largest absolute difference between two distributions of equal size.
    pub fn max_abs_diff(&self, other: &Pmf) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        Pmf::new(raw)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.probs
    }
}

/// Kullback–Leibler divergence `D(p ‖ q)` in nats; may be `+inf`.
pub fn kl(p: &Pmf, q: &Pmf) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * (a / b).ln();
    }
    // Rounding can leave a tiny negative value for nearly equal arguments.
    Ok(total.max(0.0))
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Which of the two hypotheses generates the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    #[serde(rename = "h1")]
    H1,
    #[serde(rename = "h2")]
    H2,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H1, Hypothesis::H2];

    pub fn tag(self) -> &'static str {
        match self {
            Hypothesis::H1 => "h1",
            Hypothesis::H2 => "h2",
        }
    }
}

/// Two simple hypotheses `H1: X ~ P1`, `H2: X ~ P2` on a shared alphabet,
/// with the per-symbol log-likelihood ratio `ln(P1(x) / P2(x))` cached.
///
/// Symbols that have probability zero under both hypotheses are dropped on
/// construction; [`HypothesisPair::original_symbols`] maps the remaining
/// symbol ids back to the caller's alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisPair {
    p1: Pmf,
    p2: Pmf,
    ln_p1: Vec<f64>,
    ln_p2: Vec<f64>,
    llr: Vec<f64>,
    original: Vec<usize>,
}

impl HypothesisPair {
    pub fn new(p1: Pmf, p2: Pmf) -> Result<Self> {
        if p1.len() != p2.len() {
            return Err(Error::AlphabetMismatch {
                left: p1.len(),
                right: p2.len(),
            });
        }
        let original: Vec<usize> = (0..p1.len())
            .filter(|&x| p1.prob(x) > 0.0 || p2.prob(x) > 0.0)
            .collect();
        if original.len() < 2 {
            return Err(Error::InvalidPmf(
                "fewer than two symbols have positive probability under either hypothesis".into(),
            ));
        }
        let (p1, p2) = if original.len() == p1.len() {
            (p1, p2)
        } else {
            let keep = |p: &Pmf| Pmf {
                probs: original.iter().map(|&x| p.prob(x)).collect(),
            };
            (keep(&p1), keep(&p2))
        };
        let ln_p1: Vec<f64> = p1.probs.iter().map(|v| v.ln()).collect();
        let ln_p2: Vec<f64> = p2.probs.iter().map(|v| v.ln()).collect();
        let llr = p1
            .probs
            .iter()
            .zip(&p2.probs)
            .map(|(&a, &b)| match (a == 0.0, b == 0.0) {
                (false, true) => f64::INFINITY,
                (true, false) => f64::NEG_INFINITY,
                _ => (a / b).ln(),
            })
            .collect();
        Ok(Self {
            p1,
            p2,
            ln_p1,
            ln_p2,
            llr,
            original,
        })
    }

    /// Convenience constructor for `Ber(p1)` versus `Ber(p2)`.
    pub fn bernoulli(p1: f64, p2: f64) -> Result<Self> {
        Self::new(Pmf::bernoulli(p1)?, Pmf::bernoulli(p2)?)
    }

    pub fn p1(&self) -> &Pmf {
        &self.p1
    }

    pub fn p2(&self) -> &Pmf {
        &self.p2
    }

    pub fn pmf(&self, h: Hypothesis) -> &Pmf {
        match h {
            Hypothesis::H1 => &self.p1,
            Hypothesis::H2 => &self.p2,
        }
    }

    pub fn ln_probs(&self, h: Hypothesis) -> &[f64] {
        match h {
            Hypothesis::H1 => &self.ln_p1,
            Hypothesis::H2 => &self.ln_p2,
        }
    }

    pub fn llr(&self) -> &[f64] {
        &self.llr
    }

    pub fn alphabet_size(&self) -> usize {
        self.llr.len()
    }

    pub fn original_symbols(&self) -> &[usize] {
        &self.original
    }

    /// `D(P1 ‖ P2)`.
    pub fn kl12(&self) -> f64 {
        kl(&self.p1, &self.p2).expect("pair shares an alphabet")
    }

    /// `D(P2 ‖ P1)`.
    pub fn kl21(&self) -> f64 {
        kl(&self.p2, &self.p1).expect("pair shares an alphabet")
    }

    /// True when `P1` and `P2` agree entrywise within [`SUM_TOLERANCE`].
    pub fn is_degenerate(&self) -> bool {
        self.p1.max_abs_diff(&self.p2) <= SUM_TOLERANCE
    }

    /// Both divergences finite, i.e. every remaining symbol is possible
    /// under both hypotheses.
    pub fn has_finite_divergences(&self) -> bool {
        self.llr.iter().all(|v| v.is_finite())
    }

    pub(crate) fn require_finite(&self) -> Result<()> {
        if self.has_finite_divergences() {
            Ok(())
        } else {
            Err(Error::InfiniteDivergence)
        }
    }

    /// The λ-tilted distribution `P1^(1-λ) P2^λ / Z(λ)`, computed in log
    /// space. Uses `0^0 = 1`, so `λ = 0` and `λ = 1` return `P1` and `P2`
    /// exactly.
    pub fn tilt(&self, lambda: f64) -> Result<Pmf> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::param("lambda", format!("{lambda} outside [0, 1]")));
        }
        if lambda == 0.0 {
            return Ok(self.p1.clone());
        }
        if lambda == 1.0 {
            return Ok(self.p2.clone());
        }
        let log_w: Vec<f64> = self
            .ln_p1
            .iter()
            .zip(&self.ln_p2)
            .map(|(&a, &b)| {
                if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    (1.0 - lambda) * a + lambda * b
                }
            })
            .collect();
        let log_z = log_sum_exp(&log_w);
        if log_z == f64::NEG_INFINITY {
            return Err(Error::DisjointSupport);
        }
        Ok(Pmf {
            probs: log_w.iter().map(|w| (w - log_z).exp()).collect(),
        })
    }

    /// `(D(P^(λ) ‖ P1), D(P^(λ) ‖ P2))`: one point of the fixed-length
    /// tradeoff curve.
    pub fn tilted_divergences(&self, lambda: f64) -> Result<(f64, f64)> {
        let t = self.tilt(lambda)?;
        Ok((kl(&t, &self.p1)?, kl(&t, &self.p2)?))
    }

    /// Fixed-length threshold `D(P^(λ) ‖ P2) − D(P^(λ) ‖ P1)` whose LRT
    /// achieves the curve point at λ.
    pub fn threshold_at(&self, lambda: f64) -> Result<f64> {
        let (d1, d2) = self.tilted_divergences(lambda)?;
        Ok(d2 - d1)
    }

    fn check_symbol(&self, symbol: usize) -> Result<()> {
        if symbol >= self.llr.len() {
            Err(Error::SymbolOutOfRange {
                symbol,
                size: self.llr.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Unnormalized `Σ ln(P1(x_i) / P2(x_i))` accumulated in sample order.
    pub fn llr_sum<I>(&self, samples: I) -> Result<f64>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut total = 0.0;
        let (mut pos_inf, mut neg_inf) = (false, false);
        for x in samples {
            self.check_symbol(x)?;
            let v = self.llr[x];
            if v == f64::INFINITY {
                pos_inf = true;
            } else if v == f64::NEG_INFINITY {
                neg_inf = true;
            } else {
                total += v;
            }
        }
        match (pos_inf, neg_inf) {
            (true, true) => Err(Error::ConflictingInfinities),
            (true, false) => Ok(f64::INFINITY),
            (false, true) => Ok(f64::NEG_INFINITY),
            (false, false) => Ok(total),
        }
    }

    /// Per-symbol occurrence counts of a sample window.
    pub fn symbol_counts<I>(&self, samples: I) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut counts = vec![0usize; self.llr.len()];
        for x in samples {
            self.check_symbol(x)?;
            counts[x] += 1;
        }
        Ok(counts)
    }

    /// Normalized statistic `(1/len) Σ_x counts[x]·llr[x]` of a window
    /// given by its type (symbol counts), summed in symbol order.
    ///
    /// Every decision rule in this crate and the exact enumerator evaluate
    /// windows through this function, so boundary ties resolve identically.
    pub fn mean_llr_from_counts(&self, counts: &[usize]) -> Result<f64> {
        if counts.len() != self.llr.len() {
            return Err(Error::AlphabetMismatch {
                left: counts.len(),
                right: self.llr.len(),
            });
        }
        let len: usize = counts.iter().sum();
        if len == 0 {
            return Err(Error::param("counts", "empty window"));
        }
        let mut total = 0.0;
        let (mut pos_inf, mut neg_inf) = (false, false);
        for (&c, &v) in counts.iter().zip(&self.llr) {
            if c == 0 {
                continue;
            }
            if v == f64::INFINITY {
                pos_inf = true;
            } else if v == f64::NEG_INFINITY {
                neg_inf = true;
            } else {
                total += c as f64 * v;
            }
        }
        match (pos_inf, neg_inf) {
            (true, true) => Err(Error::ConflictingInfinities),
            (true, false) => Ok(f64::INFINITY),
            (false, true) => Ok(f64::NEG_INFINITY),
            (false, false) => Ok(total / len as f64),
        }
    }
}
