//! Type-class (composition) enumeration with exact multinomial weights.

use crate::error::{Error, Result};
use crate::pmf::{Hypothesis, HypothesisPair};

/// Upper bound on the number of enumerated type classes or DP state-steps.
pub const ENUMERATION_GUARD: f64 = 1e7;

/// Streaming log-sum-exp accumulator. Summation order is the insertion
/// order, so results are deterministic.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    pub(crate) fn add(&mut self, ln_x: f64) {
        if ln_x == f64::NEG_INFINITY {
            return;
        }
        if ln_x > self.max {
            self.scaled = self.scaled * (self.max - ln_x).exp() + 1.0;
            self.max = ln_x;
        } else {
            self.scaled += (ln_x - self.max).exp();
        }
    }

    pub(crate) fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `ln(e^a + e^b)`.
pub(crate) fn ln_add(a: f64, b: f64) -> f64 {
    let mut s = LogSum::new();
    s.add(a);
    s.add(b);
    s.ln()
}

/// Number of compositions of `t` into `m` nonnegative parts,
/// `C(t + m − 1, m − 1)`, saturating at `u128::MAX`.
pub fn composition_count(t: usize, m: usize) -> u128 {
    let mut c: u128 = 1;
    for j in 1..m as u128 {
        c = match c.checked_mul(t as u128 + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    c
}

pub(crate) fn check_guard(t: usize, m: usize) -> Result<()> {
    let count = composition_count(t, m) as f64;
    if count > ENUMERATION_GUARD {
        Err(Error::GuardExceeded {
            what: "type-class enumeration",
            count,
            limit: ENUMERATION_GUARD,
        })
    } else {
        Ok(())
    }
}

/// Advances `c` to the next composition of the same total; false when `c`
/// was the last one (`[0, …, 0, t]`).
fn next_composition(c: &mut [usize]) -> bool {
    let m = c.len();
    let Some(i) = (0..m - 1).rev().find(|&i| c[i] > 0) else {
        return false;
    };
    let tail = c[m - 1];
    c[i] -= 1;
    c[m - 1] = 0;
    c[i + 1] = tail + 1;
    true
}

fn ln_factorials(t: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(t + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for i in 1..=t {
        acc += (i as f64).ln();
        table.push(acc);
    }
    table
}

/// Calls `visit(stat, [ln P1(type), ln P2(type)])` for every type class of
/// length-`t` sequences, where `stat` is the window's mean LLR. Types that
/// are impossible under both hypotheses are skipped.
pub(crate) fn for_each_type<F>(pair: &HypothesisPair, t: usize, mut visit: F) -> Result<()>
where
    F: FnMut(f64, [f64; 2]),
{
    let m = pair.alphabet_size();
    check_guard(t, m)?;
    if t == 0 {
        return Err(Error::param("n", "must be a positive integer"));
    }
    let lnf = ln_factorials(t);
    let ln_p = [pair.ln_probs(Hypothesis::H1), pair.ln_probs(Hypothesis::H2)];
    let mut counts = vec![0usize; m];
    counts[0] = t;
    loop {
        let mut coef = lnf[t];
        for &c in &counts {
            coef -= lnf[c];
        }
        let mut ln_w = [coef; 2];
        for (h, lp) in ln_p.iter().enumerate() {
            for (&c, &l) in counts.iter().zip(lp.iter()) {
                if c > 0 {
                    ln_w[h] += c as f64 * l;
                }
            }
            if ln_w[h].is_nan() {
                ln_w[h] = f64::NEG_INFINITY;
            }
        }
        if ln_w[0] > f64::NEG_INFINITY || ln_w[1] > f64::NEG_INFINITY {
            let stat = pair.mean_llr_from_counts(&counts)?;
            visit(stat, ln_w);
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    Ok(())
}
