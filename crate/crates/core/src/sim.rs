//! Reproducible Monte Carlo over any [`Procedure`].
//!
//! Trial `i` under hypothesis `h` draws from a ChaCha8 stream keyed by the
//! master seed with stream id `2i + h`, so its samples do not depend on
//! which worker runs it. Per-trial results are reduced into integer
//! counters only, which makes reports bit-identical for any worker count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{exact_two_phase, exponent_fit, two_phase_tau_stats, ExponentFit, TauStats};
use crate::exponent::TwoPhaseDesign;
use crate::pmf::{Hypothesis, HypothesisPair, Pmf};
use crate::testbench::{Decision, Procedure};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    fn base(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.master_seed)
    }

    /// Independent generator for one `(hypothesis, trial)` pair.
    pub fn trial_rng(&self, truth: Hypothesis, trial: u64) -> ChaCha8Rng {
        let mut rng = self.base();
        rng.set_stream(stream_id(truth, trial));
        rng
    }
}

fn stream_id(truth: Hypothesis, trial: u64) -> u64 {
    let h = match truth {
        Hypothesis::H1 => 0,
        Hypothesis::H2 => 1,
    };
    (trial << 1) | h
}

/// Infinite i.i.d. symbol stream from a distribution, by inversion.
pub struct SampleStream<'a> {
    rng: ChaCha8Rng,
    sampler: &'a Sampler,
}

impl Iterator for SampleStream<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        let u: f64 = self.rng.random();
        Some(self.sampler.symbol(u))
    }
}

/// Cumulative table for inversion sampling.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl Sampler {
    pub fn new(pmf: &Pmf) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .probs()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = pmf.probs().iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self { cdf, last_positive }
    }

    /// Symbol for a uniform draw `u ∈ [0, 1)`; zero-probability symbols are
    /// never returned.
    #[inline]
    pub fn symbol(&self, u: f64) -> usize {
        self.cdf
            .iter()
            .position(|&c| u < c)
            .map_or(self.last_positive, |x| x.min(self.last_positive))
    }

    pub fn stream(&self, rng: ChaCha8Rng) -> SampleStream<'_> {
        SampleStream { rng, sampler: self }
    }
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo.min(p), hi.max(p))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: SeedSpec,
    /// Orders `l` for which `E[(τ/n)^l]` is reported.
    pub moment_orders: Vec<u32>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(trials: u64, master_seed: u64) -> Self {
        Self {
            trials,
            seed: SeedSpec::new(master_seed),
            moment_orders: vec![1, 2],
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn with_moment_orders(mut self, orders: Vec<u32>) -> Self {
        self.moment_orders = orders;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub choose_h1: u64,
    pub choose_h2: u64,
    pub reject_both: u64,
}

impl DecisionCounts {
    pub fn total(&self) -> u64 {
        self.choose_h1 + self.choose_h2 + self.reject_both
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub procedure: String,
    pub n: usize,
    pub truth: Hypothesis,
    pub trials: u64,
    pub master_seed: u64,
    pub decisions: DecisionCounts,
    pub err_count: u64,
    pub err_estimate: f64,
    pub err_ci_low: f64,
    pub err_ci_high: f64,
    /// `3 / trials` when no error was observed.
    pub err_rule_of_three: Option<f64>,
    /// Trials that sampled past `n`.
    pub continue_count: u64,
    pub continue_estimate: f64,
    pub continue_ci_low: f64,
    pub continue_ci_high: f64,
    pub truncated_count: u64,
    pub tau_mean: f64,
    pub tau_var: f64,
    pub tau_scaled_moments: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone)]
struct Tally {
    decisions: DecisionCounts,
    continued: u64,
    truncated: u64,
    /// `Σ τ^l` for `l = 1..=max_order`.
    tau_powers: Vec<u128>,
}

impl Tally {
    fn new(max_order: usize) -> Self {
        Self {
            decisions: DecisionCounts::default(),
            continued: 0,
            truncated: 0,
            tau_powers: vec![0; max_order],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.decisions.choose_h1 += other.decisions.choose_h1;
        self.decisions.choose_h2 += other.decisions.choose_h2;
        self.decisions.reject_both += other.decisions.reject_both;
        self.continued += other.continued;
        self.truncated += other.truncated;
        for (a, b) in self.tau_powers.iter_mut().zip(other.tau_powers) {
            *a += b;
        }
        self
    }
}

fn check_trial_budget(procedure: &Procedure, trials: u64, max_order: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::param("trials", "must be a positive integer"));
    }
    let bound = (procedure.max_tau() as f64).powi(max_order as i32) * trials as f64;
    if bound >= u128::MAX as f64 / 2.0 {
        return Err(Error::param(
            "moment_orders",
            format!("order {max_order} with {trials} trials overflows the integer moment accumulators"),
        ));
    }
    Ok(())
}

/// Runs `cfg.trials` independent trials of `procedure` with samples drawn
/// from `truth`.
pub fn simulate(pair: &HypothesisPair, truth: Hypothesis, procedure: &Procedure, cfg: &SimConfig) -> Result<SimReport> {
    if cfg.moment_orders.contains(&0) {
        return Err(Error::param("moment_orders", "orders must be ≥ 1"));
    }
    let max_order = cfg.moment_orders.iter().copied().max().unwrap_or(0).max(2) as usize;
    check_trial_budget(procedure, cfg.trials, max_order)?;
    if let Procedure::Sprt(b) = procedure {
        b.validated()?;
    }
    let sampler = Sampler::new(pair.pmf(truth));
    let n = procedure.base_n();

    let run = || -> Result<Tally> {
        (0..cfg.trials)
            .into_par_iter()
            .try_fold(
                || Tally::new(max_order),
                |mut tally, trial| -> Result<Tally> {
                    let mut stream = sampler.stream(cfg.seed.trial_rng(truth, trial));
                    let out = procedure.run(pair, &mut stream)?;
                    match out.decision {
                        Decision::ChooseH1 => tally.decisions.choose_h1 += 1,
                        Decision::ChooseH2 => tally.decisions.choose_h2 += 1,
                        Decision::RejectBoth => tally.decisions.reject_both += 1,
                    }
                    tally.continued += u64::from(out.tau > n);
                    tally.truncated += u64::from(out.truncated);
                    let tau = out.tau as u128;
                    let mut pow = 1u128;
                    for slot in tally.tau_powers.iter_mut() {
                        pow *= tau;
                        *slot += pow;
                    }
                    Ok(tally)
                },
            )
            .try_reduce(|| Tally::new(max_order), |a, b| Ok(a.merge(b)))
    };
    let tally = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(build_report(procedure, truth, cfg, n, &tally))
}

fn build_report(procedure: &Procedure, truth: Hypothesis, cfg: &SimConfig, n: usize, tally: &Tally) -> SimReport {
    let trials = cfg.trials;
    let nt = trials as f64;
    let err_count = match truth {
        Hypothesis::H1 => tally.decisions.choose_h2,
        Hypothesis::H2 => tally.decisions.choose_h1,
    };
    let (err_ci_low, err_ci_high) = wilson_interval(err_count, trials, Z95);
    let (continue_ci_low, continue_ci_high) = wilson_interval(tally.continued, trials, Z95);
    let s1 = tally.tau_powers[0];
    let s2 = tally.tau_powers[1];
    let tau_mean = s1 as f64 / nt;
    // N·Σ τ² − (Σ τ)² is computed exactly in integers.
    let centered = (trials as u128 * s2).saturating_sub(s1 * s1);
    let tau_var = centered as f64 / (nt * nt);
    let nf = n as f64;
    let tau_scaled_moments = cfg
        .moment_orders
        .iter()
        .map(|&l| {
            let sum = tally.tau_powers[l as usize - 1] as f64;
            (l, sum / nt / nf.powi(l as i32))
        })
        .collect();
    SimReport {
        procedure: procedure.name().to_string(),
        n,
        truth,
        trials,
        master_seed: cfg.seed.master_seed,
        decisions: tally.decisions,
        err_count,
        err_estimate: err_count as f64 / nt,
        err_ci_low,
        err_ci_high,
        err_rule_of_three: (err_count == 0).then(|| 3.0 / nt),
        continue_count: tally.continued,
        continue_estimate: tally.continued as f64 / nt,
        continue_ci_low,
        continue_ci_high,
        truncated_count: tally.truncated,
        tau_mean,
        tau_var,
        tau_scaled_moments,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub report: SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Fit of `−ln(err_estimate)` against `n` over rows with a nonzero
    /// estimate.
    pub fit: ExponentFit,
    /// `n` values left out of the fit because no error was observed.
    pub skipped: Vec<usize>,
    /// Same fit for the continuation frequency, when at least two rows
    /// observed a continuation.
    pub continue_fit: Option<ExponentFit>,
}

fn check_n_values(n_values: &[usize]) -> Result<()> {
    if n_values.len() < 3 {
        return Err(Error::param("n_values", "need at least 3 values"));
    }
    if n_values[0] == 0 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("n_values", "must be positive and strictly increasing"));
    }
    Ok(())
}

/// Simulates `family(n)` for each `n`, without fitting.
pub fn sweep_rows<F>(pair: &HypothesisPair, truth: Hypothesis, family: F, n_values: &[usize], cfg: &SimConfig) -> Result<Vec<SweepRow>>
where
    F: Fn(usize) -> Result<Procedure>,
{
    check_n_values(n_values)?;
    n_values
        .iter()
        .map(|&n| {
            Ok(SweepRow {
                n,
                report: simulate(pair, truth, &family(n)?, cfg)?,
            })
        })
        .collect()
}

/// Fits the decay of the error and continuation frequencies across rows.
pub fn fit_sweep(rows: Vec<SweepRow>) -> Result<SweepReport> {
    let mut skipped = Vec::new();
    let mut points = Vec::new();
    for row in &rows {
        if row.report.err_count == 0 {
            skipped.push(row.n);
        } else {
            points.push((row.n as f64, row.report.err_estimate));
        }
    }
    if points.len() < 2 {
        let trials = rows.first().map_or(0, |r| r.report.trials);
        return Err(Error::Unresolvable(format!(
            "{} of {} sweep points observed no error with {trials} trials",
            skipped.len(),
            rows.len(),
        )));
    }
    let fit = exponent_fit(&points)?;
    let cont: Vec<_> = rows
        .iter()
        .filter(|r| r.report.continue_count > 0)
        .map(|r| (r.n as f64, r.report.continue_estimate))
        .collect();
    let continue_fit = if cont.len() >= 2 { Some(exponent_fit(&cont)?) } else { None };
    Ok(SweepReport {
        rows,
        fit,
        skipped,
        continue_fit,
    })
}

/// Simulates `family(n)` for each `n` and fits the decay of the error
/// frequency.
pub fn sweep<F>(pair: &HypothesisPair, truth: Hypothesis, family: F, n_values: &[usize], cfg: &SimConfig) -> Result<SweepReport>
where
    F: Fn(usize) -> Result<Procedure>,
{
    fit_sweep(sweep_rows(pair, truth, family, n_values, cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: usize,
    pub truth: Hypothesis,
    pub order: u32,
    pub scaled_moment: f64,
    pub var_tau: f64,
    pub var_tau_over_n2: f64,
    /// Exact values from type enumeration, when within the guard.
    pub exact_scaled_moment: Option<f64>,
    pub exact_var_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub rows: Vec<MomentRow>,
    pub reports: Vec<SimReport>,
    pub exact: Vec<(usize, Hypothesis, TauStats)>,
    /// `E[(τ/n)^l] − 1` is nonincreasing in `n` for every order and truth.
    pub moments_decreasing: bool,
    /// `Var(τ)` is nonincreasing across the `n` with `nγ > 2 ln(kn)`.
    pub var_decreasing: bool,
}

fn nonincreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

/// Stopping-time moments of the two-phase test across `n_values`, from
/// simulation and (when enumerable) exactly.
pub fn moment_check(
    pair: &HypothesisPair,
    design: &TwoPhaseDesign,
    n_values: &[usize],
    cfg: &SimConfig,
    orders: &[u32],
) -> Result<MomentCheck> {
    check_n_values(n_values)?;
    if orders.is_empty() {
        return Err(Error::param("orders", "need at least one moment order"));
    }
    let cfg = cfg.clone().with_moment_orders(orders.to_vec());
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut exact_stats = Vec::new();
    for &truth in &Hypothesis::BOTH {
        for &n in n_values {
            let procedure = Procedure::TwoPhase { n, design: *design };
            let report = simulate(pair, truth, &procedure, &cfg)?;
            let exact = match exact_two_phase(pair, design, n) {
                Ok(r) => Some(two_phase_tau_stats(r.under(truth).continued.prob(), design.k, n, orders)),
                Err(Error::GuardExceeded { .. }) => None,
                Err(e) => return Err(e),
            };
            let n2 = (n * n) as f64;
            for &l in orders {
                rows.push(MomentRow {
                    n,
                    truth,
                    order: l,
                    scaled_moment: report.tau_scaled_moments[&l],
                    var_tau: report.tau_var,
                    var_tau_over_n2: report.tau_var / n2,
                    exact_scaled_moment: exact.as_ref().map(|e| e.scaled_moments[&l]),
                    exact_var_tau: exact.as_ref().map(|e| e.var_tau),
                });
            }
            if let Some(e) = exact {
                exact_stats.push((n, truth, e));
            }
            reports.push(report);
        }
    }
    let mut moments_decreasing = true;
    let mut var_decreasing = true;
    for &truth in &Hypothesis::BOTH {
        for &l in orders {
            let excess: Vec<f64> = rows
                .iter()
                .filter(|r| r.truth == truth && r.order == l)
                .map(|r| r.scaled_moment - 1.0)
                .collect();
            moments_decreasing &= nonincreasing(&excess);
        }
        let vars: Vec<f64> = rows
            .iter()
            .filter(|r| {
                r.truth == truth
                    && r.order == orders[0]
                    && design.gamma * r.n as f64 > 2.0 * ((design.k * r.n) as f64).ln()
            })
            .map(|r| r.var_tau)
            .collect();
        var_decreasing &= nonincreasing(&vars);
    }
    Ok(MomentCheck {
        rows,
        reports,
        exact: exact_stats,
        moments_decreasing,
        var_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_fixed;
    use crate::exponent::{two_phase_design, Phase2Threshold, DEFAULT_TOL};

    fn example() -> HypothesisPair {
        HypothesisPair::bernoulli(0.9, 0.2).unwrap()
    }

    #[test]
    fn sampler_skips_zero_probability_symbols() {
        let s = Sampler::new(&Pmf::new(vec![0.5, 0.5, 0.0]).unwrap());
        assert_eq!(s.symbol(0.0), 0);
        assert_eq!(s.symbol(0.5), 1);
        assert_eq!(s.symbol(1.0 - 1e-17), 1);
        let s = Sampler::new(&Pmf::new(vec![0.0, 1.0]).unwrap());
        assert_eq!(s.symbol(0.0), 1);
    }

    #[test]
    fn streams_are_keyed_by_trial_and_hypothesis() {
        let seed = SeedSpec::new(7);
        let draw = |h, t| -> Vec<u64> {
            let mut r = seed.trial_rng(h, t);
            (0..4).map(|_| r.random()).collect()
        };
        assert_eq!(draw(Hypothesis::H1, 3), draw(Hypothesis::H1, 3));
        assert_ne!(draw(Hypothesis::H1, 3), draw(Hypothesis::H2, 3));
        assert_ne!(draw(Hypothesis::H1, 3), draw(Hypothesis::H1, 4));
    }

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 1, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.5 && hi <= 1.0);
        let (lo, hi) = wilson_interval(1, 1, Z95);
        assert!(lo < 0.5 && hi == 1.0);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn single_trial_is_a_unit_vector() {
        let pair = example();
        let r = simulate(&pair, Hypothesis::H1, &Procedure::Fixed { n: 3, alpha: 0.0 }, &SimConfig::new(1, 5)).unwrap();
        assert_eq!(r.decisions.total(), 1);
        assert!(r.err_ci_low <= r.err_estimate && r.err_estimate <= r.err_ci_high);
        assert!(r.err_ci_high - r.err_ci_low > 0.5);
    }

    #[test]
    fn degenerate_pair_matches_exact() {
        let pair = HypothesisPair::bernoulli(0.5, 0.5).unwrap();
        let exact = exact_fixed(&pair, 5, 0.0).unwrap().p1_err().prob();
        let r = simulate(
            &pair,
            Hypothesis::H1,
            &Procedure::Fixed { n: 5, alpha: 0.0 },
            &SimConfig::new(100_000, 11),
        )
        .unwrap();
        assert!(r.err_ci_low <= exact && exact <= r.err_ci_high, "{exact} vs {r:?}");
    }

    #[test]
    fn two_phase_first_moment_identity() {
        let pair = example();
        let design = two_phase_design(&pair, 0.2, 2, Phase2Threshold::Chernoff, DEFAULT_TOL).unwrap();
        let p = Procedure::TwoPhase { n: 6, design };
        let r = simulate(&pair, Hypothesis::H2, &p, &SimConfig::new(20_000, 3)).unwrap();
        assert!(r.continue_count > 0);
        let expect = 1.0 + 2.0 * r.continue_estimate;
        assert!((r.tau_scaled_moments[&1] - expect).abs() < 1e-12);
        assert_eq!(r.truncated_count, 0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let pair = example();
        let p = Procedure::Fixed { n: 7, alpha: 0.1 };
        let base = simulate(&pair, Hypothesis::H2, &p, &SimConfig::new(5_000, 9).with_workers(1)).unwrap();
        for w in [2, 3] {
            let other = simulate(&pair, Hypothesis::H2, &p, &SimConfig::new(5_000, 9).with_workers(w)).unwrap();
            assert_eq!(base, other);
        }
    }

    #[test]
    fn sweep_validates_n_values() {
        let pair = example();
        let cfg = SimConfig::new(10, 1);
        let fam = |n| Ok(Procedure::Fixed { n, alpha: 0.0 });
        assert!(sweep(&pair, Hypothesis::H1, fam, &[1, 2], &cfg).is_err());
        assert!(sweep(&pair, Hypothesis::H1, fam, &[3, 2, 4], &cfg).is_err());
    }

    #[test]
    fn sweep_of_constant_error_has_flat_slope() {
        // Errs exactly when the single sample is 0: error rate 0.1 for every n.
        let pair = example();
        let fam = |_: usize| Ok(Procedure::Fixed { n: 1, alpha: 0.0 });
        let r = sweep(&pair, Hypothesis::H1, fam, &[5, 10, 15, 20], &SimConfig::new(20_000, 2)).unwrap();
        assert!(r.fit.slope.abs() < 5e-3, "{:?}", r.fit);
    }

    #[test]
    fn sweep_with_no_errors_is_unresolvable() {
        let pair = example();
        let fam = |n| Ok(Procedure::Fixed { n, alpha: -100.0 });
        let r = sweep(&pair, Hypothesis::H1, fam, &[5, 10, 15], &SimConfig::new(100, 2));
        assert!(matches!(r, Err(Error::Unresolvable(_))));
    }

    #[test]
    fn moment_check_on_empty_band_is_exactly_one() {
        let pair = example();
        let cp = crate::exponent::chernoff(&pair, DEFAULT_TOL).unwrap();
        let design = two_phase_design(&pair, cp.d_star, 2, Phase2Threshold::Chernoff, DEFAULT_TOL).unwrap();
        let m = moment_check(&pair, &design, &[4, 8, 12], &SimConfig::new(500, 1), &[1, 2, 3]).unwrap();
        for row in &m.rows {
            assert_eq!(row.scaled_moment, 1.0);
            assert_eq!(row.var_tau, 0.0);
            assert_eq!(row.exact_scaled_moment, Some(1.0));
        }
        assert!(m.moments_decreasing && m.var_decreasing);
    }
}
