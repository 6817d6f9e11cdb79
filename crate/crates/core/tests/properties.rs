//! Randomized invariants.

mod common;

use common::*;
use hyptest::exact::{evaluate, exact_fixed};
use hyptest::exponent::DEFAULT_TOL;
use hyptest::sim::{simulate, wilson_interval, SimConfig, Z95};
use hyptest::testbench::Procedure;
use hyptest::{kl, two_phase_design, Decision, Hypothesis, HypothesisPair, Phase2Threshold, Pmf};
use proptest::prelude::*;

fn pmf_vec(m: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    m.prop_flat_map(|m| prop::collection::vec(0.01f64..1.0, m))
}

fn pair_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|m| {
        (
            prop::collection::vec(0.01f64..1.0, m),
            prop::collection::vec(0.01f64..1.0, m),
        )
    })
}

fn make_pair(p1: &[f64], p2: &[f64]) -> HypothesisPair {
    HypothesisPair::new(Pmf::new(p1.to_vec()).unwrap(), Pmf::new(p2.to_vec()).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tilted_divergences_are_monotone((p1, p2) in pair_strategy()) {
        let pair = make_pair(&p1, &p2);
        prop_assume!(pair.p1().max_abs_diff(pair.p2()) > 1e-3);
        let mut prev = pair.tilted_divergences(0.0).unwrap();
        prop_assert!(prev.0 == 0.0 && (prev.1 - pair.kl12()).abs() < 1e-12);
        for i in 1..100 {
            let cur = pair.tilted_divergences(i as f64 / 99.0).unwrap();
            prop_assert!(cur.0 > prev.0, "f1 not increasing at {}", i);
            prop_assert!(cur.1 < prev.1, "f2 not decreasing at {}", i);
            prev = cur;
        }
        prop_assert!((prev.0 - pair.kl21()).abs() < 1e-12 && prev.1 == 0.0);
    }

    #[test]
    fn tilt_is_normalized((p1, p2) in pair_strategy(), l in 0.0f64..=1.0) {
        let t = make_pair(&p1, &p2).tilt(l).unwrap();
        let s: f64 = t.probs().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(t.probs().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_identity(p in pmf_vec(2..=6), q in pmf_vec(2..=6)) {
        let p = Pmf::new(p).unwrap();
        prop_assert!(kl(&p, &p).unwrap().abs() < 1e-12);
        if p.len() == q.len() {
            let q = Pmf::new(q).unwrap();
            let d = kl(&p, &q).unwrap();
            prop_assert!(d >= 0.0);
            if p.max_abs_diff(&q) > 1e-6 {
                prop_assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn llr_sum_is_additive(
        (p1, p2) in pair_strategy(),
        a in prop::collection::vec(0usize..64, 0..40),
        b in prop::collection::vec(0usize..64, 0..40),
    ) {
        let pair = make_pair(&p1, &p2);
        let m = pair.alphabet_size();
        let a: Vec<usize> = a.into_iter().map(|x| x % m).collect();
        let b: Vec<usize> = b.into_iter().map(|x| x % m).collect();
        let joined: Vec<usize> = a.iter().chain(&b).copied().collect();
        let whole = pair.llr_sum(joined.iter().copied()).unwrap();
        let parts = pair.llr_sum(a.iter().copied()).unwrap() + pair.llr_sum(b.iter().copied()).unwrap();
        prop_assert!((whole - parts).abs() < 1e-9 * (1.0 + whole.abs()));
    }

    #[test]
    fn envelope_equals_brute_force(pts in prop::collection::vec((0u8..12, 0u8..12), 1..60)) {
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(a, b)| (a as f64 / 4.0, b as f64 / 4.0)).collect();
        let curve = hyptest::RegionBoundary {
            kind: hyptest::exponent::BoundaryKind::FdCurve,
            points: pts.iter().map(|&(a, b)| hyptest::exponent::BoundaryPoint::new(None, a, b)).collect(),
        };
        let env = points(&hyptest::region_envelope(&[curve]).unwrap());
        prop_assert_eq!(env, brute_envelope(&pts));
    }

    #[test]
    fn exact_buckets_sum_to_one(
        (p1, p2) in pair_strategy(),
        n in 1usize..25,
        alpha in -2.0f64..2.0,
        width in 0.0f64..1.0,
    ) {
        let pair = make_pair(&p1, &p2);
        prop_assume!(pair.has_finite_divergences());
        for proc in [
            Procedure::Fixed { n, alpha },
            Procedure::Rejection { n, alpha, beta: alpha - width },
        ] {
            let r = evaluate(&pair, &proc).unwrap();
            for h in Hypothesis::BOTH {
                prop_assert!((r.under(h).total() - 1.0).abs() < 1e-12, "{:?}", proc);
            }
        }
    }

    #[test]
    fn fixed_errors_are_monotone_in_alpha(
        (p1, p2) in pair_strategy(),
        n in 1usize..20,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let pair = make_pair(&p1, &p2);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = exact_fixed(&pair, n, lo).unwrap();
        let r_hi = exact_fixed(&pair, n, hi).unwrap();
        prop_assert!(r_hi.p1_err().prob() >= r_lo.p1_err().prob() - 1e-15);
        prop_assert!(r_hi.p2_err().prob() <= r_lo.p2_err().prob() + 1e-15);
    }
}

/// Sums sequence probabilities by the decision the testbench takes on each
/// sequence and compares against the exact report.
fn check_tie_equality(pair: &HypothesisPair, procedure: &Procedure, len: usize) {
    let m = pair.alphabet_size();
    let mut mass = [[0.0f64; 3]; 2];
    for s in all_sequences(m, len) {
        let out = procedure.run(pair, &mut s.iter().copied()).unwrap();
        let d = match out.decision {
            Decision::ChooseH1 => 0,
            Decision::ChooseH2 => 1,
            Decision::RejectBoth => 2,
        };
        for (h, hyp) in Hypothesis::BOTH.iter().enumerate() {
            mass[h][d] += seq_prob(pair.pmf(*hyp).probs(), &s);
        }
    }
    let r = evaluate(pair, procedure).unwrap();
    for (h, hyp) in Hypothesis::BOTH.iter().enumerate() {
        let o = r.under(*hyp);
        let got = [o.choose_h1.prob(), o.choose_h2.prob(), o.reject_both.prob()];
        for d in 0..3 {
            assert!((got[d] - mass[h][d]).abs() < 1e-13, "{procedure:?}: {hyp:?} outcome {d}: {} vs {}", got[d], mass[h][d]);
        }
    }
}

#[test]
fn testbench_and_exact_agree_on_threshold_ties() {
    let mut rng = rng(21);
    for round in 0..24 {
        let m = 2 + round % 3;
        let pair = make_pair(&random_pmf(&mut rng, m, 0.05), &random_pmf(&mut rng, m, 0.05));
        let n = 2 + round % 4;
        // Thresholds equal to attainable window statistics.
        let mut counts = vec![0usize; m];
        counts[round % m] = n;
        let hi = pair.mean_llr_from_counts(&counts).unwrap();
        counts[round % m] -= 1;
        counts[(round + 1) % m] += 1;
        let lo = pair.mean_llr_from_counts(&counts).unwrap();
        let (alpha, beta) = if hi >= lo { (hi, lo) } else { (lo, hi) };
        check_tie_equality(&pair, &Procedure::Fixed { n, alpha }, n);
        check_tie_equality(&pair, &Procedure::Fixed { n, alpha: beta }, n);
        check_tie_equality(&pair, &Procedure::Rejection { n, alpha, beta }, n);
        check_tie_equality(&pair, &Procedure::Rejection { n, alpha, beta: alpha }, n);
    }
}

#[test]
fn testbench_and_exact_agree_on_two_phase_ties() {
    // α2 set to an attainable Phase-II statistic and the band edges set to
    // attainable Phase-I statistics.
    let pair = example();
    let (n, k) = (3, 2);
    let base = two_phase_design(&pair, 0.2, k, Phase2Threshold::Chernoff, DEFAULT_TOL).unwrap();
    let mut design = base;
    design.alpha1 = pair.mean_llr_from_counts(&[1, 2]).unwrap();
    design.beta1 = pair.mean_llr_from_counts(&[2, 1]).unwrap();
    design.alpha2 = pair.mean_llr_from_counts(&[3, 3]).unwrap();
    check_tie_equality(&pair, &Procedure::TwoPhase { n, design }, (k + 1) * n);
}

#[test]
fn simulation_is_identical_across_worker_counts() {
    let pair = make_pair(&[0.2, 0.3, 0.5], &[0.4, 0.4, 0.2]);
    let design = two_phase_design(&pair, 0.05, 2, Phase2Threshold::Chernoff, DEFAULT_TOL).unwrap();
    let p = Procedure::TwoPhase { n: 10, design };
    let runs: Vec<_> = [1, 2, 4, 8]
        .iter()
        .map(|&w| simulate(&pair, Hypothesis::H1, &p, &SimConfig::new(20_000, 77).with_workers(w)).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r, &runs[0]);
    }
}

#[test]
fn wilson_intervals_cover_exact_values() {
    let pair = example();
    let p = Procedure::Fixed { n: 6, alpha: 0.0 };
    let exact = evaluate(&pair, &p).unwrap();
    for h in Hypothesis::BOTH {
        let truth = exact.error(h).prob();
        let covered = (0..100u64)
            .filter(|&rep| {
                let r = simulate(&pair, h, &p, &SimConfig::new(2_000, 1_000 + rep)).unwrap();
                r.err_ci_low <= truth && truth <= r.err_ci_high
            })
            .count();
        assert!(covered >= 90, "{h:?}: {covered}/100");
    }
}

#[test]
fn two_phase_stopping_times_take_two_values() {
    let pair = example();
    let design = two_phase_design(&pair, 0.1, 3, Phase2Threshold::Chernoff, DEFAULT_TOL).unwrap();
    let n = 7;
    let r = simulate(
        &pair,
        Hypothesis::H2,
        &Procedure::TwoPhase { n, design },
        &SimConfig::new(50_000, 5),
    )
    .unwrap();
    // With τ ∈ {n, 4n}: E[τ] = n + 3n·q̂ exactly.
    let q = r.continue_estimate;
    assert!((r.tau_mean - (n as f64) * (1.0 + 3.0 * q)).abs() < 1e-9);
    let w = wilson_interval(r.continue_count, r.trials, Z95);
    assert!(w.0 <= q && q <= w.1);
}
