//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's numerical code: KL and the tilted
//! family are evaluated in linear space with compensated sums, roots are
//! found by grid scans, and region comparisons are brute-force O(n²)
//! dominance scans.
#![allow(dead_code)]

use hyptest::HypothesisPair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bernoulli(0.9) against Bernoulli(0.2), as `[P(0), P(1)]`.
pub const P1: [f64; 2] = [0.1, 0.9];
pub const P2: [f64; 2] = [0.8, 0.2];

// 40-digit reference values for the example pair.
pub const KL12: f64 = 1.145_725_502_930_663_073;
pub const KL21: f64 = 1.362_737_753_988_613_928;
pub const LAMBDA_STAR: f64 = 0.522_755_684_077_107_073;
pub const D_STAR: f64 = 0.347_379_630_858_362_612;
pub const K_STAR: f64 = 3.922_906_333_400_544_529;
/// `(γ, E1(γ), E2(γ), λ_A, λ_B)`.
pub const E_GAMMA: [(f64, f64, f64, f64, f64); 4] = [
    (0.05, 0.928_395_225_523_546_654, 0.813_260_473_171_144_772, 0.804_284_945_925_075_661, 0.237_885_672_591_363_989),
    (0.1, 0.763_196_490_854_628_212, 0.683_591_781_597_204_307, 0.731_874_363_826_842_168, 0.316_701_228_883_083_480),
    (0.2, 0.549_022_386_078_175_267, 0.512_563_810_946_795_011, 0.632_261_401_660_836_292, 0.418_671_409_047_723_187),
    (0.3, 0.402_797_128_321_358_041, 0.393_313_848_637_980_121, 0.555_352_140_934_066_297, 0.492_632_957_093_411_095),
];

pub fn example() -> HypothesisPair {
    HypothesisPair::bernoulli(0.9, 0.2).unwrap()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn kl_ref(p: &[f64], q: &[f64]) -> f64 {
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    compensated_sum(p.iter().zip(q).map(|(&a, &b)| {
        let (a, b) = (a / sp, b / sq);
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    }))
}

/// `P1^(1−λ) P2^λ / Z`, directly in linear space.
pub fn tilt_ref(p1: &[f64], p2: &[f64], lambda: f64) -> Vec<f64> {
    let w: Vec<f64> = p1
        .iter()
        .zip(p2)
        .map(|(&a, &b)| {
            let x = if lambda == 1.0 { 1.0 } else { a.powf(1.0 - lambda) };
            let y = if lambda == 0.0 { 1.0 } else { b.powf(lambda) };
            x * y
        })
        .collect();
    let z = compensated_sum(w.iter().copied());
    w.iter().map(|x| x / z).collect()
}

pub fn tilted_kls_ref(p1: &[f64], p2: &[f64], lambda: f64) -> (f64, f64) {
    let t = tilt_ref(p1, p2, lambda);
    (kl_ref(&t, p1), kl_ref(&t, p2))
}

/// Closed-form Bernoulli tilt: `q(λ) = a / (a + b)` with
/// `a = p^(1−λ) r^λ`, `b = (1−p)^(1−λ) (1−r)^λ`.
pub fn bernoulli_tilt(p: f64, r: f64, lambda: f64) -> f64 {
    let a = p.powf(1.0 - lambda) * r.powf(lambda);
    let b = (1.0 - p).powf(1.0 - lambda) * (1.0 - r).powf(lambda);
    a / (a + b)
}

pub fn bernoulli_kl(q: f64, p: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(q, p) + term(1.0 - q, 1.0 - p)
}

fn scan(step: f64) -> impl Iterator<Item = f64> {
    let steps = (1.0 / step).round() as usize;
    (0..=steps).map(move |i| i as f64 / steps as f64)
}

/// Chernoff point by a uniform scan for the crossing of the tilted KLs.
pub fn chernoff_scan(p1: &[f64], p2: &[f64], step: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for l in scan(step) {
        let (f1, f2) = tilted_kls_ref(p1, p2, l);
        let gap = (f1 - f2).abs();
        if gap < best.0 {
            best = (gap, l, 0.5 * (f1 + f2));
        }
    }
    (best.1, best.2)
}

/// `(E1(γ), E2(γ))` by scanning: the largest `f1` with `f2 ≥ γ` and the
/// largest `f2` with `f1 ≥ γ`.
pub fn e_gamma_scan(p1: &[f64], p2: &[f64], gamma: f64, step: f64) -> (f64, f64) {
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for l in scan(step) {
        let (f1, f2) = tilted_kls_ref(p1, p2, l);
        if f2 >= gamma {
            e1 = e1.max(f1);
        }
        if f1 >= gamma {
            e2 = e2.max(f2);
        }
    }
    (e1, e2)
}

/// Whether some point of `set` dominates `p` up to `tol`.
pub fn dominated(p: (f64, f64), set: &[(f64, f64)], tol: f64) -> bool {
    set.iter().any(|q| q.0 >= p.0 - tol && q.1 >= p.1 - tol)
}

/// Down-closed region of `outer` contains that of `inner`.
pub fn region_contains(outer: &[(f64, f64)], inner: &[(f64, f64)], tol: f64) -> bool {
    inner.iter().all(|&p| dominated(p, outer, tol))
}

/// Containment plus a witness point of `outer` at distance `> margin`
/// outside `inner`.
pub fn region_strictly_contains(outer: &[(f64, f64)], inner: &[(f64, f64)], tol: f64, margin: f64) -> bool {
    region_contains(outer, inner, tol)
        && outer
            .iter()
            .any(|&p| !inner.iter().any(|q| q.0 >= p.0 - margin && q.1 >= p.1 - margin))
}

/// Maximal points by pairwise comparison, sorted by `e1`.
pub fn brute_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let beaten = points.iter().enumerate().any(|(j, &q)| {
            j != i && q.0 >= p.0 && q.1 >= p.1 && (q.0 > p.0 || q.1 > p.1 || j < i)
        });
        if !beaten {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub fn points(b: &hyptest::RegionBoundary) -> Vec<(f64, f64)> {
    b.exponents().map(|e| (e.e1, e.e2)).collect()
}

/// Random distribution on `m` symbols with all masses at least `floor`.
pub fn random_pmf(rng: &mut ChaCha8Rng, m: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| floor + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every sequence of length `n` over `m` symbols, in lexicographic order.
pub fn all_sequences(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(m.pow(n as u32));
    let mut seq = vec![0usize; n];
    loop {
        out.push(seq.clone());
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < m {
                break;
            }
            seq[i] = 0;
        }
    }
}

pub fn seq_prob(p: &[f64], seq: &[usize]) -> f64 {
    seq.iter().map(|&x| p[x]).product()
}

/// ln P(X <= x) for X ~ Binomial(trials, p), summed in log space.
pub fn binom_ln_cdf(x: u64, trials: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return if x >= trials { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = trials as f64;
    let odds = (p / (1.0 - p)).ln();
    let mut term = n * (-p).ln_1p();
    let mut terms = vec![term];
    for k in 1..=x.min(trials) {
        let k = k as f64;
        term += ((n - k + 1.0) / k).ln() + odds;
        terms.push(term);
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Two-sided Clopper-Pearson interval at level 1 - alpha.
pub fn clopper_pearson(x: u64, trials: u64, alpha: f64) -> (f64, f64) {
    let tail = (alpha / 2.0).ln();
    let solve = |f: &dyn Fn(f64) -> bool| {
        // f is true on [0, root) and false on (root, 1].
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let low = if x == 0 {
        0.0
    } else {
        // P(X >= x) = alpha / 2, increasing in p.
        solve(&|p| (1.0 - binom_ln_cdf(x - 1, trials, p).exp()).ln() < tail)
    };
    let high = if x == trials {
        1.0
    } else {
        // P(X <= x) = alpha / 2, decreasing in p.
        solve(&|p| binom_ln_cdf(x, trials, p) > tail)
    };
    (low, high)
}
