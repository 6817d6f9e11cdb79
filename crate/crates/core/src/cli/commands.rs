use serde::Serialize;

use super::config::{example_pair, ProcedureKind, Units, Validated, SCHEMA_VERSION};
use super::output::{boundary_csv, json_bytes, sim_csv, LabeledBoundary, Outputs};
use super::CliError;
use crate::error::Error;
use crate::exact::{evaluate, exponent_fit_ln, ErrorReport, ExponentFit};
use crate::exponent::{
    chernoff, e_gamma, fd_boundary, gamma_region, kstar, seq_corner, two_phase_region, ChernoffPoint, ExponentPair,
    RegionBoundary, TwoPhaseDesign, DEFAULT_TOL,
};
use crate::pmf::{Hypothesis, HypothesisPair};
use crate::sim::{fit_sweep, simulate, sweep_rows, SimConfig, SimReport, SweepReport};
use crate::testbench::Procedure;

/// `γ` family of the region figure.
pub const FIG2_GAMMAS: [f64; 4] = [0.05, 0.1, 0.2, 0.3];
/// `γ` family of the short-second-phase figure.
pub const FIG3_GAMMAS: [f64; 4] = [0.01, 0.03, 0.05, 0.07];
/// Second-phase length multiplier of the short-second-phase figure.
pub const FIG3_K: usize = 2;

fn require_nondegenerate(pair: &HypothesisPair) -> Result<(), CliError> {
    if pair.is_degenerate() {
        return Err(Error::DegeneratePair("p1 and p2 are identical; every error exponent is zero".into()).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct Geometry {
    kl12: f64,
    kl21: f64,
    seq_corner: ExponentPair,
    lambda_star: f64,
    d_star: f64,
    k_star: f64,
    k_min: usize,
}

fn geometry(pair: &HypothesisPair, units: Units) -> Result<(Geometry, ChernoffPoint), CliError> {
    require_nondegenerate(pair)?;
    let s = units.scale();
    let cp = chernoff(pair, DEFAULT_TOL)?;
    let ks = kstar(pair)?;
    let corner = seq_corner(pair)?;
    Ok((
        Geometry {
            kl12: pair.kl12() * s,
            kl21: pair.kl21() * s,
            seq_corner: ExponentPair::new(corner.e1 * s, corner.e2 * s),
            lambda_star: cp.lambda_star,
            d_star: cp.d_star * s,
            k_star: ks.raw,
            k_min: ks.k_min,
        },
        cp,
    ))
}

fn within_d_star(gamma: f64, cp: &ChernoffPoint) -> bool {
    gamma <= cp.d_star * (1.0 + 1e-9)
}

#[derive(Serialize)]
struct GammaEntry {
    gamma: f64,
    e1: f64,
    e2: f64,
    lambda_a: f64,
    lambda_b: f64,
    clamped: bool,
    file: String,
    two_phase_file: Option<String>,
}

#[derive(Serialize)]
struct RegionSummary {
    schema_version: u32,
    units: Units,
    #[serde(flatten)]
    geometry: Geometry,
    gammas: Vec<GammaEntry>,
    warnings: Vec<String>,
}

pub fn region(v: &Validated) -> Result<Outputs, CliError> {
    let pair = &v.pair;
    let (geometry, cp) = geometry(pair, v.units)?;
    let mut out = Outputs::default();
    let fd = fd_boundary(pair, v.grid)?;
    let corner = RegionBoundary::box_corner(seq_corner(pair)?);
    let single = |b: &RegionBoundary, gamma, k| {
        boundary_csv(
            v.units,
            &[LabeledBoundary {
                boundary: b,
                gamma,
                k,
            }],
        )
    };
    out.file("fd.csv", single(&fd, None, None)?);
    out.file("seq_corner.csv", single(&corner, None, None)?);

    let s = v.units.scale();
    let mut gammas = Vec::new();
    for &g in &v.gammas {
        let c = e_gamma(pair, g, DEFAULT_TOL)?;
        if c.clamped() {
            out.warn(format!("gamma {g} exceeds an attainable divergence; the tilt was clamped to [0, 1]"));
        }
        let file = format!("gamma_{g}.csv");
        out.file(&file, single(&gamma_region(pair, g, v.grid)?, Some(g), None)?);
        let two_phase_file = match v.raw.k {
            Some(k) if within_d_star(g, &cp) => {
                let name = format!("two_phase_gamma_{g}_k{k}.csv");
                out.file(&name, single(&two_phase_region(pair, g, k, v.grid)?, Some(g), Some(k))?);
                Some(name)
            }
            Some(_) => {
                out.warn(format!(
                    "gamma {g} exceeds D* = {}; no two-phase region (use a fixed-length test)",
                    cp.d_star
                ));
                None
            }
            None => None,
        };
        gammas.push(GammaEntry {
            gamma: g,
            e1: c.e1 * s,
            e2: c.e2 * s,
            lambda_a: c.lambda_a,
            lambda_b: c.lambda_b,
            clamped: c.clamped(),
            file,
            two_phase_file,
        });
    }
    let summary = RegionSummary {
        schema_version: SCHEMA_VERSION,
        units: v.units,
        geometry,
        gammas,
        warnings: out.warnings.clone(),
    };
    let bytes = json_bytes(&summary)?;
    out.stdout = String::from_utf8_lossy(&bytes).into_owned();
    out.file("summary.json", bytes);
    Ok(out)
}

#[derive(Serialize)]
struct DesignEntry {
    gamma: f64,
    k: usize,
    lambda_a: f64,
    lambda_b: f64,
    alpha1: f64,
    beta1: f64,
    phase2_lambda: f64,
    alpha2: f64,
    e1_target: f64,
    e2_target: f64,
    degenerate: bool,
}

impl DesignEntry {
    fn new(d: &TwoPhaseDesign, s: f64) -> Self {
        Self {
            gamma: d.gamma * s,
            k: d.k,
            lambda_a: d.lambda_a,
            lambda_b: d.lambda_b,
            alpha1: d.alpha1 * s,
            beta1: d.beta1 * s,
            phase2_lambda: d.phase2_lambda,
            alpha2: d.alpha2 * s,
            e1_target: d.e1_target * s,
            e2_target: d.e2_target * s,
            degenerate: d.degenerate,
        }
    }
}

#[derive(Serialize)]
struct DesignSummary {
    schema_version: u32,
    units: Units,
    designs: Vec<DesignEntry>,
    warnings: Vec<String>,
}

pub fn design(v: &Validated) -> Result<Outputs, CliError> {
    require_nondegenerate(&v.pair)?;
    if v.gammas.is_empty() {
        return Err(CliError::Config("`gamma`: required".into()));
    }
    let mut out = Outputs::default();
    let mut designs = Vec::new();
    for &g in &v.gammas {
        let d = v.design(g)?;
        if d.degenerate {
            out.warn(format!(
                "gamma {g} equals D*: alpha1 = beta1, the continuation band is empty and the test is fixed-length"
            ));
        }
        designs.push(DesignEntry::new(&d, v.units.scale()));
    }
    let bytes = json_bytes(&DesignSummary {
        schema_version: SCHEMA_VERSION,
        units: v.units,
        designs,
        warnings: out.warnings.clone(),
    })?;
    out.stdout = String::from_utf8_lossy(&bytes).into_owned();
    out.file("design.json", bytes);
    Ok(out)
}

#[derive(Serialize)]
struct ExactSummary<'a> {
    schema_version: u32,
    procedure: &'a Procedure,
    report: &'a ErrorReport,
    /// `e^{−γn}`, the continuation target of a two-phase design.
    continue_bound: Option<f64>,
}

fn continue_bound(p: &Procedure) -> Option<f64> {
    match p {
        Procedure::TwoPhase { n, design } => Some((-design.gamma * *n as f64).exp()),
        _ => None,
    }
}

pub fn exact(v: &Validated) -> Result<Outputs, CliError> {
    let procedure = v.procedure(v.n()?)?;
    let report = evaluate(&v.pair, &procedure)?;
    let mut out = Outputs::default();
    let bytes = json_bytes(&ExactSummary {
        schema_version: SCHEMA_VERSION,
        procedure: &procedure,
        report: &report,
        continue_bound: continue_bound(&procedure),
    })?;
    out.stdout = String::from_utf8_lossy(&bytes).into_owned();
    out.file("exact.json", bytes);
    Ok(out)
}

fn sim_config(v: &Validated) -> SimConfig {
    SimConfig {
        trials: v.trials(),
        seed: crate::sim::SeedSpec::new(v.master_seed()),
        moment_orders: v.raw.moment_orders.clone().unwrap_or_else(|| vec![1, 2]),
        workers: v.raw.workers,
    }
}

/// An estimate set against its exact value; `z` uses the exact standard
/// error and is `null` when that is zero and the estimate differs.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub n: usize,
    pub truth: Hypothesis,
    pub quantity: &'static str,
    pub estimate: f64,
    pub exact: f64,
    pub z: Option<f64>,
}

fn z_score(estimate: f64, exact: f64, trials: u64) -> Option<f64> {
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    if se > 0.0 {
        Some((estimate - exact) / se)
    } else if estimate == exact {
        Some(0.0)
    } else {
        None
    }
}

/// Exact report for `procedure`, or `None` when enumeration is over budget.
fn exact_if_enumerable(
    pair: &HypothesisPair,
    procedure: &Procedure,
    out: &mut Outputs,
) -> Result<Option<ErrorReport>, CliError> {
    match evaluate(pair, procedure) {
        Ok(r) => Ok(Some(r)),
        Err(Error::GuardExceeded { what, count, limit }) => {
            out.warn(format!(
                "n = {}: no exact comparison, {what} needs {count:e} > {limit:e} states",
                procedure.base_n()
            ));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn compare(report: &SimReport, exact: &ErrorReport) -> Vec<Comparison> {
    let probs = exact.under(report.truth);
    let mut rows = vec![Comparison {
        n: report.n,
        truth: report.truth,
        quantity: "err",
        estimate: report.err_estimate,
        exact: exact.error(report.truth).prob(),
        z: None,
    }];
    if report.procedure == "two_phase" || report.procedure == "sprt" {
        rows.push(Comparison {
            n: report.n,
            truth: report.truth,
            quantity: "continue",
            estimate: report.continue_estimate,
            exact: probs.continued.prob(),
            z: None,
        });
    }
    if report.procedure == "rejection" {
        rows.push(Comparison {
            n: report.n,
            truth: report.truth,
            quantity: "reject",
            estimate: report.decisions.reject_both as f64 / report.trials as f64,
            exact: probs.reject_both.prob(),
            z: None,
        });
    }
    for r in &mut rows {
        r.z = z_score(r.estimate, r.exact, report.trials);
    }
    rows
}

fn exact_pair(report: &SimReport, exact: &Option<ErrorReport>) -> Option<(f64, f64)> {
    exact
        .as_ref()
        .map(|e| (e.error(report.truth).prob(), e.under(report.truth).continued.prob()))
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema_version: u32,
    procedure: &'a Procedure,
    reports: &'a [SimReport],
    comparison: Vec<Comparison>,
    warnings: Vec<String>,
}

pub fn simulate_cmd(v: &Validated) -> Result<Outputs, CliError> {
    let procedure = v.procedure(v.n()?)?;
    let cfg = sim_config(v);
    let mut out = Outputs::default();
    let exact = exact_if_enumerable(&v.pair, &procedure, &mut out)?;
    let reports = v
        .truth
        .hypotheses()
        .iter()
        .map(|&h| simulate(&v.pair, h, &procedure, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = exact
        .as_ref()
        .map(|e| reports.iter().flat_map(|r| compare(r, e)).collect())
        .unwrap_or_default();
    let rows: Vec<_> = reports.iter().map(|r| (r, exact_pair(r, &exact))).collect();
    out.file("simulate.csv", sim_csv(&rows)?);
    let bytes = json_bytes(&SimulateSummary {
        schema_version: SCHEMA_VERSION,
        procedure: &procedure,
        reports: &reports,
        comparison,
        warnings: out.warnings.clone(),
    })?;
    out.stdout = String::from_utf8_lossy(&bytes).into_owned();
    out.file("simulate.json", bytes);
    Ok(out)
}

#[derive(Serialize)]
struct FitEntry {
    truth: Hypothesis,
    /// Monte Carlo fit, absent when fewer than two `n` observed an error.
    mc: Option<ScaledFit>,
    mc_skipped: Vec<usize>,
    mc_continue: Option<ScaledFit>,
    exact: Option<ScaledFit>,
    exact_continue: Option<ScaledFit>,
}

#[derive(Serialize)]
struct ScaledFit {
    slope: f64,
    intercept: f64,
    r2: f64,
}

impl ScaledFit {
    fn new(f: &ExponentFit, s: f64) -> Self {
        Self {
            slope: f.slope * s,
            intercept: f.intercept,
            r2: f.r2,
        }
    }
}

#[derive(Serialize)]
struct SweepSummary {
    schema_version: u32,
    units: Units,
    procedure: ProcedureKind,
    n_values: Vec<usize>,
    trials: u64,
    master_seed: u64,
    fits: Vec<FitEntry>,
    warnings: Vec<String>,
}

/// Fit over `(n, ln p)` points with `p > 0`.
fn fit_nonzero(points: impl Iterator<Item = (usize, f64)>) -> Result<Option<ExponentFit>, CliError> {
    let pts: Vec<_> = points
        .filter(|&(_, lp)| lp > f64::NEG_INFINITY)
        .map(|(n, lp)| (n as f64, lp))
        .collect();
    if pts.len() < 2 {
        return Ok(None);
    }
    Ok(Some(exponent_fit_ln(&pts)?))
}

pub fn sweep_cmd(v: &Validated) -> Result<Outputs, CliError> {
    let n_values = v.n_values()?;
    let family = |n| v.procedure(n).map_err(cli_to_lib);
    // Fail on configuration problems before simulating anything.
    for &n in &n_values {
        v.procedure(n)?;
    }
    let cfg = sim_config(v);
    let s = v.units.scale();
    let mut out = Outputs::default();
    let mut exact = Vec::new();
    for &n in &n_values {
        exact.push(exact_if_enumerable(&v.pair, &v.procedure(n)?, &mut out)?);
    }
    let mut csv_rows = Vec::new();
    let mut fits = Vec::new();
    for &h in v.truth.hypotheses() {
        let rows = sweep_rows(&v.pair, h, family, &n_values, &cfg)?;
        let exact_fit = fit_nonzero(
            n_values
                .iter()
                .zip(&exact)
                .filter_map(|(&n, e)| e.as_ref().map(|e| (n, e.error(h).ln()))),
        )?;
        let exact_continue = fit_nonzero(
            n_values
                .iter()
                .zip(&exact)
                .filter_map(|(&n, e)| e.as_ref().map(|e| (n, e.under(h).continued.ln()))),
        )?;
        for (row, e) in rows.iter().zip(&exact) {
            csv_rows.push((row.report.clone(), exact_pair(&row.report, e)));
        }
        let (mc, mc_skipped, mc_continue) = match fit_sweep(rows) {
            Ok(SweepReport {
                fit,
                skipped,
                continue_fit,
                ..
            }) => (Some(fit), skipped, continue_fit),
            Err(Error::Unresolvable(msg)) if exact_fit.is_some() => {
                out.warn(format!("{}: Monte Carlo exponent unresolvable ({msg}); exact fit reported", h.tag()));
                (None, Vec::new(), None)
            }
            Err(e) => return Err(e.into()),
        };
        fits.push(FitEntry {
            truth: h,
            mc: mc.as_ref().map(|f| ScaledFit::new(f, s)),
            mc_skipped,
            mc_continue: mc_continue.as_ref().map(|f| ScaledFit::new(f, s)),
            exact: exact_fit.as_ref().map(|f| ScaledFit::new(f, s)),
            exact_continue: exact_continue.as_ref().map(|f| ScaledFit::new(f, s)),
        });
    }
    let refs: Vec<_> = csv_rows.iter().map(|(r, e)| (r, *e)).collect();
    out.file("sweep.csv", sim_csv(&refs)?);
    let bytes = json_bytes(&SweepSummary {
        schema_version: SCHEMA_VERSION,
        units: v.units,
        procedure: v.procedure_kind(),
        n_values,
        trials: cfg.trials,
        master_seed: cfg.seed.master_seed,
        fits,
        warnings: out.warnings.clone(),
    })?;
    out.stdout = String::from_utf8_lossy(&bytes).into_owned();
    out.file("sweep.json", bytes);
    Ok(out)
}

fn cli_to_lib(e: CliError) -> Error {
    match e {
        CliError::Lib(e) => e,
        other => Error::InvalidParameter {
            name: "config",
            reason: other.to_string(),
        },
    }
}

#[derive(Serialize)]
struct FiguresSummary {
    schema_version: u32,
    units: Units,
    #[serde(flatten)]
    geometry: Geometry,
    fig2_gammas: Vec<f64>,
    fig3_gammas: Vec<f64>,
    fig3_k: [usize; 2],
}

/// Data behind the three figures: the fixed-length curve with the
/// sequential corner, the `R_γ` family, and two-phase regions with `k = 2`
/// next to those with `k = k_min`.
pub fn figures(v: &Validated) -> Result<Outputs, CliError> {
    let pair = &v.pair;
    let (geometry, cp) = geometry(pair, v.units)?;
    let k_min = geometry.k_min;
    let mut out = Outputs::default();

    let fd = fd_boundary(pair, v.grid)?;
    let corner = RegionBoundary::box_corner(seq_corner(pair)?);
    out.file(
        "fig1.csv",
        boundary_csv(
            v.units,
            &[
                LabeledBoundary {
                    boundary: &fd,
                    gamma: None,
                    k: None,
                },
                LabeledBoundary {
                    boundary: &corner,
                    gamma: None,
                    k: None,
                },
            ],
        )?,
    );

    let fig2_gammas = if v.gammas.is_empty() { FIG2_GAMMAS.to_vec() } else { v.gammas.clone() };
    let fig2 = fig2_gammas
        .iter()
        .map(|&g| gamma_region(pair, g, v.grid))
        .collect::<Result<Vec<_>, _>>()?;
    let labeled: Vec<_> = fig2
        .iter()
        .zip(&fig2_gammas)
        .map(|(b, &g)| LabeledBoundary {
            boundary: b,
            gamma: Some(g),
            k: None,
        })
        .collect();
    out.file("fig2.csv", boundary_csv(v.units, &labeled)?);

    let fig3_gammas: Vec<f64> = FIG3_GAMMAS.iter().copied().filter(|&g| within_d_star(g, &cp)).collect();
    let mut fig3 = Vec::new();
    for &g in &fig3_gammas {
        for k in [FIG3_K, k_min] {
            fig3.push((two_phase_region(pair, g, k, v.grid)?, g, k));
        }
    }
    let labeled: Vec<_> = fig3
        .iter()
        .map(|(b, g, k)| LabeledBoundary {
            boundary: b,
            gamma: Some(*g),
            k: Some(*k),
        })
        .collect();
    out.file("fig3.csv", boundary_csv(v.units, &labeled)?);

    let bytes = json_bytes(&FiguresSummary {
        schema_version: SCHEMA_VERSION,
        units: v.units,
        geometry,
        fig2_gammas,
        fig3_gammas,
        fig3_k: [FIG3_K, k_min],
    })?;
    out.stdout = String::from_utf8_lossy(&bytes).into_owned();
    out.file("figures.json", bytes);
    Ok(out)
}

/// Pair used by `figures` when none is configured.
pub fn figures_default_pair() -> HypothesisPair {
    example_pair()
}
