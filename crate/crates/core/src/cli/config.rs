//! Experiment configuration: a JSON file, command-line flags, or both (flags
//! win field by field).
//!
//! ```json
//! {
//!   "p1": [0.1, 0.9],
//!   "p2": [0.8, 0.2],
//!   "gamma": [0.05, 0.1, 0.2, 0.3],
//!   "k": 2,
//!   "n": 20,
//!   "trials": 1000000,
//!   "master_seed": 42,
//!   "units": "nats",
//!   "out": "results"
//! }
//! ```
//!
//! Distributions are JSON arrays of nonnegative weights (renormalized);
//! `gamma` may be a number or a list. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::exponent::{kstar, two_phase_design, Phase2Threshold, TwoPhaseDesign, DEFAULT_GRID, DEFAULT_TOL};
use crate::pmf::{Hypothesis, HypothesisPair, Pmf};
use crate::testbench::{Procedure, SprtConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Multiplier applied to every nats-valued output.
    pub fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LOG2_E,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    Fixed,
    Rejection,
    TwoPhase,
    Sprt,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TruthSel {
    H1,
    H2,
    #[default]
    Both,
}

impl TruthSel {
    pub fn hypotheses(self) -> &'static [Hypothesis] {
        match self {
            TruthSel::H1 => &[Hypothesis::H1],
            TruthSel::H2 => &[Hypothesis::H2],
            TruthSel::Both => &Hypothesis::BOTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p1: Option<Vec<f64>>,
    pub p2: Option<Vec<f64>>,
    pub gamma: Option<OneOrMany>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub n_values: Option<Vec<usize>>,
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub lambda_grid: Option<usize>,
    pub out: Option<PathBuf>,
    pub units: Option<Units>,
    pub procedure: Option<ProcedureKind>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub max_samples: Option<usize>,
    /// Phase-II tilt; the Chernoff tilt (threshold 0) when absent.
    pub phase2_lambda: Option<f64>,
    pub truth: Option<TruthSel>,
    pub workers: Option<usize>,
    pub moment_orders: Option<Vec<u32>>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Distribution under H1, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p1: Option<Vec<f64>>,
    /// Distribution under H2, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p2: Option<Vec<f64>>,
    /// One or more γ values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Option<Vec<f64>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long = "seed")]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub lambda_grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub units: Option<Units>,
    #[arg(long, value_enum)]
    pub procedure: Option<ProcedureKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub max_samples: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub phase2_lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub truth: Option<TruthSel>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub moment_orders: Option<Vec<u32>>,
}

impl ConfigArgs {
    /// Loads the config file (if any) and overlays the flags.
    pub fn load(&self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let f = self.clone();
        Ok(ExperimentConfig {
            p1: f.p1.or(base.p1),
            p2: f.p2.or(base.p2),
            gamma: f.gamma.map(OneOrMany::Many).or(base.gamma),
            k: f.k.or(base.k),
            n: f.n.or(base.n),
            n_values: f.n_values.or(base.n_values),
            trials: f.trials.or(base.trials),
            master_seed: f.master_seed.or(base.master_seed),
            lambda_grid: f.lambda_grid.or(base.lambda_grid),
            out: f.out.or(base.out),
            units: f.units.or(base.units),
            procedure: f.procedure.or(base.procedure),
            alpha: f.alpha.or(base.alpha),
            beta: f.beta.or(base.beta),
            delta: f.delta.or(base.delta),
            max_samples: f.max_samples.or(base.max_samples),
            phase2_lambda: f.phase2_lambda.or(base.phase2_lambda),
            truth: f.truth.or(base.truth),
            workers: f.workers.or(base.workers),
            moment_orders: f.moment_orders.or(base.moment_orders),
        })
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn config_err(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {reason}"))
}

fn require<T: Clone>(value: &Option<T>, field: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| config_err(field, "required"))
}

/// Example pair used when no distributions are configured for `figures`.
pub fn example_pair() -> HypothesisPair {
    HypothesisPair::bernoulli(0.9, 0.2).expect("valid example pair")
}

/// A validated configuration. Every field check happens in
/// [`Validated::new`], before any computation or file output.
#[derive(Debug, Clone)]
pub struct Validated {
    pub raw: ExperimentConfig,
    pub pair: HypothesisPair,
    pub gammas: Vec<f64>,
    pub units: Units,
    pub grid: usize,
    pub truth: TruthSel,
}

impl Validated {
    pub fn new(raw: ExperimentConfig, default_pair: Option<HypothesisPair>) -> Result<Self, CliError> {
        let pair = match (&raw.p1, &raw.p2) {
            (Some(p1), Some(p2)) => {
                let p1 = Pmf::new(p1.clone()).map_err(|e| config_err("p1", e))?;
                let p2 = Pmf::new(p2.clone()).map_err(|e| config_err("p2", e))?;
                HypothesisPair::new(p1, p2)?
            }
            (None, None) => default_pair.ok_or_else(|| config_err("p1", "required (with `p2`)"))?,
            (None, Some(_)) => return Err(config_err("p1", "required when `p2` is given")),
            (Some(_), None) => return Err(config_err("p2", "required when `p1` is given")),
        };
        let gammas = raw.gamma.as_ref().map(OneOrMany::to_vec).unwrap_or_default();
        for &g in &gammas {
            if !(g > 0.0) || !g.is_finite() {
                return Err(config_err("gamma", format!("must be positive and finite, got {g}")));
            }
        }
        if raw.k == Some(0) {
            return Err(config_err("k", "must be a positive integer"));
        }
        if raw.n == Some(0) {
            return Err(config_err("n", "must be a positive integer"));
        }
        if let Some(ns) = &raw.n_values {
            if ns.len() < 3 {
                return Err(config_err("n_values", "need at least 3 values"));
            }
            if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
                return Err(config_err("n_values", "must be positive and strictly increasing"));
            }
        }
        if raw.trials == Some(0) {
            return Err(config_err("trials", "must be a positive integer"));
        }
        if raw.workers == Some(0) {
            return Err(config_err("workers", "must be a positive integer"));
        }
        if raw.max_samples == Some(0) {
            return Err(config_err("max_samples", "must be a positive integer"));
        }
        let grid = raw.lambda_grid.unwrap_or(DEFAULT_GRID);
        if grid < 2 {
            return Err(config_err("lambda_grid", "need at least 2 points"));
        }
        if let Some(orders) = &raw.moment_orders {
            if orders.is_empty() || orders.contains(&0) {
                return Err(config_err("moment_orders", "need positive orders"));
            }
        }
        for (name, v) in [("alpha", raw.alpha), ("beta", raw.beta), ("delta", raw.delta)] {
            if v.is_some_and(|x| x.is_nan()) {
                return Err(config_err(name, "must be a number"));
            }
        }
        if let Some(l) = raw.phase2_lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(config_err("phase2_lambda", format!("must lie in [0, 1], got {l}")));
            }
        }
        if let (Some(a), Some(b)) = (raw.alpha, raw.beta) {
            if raw.procedure == Some(ProcedureKind::Rejection) && a < b {
                return Err(config_err("beta", format!("must not exceed `alpha` ({a}), got {b}")));
            }
        }
        if let Some(d) = raw.delta {
            let lim = pair.kl12().min(pair.kl21());
            if !(d > 0.0) || d >= lim {
                return Err(config_err("delta", format!("must lie in (0, {lim}), got {d}")));
            }
        }
        Ok(Self {
            units: raw.units.unwrap_or_default(),
            truth: raw.truth.unwrap_or_default(),
            raw,
            pair,
            gammas,
            grid,
        })
    }

    pub fn out_dir(&self) -> Option<&Path> {
        self.raw.out.as_deref()
    }

    pub fn single_gamma(&self) -> Result<f64, CliError> {
        match self.gammas.as_slice() {
            [g] => Ok(*g),
            [] => Err(config_err("gamma", "required")),
            _ => Err(config_err("gamma", "this command takes a single value")),
        }
    }

    pub fn n(&self) -> Result<usize, CliError> {
        require(&self.raw.n, "n")
    }

    pub fn n_values(&self) -> Result<Vec<usize>, CliError> {
        require(&self.raw.n_values, "n_values")
    }

    pub fn trials(&self) -> u64 {
        self.raw.trials.unwrap_or(100_000)
    }

    pub fn master_seed(&self) -> u64 {
        self.raw.master_seed.unwrap_or(0)
    }

    /// `k` as configured, else the smallest `k ≥ k*`.
    pub fn k(&self) -> Result<usize, CliError> {
        match self.raw.k {
            Some(k) => Ok(k),
            None => Ok(kstar(&self.pair)?.k_min),
        }
    }

    pub fn phase2(&self) -> Phase2Threshold {
        self.raw.phase2_lambda.map_or(Phase2Threshold::Chernoff, Phase2Threshold::Lambda)
    }

    pub fn design(&self, gamma: f64) -> Result<TwoPhaseDesign, CliError> {
        Ok(two_phase_design(&self.pair, gamma, self.k()?, self.phase2(), DEFAULT_TOL)?)
    }

    /// Two-phase when `gamma` is set, fixed-length otherwise.
    pub fn procedure_kind(&self) -> ProcedureKind {
        self.raw.procedure.unwrap_or(if self.gammas.is_empty() {
            ProcedureKind::Fixed
        } else {
            ProcedureKind::TwoPhase
        })
    }

    /// The configured procedure at sample size `n`.
    pub fn procedure(&self, n: usize) -> Result<Procedure, CliError> {
        Ok(match self.procedure_kind() {
            ProcedureKind::Fixed => Procedure::Fixed {
                n,
                alpha: self.raw.alpha.unwrap_or(0.0),
            },
            ProcedureKind::Rejection => Procedure::Rejection {
                n,
                alpha: require(&self.raw.alpha, "alpha")?,
                beta: require(&self.raw.beta, "beta")?,
            },
            ProcedureKind::TwoPhase => Procedure::TwoPhase {
                n,
                design: self.design(self.single_gamma()?)?,
            },
            ProcedureKind::Sprt => Procedure::Sprt(
                SprtConfig {
                    n,
                    delta: require(&self.raw.delta, "delta")?,
                    max_samples: self.raw.max_samples.unwrap_or(100 * n),
                }
                .bounds(&self.pair)?,
            ),
        })
    }
}
