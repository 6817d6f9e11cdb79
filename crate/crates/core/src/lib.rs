//! Error exponents of binary hypothesis tests with fixed, sequential and
//! almost-fixed sample sizes.
//!
//! * [`pmf`]: finite distributions, KL divergence, tilted family, LLR.
//! * [`exponent`]: Chernoff point, region boundaries, two-phase thresholds.
//! * [`testbench`]: runnable decision procedures over a sample stream.
//! * [`exact`]: exact error probabilities by type-class enumeration.
//! * [`sim`]: reproducible parallel Monte Carlo.
//! * [`cli`]: the `hyptest` command-line surface.

mod bisect;
pub mod cli;
pub mod error;
pub mod exact;
pub mod exponent;
pub mod pmf;
pub mod sim;
pub mod testbench;

pub use error::{Error, Result};
pub use exponent::{
    chernoff, e_gamma, fd_boundary, gamma_region, kstar, region_envelope, seq_corner, two_phase_design,
    two_phase_region, ChernoffPoint, ExponentPair, GammaCorner, Phase2Threshold, RegionBoundary, TwoPhaseDesign,
};
pub use pmf::{kl, Hypothesis, HypothesisPair, Pmf};
pub use testbench::{Decision, Procedure, SprtConfig, TestOutcome};
