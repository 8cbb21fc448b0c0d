//! The bootstrapping iteration as a certified-bound algorithm, the low
//! Schmidt rank approximation built on top of it, the mutual-information
//! corollary check, and the command-line plumbing around them.

mod bootstrap;
pub mod cli;
pub mod config;
mod lowrank;
pub mod sweep;
mod witness;

pub use bootstrap::{
    bootstrap_run, bootstrap_step, initial_state, BootstrapOutcome, BootstrapRecord, BootstrapState, TraceBoundRecord,
    ContradictionWitness, StepOutput,
};
pub use lowrank::{corollary2_check, low_rank_approx, AuditEntry, Corollary2Result, LowRankRecord, LowRankResult};
pub use witness::{read_bundle, write_bundle, Witness, WitnessMatrix, WitnessRecord, WITNESS_DENSE_LIMIT};

use serde::Serialize;

use crate::constructions::{DEFAULT_RESOLUTION, CERT_TOL};
use crate::entropy::SeesawOptions;
use crate::error::{Error, Result};
use crate::linalg::BipartiteCut;

/// How the AGSP degree is chosen at each step.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DegreePolicy {
    Fixed { degree: usize },
    /// Smallest degree in 1, 2, 4, … meeting D²Δ ≤ ceiling; `None` uses the
    /// runtime ceiling 1/(4g).
    Ceiling { ceiling: Option<f64>, max_degree: usize },
}

impl Default for DegreePolicy {
    fn default() -> Self {
        DegreePolicy::Ceiling { ceiling: None, max_degree: 256 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    /// Relative slack on every PSD witness.
    pub cert: f64,
    /// Additive slack on the smoothing distance.
    pub distance: f64,
    /// Entrywise tolerance of the Tr_B identity for K_AB.
    pub partial_trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cert: CERT_TOL, distance: 1e-6, partial_trace: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct BootstrapConfig {
    pub epsilon: f64,
    pub cut: BipartiteCut,
    pub degree_policy: DegreePolicy,
    /// Starting resolution of B; doubled while the embedding misses its distance budget.
    pub resolution: usize,
    pub max_d_b: usize,
    pub max_iterations: usize,
    pub tolerances: Tolerances,
    pub seesaw: SeesawOptions,
}

impl BootstrapConfig {
    pub fn new(epsilon: f64, cut: BipartiteCut) -> Result<Self> {
        let mut cfg = Self {
            epsilon,
            cut,
            degree_policy: DegreePolicy::default(),
            resolution: DEFAULT_RESOLUTION,
            max_d_b: 1 << 26,
            max_iterations: 0,
            tolerances: Tolerances::default(),
            seesaw: SeesawOptions::default(),
        };
        cfg.max_iterations = cfg.horizon();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of sites on the left of the cut, at least 1.
    pub fn left_sites(&self) -> usize {
        self.cut.left_len().max(1)
    }

    /// ⌈2|L|⌉ measured in qubits, ⌈2·log₂ d_L⌉, whichever is larger.
    pub fn horizon(&self) -> usize {
        let bits = (2.0 * (self.cut.d_l as f64).log2()).ceil() as usize;
        (2 * self.left_sites()).max(bits).max(1)
    }

    /// δ = (ε/|L|)²/(4·22²): the rescaled step budget, so that 2|L| steps of
    /// 22√δ each add up to ε.
    pub fn delta(&self) -> f64 {
        let x = self.epsilon / self.left_sites() as f64;
        x * x / (4.0 * 22.0 * 22.0)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.epsilon = epsilon;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.max_iterations < self.horizon() {
            return Err(Error::Config(format!(
                "max_iterations = {} is below the halting horizon {}",
                self.max_iterations,
                self.horizon()
            )));
        }
        if self.resolution == 0 || self.resolution > self.max_d_b {
            return Err(Error::Config("resolution must lie in 1..=max_d_b".into()));
        }
        if let DegreePolicy::Fixed { degree: 0 } = self.degree_policy {
            return Err(Error::Config("a fixed AGSP degree must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_and_delta() {
        let cut = BipartiteCut::chain(6, 2, 3).unwrap();
        let cfg = BootstrapConfig::new(0.2, cut).unwrap();
        assert_eq!(cfg.horizon(), 6);
        assert_eq!(cfg.max_iterations, 6);
        let want = (0.2f64 / 3.0).powi(2) / 1936.0;
        assert!((cfg.delta() - want).abs() < 1e-20);
        // 2|L| steps of 22·√δ exhaust ε exactly
        assert!((6.0 * 22.0 * cfg.delta().sqrt() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_horizon() {
        let cut = BipartiteCut::chain(4, 2, 2).unwrap();
        let mut cfg = BootstrapConfig::new(0.2, cut).unwrap();
        cfg.max_iterations = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(cfg.with_epsilon(1.0).is_err());
    }
}
