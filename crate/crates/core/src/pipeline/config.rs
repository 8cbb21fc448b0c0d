//! The declarative run configuration.
//!
//! ```toml
//! [model]
//! kind = ["classical_ising", "projector_chain"]   # or a single string
//! n = [6, 8]
//! h = 2.0              # transverse field, transverse_field_ising only
//! anisotropy = 1.0     # heisenberg_xxz only
//!
//! [cut]
//! left = [3]           # sites on the left; omit to use `ratio`
//! ratio = 0.5          # left = round(ratio·n), the default
//!
//! [bootstrap]
//! epsilon = [0.2]
//! resolution = 65536
//! max_d_b = 67108864
//! max_iterations = 12  # defaults to the halting horizon
//! seed = 0
//! restarts = 8
//! lowrank = false      # also run the low-rank approximation per point
//!
//! [agsp]
//! policy = "ceiling"   # or "fixed"
//! degree = 8           # fixed policy only
//! ceiling = 0.25       # ceiling policy; omit for the runtime 1/(4g)
//! max_degree = 256
//!
//! [output]
//! dir = "arealaw-out"
//! threads = 1
//! ```
//!
//! `AREALAW_OUTPUT_DIR` and `AREALAW_THREADS` override the output section.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BootstrapConfig, DegreePolicy};
use crate::entropy::SeesawOptions;
use crate::error::{Error, Result};
use crate::linalg::BipartiteCut;
use crate::models::{ChainModel, ModelKind};

pub const ENV_OUTPUT_DIR: &str = "AREALAW_OUTPUT_DIR";
pub const ENV_THREADS: &str = "AREALAW_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: OneOrMany<String>,
    pub n: OneOrMany<usize>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_anisotropy")]
    pub anisotropy: f64,
}

fn default_h() -> f64 {
    2.0
}

fn default_anisotropy() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutSection {
    pub left: Option<OneOrMany<usize>>,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: OneOrMany<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_max_d_b")]
    pub max_d_b: usize,
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub lowrank: bool,
}

fn default_epsilon() -> OneOrMany<f64> {
    OneOrMany::One(0.2)
}

fn default_resolution() -> usize {
    crate::constructions::DEFAULT_RESOLUTION
}

fn default_max_d_b() -> usize {
    1 << 26
}

fn default_restarts() -> usize {
    SeesawOptions::default().restarts
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            resolution: default_resolution(),
            max_d_b: default_max_d_b(),
            max_iterations: None,
            seed: 0,
            restarts: default_restarts(),
            lowrank: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Ceiling,
    Fixed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgspSection {
    #[serde(default = "default_policy")]
    pub policy: PolicyName,
    pub degree: Option<usize>,
    pub ceiling: Option<f64>,
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
}

fn default_policy() -> PolicyName {
    PolicyName::Ceiling
}

fn default_max_degree() -> usize {
    256
}

impl Default for AgspSection {
    fn default() -> Self {
        Self { policy: PolicyName::Ceiling, degree: None, ceiling: None, max_degree: default_max_degree() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    pub threads: Option<usize>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("arealaw-out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), threads: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub cut: CutSection,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub agsp: AgspSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One (model, n, |L|, ε) combination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub model: String,
    pub n: usize,
    pub left: usize,
    pub epsilon: f64,
    pub h: f64,
    pub anisotropy: f64,
}

impl SweepPoint {
    pub fn chain(&self) -> Result<ChainModel> {
        ChainModel::new(model_kind(&self.model, self.h, self.anisotropy)?, self.n)
    }
}

pub fn model_kind(name: &str, h: f64, anisotropy: f64) -> Result<ModelKind> {
    Ok(match name {
        "transverse_field_ising" | "tfim" => ModelKind::TransverseFieldIsing { h },
        "classical_ising" => ModelKind::ClassicalIsing,
        "projector_chain" => ModelKind::ProjectorChain,
        "heisenberg_xxz" | "xxz" => ModelKind::HeisenbergXxz { anisotropy },
        other => {
            return Err(Error::Config(format!(
                "model.kind: unknown model '{other}' (expected transverse_field_ising, classical_ising, \
                 projector_chain or heisenberg_xxz)"
            )))
        }
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// A single-point configuration with defaults elsewhere.
    pub fn single(model: &str, n: usize, left: Option<usize>, epsilon: f64) -> Self {
        RunConfig {
            model: ModelSection {
                kind: OneOrMany::One(model.to_string()),
                n: OneOrMany::One(n),
                h: default_h(),
                anisotropy: default_anisotropy(),
            },
            cut: CutSection { left: left.map(OneOrMany::One), ratio: None },
            bootstrap: BootstrapSection { epsilon: OneOrMany::One(epsilon), ..Default::default() },
            agsp: AgspSection::default(),
            output: OutputSection::default(),
        }
    }

    fn check(&self) -> Result<()> {
        for k in self.model.kind.to_vec() {
            model_kind(&k, self.model.h, self.model.anisotropy)?;
        }
        if self.model.n.to_vec().iter().any(|&n| n < 2) {
            return Err(Error::Config("model.n: chains need at least two sites".into()));
        }
        if let Some(r) = self.cut.ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("cut.ratio: must lie in (0, 1), got {r}")));
            }
        }
        for e in self.bootstrap.epsilon.to_vec() {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Config(format!("bootstrap.epsilon: must lie in (0, 1), got {e}")));
            }
        }
        if self.agsp.policy == PolicyName::Fixed && self.agsp.degree.unwrap_or(0) == 0 {
            return Err(Error::Config("agsp.degree: the fixed policy needs a positive degree".into()));
        }
        Ok(())
    }

    /// Applies `AREALAW_OUTPUT_DIR` and `AREALAW_THREADS`.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            if !dir.is_empty() {
                self.output.dir = PathBuf::from(dir);
            }
        }
        if let Ok(t) = std::env::var(ENV_THREADS) {
            let n: usize =
                t.parse().map_err(|_| Error::Config(format!("{ENV_THREADS}: expected a count, got '{t}'")))?;
            self.output.threads = Some(n);
        }
        Ok(())
    }

    fn lefts(&self, n: usize) -> Vec<usize> {
        match (&self.cut.left, self.cut.ratio) {
            (Some(l), _) => l.to_vec(),
            (None, Some(r)) => vec![((n as f64 * r).round() as usize).clamp(1, n - 1)],
            (None, None) => vec![n / 2],
        }
    }

    /// Cartesian product models × n × |L| × ε in a fixed order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for model in self.model.kind.to_vec() {
            for n in self.model.n.to_vec() {
                for left in self.lefts(n) {
                    for epsilon in self.bootstrap.epsilon.to_vec() {
                        out.push(SweepPoint {
                            model: model.clone(),
                            n,
                            left,
                            epsilon,
                            h: self.model.h,
                            anisotropy: self.model.anisotropy,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn degree_policy(&self) -> DegreePolicy {
        match self.agsp.policy {
            PolicyName::Fixed => DegreePolicy::Fixed { degree: self.agsp.degree.unwrap_or(1) },
            PolicyName::Ceiling => DegreePolicy::Ceiling { ceiling: self.agsp.ceiling, max_degree: self.agsp.max_degree },
        }
    }

    pub fn bootstrap_config(&self, point: &SweepPoint) -> Result<BootstrapConfig> {
        let cut = BipartiteCut::chain(point.n, point.chain()?.d, point.left)?;
        let mut cfg = BootstrapConfig::new(point.epsilon, cut)?;
        cfg.degree_policy = self.degree_policy();
        cfg.resolution = self.bootstrap.resolution;
        cfg.max_d_b = self.bootstrap.max_d_b;
        if let Some(m) = self.bootstrap.max_iterations {
            cfg.max_iterations = m;
        }
        cfg.seesaw.seed = self.bootstrap.seed;
        cfg.seesaw.restarts = self.bootstrap.restarts;
        cfg.validate()?;
        Ok(cfg)
    }
}
