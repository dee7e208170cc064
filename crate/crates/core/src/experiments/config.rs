//! JSON documents for the experiments and the command-line tool.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LawConfig, ModelConfig};
use crate::test_functions::{Bump, Constant, ExpDecay, TestFunction};

/// Parses a document, mapping syntax and schema problems to configuration errors.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn default_replicas() -> usize {
    10_000
}

fn default_bootstrap() -> usize {
    200
}

fn default_projections() -> usize {
    64
}

/// Law of the initial state of the limit process. The chain starts from the
/// same draw rounded down to the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Point { x: Vec<f64> },
    /// Independent coordinates, each `Gamma(shape, rate)`.
    Gamma { shape: f64, rate: f64 },
    /// Independent coordinates, each uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
}

impl Default for InitialLaw {
    fn default() -> Self {
        InitialLaw::Point { x: vec![0.0] }
    }
}

impl InitialLaw {
    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            InitialLaw::Point { x } => {
                if x.len() != dim {
                    return Err(Error::Config(format!(
                        "initial point has {} coordinates, model has {dim}",
                        x.len()
                    )));
                }
                if x.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Config("initial point must lie in the orthant".into()));
                }
            }
            InitialLaw::Gamma { shape, rate } => {
                if !(*shape > 0.0) || !(*rate > 0.0) {
                    return Err(Error::Config("initial gamma law needs shape, rate > 0".into()));
                }
            }
            InitialLaw::Uniform { low, high } => {
                if !(*low >= 0.0) || !(high >= low) || !high.is_finite() {
                    return Err(Error::Config("initial uniform law needs 0 <= low <= high".into()));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        match self {
            InitialLaw::Point { x } => x.clone(),
            InitialLaw::Gamma { shape, rate } => {
                let g = Gamma::new(*shape, 1.0 / rate).expect("checked gamma parameters");
                (0..dim).map(|_| g.sample(rng)).collect()
            }
            InitialLaw::Uniform { low, high } => (0..dim).map(|_| low + (high - low) * rng.random::<f64>()).collect(),
        }
    }
}

/// Lattice point `⌊x V⌋`. A relative slack of `1e-12` keeps products such
/// as `0.29 · 100` from landing one site low through rounding.
pub fn round_down(x: &[f64], scale: f64) -> Vec<i64> {
    x.iter().map(|v| (v * scale * (1.0 + 1e-12)).floor() as i64).collect()
}

/// How the chain and limit ensembles are paired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Replica `k` of every ensemble is driven by the same channel clocks.
    #[default]
    Common,
    /// Independent noise for every ensemble.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConvergenceConfig {
    pub model: ModelConfig,
    pub scales: Vec<f64>,
    pub times: Vec<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub initial: InitialLaw,
    #[serde(default)]
    pub coupling: CouplingMode,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_projections")]
    pub projections: usize,
}

impl TrajectoryConvergenceConfig {
    pub fn check(&self) -> Result<()> {
        self.model.check()?;
        self.initial.check(self.model.dim()?)?;
        if self.scales.is_empty() || self.scales.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("scales must be a nonempty list of positive values".into()));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Config("times must be a nonempty list of positive values".into()));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("times must be strictly increasing".into()));
        }
        if self.replicas < 2 {
            return Err(Error::Config("need at least two replicas".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConvergenceConfig {
    pub model: ModelConfig,
    pub scales: Vec<f64>,
}

fn default_k() -> f64 {
    5.0
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsConfig {
    pub law: LawConfig,
    pub scales: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "one")]
    pub effective_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionConfig {
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "unit_height")]
        height: f64,
    },
    ExpDecay {
        rate: f64,
        #[serde(default)]
        index: usize,
    },
    Constant {
        value: f64,
    },
}

fn unit_height() -> f64 {
    1.0
}

impl TestFunctionConfig {
    pub fn build(&self, dim: usize) -> Result<Box<dyn TestFunction>> {
        Ok(match self {
            TestFunctionConfig::Bump { center, radius, height } => {
                if center.len() != dim || !(*radius > 0.0) {
                    return Err(Error::Config("bump needs a center of the model dimension and radius > 0".into()));
                }
                Box::new(Bump::new(center.clone(), *radius, *height))
            }
            TestFunctionConfig::ExpDecay { rate, index } => {
                if *index >= dim {
                    return Err(Error::Config(format!("coordinate {index} out of range")));
                }
                Box::new(ExpDecay { rate: *rate, index: *index })
            }
            TestFunctionConfig::Constant { value } => Box::new(Constant(*value)),
        })
    }
}

/// Which simulator a Dynkin check runs on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorChoice {
    Gddmc,
    Pdmp,
    #[default]
    Both,
}

fn default_grid() -> usize {
    100
}

fn default_nodes() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynkinConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub simulator: SimulatorChoice,
    pub x0: Vec<f64>,
    pub t: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub test_functions: Vec<TestFunctionConfig>,
    /// Minimum number of time points in the generator integral.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Gauss–Legendre nodes for the limit generator's jump integral.
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

fn default_horizon() -> f64 {
    4.0
}

fn default_step() -> f64 {
    0.1
}

fn default_level() -> f64 {
    0.95
}

fn default_boot_big() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicityConfig {
    pub model: ModelConfig,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_boot_big")]
    pub bootstrap: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Dissipativity constant of the drift; derived for diagonal linear drifts.
    #[serde(default)]
    pub r: Option<f64>,
}

impl ErgodicityConfig {
    /// `0, step, 2 step, ..., horizon`.
    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::Config("horizon and step must be > 0".into()));
        }
        let n = (self.horizon / self.step).round() as usize;
        Ok((0..=n).map(|k| k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelConfig,
    pub x0: Vec<f64>,
    pub horizon: f64,
    #[serde(default)]
    pub max_events: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    pub model: ModelConfig,
    /// Lattice truncation; chosen automatically when absent.
    #[serde(default)]
    pub n_max: Option<usize>,
}
