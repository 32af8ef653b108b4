//! Experiment configuration, read from a flat TOML document.
//!
//! ```toml
//! dataset = "data/wikipedia.csv"
//! bipartite = true
//! oracle = "reference"          # or "bridge:127.0.0.1:7777", "fixture:path.json"
//! explainers = ["cody", "greedy"]
//! policies = ["temporal", "event-impact"]
//! instances_per_bucket = 100
//! seed = 0
//! output_dir = "runs/wikipedia"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ctdg::TemporalGraph;
use crate::error::{Error, Result};
use crate::explainer::cody::{CodyConfig, DEFAULT_ALPHA, DEFAULT_IT_MAX};
use crate::explainer::greedy::{GreedyConfig, DEFAULT_L};
use crate::explainer::{ExplainerKind, DEFAULT_M_MAX};
use crate::harness::dataset::DatasetDescriptor;
use crate::harness::instances::DEFAULT_PER_BUCKET;
use crate::model::{BridgeClient, Oracle, ReferenceParams, ReferencePredictor, ScriptedOracle};
use crate::policies::PolicyKind;

/// Where predictions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleSpec {
    Reference,
    Bridge(String),
    Fixture(PathBuf),
}

impl FromStr for OracleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "reference" {
            return Ok(OracleSpec::Reference);
        }
        if let Some(addr) = s.strip_prefix("bridge:") {
            return Ok(OracleSpec::Bridge(addr.to_string()));
        }
        if let Some(path) = s.strip_prefix("fixture:") {
            return Ok(OracleSpec::Fixture(PathBuf::from(path)));
        }
        Err(Error::Config(format!(
            "unknown oracle {s:?} (expected reference, bridge:<addr> or fixture:<path>)"
        )))
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Reference => f.write_str("reference"),
            OracleSpec::Bridge(addr) => write!(f, "bridge:{addr}"),
            OracleSpec::Fixture(path) => write!(f, "fixture:{}", path.display()),
        }
    }
}

/// Reference-predictor coefficients; unset values take the defaults, and an
/// unset decay rate is fitted to the graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOverrides {
    pub ref_a: Option<f64>,
    pub ref_b: Option<f64>,
    pub ref_c: Option<f64>,
    pub ref_lambda: Option<f64>,
}

impl ReferenceOverrides {
    pub fn resolve(&self, graph: &TemporalGraph) -> ReferenceParams {
        let base = ReferenceParams::for_graph(graph);
        ReferenceParams {
            a: self.ref_a.unwrap_or(base.a),
            b: self.ref_b.unwrap_or(base.b),
            c: self.ref_c.unwrap_or(base.c),
            lambda: self.ref_lambda.unwrap_or(base.lambda),
        }
    }
}

impl OracleSpec {
    pub fn build(&self, graph: &TemporalGraph, overrides: &ReferenceOverrides) -> Result<Box<dyn Oracle>> {
        Ok(match self {
            OracleSpec::Reference => Box::new(ReferencePredictor::new(overrides.resolve(graph))?),
            OracleSpec::Bridge(addr) => Box::new(BridgeClient::connect(addr)?),
            OracleSpec::Fixture(path) => Box::new(ScriptedOracle::from_path(path)?),
        })
    }
}

fn default_oracle() -> String {
    "reference".into()
}
fn default_explainers() -> Vec<ExplainerKind> {
    vec![ExplainerKind::Cody]
}
fn default_policies() -> Vec<String> {
    vec!["temporal".into()]
}
fn default_per_bucket() -> usize {
    DEFAULT_PER_BUCKET
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}
fn default_m_max() -> usize {
    DEFAULT_M_MAX
}
fn default_it_max() -> u64 {
    DEFAULT_IT_MAX
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_l() -> usize {
    DEFAULT_L
}
fn default_true() -> bool {
    true
}
fn default_splits() -> [f64; 3] {
    [0.70, 0.15, 0.15]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Label used in reports; defaults to the file stem.
    #[serde(default)]
    pub dataset_name: Option<String>,
    #[serde(default)]
    pub bipartite: bool,
    #[serde(default)]
    pub expect_nodes: Option<usize>,
    #[serde(default)]
    pub expect_edges: Option<usize>,
    #[serde(default = "default_splits")]
    pub splits: [f64; 3],

    #[serde(default = "default_oracle")]
    pub oracle: String,
    /// Reference-predictor overrides.
    #[serde(default)]
    pub ref_a: Option<f64>,
    #[serde(default)]
    pub ref_b: Option<f64>,
    #[serde(default)]
    pub ref_c: Option<f64>,
    #[serde(default)]
    pub ref_lambda: Option<f64>,

    #[serde(default = "default_explainers")]
    pub explainers: Vec<ExplainerKind>,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_it_max")]
    pub it_max: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default)]
    pub best_first_stop: bool,
    #[serde(default = "default_true")]
    pub prune_duplicates: bool,

    #[serde(default = "default_per_bucket")]
    pub instances_per_bucket: usize,
    /// Seeds negative sampling and the random policy.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; unset uses every core.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Config with every optional key at its default.
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        toml::from_str::<Self>(&format!(
            "dataset = {}",
            toml::Value::String(dataset.into().display().to_string())
        ))
        .expect("defaults deserialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths are resolved against the config file's directory
        if let Some(dir) = path.parent() {
            if cfg.dataset.is_relative() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
            if let Ok(OracleSpec::Fixture(p)) = cfg.oracle_spec() {
                if p.is_relative() {
                    cfg.oracle = OracleSpec::Fixture(dir.join(p)).to_string();
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.descriptor().validate_splits()?;
        self.oracle_spec()?;
        self.policy_kinds()?;
        self.cody().validate()?;
        if self.l == 0 {
            return Err(Error::Config("l must be >= 1".into()));
        }
        if self.explainers.is_empty() || self.policies.is_empty() {
            return Err(Error::Config("explainers and policies must be non-empty".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dataset_label(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn descriptor(&self) -> DatasetDescriptor {
        DatasetDescriptor {
            name: self.dataset_label(),
            path: self.dataset.clone(),
            bipartite: self.bipartite,
            expect_nodes: self.expect_nodes,
            expect_edges: self.expect_edges,
            splits: self.splits,
        }
    }

    pub fn reference(&self) -> ReferenceOverrides {
        ReferenceOverrides {
            ref_a: self.ref_a,
            ref_b: self.ref_b,
            ref_c: self.ref_c,
            ref_lambda: self.ref_lambda,
        }
    }

    pub fn oracle_spec(&self) -> Result<OracleSpec> {
        self.oracle.parse()
    }

    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>> {
        self.policies
            .iter()
            .map(|p| PolicyKind::parse_with_seed(p, self.seed))
            .collect()
    }

    pub fn cody(&self) -> CodyConfig {
        CodyConfig {
            it_max: self.it_max,
            alpha: self.alpha,
            m_max: self.m_max,
            k: self.k,
            best_first_stop: self.best_first_stop,
            prune_duplicates: self.prune_duplicates,
        }
    }

    pub fn greedy(&self) -> GreedyConfig {
        GreedyConfig {
            l: self.l,
            k: self.k,
            m_max: self.m_max,
        }
    }
}
