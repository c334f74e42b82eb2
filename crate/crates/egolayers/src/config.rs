//! Run configuration: built-in defaults, overridden by a TOML file, then
//! by command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use egolayers_core::layers::{Algorithm, JaccardVariant, DEFAULT_DEGREE_FLOOR, DEFAULT_K_MAX};
use egolayers_core::network::{CnMarginals, CoOccurrence, EinConfig};
use egolayers_core::validate::{RetentionRule, ThresholdBase, ValidationConfig};
use serde::{Deserialize, Serialize};

use crate::ingest::{CallSchema, OrderSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Counting {
    Pairs,
    InitiatingOrders,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Marginals {
    Reciprocal,
    AllCalls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Both,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    MaximalPairs,
    TestedEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmChoice {
    Kmeans,
    HtBreak,
}

impl From<AlgorithmChoice> for Algorithm {
    fn from(a: AlgorithmChoice) -> Self {
        match a {
            AlgorithmChoice::Kmeans => Algorithm::KMeans,
            AlgorithmChoice::HtBreak => Algorithm::HtBreak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Jaccard {
    CoMembership,
    LayerMatching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub window_seconds: u64,
    pub min_cooccurrence: u64,
    pub counting: Counting,
    pub day_offset_seconds: i64,
    pub cn_marginals: Marginals,
    pub alpha: f64,
    pub rule: Rule,
    pub threshold_base: Base,
    /// Also report significance under the other threshold base.
    pub both_bases: bool,
    pub degree_floor: u64,
    pub k_max: usize,
    pub algorithms: Vec<AlgorithmChoice>,
    pub jaccard: Jaccard,
    /// Parametric-bootstrap resamples for the degree fits (0 disables).
    pub bootstrap: usize,
    /// Population size N for the layer model; defaults to the node count.
    pub population: Option<u64>,
    pub seed: u64,
    /// Worker threads (0 = all cores). Recorded in the manifest runtime
    /// section rather than the config echo, as it never changes outputs.
    #[serde(skip_serializing)]
    pub threads: usize,
    pub order_schema: OrderSchema,
    pub call_schema: CallSchema,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window_seconds: 30,
            min_cooccurrence: 3,
            counting: Counting::Pairs,
            day_offset_seconds: 0,
            cn_marginals: Marginals::Reciprocal,
            alpha: 0.01,
            rule: Rule::Both,
            threshold_base: Base::MaximalPairs,
            both_bases: false,
            degree_floor: DEFAULT_DEGREE_FLOOR,
            k_max: DEFAULT_K_MAX,
            algorithms: vec![AlgorithmChoice::Kmeans, AlgorithmChoice::HtBreak],
            jaccard: Jaccard::CoMembership,
            bootstrap: 0,
            population: None,
            seed: 1,
            threads: 0,
            order_schema: OrderSchema::default(),
            call_schema: CallSchema::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn check(&self) -> Result<()> {
        self.ein().check()?;
        anyhow::ensure!(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)");
        anyhow::ensure!(self.k_max >= 1, "k_max must be at least 1");
        anyhow::ensure!(!self.algorithms.is_empty(), "at least one layer algorithm is required");
        Ok(())
    }

    pub fn ein(&self) -> EinConfig {
        EinConfig {
            window_seconds: self.window_seconds,
            min_cooccurrence: self.min_cooccurrence,
            counting: match self.counting {
                Counting::Pairs => CoOccurrence::Pairs,
                Counting::InitiatingOrders => CoOccurrence::InitiatingOrders,
            },
            day_offset_seconds: self.day_offset_seconds,
        }
    }

    pub fn cn_marginals(&self) -> CnMarginals {
        match self.cn_marginals {
            Marginals::Reciprocal => CnMarginals::ReciprocalOnly,
            Marginals::AllCalls => CnMarginals::AllCalls,
        }
    }

    pub fn validation(&self) -> ValidationConfig {
        ValidationConfig {
            alpha: self.alpha,
            rule: match self.rule {
                Rule::Both => RetentionRule::BothDirections,
                Rule::Either => RetentionRule::EitherDirection,
            },
            threshold_base: match self.threshold_base {
                Base::MaximalPairs => ThresholdBase::MaximalPairs,
                Base::TestedEdges => ThresholdBase::TestedEdges,
            },
        }
    }

    pub fn jaccard_variant(&self) -> JaccardVariant {
        match self.jaccard {
            Jaccard::CoMembership => JaccardVariant::CoMembership,
            Jaccard::LayerMatching => JaccardVariant::LayerMatching,
        }
    }

    pub fn layer_algorithms(&self) -> Vec<Algorithm> {
        let mut a: Vec<AlgorithmChoice> = self.algorithms.clone();
        a.sort();
        a.dedup();
        a.into_iter().map(Algorithm::from).collect()
    }
}
