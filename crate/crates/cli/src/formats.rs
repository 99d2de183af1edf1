//! JSON layouts of partition trees, pools and reports. Species are always
//! referenced by name.

use bnpart_core::entropy::ScoredEntry;
use bnpart_core::hierarchy::{PartitionTree, PoolStats, SizeTree, TreeNode};
use bnpart_core::rank::{MemoryEstimate, NodeRank};
use bnpart_core::{BooleanNetwork, Partitioning};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "bnpart";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields shared by every JSON document the tool writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
}

impl Header {
    pub fn new(command: &str) -> Self {
        Header {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
        }
    }
}

/// A tree node: leaves list their species, internal nodes their two
/// children and the score of the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeJson {
    Internal {
        children: Box<[NodeJson; 2]>,
        entropy: f64,
        cuts: usize,
        pool_size: usize,
        #[serde(default)]
        runs: usize,
        #[serde(default)]
        multiplicity: usize,
    },
    Leaf {
        species: Vec<String>,
    },
}

impl NodeJson {
    pub fn from_tree(net: &BooleanNetwork, tree: &PartitionTree) -> Self {
        Self::from_node(net, &tree.root)
    }

    fn from_node(net: &BooleanNetwork, node: &TreeNode) -> Self {
        match &node.split {
            None => NodeJson::Leaf {
                species: names_of(net, &node.species),
            },
            Some(split) => NodeJson::Internal {
                children: Box::new([
                    Self::from_node(net, &split.children[0]),
                    Self::from_node(net, &split.children[1]),
                ]),
                entropy: split.report.total,
                cuts: split.report.cuts(),
                pool_size: split.pool.pool_size,
                runs: split.pool.runs,
                multiplicity: split.pool.multiplicity,
            },
        }
    }

    /// Rebuilds the tree, recomputing each node's entropy report.
    pub fn to_tree(&self, net: &BooleanNetwork) -> CliResult<PartitionTree> {
        if matches!(self, NodeJson::Leaf { .. }) {
            return Err(CliError::Input("partition tree needs at least one split".into()));
        }
        let root = self.to_node(net)?;
        let mut species = root.species.clone();
        species.sort_unstable();
        if species != (0..net.len()).collect::<Vec<_>>() {
            return Err(CliError::Input(format!(
                "partition tree does not cover the {} species exactly once",
                net.len()
            )));
        }
        Ok(PartitionTree { root })
    }

    fn to_node(&self, net: &BooleanNetwork) -> CliResult<TreeNode> {
        match self {
            NodeJson::Leaf { species } => {
                if species.is_empty() {
                    return Err(CliError::Input("empty leaf in partition tree".into()));
                }
                Ok(TreeNode::leaf(indices_of(net, species)?))
            }
            NodeJson::Internal {
                children,
                pool_size,
                runs,
                multiplicity,
                ..
            } => {
                let pool = PoolStats {
                    runs: *runs,
                    pool_size: *pool_size,
                    multiplicity: *multiplicity,
                };
                let a = children[0].to_node(net)?;
                let b = children[1].to_node(net)?;
                TreeNode::internal(net, a, b, pool).map_err(|e| CliError::from_core("partition tree", e))
            }
        }
    }

    /// Block sizes, which is all a memory estimate needs.
    pub fn size_tree(&self) -> SizeTree {
        match self {
            NodeJson::Leaf { species } => SizeTree::Leaf(species.len()),
            NodeJson::Internal { children, .. } => SizeTree::Node(
                Box::new(children[0].size_tree()),
                Box::new(children[1].size_tree()),
            ),
        }
    }

    /// Accepts a full partition document or a bare tree.
    pub fn from_document(text: &str) -> CliResult<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid JSON: {e}")))?;
        let tree = match value.get("tree") {
            Some(t) => t.clone(),
            None => value,
        };
        serde_json::from_value(tree).map_err(|e| CliError::Input(format!("invalid partition tree: {e}")))
    }
}

pub fn names_of(net: &BooleanNetwork, species: &[usize]) -> Vec<String> {
    species.iter().map(|&s| net.name(s).to_string()).collect()
}

pub fn indices_of(net: &BooleanNetwork, names: &[String]) -> CliResult<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            net.index_of(n)
                .ok_or_else(|| CliError::Input(format!("unknown species `{n}`")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub network: String,
    pub levels: usize,
    pub runs: usize,
    pub seed: u64,
    pub exhaustive: bool,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    #[serde(flatten)]
    pub header: Header,
    pub config: PartitionConfig,
    pub total_entropy: f64,
    pub total_cuts: usize,
    pub leaves: Vec<Vec<String>>,
    pub tree: NodeJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRow {
    pub block0: Vec<String>,
    pub block1: Vec<String>,
    pub entropy: f64,
    pub cut_cost: u64,
    pub multiplicity: usize,
}

impl PoolRow {
    pub fn from_scored(net: &BooleanNetwork, s: &ScoredEntry) -> Self {
        PoolRow {
            block0: names_of(net, s.entry.partitioning.block0()),
            block1: names_of(net, s.entry.partitioning.block1()),
            entropy: s.report.total,
            cut_cost: s.entry.cut_cost,
            multiplicity: s.entry.multiplicity,
        }
    }

    pub fn partitioning(&self, net: &BooleanNetwork) -> CliResult<Partitioning> {
        Partitioning::new(indices_of(net, &self.block0)?, indices_of(net, &self.block1)?)
            .map_err(|e| CliError::from_core("pool entry", e))
    }
}

/// Root-level pool ranked by entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolDoc {
    #[serde(flatten)]
    pub header: Header,
    pub config: PartitionConfig,
    pub entries: Vec<PoolRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub network: String,
    pub t_end: f64,
    pub dt: f64,
    pub ic: String,
    pub snapshots: usize,
    pub trajectory: Option<String>,
    pub moments: Option<String>,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDoc {
    #[serde(flatten)]
    pub header: Header,
    pub config: SolveConfig,
    pub d: usize,
    pub steps: u64,
    pub snapshot_times: Vec<f64>,
    pub max_mass_error: f64,
    pub min_probability: f64,
    pub final_moments: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RanksConfig {
    pub network: String,
    pub partition: String,
    pub trajectory: String,
    pub eps: f64,
    pub pool: Option<String>,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRankJson {
    /// Child indices from the root, e.g. `"01"`.
    pub path: String,
    pub species: Vec<String>,
    pub eps_rank: usize,
    pub truncation_error: f64,
    pub tucker_ok: Option<bool>,
    pub singular_values: Vec<f64>,
}

impl NodeRankJson {
    pub fn from_rank(net: &BooleanNetwork, n: &NodeRank) -> Self {
        NodeRankJson {
            path: n.path.iter().map(|k| k.to_string()).collect(),
            species: names_of(net, &n.species),
            eps_rank: n.eps_rank,
            truncation_error: n.truncation_error,
            tucker_ok: n.tucker_ok,
            singular_values: n.singular_values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRanks {
    pub t: f64,
    pub max_rank: usize,
    pub tucker_ok: bool,
    pub nodes: Vec<NodeRankJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRank {
    pub block0: Vec<String>,
    pub block1: Vec<String>,
    pub entropy: f64,
    pub eps_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolCorrelation {
    pub t: f64,
    pub entries: Vec<PoolRank>,
    /// Pearson correlation of entropy and ε-rank, absent when either is
    /// constant over the pool.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RanksDoc {
    #[serde(flatten)]
    pub header: Header,
    pub config: RanksConfig,
    pub partition: NodeJson,
    pub snapshots: Vec<SnapshotRanks>,
    pub pool: Option<PoolCorrelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub network: Option<String>,
    pub dim: usize,
    pub partition: Option<String>,
    pub levels: Option<usize>,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub rank: usize,
    pub dof: u128,
    pub bytes: u128,
    pub display: String,
    pub full_bytes: u128,
    pub full_display: String,
    pub compression_ratio: f64,
    pub display_ratio: f64,
}

impl From<&MemoryEstimate> for MemoryRow {
    fn from(m: &MemoryEstimate) -> Self {
        MemoryRow {
            rank: m.rank,
            dof: m.dof,
            bytes: m.bytes,
            display: m.display(),
            full_bytes: m.full_bytes(),
            full_display: m.full_display(),
            compression_ratio: m.compression_ratio,
            display_ratio: m.display_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryDoc {
    #[serde(flatten)]
    pub header: Header,
    pub config: MemoryConfig,
    pub estimates: Vec<MemoryRow>,
}

/// Sample Pearson correlation, `None` when either series is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
