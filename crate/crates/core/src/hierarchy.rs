//! Recursive, entropy-guided bipartitioning into a binary partition tree.
//!
//! Starting at the root, every node marked internal by the [`TreeShape`]
//! is split by generating a Kernighan-Lin pool on the subgraph induced by
//! the node's species and picking the lowest-entropy candidate (see
//! [`node_entropy`]). Pathways already severed at an ancestor are not
//! charged again.

use serde::{Deserialize, Serialize};

use crate::entropy::{node_entropy, score_pool_with, EntropyReport};
use crate::error::{Error, Result};
use crate::graph::{Partitioning, ReactionGraph, WeightedGraph};
use crate::kl::{exhaustive_pool, generate_pool_with, RandomSource};
use crate::network::BooleanNetwork;
use crate::par::Exec;

/// Which nodes of the balanced binary recursion are split further.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeNode {
    Leaf,
    Split(Box<ShapeNode>, Box<ShapeNode>),
}

impl ShapeNode {
    /// Full binary template of the given depth.
    pub fn balanced(levels: usize) -> Self {
        if levels == 0 {
            ShapeNode::Leaf
        } else {
            ShapeNode::Split(
                Box::new(ShapeNode::balanced(levels - 1)),
                Box::new(ShapeNode::balanced(levels - 1)),
            )
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ShapeNode::Leaf => 0,
            ShapeNode::Split(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeShape {
    /// Balanced recursion to depth `L >= 1`.
    Levels(usize),
    /// Explicit template; the first child receives the larger block.
    Template(ShapeNode),
}

impl TreeShape {
    pub fn template(&self) -> Result<ShapeNode> {
        match self {
            TreeShape::Levels(0) => Err(Error::InfeasibleShape("levels must be at least 1".into())),
            TreeShape::Levels(l) => Ok(ShapeNode::balanced(*l)),
            TreeShape::Template(ShapeNode::Leaf) => {
                Err(Error::InfeasibleShape("the root must be split".into()))
            }
            TreeShape::Template(t) => Ok(t.clone()),
        }
    }

    /// Checks that every internal node receives at least two species when
    /// `d` species are split with balanced halves.
    pub fn check(&self, d: usize) -> Result<ShapeNode> {
        fn walk(node: &ShapeNode, size: usize, depth: usize) -> Result<()> {
            match node {
                ShapeNode::Leaf if size == 0 => Err(Error::InfeasibleShape("a leaf would be empty".into())),
                ShapeNode::Leaf => Ok(()),
                ShapeNode::Split(..) if size < 2 => Err(Error::InfeasibleShape(format!(
                    "a node of size {size} at depth {depth} cannot be split"
                ))),
                ShapeNode::Split(a, b) => {
                    walk(a, size.div_ceil(2), depth + 1)?;
                    walk(b, size / 2, depth + 1)
                }
            }
        }
        let template = self.template()?;
        walk(&template, d, 0)?;
        Ok(template)
    }
}

/// Block sizes of a tree without species, used for memory estimates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeTree {
    Leaf(usize),
    Node(Box<SizeTree>, Box<SizeTree>),
}

impl SizeTree {
    /// Sizes obtained by splitting `d` species along `shape` with balanced
    /// halves.
    pub fn balanced(d: usize, shape: &TreeShape) -> Result<Self> {
        fn build(node: &ShapeNode, size: usize) -> SizeTree {
            match node {
                ShapeNode::Leaf => SizeTree::Leaf(size),
                ShapeNode::Split(a, b) => {
                    SizeTree::Node(Box::new(build(a, size.div_ceil(2))), Box::new(build(b, size / 2)))
                }
            }
        }
        let template = shape.check(d)?;
        Ok(build(&template, d))
    }

    pub fn size(&self) -> usize {
        match self {
            SizeTree::Leaf(n) => *n,
            SizeTree::Node(a, b) => a.size() + b.size(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PoolStats {
    /// KL restarts used at this node (0 for an exhaustive pool).
    pub runs: usize,
    pub pool_size: usize,
    /// How many restarts produced the selected split.
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub children: Box<[TreeNode; 2]>,
    pub report: EntropyReport,
    pub pool: PoolStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Species of the node (union of its leaves), ascending.
    pub species: Vec<usize>,
    pub split: Option<Split>,
}

impl TreeNode {
    pub fn leaf(mut species: Vec<usize>) -> Self {
        species.sort_unstable();
        TreeNode { species, split: None }
    }

    /// Internal node over two subtrees; the node entropy is evaluated from
    /// the children's species.
    pub fn internal(net: &BooleanNetwork, a: TreeNode, b: TreeNode, pool: PoolStats) -> Result<Self> {
        let p = Partitioning::new(a.species.clone(), b.species.clone())?;
        let species = p.species();
        let report = node_entropy(net, &species, &p)?;
        Ok(TreeNode {
            species,
            split: Some(Split {
                children: Box::new([a, b]),
                report,
                pool,
            }),
        })
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn partitioning(&self) -> Option<Partitioning> {
        self.split.as_ref().map(|s| {
            Partitioning::new(s.children[0].species.clone(), s.children[1].species.clone())
                .expect("children are disjoint")
        })
    }
}

/// Binary partition tree with per-node entropy reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub root: TreeNode,
}

/// A node reached by a preorder walk. `path` lists child indices from the
/// root, so the root has an empty path.
#[derive(Debug, Clone, Copy)]
pub struct NodeRef<'a> {
    pub path: &'a [u8],
    pub node: &'a TreeNode,
}

impl PartitionTree {
    /// Depth-1 tree for a one-level partitioning.
    pub fn from_partitioning(net: &BooleanNetwork, p: &Partitioning, pool: PoolStats) -> Result<Self> {
        let root = TreeNode::internal(
            net,
            TreeNode::leaf(p.block0().to_vec()),
            TreeNode::leaf(p.block1().to_vec()),
            pool,
        )?;
        Ok(PartitionTree { root })
    }

    pub fn species(&self) -> &[usize] {
        &self.root.species
    }

    /// Visits every node in preorder.
    pub fn walk<F: FnMut(NodeRef<'_>)>(&self, mut f: F) {
        fn go<F: FnMut(NodeRef<'_>)>(node: &TreeNode, path: &mut Vec<u8>, f: &mut F) {
            f(NodeRef { path, node });
            if let Some(split) = &node.split {
                for (k, child) in split.children.iter().enumerate() {
                    path.push(k as u8);
                    go(child, path, f);
                    path.pop();
                }
            }
        }
        go(&self.root, &mut Vec::new(), &mut f);
    }

    pub fn leaves(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.walk(|n| {
            if n.node.is_leaf() {
                out.push(n.node.species.clone());
            }
        });
        out
    }

    pub fn depth(&self) -> usize {
        let mut depth = 0;
        self.walk(|n| depth = depth.max(n.path.len()));
        depth
    }

    pub fn size_tree(&self) -> SizeTree {
        fn go(node: &TreeNode) -> SizeTree {
            match &node.split {
                None => SizeTree::Leaf(node.species.len()),
                Some(s) => SizeTree::Node(Box::new(go(&s.children[0])), Box::new(go(&s.children[1]))),
            }
        }
        go(&self.root)
    }
}

/// Sum of node entropies over the root and every internal node.
pub fn tree_total_entropy(tree: &PartitionTree) -> f64 {
    let mut total = 0.0;
    tree.walk(|n| {
        if let Some(split) = &n.node.split {
            total += split.report.total;
        }
    });
    total
}

/// Directed pathways severed anywhere in the tree. Each is counted once,
/// at the shallowest node separating its endpoints.
pub fn tree_cut_count(tree: &PartitionTree) -> usize {
    let mut cuts = 0;
    tree.walk(|n| {
        if let Some(split) = &n.node.split {
            cuts += split.report.cuts();
        }
    });
    cuts
}

/// How candidate splits are generated at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    KernighanLin {
        runs: usize,
        source: RandomSource,
    },
    /// Every balanced split (small nodes only).
    Exhaustive,
}

/// Builds a partition tree by recursive pool generation and entropy
/// scoring. Deterministic for a given seed.
pub fn auto_partition(
    net: &BooleanNetwork,
    shape: &TreeShape,
    n_runs: usize,
    source: RandomSource,
) -> Result<PartitionTree> {
    auto_partition_with(
        net,
        shape,
        PoolMode::KernighanLin { runs: n_runs, source },
        Exec::default(),
    )
}

pub fn auto_partition_with(
    net: &BooleanNetwork,
    shape: &TreeShape,
    mode: PoolMode,
    exec: Exec,
) -> Result<PartitionTree> {
    if net.len() < 2 {
        return Err(Error::TooFewNodes(net.len()));
    }
    let template = shape.check(net.len())?;
    let graph = WeightedGraph::from_reaction_graph(&ReactionGraph::from_network(net));
    let species: Vec<usize> = (0..net.len()).collect();
    let root = build_node(net, &graph, species, &template, 1, mode, exec)?;
    Ok(PartitionTree { root })
}

/// `heap_index` numbers nodes like a binary heap (root 1, children 2k and
/// 2k+1) and keys the node's random source.
fn build_node(
    net: &BooleanNetwork,
    graph: &WeightedGraph,
    species: Vec<usize>,
    shape: &ShapeNode,
    heap_index: u64,
    mode: PoolMode,
    exec: Exec,
) -> Result<TreeNode> {
    let ShapeNode::Split(shape0, shape1) = shape else {
        return Ok(TreeNode::leaf(species));
    };
    let sub = graph.induced(&species)?;
    let (pool, runs) = match mode {
        PoolMode::KernighanLin { runs, source } => {
            let node_source = if heap_index == 1 {
                source
            } else {
                source.derive(heap_index)
            };
            (generate_pool_with(&sub, runs, node_source, exec)?, runs)
        }
        PoolMode::Exhaustive => (exhaustive_pool(&sub)?, 0),
    };
    let scored = score_pool_with(&pool, exec, |p| node_entropy(net, &species, p))?;
    let best = scored.into_iter().next().expect("non-empty pool");
    let p = &best.entry.partitioning;
    let (left, right) = exec.join(
        || {
            build_node(
                net,
                graph,
                p.block0().to_vec(),
                shape0,
                2 * heap_index,
                mode,
                exec,
            )
        },
        || {
            build_node(
                net,
                graph,
                p.block1().to_vec(),
                shape1,
                2 * heap_index + 1,
                mode,
                exec,
            )
        },
    );
    Ok(TreeNode {
        species,
        split: Some(Split {
            children: Box::new([left?, right?]),
            report: best.report,
            pool: PoolStats {
                runs,
                pool_size: pool.len(),
                multiplicity: best.entry.multiplicity,
            },
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{score_pool, total_entropy};
    use crate::kl::generate_pool;
    use crate::network::tests::example;

    fn part(a: &[usize], b: &[usize]) -> Partitioning {
        Partitioning::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn shape_feasibility() {
        assert!(TreeShape::Levels(3).check(4).is_err());
        assert!(TreeShape::Levels(2).check(4).is_ok());
        assert!(TreeShape::Levels(0).check(4).is_err());
        assert!(TreeShape::Levels(1).check(1).is_err());
        let lopsided = TreeShape::Template(ShapeNode::Split(
            Box::new(ShapeNode::balanced(1)),
            Box::new(ShapeNode::Leaf),
        ));
        assert!(lopsided.check(3).is_ok());
        assert!(lopsided.check(2).is_err());
    }

    #[test]
    fn balanced_sizes() {
        let sizes = SizeTree::balanced(34, &TreeShape::Levels(2)).unwrap();
        let leaves = |t: &SizeTree| -> Vec<usize> {
            fn go(t: &SizeTree, out: &mut Vec<usize>) {
                match t {
                    SizeTree::Leaf(n) => out.push(*n),
                    SizeTree::Node(a, b) => {
                        go(a, out);
                        go(b, out)
                    }
                }
            }
            let mut out = vec![];
            go(t, &mut out);
            out
        };
        assert_eq!(leaves(&sizes), [9, 8, 9, 8]);
        assert_eq!(
            leaves(&SizeTree::balanced(41, &TreeShape::Levels(2)).unwrap()),
            [11, 10, 10, 10]
        );
    }

    #[test]
    fn depth_one_matches_one_level_pipeline() {
        let net = example();
        let tree = auto_partition(&net, &TreeShape::Levels(1), 200, RandomSource::new(7)).unwrap();
        let wg = WeightedGraph::from_reaction_graph(&ReactionGraph::from_network(&net));
        let pool = generate_pool(&wg, 200, RandomSource::new(7)).unwrap();
        let scored = score_pool(&net, &pool).unwrap();
        let split = tree.root.split.as_ref().unwrap();
        assert_eq!(tree.root.partitioning().unwrap(), scored[0].entry.partitioning);
        assert_eq!(split.report, scored[0].report);
        assert_eq!(split.pool.pool_size, pool.len());
        assert_eq!(
            tree_total_entropy(&tree).to_bits(),
            scored[0].report.total.to_bits()
        );
    }

    #[test]
    fn ancestor_cuts_are_not_recharged() {
        let net = example();
        // Child {2,3,4} split ({2,3},{4}): rule 4 reads S1 (cut at the root)
        // and S4 (own block), so it adds nothing; rule 2 is absorbed.
        let report = node_entropy(&net, &[2, 3, 4], &part(&[2, 3], &[4])).unwrap();
        assert_eq!(report.total, 0.0);
        assert_eq!(report.cut_edges, [(4, 2)]);
        let report = node_entropy(&net, &[2, 3, 4], &part(&[2, 4], &[3])).unwrap();
        assert_eq!(report.total, 0.5);
        let report = node_entropy(&net, &[0, 1, 4], &part(&[0, 4], &[1])).unwrap();
        assert_eq!(report.total, 1.5);
        assert!(node_entropy(&net, &[2, 3, 9], &part(&[2, 3], &[9])).is_err());
    }

    #[test]
    fn manual_tree_totals() {
        let net = example();
        let left = TreeNode::leaf(vec![0, 1]);
        let right = TreeNode::internal(
            &net,
            TreeNode::leaf(vec![2, 3]),
            TreeNode::leaf(vec![4]),
            PoolStats::default(),
        )
        .unwrap();
        let root = TreeNode::internal(&net, left, right, PoolStats::default()).unwrap();
        let tree = PartitionTree { root };
        let root_h = total_entropy(&net, &part(&[0, 1], &[2, 3, 4])).unwrap().total;
        assert_eq!(tree_total_entropy(&tree), root_h);
        assert_eq!(tree_cut_count(&tree), 4);

        let flat =
            PartitionTree::from_partitioning(&net, &part(&[0, 1], &[2, 3, 4]), PoolStats::default()).unwrap();
        assert_eq!(tree_cut_count(&flat), 3);
        assert_eq!(flat.depth(), 1);
    }

    #[test]
    fn two_level_example() {
        let net = example();
        let tree = auto_partition_with(
            &net,
            &TreeShape::Levels(2),
            PoolMode::Exhaustive,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(tree.leaves(), [vec![0, 1], vec![4], vec![2], vec![3]]);
        assert!((tree_total_entropy(&tree) - (0.811_278_124_459_132_9 + 1.0)).abs() < 1e-12);
        assert_eq!(tree_cut_count(&tree), 5);
    }

    #[test]
    fn edgeless_network_has_no_cuts() {
        let net = BooleanNetwork::parse("A, A\nB, B\nC, C\nD, D").unwrap();
        let tree = auto_partition(&net, &TreeShape::Levels(2), 10, RandomSource::new(0)).unwrap();
        assert_eq!(tree_cut_count(&tree), 0);
        assert_eq!(tree_total_entropy(&tree), 0.0);
    }

    #[test]
    fn infeasible_shape_is_an_error() {
        let net = BooleanNetwork::parse("A, B\nB, C\nC, D\nD, A").unwrap();
        assert!(matches!(
            auto_partition(&net, &TreeShape::Levels(3), 10, RandomSource::new(0)),
            Err(Error::InfeasibleShape(_))
        ));
    }
}
