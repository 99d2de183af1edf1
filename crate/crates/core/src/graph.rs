//! Reaction graphs, their weighted undirected projection and bipartitions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BooleanNetwork;

/// A directed reaction pathway `from -> to`: rule `to` reads species `from`.
pub type Edge = (usize, usize);

/// Directed dependency graph of a network, without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionGraph {
    d: usize,
    /// Sorted by `(to, from)`.
    edges: Vec<Edge>,
}

impl ReactionGraph {
    pub fn from_network(net: &BooleanNetwork) -> Self {
        let mut edges = Vec::new();
        for i in 0..net.len() {
            for &j in net.syntactic_deps(i) {
                if j != i {
                    edges.push((j, i));
                }
            }
        }
        edges.sort_by_key(|&(j, i)| (i, j));
        ReactionGraph { d: net.len(), edges }
    }

    pub fn node_count(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges
            .binary_search_by_key(&(to, from), |&(j, i)| (i, j))
            .is_ok()
    }

    /// Directed edges whose endpoints lie in different blocks, ordered by
    /// `(to, from)`. Edges touching species outside `p` are ignored.
    pub fn cut_edges(&self, p: &Partitioning) -> Vec<Edge> {
        self.edges
            .iter()
            .copied()
            .filter(|&(j, i)| matches!((p.block_of(j), p.block_of(i)), (Some(a), Some(b)) if a != b))
            .collect()
    }

    /// Graphviz rendering. When `blocks` is given, species are filled with
    /// one color per block.
    pub fn to_dot(&self, names: &[String], blocks: Option<&[Vec<usize>]>) -> String {
        const PALETTE: [&str; 8] = [
            "#4e79a7", "#b07aa1", "#59a14f", "#f28e2b", "#e15759", "#76b7b2", "#edc948", "#9c755f",
        ];
        let mut block_of = vec![None; self.d];
        if let Some(blocks) = blocks {
            for (b, block) in blocks.iter().enumerate() {
                for &s in block {
                    if s < self.d {
                        block_of[s] = Some(b);
                    }
                }
            }
        }
        let mut out = String::from("digraph reactions {\n");
        for (s, name) in names.iter().enumerate().take(self.d) {
            match block_of[s] {
                Some(b) => {
                    let _ = writeln!(
                        out,
                        "  \"{name}\" [style=filled, fillcolor=\"{}\", block={b}];",
                        PALETTE[b % PALETTE.len()]
                    );
                }
                None => {
                    let _ = writeln!(out, "  \"{name}\";");
                }
            }
        }
        for &(j, i) in &self.edges {
            let cut = matches!((block_of[j], block_of[i]), (Some(a), Some(b)) if a != b);
            if cut {
                let _ = writeln!(out, "  \"{}\" -> \"{}\" [color=red];", names[j], names[i]);
            } else {
                let _ = writeln!(out, "  \"{}\" -> \"{}\";", names[j], names[i]);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Undirected projection: the weight of `{u, v}` counts the directed
/// edges between `u` and `v`, so it is 1 or 2.
///
/// Nodes carry global species ids; adjacency is stored by local position
/// so induced subgraphs are cheap to build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    nodes: Vec<usize>,
    adj: Vec<Vec<(usize, u32)>>,
}

impl WeightedGraph {
    pub fn from_reaction_graph(g: &ReactionGraph) -> Self {
        let nodes: Vec<usize> = (0..g.node_count()).collect();
        let mut wg = WeightedGraph {
            adj: vec![Vec::new(); nodes.len()],
            nodes,
        };
        for &(j, i) in g.edges() {
            wg.add_weight(j, i, 1);
        }
        wg
    }

    /// Builds a graph from undirected weighted edges over nodes `0..n`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, u32)]) -> Self {
        let mut wg = WeightedGraph {
            nodes: (0..n).collect(),
            adj: vec![Vec::new(); n],
        };
        for &(u, v, w) in edges {
            assert!(u != v && u < n && v < n, "invalid edge ({u}, {v})");
            wg.add_weight(u, v, w);
        }
        wg
    }

    fn add_weight(&mut self, u: usize, v: usize, w: u32) {
        match self.adj[u].iter_mut().find(|(x, _)| *x == v) {
            Some(entry) => entry.1 += w,
            None => self.adj[u].push((v, w)),
        }
        match self.adj[v].iter_mut().find(|(x, _)| *x == u) {
            Some(entry) => entry.1 += w,
            None => self.adj[v].push((u, w)),
        }
        self.adj[u].sort_unstable();
        self.adj[v].sort_unstable();
    }

    /// Subgraph induced by `species`; edges leaving the set are dropped.
    pub fn induced(&self, species: &[usize]) -> Result<Self> {
        let mut nodes = species.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        let mut local = Vec::with_capacity(nodes.len());
        for &s in &nodes {
            local.push(self.local_of(s).ok_or_else(|| {
                Error::InvalidPartitioning(format!("species {s} is not a node of the graph"))
            })?);
        }
        let adj = local
            .iter()
            .map(|&u| {
                self.adj[u]
                    .iter()
                    .filter_map(|&(v, w)| {
                        let g = self.nodes[v];
                        nodes.binary_search(&g).ok().map(|k| (k, w))
                    })
                    .collect()
            })
            .collect();
        Ok(WeightedGraph { nodes, adj })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Global species ids, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn local_of(&self, species: usize) -> Option<usize> {
        self.nodes.binary_search(&species).ok()
    }

    /// Neighbors of local node `u` as `(local, weight)`.
    pub fn neighbors(&self, u: usize) -> &[(usize, u32)] {
        &self.adj[u]
    }

    /// Weight between two species (global ids), 0 if not adjacent.
    pub fn weight(&self, a: usize, b: usize) -> u32 {
        match (self.local_of(a), self.local_of(b)) {
            (Some(u), Some(v)) => self.adj[u].iter().find(|(x, _)| *x == v).map_or(0, |&(_, w)| w),
            _ => 0,
        }
    }

    /// Undirected edges `(a, b, w)` with `a < b` in global ids.
    pub fn edges(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, w) in list {
                if u < v {
                    out.push((self.nodes[u], self.nodes[v], w));
                }
            }
        }
        out
    }

    /// Sum of weights of edges crossing the two blocks.
    pub fn cut_cost(&self, p: &Partitioning) -> u64 {
        let sides: Vec<Option<usize>> = self.nodes.iter().map(|&s| p.block_of(s)).collect();
        let mut cost = 0;
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, w) in list {
                if u < v {
                    if let (Some(a), Some(b)) = (sides[u], sides[v]) {
                        if a != b {
                            cost += u64::from(w);
                        }
                    }
                }
            }
        }
        cost
    }
}

/// A split of a species set into two disjoint blocks, each sorted.
///
/// The derived ordering compares `block0` first, then `block1`; on
/// canonical partitionings this is the lexicographic tie-break used when
/// ranking pools.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partitioning {
    block0: Vec<usize>,
    block1: Vec<usize>,
}

impl Partitioning {
    pub fn new(mut block0: Vec<usize>, mut block1: Vec<usize>) -> Result<Self> {
        block0.sort_unstable();
        block1.sort_unstable();
        let has_dup = |b: &[usize]| b.windows(2).any(|w| w[0] == w[1]);
        if has_dup(&block0) || has_dup(&block1) {
            return Err(Error::InvalidPartitioning("repeated species".into()));
        }
        if block0.iter().any(|s| block1.binary_search(s).is_ok()) {
            return Err(Error::InvalidPartitioning("blocks overlap".into()));
        }
        Ok(Partitioning { block0, block1 })
    }

    pub fn block0(&self) -> &[usize] {
        &self.block0
    }

    pub fn block1(&self) -> &[usize] {
        &self.block1
    }

    pub fn blocks(&self) -> [&[usize]; 2] {
        [&self.block0, &self.block1]
    }

    pub fn len(&self) -> usize {
        self.block0.len() + self.block1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Which block holds `s`, if any.
    pub fn block_of(&self, s: usize) -> Option<usize> {
        if self.block0.binary_search(&s).is_ok() {
            Some(0)
        } else if self.block1.binary_search(&s).is_ok() {
            Some(1)
        } else {
            None
        }
    }

    pub fn contains(&self, s: usize) -> bool {
        self.block_of(s).is_some()
    }

    /// Union of both blocks, ascending.
    pub fn species(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.block0.iter().chain(&self.block1).copied().collect();
        all.sort_unstable();
        all
    }

    /// True when the blocks cover exactly `0..d`.
    pub fn covers(&self, d: usize) -> bool {
        self.len() == d && self.species().into_iter().eq(0..d)
    }

    pub fn swapped(&self) -> Self {
        Partitioning {
            block0: self.block1.clone(),
            block1: self.block0.clone(),
        }
    }

    /// Larger block first; for equal sizes the block holding the smallest
    /// species comes first.
    pub fn canonical(&self) -> Self {
        let first_is_0 = match self.block0.len().cmp(&self.block1.len()) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => match (self.block0.first(), self.block1.first()) {
                (Some(a), Some(b)) => a < b,
                _ => true,
            },
        };
        if first_is_0 {
            self.clone()
        } else {
            self.swapped()
        }
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonical()
    }

    /// Block sizes are `ceil(n/2)` and `floor(n/2)`, in either order.
    pub fn is_balanced(&self) -> bool {
        self.block0.len().abs_diff(self.block1.len()) <= 1
    }
}

/// Free-function form of [`Partitioning::canonical`].
pub fn canonicalize(p: &Partitioning) -> Partitioning {
    p.canonical()
}
