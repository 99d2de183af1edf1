//! Low-rank structure of probability snapshots and memory estimates for
//! low-rank representations.
//!
//! A snapshot over `d` species is reshaped into a matrix whose rows are
//! indexed by the states of one group of species and whose columns are
//! indexed by the states of the rest. The numerical rank of that matrix is
//! the number of basis functions a low-rank representation needs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cme::StateVector;
use crate::error::{Error, Result};
use crate::graph::Partitioning;
use crate::hierarchy::{PartitionTree, SizeTree};
use crate::par::Exec;

/// Singular values below this fraction of the largest are not reported.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-14;

/// Collects the bits of `x` at `positions` into a compact index, with
/// `positions[k]` landing on bit `k`.
fn gather(x: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &s)| acc | ((x >> s) & 1) << k)
}

/// Matrix with rows indexed by the species in `rows` and columns by every
/// other species, both in ascending order.
pub fn matricize_rows(p: &StateVector, rows: &[usize]) -> Result<DMatrix<f64>> {
    let d = p.dim();
    let mut rows = rows.to_vec();
    rows.sort_unstable();
    rows.dedup();
    if let Some(&s) = rows.iter().find(|&&s| s >= d) {
        return Err(Error::InvalidPartitioning(format!(
            "species {s} out of range for d = {d}"
        )));
    }
    let cols: Vec<usize> = (0..d).filter(|s| rows.binary_search(s).is_err()).collect();
    let mut m = DMatrix::zeros(1 << rows.len(), 1 << cols.len());
    for (x, &v) in p.as_slice().iter().enumerate() {
        m[(gather(x, &rows), gather(x, &cols))] = v;
    }
    Ok(m)
}

/// Matrix with rows indexed by `block0` and columns by `block1`.
pub fn matricize(p: &StateVector, part: &Partitioning) -> Result<DMatrix<f64>> {
    if !part.covers(p.dim()) {
        return Err(Error::InvalidPartitioning(format!(
            "partitioning does not cover all {} species",
            p.dim()
        )));
    }
    matricize_rows(p, part.block0())
}

/// Singular values in descending order, dropping those below
/// [`SINGULAR_VALUE_FLOOR`] relative to the largest.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    sv.retain(|&s| s > 0.0 && s >= SINGULAR_VALUE_FLOOR * top);
    sv
}

/// Relative Frobenius error of keeping the leading `r` singular values.
pub fn truncation_error(sv: &[f64], r: usize) -> f64 {
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = sv.iter().skip(r).map(|s| s * s).sum();
    (tail / total).sqrt()
}

/// Smallest rank whose relative truncation error is at most `eps`.
pub fn rank_for(sv: &[f64], eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(0);
    }
    // Walk from the tail so the accumulated sum is accurate for tiny tails.
    let budget = eps * eps * total;
    let mut tail = 0.0;
    let mut r = sv.len();
    while r > 0 {
        let next = tail + sv[r - 1] * sv[r - 1];
        if next > budget {
            break;
        }
        tail = next;
        r -= 1;
    }
    Ok(r)
}

/// ε-rank and the reported singular values of `m`. A zero matrix has rank 0.
pub fn eps_rank(m: &DMatrix<f64>, eps: f64) -> Result<(usize, Vec<f64>)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    let sv = singular_values(m);
    Ok((rank_for(&sv, eps)?, sv))
}

/// `true` when each of the three ranks is at most the product of the other
/// two, which a Tucker core of that shape needs to have full multilinear
/// rank.
pub fn check_tucker_ranks(parent: usize, child0: usize, child1: usize) -> bool {
    parent <= child0 * child1 && child0 <= child1 * parent && child1 <= child0 * parent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRank {
    /// Child indices from the root.
    pub path: Vec<u8>,
    pub species: Vec<usize>,
    pub singular_values: Vec<f64>,
    pub eps_rank: usize,
    /// Relative Frobenius error at `eps_rank`.
    pub truncation_error: f64,
    /// For internal nodes, whether the node and children ranks satisfy
    /// [`check_tucker_ranks`]. The whole distribution counts as rank 1.
    pub tucker_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub eps: f64,
    /// Every node below the root, in preorder.
    pub nodes: Vec<NodeRank>,
    /// Tucker check at the root.
    pub root_tucker_ok: bool,
}

impl RankProfile {
    pub fn rank_of(&self, species: &[usize]) -> Option<usize> {
        let mut key = species.to_vec();
        key.sort_unstable();
        self.nodes.iter().find(|n| n.species == key).map(|n| n.eps_rank)
    }

    pub fn max_rank(&self) -> usize {
        self.nodes.iter().map(|n| n.eps_rank).max().unwrap_or(0)
    }

    pub fn tucker_ok(&self) -> bool {
        self.root_tucker_ok && self.nodes.iter().all(|n| n.tucker_ok != Some(false))
    }

    /// One line per node: `path,species,rank,sigma_1 sigma_2 ...`.
    pub fn singular_values_csv(&self, names: &[String]) -> String {
        let mut out = String::from("path,species,eps_rank,singular_values\n");
        for n in &self.nodes {
            let path: String = n.path.iter().map(|k| k.to_string()).collect();
            let species: Vec<&str> = n.species.iter().map(|&s| names[s].as_str()).collect();
            let sv: Vec<String> = n.singular_values.iter().map(|s| format!("{s:e}")).collect();
            out += &format!("{},{},{},{}\n", path, species.join(" "), n.eps_rank, sv.join(" "));
        }
        out
    }
}

pub fn tree_ranks(p: &StateVector, tree: &PartitionTree, eps: f64) -> Result<RankProfile> {
    tree_ranks_with(p, tree, eps, Exec::default())
}

/// ε-ranks for every node below the root. Each node is matricized with its
/// own species as rows and all remaining species as columns.
pub fn tree_ranks_with(p: &StateVector, tree: &PartitionTree, eps: f64, exec: Exec) -> Result<RankProfile> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    let d = p.dim();
    let mut covered = tree.species().to_vec();
    covered.sort_unstable();
    if covered != (0..d).collect::<Vec<_>>() {
        return Err(Error::InvalidPartitioning(format!(
            "tree does not cover exactly the {d} species"
        )));
    }
    let mut jobs = Vec::new();
    tree.walk(|n| {
        if !n.path.is_empty() {
            jobs.push((n.path.to_vec(), n.node.species.clone()));
        }
    });
    let analysed = exec.map_slice(&jobs, |(path, species)| -> Result<NodeRank> {
        let (rank, sv) = eps_rank(&matricize_rows(p, species)?, eps)?;
        Ok(NodeRank {
            path: path.clone(),
            species: species.clone(),
            truncation_error: truncation_error(&sv, rank),
            singular_values: sv,
            eps_rank: rank,
            tucker_ok: None,
        })
    });
    let mut nodes = analysed.into_iter().collect::<Result<Vec<_>>>()?;
    let rank_at = |nodes: &[NodeRank], path: &[u8]| nodes.iter().find(|n| n.path == path).map(|n| n.eps_rank);
    let mut checks = Vec::new();
    for (k, n) in nodes.iter().enumerate() {
        let mut c0 = n.path.clone();
        c0.push(0);
        let mut c1 = n.path.clone();
        c1.push(1);
        if let (Some(r0), Some(r1)) = (rank_at(&nodes, &c0), rank_at(&nodes, &c1)) {
            checks.push((k, check_tucker_ranks(n.eps_rank, r0, r1)));
        }
    }
    for (k, ok) in checks {
        nodes[k].tucker_ok = Some(ok);
    }
    let root_tucker_ok = match (rank_at(&nodes, &[0]), rank_at(&nodes, &[1])) {
        (Some(r0), Some(r1)) => check_tucker_ranks(1, r0, r1),
        _ => true,
    };
    Ok(RankProfile {
        eps,
        nodes,
        root_tucker_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub d: usize,
    pub rank: usize,
    pub dof: u128,
    pub bytes: u128,
    /// `bytes / (8 * 2^d)`.
    pub compression_ratio: f64,
    /// Ratio of the two sizes after rounding each to its displayed value.
    pub display_ratio: f64,
}

impl MemoryEstimate {
    pub fn full_bytes(&self) -> u128 {
        8u128 << self.d
    }

    pub fn display(&self) -> String {
        format_bytes(self.bytes)
    }

    pub fn full_display(&self) -> String {
        format_bytes(self.full_bytes())
    }
}

const UNITS: [&str; 7] = ["B", "kB", "MB", "GB", "TB", "PB", "EB"];

fn scaled(bytes: u128) -> (f64, usize) {
    let mut value = bytes as f64;
    let mut unit = 0;
    // Move up a unit whenever the rounded value would reach 1000.
    while value.round() >= 1000.0 && unit + 1 < UNITS.len() {
        value /= 1000.0;
        unit += 1;
    }
    (value.round(), unit)
}

/// Decimal units with the value rounded to an integer, e.g. `66 kB`.
pub fn format_bytes(bytes: u128) -> String {
    let (value, unit) = scaled(bytes);
    format!("{} {}", value, UNITS[unit])
}

/// The byte count that [`format_bytes`] displays.
pub fn displayed_bytes(bytes: u128) -> f64 {
    let (value, unit) = scaled(bytes);
    value * 1000f64.powi(unit as i32)
}

fn estimate(d: usize, rank: usize, dof: u128) -> MemoryEstimate {
    let bytes = 8 * dof;
    let full = 8u128 << d;
    MemoryEstimate {
        d,
        rank,
        dof,
        bytes,
        compression_ratio: bytes as f64 / full as f64,
        display_ratio: displayed_bytes(bytes) / displayed_bytes(full),
    }
}

/// Degrees of freedom of a tree with uniform rank `r`: `r^2` for the root
/// core, `r^3` for every other internal node and `r * 2^n` for a leaf of
/// `n` species. A single leaf is the full vector.
pub fn memory_for_sizes(sizes: &SizeTree, rank: usize) -> Result<MemoryEstimate> {
    if rank == 0 {
        return Err(Error::InvalidRank(rank));
    }
    let r = rank as u128;
    fn below(node: &SizeTree, r: u128) -> u128 {
        match node {
            SizeTree::Leaf(n) => r << n,
            SizeTree::Node(a, b) => r * r * r + below(a, r) + below(b, r),
        }
    }
    let d = sizes.size();
    let dof = match sizes {
        SizeTree::Leaf(n) => 1u128 << n,
        SizeTree::Node(a, b) => r * r + below(a, r) + below(b, r),
    };
    Ok(estimate(d, rank, dof))
}

pub fn memory_for_tree(tree: &PartitionTree, rank: usize) -> Result<MemoryEstimate> {
    memory_for_sizes(&tree.size_tree(), rank)
}

/// One-level estimate `r^2 + r (2^{d0} + 2^{d1})`.
pub fn memory_for_partitioning(part: &Partitioning, rank: usize) -> Result<MemoryEstimate> {
    memory_for_sizes(
        &SizeTree::Node(
            Box::new(SizeTree::Leaf(part.block0().len())),
            Box::new(SizeTree::Leaf(part.block1().len())),
        ),
        rank,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cme::{first_moments, integrate, InitialCondition};
    use crate::hierarchy::{PoolStats, TreeNode, TreeShape};
    use crate::network::tests::example;
    use crate::network::State;

    fn part(a: &[usize], b: &[usize]) -> Partitioning {
        Partitioning::new(a.to_vec(), b.to_vec()).unwrap()
    }

    fn snapshot_at_ten() -> StateVector {
        let net = example();
        let traj = integrate(&net, &InitialCondition::uniform(), 10.0, 0.01, &[10.0]).unwrap();
        let p = traj.snapshots.last().unwrap().clone();
        assert!((first_moments(&p)[0] - 0.25011981).abs() < 1e-7);
        p
    }

    #[test]
    fn matricize_two_species() {
        let p = StateVector::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = matricize(&p, &part(&[0], &[1])).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
        let t = matricize(&p, &part(&[1], &[0])).unwrap();
        assert_eq!(t, m.transpose());
        assert!(matricize(&p, &part(&[0], &[])).is_err());
    }

    #[test]
    fn matricize_preserves_norm() {
        let p = snapshot_at_ten();
        let m = matricize(&p, &part(&[0, 3], &[1, 2, 4])).unwrap();
        assert_eq!(m.shape(), (4, 8));
        let norm: f64 = p.as_slice().iter().map(|v| v * v).sum();
        assert!((m.norm_squared() - norm).abs() < 1e-15);
    }

    #[test]
    fn uniform_is_rank_one() {
        let p = StateVector::uniform(5);
        for a in [vec![0], vec![0, 1], vec![1, 3, 4]] {
            let (r, sv) = eps_rank(&matricize_rows(&p, &a).unwrap(), 1e-6).unwrap();
            assert_eq!(r, 1);
            assert_eq!(sv.len(), 1);
        }
    }

    #[test]
    fn product_is_rank_one() {
        let f = [0.1, 0.2, 0.3, 0.4];
        let g = [0.7, 0.3];
        // Rows are species {0,1}, columns species {2}.
        let p = (0..8).map(|x| f[x & 3] * g[x >> 2]).collect();
        let p = StateVector::new(3, p).unwrap();
        let sv = singular_values(&matricize(&p, &part(&[0, 1], &[2])).unwrap());
        assert!(sv.len() == 1 || sv[1] / sv[0] < 1e-12);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let (r, sv) = eps_rank(&DMatrix::zeros(4, 4), 1e-6).unwrap();
        assert_eq!(r, 0);
        assert!(sv.is_empty());
        assert!(eps_rank(&DMatrix::zeros(2, 2), 0.0).is_err());
        assert!(eps_rank(&DMatrix::zeros(2, 2), 1.0).is_err());
    }

    #[test]
    fn rank_from_singular_values() {
        let sv = [3.0, 4.0e-3, 1.0e-7];
        assert_eq!(rank_for(&sv, 0.5).unwrap(), 1);
        assert_eq!(rank_for(&sv, 1e-4).unwrap(), 2);
        assert_eq!(rank_for(&sv, 1e-9).unwrap(), 3);
        assert!((truncation_error(&[3.0, 4.0], 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn tucker_condition() {
        assert!(check_tucker_ranks(1, 1, 1));
        assert!(!check_tucker_ranks(5, 2, 2));
        assert!(check_tucker_ranks(4, 2, 2));
        assert!(check_tucker_ranks(2, 4, 2));
        assert!(!check_tucker_ranks(1, 2, 3));
    }

    #[test]
    fn example_ranks_at_ten() {
        let p = snapshot_at_ten();
        let cases: [(&[usize], usize); 11] = [
            (&[0, 1], 4),
            (&[2, 3, 4], 4),
            (&[0], 2),
            (&[1], 2),
            (&[2, 3], 2),
            (&[4], 2),
            (&[0, 1, 4], 2),
            (&[0, 4], 2),
            (&[1, 4], 4),
            (&[2], 2),
            (&[3], 2),
        ];
        for (rows, expected) in cases {
            let (r, _) = eps_rank(&matricize_rows(&p, rows).unwrap(), 1e-6).unwrap();
            assert_eq!(r, expected, "rows {rows:?}");
        }
    }

    #[test]
    fn two_level_tree_ranks() {
        let net = example();
        let p = snapshot_at_ten();
        let left = TreeNode::internal(
            &net,
            TreeNode::leaf(vec![0, 1]),
            TreeNode::leaf(vec![4]),
            PoolStats::default(),
        )
        .unwrap();
        let right = TreeNode::internal(
            &net,
            TreeNode::leaf(vec![2]),
            TreeNode::leaf(vec![3]),
            PoolStats::default(),
        )
        .unwrap();
        let root = TreeNode::internal(&net, left, right, PoolStats::default()).unwrap();
        let tree = PartitionTree { root };
        let profile = tree_ranks(&p, &tree, 1e-6).unwrap();
        let ranks: Vec<(Vec<u8>, usize)> = profile
            .nodes
            .iter()
            .map(|n| (n.path.clone(), n.eps_rank))
            .collect();
        assert_eq!(
            ranks,
            [
                (vec![0], 2),
                (vec![0, 0], 4),
                (vec![0, 1], 2),
                (vec![1], 2),
                (vec![1, 0], 2),
                (vec![1, 1], 2)
            ]
        );
        assert_eq!(profile.nodes[0].tucker_ok, Some(true));
        assert!(profile.tucker_ok());
        let seq = tree_ranks_with(&p, &tree, 1e-6, Exec::Sequential).unwrap();
        assert_eq!(seq, profile);
        let csv = profile.singular_values_csv(net.names());
        assert!(csv.starts_with("path,species,eps_rank,singular_values\n0,S0 S1 S4,2,"));
    }

    #[test]
    fn depth_one_tree_matches_one_level() {
        let net = example();
        let p = snapshot_at_ten();
        let split = part(&[0, 1], &[2, 3, 4]);
        let tree = PartitionTree::from_partitioning(&net, &split, PoolStats::default()).unwrap();
        let profile = tree_ranks(&p, &tree, 1e-6).unwrap();
        let (r, sv) = eps_rank(&matricize(&p, &split).unwrap(), 1e-6).unwrap();
        assert_eq!(profile.nodes[0].eps_rank, r);
        assert_eq!(profile.nodes[1].eps_rank, r);
        assert_eq!(profile.nodes[0].singular_values.len(), sv.len());
        let delta = StateVector::delta(5, State(3));
        assert_eq!(tree_ranks(&delta, &tree, 1e-6).unwrap().max_rank(), 1);
    }

    #[test]
    fn one_level_formula() {
        for (d, r) in [(22usize, 16usize), (10, 3), (7, 1)] {
            let split = part(&(0..d / 2).collect::<Vec<_>>(), &(d / 2..d).collect::<Vec<_>>());
            let m = memory_for_partitioning(&split, r).unwrap();
            let r = r as u128;
            assert_eq!(m.dof, r * r + r * ((1u128 << (d / 2)) + (1u128 << (d - d / 2))));
        }
        assert!(memory_for_partitioning(&part(&[0], &[1]), 0).is_err());
    }

    #[test]
    fn balanced_table_values() {
        let one = |d, r| memory_for_sizes(&SizeTree::balanced(d, &TreeShape::Levels(1)).unwrap(), r).unwrap();
        let two = |d, r| memory_for_sizes(&SizeTree::balanced(d, &TreeShape::Levels(2)).unwrap(), r).unwrap();
        assert_eq!(
            [2, 4, 8, 16].map(|r| one(22, r).bytes),
            [65568, 131200, 262656, 526336]
        );
        assert_eq!([5, 10, 20].map(|r| two(34, r).dof), [7955, 17460, 47120]);
        assert_eq!([5, 10, 20].map(|r| two(41, r).dof), [25875, 53300, 118800]);
        let m = one(22, 16);
        assert_eq!(m.display(), "526 kB");
        assert_eq!(m.full_display(), "34 MB");
        assert_eq!(format!("{:.2e}", m.display_ratio), "1.55e-2");
        assert_eq!(two(34, 5).display(), "64 kB");
        assert_eq!(format!("{:.2e}", two(34, 5).display_ratio), "4.67e-7");
        assert_eq!(two(41, 20).display(), "950 kB");
        assert_eq!(two(41, 20).full_display(), "18 TB");
        assert_eq!(format!("{:.2e}", two(41, 20).display_ratio), "5.28e-8");
    }

    #[test]
    fn byte_formatting() {
        assert_eq!(format_bytes(0), "0 B");
        assert_eq!(format_bytes(999), "999 B");
        assert_eq!(format_bytes(999_600), "1 MB");
        assert_eq!(format_bytes(65568), "66 kB");
        assert_eq!(format_bytes(8 << 34), "137 GB");
        assert_eq!(displayed_bytes(65568), 66_000.0);
    }
}
