//! Weighted Kernighan-Lin bipartitioning and candidate pools.
//!
//! A pool is built from independent restarts: each run draws a random
//! balanced split from its own RNG stream, refines it with classic
//! Kernighan-Lin passes and canonicalizes the result. Runs are merged into
//! distinct partitionings with multiplicities. Because every run owns a
//! stream derived from `(master seed, run index)`, the pool does not depend
//! on how runs are scheduled across threads.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Partitioning, WeightedGraph};
use crate::par::Exec;

/// Largest graph accepted by [`exhaustive_pool`].
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Master seed; run `k` draws from stream `k` of a ChaCha8 generator keyed
/// by the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RandomSource {
    pub master_seed: u64,
}

impl RandomSource {
    pub fn new(master_seed: u64) -> Self {
        RandomSource { master_seed }
    }

    pub fn stream(&self, run_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(run_index);
        rng
    }

    /// Independent source for a labelled sub-task (e.g. a tree node).
    pub fn derive(&self, label: u64) -> RandomSource {
        RandomSource::new(splitmix64(self.master_seed ^ splitmix64(label)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub partitioning: Partitioning,
    pub cut_cost: u64,
    pub multiplicity: usize,
}

/// Uniformly random split with `ceil(n/2)` species in the first block.
pub fn random_balanced<R: Rng + ?Sized>(nodes: &[usize], rng: &mut R) -> Result<Partitioning> {
    if nodes.len() < 2 {
        return Err(Error::TooFewNodes(nodes.len()));
    }
    let mut shuffled = nodes.to_vec();
    shuffled.shuffle(rng);
    let half = nodes.len().div_ceil(2);
    let block1 = shuffled.split_off(half);
    Partitioning::new(shuffled, block1)
}

/// Result of [`kl_refine_traced`]: the refined split and the cut cost
/// before the first pass and after every improving pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KlOutcome {
    pub partitioning: Partitioning,
    pub pass_costs: Vec<u64>,
}

/// Refines `p0` with Kernighan-Lin passes until a pass brings no strictly
/// positive gain. Block sizes are preserved.
pub fn kl_refine(wg: &WeightedGraph, p0: &Partitioning) -> Result<Partitioning> {
    kl_refine_traced(wg, p0).map(|o| o.partitioning)
}

pub fn kl_refine_traced(wg: &WeightedGraph, p0: &Partitioning) -> Result<KlOutcome> {
    let n = wg.node_count();
    if p0.len() != n || !wg.nodes().iter().all(|&s| p0.contains(s)) {
        return Err(Error::InvalidPartitioning(
            "partitioning does not cover the graph".into(),
        ));
    }
    let mut weights = vec![0i64; n * n];
    for u in 0..n {
        for &(v, w) in wg.neighbors(u) {
            weights[u * n + v] = i64::from(w);
        }
    }
    let mut side: Vec<u8> = wg
        .nodes()
        .iter()
        .map(|&s| p0.block_of(s).expect("covered") as u8)
        .collect();

    let mut cost = wg.cut_cost(p0);
    let mut pass_costs = vec![cost];
    loop {
        let gain = kl_pass(n, &weights, &mut side);
        if gain <= 0 {
            break;
        }
        cost -= gain as u64;
        pass_costs.push(cost);
    }

    let mut blocks = [Vec::new(), Vec::new()];
    for (u, &s) in side.iter().enumerate() {
        blocks[s as usize].push(wg.nodes()[u]);
    }
    let [block0, block1] = blocks;
    Ok(KlOutcome {
        partitioning: Partitioning::new(block0, block1)?,
        pass_costs,
    })
}

/// One full pass. Applies the best strictly positive prefix of tentative
/// swaps to `side` and returns its gain (0 if nothing was applied).
fn kl_pass(n: usize, w: &[i64], side: &mut [u8]) -> i64 {
    // D(v) = external - internal weight.
    let mut diff: Vec<i64> = (0..n)
        .map(|u| {
            (0..n)
                .map(|v| {
                    if side[u] == side[v] {
                        -w[u * n + v]
                    } else {
                        w[u * n + v]
                    }
                })
                .sum()
        })
        .collect();
    let mut locked = vec![false; n];
    let count0 = side.iter().filter(|&&s| s == 0).count();
    let steps = count0.min(n - count0);

    let mut swaps = Vec::with_capacity(steps);
    let mut cumulative = 0i64;
    let mut best_prefix = (0i64, 0usize);
    for _ in 0..steps {
        let mut best: Option<(i64, usize, usize)> = None;
        for a in (0..n).filter(|&a| side[a] == 0 && !locked[a]) {
            for b in (0..n).filter(|&b| side[b] == 1 && !locked[b]) {
                let g = diff[a] + diff[b] - 2 * w[a * n + b];
                // Strict comparison keeps the lexicographically smallest pair.
                if best.is_none_or(|(bg, _, _)| g > bg) {
                    best = Some((g, a, b));
                }
            }
        }
        let (g, a, b) = best.expect("unlocked pair exists");
        locked[a] = true;
        locked[b] = true;
        for x in (0..n).filter(|&x| !locked[x]) {
            let (wa, wb) = (w[x * n + a], w[x * n + b]);
            if side[x] == 0 {
                diff[x] += 2 * wa - 2 * wb;
            } else {
                diff[x] += 2 * wb - 2 * wa;
            }
        }
        swaps.push((a, b));
        cumulative += g;
        if cumulative > best_prefix.0 {
            best_prefix = (cumulative, swaps.len());
        }
    }

    let (gain, k) = best_prefix;
    if gain > 0 {
        for &(a, b) in &swaps[..k] {
            side[a] = 1;
            side[b] = 0;
        }
    }
    gain
}

fn sort_pool(entries: &mut [PoolEntry]) {
    entries.sort_by(|x, y| {
        x.cut_cost
            .cmp(&y.cut_cost)
            .then_with(|| x.partitioning.cmp(&y.partitioning))
    });
}

/// Pool of distinct canonical partitionings found by `n_runs` seeded
/// Kernighan-Lin restarts, sorted by `(cut cost, canonical order)`.
pub fn generate_pool(wg: &WeightedGraph, n_runs: usize, source: RandomSource) -> Result<Vec<PoolEntry>> {
    generate_pool_with(wg, n_runs, source, Exec::default())
}

pub fn generate_pool_with(
    wg: &WeightedGraph,
    n_runs: usize,
    source: RandomSource,
    exec: Exec,
) -> Result<Vec<PoolEntry>> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("number of runs must be at least 1".into()));
    }
    if wg.node_count() < 2 {
        return Err(Error::TooFewNodes(wg.node_count()));
    }
    let results = exec.map_range(n_runs, |run| -> Result<Partitioning> {
        let mut rng = source.stream(run as u64);
        let p0 = random_balanced(wg.nodes(), &mut rng)?;
        Ok(kl_refine(wg, &p0)?.canonical())
    });

    let mut counts: BTreeMap<Partitioning, usize> = BTreeMap::new();
    for p in results {
        *counts.entry(p?).or_default() += 1;
    }
    let mut entries: Vec<PoolEntry> = counts
        .into_iter()
        .map(|(partitioning, multiplicity)| PoolEntry {
            cut_cost: wg.cut_cost(&partitioning),
            partitioning,
            multiplicity,
        })
        .collect();
    sort_pool(&mut entries);
    Ok(entries)
}

/// Every canonical balanced split of the graph with its exact cut cost.
pub fn exhaustive_pool(wg: &WeightedGraph) -> Result<Vec<PoolEntry>> {
    let n = wg.node_count();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "graph",
            size: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    let half = n.div_ceil(2) as u32;
    let nodes = wg.nodes();
    let mut entries = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != half {
            continue;
        }
        let (block0, block1): (Vec<usize>, Vec<usize>) =
            (0..n)
                .map(|k| (k, nodes[k]))
                .fold((vec![], vec![]), |(mut a, mut b), (k, s)| {
                    if mask >> k & 1 == 1 {
                        a.push(s)
                    } else {
                        b.push(s)
                    }
                    (a, b)
                });
        let p = Partitioning::new(block0, block1)?;
        // Equal halves appear twice; keep the canonical copy only.
        if p.is_canonical() {
            entries.push(PoolEntry {
                cut_cost: wg.cut_cost(&p),
                partitioning: p,
                multiplicity: 1,
            });
        }
    }
    sort_pool(&mut entries);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ReactionGraph;
    use crate::network::tests::example;

    pub(crate) fn two_triangles() -> WeightedGraph {
        WeightedGraph::from_edges(
            6,
            &[
                (0, 1, 1),
                (1, 2, 1),
                (0, 2, 1),
                (3, 4, 1),
                (4, 5, 1),
                (3, 5, 1),
                (2, 3, 1),
            ],
        )
    }

    fn part(a: &[usize], b: &[usize]) -> Partitioning {
        Partitioning::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn random_balanced_sizes() {
        let mut rng = RandomSource::new(3).stream(0);
        let p = random_balanced(&[0, 1, 2, 3, 4], &mut rng).unwrap();
        assert_eq!((p.block0().len(), p.block1().len()), (3, 2));
        let p = random_balanced(&[7, 9], &mut rng).unwrap();
        assert_eq!((p.block0().len(), p.block1().len()), (1, 1));
        assert_eq!(
            random_balanced(&[1], &mut rng).unwrap_err(),
            Error::TooFewNodes(1)
        );
    }

    #[test]
    fn streams_are_reproducible() {
        let s = RandomSource::new(42);
        let a: u64 = s.stream(5).gen();
        let b: u64 = s.stream(5).gen();
        let c: u64 = s.stream(6).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn two_triangles_reach_bridge_from_every_start() {
        let wg = two_triangles();
        for entry in exhaustive_pool(&wg).unwrap() {
            let out = kl_refine(&wg, &entry.partitioning).unwrap();
            assert_eq!(wg.cut_cost(&out), 1, "start {:?}", entry.partitioning);
        }
    }

    #[test]
    fn local_optimum_is_fixed_point() {
        let wg = two_triangles();
        let p = part(&[0, 1, 2], &[3, 4, 5]);
        let out = kl_refine_traced(&wg, &p).unwrap();
        assert_eq!(out.partitioning, p);
        assert_eq!(out.pass_costs, [1]);
    }

    #[test]
    fn edgeless_graph_unchanged() {
        let wg = WeightedGraph::from_edges(4, &[]);
        let p = part(&[0, 3], &[1, 2]);
        let out = kl_refine_traced(&wg, &p).unwrap();
        assert_eq!(out.partitioning, p);
        assert_eq!(out.pass_costs, [0]);
    }

    #[test]
    fn refine_rejects_uncovered() {
        let wg = two_triangles();
        assert!(kl_refine(&wg, &part(&[0, 1], &[2, 3])).is_err());
    }

    #[test]
    fn exhaustive_counts() {
        let wg = |n| WeightedGraph::from_edges(n, &[]);
        assert_eq!(exhaustive_pool(&wg(5)).unwrap().len(), 10);
        assert_eq!(exhaustive_pool(&wg(4)).unwrap().len(), 3);
        assert_eq!(exhaustive_pool(&wg(2)).unwrap().len(), 1);
        assert!(matches!(
            exhaustive_pool(&wg(21)),
            Err(Error::GuardExceeded { .. })
        ));
        let pool = exhaustive_pool(&two_triangles()).unwrap();
        assert_eq!(pool.len(), 10);
        assert_eq!(pool[0].cut_cost, 1);
        assert_eq!(pool[0].partitioning, part(&[0, 1, 2], &[3, 4, 5]));
    }

    #[test]
    fn single_run_pool() {
        let wg = WeightedGraph::from_reaction_graph(&ReactionGraph::from_network(&example()));
        let pool = generate_pool(&wg, 1, RandomSource::new(9)).unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].multiplicity, 1);
        assert!(generate_pool(&wg, 0, RandomSource::new(9)).is_err());
    }

    #[test]
    fn pool_is_schedule_independent() {
        let wg = WeightedGraph::from_reaction_graph(&ReactionGraph::from_network(&example()));
        let a = generate_pool_with(&wg, 300, RandomSource::new(1), Exec::Sequential).unwrap();
        let b = generate_pool_with(&wg, 300, RandomSource::new(1), Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|e| e.multiplicity).sum::<usize>(), 300);
        assert!(a.windows(2).all(|w| w[0].cut_cost <= w[1].cut_cost));
    }
}
