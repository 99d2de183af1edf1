//! Information entropy of severed reaction pathways.
//!
//! For a rule `B_i` and a split of the species into the block holding
//! `S_i` and its complement, `p_i(x_i)` is the probability that `B_i` fires
//! when the in-block species are fixed to `x_i` and the complement species
//! are uniformly random. The rule entropy `h_i` is the binary Shannon
//! entropy of `p_i` averaged uniformly over `x_i`, and the total entropy
//! `H` sums `h_i` over all rules.
//!
//! Only the rule's syntactic dependencies are enumerated. Species outside
//! the dependency set do not change `B_i`, so averaging over them is the
//! identity and the cost per rule is `O(2^deps)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Partitioning};
use crate::kl::PoolEntry;
use crate::network::{BooleanNetwork, State, TruthTable};
use crate::par::Exec;

/// Species count accepted by [`brute_force_entropy`].
pub const BRUTE_FORCE_LIMIT: usize = 16;

/// `-q log2 q - (1-q) log2 (1-q)` with `0 log2 0 = 0`.
pub fn binary_entropy(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleEntropy {
    pub rule: usize,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub per_rule: Vec<RuleEntropy>,
    pub total: f64,
    /// Directed `(from, to)` pathways severed by the split, ordered by
    /// `(to, from)`.
    pub cut_edges: Vec<Edge>,
}

impl EntropyReport {
    pub fn cuts(&self) -> usize {
        self.cut_edges.len()
    }

    pub fn rule_entropy(&self, rule: usize) -> Option<f64> {
        self.per_rule.iter().find(|r| r.rule == rule).map(|r| r.entropy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub entry: PoolEntry,
    pub report: EntropyReport,
}

/// Spreads the low bits of `value` onto the bit positions in `positions`.
#[inline]
fn scatter(value: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &pos)| acc | (((value >> k) & 1) << pos))
}

/// Firing probability for one in-block row, averaging the table over all
/// assignments of the complement positions.
fn firing_probability(table: &TruthTable, base_row: usize, complement: &[usize]) -> f64 {
    let n = 1usize << complement.len();
    let fired = (0..n)
        .filter(|&c| table.rows[base_row | scatter(c, complement)])
        .count();
    fired as f64 / n as f64
}

/// Mean binary entropy over in-block assignments. `inside` and `complement`
/// are table positions and together must cover every dependency.
fn split_entropy(table: &TruthTable, inside: &[usize], complement: &[usize]) -> f64 {
    debug_assert_eq!(inside.len() + complement.len(), table.deps.len());
    let n = 1usize << inside.len();
    let sum: f64 = (0..n)
        .map(|a| binary_entropy(firing_probability(table, scatter(a, inside), complement)))
        .sum();
    sum / n as f64
}

/// Splits the positions of `table.deps` into those in `own` and the rest.
fn classify(table: &TruthTable, own: &[usize]) -> (Vec<usize>, Vec<usize>) {
    (0..table.deps.len()).partition(|&m| own.binary_search(&table.deps[m]).is_ok())
}

fn own_block(p: &Partitioning, i: usize) -> Result<&[usize]> {
    match p.block_of(i) {
        Some(b) => Ok(p.blocks()[b]),
        None => Err(Error::InvalidPartitioning(format!(
            "species {i} is not in the partitioning"
        ))),
    }
}

/// `p_i(x_i)`: probability that rule `i` fires with its in-block
/// dependencies fixed by `x_in` and every other dependency uniformly random.
///
/// `x_in` must assign every dependency of rule `i` that shares a block with
/// `S_i` and may only name species of that block.
pub fn rule_probability(
    net: &BooleanNetwork,
    i: usize,
    p: &Partitioning,
    x_in: &[(usize, bool)],
) -> Result<f64> {
    net.check_rule(i)?;
    let own = own_block(p, i)?;
    if let Some((s, _)) = x_in.iter().find(|(s, _)| own.binary_search(s).is_err()) {
        return Err(Error::InvalidAssignment(format!(
            "species {s} is not in the block of species {i}"
        )));
    }
    let table = net.table(i);
    let (inside, complement) = classify(table, own);
    let mut base = 0;
    for &m in &inside {
        let dep = table.deps[m];
        let (_, v) = x_in
            .iter()
            .find(|(s, _)| *s == dep)
            .ok_or_else(|| Error::InvalidAssignment(format!("in-block dependency {dep} is not assigned")))?;
        base |= usize::from(*v) << m;
    }
    Ok(firing_probability(table, base, &complement))
}

/// `h_i` for the block of `p` holding species `i`. Dependencies outside
/// `p` are averaged like complement-side species.
pub fn rule_entropy(net: &BooleanNetwork, i: usize, p: &Partitioning) -> Result<f64> {
    net.check_rule(i)?;
    let own = own_block(p, i)?;
    let table = net.table(i);
    let (inside, complement) = classify(table, own);
    Ok(split_entropy(table, &inside, &complement))
}

/// Entropy of splitting the tree node `tau` by `p`.
///
/// Every rule whose species lies in `tau` is considered. A rule contributes
/// only if `p` severs at least one of its dependencies inside `tau`; its
/// dependencies outside `tau` were severed at an ancestor and are averaged
/// together with the sibling-block dependencies. With `tau` equal to all
/// species this is the one-level total entropy.
pub fn node_entropy(net: &BooleanNetwork, tau: &[usize], p: &Partitioning) -> Result<EntropyReport> {
    let mut tau = tau.to_vec();
    tau.sort_unstable();
    tau.dedup();
    if let Some(&s) = tau.iter().find(|&&s| s >= net.len()) {
        return Err(Error::InvalidPartitioning(format!(
            "species {s} is not part of the network"
        )));
    }
    if p.species() != tau {
        return Err(Error::InvalidPartitioning(
            "split does not cover the node's species".into(),
        ));
    }

    let mut per_rule = Vec::with_capacity(tau.len());
    let mut cut_edges = Vec::new();
    let mut total = 0.0;
    for &i in &tau {
        let own = own_block(p, i)?;
        let sibling = p.blocks()[1 - p.block_of(i).expect("i in tau")];
        let table = net.table(i);
        let mut severed = false;
        for &j in &table.deps {
            if j != i && sibling.binary_search(&j).is_ok() {
                cut_edges.push((j, i));
                severed = true;
            }
        }
        let h = if severed {
            let (inside, complement) = classify(table, own);
            split_entropy(table, &inside, &complement)
        } else {
            0.0
        };
        total += h;
        per_rule.push(RuleEntropy { rule: i, entropy: h });
    }
    Ok(EntropyReport {
        per_rule,
        total,
        cut_edges,
    })
}

/// Total entropy `H` of a bipartition of all species.
pub fn total_entropy(net: &BooleanNetwork, p: &Partitioning) -> Result<EntropyReport> {
    if !p.covers(net.len()) {
        return Err(Error::InvalidPartitioning(
            "partitioning does not cover all species".into(),
        ));
    }
    let all: Vec<usize> = (0..net.len()).collect();
    node_entropy(net, &all, p)
}

/// Ranks a pool by `(H, cut cost, canonical order)`; the first entry is the
/// selected split.
pub fn score_pool(net: &BooleanNetwork, pool: &[PoolEntry]) -> Result<Vec<ScoredEntry>> {
    score_pool_with(pool, Exec::default(), |p| total_entropy(net, p))
}

/// Like [`score_pool`] with a custom scorer, e.g. [`node_entropy`] for an
/// inner tree node.
pub fn score_pool_with<F>(pool: &[PoolEntry], exec: Exec, score: F) -> Result<Vec<ScoredEntry>>
where
    F: Fn(&Partitioning) -> Result<EntropyReport> + Sync + Send,
{
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let reports = exec.map_slice(pool, |e| score(&e.partitioning));
    let mut scored = pool
        .iter()
        .zip(reports)
        .map(|(entry, report)| {
            Ok(ScoredEntry {
                entry: entry.clone(),
                report: report?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        a.report
            .total
            .total_cmp(&b.report.total)
            .then_with(|| a.entry.cut_cost.cmp(&b.entry.cut_cost))
            .then_with(|| a.entry.partitioning.cmp(&b.entry.partitioning))
    });
    Ok(scored)
}

/// Reference evaluation of `H` straight from the definition: every rule is
/// evaluated on full states, enumerating all species of both blocks.
pub fn brute_force_entropy(net: &BooleanNetwork, p: &Partitioning) -> Result<f64> {
    let d = net.len();
    if d > BRUTE_FORCE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "network",
            size: d,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if !p.covers(d) {
        return Err(Error::InvalidPartitioning(
            "partitioning does not cover all species".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..d {
        let b = p.block_of(i).expect("covered");
        let own = p.blocks()[b];
        let other = p.blocks()[1 - b];
        let rule = net.rule(i)?;
        let mut sum = 0.0;
        for a in 0..1u64 << own.len() {
            let base = own
                .iter()
                .enumerate()
                .fold(State(0), |x, (k, &s)| x.with(s, (a >> k) & 1 == 1));
            let mut fired = 0u64;
            for c in 0..1u64 << other.len() {
                let x = other
                    .iter()
                    .enumerate()
                    .fold(base, |x, (k, &s)| x.with(s, (c >> k) & 1 == 1));
                fired += u64::from(rule.eval(x));
            }
            sum += binary_entropy(fired as f64 / (1u64 << other.len()) as f64);
        }
        total += sum / (1u64 << own.len()) as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ReactionGraph, WeightedGraph};
    use crate::kl::exhaustive_pool;
    use crate::network::{parse_network, tests::example};

    fn part(a: &[usize], b: &[usize]) -> Partitioning {
        Partitioning::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
        assert!((binary_entropy(0.25) - binary_entropy(0.75)).abs() < 1e-15);
    }

    #[test]
    fn worked_rule_entropies() {
        let net = example();
        // S0 and S1 apart, S2 and S4 apart, S2 and S3 apart.
        let p = part(&[0, 2], &[1, 3, 4]);
        assert_eq!(rule_entropy(&net, 0, &p).unwrap(), 1.0);
        assert_eq!(rule_entropy(&net, 2, &p).unwrap(), 0.0);
        assert_eq!(rule_entropy(&net, 3, &p).unwrap(), 0.5);
    }

    #[test]
    fn worked_probabilities() {
        let net = example();
        let p = part(&[0, 1, 2], &[3, 4]);
        assert_eq!(rule_probability(&net, 3, &p, &[(3, true)]).unwrap(), 0.5);
        assert_eq!(rule_probability(&net, 3, &p, &[(3, false)]).unwrap(), 0.0);
        assert_eq!(rule_probability(&net, 2, &p, &[(2, false)]).unwrap(), 0.0);
        assert_eq!(rule_probability(&net, 2, &p, &[(2, true)]).unwrap(), 1.0);
        // No complement dependencies: the rule is determined.
        let q = rule_probability(&net, 0, &p, &[(1, true)]).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn probability_errors() {
        let net = example();
        let p = part(&[0, 1, 2], &[3, 4]);
        assert!(matches!(
            rule_probability(&net, 3, &p, &[(3, true), (0, true)]),
            Err(Error::InvalidAssignment(_))
        ));
        assert!(matches!(
            rule_probability(&net, 3, &p, &[]),
            Err(Error::InvalidAssignment(_))
        ));
        assert!(matches!(
            rule_probability(&net, 9, &p, &[]),
            Err(Error::InvalidRule { .. })
        ));
    }

    #[test]
    fn figure_split_total() {
        let net = example();
        let report = total_entropy(&net, &part(&[0, 1], &[2, 3, 4])).unwrap();
        let expected = binary_entropy(0.75) + 0.5;
        assert!((report.total - expected).abs() < 1e-15);
        assert_eq!(report.cut_edges, [(2, 1), (3, 1), (1, 4)]);
        assert_eq!(report.rule_entropy(4), Some(0.5));
        assert_eq!(report.rule_entropy(0), Some(0.0));
    }

    #[test]
    fn zero_cut_is_zero() {
        let net = parse_network("A, B\nB, A\nC, D\nD, C").unwrap();
        let report = total_entropy(&net, &part(&[0, 1], &[2, 3])).unwrap();
        assert_eq!(report.total, 0.0);
        assert!(report.cut_edges.is_empty());
        assert_eq!(brute_force_entropy(&net, &part(&[0, 1], &[2, 3])).unwrap(), 0.0);
    }

    #[test]
    fn negation_pairs_reach_maximum() {
        // d/2 pairs of mutual negations, every pair split: H = d.
        let net = parse_network("A, !B\nB, !A\nC, !D\nD, !C\nE, !F\nF, !E").unwrap();
        let report = total_entropy(&net, &part(&[0, 2, 4], &[1, 3, 5])).unwrap();
        assert_eq!(report.total, 6.0);
    }

    #[test]
    fn direction_matters() {
        // Rule 0 reads S1 and S2. Keeping S2 next to S0 pins half the
        // information; pairing S1 with S0 instead changes h_0.
        let net = parse_network("A, !B & C\nB, B\nC, C\nD, D").unwrap();
        let h_a = rule_entropy(&net, 0, &part(&[0, 2], &[1, 3])).unwrap();
        let h_b = rule_entropy(&net, 0, &part(&[0, 3], &[1, 2])).unwrap();
        assert_ne!(h_a, h_b);
    }

    #[test]
    fn pool_ranking() {
        let net = example();
        let wg = WeightedGraph::from_reaction_graph(&ReactionGraph::from_network(&net));
        let pool = exhaustive_pool(&wg).unwrap();
        let scored = score_pool(&net, &pool).unwrap();
        assert_eq!(scored.len(), 10);
        assert_eq!(scored[0].entry.partitioning, part(&[0, 1, 4], &[2, 3]));
        assert!(scored.windows(2).all(|w| w[0].report.total <= w[1].report.total));
        assert_eq!(score_pool(&net, &[]).unwrap_err(), Error::EmptyPool);
        let single = score_pool(&net, &pool[3..4]).unwrap();
        assert_eq!(single[0].entry, pool[3]);
    }

    #[test]
    fn equal_entropy_prefers_fewer_cuts() {
        let net = example();
        let a = PoolEntry {
            partitioning: part(&[0, 1, 3], &[2, 4]),
            cut_cost: 3,
            multiplicity: 1,
        };
        let b = PoolEntry {
            partitioning: part(&[0, 1, 2], &[3, 4]),
            cut_cost: 4,
            multiplicity: 1,
        };
        // Both have H = 1.5.
        let scored = score_pool(&net, &[b, a.clone()]).unwrap();
        assert_eq!(scored[0].report.total, scored[1].report.total);
        assert_eq!(scored[0].entry, a);
    }

    #[test]
    fn brute_force_guard() {
        let names: Vec<String> = (0..17).map(|k| format!("s{k}")).collect();
        let rules = (0..17).map(crate::network::RuleExpr::var).collect();
        let net = BooleanNetwork::new(names, rules).unwrap();
        let p = part(&(0..9).collect::<Vec<_>>(), &(9..17).collect::<Vec<_>>());
        assert!(matches!(
            brute_force_entropy(&net, &p),
            Err(Error::GuardExceeded { .. })
        ));
    }
}
