//! Seeded random networks for tests, benchmarks and scale checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::WeightedGraph;
use crate::network::{BooleanNetwork, RuleExpr};

/// Random expression of depth at most `depth` over `vars`.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, vars: &[usize], depth: usize) -> RuleExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        return RuleExpr::Var(*vars.choose(rng).expect("non-empty vars"));
    }
    match rng.gen_range(0..3) {
        0 => RuleExpr::not(random_expr(rng, vars, depth - 1)),
        1 => RuleExpr::and(
            random_expr(rng, vars, depth - 1),
            random_expr(rng, vars, depth - 1),
        ),
        _ => RuleExpr::or(
            random_expr(rng, vars, depth - 1),
            random_expr(rng, vars, depth - 1),
        ),
    }
}

/// Network of `d` species named `s0..`. Each rule draws up to `max_deps`
/// candidate inputs (its own species with probability 1/2, the rest at
/// random) and combines them in an expression of depth at most `depth`.
pub fn random_network(d: usize, max_deps: usize, depth: usize, seed: u64) -> BooleanNetwork {
    assert!(d >= 1 && max_deps >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..d).map(|k| format!("s{k}")).collect();
    let rules = (0..d)
        .map(|i| {
            let k = rng.gen_range(1..=max_deps.min(d));
            let mut pool: Vec<usize> = (0..d).filter(|&j| j != i).collect();
            pool.shuffle(&mut rng);
            let mut vars: Vec<usize> = pool.into_iter().take(k).collect();
            if vars.is_empty() || rng.gen_bool(0.5) {
                vars.push(i);
            }
            random_expr(&mut rng, &vars, depth)
        })
        .collect();
    BooleanNetwork::new(names, rules).expect("generated rules are valid")
}

/// Sparse random network with ring locality, shaped like signaling
/// models: each rule reads one to `max_deps` nearby species.
pub fn modular_network(d: usize, max_deps: usize, seed: u64) -> BooleanNetwork {
    assert!(d >= 2 && max_deps >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..d).map(|k| format!("s{k}")).collect();
    let rules = (0..d)
        .map(|i| {
            let k = rng.gen_range(1..=max_deps);
            let mut vars: Vec<usize> = (0..k)
                .map(|_| {
                    let offset = rng.gen_range(1..=4);
                    if rng.gen_bool(0.5) {
                        (i + offset) % d
                    } else {
                        (i + d - offset % d) % d
                    }
                })
                .filter(|&j| j != i)
                .collect();
            vars.sort_unstable();
            vars.dedup();
            if vars.is_empty() || rng.gen_bool(0.3) {
                vars.push(i);
            }
            random_expr(&mut rng, &vars, 3)
        })
        .collect();
    BooleanNetwork::new(names, rules).expect("generated rules are valid")
}

/// Random undirected graph on `n` nodes where each pair is joined with
/// probability `density` and weight 1 or 2.
pub fn random_graph(n: usize, density: f64, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(density) {
                edges.push((u, v, rng.gen_range(1..=2)));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_network(8, 3, 3, 5), random_network(8, 3, 3, 5));
        let net = modular_network(41, 4, 1);
        assert_eq!(net.len(), 41);
        assert!((0..41).all(|i| net.syntactic_deps(i).len() <= 5));
        assert!(net.rules().iter().all(|r| r.depth() <= 3));
    }
}
