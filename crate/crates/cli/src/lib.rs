//! Command-line pipeline: parse a Boolean network, partition it, solve its
//! master equation on small instances and audit the low-rank structure of
//! the solution.

pub mod error;
pub mod formats;

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bnpart_core::cme::{self, InitialCondition, SolverConfig, Trajectory};
use bnpart_core::entropy::{node_entropy, score_pool_with};
use bnpart_core::graph::{ReactionGraph, WeightedGraph};
use bnpart_core::hierarchy::{
    auto_partition_with, tree_cut_count, tree_total_entropy, PartitionTree, PoolMode, SizeTree, TreeShape,
};
use bnpart_core::kl::{exhaustive_pool, generate_pool_with, RandomSource};
use bnpart_core::rank::{self, eps_rank, matricize, memory_for_sizes};
use bnpart_core::{BooleanNetwork, Exec};
use clap::{Args, Parser, Subcommand};

use error::{CliError, CliResult};
use formats::*;

#[derive(Debug, Parser)]
#[command(
    name = "bnpart",
    version,
    about = "Entropy-guided partitioning of Boolean reaction networks"
)]
pub struct Cli {
    /// Worker threads (0 uses all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print species, dependencies and the reaction graph.
    Info(InfoArgs),
    /// Build a partition tree by KL pools and entropy scoring.
    Partition(PartitionArgs),
    /// Integrate the master equation with explicit Euler.
    Solve(SolveArgs),
    /// ε-ranks of trajectory snapshots along a partition tree.
    Ranks(RanksArgs),
    /// Memory footprint of a low-rank representation.
    Memory(MemoryArgs),
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub network: PathBuf,
    /// Write the reaction graph in DOT format.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Color DOT nodes by the leaves of this partition tree.
    #[arg(long)]
    pub partition: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    pub network: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub levels: usize,
    /// KL restarts per node.
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score every balanced split instead of a KL pool.
    #[arg(long)]
    pub exhaustive: bool,
    /// Write the ranked root pool to this path.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub network: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Clamped species such as `TNF=1,GF=1`; others start uniform.
    #[arg(long, default_value = "uniform")]
    pub ic: String,
    /// Number of uniformly spaced snapshots including t = 0 and t_end
    /// (time 0 is always kept).
    #[arg(long, default_value_t = 100)]
    pub snapshots: usize,
    /// Binary trajectory output.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// First-moment CSV output.
    #[arg(long)]
    pub moments: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RanksArgs {
    pub network: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Ranked pool from `partition --pool`; reports how entropy and the
    /// final-time ε-rank correlate over it.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Per-node singular values as CSV for the final snapshot.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MemoryArgs {
    /// Network file; only its species count is used.
    pub network: Option<PathBuf>,
    /// Species count when no network is given.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, conflicts_with = "levels")]
    pub partition: Option<PathBuf>,
    /// Balanced tree depth when no partition is given.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, required = true, num_args = 1..)]
    pub rank: Vec<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` and runs the command, writing the primary output to
/// `out` unless an output path is given.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let exec = exec_for(cli.threads);
    let threads = cli.threads;
    let buf = with_threads(threads, || {
        let mut buf = Vec::new();
        match &cli.command {
            Command::Info(a) => cmd_info(a, &mut buf),
            Command::Partition(a) => cmd_partition(a, threads, exec, &mut buf),
            Command::Solve(a) => cmd_solve(a, threads, exec, &mut buf),
            Command::Ranks(a) => cmd_ranks(a, threads, exec, &mut buf),
            Command::Memory(a) => cmd_memory(a, &mut buf),
        }?;
        Ok(buf)
    })?;
    out.write_all(&buf)
        .map_err(|e| CliError::Input(format!("stdout: {e}")))
}

fn exec_for(threads: usize) -> Exec {
    if threads == 1 {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> CliResult<R> + Send) -> CliResult<R> {
    if threads <= 1 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_threads: usize, f: impl FnOnce() -> CliResult<R> + Send) -> CliResult<R> {
    f()
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_network(path: &Path) -> CliResult<BooleanNetwork> {
    let text = read_text(path)?;
    BooleanNetwork::parse(&text).map_err(|e| CliError::from_core(&path.display().to_string(), e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit_json<T: serde::Serialize>(doc: &T, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize");
    text.push('\n');
    match path {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn cmd_info(a: &InfoArgs, out: &mut dyn Write) -> CliResult<()> {
    let net = load_network(&a.network)?;
    let graph = ReactionGraph::from_network(&net);
    let mut text = format!("species: {}\nedges: {}\n", net.len(), graph.edge_count());
    for i in 0..net.len() {
        let syntactic = names_of(&net, net.syntactic_deps(i)).join(" ");
        let semantic = names_of(&net, &net.semantic_deps(i)).join(" ");
        text += &format!(
            "{} = {}\n  syntactic: [{}]\n  semantic: [{}]\n",
            net.name(i),
            net.rules()[i].to_text(net.names()),
            syntactic,
            semantic
        );
    }
    if let Some(path) = &a.dot {
        let blocks = match &a.partition {
            Some(p) => {
                let tree = NodeJson::from_document(&read_text(p)?)?.to_tree(&net)?;
                Some(tree.leaves())
            }
            None => None,
        };
        write_bytes(path, graph.to_dot(net.names(), blocks.as_deref()).as_bytes())?;
    }
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Input(format!("stdout: {e}")))
}

fn cmd_partition(a: &PartitionArgs, threads: usize, exec: Exec, out: &mut dyn Write) -> CliResult<()> {
    let net = load_network(&a.network)?;
    if a.runs == 0 && !a.exhaustive {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let source = RandomSource::new(a.seed);
    let mode = if a.exhaustive {
        PoolMode::Exhaustive
    } else {
        PoolMode::KernighanLin { runs: a.runs, source }
    };
    let tree = auto_partition_with(&net, &TreeShape::Levels(a.levels), mode, exec)?;
    let config = PartitionConfig {
        network: display(&a.network),
        levels: a.levels,
        runs: if a.exhaustive { 0 } else { a.runs },
        seed: a.seed,
        exhaustive: a.exhaustive,
        threads,
    };
    if let Some(path) = &a.pool {
        // The root draws from the master seed, so this is the root's pool.
        let graph = WeightedGraph::from_reaction_graph(&ReactionGraph::from_network(&net));
        let pool = if a.exhaustive {
            exhaustive_pool(&graph)?
        } else {
            generate_pool_with(&graph, a.runs, source, exec)?
        };
        let species: Vec<usize> = (0..net.len()).collect();
        let scored = score_pool_with(&pool, exec, |p| node_entropy(&net, &species, p))?;
        let doc = PoolDoc {
            header: Header::new("partition-pool"),
            config: config.clone(),
            entries: scored.iter().map(|s| PoolRow::from_scored(&net, s)).collect(),
        };
        emit_json(&doc, Some(path), out)?;
    }
    let doc = PartitionDoc {
        header: Header::new("partition"),
        config,
        total_entropy: tree_total_entropy(&tree),
        total_cuts: tree_cut_count(&tree),
        leaves: tree.leaves().iter().map(|l| names_of(&net, l)).collect(),
        tree: NodeJson::from_tree(&net, &tree),
    };
    emit_json(&doc, a.output.as_deref(), out)
}

fn cmd_solve(a: &SolveArgs, threads: usize, exec: Exec, out: &mut dyn Write) -> CliResult<()> {
    let net = load_network(&a.network)?;
    let ic = InitialCondition::parse(&net, &a.ic).map_err(|e| CliError::from_core("--ic", e))?;
    if a.snapshots == 0 {
        return Err(CliError::Usage("--snapshots must be at least 1".into()));
    }
    let times = cme::uniform_snapshot_times(a.t_end, a.snapshots);
    let config = SolverConfig {
        exec,
        ..SolverConfig::default()
    };
    let traj = cme::integrate_with(&net, &ic, a.t_end, a.dt, &times, &config)?;
    if let Some(path) = &a.trajectory {
        let file = fs::File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        traj.write_to(BufWriter::new(file))?;
    }
    if let Some(path) = &a.moments {
        let mut buf = Vec::new();
        cme::write_moments_csv(&mut buf, net.names(), &traj)?;
        write_bytes(path, &buf)?;
    }
    let (_, last) = traj.last().expect("at least one snapshot");
    let doc = SolveDoc {
        header: Header::new("solve"),
        config: SolveConfig {
            network: display(&a.network),
            t_end: a.t_end,
            dt: a.dt,
            ic: a.ic.clone(),
            snapshots: a.snapshots,
            trajectory: a.trajectory.as_deref().map(display),
            moments: a.moments.as_deref().map(display),
            threads,
        },
        d: net.len(),
        steps: (a.t_end / a.dt).round() as u64,
        snapshot_times: traj.times.clone(),
        max_mass_error: traj
            .snapshots
            .iter()
            .map(|s| (s.mass() - 1.0).abs())
            .fold(0.0, f64::max),
        min_probability: traj
            .snapshots
            .iter()
            .flat_map(|s| s.as_slice().iter().copied())
            .fold(f64::INFINITY, f64::min),
        final_moments: net
            .names()
            .iter()
            .cloned()
            .zip(cme::first_moments(last))
            .collect(),
    };
    emit_json(&doc, a.output.as_deref(), out)
}

fn load_trajectory(path: &Path) -> CliResult<Trajectory> {
    let file = fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Trajectory::read_from(BufReader::new(file)).map_err(|e| CliError::from_core(&display(path), e))
}

fn cmd_ranks(a: &RanksArgs, threads: usize, exec: Exec, out: &mut dyn Write) -> CliResult<()> {
    let net = load_network(&a.network)?;
    let tree: PartitionTree = NodeJson::from_document(&read_text(&a.partition)?)?.to_tree(&net)?;
    let traj = load_trajectory(&a.trajectory)?;
    if traj.dim() != net.len() {
        return Err(CliError::Input(format!(
            "trajectory has {} species, network has {}",
            traj.dim(),
            net.len()
        )));
    }
    let mut snapshots = Vec::with_capacity(traj.times.len());
    for (t, p) in traj.times.iter().zip(&traj.snapshots) {
        let profile = rank::tree_ranks_with(p, &tree, a.eps, exec)?;
        snapshots.push(SnapshotRanks {
            t: *t,
            max_rank: profile.max_rank(),
            tucker_ok: profile.tucker_ok(),
            nodes: profile
                .nodes
                .iter()
                .map(|n| NodeRankJson::from_rank(&net, n))
                .collect(),
        });
        if traj.times.last() == Some(t) {
            if let Some(path) = &a.csv {
                write_bytes(path, profile.singular_values_csv(net.names()).as_bytes())?;
            }
        }
    }
    let pool = match &a.pool {
        None => None,
        Some(path) => {
            let doc: PoolDoc = serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let (t, last) = traj.last().expect("trajectory has snapshots");
            let entries = doc
                .entries
                .iter()
                .map(|row| {
                    let part = row.partitioning(&net)?;
                    let (r, _) = eps_rank(&matricize(last, &part)?, a.eps)?;
                    Ok(PoolRank {
                        block0: row.block0.clone(),
                        block1: row.block1.clone(),
                        entropy: row.entropy,
                        eps_rank: r,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let hs: Vec<f64> = entries.iter().map(|e| e.entropy).collect();
            let rs: Vec<f64> = entries.iter().map(|e| e.eps_rank as f64).collect();
            Some(PoolCorrelation {
                t,
                pearson: pearson(&hs, &rs),
                entries,
            })
        }
    };
    let doc = RanksDoc {
        header: Header::new("ranks"),
        config: RanksConfig {
            network: display(&a.network),
            partition: display(&a.partition),
            trajectory: display(&a.trajectory),
            eps: a.eps,
            pool: a.pool.as_deref().map(display),
            threads,
        },
        partition: NodeJson::from_tree(&net, &tree),
        snapshots,
        pool,
    };
    emit_json(&doc, a.output.as_deref(), out)
}

fn cmd_memory(a: &MemoryArgs, out: &mut dyn Write) -> CliResult<()> {
    let net_dim = match &a.network {
        Some(path) => Some(load_network(path)?.len()),
        None => None,
    };
    let d = match (net_dim, a.dim) {
        (Some(n), Some(d)) if n != d => {
            return Err(CliError::Input(format!(
                "--dim {d} disagrees with the network's {n} species"
            )))
        }
        (Some(n), _) => Some(n),
        (None, d) => d,
    };
    let sizes = match &a.partition {
        Some(path) => {
            let sizes = NodeJson::from_document(&read_text(path)?)?.size_tree();
            if let Some(d) = d.filter(|&d| d != sizes.size()) {
                return Err(CliError::Input(format!(
                    "partition covers {} species, expected {d}",
                    sizes.size()
                )));
            }
            sizes
        }
        None => {
            let d = d.ok_or_else(|| CliError::Usage("give a network, --dim or --partition".into()))?;
            SizeTree::balanced(d, &TreeShape::Levels(a.levels.unwrap_or(1)))?
        }
    };
    let estimates = a
        .rank
        .iter()
        .map(|&r| memory_for_sizes(&sizes, r).map(|m| MemoryRow::from(&m)))
        .collect::<Result<Vec<_>, _>>()?;
    let doc = MemoryDoc {
        header: Header::new("memory"),
        config: MemoryConfig {
            network: a.network.as_deref().map(display),
            dim: sizes.size(),
            partition: a.partition.as_deref().map(display),
            levels: if a.partition.is_some() {
                None
            } else {
                Some(a.levels.unwrap_or(1))
            },
            ranks: a.rank.clone(),
        },
        estimates,
    };
    emit_json(&doc, a.output.as_deref(), out)
}
