//! Entropy-guided partitioning of Boolean reaction networks.
//!
//! The crate covers the whole pipeline from a rule file to a partition tree:
//!
//! * [`network`] parses rule files and evaluates rules, truth tables and
//!   dependency sets.
//! * [`graph`] builds the directed reaction graph and its weighted,
//!   undirected projection, and measures cuts of a [`graph::Partitioning`].
//! * [`kl`] runs seeded Kernighan-Lin restarts and collects a deduplicated
//!   pool of candidate bipartitions.
//! * [`entropy`] scores bipartitions by the information entropy of the
//!   severed reaction pathways.
//! * [`hierarchy`] applies pool generation and scoring recursively to build
//!   a binary partition tree.
//! * [`cme`] is a dense, exact solver for the Boolean master equation used as
//!   ground truth on small networks.
//! * [`rank`] measures ε-ranks of matricized snapshots and estimates memory
//!   footprints of low-rank representations.
//!
//! Data-parallel loops (KL restarts, pool scoring, the master-equation
//! right-hand side) run on rayon when the `parallel` feature is enabled
//! and fall back to plain iterators otherwise. Results never depend on the
//! execution mode.

pub mod cme;
pub mod entropy;
mod error;
pub mod graph;
pub mod hierarchy;
pub mod kl;
pub mod network;
pub mod par;
pub mod rank;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::Partitioning;
pub use network::{BooleanNetwork, RuleExpr, SpeciesId, State};
pub use par::Exec;
