//! Enumeration, rendering, exact evaluation and random-walk search over the
//! cut-posteriors of a Bayesian network.
//!
//! The pipeline runs network -> modules -> module graph -> decisions ->
//! posterior. [`evaluate`] computes posterior tables on discrete networks and
//! [`walk`] moves through the space of posteriors.

pub mod cli;
pub mod config;
pub mod decisions;
pub mod error;
pub mod evaluate;
pub mod fixtures;
pub mod modgraph;
pub mod modules;
pub mod network;
pub mod posterior;
pub mod walk;

pub use config::Caps;
pub use decisions::{Decision, DecisionSet, Tag};
pub use error::{Error, Result};
pub use evaluate::{FactorTable, Score, VarKey};
pub use modgraph::{DirectedModuleGraph, UndirectedModuleGraph};
pub use modules::{Module, ModuleSet, Partition};
pub use network::{BayesNet, Evidence, NodeIdx, NodeKind};
pub use posterior::{CutPosterior, Format, ParamVersion, TildeMode};
pub use walk::{MoveProbs, WalkState};
