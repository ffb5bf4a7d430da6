//! Resource caps shared by the enumerators and the evaluator.

use serde::{Deserialize, Serialize};

use crate::decisions::DEFAULT_MAX_DECISION_SETS;
use crate::evaluate::DEFAULT_MAX_CELLS;
use crate::modgraph::DEFAULT_MAX_ORIENT_EDGES;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Upper bound on decision sets, and on posteriors built per enumeration.
    pub max_decision_sets: u128,
    /// Largest module graph, in edges, whose orientations are enumerated.
    pub max_orient_edges: usize,
    /// Largest joint table the evaluator will materialize.
    pub max_cells: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_decision_sets: DEFAULT_MAX_DECISION_SETS,
            max_orient_edges: DEFAULT_MAX_ORIENT_EDGES,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}
