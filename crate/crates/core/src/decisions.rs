//! Decisions and decision sets.
//!
//! A decision for a shared parameter tags each of the modules containing it
//! (ranked by the module ordering) as `T` (update, possibly as a fresh copy)
//! or `C` (condition on the version made at its single earlier `T` neighbour),
//! and names the kept vertex `x`. Indices are 0-based in memory and 1-based
//! in documents.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modgraph::DirectedModuleGraph;
use crate::modules::ModuleSet;
use crate::network::{BayesNet, NodeIdx};

/// Default cap on decision sets per enumeration.
pub const DEFAULT_MAX_DECISION_SETS: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    T,
    C,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decision {
    pub theta: NodeIdx,
    pub tags: Vec<Tag>,
    /// Kept vertex.
    pub x: usize,
    /// For each `C` vertex, its unique neighbour; `None` on `T` vertices.
    pub cond: Vec<Option<usize>>,
}

/// The first condition a decision fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    VertexCount { expected: usize, actual: usize },
    FirstVertexNotT,
    KeptOutOfRange(usize),
    KeptVertexNotT(usize),
    ShapeMismatch,
    ConditionedWithoutNeighbour(usize),
    UpdatedWithNeighbour(usize),
    NeighbourNotSmaller { vertex: usize, neighbour: usize },
    NeighbourNotT { vertex: usize, neighbour: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // 1-based, as in documents.
        match self {
            Violation::VertexCount { expected, actual } => write!(
                f,
                "vertex count: {actual} vertices but the parameter is in {expected} modules"
            ),
            Violation::FirstVertexNotT => write!(f, "v1 must be T"),
            Violation::KeptOutOfRange(x) => write!(f, "kept index x={} out of range", x + 1),
            Violation::KeptVertexNotT(x) => write!(f, "kept vertex v{} must be T", x + 1),
            Violation::ShapeMismatch => write!(f, "tags and neighbour lists differ in length"),
            Violation::ConditionedWithoutNeighbour(v) => {
                write!(f, "C vertex v{} must have exactly one neighbour", v + 1)
            }
            Violation::UpdatedWithNeighbour(v) => {
                write!(
                    f,
                    "T vertex v{} cannot carry a conditioning neighbour",
                    v + 1
                )
            }
            Violation::NeighbourNotSmaller { vertex, neighbour } => write!(
                f,
                "neighbour index not smaller: v{} conditions on v{}",
                vertex + 1,
                neighbour + 1
            ),
            Violation::NeighbourNotT { vertex, neighbour } => write!(
                f,
                "not bipartite: C vertex v{} is joined to C vertex v{}",
                vertex + 1,
                neighbour + 1
            ),
        }
    }
}

impl Decision {
    /// The decision with one `T` vertex, as held by single-module parameters.
    pub fn trivial(theta: NodeIdx) -> Self {
        Decision {
            theta,
            tags: vec![Tag::T],
            x: 0,
            cond: vec![None],
        }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn t_count(&self) -> usize {
        self.tags.iter().filter(|t| **t == Tag::T).count()
    }

    /// Number of `C` vertices joined to `v`.
    pub fn degree(&self, v: usize) -> usize {
        match self.tags[v] {
            Tag::C => 1,
            Tag::T => self.cond.iter().filter(|c| **c == Some(v)).count(),
        }
    }

    pub fn validate(&self, m_theta_count: usize) -> std::result::Result<(), Violation> {
        let n = self.tags.len();
        if n != m_theta_count {
            return Err(Violation::VertexCount {
                expected: m_theta_count,
                actual: n,
            });
        }
        if self.cond.len() != n {
            return Err(Violation::ShapeMismatch);
        }
        if n == 0 || self.tags[0] != Tag::T {
            return Err(Violation::FirstVertexNotT);
        }
        if self.x >= n {
            return Err(Violation::KeptOutOfRange(self.x));
        }
        if self.tags[self.x] != Tag::T {
            return Err(Violation::KeptVertexNotT(self.x));
        }
        for v in 0..n {
            match (self.tags[v], self.cond[v]) {
                (Tag::T, None) => {}
                (Tag::T, Some(_)) => return Err(Violation::UpdatedWithNeighbour(v)),
                (Tag::C, None) => return Err(Violation::ConditionedWithoutNeighbour(v)),
                (Tag::C, Some(j)) => {
                    if j >= v {
                        return Err(Violation::NeighbourNotSmaller {
                            vertex: v,
                            neighbour: j,
                        });
                    }
                    if self.tags[j] != Tag::T {
                        return Err(Violation::NeighbourNotT {
                            vertex: v,
                            neighbour: j,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn tags_for_mask(n: usize, mask: u64) -> Vec<Tag> {
    (0..n)
        .map(|v| {
            if v > 0 && mask >> (v - 1) & 1 == 1 {
                Tag::C
            } else {
                Tag::T
            }
        })
        .collect()
}

/// Number of decisions for one `T`/`C` tagging: `|T|` choices of the kept
/// vertex times, for each `C` vertex, the number of earlier `T` vertices.
fn count_for_tags(tags: &[Tag]) -> u128 {
    let mut earlier_t = 0u128;
    let mut product = 1u128;
    for t in tags {
        match t {
            Tag::T => earlier_t += 1,
            Tag::C => product *= earlier_t,
        }
    }
    earlier_t * product
}

/// Per-tagging decision counts, in binary-counter order of the taggings.
pub fn count_breakdown(m_theta_count: usize) -> Vec<u128> {
    assert!(m_theta_count >= 1, "a decision needs at least one vertex");
    assert!(
        m_theta_count <= 64,
        "vertex count beyond 64 is not supported"
    );
    (0..1u64 << (m_theta_count - 1))
        .map(|mask| count_for_tags(&tags_for_mask(m_theta_count, mask)))
        .collect()
}

pub fn count_decisions(m_theta_count: usize) -> u128 {
    count_breakdown(m_theta_count).iter().sum()
}

/// Every valid decision on `m_theta_count` vertices. Taggings in
/// binary-counter order (vertex 2 is the low bit, set means `C`), then `x`
/// ascending, then neighbour assignments with the last `C` vertex fastest.
pub fn enumerate_decisions(theta: NodeIdx, m_theta_count: usize) -> Vec<Decision> {
    assert!(m_theta_count >= 1, "a decision needs at least one vertex");
    let n = m_theta_count;
    let mut out = Vec::new();
    for mask in 0..1u64 << (n - 1) {
        let tags = tags_for_mask(n, mask);
        let t_vertices: Vec<usize> = (0..n).filter(|v| tags[*v] == Tag::T).collect();
        let c_vertices: Vec<usize> = (0..n).filter(|v| tags[*v] == Tag::C).collect();
        let choices: Vec<Vec<usize>> = c_vertices
            .iter()
            .map(|c| t_vertices.iter().copied().filter(|t| t < c).collect())
            .collect();
        for &x in &t_vertices {
            let mut digits = vec![0usize; c_vertices.len()];
            'assign: loop {
                let mut cond = vec![None; n];
                for (k, c) in c_vertices.iter().enumerate() {
                    cond[*c] = Some(choices[k][digits[k]]);
                }
                out.push(Decision {
                    theta,
                    tags: tags.clone(),
                    x,
                    cond,
                });
                let mut k = digits.len();
                loop {
                    if k == 0 {
                        break 'assign;
                    }
                    k -= 1;
                    digits[k] += 1;
                    if digits[k] < choices[k].len() {
                        continue 'assign;
                    }
                    digits[k] = 0;
                }
            }
        }
    }
    out
}

/// One decision per shared parameter.
pub type DecisionSet = BTreeMap<NodeIdx, Decision>;

/// Modules containing `theta`, ranked by the ordering of `g`.
pub fn ranked_modules(ms: &ModuleSet, g: &DirectedModuleGraph, theta: NodeIdx) -> Vec<usize> {
    let mut mods = ms.modules_containing(theta);
    mods.sort_by_key(|m| g.position(*m));
    mods
}

/// Checks `ds` carries exactly one valid decision per shared parameter.
pub fn validate_decision_set(
    net: &BayesNet,
    ms: &ModuleSet,
    g: &DirectedModuleGraph,
    ds: &DecisionSet,
) -> Result<()> {
    for (theta, d) in ds {
        if d.theta != *theta {
            return Err(Error::Inconsistent(format!(
                "decision filed under `{}` is for `{}`",
                net.name(*theta),
                net.name(d.theta)
            )));
        }
        if !ms.is_shared(*theta) {
            return Err(Error::Decision {
                theta: net.name(*theta).to_owned(),
                violation: "decisions are only made for shared parameters".into(),
            });
        }
    }
    for theta in ms.shared_params() {
        let d = ds.get(theta).ok_or_else(|| Error::Decision {
            theta: net.name(*theta).to_owned(),
            violation: "decision missing for a shared parameter".into(),
        })?;
        d.validate(ranked_modules(ms, g, *theta).len())
            .map_err(|v| Error::Decision {
                theta: net.name(*theta).to_owned(),
                violation: v.to_string(),
            })?;
    }
    Ok(())
}

/// Cartesian product of per-parameter decisions, first shared parameter
/// (in node order) outermost.
pub fn enumerate_decision_sets(
    ms: &ModuleSet,
    _g: &DirectedModuleGraph,
    cap: u128,
) -> Result<Vec<DecisionSet>> {
    let per_theta: Vec<(NodeIdx, usize)> = ms
        .shared_params()
        .iter()
        .map(|t| (*t, ms.modules_containing(*t).len()))
        .collect();
    let mut total: u128 = 1;
    for (_, n) in &per_theta {
        total = total.saturating_mul(count_decisions(*n));
        if total > cap {
            return Err(Error::CapExceeded {
                what: "decision sets",
                actual: total,
                cap,
            });
        }
    }
    let lists: Vec<Vec<Decision>> = per_theta
        .iter()
        .map(|(t, n)| enumerate_decisions(*t, *n))
        .collect();
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; lists.len()];
    loop {
        out.push(
            lists
                .iter()
                .zip(&idx)
                .map(|(l, i)| (l[*i].theta, l[*i].clone()))
                .collect(),
        );
        let mut k = lists.len();
        let mut done = true;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                done = false;
                break;
            }
            idx[k] = 0;
        }
        if done {
            break;
        }
    }
    Ok(out)
}

/// Decision document; indices are 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionDoc {
    pub theta: String,
    pub tags: Vec<Tag>,
    pub x: usize,
    #[serde(default)]
    pub cond: BTreeMap<String, usize>,
}

impl DecisionDoc {
    pub fn from_decision(net: &BayesNet, d: &Decision) -> Self {
        DecisionDoc {
            theta: net.name(d.theta).to_owned(),
            tags: d.tags.clone(),
            x: d.x + 1,
            cond: d
                .cond
                .iter()
                .enumerate()
                .filter_map(|(v, c)| c.map(|j| ((v + 1).to_string(), j + 1)))
                .collect(),
        }
    }

    /// Converts to a decision. Only document-level shape is checked here;
    /// use [`Decision::validate`] for the decision conditions.
    pub fn to_decision(&self, net: &BayesNet) -> Result<Decision> {
        let theta = net.lookup(&self.theta)?;
        let bad = |msg: String| Error::Decision {
            theta: self.theta.clone(),
            violation: msg,
        };
        if self.x == 0 {
            return Err(bad("x is 1-based".into()));
        }
        let mut cond = vec![None; self.tags.len()];
        for (k, j) in &self.cond {
            let v: usize = k
                .parse()
                .map_err(|_| bad(format!("cond key `{k}` is not an index")))?;
            if v == 0 || v > self.tags.len() || *j == 0 || *j > self.tags.len() {
                return Err(bad(format!("cond entry {k} -> {j} out of range")));
            }
            cond[v - 1] = Some(j - 1);
        }
        Ok(Decision {
            theta,
            tags: self.tags.clone(),
            x: self.x - 1,
            cond,
        })
    }
}

pub fn parse_decision_set(net: &BayesNet, text: &str) -> Result<DecisionSet> {
    let docs: Vec<DecisionDoc> = serde_json::from_str(text).map_err(Error::from_json)?;
    let mut ds = DecisionSet::new();
    for doc in docs {
        let d = doc.to_decision(net)?;
        if ds.insert(d.theta, d).is_some() {
            return Err(Error::Decision {
                theta: doc.theta,
                violation: "more than one decision for the same parameter".into(),
            });
        }
    }
    Ok(ds)
}

pub fn decision_set_docs(net: &BayesNet, ds: &DecisionSet) -> Vec<DecisionDoc> {
    ds.values()
        .map(|d| DecisionDoc::from_decision(net, d))
        .collect()
}
