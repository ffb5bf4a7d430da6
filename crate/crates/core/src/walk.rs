//! Random walk over cut-posteriors.
//!
//! Each step either perturbs one decision graph or merges/splits modules and
//! repairs the decision set. Every random choice of a proposal is recorded in
//! its [`Move`], so a move can be replayed, inverted and checked for support.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Caps;
use crate::decisions::{ranked_modules, Decision, DecisionSet, Tag};
use crate::error::{Error, Result};
use crate::evaluate::score_log_pred_with;
use crate::modgraph::{build_undirected, DirectedModuleGraph};
use crate::modules::{form_module_set, merge_modules, ModuleSet, Partition};
use crate::network::{BayesNet, Evidence, NodeIdx};
use crate::posterior::{build_posterior, CutPosterior, TildeMode};

/// Bound on cyclic-merge resampling within one proposal.
pub const MAX_MERGE_ATTEMPTS: usize = 100;

/// Branch probabilities of the move tree and the acceptance temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoveProbs {
    /// Perturb a decision rather than the module graph.
    pub q0: f64,
    /// Perturb the decision graph rather than the kept index.
    pub q1: f64,
    /// Act on an existing T-C edge rather than create one.
    pub q2: f64,
    /// Delete the sampled edge rather than rewire it.
    pub q3: f64,
    /// Merge rather than split.
    pub q4: f64,
    /// On a split of a T vertex, keep both halves T.
    pub q5: f64,
    pub temperature: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        MoveProbs {
            q0: 0.7,
            q1: 0.7,
            q2: 2.0 / 3.0,
            q3: 0.5,
            q4: 0.5,
            q5: 0.5,
            temperature: 1.0,
        }
    }
}

impl MoveProbs {
    pub fn validate(&self) -> Result<()> {
        for (name, q) in [
            ("q0", self.q0),
            ("q1", self.q1),
            ("q2", self.q2),
            ("q3", self.q3),
            ("q4", self.q4),
            ("q5", self.q5),
        ] {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {q}")));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let probs: MoveProbs = serde_json::from_str(text).map_err(Error::from_json)?;
        probs.validate()?;
        Ok(probs)
    }

    /// Probability of reaching the branch that generates moves of `kind`.
    pub fn branch_probability(&self, kind: MoveKind) -> f64 {
        let decision = self.q0;
        let graph = 1.0 - self.q0;
        match kind {
            MoveKind::EdgeDelete => decision * self.q1 * self.q2 * self.q3,
            MoveKind::Rewire => decision * self.q1 * self.q2 * (1.0 - self.q3),
            MoveKind::TToC => decision * self.q1 * (1.0 - self.q2),
            MoveKind::ChangeX => decision * (1.0 - self.q1),
            MoveKind::Merge => graph * self.q4,
            MoveKind::Split => graph * (1.0 - self.q4),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    #[serde(rename = "decision-edge-delete")]
    EdgeDelete,
    #[serde(rename = "decision-rewire")]
    Rewire,
    #[serde(rename = "decision-T-to-C")]
    TToC,
    #[serde(rename = "decision-change-x")]
    ChangeX,
    #[serde(rename = "merge")]
    Merge,
    #[serde(rename = "split")]
    Split,
}

impl MoveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MoveKind::EdgeDelete => "decision-edge-delete",
            MoveKind::Rewire => "decision-rewire",
            MoveKind::TToC => "decision-T-to-C",
            MoveKind::ChangeX => "decision-change-x",
            MoveKind::Merge => "merge",
            MoveKind::Split => "split",
        }
    }
}

/// One of the two modules produced by a split (or merged by a merge).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Half {
    /// The module at the split module's index (the first merge operand).
    A,
    /// The module appended at the end (the second merge operand).
    B,
}

impl Half {
    fn other(self) -> Half {
        match self {
            Half::A => Half::B,
            Half::B => Half::A,
        }
    }
}

/// How one parameter's decision is split when it lands in both halves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SplitChoice {
    /// Both halves `T`; the kept index, if it was on the split vertex, moves
    /// to `x_to`, and each conditioned neighbour (by module index) is wired
    /// to the given half.
    BothT {
        x_to: Half,
        wiring: BTreeMap<usize, Half>,
    },
    /// `t_half` stays `T`, the other half becomes `C` conditioned on module
    /// `c_neighbour` (index in the new state).
    TC { t_half: Half, c_neighbour: usize },
    /// Both halves `C`; `keeper` keeps the old neighbour, the other one is
    /// conditioned on module `other_neighbour` (index in the new state).
    BothC {
        keeper: Half,
        other_neighbour: usize,
    },
}

/// A fully specified proposal. Vertex indices are 0-based positions in the
/// parameter's decision graph; module indices refer to the current state
/// unless stated otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Move {
    /// Tag the `C` vertex `vertex` as `T`, dropping its edge.
    EdgeDelete { theta: NodeIdx, vertex: usize },
    /// Reconnect the `C` vertex `vertex` to the earlier `T` vertex `to`.
    Rewire {
        theta: NodeIdx,
        vertex: usize,
        to: usize,
    },
    /// Tag the isolated `T` vertex `vertex` as `C`, conditioned on `to`.
    TToC {
        theta: NodeIdx,
        vertex: usize,
        to: usize,
    },
    /// Move the kept index to the `T` vertex `to`.
    ChangeX { theta: NodeIdx, to: usize },
    /// Merge modules `a` and `b`, placing the result at `position` of the
    /// new ordering. `keep` names, per parameter conditioned in both, whose
    /// neighbour survives.
    Merge {
        a: usize,
        b: usize,
        position: usize,
        keep: BTreeMap<NodeIdx, Half>,
    },
    /// Split module `module` so that half A has core `part`. Half A takes
    /// index `module`, half B is appended; `positions` are their places in
    /// the new ordering.
    Split {
        module: usize,
        part: BTreeSet<NodeIdx>,
        positions: (usize, usize),
        choices: BTreeMap<NodeIdx, SplitChoice>,
    },
}

impl Move {
    pub fn kind(&self) -> MoveKind {
        match self {
            Move::EdgeDelete { .. } => MoveKind::EdgeDelete,
            Move::Rewire { .. } => MoveKind::Rewire,
            Move::TToC { .. } => MoveKind::TToC,
            Move::ChangeX { .. } => MoveKind::ChangeX,
            Move::Merge { .. } => MoveKind::Merge,
            Move::Split { .. } => MoveKind::Split,
        }
    }

    /// Trace detail. Vertex indices are written 1-based.
    pub fn to_json(&self, net: &BayesNet, state: &WalkState) -> Value {
        let half = |h: &Half| match h {
            Half::A => "a",
            Half::B => "b",
        };
        match self {
            Move::EdgeDelete { theta, vertex } => {
                json!({"theta": net.name(*theta), "vertex": vertex + 1})
            }
            Move::Rewire { theta, vertex, to } | Move::TToC { theta, vertex, to } => {
                json!({"theta": net.name(*theta), "vertex": vertex + 1, "to": to + 1})
            }
            Move::ChangeX { theta, to } => json!({"theta": net.name(*theta), "x": to + 1}),
            Move::Merge {
                a,
                b,
                position,
                keep,
            } => json!({
                "modules": [state.ms.label(*a), state.ms.label(*b)],
                "position": position,
                "keep": keep.iter().map(|(t, h)| (net.name(*t).to_owned(), json!(half(h)))).collect::<serde_json::Map<_, _>>(),
            }),
            Move::Split {
                module,
                part,
                positions,
                choices,
            } => json!({
                "module": state.ms.label(*module),
                "part": part.iter().map(|v| net.name(*v)).collect::<Vec<_>>(),
                "positions": [positions.0, positions.1],
                "choices": choices.iter().map(|(t, c)| {
                    let c = match c {
                        SplitChoice::BothT { x_to, wiring } => json!({"rule": "both-T", "x_to": half(x_to),
                            "wiring": wiring.iter().map(|(m, h)| json!([state.ms.label(*m), half(h)])).collect::<Vec<_>>()}),
                        SplitChoice::TC { t_half, c_neighbour } => json!({"rule": "T-C", "t_half": half(t_half), "c_neighbour": c_neighbour}),
                        SplitChoice::BothC { keeper, other_neighbour } => json!({"rule": "both-C", "keeper": half(keeper), "other_neighbour": other_neighbour}),
                    };
                    (net.name(*t).to_owned(), c)
                }).collect::<serde_json::Map<_, _>>(),
            }),
        }
    }
}

/// Why a proposal produced no new state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    /// The move is not available from this state.
    Impossible(String),
    /// The move was admissible but produced an inconsistent state.
    Invalid(String),
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::Impossible(m) => write!(f, "impossible: {m}"),
            Rejection::Invalid(m) => write!(f, "invalid: {m}"),
        }
    }
}

fn impossible<T>(msg: impl Into<String>) -> std::result::Result<T, Rejection> {
    Err(Rejection::Impossible(msg.into()))
}

/// A point of the walk: modules, oriented module graph with its ordering,
/// decisions, and the posterior they build.
#[derive(Clone, Debug)]
pub struct WalkState {
    pub ms: ModuleSet,
    pub g: DirectedModuleGraph,
    pub ds: DecisionSet,
    pub posterior: CutPosterior,
    pub score: Option<f64>,
}

type CoreSet = BTreeSet<NodeIdx>;
/// A decision keyed by module cores: tagged vertices with their conditioning
/// vertex, and the core of the `x` vertex.
type DecisionKey = (Vec<(CoreSet, Tag, Option<CoreSet>)>, CoreSet);

/// Index-free identity of a walk state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey {
    order: Vec<CoreSet>,
    arcs: BTreeSet<(CoreSet, CoreSet)>,
    decisions: BTreeMap<NodeIdx, DecisionKey>,
}

impl WalkState {
    /// Validates the components and builds their posterior.
    pub fn new(
        net: &BayesNet,
        ms: ModuleSet,
        g: DirectedModuleGraph,
        ds: DecisionSet,
        mode: TildeMode,
    ) -> Result<Self> {
        let posterior = build_posterior(net, &ms, &g, &ds, mode)?;
        posterior.check_versions(&g)?;
        Ok(WalkState {
            ms,
            g,
            ds,
            posterior,
            score: None,
        })
    }

    /// Start state for `partition`: every module-graph edge oriented from the
    /// lower to the higher module index, and the first enumerated decisions.
    pub fn initial(net: &BayesNet, partition: &Partition, mode: TildeMode) -> Result<Self> {
        let ms = form_module_set(net, partition)?;
        let h = build_undirected(&ms);
        let forward = vec![true; h.edges().len()];
        let g = DirectedModuleGraph::new(h, forward)?;
        let ds = first_decisions(&ms);
        Self::new(net, ms, g, ds, mode)
    }

    pub fn mode(&self) -> TildeMode {
        self.posterior.mode
    }

    fn core(&self, m: usize) -> CoreSet {
        self.ms.module(m).core.clone()
    }

    pub fn key(&self) -> StateKey {
        let order = self.g.order().iter().map(|m| self.core(*m)).collect();
        let arcs = self
            .g
            .arcs()
            .into_iter()
            .map(|(a, b)| (self.core(a), self.core(b)))
            .collect();
        let decisions = self
            .ds
            .iter()
            .map(|(theta, d)| {
                let ranked = ranked_modules(&self.ms, &self.g, *theta);
                let verts = (0..d.len())
                    .map(|k| {
                        (
                            self.core(ranked[k]),
                            d.tags[k],
                            d.cond[k].map(|j| self.core(ranked[j])),
                        )
                    })
                    .collect();
                (*theta, (verts, self.core(ranked[d.x])))
            })
            .collect();
        StateKey {
            order,
            arcs,
            decisions,
        }
    }

    /// Full consistency check of the cached components.
    pub fn check(&self, net: &BayesNet) -> Result<()> {
        let fresh = form_module_set(net, self.ms.partition())?;
        if fresh.modules() != self.ms.modules() {
            return Err(Error::Inconsistent(
                "modules do not match their cores".into(),
            ));
        }
        let rebuilt = build_posterior(net, &self.ms, &self.g, &self.ds, self.mode())?;
        if rebuilt != self.posterior {
            return Err(Error::Inconsistent("cached posterior is stale".into()));
        }
        rebuilt.check_versions(&self.g)
    }
}

/// All-`T` decisions kept at the first vertex: the first decision set in
/// enumeration order.
fn first_decisions(ms: &ModuleSet) -> DecisionSet {
    ms.shared_params()
        .iter()
        .map(|t| {
            let n = ms.modules_containing(*t).len();
            (
                *t,
                Decision {
                    theta: *t,
                    tags: vec![Tag::T; n],
                    x: 0,
                    cond: vec![None; n],
                },
            )
        })
        .collect()
}

/// A decision keyed by module index instead of rank.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Labelled {
    tags: BTreeMap<usize, (Tag, Option<usize>)>,
    x: usize,
}

impl Labelled {
    fn of(ms: &ModuleSet, g: &DirectedModuleGraph, d: &Decision) -> Self {
        let ranked = ranked_modules(ms, g, d.theta);
        Labelled {
            tags: (0..d.len())
                .map(|k| (ranked[k], (d.tags[k], d.cond[k].map(|j| ranked[j]))))
                .collect(),
            x: ranked[d.x],
        }
    }

    /// A parameter of a single module seen as a one-vertex decision.
    fn single(m: usize) -> Self {
        Labelled {
            tags: BTreeMap::from([(m, (Tag::T, None))]),
            x: m,
        }
    }

    fn remap(&self, f: impl Fn(usize) -> usize) -> Self {
        Labelled {
            tags: self
                .tags
                .iter()
                .map(|(m, (t, n))| (f(*m), (*t, n.map(&f))))
                .collect(),
            x: f(self.x),
        }
    }

    fn to_decision(
        &self,
        ms: &ModuleSet,
        g: &DirectedModuleGraph,
        theta: NodeIdx,
    ) -> std::result::Result<Decision, String> {
        let ranked = ranked_modules(ms, g, theta);
        let keys: Vec<usize> = self.tags.keys().copied().collect();
        let mut sorted = ranked.clone();
        sorted.sort();
        if keys != sorted {
            return Err(format!(
                "decision vertices {keys:?} differ from modules {sorted:?}"
            ));
        }
        let rank: BTreeMap<usize, usize> =
            ranked.iter().enumerate().map(|(k, m)| (*m, k)).collect();
        let d = Decision {
            theta,
            tags: ranked.iter().map(|m| self.tags[m].0).collect(),
            x: rank[&self.x],
            cond: ranked
                .iter()
                .map(|m| self.tags[m].1.map(|n| rank[&n]))
                .collect(),
        };
        d.validate(ranked.len()).map_err(|v| v.to_string())?;
        Ok(d)
    }
}

fn respects(order: &[usize], arcs: &[(usize, usize)]) -> bool {
    let mut pos = vec![0; order.len()];
    for (p, v) in order.iter().enumerate() {
        pos[*v] = p;
    }
    arcs.iter().all(|(a, b)| pos[*a] < pos[*b])
}

// Decision moves.

fn shared_list(state: &WalkState) -> Vec<NodeIdx> {
    state.ds.keys().copied().collect()
}

fn c_vertices(d: &Decision) -> Vec<usize> {
    (0..d.len()).filter(|v| d.tags[*v] == Tag::C).collect()
}

fn rewire_targets(d: &Decision, vertex: usize) -> Vec<usize> {
    (0..vertex)
        .filter(|k| d.tags[*k] == Tag::T && Some(*k) != d.cond[vertex])
        .collect()
}

/// `T` vertices that may become `C`: isolated, not the first, not kept.
fn t_to_c_candidates(d: &Decision) -> Vec<usize> {
    (1..d.len())
        .filter(|v| d.tags[*v] == Tag::T && *v != d.x && d.degree(*v) == 0)
        .collect()
}

fn earlier_t(d: &Decision, vertex: usize) -> Vec<usize> {
    (0..vertex).filter(|k| d.tags[*k] == Tag::T).collect()
}

fn x_candidates(d: &Decision) -> Vec<usize> {
    (0..d.len())
        .filter(|v| d.tags[*v] == Tag::T && *v != d.x)
        .collect()
}

fn apply_decision_move(
    net: &BayesNet,
    state: &WalkState,
    mv: &Move,
) -> std::result::Result<WalkState, Rejection> {
    let theta = match mv {
        Move::EdgeDelete { theta, .. }
        | Move::Rewire { theta, .. }
        | Move::TToC { theta, .. }
        | Move::ChangeX { theta, .. } => *theta,
        _ => unreachable!("decision move"),
    };
    let Some(old) = state.ds.get(&theta) else {
        return impossible("parameter is not shared");
    };
    let mut d = old.clone();
    let n = d.len();
    match *mv {
        Move::EdgeDelete { vertex, .. } => {
            if vertex >= n || d.tags[vertex] != Tag::C {
                return impossible("vertex is not conditioned");
            }
            d.tags[vertex] = Tag::T;
            d.cond[vertex] = None;
        }
        Move::Rewire { vertex, to, .. } => {
            if vertex >= n || d.tags[vertex] != Tag::C || !rewire_targets(&d, vertex).contains(&to)
            {
                return impossible("no such rewiring");
            }
            d.cond[vertex] = Some(to);
        }
        Move::TToC { vertex, to, .. } => {
            if vertex >= n
                || !t_to_c_candidates(&d).contains(&vertex)
                || !earlier_t(&d, vertex).contains(&to)
            {
                return impossible("vertex cannot be conditioned");
            }
            d.tags[vertex] = Tag::C;
            d.cond[vertex] = Some(to);
        }
        Move::ChangeX { to, .. } => {
            if !x_candidates(&d).contains(&to) {
                return impossible("vertex cannot be kept");
            }
            d.x = to;
        }
        _ => unreachable!("decision move"),
    }
    d.validate(n)
        .map_err(|v| Rejection::Invalid(v.to_string()))?;
    let mut ds = state.ds.clone();
    ds.insert(theta, d);
    WalkState::new(net, state.ms.clone(), state.g.clone(), ds, state.mode())
        .map_err(|e| Rejection::Invalid(e.to_string()))
}

// Merge.

/// True when contracting `a` and `b` leaves the module graph acyclic.
pub fn contraction_acyclic(g: &DirectedModuleGraph, a: usize, b: usize) -> bool {
    let arcs = g.arcs();
    let through = |from: usize, to: usize| {
        arcs.iter()
            .filter(|(s, t)| *s == from && *t != to)
            .any(|(_, t)| g.reaches(*t, to))
    };
    !through(a, b) && !through(b, a)
}

struct MergeFrame {
    lo: usize,
    hi: usize,
    arcs: Vec<(usize, usize)>,
    others: Vec<usize>,
}

impl MergeFrame {
    fn new(state: &WalkState, a: usize, b: usize) -> Self {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f = |m: usize| Self::map(lo, hi, m);
        let mut arcs: Vec<(usize, usize)> = state
            .g
            .arcs()
            .into_iter()
            .filter(|(s, t)| !((*s == a && *t == b) || (*s == b && *t == a)))
            .map(|(s, t)| (f(s), f(t)))
            .collect();
        arcs.sort();
        arcs.dedup();
        let others = state
            .g
            .order()
            .iter()
            .filter(|m| **m != a && **m != b)
            .map(|m| f(*m))
            .collect();
        MergeFrame {
            lo,
            hi,
            arcs,
            others,
        }
    }

    fn map(lo: usize, hi: usize, m: usize) -> usize {
        if m == hi {
            lo
        } else if m > hi {
            m - 1
        } else {
            m
        }
    }

    fn order(&self, position: usize) -> Vec<usize> {
        let mut order = self.others.clone();
        order.insert(position, self.lo);
        order
    }

    fn positions(&self) -> Vec<usize> {
        (0..=self.others.len())
            .filter(|p| respects(&self.order(*p), &self.arcs))
            .collect()
    }
}

fn apply_merge(
    net: &BayesNet,
    state: &WalkState,
    a: usize,
    b: usize,
    position: usize,
    keep: &BTreeMap<NodeIdx, Half>,
) -> std::result::Result<WalkState, Rejection> {
    let n = state.ms.len();
    if a >= n || b >= n || a == b {
        return impossible("merge needs two distinct modules");
    }
    if !contraction_acyclic(&state.g, a, b) {
        return impossible("merge would create a cycle");
    }
    let frame = MergeFrame::new(state, a, b);
    if !frame.positions().contains(&position) {
        return impossible("no topological ordering with the merged module at this position");
    }
    let invalid = |e: Error| Rejection::Invalid(e.to_string());
    let ms = merge_modules(net, &state.ms, a, b).map_err(invalid)?;
    let g = DirectedModuleGraph::from_arcs(build_undirected(&ms), &frame.arcs, None)
        .and_then(|g| g.reordered(frame.order(position)))
        .map_err(invalid)?;
    let f = |m: usize| MergeFrame::map(frame.lo, frame.hi, m);
    let mut ds = DecisionSet::new();
    for &theta in ms.shared_params() {
        let Some(old) = state.ds.get(&theta) else {
            return Err(Rejection::Invalid(
                "merge created a shared parameter".into(),
            ));
        };
        let mut lab = Labelled::of(&state.ms, &state.g, old);
        if let (Some(&(ta, na)), Some(&(tb, nb))) = (lab.tags.get(&a), lab.tags.get(&b)) {
            lab = contract(
                &lab,
                a,
                b,
                (ta, na),
                (tb, nb),
                keep.get(&theta).copied().unwrap_or(Half::A),
            );
        }
        let d = lab
            .remap(f)
            .to_decision(&ms, &g, theta)
            .map_err(Rejection::Invalid)?;
        ds.insert(theta, d);
    }
    WalkState::new(net, ms, g, ds, state.mode()).map_err(invalid)
}

/// Contracts the vertices of modules `a` and `b` into `a`.
fn contract(
    lab: &Labelled,
    a: usize,
    b: usize,
    va: (Tag, Option<usize>),
    vb: (Tag, Option<usize>),
    keep: Half,
) -> Labelled {
    let redirect = |n: Option<usize>| n.map(|m| if m == b { a } else { m });
    let mut tags: BTreeMap<usize, (Tag, Option<usize>)> = lab
        .tags
        .iter()
        .filter(|(m, _)| **m != a && **m != b)
        .map(|(m, (t, n))| (*m, (*t, *n)))
        .collect();
    let merged = match (va.0, vb.0) {
        (Tag::T, Tag::T) => (Tag::T, None),
        (Tag::C, Tag::C) => match keep {
            Half::A => va,
            Half::B => vb,
        },
        (Tag::T, Tag::C) => va,
        (Tag::C, Tag::T) => vb,
    };
    // The removed C vertex of a T/C pair took its edge with it; edges into
    // either contracted T vertex now end at the merged vertex.
    for (_, n) in tags.values_mut() {
        *n = redirect(*n);
    }
    let merged = (merged.0, redirect(merged.1));
    tags.insert(a, merged);
    let x = if lab.x == b { a } else { lab.x };
    Labelled { tags, x }
}

// Split.

struct SplitFrame {
    ms: ModuleSet,
    g_unordered: DirectedModuleGraph,
    k: usize,
    b: usize,
    others: Vec<usize>,
}

impl SplitFrame {
    fn new(
        net: &BayesNet,
        state: &WalkState,
        k: usize,
        part: &BTreeSet<NodeIdx>,
    ) -> std::result::Result<Self, Rejection> {
        let n = state.ms.len();
        if k >= n {
            return impossible("no such module");
        }
        let core = &state.ms.module(k).core;
        if part.is_empty() || part.len() >= core.len() || !part.is_subset(core) {
            return impossible("part is not a proper nonempty subset of the core");
        }
        let invalid = |e: Error| Rejection::Invalid(e.to_string());
        let ms =
            form_module_set(net, &state.ms.partition().split(net, k, part)).map_err(invalid)?;
        let h = build_undirected(&ms);
        let b = n;
        let mut arcs = Vec::new();
        let mut ab_edge = false;
        for &(u, v) in h.edges() {
            let half = |m: usize| m == k || m == b;
            let dir = match (half(u), half(v)) {
                (false, false) => state.g.points(u, v),
                (true, false) => state.g.points(k, v),
                (false, true) => state.g.points(u, k),
                (true, true) => {
                    ab_edge = true;
                    continue;
                }
            };
            match dir {
                Some(true) => arcs.push((u, v)),
                Some(false) => arcs.push((v, u)),
                None => {
                    return Err(Rejection::Invalid(format!(
                        "edge {u}-{v} has no counterpart before the split"
                    )))
                }
            }
        }
        // Orient the half-half edge provisionally; orderings fix it later.
        let mut provisional = arcs.clone();
        if ab_edge {
            provisional.push((k, b));
        }
        let g_unordered = DirectedModuleGraph::from_arcs(h, &provisional, None).map_err(invalid)?;
        let others = state
            .g
            .order()
            .iter()
            .filter(|m| **m != k)
            .copied()
            .collect();
        Ok(SplitFrame {
            ms,
            g_unordered,
            k,
            b,
            others,
        })
    }

    fn order(&self, (pa, pb): (usize, usize)) -> Option<Vec<usize>> {
        let len = self.others.len() + 2;
        if pa == pb || pa >= len || pb >= len {
            return None;
        }
        let mut rest = self.others.iter();
        Some(
            (0..len)
                .map(|p| {
                    if p == pa {
                        self.k
                    } else if p == pb {
                        self.b
                    } else {
                        *rest.next().expect("enough modules")
                    }
                })
                .collect(),
        )
    }

    fn graph(&self, positions: (usize, usize)) -> Option<DirectedModuleGraph> {
        let order = self.order(positions)?;
        let mut arcs = self.g_unordered.arcs();
        if let Some(i) = arcs.iter().position(|&(s, t)| (s, t) == (self.k, self.b)) {
            if positions.0 > positions.1 {
                arcs[i] = (self.b, self.k);
            }
        }
        DirectedModuleGraph::from_arcs(self.g_unordered.graph().clone(), &arcs, Some(order)).ok()
    }

    fn positions(&self) -> Vec<(usize, usize)> {
        let len = self.others.len() + 2;
        let mut out = Vec::new();
        for pa in 0..len {
            for pb in 0..len {
                if pa != pb && self.graph((pa, pb)).is_some() {
                    out.push((pa, pb));
                }
            }
        }
        out
    }

    fn half_index(&self, h: Half) -> usize {
        match h {
            Half::A => self.k,
            Half::B => self.b,
        }
    }

    /// Parameters in both halves, with their decision before the split.
    fn split_params(&self, state: &WalkState) -> Vec<(NodeIdx, Labelled)> {
        self.ms
            .shared_params()
            .iter()
            .filter(|t| {
                self.ms.module(self.k).contains(**t) && self.ms.module(self.b).contains(**t)
            })
            .map(|t| (*t, self.old_labelled(state, *t)))
            .collect()
    }

    fn old_labelled(&self, state: &WalkState, theta: NodeIdx) -> Labelled {
        match state.ds.get(&theta) {
            Some(d) => Labelled::of(&state.ms, &state.g, d),
            None => Labelled::single(self.k),
        }
    }

    /// `T` vertices of `theta` other than the split halves that precede
    /// module `m` in `g`, plus `t_half` when given and earlier.
    fn earlier_t_modules(
        &self,
        g: &DirectedModuleGraph,
        lab: &Labelled,
        m: usize,
        t_half: Option<usize>,
    ) -> Vec<usize> {
        let mut out: Vec<usize> = lab
            .tags
            .iter()
            .filter(|(n, (t, _))| **n != self.k && *t == Tag::T)
            .map(|(n, _)| *n)
            .chain(t_half)
            .filter(|n| g.position(*n) < g.position(m))
            .collect();
        out.sort();
        out
    }
}

fn apply_split(
    net: &BayesNet,
    state: &WalkState,
    k: usize,
    part: &BTreeSet<NodeIdx>,
    positions: (usize, usize),
    choices: &BTreeMap<NodeIdx, SplitChoice>,
) -> std::result::Result<WalkState, Rejection> {
    let frame = SplitFrame::new(net, state, k, part)?;
    let Some(g) = frame.graph(positions) else {
        return impossible("no topological ordering with the halves at these positions");
    };
    let (a, b) = (frame.k, frame.b);
    let mut ds = DecisionSet::new();
    for &theta in frame.ms.shared_params() {
        let in_a = frame.ms.module(a).contains(theta);
        let in_b = frame.ms.module(b).contains(theta);
        let lab = frame.old_labelled(state, theta);
        let lab = if !(in_a && in_b) {
            let to = if in_a { a } else { b };
            lab.remap(|m| if m == k { to } else { m })
        } else {
            let Some(choice) = choices.get(&theta) else {
                return impossible(format!("no split rule chosen for `{}`", net.name(theta)));
            };
            let (tag_k, nbr_k) = lab.tags[&k];
            let mut tags = lab.tags.clone();
            tags.remove(&k);
            let mut x = lab.x;
            match (tag_k, choice) {
                (Tag::T, SplitChoice::BothT { x_to, wiring }) => {
                    for (m, (t, n)) in tags.iter_mut() {
                        if *t == Tag::C && *n == Some(k) {
                            let Some(h) = wiring.get(m) else {
                                return impossible(
                                    "a conditioned neighbour is not wired to either half",
                                );
                            };
                            *n = Some(frame.half_index(*h));
                        }
                    }
                    tags.insert(a, (Tag::T, None));
                    tags.insert(b, (Tag::T, None));
                    if x == k {
                        x = frame.half_index(*x_to);
                    }
                }
                (
                    Tag::T,
                    SplitChoice::TC {
                        t_half,
                        c_neighbour,
                    },
                ) => {
                    let th = frame.half_index(*t_half);
                    let ch = frame.half_index(t_half.other());
                    if !frame
                        .earlier_t_modules(&g, &lab, ch, Some(th))
                        .contains(c_neighbour)
                    {
                        return impossible("conditioned half needs an earlier T neighbour");
                    }
                    // Neighbours of the split vertex stay with its T half.
                    for (_, n) in tags.values_mut() {
                        if *n == Some(k) {
                            *n = Some(th);
                        }
                    }
                    tags.insert(th, (Tag::T, None));
                    tags.insert(ch, (Tag::C, Some(*c_neighbour)));
                    if x == k {
                        x = th;
                    }
                }
                (
                    Tag::C,
                    SplitChoice::BothC {
                        keeper,
                        other_neighbour,
                    },
                ) => {
                    let kh = frame.half_index(*keeper);
                    let oh = frame.half_index(keeper.other());
                    if !frame
                        .earlier_t_modules(&g, &lab, oh, None)
                        .contains(other_neighbour)
                    {
                        return impossible("second conditioned half needs an earlier T neighbour");
                    }
                    tags.insert(kh, (Tag::C, nbr_k));
                    tags.insert(oh, (Tag::C, Some(*other_neighbour)));
                }
                _ => return impossible("split rule does not match the vertex tag"),
            }
            Labelled { tags, x }
        };
        let d = lab
            .to_decision(&frame.ms, &g, theta)
            .map_err(Rejection::Invalid)?;
        ds.insert(theta, d);
    }
    WalkState::new(net, frame.ms, g, ds, state.mode())
        .map_err(|e| Rejection::Invalid(e.to_string()))
}

/// Applies `mv` to `state`, checking that it is admissible.
pub fn apply(
    net: &BayesNet,
    state: &WalkState,
    mv: &Move,
) -> std::result::Result<WalkState, Rejection> {
    match mv {
        Move::Merge {
            a,
            b,
            position,
            keep,
        } => apply_merge(net, state, *a, *b, *position, keep),
        Move::Split {
            module,
            part,
            positions,
            choices,
        } => apply_split(net, state, *module, part, *positions, choices),
        _ => apply_decision_move(net, state, mv),
    }
}

/// True when `sample_move` at `state` can produce `mv`.
pub fn supports(net: &BayesNet, state: &WalkState, mv: &Move, probs: &MoveProbs) -> bool {
    if probs.branch_probability(mv.kind()) <= 0.0 {
        return false;
    }
    if let Move::Split { choices, .. } = mv {
        for c in choices.values() {
            match c {
                SplitChoice::BothT { .. } if probs.q5 <= 0.0 => return false,
                SplitChoice::TC { .. } if probs.q5 >= 1.0 => return false,
                _ => {}
            }
        }
        // Splits of modules whose core cannot be bipartitioned are never drawn.
    }
    apply(net, state, mv).is_ok()
}

// Sampling.

fn pick<T: Copy, R: Rng + ?Sized>(rng: &mut R, items: &[T]) -> Option<T> {
    items.choose(rng).copied()
}

/// Draws a proposal by walking the move tree.
pub fn sample_move<R: Rng + ?Sized>(
    net: &BayesNet,
    state: &WalkState,
    probs: &MoveProbs,
    rng: &mut R,
) -> std::result::Result<Move, (MoveKind, Rejection)> {
    if rng.gen_bool(probs.q0) {
        sample_decision_move(state, probs, rng)
    } else if rng.gen_bool(probs.q4) {
        sample_merge(state, rng).map_err(|r| (MoveKind::Merge, r))
    } else {
        sample_split(net, state, probs, rng).map_err(|r| (MoveKind::Split, r))
    }
}

fn sample_decision_move<R: Rng + ?Sized>(
    state: &WalkState,
    probs: &MoveProbs,
    rng: &mut R,
) -> std::result::Result<Move, (MoveKind, Rejection)> {
    let shared = shared_list(state);
    let perturb_graph = rng.gen_bool(probs.q1);
    let kind = if !perturb_graph {
        MoveKind::ChangeX
    } else if rng.gen_bool(probs.q2) {
        if rng.gen_bool(probs.q3) {
            MoveKind::EdgeDelete
        } else {
            MoveKind::Rewire
        }
    } else {
        MoveKind::TToC
    };
    let fail = |m: &str| Err((kind, Rejection::Impossible(m.to_owned())));
    let Some(theta) = pick(rng, &shared) else {
        return fail("no shared parameters");
    };
    let d = &state.ds[&theta];
    match kind {
        MoveKind::EdgeDelete | MoveKind::Rewire => {
            let Some(vertex) = pick(rng, &c_vertices(d)) else {
                return fail("no T-C edges");
            };
            if kind == MoveKind::EdgeDelete {
                return Ok(Move::EdgeDelete { theta, vertex });
            }
            match pick(rng, &rewire_targets(d, vertex)) {
                Some(to) => Ok(Move::Rewire { theta, vertex, to }),
                None => fail("no other earlier T vertex to rewire to"),
            }
        }
        MoveKind::TToC => {
            let Some(vertex) = pick(rng, &t_to_c_candidates(d)) else {
                return fail("no isolated T vertex may become C");
            };
            let to = pick(rng, &earlier_t(d, vertex)).expect("the first vertex is T");
            Ok(Move::TToC { theta, vertex, to })
        }
        _ => match pick(rng, &x_candidates(d)) {
            Some(to) => Ok(Move::ChangeX { theta, to }),
            None => fail("no other T vertex to keep"),
        },
    }
}

/// Per-parameter neighbour choices for merging `a` and `b`.
fn sample_keep<R: Rng + ?Sized>(
    state: &WalkState,
    a: usize,
    b: usize,
    rng: &mut R,
) -> BTreeMap<NodeIdx, Half> {
    let mut keep = BTreeMap::new();
    for (theta, d) in &state.ds {
        let lab = Labelled::of(&state.ms, &state.g, d);
        if let (Some((Tag::C, na)), Some((Tag::C, nb))) = (lab.tags.get(&a), lab.tags.get(&b)) {
            if na != nb {
                keep.insert(*theta, if rng.gen_bool(0.5) { Half::A } else { Half::B });
            }
        }
    }
    keep
}

fn sample_merge<R: Rng + ?Sized>(
    state: &WalkState,
    rng: &mut R,
) -> std::result::Result<Move, Rejection> {
    let n = state.ms.len();
    if n < 2 {
        return impossible("a single module cannot be merged");
    }
    for _ in 0..MAX_MERGE_ATTEMPTS {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        if !contraction_acyclic(&state.g, a, b) {
            continue;
        }
        let positions = MergeFrame::new(state, a, b).positions();
        let Some(position) = pick(rng, &positions) else {
            continue;
        };
        let keep = sample_keep(state, a, b, rng);
        return Ok(Move::Merge {
            a,
            b,
            position,
            keep,
        });
    }
    impossible("no acyclic merge found")
}

fn sample_split<R: Rng + ?Sized>(
    net: &BayesNet,
    state: &WalkState,
    probs: &MoveProbs,
    rng: &mut R,
) -> std::result::Result<Move, Rejection> {
    let k = rng.gen_range(0..state.ms.len());
    let core: Vec<NodeIdx> = state.ms.module(k).core.iter().copied().collect();
    if core.len() < 2 {
        return impossible("core has a single data node");
    }
    // Uniform over unordered proper bipartitions: the first core node always
    // goes to half A, the mask places the rest, and the all-ones mask is
    // excluded.
    let rest = core.len() - 1;
    let mask = rng.gen_range(0..(1u64 << rest) - 1);
    let part: BTreeSet<NodeIdx> = std::iter::once(core[0])
        .chain(
            (0..rest)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| core[i + 1]),
        )
        .collect();
    let frame = SplitFrame::new(net, state, k, &part)?;
    let Some(positions) = pick(rng, &frame.positions()) else {
        return impossible("no ordering places both halves");
    };
    let g = frame.graph(positions).expect("sampled positions are valid");
    let mut choices = BTreeMap::new();
    for (theta, lab) in frame.split_params(state) {
        let (tag_k, _) = lab.tags[&k];
        let choice = match tag_k {
            Tag::T if rng.gen_bool(probs.q5) => {
                let x_to = if rng.gen_bool(0.5) { Half::A } else { Half::B };
                let wiring = lab
                    .tags
                    .iter()
                    .filter(|(_, (t, n))| *t == Tag::C && *n == Some(k))
                    .map(|(m, _)| (*m, if rng.gen_bool(0.5) { Half::A } else { Half::B }))
                    .collect();
                SplitChoice::BothT { x_to, wiring }
            }
            Tag::T => {
                let options: Vec<(Half, Vec<usize>)> = [Half::A, Half::B]
                    .into_iter()
                    .map(|h| {
                        let th = frame.half_index(h);
                        let ch = frame.half_index(h.other());
                        (h, frame.earlier_t_modules(&g, &lab, ch, Some(th)))
                    })
                    .filter(|(_, c)| !c.is_empty())
                    .collect();
                let Some((t_half, cands)) = options.choose(rng) else {
                    return impossible("neither half can be conditioned");
                };
                SplitChoice::TC {
                    t_half: *t_half,
                    c_neighbour: pick(rng, cands).expect("nonempty"),
                }
            }
            Tag::C => {
                let keeper = if rng.gen_bool(0.5) { Half::A } else { Half::B };
                let oh = frame.half_index(keeper.other());
                let cands = frame.earlier_t_modules(&g, &lab, oh, None);
                let Some(other_neighbour) = pick(rng, &cands) else {
                    return Err(Rejection::Invalid(
                        "conditioned split half has no earlier T vertex".into(),
                    ));
                };
                SplitChoice::BothC {
                    keeper,
                    other_neighbour,
                }
            }
        };
        choices.insert(theta, choice);
    }
    Ok(Move::Split {
        module: k,
        part,
        positions,
        choices,
    })
}

/// The move that undoes `mv`, taking `after` back to `before`.
pub fn inverse(before: &WalkState, mv: &Move, after: &WalkState) -> Move {
    match mv {
        Move::EdgeDelete { theta, vertex } => Move::TToC {
            theta: *theta,
            vertex: *vertex,
            to: before.ds[theta].cond[*vertex].expect("deleted edge had a neighbour"),
        },
        Move::Rewire { theta, vertex, .. } => Move::Rewire {
            theta: *theta,
            vertex: *vertex,
            to: before.ds[theta].cond[*vertex].expect("rewired vertex had a neighbour"),
        },
        Move::TToC { theta, vertex, .. } => Move::EdgeDelete {
            theta: *theta,
            vertex: *vertex,
        },
        Move::ChangeX { theta, .. } => Move::ChangeX {
            theta: *theta,
            to: before.ds[theta].x,
        },
        Move::Merge { a, b, .. } => invert_merge(before, *a, *b, after),
        Move::Split { module, .. } => invert_split(before, *module, after),
    }
}

fn invert_merge(before: &WalkState, a: usize, b: usize, after: &WalkState) -> Move {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let f = |m: usize| MergeFrame::map(lo, hi, m);
    // Half A of the split sits at `lo`, half B is appended.
    let n_after = after.ms.len();
    let new_index = |m: usize| {
        if m == lo {
            lo
        } else if m == hi {
            n_after
        } else {
            f(m)
        }
    };
    let part = before.ms.module(lo).core.clone();
    let positions = (before.g.position(lo), before.g.position(hi));
    let mut choices = BTreeMap::new();
    for &theta in before.ms.shared_params() {
        let lab = Labelled::of(&before.ms, &before.g, &before.ds[&theta]);
        let (Some(&(t_lo, n_lo)), Some(&(t_hi, n_hi))) = (lab.tags.get(&lo), lab.tags.get(&hi))
        else {
            continue;
        };
        let half_of = |m: usize| if m == lo { Half::A } else { Half::B };
        let choice = match (t_lo, t_hi) {
            (Tag::T, Tag::T) => SplitChoice::BothT {
                x_to: if lab.x == hi { Half::B } else { Half::A },
                wiring: lab
                    .tags
                    .iter()
                    .filter_map(|(m, (t, n))| match (t, n) {
                        (Tag::C, Some(n)) if *n == lo || *n == hi => Some((f(*m), half_of(*n))),
                        _ => None,
                    })
                    .collect(),
            },
            (Tag::T, Tag::C) => SplitChoice::TC {
                t_half: Half::A,
                c_neighbour: new_index(n_hi.expect("C vertex has a neighbour")),
            },
            (Tag::C, Tag::T) => SplitChoice::TC {
                t_half: Half::B,
                c_neighbour: new_index(n_lo.expect("C vertex has a neighbour")),
            },
            (Tag::C, Tag::C) => {
                // The merged vertex kept one neighbour; the other half gets
                // its original one back.
                let kept = after
                    .ds
                    .get(&theta)
                    .map(|d| Labelled::of(&after.ms, &after.g, d).tags[&lo].1);
                let keeper = if kept == Some(n_lo.map(f)) {
                    Half::A
                } else {
                    Half::B
                };
                let other = match keeper {
                    Half::A => n_hi,
                    Half::B => n_lo,
                };
                SplitChoice::BothC {
                    keeper,
                    other_neighbour: new_index(other.expect("C vertex has a neighbour")),
                }
            }
        };
        choices.insert(theta, choice);
    }
    Move::Split {
        module: lo,
        part,
        positions,
        choices,
    }
}

fn invert_split(before: &WalkState, k: usize, after: &WalkState) -> Move {
    let b = after.ms.len() - 1;
    let position = before.g.position(k);
    let mut keep = BTreeMap::new();
    for (theta, d) in &after.ds {
        let lab = Labelled::of(&after.ms, &after.g, d);
        if let (Some((Tag::C, na)), Some((Tag::C, _))) = (lab.tags.get(&k), lab.tags.get(&b)) {
            let old = Labelled::of(&before.ms, &before.g, &before.ds[theta]).tags[&k].1;
            keep.insert(*theta, if *na == old { Half::A } else { Half::B });
        }
    }
    Move::Merge {
        a: k,
        b,
        position,
        keep,
    }
}

/// Merges the first two modules of the ordering. Such a merge is always
/// acyclic, so repeating it reaches the single-module state.
pub fn force_merge(net: &BayesNet, state: &WalkState) -> std::result::Result<WalkState, Rejection> {
    if state.ms.len() < 2 {
        return impossible("a single module cannot be merged");
    }
    let (a, b) = (state.g.order()[0], state.g.order()[1]);
    apply_merge(net, state, a, b, 0, &BTreeMap::new())
}

// Scoring and the chain.

/// Scores walk states; higher is better.
pub trait Scorer {
    fn score(&self, net: &BayesNet, state: &WalkState) -> f64;
}

impl<F: Fn(&BayesNet, &WalkState) -> f64> Scorer for F {
    fn score(&self, net: &BayesNet, state: &WalkState) -> f64 {
        self(net, state)
    }
}

/// Held-out log predictive density; evaluation failures score −∞.
#[derive(Clone, Debug)]
pub struct HeldoutScorer {
    pub train: Evidence,
    pub heldout: Evidence,
    pub caps: Caps,
}

impl Scorer for HeldoutScorer {
    fn score(&self, net: &BayesNet, state: &WalkState) -> f64 {
        match score_log_pred_with(
            net,
            &state.posterior,
            &self.train,
            &self.heldout,
            &self.caps,
        ) {
            Ok(s) => s.log_pred,
            Err(e) => {
                debug!("scoring failed: {e}");
                f64::NEG_INFINITY
            }
        }
    }
}

/// One line of the walk trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub kind: MoveKind,
    pub accepted: bool,
    /// Score of the chain's state after the step.
    pub score: f64,
    pub detail: Value,
}

impl TraceRecord {
    pub fn to_json(&self) -> Value {
        let score = if self.score.is_finite() {
            json!(self.score)
        } else {
            json!("-inf")
        };
        json!({"iter": self.iter, "move": self.kind.as_str(), "accepted": self.accepted, "score": score, "detail": self.detail})
    }
}

/// Metropolis-style acceptance of a score change.
pub fn accept<R: Rng + ?Sized>(current: f64, proposed: f64, temperature: f64, rng: &mut R) -> bool {
    if proposed >= current {
        return true;
    }
    if proposed == f64::NEG_INFINITY {
        return false;
    }
    rng.gen::<f64>() < ((proposed - current) / temperature).exp()
}

fn ensure_scored(net: &BayesNet, state: &mut WalkState, scorer: &dyn Scorer) -> f64 {
    if let Some(s) = state.score {
        return s;
    }
    let s = scorer.score(net, state);
    state.score = Some(s);
    s
}

/// One step of the chain. Returns the next state and the trace record.
pub fn step<R: Rng + ?Sized>(
    net: &BayesNet,
    state: &WalkState,
    scorer: &dyn Scorer,
    probs: &MoveProbs,
    rng: &mut R,
    iter: usize,
) -> (WalkState, TraceRecord) {
    let mut current = state.clone();
    let score = ensure_scored(net, &mut current, scorer);
    let proposal = sample_move(net, &current, probs, rng);
    let (kind, outcome, detail) = match proposal {
        Err((kind, r)) => (kind, Err(r), Value::Null),
        Ok(mv) => {
            let detail = mv.to_json(net, &current);
            (mv.kind(), apply(net, &current, &mv), detail)
        }
    };
    match outcome {
        Err(r) => {
            if let Rejection::Invalid(m) = &r {
                log::warn!("move produced an invalid state: {m}");
            }
            let record = TraceRecord {
                iter,
                kind,
                accepted: false,
                score,
                detail: json!({"move": detail, "rejected": r.to_string()}),
            };
            (current, record)
        }
        Ok(mut next) => {
            let proposed = ensure_scored(net, &mut next, scorer);
            let accepted = accept(score, proposed, probs.temperature, rng);
            let record = TraceRecord {
                iter,
                kind,
                accepted,
                score: if accepted { proposed } else { score },
                detail: json!({"move": detail, "proposed_score": if proposed.is_finite() { json!(proposed) } else { json!("-inf") }}),
            };
            (if accepted { next } else { current }, record)
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: Vec<TraceRecord>,
    pub best: WalkState,
    pub last: WalkState,
}

/// Runs the chain from [`WalkState::initial`] for `iterations` steps.
pub fn run(
    net: &BayesNet,
    partition: &Partition,
    iterations: usize,
    probs: &MoveProbs,
    scorer: &dyn Scorer,
    seed: u64,
    mode: TildeMode,
) -> Result<RunResult> {
    let start = WalkState::initial(net, partition, mode)?;
    run_from(net, start, iterations, probs, scorer, seed)
}

pub fn run_from(
    net: &BayesNet,
    mut start: WalkState,
    iterations: usize,
    probs: &MoveProbs,
    scorer: &dyn Scorer,
    seed: u64,
) -> Result<RunResult> {
    probs.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ensure_scored(net, &mut start, scorer);
    let mut best = start.clone();
    let mut state = start;
    let mut trace = Vec::with_capacity(iterations);
    for iter in 0..iterations {
        let (next, record) = step(net, &state, scorer, probs, &mut rng, iter);
        if next.score > best.score {
            best = next.clone();
        }
        state = next;
        trace.push(record);
    }
    Ok(RunResult {
        trace,
        best,
        last: state,
    })
}
