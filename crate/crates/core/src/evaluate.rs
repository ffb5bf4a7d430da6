//! Exact evaluation of cut-posteriors on fully discrete networks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Caps;
use crate::error::{Error, Result};
use crate::network::{BayesNet, Evidence, NodeIdx};
use crate::posterior::{CutPosterior, OrphanTerm, ParamVersion, TildeMode, UpdateTerm};

pub const DEFAULT_MAX_CELLS: u128 = 10_000_000;

/// Tolerance used when checking that a table is normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A variable of a factor table: the kept version of a parameter, one of its
/// tilde copies, or an unobserved data node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKey {
    Kept(NodeIdx),
    Tilde(NodeIdx, u32),
    Data(NodeIdx),
}

impl VarKey {
    pub fn node(&self) -> NodeIdx {
        match self {
            VarKey::Kept(v) | VarKey::Tilde(v, _) | VarKey::Data(v) => *v,
        }
    }

    pub fn name(&self, net: &BayesNet) -> String {
        match self {
            VarKey::Kept(v) | VarKey::Data(v) => net.name(*v).to_owned(),
            VarKey::Tilde(v, r) => format!("{}~{r}", net.name(*v)),
        }
    }
}

impl From<ParamVersion> for VarKey {
    fn from(pv: ParamVersion) -> Self {
        match pv.rank {
            None => VarKey::Kept(pv.param),
            Some(r) => VarKey::Tilde(pv.param, r),
        }
    }
}

/// Dense table over a list of discrete variables, row-major with the last
/// variable varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTable {
    scope: Vec<(VarKey, usize)>,
    values: Vec<f64>,
}

/// Calls `f` on every assignment of `states`, last position fastest.
pub(crate) fn for_each_assignment(states: &[usize], mut f: impl FnMut(&[usize])) {
    if states.contains(&0) {
        return;
    }
    let mut cur = vec![0usize; states.len()];
    loop {
        f(&cur);
        let mut k = states.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < states[k] {
                break;
            }
            cur[k] = 0;
        }
    }
}

fn cell_count(states: impl IntoIterator<Item = usize>) -> u128 {
    states
        .into_iter()
        .fold(1u128, |acc, s| acc.saturating_mul(s as u128))
}

fn check_cells(states: &[usize], caps: &Caps, what: &'static str) -> Result<()> {
    let cells = cell_count(states.iter().copied());
    if cells > caps.max_cells {
        return Err(Error::CapExceeded {
            what,
            actual: cells,
            cap: caps.max_cells,
        });
    }
    Ok(())
}

impl FactorTable {
    pub fn new(scope: Vec<(VarKey, usize)>, values: Vec<f64>) -> Result<Self> {
        let keys: BTreeSet<VarKey> = scope.iter().map(|(k, _)| *k).collect();
        if keys.len() != scope.len() {
            return Err(Error::Inconsistent(
                "factor scope repeats a variable".into(),
            ));
        }
        let expected = cell_count(scope.iter().map(|(_, s)| *s));
        if expected != values.len() as u128 {
            return Err(Error::Inconsistent(format!(
                "factor has {} values, scope needs {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Inconsistent(
                "factor values must be finite and nonnegative".into(),
            ));
        }
        Ok(FactorTable { scope, values })
    }

    /// The empty-scope table holding `v`.
    pub fn scalar(v: f64) -> Self {
        FactorTable {
            scope: Vec::new(),
            values: vec![v],
        }
    }

    /// Table over one variable with a point mass on `state`.
    pub fn point_mass(key: VarKey, states: usize, state: usize) -> Self {
        let mut values = vec![0.0; states];
        values[state] = 1.0;
        FactorTable {
            scope: vec![(key, states)],
            values,
        }
    }

    pub fn scope(&self) -> &[(VarKey, usize)] {
        &self.scope
    }

    pub fn keys(&self) -> Vec<VarKey> {
        self.scope.iter().map(|(k, _)| *k).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.scope.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn position(&self, key: VarKey) -> Option<usize> {
        self.scope.iter().position(|(k, _)| *k == key)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.scope.len()];
        for k in (0..self.scope.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.scope[k + 1].1;
        }
        strides
    }

    /// Value at an assignment given in scope order.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        let idx = self
            .strides()
            .iter()
            .zip(assignment)
            .map(|(s, a)| s * a)
            .sum::<usize>();
        self.values[idx]
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self> {
        let z = self.sum();
        if z <= 0.0 {
            return Err(Error::ZeroNormalizer(
                "every configuration has zero probability".into(),
            ));
        }
        Ok(FactorTable {
            scope: self.scope.clone(),
            values: self.values.iter().map(|v| v / z).collect(),
        })
    }

    /// Pointwise product over the union of both scopes; new variables from
    /// `other` are appended.
    pub fn product(&self, other: &FactorTable) -> Result<FactorTable> {
        let mut scope = self.scope.clone();
        for &(k, s) in &other.scope {
            match scope.iter().find(|(q, _)| *q == k) {
                Some((_, t)) if *t != s => {
                    return Err(Error::Inconsistent(format!(
                        "state count mismatch for {k:?}"
                    )))
                }
                Some(_) => {}
                None => scope.push((k, s)),
            }
        }
        let map_other: Vec<usize> = other
            .scope
            .iter()
            .map(|(k, _)| {
                scope
                    .iter()
                    .position(|(q, _)| q == k)
                    .expect("merged scope")
            })
            .collect();
        let (sa, sb) = (self.strides(), other.strides());
        let n_self = self.scope.len();
        let states: Vec<usize> = scope.iter().map(|(_, s)| *s).collect();
        let mut values = Vec::with_capacity(cell_count(states.iter().copied()) as usize);
        for_each_assignment(&states, |a| {
            let ia: usize = (0..n_self).map(|k| a[k] * sa[k]).sum();
            let ib: usize = map_other.iter().zip(&sb).map(|(p, s)| a[*p] * s).sum();
            values.push(self.values[ia] * other.values[ib]);
        });
        Ok(FactorTable { scope, values })
    }

    /// Sums over every variable not in `keep`, returning a table whose scope
    /// follows the order of `keep`.
    pub fn marginal(&self, keep: &[VarKey]) -> Result<FactorTable> {
        let positions: Vec<usize> = keep
            .iter()
            .map(|k| {
                self.position(*k).ok_or_else(|| {
                    Error::Inconsistent(format!("variable {k:?} not in factor scope"))
                })
            })
            .collect::<Result<_>>()?;
        let scope: Vec<(VarKey, usize)> = positions.iter().map(|p| self.scope[*p]).collect();
        let out_states: Vec<usize> = scope.iter().map(|(_, s)| *s).collect();
        let mut out_strides = vec![1usize; scope.len()];
        for k in (0..scope.len().saturating_sub(1)).rev() {
            out_strides[k] = out_strides[k + 1] * out_states[k + 1];
        }
        let mut values = vec![0.0; cell_count(out_states.iter().copied()) as usize];
        let states: Vec<usize> = self.scope.iter().map(|(_, s)| *s).collect();
        let mut i = 0;
        for_each_assignment(&states, |a| {
            let j: usize = positions
                .iter()
                .zip(&out_strides)
                .map(|(p, s)| a[*p] * s)
                .sum();
            values[j] += self.values[i];
            i += 1;
        });
        Ok(FactorTable { scope, values })
    }

    pub fn sum_out(&self, key: VarKey) -> Result<FactorTable> {
        let keep: Vec<VarKey> = self.keys().into_iter().filter(|k| *k != key).collect();
        self.marginal(&keep)
    }

    /// Largest elementwise difference after aligning `other` to this scope.
    pub fn max_abs_diff(&self, other: &FactorTable) -> Option<f64> {
        let mine: BTreeSet<VarKey> = self.keys().into_iter().collect();
        let theirs: BTreeSet<VarKey> = other.keys().into_iter().collect();
        if mine != theirs
            || self
                .scope
                .iter()
                .any(|(k, s)| other.scope[other.position(*k).unwrap()].1 != *s)
        {
            return None;
        }
        let aligned = other.marginal(&self.keys()).ok()?;
        Some(
            self.values
                .iter()
                .zip(&aligned.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn to_json(&self, net: &BayesNet) -> Value {
        json!({
            "scope": self.scope.iter().map(|(k, s)| json!({"var": k.name(net), "states": s})).collect::<Vec<_>>(),
            "values": self.values,
        })
    }
}

/// Where a node's state comes from while a factor is enumerated.
#[derive(Clone, Copy)]
enum Source {
    Slot(usize),
    Fixed(usize),
}

/// Evaluates the product of `cpts` (node, version lookup) over all
/// assignments of `slot_states`. `lookup` maps a node that appears as a CPT
/// argument to its source.
fn enumerate_product(
    net: &BayesNet,
    slot_states: &[usize],
    factors: &[(NodeIdx, Source)],
    lookup: &BTreeMap<NodeIdx, Source>,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(cell_count(slot_states.iter().copied()) as usize);
    let resolve = |src: Source, a: &[usize]| match src {
        Source::Slot(i) => a[i],
        Source::Fixed(s) => s,
    };
    for_each_assignment(slot_states, |a| {
        let mut w = 1.0;
        for &(v, src) in factors {
            let state = resolve(src, a);
            w *= net.prob(v, state, |p| resolve(lookup[&p], a));
            if w == 0.0 {
                break;
            }
        }
        out.push(w);
    });
    out
}

/// Source for a data node that is not enumerated.
fn data_source(net: &BayesNet, evidence: &Evidence, v: NodeIdx) -> Result<Source> {
    evidence
        .get(v)
        .map(Source::Fixed)
        .ok_or_else(|| Error::MissingEvidence(net.name(v).to_owned()))
}

/// Conditional table of one nontrivial term over its conditioned versions
/// (first) and its updated and tilde variables (after). Each conditioning
/// configuration is normalized separately; configurations under which the
/// term's evidence is impossible stay zero.
pub fn term_kernel(
    net: &BayesNet,
    term: &UpdateTerm,
    evidence: &Evidence,
    caps: &Caps,
) -> Result<FactorTable> {
    net.require_discrete()?;
    let cond: Vec<ParamVersion> = term.cond_param.clone();
    let free: Vec<ParamVersion> = term
        .update
        .iter()
        .map(|v| ParamVersion::kept(*v, term.module))
        .chain(term.tilde.iter().copied())
        .collect();
    let versions: Vec<ParamVersion> = cond.iter().chain(&free).copied().collect();
    let mut slot_states: Vec<usize> = versions.iter().map(|pv| net.states(pv.param)).collect();
    let mut lookup: BTreeMap<NodeIdx, Source> = versions
        .iter()
        .enumerate()
        .map(|(i, pv)| (pv.param, Source::Slot(i)))
        .collect();
    for &d in &term.core {
        let src = match evidence.get(d) {
            Some(s) => Source::Fixed(s),
            None => {
                slot_states.push(net.states(d));
                Source::Slot(slot_states.len() - 1)
            }
        };
        lookup.insert(d, src);
    }
    let mut factors: Vec<(NodeIdx, Source)> = versions
        .iter()
        .map(|pv| (pv.param, lookup[&pv.param]))
        .collect();
    factors.extend(term.core.iter().map(|d| (*d, lookup[d])));
    for &(v, _) in &factors {
        for &p in net.parents(v) {
            if lookup.contains_key(&p) {
                continue;
            }
            if net.is_data(p) {
                lookup.insert(p, data_source(net, evidence, p)?);
            } else {
                return Err(Error::Inconsistent(format!(
                    "parent `{}` of `{}` has no version in the term",
                    net.name(p),
                    net.name(v)
                )));
            }
        }
    }
    check_cells(&slot_states, caps, "term table cells")?;
    let values = enumerate_product(net, &slot_states, &factors, &lookup);
    let mut scope: Vec<(VarKey, usize)> = versions
        .iter()
        .map(|pv| (VarKey::from(*pv), net.states(pv.param)))
        .collect();
    let keys: Vec<VarKey> = scope.iter().map(|(k, _)| *k).collect();
    scope.extend(
        term.core
            .iter()
            .filter(|d| !evidence.contains(**d))
            .map(|d| (VarKey::Data(*d), net.states(*d))),
    );
    let mut table = FactorTable { scope, values }.marginal(&keys)?;
    let block: usize = free.iter().map(|pv| net.states(pv.param)).product();
    let mut any = false;
    for chunk in table.values.chunks_mut(block) {
        let z: f64 = chunk.iter().sum();
        if z > 0.0 {
            any = true;
            chunk.iter_mut().for_each(|v| *v /= z);
        }
    }
    if !any {
        return Err(Error::ZeroNormalizer(format!(
            "module {} assigns zero probability to its evidence",
            term.module
        )));
    }
    Ok(table)
}

/// Evaluates one term: its kernel weighted by the tables of its conditioned
/// versions, summed over them and normalized over the term's updated and
/// tilde variables.
pub fn eval_term(
    net: &BayesNet,
    term: &UpdateTerm,
    evidence: &Evidence,
    given: &BTreeMap<ParamVersion, FactorTable>,
) -> Result<FactorTable> {
    eval_term_with(net, term, evidence, given, &Caps::default())
}

pub fn eval_term_with(
    net: &BayesNet,
    term: &UpdateTerm,
    evidence: &Evidence,
    given: &BTreeMap<ParamVersion, FactorTable>,
    caps: &Caps,
) -> Result<FactorTable> {
    if term.trivial {
        return Ok(FactorTable::scalar(1.0));
    }
    let mut table = term_kernel(net, term, evidence, caps)?;
    for pv in &term.cond_param {
        let g = given.get(pv).ok_or_else(|| {
            Error::Inconsistent(format!(
                "no table given for the conditioned version of `{}`",
                net.name(pv.param)
            ))
        })?;
        let states = net.states(pv.param);
        if g.len() != states {
            return Err(Error::Inconsistent(format!(
                "given table for `{}` has {} entries, expected {states}",
                net.name(pv.param),
                g.len()
            )));
        }
        let key = VarKey::from(*pv);
        let weight = FactorTable {
            scope: vec![(key, states)],
            values: g.values.clone(),
        };
        table = table.product(&weight)?.sum_out(key)?;
    }
    table.normalized()
}

/// Product of the orphan parameters' tables given their parents.
fn orphan_factor(
    net: &BayesNet,
    orphan: &OrphanTerm,
    evidence: &Evidence,
    caps: &Caps,
) -> Result<FactorTable> {
    let versions: Vec<VarKey> = orphan
        .cond_param
        .iter()
        .map(|pv| VarKey::from(*pv))
        .chain(orphan.params.iter().map(|v| VarKey::Kept(*v)))
        .collect();
    let slot_states: Vec<usize> = versions.iter().map(|k| net.states(k.node())).collect();
    let mut lookup: BTreeMap<NodeIdx, Source> = versions
        .iter()
        .enumerate()
        .map(|(i, k)| (k.node(), Source::Slot(i)))
        .collect();
    for &d in &orphan.cond_data {
        lookup.insert(d, data_source(net, evidence, d)?);
    }
    check_cells(&slot_states, caps, "orphan table cells")?;
    let factors: Vec<(NodeIdx, Source)> = orphan.params.iter().map(|v| (*v, lookup[v])).collect();
    let values = enumerate_product(net, &slot_states, &factors, &lookup);
    Ok(FactorTable {
        scope: versions
            .iter()
            .zip(&slot_states)
            .map(|(k, s)| (*k, *s))
            .collect(),
        values,
    })
}

/// Marginal prior of `theta`, summing over its ancestors.
pub fn prior_marginal(net: &BayesNet, theta: NodeIdx) -> Result<Vec<f64>> {
    net.require_discrete()?;
    let mut nodes: Vec<NodeIdx> = net.ancestors(theta).into_iter().collect();
    nodes.push(theta);
    nodes.sort();
    let states: Vec<usize> = nodes.iter().map(|v| net.states(*v)).collect();
    check_cells(&states, &Caps::default(), "prior table cells")?;
    let slot: BTreeMap<NodeIdx, usize> = nodes.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let t = slot[&theta];
    let mut out = vec![0.0; net.states(theta)];
    for_each_assignment(&states, |a| {
        let w: f64 = nodes
            .iter()
            .map(|v| net.prob(*v, a[slot[v]], |p| a[slot[&p]]))
            .product();
        out[a[t]] += w;
    });
    Ok(out)
}

/// The normalized cut-posterior over the kept version of every parameter,
/// in node order.
pub fn eval_posterior(
    net: &BayesNet,
    p: &CutPosterior,
    evidence: &Evidence,
) -> Result<FactorTable> {
    eval_posterior_with(net, p, evidence, &Caps::default())
}

pub fn eval_posterior_with(
    net: &BayesNet,
    p: &CutPosterior,
    evidence: &Evidence,
    caps: &Caps,
) -> Result<FactorTable> {
    net.require_discrete()?;
    let mut joint = FactorTable::scalar(1.0);
    for term in p.terms.iter().filter(|t| !t.trivial) {
        joint = joint.product(&term_kernel(net, term, evidence, caps)?)?;
        check_cells(
            &joint.scope.iter().map(|(_, s)| *s).collect::<Vec<_>>(),
            caps,
            "posterior table cells",
        )?;
    }
    if p.mode == TildeMode::PriorWeighted {
        for tv in &p.tilde_vars {
            let key = VarKey::from(*tv);
            if joint.position(key).is_some() {
                let prior = prior_marginal(net, tv.param)?;
                joint = joint.product(&FactorTable {
                    scope: vec![(key, prior.len())],
                    values: prior,
                })?;
            }
        }
    }
    if let Some(o) = &p.orphan {
        joint = joint.product(&orphan_factor(net, o, evidence, caps)?)?;
    }
    let kept: Vec<VarKey> = net.param_nodes().map(VarKey::Kept).collect();
    joint.marginal(&kept)?.normalized()
}

/// Exact joint posterior over all parameters by brute force.
pub fn full_bayes(net: &BayesNet, evidence: &Evidence) -> Result<FactorTable> {
    full_bayes_with(net, evidence, &Caps::default())
}

pub fn full_bayes_with(net: &BayesNet, evidence: &Evidence, caps: &Caps) -> Result<FactorTable> {
    net.require_discrete()?;
    let params: Vec<NodeIdx> = net.param_nodes().collect();
    let hidden: Vec<NodeIdx> = net
        .data_nodes()
        .filter(|d| !evidence.contains(*d))
        .collect();
    let slots: Vec<NodeIdx> = params.iter().chain(&hidden).copied().collect();
    let states: Vec<usize> = slots.iter().map(|v| net.states(*v)).collect();
    check_cells(&states, caps, "full joint cells")?;
    let mut lookup: BTreeMap<NodeIdx, Source> = slots
        .iter()
        .enumerate()
        .map(|(i, v)| (*v, Source::Slot(i)))
        .collect();
    for (d, s) in evidence.iter() {
        lookup.insert(d, Source::Fixed(s));
    }
    let factors: Vec<(NodeIdx, Source)> = net.indices().map(|v| (v, lookup[&v])).collect();
    let values = enumerate_product(net, &states, &factors, &lookup);
    let mut scope: Vec<(VarKey, usize)> = params
        .iter()
        .map(|v| (VarKey::Kept(*v), net.states(*v)))
        .collect();
    let keep: Vec<VarKey> = scope.iter().map(|(k, _)| *k).collect();
    scope.extend(hidden.iter().map(|d| (VarKey::Data(*d), net.states(*d))));
    FactorTable { scope, values }
        .marginal(&keep)?
        .normalized()
        .map_err(|_| {
            Error::ZeroNormalizer("the evidence has zero probability under the network".into())
        })
}

/// Held-out log predictive density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub log_pred: f64,
    pub per_node: BTreeMap<String, f64>,
}

impl Score {
    /// JSON report; an infinite score is written as the string "-inf".
    pub fn to_json(&self) -> Value {
        let num = |v: f64| {
            if v.is_finite() {
                json!(v)
            } else {
                json!("-inf")
            }
        };
        json!({
            "log_pred": num(self.log_pred),
            "per_node": self.per_node.iter().map(|(k, v)| (k.clone(), num(*v))).collect::<serde_json::Map<_, _>>(),
        })
    }
}

/// Probability of the held-out states given the parameters and training
/// data, for every parameter configuration. Returns (joint predictive,
/// per-node predictives) as tables indexed like [`full_bayes`].
fn predictive_tables(
    net: &BayesNet,
    train: &Evidence,
    heldout: &Evidence,
    caps: &Caps,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let params: Vec<NodeIdx> = net.param_nodes().collect();
    let held: Vec<(NodeIdx, usize)> = heldout.iter().collect();
    let free: Vec<NodeIdx> = net.data_nodes().filter(|d| !train.contains(*d)).collect();
    let p_states: Vec<usize> = params.iter().map(|v| net.states(*v)).collect();
    let f_states: Vec<usize> = free.iter().map(|v| net.states(*v)).collect();
    let all: Vec<usize> = p_states.iter().chain(&f_states).copied().collect();
    check_cells(&all, caps, "predictive cells")?;
    let slots: Vec<NodeIdx> = params.iter().chain(&free).copied().collect();
    let slot: BTreeMap<NodeIdx, usize> = slots.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let held_slots: Vec<(usize, usize)> = held.iter().map(|(v, s)| (slot[v], *s)).collect();
    let n_cfg = cell_count(p_states.iter().copied()) as usize;
    let mut train_mass = vec![0.0; n_cfg];
    let mut joint_mass = vec![0.0; n_cfg];
    let mut node_mass = vec![vec![0.0; n_cfg]; held.len()];
    let f_cells = cell_count(f_states.iter().copied()) as usize;
    let mut i = 0usize;
    for_each_assignment(&all, |a| {
        let cfg = i / f_cells;
        i += 1;
        let state = |v: NodeIdx| match train.get(v) {
            Some(s) => s,
            None => a[slot[&v]],
        };
        let w: f64 = net
            .data_nodes()
            .map(|d| net.prob(d, state(d), state))
            .product();
        if w == 0.0 {
            return;
        }
        train_mass[cfg] += w;
        let mut all_match = true;
        for (j, &(s, want)) in held_slots.iter().enumerate() {
            if a[s] == want {
                node_mass[j][cfg] += w;
            } else {
                all_match = false;
            }
        }
        if all_match {
            joint_mass[cfg] += w;
        }
    });
    let ratio = |num: &[f64]| -> Vec<f64> {
        num.iter()
            .zip(&train_mass)
            .map(|(n, t)| if *t > 0.0 { n / t } else { 0.0 })
            .collect()
    };
    Ok((
        ratio(&joint_mass),
        node_mass.iter().map(|m| ratio(m)).collect(),
    ))
}

/// Log posterior-predictive probability of `heldout` under `p` given `train`.
pub fn score_log_pred(
    net: &BayesNet,
    p: &CutPosterior,
    train: &Evidence,
    heldout: &Evidence,
) -> Result<Score> {
    score_log_pred_with(net, p, train, heldout, &Caps::default())
}

pub fn score_log_pred_with(
    net: &BayesNet,
    p: &CutPosterior,
    train: &Evidence,
    heldout: &Evidence,
    caps: &Caps,
) -> Result<Score> {
    let posterior = eval_posterior_with(net, p, train, caps)?;
    score_table(net, &posterior, train, heldout, caps)
}

/// Scores an already evaluated posterior table over the kept parameters.
pub fn score_table(
    net: &BayesNet,
    posterior: &FactorTable,
    train: &Evidence,
    heldout: &Evidence,
    caps: &Caps,
) -> Result<Score> {
    net.require_discrete()?;
    if let Some((v, _)) = heldout.iter().find(|(v, _)| train.contains(*v)) {
        return Err(Error::Evidence(format!(
            "`{}` is both training and held-out evidence",
            net.name(v)
        )));
    }
    if heldout.is_empty() {
        return Ok(Score {
            log_pred: 0.0,
            per_node: BTreeMap::new(),
        });
    }
    let kept: Vec<VarKey> = net.param_nodes().map(VarKey::Kept).collect();
    if posterior.keys() != kept {
        return Err(Error::Inconsistent(
            "posterior table is not over the kept parameters in node order".into(),
        ));
    }
    let (joint, per) = predictive_tables(net, train, heldout, caps)?;
    let mix = |lik: &[f64]| -> f64 {
        let m: f64 = posterior.values.iter().zip(lik).map(|(p, l)| p * l).sum();
        m.ln()
    };
    Ok(Score {
        log_pred: mix(&joint),
        per_node: heldout
            .iter()
            .zip(&per)
            .map(|((v, _), lik)| (net.name(v).to_owned(), mix(lik)))
            .collect(),
    })
}
