//! Bayesian network representation.
//!
//! A [`BayesNet`] is a DAG over named nodes, each declared either a data node
//! or a parameter node. Discrete conditional probability tables are optional,
//! but all-or-nothing: structure alone is enough for symbolic enumeration,
//! numeric evaluation needs every table.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Position of a node in the network's canonical order (document order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIdx(pub usize);

/// Unique, nonempty node name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Network("node id must be nonempty".into()));
        }
        Ok(NodeId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Data,
    Param,
}

/// Discrete conditional probability table. `rows[r][s]` is the probability of
/// state `s` under the `r`-th parent configuration, where configurations are
/// enumerated with the last-listed parent varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub states: usize,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub parents: Vec<NodeIdx>,
    pub cpt: Option<Cpt>,
}

/// An immutable, validated Bayesian network.
#[derive(Clone, Debug)]
pub struct BayesNet {
    nodes: Vec<Node>,
    children: Vec<Vec<NodeIdx>>,
    index: HashMap<String, NodeIdx>,
}

impl PartialEq for BayesNet {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

// Document schema.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpt: Option<Vec<Vec<f64>>>,
}

impl BayesNet {
    /// Parses and validates a network document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(text).map_err(Error::from_json)?;
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: NetworkDoc) -> Result<Self> {
        let mut index = HashMap::with_capacity(doc.nodes.len());
        for (i, n) in doc.nodes.iter().enumerate() {
            NodeId::new(n.id.clone())?;
            if index.insert(n.id.clone(), NodeIdx(i)).is_some() {
                return Err(Error::Network(format!("duplicate node id `{}`", n.id)));
            }
        }

        let with_tables = doc
            .nodes
            .iter()
            .filter(|n| n.states.is_some() || n.cpt.is_some())
            .count();
        if with_tables != 0 && with_tables != doc.nodes.len() {
            return Err(Error::Network(
                "CPTs must be given for every node or for none".into(),
            ));
        }

        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for n in doc.nodes {
            let mut parents = Vec::with_capacity(n.parents.len());
            for p in &n.parents {
                let idx = *index.get(p.as_str()).ok_or_else(|| {
                    Error::Network(format!("node `{}` references unknown parent `{p}`", n.id))
                })?;
                if parents.contains(&idx) {
                    return Err(Error::Network(format!(
                        "node `{}` lists parent `{p}` twice",
                        n.id
                    )));
                }
                parents.push(idx);
            }
            let cpt = match (n.states, n.cpt) {
                (Some(states), Some(rows)) => Some(Cpt { states, rows }),
                (None, None) => None,
                _ => {
                    return Err(Error::Network(format!(
                        "node `{}` must carry both `states` and `cpt`",
                        n.id
                    )))
                }
            };
            nodes.push(Node {
                id: NodeId(n.id),
                kind: n.kind,
                parents,
                cpt,
            });
        }

        let mut children = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            for p in &n.parents {
                children[p.0].push(NodeIdx(i));
            }
        }

        let net = BayesNet {
            nodes,
            children,
            index,
        };
        net.check_acyclic()?;
        net.check_tables()?;
        Ok(net)
    }

    fn check_acyclic(&self) -> Result<()> {
        match topological_sort(self.len(), |v| {
            self.nodes[v].parents.iter().map(|p| p.0).collect()
        }) {
            Ok(_) => Ok(()),
            Err(v) => Err(Error::Cycle(self.nodes[v].id.to_string())),
        }
    }

    fn check_tables(&self) -> Result<()> {
        for n in &self.nodes {
            let Some(cpt) = &n.cpt else { continue };
            if cpt.states < 2 {
                return Err(Error::Network(format!(
                    "node `{}` must have at least 2 states",
                    n.id
                )));
            }
        }
        for n in &self.nodes {
            let Some(cpt) = &n.cpt else { continue };
            let expected: usize = n.parents.iter().map(|p| self.states(*p)).product();
            if cpt.rows.len() != expected {
                return Err(Error::Network(format!(
                    "node `{}` has {} CPT rows, expected {expected}",
                    n.id,
                    cpt.rows.len()
                )));
            }
            for (r, row) in cpt.rows.iter().enumerate() {
                if row.len() != cpt.states {
                    return Err(Error::Network(format!(
                        "node `{}` CPT row {r} has {} entries, expected {}",
                        n.id,
                        row.len(),
                        cpt.states
                    )));
                }
                if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Network(format!(
                        "node `{}` CPT row {r} has a negative or non-finite entry",
                        n.id
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::Network(format!(
                        "node `{}` CPT row {r} sums to {sum}, not 1",
                        n.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.to_string(),
                    kind: n.kind,
                    parents: n.parents.iter().map(|p| self.name(*p).to_owned()).collect(),
                    states: n.cpt.as_ref().map(|c| c.states),
                    cpt: n.cpt.as_ref().map(|c| c.rows.clone()),
                })
                .collect(),
        }
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("network document serializes")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, v: NodeIdx) -> &Node {
        &self.nodes[v.0]
    }

    pub fn name(&self, v: NodeIdx) -> &str {
        self.nodes[v.0].id.as_str()
    }

    pub fn lookup(&self, name: &str) -> Result<NodeIdx> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_owned()))
    }

    pub fn kind(&self, v: NodeIdx) -> NodeKind {
        self.nodes[v.0].kind
    }

    pub fn is_data(&self, v: NodeIdx) -> bool {
        self.kind(v) == NodeKind::Data
    }

    pub fn is_param(&self, v: NodeIdx) -> bool {
        self.kind(v) == NodeKind::Param
    }

    pub fn parents(&self, v: NodeIdx) -> &[NodeIdx] {
        &self.nodes[v.0].parents
    }

    pub fn children(&self, v: NodeIdx) -> &[NodeIdx] {
        &self.children[v.0]
    }

    pub fn indices(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        (0..self.nodes.len()).map(NodeIdx)
    }

    pub fn data_nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.indices().filter(|v| self.is_data(*v))
    }

    pub fn param_nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.indices().filter(|v| self.is_param(*v))
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.parents.len()).sum()
    }

    /// All nodes with a directed path into `v`, excluding `v` itself.
    pub fn ancestors(&self, v: NodeIdx) -> BTreeSet<NodeIdx> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<NodeIdx> = self.parents(v).iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            if seen.insert(u) {
                queue.extend(self.parents(u).iter().copied());
            }
        }
        seen
    }

    /// Like [`ancestors`](Self::ancestors) but looks the node up by name.
    pub fn ancestors_of(&self, name: &str) -> Result<BTreeSet<NodeIdx>> {
        Ok(self.ancestors(self.lookup(name)?))
    }

    /// True when some directed path leads from `v` to a data node.
    pub fn reaches_data(&self, v: NodeIdx) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<NodeIdx> = self.children(v).to_vec();
        while let Some(u) = stack.pop() {
            if self.is_data(u) {
                return true;
            }
            if seen.insert(u) {
                stack.extend(self.children(u).iter().copied());
            }
        }
        false
    }

    pub fn is_discrete(&self) -> bool {
        !self.nodes.is_empty() && self.nodes.iter().all(|n| n.cpt.is_some())
    }

    pub fn require_discrete(&self) -> Result<()> {
        if let Some(n) = self.nodes.iter().find(|n| n.cpt.is_none()) {
            return Err(Error::NotDiscrete(format!("node `{}` has no CPT", n.id)));
        }
        Ok(())
    }

    /// State count of a discrete node. Panics if the network carries no CPTs.
    pub fn states(&self, v: NodeIdx) -> usize {
        self.nodes[v.0]
            .cpt
            .as_ref()
            .expect("states() requires a discrete network")
            .states
    }

    /// `p(v = state | parents)`, with parent states supplied by `parent_state`.
    pub fn prob(
        &self,
        v: NodeIdx,
        state: usize,
        mut parent_state: impl FnMut(NodeIdx) -> usize,
    ) -> f64 {
        let node = &self.nodes[v.0];
        let cpt = node
            .cpt
            .as_ref()
            .expect("prob() requires a discrete network");
        let mut row = 0;
        for p in &node.parents {
            row = row * self.states(*p) + parent_state(*p);
        }
        cpt.rows[row][state]
    }
}

/// Kahn's algorithm over `n` vertices given each vertex's predecessors.
/// Returns the order, or a vertex left on a cycle.
pub(crate) fn topological_sort(
    n: usize,
    preds: impl Fn(usize) -> Vec<usize>,
) -> std::result::Result<Vec<usize>, usize> {
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for (v, d) in indeg.iter_mut().enumerate() {
        for p in preds(v) {
            *d += 1;
            succ[p].push(v);
        }
    }
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|v| indeg[*v] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(std::cmp::Reverse(w));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|v| indeg[*v] > 0).expect("a vertex remains"))
    }
}

/// Observed states for data nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    observed: BTreeMap<NodeIdx, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceDoc {
    pub observe: BTreeMap<String, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(net: &BayesNet, text: &str) -> Result<Self> {
        let doc: EvidenceDoc = serde_json::from_str(text).map_err(Error::from_json)?;
        let mut ev = Evidence::new();
        for (name, state) in doc.observe {
            ev.observe(net, net.lookup(&name)?, state)?;
        }
        Ok(ev)
    }

    /// Builds evidence from `(name, state)` pairs.
    pub fn from_pairs<'a>(
        net: &BayesNet,
        pairs: impl IntoIterator<Item = (&'a str, usize)>,
    ) -> Result<Self> {
        let mut ev = Evidence::new();
        for (name, state) in pairs {
            ev.observe(net, net.lookup(name)?, state)?;
        }
        Ok(ev)
    }

    pub fn observe(&mut self, net: &BayesNet, v: NodeIdx, state: usize) -> Result<()> {
        if !net.is_data(v) {
            return Err(Error::Evidence(format!(
                "`{}` is a parameter node; only data nodes can be observed",
                net.name(v)
            )));
        }
        if net.node(v).cpt.is_some() && state >= net.states(v) {
            return Err(Error::Evidence(format!(
                "state {state} out of range for `{}` ({} states)",
                net.name(v),
                net.states(v)
            )));
        }
        self.observed.insert(v, state);
        Ok(())
    }

    pub fn get(&self, v: NodeIdx) -> Option<usize> {
        self.observed.get(&v).copied()
    }

    pub fn contains(&self, v: NodeIdx) -> bool {
        self.observed.contains_key(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeIdx, usize)> + '_ {
        self.observed.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn to_doc(&self, net: &BayesNet) -> EvidenceDoc {
        EvidenceDoc {
            observe: self
                .iter()
                .map(|(v, s)| (net.name(v).to_owned(), s))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn names(net: &BayesNet, set: &BTreeSet<NodeIdx>) -> BTreeSet<String> {
        set.iter().map(|v| net.name(*v).to_owned()).collect()
    }

    #[test]
    fn three_module_has_seven_nodes_and_edges() {
        let net = fixtures::three_module();
        assert_eq!(net.len(), 7);
        assert_eq!(net.edge_count(), 7);
        assert_eq!(net.data_nodes().count(), 4);
    }

    #[test]
    fn ancestors_of_x() {
        let net = fixtures::three_module();
        let anc = net.ancestors_of("X").unwrap();
        let expect: BTreeSet<String> = ["theta", "W", "psi"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(names(&net, &anc), expect);
        assert!(net.ancestors_of("psi").unwrap().is_empty());
    }

    #[test]
    fn ancestors_of_chain() {
        let net = BayesNet::parse(
            r#"{"nodes":[{"id":"a","kind":"param"},{"id":"b","kind":"param","parents":["a"]},
               {"id":"c","kind":"data","parents":["b"]}]}"#,
        )
        .unwrap();
        let anc = net.ancestors_of("c").unwrap();
        assert_eq!(anc.len(), 2);
        assert!(matches!(
            net.ancestors_of("nope"),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn cycle_is_rejected() {
        let err = BayesNet::parse(
            r#"{"nodes":[{"id":"X","kind":"data","parents":["theta"]},
               {"id":"theta","kind":"param","parents":["X"]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn lone_parameter_is_valid() {
        let net = BayesNet::parse(r#"{"nodes":[{"id":"theta","kind":"param"}]}"#).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.data_nodes().count(), 0);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = BayesNet::parse("{\"nodes\": [\n  {\"id\": }]}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn table_validation() {
        let mixed = r#"{"nodes":[{"id":"t","kind":"param","states":2,"cpt":[[0.5,0.5]]},
                        {"id":"X","kind":"data","parents":["t"]}]}"#;
        assert!(matches!(BayesNet::parse(mixed), Err(Error::Network(_))));

        let bad_sum = r#"{"nodes":[{"id":"t","kind":"param","states":2,"cpt":[[0.5,0.6]]}]}"#;
        assert!(BayesNet::parse(bad_sum)
            .unwrap_err()
            .to_string()
            .contains("sums to"));

        let bad_rows = r#"{"nodes":[{"id":"t","kind":"param","states":2,"cpt":[[0.5,0.5]]},
                        {"id":"X","kind":"data","parents":["t"],"states":2,"cpt":[[0.5,0.5]]}]}"#;
        assert!(BayesNet::parse(bad_rows)
            .unwrap_err()
            .to_string()
            .contains("expected 2"));

        let unknown = r#"{"nodes":[{"id":"X","kind":"data","parents":["q"]}]}"#;
        assert!(BayesNet::parse(unknown)
            .unwrap_err()
            .to_string()
            .contains("unknown parent"));
    }

    #[test]
    fn cpt_row_order_is_last_parent_fastest() {
        let net = BayesNet::parse(
            r#"{"nodes":[
              {"id":"a","kind":"param","states":2,"cpt":[[0.5,0.5]]},
              {"id":"b","kind":"param","states":3,"cpt":[[0.2,0.3,0.5]]},
              {"id":"X","kind":"data","parents":["a","b"],"states":2,
               "cpt":[[1,0],[0.9,0.1],[0.8,0.2],[0.7,0.3],[0.6,0.4],[0.5,0.5]]}]}"#,
        )
        .unwrap();
        let x = net.lookup("X").unwrap();
        let (a, b) = (net.lookup("a").unwrap(), net.lookup("b").unwrap());
        let p = net.prob(x, 1, |v| {
            if v == a {
                1
            } else if v == b {
                0
            } else {
                9
            }
        });
        assert!((p - 0.3).abs() < 1e-15);
        let p = net.prob(x, 1, |v| if v == a { 0 } else { 2 });
        assert!((p - 0.2).abs() < 1e-15);
    }

    #[test]
    fn evidence_is_checked() {
        let net = fixtures::two_module();
        assert!(Evidence::from_pairs(&net, [("X", 1)]).is_ok());
        assert!(Evidence::from_pairs(&net, [("X", 2)]).is_err());
        assert!(Evidence::from_pairs(&net, [("theta", 0)]).is_err());
        let ev = Evidence::parse(&net, r#"{"observe":{"Y":0}}"#).unwrap();
        assert_eq!(ev.get(net.lookup("Y").unwrap()), Some(0));
    }

    #[test]
    fn render_round_trips() {
        let net = fixtures::three_module_discrete();
        let again = BayesNet::parse(&net.render_json()).unwrap();
        assert_eq!(net, again);
    }
}
