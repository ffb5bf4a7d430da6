//! Undirected module graphs, their acyclic orientations, and topological
//! orderings of the resulting directed module graphs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modules::ModuleSet;
use crate::network::topological_sort;

/// Default cap on the number of module-graph edges for orientation enumeration.
pub const DEFAULT_MAX_ORIENT_EDGES: usize = 20;

/// Intersection graph of a module set. Edges are stored as `(a, b)` with
/// `a < b`, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UndirectedModuleGraph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl UndirectedModuleGraph {
    pub fn new(vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Orientation(format!("self-loop on vertex {a}")));
            }
            if a >= vertices || b >= vertices {
                return Err(Error::Orientation(format!("edge ({a}, {b}) out of range")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(UndirectedModuleGraph {
            vertices,
            edges: set.into_iter().collect(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }
}

/// The intersection graph of the modules in `ms`.
pub fn build_undirected(ms: &ModuleSet) -> UndirectedModuleGraph {
    let n = ms.len();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if !ms.module(a).members.is_disjoint(&ms.module(b).members) {
                edges.push((a, b));
            }
        }
    }
    UndirectedModuleGraph { vertices: n, edges }
}

/// An acyclic orientation of an undirected module graph together with a
/// topological ordering of its vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DirectedModuleGraph {
    graph: UndirectedModuleGraph,
    /// `forward[e]` orients edge `(a, b)` as `a -> b`.
    forward: Vec<bool>,
    order: Vec<usize>,
    position: Vec<usize>,
}

impl DirectedModuleGraph {
    /// Orients `graph` and attaches its canonical ordering.
    pub fn new(graph: UndirectedModuleGraph, forward: Vec<bool>) -> Result<Self> {
        if forward.len() != graph.edges.len() {
            return Err(Error::Orientation(format!(
                "{} directions for {} edges",
                forward.len(),
                graph.edges.len()
            )));
        }
        let arcs = arcs_of(&graph, &forward);
        let order = topological_order(graph.vertices, &arcs)?;
        Ok(Self::assemble(graph, forward, order))
    }

    /// Orients `graph` with an explicit ordering, which must be topological.
    pub fn with_order(
        graph: UndirectedModuleGraph,
        forward: Vec<bool>,
        order: Vec<usize>,
    ) -> Result<Self> {
        let base = Self::new(graph, forward)?;
        base.reordered(order)
    }

    /// Builds from directed arcs `(from, to)`, which must orient every edge
    /// of `graph` exactly once.
    pub fn from_arcs(
        graph: UndirectedModuleGraph,
        arcs: &[(usize, usize)],
        order: Option<Vec<usize>>,
    ) -> Result<Self> {
        let mut forward = vec![None; graph.edges.len()];
        for &(from, to) in arcs {
            let e = graph.edge_index(from, to).ok_or_else(|| {
                Error::Orientation(format!("no module-graph edge between {from} and {to}"))
            })?;
            if forward[e].is_some() {
                return Err(Error::Orientation(format!(
                    "edge between {from} and {to} is directed twice"
                )));
            }
            forward[e] = Some(from < to);
        }
        let forward = forward
            .into_iter()
            .enumerate()
            .map(|(e, f)| {
                f.ok_or_else(|| {
                    let (a, b) = graph.edges[e];
                    Error::Orientation(format!("edge between {a} and {b} has no direction"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        match order {
            Some(o) => Self::with_order(graph, forward, o),
            None => Self::new(graph, forward),
        }
    }

    fn assemble(graph: UndirectedModuleGraph, forward: Vec<bool>, order: Vec<usize>) -> Self {
        let mut position = vec![0; order.len()];
        for (p, v) in order.iter().enumerate() {
            position[*v] = p;
        }
        DirectedModuleGraph {
            graph,
            forward,
            order,
            position,
        }
    }

    /// Same orientation, different ordering.
    pub fn reordered(&self, order: Vec<usize>) -> Result<Self> {
        let n = self.graph.vertices;
        let distinct: BTreeSet<usize> = order.iter().copied().collect();
        if order.len() != n || distinct.len() != n || order.iter().any(|v| *v >= n) {
            return Err(Error::Orientation(
                "ordering is not a permutation of the modules".into(),
            ));
        }
        let out = Self::assemble(self.graph.clone(), self.forward.clone(), order);
        if let Some((a, b)) = out
            .arcs()
            .into_iter()
            .find(|(a, b)| out.position[*a] > out.position[*b])
        {
            return Err(Error::Orientation(format!(
                "ordering places {b} before {a} against the arc {a} -> {b}"
            )));
        }
        Ok(out)
    }

    pub fn graph(&self) -> &UndirectedModuleGraph {
        &self.graph
    }

    pub fn forward(&self) -> &[bool] {
        &self.forward
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of module `v` in the ordering.
    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        arcs_of(&self.graph, &self.forward)
    }

    /// Direction of the edge between `a` and `b`, if any: `Some(true)` for `a -> b`.
    pub fn points(&self, a: usize, b: usize) -> Option<bool> {
        self.graph
            .edge_index(a, b)
            .map(|e| self.forward[e] == (a < b))
    }

    /// True when a directed path leads from `from` to `to`.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        let arcs = self.arcs();
        reaches(self.graph.vertices, &arcs, from, to)
    }
}

fn arcs_of(graph: &UndirectedModuleGraph, forward: &[bool]) -> Vec<(usize, usize)> {
    graph
        .edges
        .iter()
        .zip(forward)
        .map(|(&(a, b), &f)| if f { (a, b) } else { (b, a) })
        .collect()
}

fn reaches(n: usize, arcs: &[(usize, usize)], from: usize, to: usize) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(arcs.iter().filter(|(a, _)| *a == v).map(|(_, b)| *b));
    }
    false
}

/// Topological ordering of `n` vertices under `arcs`, lowest index first
/// among the ready vertices.
pub fn topological_order(n: usize, arcs: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut preds = vec![Vec::new(); n];
    for &(a, b) in arcs {
        preds[b].push(a);
    }
    topological_sort(n, |v| preds[v].clone())
        .map_err(|v| Error::Orientation(format!("cycle through module {v}")))
}

/// Every acyclic orientation of `h`, each with its canonical ordering.
///
/// Edges are assigned in sorted order, `a -> b` tried before `b -> a`, and a
/// branch is pruned as soon as the new arc closes a cycle.
pub fn enumerate_orientations(
    h: &UndirectedModuleGraph,
    max_edges: usize,
) -> Result<Vec<DirectedModuleGraph>> {
    if h.edges.len() > max_edges {
        return Err(Error::CapExceeded {
            what: "module-graph edges",
            actual: h.edges.len() as u128,
            cap: max_edges as u128,
        });
    }
    let mut out = Vec::new();
    let mut arcs = Vec::with_capacity(h.edges.len());
    let mut forward = Vec::with_capacity(h.edges.len());
    orient_from(h, 0, &mut arcs, &mut forward, &mut out)?;
    Ok(out)
}

fn orient_from(
    h: &UndirectedModuleGraph,
    e: usize,
    arcs: &mut Vec<(usize, usize)>,
    forward: &mut Vec<bool>,
    out: &mut Vec<DirectedModuleGraph>,
) -> Result<()> {
    if e == h.edges.len() {
        out.push(DirectedModuleGraph::new(h.clone(), forward.clone())?);
        return Ok(());
    }
    let (a, b) = h.edges[e];
    for (dir, (from, to)) in [(true, (a, b)), (false, (b, a))] {
        if reaches(h.vertices, arcs, to, from) {
            continue;
        }
        arcs.push((from, to));
        forward.push(dir);
        orient_from(h, e + 1, arcs, forward, out)?;
        arcs.pop();
        forward.pop();
    }
    Ok(())
}

/// Every topological ordering of `g`, in lexicographic order.
pub fn all_topological_orders(g: &DirectedModuleGraph) -> Vec<Vec<usize>> {
    let n = g.graph.vertices;
    let mut indeg = vec![0usize; n];
    let arcs = g.arcs();
    for &(_, b) in &arcs {
        indeg[b] += 1;
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn go(
        n: usize,
        arcs: &[(usize, usize)],
        indeg: &mut [usize],
        used: &mut [bool],
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for v in 0..n {
            if used[v] || indeg[v] != 0 {
                continue;
            }
            used[v] = true;
            current.push(v);
            for &(a, b) in arcs {
                if a == v {
                    indeg[b] -= 1;
                }
            }
            go(n, arcs, indeg, used, current, out);
            for &(a, b) in arcs {
                if a == v {
                    indeg[b] += 1;
                }
            }
            current.pop();
            used[v] = false;
        }
    }
    go(n, &arcs, &mut indeg, &mut used, &mut current, &mut out);
    out
}

/// Orientation document. Modules are named by their partition labels.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[String; 2]>>,
    pub directions: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

impl OrientationDoc {
    pub fn from_graph(ms: &ModuleSet, g: &DirectedModuleGraph) -> Self {
        let label = |i: usize| ms.label(i).to_owned();
        OrientationDoc {
            edges: Some(
                g.graph
                    .edges
                    .iter()
                    .map(|&(a, b)| [label(a), label(b)])
                    .collect(),
            ),
            directions: g
                .arcs()
                .into_iter()
                .map(|(a, b)| [label(a), label(b)])
                .collect(),
            order: Some(g.order.iter().map(|v| label(*v)).collect()),
        }
    }

    pub fn resolve(&self, ms: &ModuleSet) -> Result<DirectedModuleGraph> {
        let h = build_undirected(ms);
        let idx = |l: &str| {
            ms.label_index(l)
                .ok_or_else(|| Error::Orientation(format!("unknown module label `{l}`")))
        };
        if let Some(edges) = &self.edges {
            let mut listed = BTreeSet::new();
            for [a, b] in edges {
                let (a, b) = (idx(a)?, idx(b)?);
                listed.insert((a.min(b), a.max(b)));
            }
            let actual: BTreeSet<(usize, usize)> = h.edges.iter().copied().collect();
            if listed != actual {
                return Err(Error::Orientation(
                    "listed edges differ from the module intersection graph".into(),
                ));
            }
        }
        let arcs = self
            .directions
            .iter()
            .map(|[a, b]| Ok((idx(a)?, idx(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let order = match &self.order {
            Some(o) => Some(o.iter().map(|l| idx(l)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        DirectedModuleGraph::from_arcs(h, &arcs, order)
    }

    pub fn parse(ms: &ModuleSet, text: &str) -> Result<DirectedModuleGraph> {
        let doc: OrientationDoc = serde_json::from_str(text).map_err(Error::from_json)?;
        doc.resolve(ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::modules::form_module_set;

    fn brute_force_acyclic(h: &UndirectedModuleGraph) -> usize {
        let m = h.edges().len();
        (0..1u32 << m)
            .filter(|mask| {
                let forward: Vec<bool> = (0..m).map(|e| mask >> e & 1 == 1).collect();
                topological_order(h.vertex_count(), &arcs_of(h, &forward)).is_ok()
            })
            .count()
    }

    #[test]
    fn three_module_graph_is_triangle() {
        let net = fixtures::three_module();
        let ms = form_module_set(&net, &fixtures::three_module_partition(&net)).unwrap();
        let h = build_undirected(&ms);
        assert_eq!(h.edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn single_and_disjoint_modules() {
        let net = crate::network::BayesNet::parse(
            r#"{"nodes":[{"id":"a","kind":"param"},{"id":"b","kind":"param"},
               {"id":"X","kind":"data","parents":["a"]},{"id":"Y","kind":"data","parents":["b"]}]}"#,
        )
        .unwrap();
        let ms = form_module_set(
            &net,
            &crate::modules::Partition::from_names(&net, &[vec!["X"], vec!["Y"]]).unwrap(),
        )
        .unwrap();
        assert!(build_undirected(&ms).edges().is_empty());
        let one = form_module_set(
            &net,
            &crate::modules::Partition::single_block(&net).unwrap(),
        )
        .unwrap();
        let h = build_undirected(&one);
        assert_eq!((h.vertex_count(), h.edges().len()), (1, 0));
    }

    #[test]
    fn orientation_counts() {
        let k3 = UndirectedModuleGraph::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        assert_eq!(brute_force_acyclic(&k3), 6);
        assert_eq!(enumerate_orientations(&k3, 20).unwrap().len(), 6);
        let edge = UndirectedModuleGraph::new(2, [(0, 1)]).unwrap();
        assert_eq!(enumerate_orientations(&edge, 20).unwrap().len(), 2);
        let empty = UndirectedModuleGraph::new(3, []).unwrap();
        let only = enumerate_orientations(&empty, 20).unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].order(), &[0, 1, 2]);
    }

    #[test]
    fn edge_cap_is_enforced() {
        let k3 = UndirectedModuleGraph::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        assert!(matches!(
            enumerate_orientations(&k3, 2),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn three_module_rbg_orders_red_blue_green() {
        // red = 0, green = 1, blue = 2
        let k3 = UndirectedModuleGraph::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let g = DirectedModuleGraph::from_arcs(k3, &[(0, 2), (0, 1), (2, 1)], None).unwrap();
        assert_eq!(g.order(), &[0, 2, 1]);
    }

    #[test]
    fn chain_order_is_forced() {
        let h = UndirectedModuleGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let g = DirectedModuleGraph::from_arcs(h, &[(2, 1), (1, 0)], None).unwrap();
        assert_eq!(g.order(), &[2, 1, 0]);
        assert_eq!(topological_order(3, &g.arcs()).unwrap(), g.order());
    }

    #[test]
    fn cycle_is_reported() {
        assert!(topological_order(3, &[(0, 1), (1, 2), (2, 0)]).is_err());
        let k3 = UndirectedModuleGraph::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        assert!(DirectedModuleGraph::from_arcs(k3, &[(0, 1), (1, 2), (2, 0)], None).is_err());
    }

    #[test]
    fn explicit_order_must_respect_arcs() {
        let h = UndirectedModuleGraph::new(3, [(0, 1)]).unwrap();
        assert!(DirectedModuleGraph::with_order(h.clone(), vec![true], vec![2, 0, 1]).is_ok());
        assert!(DirectedModuleGraph::with_order(h, vec![true], vec![1, 0, 2]).is_err());
    }

    #[test]
    fn all_orders_of_empty_graph() {
        let h = UndirectedModuleGraph::new(3, []).unwrap();
        let g = DirectedModuleGraph::new(h, vec![]).unwrap();
        assert_eq!(all_topological_orders(&g).len(), 6);
    }

    #[test]
    fn orientation_doc_resolves_labels() {
        let net = fixtures::three_module();
        let ms = form_module_set(&net, &fixtures::three_module_partition(&net)).unwrap();
        let g = OrientationDoc::parse(&ms, fixtures::RBG_JSON).unwrap();
        assert_eq!(g.order(), &[0, 2, 1]);
        let doc = OrientationDoc::from_graph(&ms, &g);
        assert_eq!(doc.resolve(&ms).unwrap(), g);
        assert!(OrientationDoc::parse(&ms, r#"{"directions":[["red","blue"]]}"#).is_err());
    }
}
