//! Random networks and partitions shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use cutspace::decisions::Tag;
use cutspace::network::{NetworkDoc, NodeDoc};
use cutspace::{
    BayesNet, Evidence, FactorTable, NodeIdx, NodeKind, Partition, UndirectedModuleGraph,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a random network.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_nodes: usize,
    pub max_states: usize,
    pub max_parents: usize,
    pub edge_prob: f64,
    pub discrete: bool,
}

impl Shape {
    pub fn discrete(max_nodes: usize, max_states: usize) -> Self {
        Shape {
            max_nodes,
            max_states,
            max_parents: 3,
            edge_prob: 0.4,
            discrete: true,
        }
    }

    pub fn structural(max_nodes: usize) -> Self {
        Shape {
            max_nodes,
            max_states: 2,
            max_parents: 4,
            edge_prob: 0.35,
            discrete: false,
        }
    }
}

/// A random DAG with at least one data node. Parameters only take parameter
/// parents; data nodes take any earlier node. Node order is a topological order.
pub fn random_net(rng: &mut impl Rng, shape: Shape) -> BayesNet {
    let n = rng.gen_range(2..=shape.max_nodes.max(2));
    let mut kinds: Vec<NodeKind> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                NodeKind::Data
            } else {
                NodeKind::Param
            }
        })
        .collect();
    if !kinds.contains(&NodeKind::Data) {
        kinds[n - 1] = NodeKind::Data;
    }
    let names: Vec<String> = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| match k {
            NodeKind::Data => format!("x{i}"),
            NodeKind::Param => format!("t{i}"),
        })
        .collect();
    let states: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(2..=shape.max_states.max(2)))
        .collect();
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut candidates: Vec<usize> = (0..i)
            .filter(|&j| kinds[i] == NodeKind::Data || kinds[j] == NodeKind::Param)
            .filter(|_| rng.gen_bool(shape.edge_prob))
            .collect();
        candidates.shuffle(rng);
        candidates.truncate(shape.max_parents);
        candidates.sort();
        let cpt = shape.discrete.then(|| {
            let rows: usize = candidates.iter().map(|&j| states[j]).product();
            (0..rows).map(|_| random_row(rng, states[i])).collect()
        });
        nodes.push(NodeDoc {
            id: names[i].clone(),
            kind: kinds[i],
            parents: candidates.iter().map(|&j| names[j].clone()).collect(),
            states: shape.discrete.then_some(states[i]),
            cpt,
        });
    }
    BayesNet::from_doc(NetworkDoc { nodes }).expect("generated network is valid")
}

/// A strictly positive probability row.
pub fn random_row(rng: &mut impl Rng, states: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..states).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = row[..states - 1].iter().sum();
    row[states - 1] = 1.0 - head;
    row
}

/// A uniformly drawn assignment of data nodes to at most `max_blocks` blocks.
pub fn random_partition(rng: &mut impl Rng, net: &BayesNet, max_blocks: usize) -> Partition {
    let data: Vec<NodeIdx> = net.data_nodes().collect();
    let k = rng.gen_range(1..=max_blocks.min(data.len()).max(1));
    let mut blocks: Vec<BTreeSet<NodeIdx>> = vec![BTreeSet::new(); k];
    let mut order = data.clone();
    order.shuffle(rng);
    for (i, v) in order.iter().enumerate() {
        let b = if i < k { i } else { rng.gen_range(0..k) };
        blocks[b].insert(*v);
    }
    Partition::new(net, blocks, None).expect("generated partition is valid")
}

/// Random evidence on a subset of data nodes.
pub fn random_evidence(rng: &mut impl Rng, net: &BayesNet, p: f64) -> cutspace::Evidence {
    let mut ev = cutspace::Evidence::new();
    for v in net.data_nodes() {
        if rng.gen_bool(p) {
            let s = rng.gen_range(0..net.states(v));
            ev.observe(net, v, s).expect("in range");
        }
    }
    ev
}

/// Every fixture network paired with its partitions of interest.
pub fn fixture_cases() -> Vec<(&'static str, BayesNet, Partition)> {
    use cutspace::fixtures::*;
    let three_module = three_module();
    let three_module_part = three_module_partition(&three_module);
    let three_module_d = three_module_discrete();
    let three_module_d_part = three_module_partition(&three_module_d);
    let two = two_module();
    let two_part = two_module_partition(&two);
    let mis = misspecified();
    let mis_part = misspecified_partition(&mis);
    let s3 = star(3);
    let s3_part = star_partition(&s3, 3);
    let f3 = fan(3);
    let f3_part = fan_partition(&f3, 3);
    vec![
        ("three-module", three_module, three_module_part),
        ("three-module-discrete", three_module_d, three_module_d_part),
        ("two-module", two, two_part),
        ("misspecified", mis, mis_part),
        ("star3", s3, s3_part),
        ("fan3", f3, f3_part),
    ]
}

// Oracles, written independently of the library's algorithms.

/// Module members by enumerating every directed path that ends in the core.
pub fn module_by_paths(net: &BayesNet, core: &BTreeSet<NodeIdx>) -> BTreeSet<NodeIdx> {
    fn walk_back(
        net: &BayesNet,
        core: &BTreeSet<NodeIdx>,
        path: &mut Vec<NodeIdx>,
        out: &mut BTreeSet<NodeIdx>,
    ) {
        let head = *path.last().unwrap();
        for &p in net.parents(head) {
            path.push(p);
            // Collect from the endpoint back to the first off-core data node.
            out.extend(path.iter().copied());
            if !(net.is_data(p) && !core.contains(&p)) {
                walk_back(net, core, path, out);
            }
            path.pop();
        }
    }
    let mut out = core.clone();
    for &y in core {
        walk_back(net, core, &mut vec![y], &mut out);
    }
    out
}

pub fn has_cycle(n: usize, arcs: &[(usize, usize)]) -> bool {
    // Repeated removal of sinks.
    let mut alive: BTreeSet<usize> = (0..n).collect();
    loop {
        let sink = alive
            .iter()
            .copied()
            .find(|v| !arcs.iter().any(|(a, b)| a == v && alive.contains(b)));
        match sink {
            Some(v) => {
                alive.remove(&v);
            }
            None => return !alive.is_empty(),
        }
    }
}

pub fn brute_force_acyclic(h: &UndirectedModuleGraph) -> usize {
    let e = h.edges();
    (0..1u32 << e.len())
        .filter(|mask| {
            let arcs: Vec<(usize, usize)> = e
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| if mask >> i & 1 == 1 { (b, a) } else { (a, b) })
                .collect();
            !has_cycle(h.vertex_count(), &arcs)
        })
        .count()
}

fn decision_ok(n: usize, tags: &[Tag], x: usize, cond: &[Option<usize>]) -> bool {
    tags[0] == Tag::T
        && tags[x] == Tag::T
        && (0..n).all(|v| match (tags[v], cond[v]) {
            (Tag::T, None) => true,
            (Tag::C, Some(j)) => j < v && tags[j] == Tag::T,
            _ => false,
        })
}

pub fn brute_force_decisions(n: usize) -> BTreeSet<(Vec<Tag>, usize, Vec<Option<usize>>)> {
    let mut out = BTreeSet::new();
    for mask in 0..1u32 << n {
        let tags: Vec<Tag> = (0..n)
            .map(|v| if mask >> v & 1 == 1 { Tag::C } else { Tag::T })
            .collect();
        let radix = n + 1;
        for code in 0..radix.pow(n as u32) {
            let cond: Vec<Option<usize>> = (0..n)
                .map(|v| {
                    let d = code / radix.pow(v as u32) % radix;
                    (d > 0).then(|| d - 1)
                })
                .collect();
            for x in 0..n {
                if decision_ok(n, &tags, x, &cond) {
                    out.insert((tags.clone(), x, cond.clone()));
                }
            }
        }
    }
    out
}

/// Posterior over every parameter by summing the full joint.
pub fn joint_oracle(net: &BayesNet, ev: &Evidence) -> Vec<f64> {
    let nodes: Vec<NodeIdx> = net.indices().collect();
    let params: Vec<NodeIdx> = net.param_nodes().collect();
    let out_len: usize = params.iter().map(|p| net.states(*p)).product();
    let mut out = vec![0.0; out_len];
    let mut a = vec![0usize; nodes.len()];
    loop {
        if ev.iter().all(|(d, s)| a[d.0] == s) {
            let w: f64 = nodes
                .iter()
                .map(|v| net.prob(*v, a[v.0], |p| a[p.0]))
                .product();
            let mut idx = 0;
            for p in &params {
                idx = idx * net.states(*p) + a[p.0];
            }
            out[idx] += w;
        }
        let mut k = nodes.len();
        loop {
            if k == 0 {
                let z: f64 = out.iter().sum();
                return out.iter().map(|v| v / z).collect();
            }
            k -= 1;
            a[k] += 1;
            if a[k] < net.states(nodes[k]) {
                break;
            }
            a[k] = 0;
        }
    }
}

pub fn table_in_node_order(net: &BayesNet, t: &FactorTable) -> Vec<f64> {
    let params: Vec<NodeIdx> = net.param_nodes().collect();
    let states: Vec<usize> = params.iter().map(|p| net.states(*p)).collect();
    let total: usize = states.iter().product();
    (0..total)
        .map(|mut code| {
            let mut a = vec![0usize; params.len()];
            for i in (0..params.len()).rev() {
                a[i] = code % states[i];
                code /= states[i];
            }
            t.get(&a)
        })
        .collect()
}
