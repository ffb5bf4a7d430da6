//! Bundled example networks, partitions and decision sets.

use std::collections::BTreeSet;

use crate::modules::Partition;
use crate::network::{BayesNet, Evidence};

pub const THREE_MODULE_JSON: &str = include_str!("../fixtures/three_module.json");
pub const THREE_MODULE_DISCRETE_JSON: &str = include_str!("../fixtures/three_module_discrete.json");
pub const THREE_MODULE_PARTITION_JSON: &str =
    include_str!("../fixtures/three_module_partition.json");
pub const THREE_MODULE_EVIDENCE_JSON: &str = include_str!("../fixtures/three_module_evidence.json");
/// Orientation red -> blue -> green of the three three_module modules.
pub const RBG_JSON: &str = include_str!("../fixtures/rbg.json");
/// theta tagged [T, C], kept in red, green conditioning on red's version.
pub const CONDITIONED_DECISION_JSON: &str = include_str!("../fixtures/conditioned_decision.json");
/// theta tagged [T, T], kept in red, a tilde copy updated in green.
pub const TILDE_DECISION_JSON: &str = include_str!("../fixtures/tilde_decision.json");
/// theta tagged [T, T], kept in green.
pub const LATE_DECISION_JSON: &str = include_str!("../fixtures/late_decision.json");
pub const TWO_MODULE_JSON: &str = include_str!("../fixtures/two_module.json");
pub const TWO_MODULE_PARTITION_JSON: &str = include_str!("../fixtures/two_module_partition.json");
pub const CYCLIC_JSON: &str = include_str!("../fixtures/cyclic.json");
pub const MISSPECIFIED_JSON: &str = include_str!("../fixtures/misspecified.json");
pub const MISSPECIFIED_PARTITION_JSON: &str =
    include_str!("../fixtures/misspecified_partition.json");
pub const MISSPECIFIED_TRAIN_JSON: &str = include_str!("../fixtures/misspecified_train.json");
pub const MISSPECIFIED_HELDOUT_JSON: &str = include_str!("../fixtures/misspecified_heldout.json");

pub fn three_module() -> BayesNet {
    BayesNet::parse(THREE_MODULE_JSON).expect("bundled fixture")
}

pub fn three_module_discrete() -> BayesNet {
    BayesNet::parse(THREE_MODULE_DISCRETE_JSON).expect("bundled fixture")
}

/// Blocks red = {X}, green = {Y, Z}, blue = {W}.
pub fn three_module_partition(net: &BayesNet) -> Partition {
    Partition::parse(net, THREE_MODULE_PARTITION_JSON).expect("bundled fixture")
}

pub fn three_module_evidence(net: &BayesNet) -> Evidence {
    Evidence::parse(net, THREE_MODULE_EVIDENCE_JSON).expect("bundled fixture")
}

/// theta -> X, theta -> Y, binary.
pub fn two_module() -> BayesNet {
    BayesNet::parse(TWO_MODULE_JSON).expect("bundled fixture")
}

pub fn two_module_partition(net: &BayesNet) -> Partition {
    Partition::parse(net, TWO_MODULE_PARTITION_JSON).expect("bundled fixture")
}

/// The three_module shape with two red observations and a green likelihood that
/// contradicts them.
pub fn misspecified() -> BayesNet {
    BayesNet::parse(MISSPECIFIED_JSON).expect("bundled fixture")
}

pub fn misspecified_partition(net: &BayesNet) -> Partition {
    Partition::parse(net, MISSPECIFIED_PARTITION_JSON).expect("bundled fixture")
}

pub fn misspecified_train(net: &BayesNet) -> Evidence {
    Evidence::parse(net, MISSPECIFIED_TRAIN_JSON).expect("bundled fixture")
}

pub fn misspecified_heldout(net: &BayesNet) -> Evidence {
    Evidence::parse(net, MISSPECIFIED_HELDOUT_JSON).expect("bundled fixture")
}

/// `theta` shared by `n` data nodes `X1..Xn`, each with its own intrinsic
/// parameter `a1..an`. Binary throughout.
pub fn star(n: usize) -> BayesNet {
    let mut nodes =
        vec![r#"{"id":"theta","kind":"param","states":2,"cpt":[[0.5,0.5]]}"#.to_owned()];
    for i in 1..=n {
        let p = 0.1 + 0.8 * i as f64 / (n + 1) as f64;
        nodes.push(format!(
            r#"{{"id":"a{i}","kind":"param","states":2,"cpt":[[0.6,0.4]]}}"#
        ));
        nodes.push(format!(
            r#"{{"id":"X{i}","kind":"data","parents":["theta","a{i}"],"states":2,
                "cpt":[[{p},{q}],[0.7,0.3],[{q},{p}],[0.2,0.8]]}}"#,
            q = 1.0 - p
        ));
    }
    BayesNet::parse(&format!(r#"{{"nodes":[{}]}}"#, nodes.join(","))).expect("generated fixture")
}

/// One block per data node `X1..Xn`.
pub fn star_partition(net: &BayesNet, n: usize) -> Partition {
    singleton_blocks(net, n)
}

/// `theta` with `n` children `X1..Xn` and no other parameters.
pub fn fan(n: usize) -> BayesNet {
    let mut nodes =
        vec![r#"{"id":"theta","kind":"param","states":2,"cpt":[[0.5,0.5]]}"#.to_owned()];
    for i in 1..=n {
        nodes.push(format!(
            r#"{{"id":"X{i}","kind":"data","parents":["theta"],"states":2,"cpt":[[0.7,0.3],[0.3,0.7]]}}"#
        ));
    }
    BayesNet::parse(&format!(r#"{{"nodes":[{}]}}"#, nodes.join(","))).expect("generated fixture")
}

pub fn fan_partition(net: &BayesNet, n: usize) -> Partition {
    singleton_blocks(net, n)
}

fn singleton_blocks(net: &BayesNet, n: usize) -> Partition {
    let blocks = (1..=n)
        .map(|i| BTreeSet::from([net.lookup(&format!("X{i}")).expect("fixture node")]))
        .collect();
    Partition::new(net, blocks, None).expect("generated fixture")
}
