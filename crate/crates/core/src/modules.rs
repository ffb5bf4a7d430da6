//! Module formation from a partition of the data nodes.
//!
//! A module is seeded by a block of data nodes (its core) and collects every
//! vertex on a directed path ending in the core, cut short at the last data
//! node outside the core. That boundary node is kept, but nothing behind it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BayesNet, NodeIdx};

/// A partition of the network's data nodes into nonempty blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<BTreeSet<NodeIdx>>,
    labels: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDoc {
    pub blocks: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl Partition {
    /// Validates `blocks` against `net`. Labels default to the block index.
    pub fn new(
        net: &BayesNet,
        blocks: Vec<BTreeSet<NodeIdx>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let labels = match labels {
            Some(l) => {
                if l.len() != blocks.len() {
                    return Err(Error::Partition(format!(
                        "{} labels for {} blocks",
                        l.len(),
                        blocks.len()
                    )));
                }
                let distinct: BTreeSet<&String> = l.iter().collect();
                if distinct.len() != l.len() {
                    return Err(Error::Partition("block labels must be distinct".into()));
                }
                l
            }
            None => (0..blocks.len()).map(|i| i.to_string()).collect(),
        };
        let mut seen = BTreeSet::new();
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::Partition("empty block".into()));
            }
            for v in block {
                if v.0 >= net.len() {
                    return Err(Error::Partition(format!("node index {} out of range", v.0)));
                }
                if !net.is_data(*v) {
                    return Err(Error::Partition(format!(
                        "`{}` is a parameter node, blocks hold data nodes only",
                        net.name(*v)
                    )));
                }
                if !seen.insert(*v) {
                    return Err(Error::Partition(format!(
                        "`{}` appears in more than one block",
                        net.name(*v)
                    )));
                }
            }
        }
        if let Some(missing) = net.data_nodes().find(|v| !seen.contains(v)) {
            return Err(Error::Partition(format!(
                "data node `{}` is not covered by any block",
                net.name(missing)
            )));
        }
        Ok(Partition { blocks, labels })
    }

    /// Builds a partition from blocks of node names.
    pub fn from_names<S: AsRef<str>>(net: &BayesNet, blocks: &[Vec<S>]) -> Result<Self> {
        let blocks = blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|n| net.lookup(n.as_ref()))
                    .collect::<Result<BTreeSet<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(net, blocks, None)
    }

    pub fn parse(net: &BayesNet, text: &str) -> Result<Self> {
        let doc: PartitionDoc = serde_json::from_str(text).map_err(Error::from_json)?;
        let blocks = doc
            .blocks
            .iter()
            .map(|b| {
                let set = b
                    .iter()
                    .map(|n| net.lookup(n))
                    .collect::<Result<BTreeSet<_>>>()?;
                if set.len() != b.len() {
                    return Err(Error::Partition("a block lists a node twice".into()));
                }
                Ok(set)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(net, blocks, doc.labels)
    }

    /// The single-block partition (the null state).
    pub fn single_block(net: &BayesNet) -> Result<Self> {
        let all: BTreeSet<NodeIdx> = net.data_nodes().collect();
        if all.is_empty() {
            return Self::new(net, Vec::new(), None);
        }
        Self::new(net, vec![all], None)
    }

    pub fn blocks(&self) -> &[BTreeSet<NodeIdx>] {
        &self.blocks
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn to_doc(&self, net: &BayesNet) -> PartitionDoc {
        PartitionDoc {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.iter().map(|v| net.name(*v).to_owned()).collect())
                .collect(),
            labels: Some(self.labels.clone()),
        }
    }

    /// Blocks `i` and `j` replaced by their union at the lower index.
    fn merged(&self, net: &BayesNet, i: usize, j: usize) -> Partition {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let mut blocks = self.blocks.clone();
        let mut labels = self.labels.clone();
        let taken = blocks.remove(hi);
        blocks[lo].extend(taken);
        let hi_label = labels.remove(hi);
        let lo_label = std::mem::take(&mut labels[lo]);
        labels[lo] = fresh_label(net, &labels, format!("{lo_label}+{hi_label}"), &blocks[lo]);
        Partition { blocks, labels }
    }

    /// Block `k` replaced by `part` at index `k`, the remainder appended.
    pub(crate) fn split(&self, net: &BayesNet, k: usize, part: &BTreeSet<NodeIdx>) -> Partition {
        let mut blocks = self.blocks.clone();
        let mut labels = self.labels.clone();
        let rest: BTreeSet<NodeIdx> = blocks[k].difference(part).copied().collect();
        blocks[k] = part.clone();
        blocks.push(rest);
        let base = std::mem::take(&mut labels[k]);
        labels[k] = fresh_label(net, &labels, format!("{base}.a"), &blocks[k]);
        let tail = fresh_label(net, &labels, format!("{base}.b"), &blocks[blocks.len() - 1]);
        labels.push(tail);
        Partition { blocks, labels }
    }
}

/// Longest derived label kept before falling back to the block's node names.
/// Without the bound, repeated merges and splits grow labels exponentially.
const MAX_DERIVED_LABEL: usize = 32;

fn fresh_label(
    net: &BayesNet,
    taken: &[String],
    wanted: String,
    block: &BTreeSet<NodeIdx>,
) -> String {
    let mut label = if wanted.len() <= MAX_DERIVED_LABEL {
        wanted
    } else {
        let names: Vec<&str> = block.iter().map(|v| net.name(*v)).collect();
        format!("{{{}}}", names.join(","))
    };
    while taken.contains(&label) {
        label.push('\'');
    }
    label
}

/// A module: its core block and every vertex it collects.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Module {
    pub core: BTreeSet<NodeIdx>,
    pub members: BTreeSet<NodeIdx>,
}

impl Module {
    pub fn contains(&self, v: NodeIdx) -> bool {
        self.members.contains(&v)
    }
}

/// Forms the module seeded by `core`.
///
/// Reverse sweep from the core: a parent is always collected, but expansion
/// stops at data nodes outside the core.
pub fn form_module(net: &BayesNet, core: &BTreeSet<NodeIdx>) -> Result<Module> {
    if core.is_empty() {
        return Err(Error::ModuleCore("core must be nonempty".into()));
    }
    for v in core {
        if v.0 >= net.len() {
            return Err(Error::ModuleCore(format!(
                "node index {} out of range",
                v.0
            )));
        }
        if !net.is_data(*v) {
            return Err(Error::ModuleCore(format!(
                "`{}` is a parameter node",
                net.name(*v)
            )));
        }
    }
    let mut members = core.clone();
    let mut stack: Vec<NodeIdx> = core.iter().copied().collect();
    while let Some(u) = stack.pop() {
        for &p in net.parents(u) {
            if !members.insert(p) {
                continue;
            }
            let boundary = net.is_data(p) && !core.contains(&p);
            if !boundary {
                stack.push(p);
            }
        }
    }
    Ok(Module {
        core: core.clone(),
        members,
    })
}

/// Modules for a partition together with the parameter classification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleSet {
    partition: Partition,
    modules: Vec<Module>,
    shared: BTreeSet<NodeIdx>,
    intrinsic: Vec<BTreeSet<NodeIdx>>,
    orphans: BTreeSet<NodeIdx>,
}

pub fn form_module_set(net: &BayesNet, partition: &Partition) -> Result<ModuleSet> {
    let modules = partition
        .blocks()
        .iter()
        .map(|b| form_module(net, b))
        .collect::<Result<Vec<_>>>()?;
    let mut shared = BTreeSet::new();
    let mut intrinsic = vec![BTreeSet::new(); modules.len()];
    let mut orphans = BTreeSet::new();
    for theta in net.param_nodes() {
        let owners: Vec<usize> = (0..modules.len())
            .filter(|i| modules[*i].contains(theta))
            .collect();
        match owners.len() {
            0 => {
                orphans.insert(theta);
            }
            1 => {
                intrinsic[owners[0]].insert(theta);
            }
            _ => {
                shared.insert(theta);
            }
        }
    }
    Ok(ModuleSet {
        partition: partition.clone(),
        modules,
        shared,
        intrinsic,
        orphans,
    })
}

/// The module set for the partition with blocks `i` and `j` merged.
pub fn merge_modules(net: &BayesNet, ms: &ModuleSet, i: usize, j: usize) -> Result<ModuleSet> {
    let len = ms.len();
    for idx in [i, j] {
        if idx >= len {
            return Err(Error::ModuleIndex { index: idx, len });
        }
    }
    if i == j {
        return Err(Error::Partition("cannot merge a block with itself".into()));
    }
    form_module_set(net, &ms.partition.merged(net, i, j))
}

impl ModuleSet {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn modules(&self) -> &[Module] {
        &self.modules
    }

    pub fn module(&self, i: usize) -> &Module {
        &self.modules[i]
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.partition.labels()[i]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.partition.labels().iter().position(|l| l == label)
    }

    pub fn shared_params(&self) -> &BTreeSet<NodeIdx> {
        &self.shared
    }

    pub fn intrinsic_params(&self, i: usize) -> &BTreeSet<NodeIdx> {
        &self.intrinsic[i]
    }

    pub fn orphan_params(&self) -> &BTreeSet<NodeIdx> {
        &self.orphans
    }

    pub fn is_shared(&self, v: NodeIdx) -> bool {
        self.shared.contains(&v)
    }

    /// Indices of the modules containing `v`, ascending by module index.
    pub fn modules_containing(&self, v: NodeIdx) -> Vec<usize> {
        (0..self.modules.len())
            .filter(|i| self.modules[*i].contains(v))
            .collect()
    }

    /// Index of the module whose core is exactly `core`.
    pub fn index_of_core(&self, core: &BTreeSet<NodeIdx>) -> Option<usize> {
        self.modules.iter().position(|m| &m.core == core)
    }
}
