//! Symbolic cut-posteriors.
//!
//! For every module, in the chosen ordering, the variables are split into
//! those updated here (`U`), those introduced as fresh tilde copies (`T`),
//! and those conditioned on (`C`). Conditioned shared parameters resolve to
//! the version created at the neighbouring vertex of the decision graph.
//! The product of the per-module terms, with tilde copies integrated out,
//! is the cut-posterior.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::Caps;
use crate::decisions::{
    enumerate_decision_sets, parse_decision_set, ranked_modules, validate_decision_set,
    DecisionSet, Tag,
};
use crate::error::{Error, Result};
use crate::modgraph::{
    build_undirected, enumerate_orientations, DirectedModuleGraph, OrientationDoc,
};
use crate::modules::{form_module_set, ModuleSet, Partition};
use crate::network::{BayesNet, NodeIdx};

/// One version of a parameter. The kept version (`rank == None`) is the one
/// that survives in the posterior; tilde copies carry ranks 2, 3, ... in the
/// order their creating modules are updated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamVersion {
    pub param: NodeIdx,
    /// Module in which this version is created (updated).
    pub origin: usize,
    pub rank: Option<u32>,
}

impl ParamVersion {
    pub fn kept(param: NodeIdx, origin: usize) -> Self {
        ParamVersion {
            param,
            origin,
            rank: None,
        }
    }

    pub fn is_kept(&self) -> bool {
        self.rank.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum TildeMode {
    /// Tilde copies are integrated against their marginal prior.
    #[default]
    #[serde(rename = "prior-weighted")]
    PriorWeighted,
    /// Tilde copies are summed out without a weight.
    #[serde(rename = "plain-marginal")]
    PlainMarginal,
}

impl fmt::Display for TildeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TildeMode::PriorWeighted => "prior-weighted",
            TildeMode::PlainMarginal => "plain-marginal",
        })
    }
}

impl std::str::FromStr for TildeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior-weighted" => Ok(TildeMode::PriorWeighted),
            "plain-marginal" => Ok(TildeMode::PlainMarginal),
            other => Err(Error::Config(format!(
                "mode must be prior-weighted or plain-marginal, got `{other}`"
            ))),
        }
    }
}

/// The `U`/`C`/`T` split of one module's parameters and data.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Classification {
    pub update: BTreeSet<NodeIdx>,
    pub tilde: BTreeSet<NodeIdx>,
    pub cond_data: BTreeSet<NodeIdx>,
    pub cond_param: BTreeSet<NodeIdx>,
}

impl Classification {
    /// All conditioned nodes, data and parameters.
    pub fn conditioned(&self) -> BTreeSet<NodeIdx> {
        self.cond_data.union(&self.cond_param).copied().collect()
    }
}

/// Tags every data node and parameter of module `i`.
pub fn classify_module(
    net: &BayesNet,
    ms: &ModuleSet,
    g: &DirectedModuleGraph,
    ds: &DecisionSet,
    i: usize,
) -> Result<Classification> {
    if i >= ms.len() {
        return Err(Error::ModuleIndex {
            index: i,
            len: ms.len(),
        });
    }
    let module = ms.module(i);
    let mut out = Classification::default();
    for &v in &module.members {
        if net.is_data(v) {
            out.cond_data.insert(v);
        } else if !ms.is_shared(v) {
            out.update.insert(v);
        } else {
            let d = ds.get(&v).ok_or_else(|| Error::Decision {
                theta: net.name(v).to_owned(),
                violation: "decision missing for a shared parameter".into(),
            })?;
            let ranked = ranked_modules(ms, g, v);
            let y = ranked
                .iter()
                .position(|m| *m == i)
                .expect("module contains v");
            if d.tags.len() != ranked.len() {
                return Err(Error::Inconsistent(format!(
                    "decision for `{}` has {} vertices, parameter is in {} modules",
                    net.name(v),
                    d.tags.len(),
                    ranked.len()
                )));
            }
            if y == d.x {
                out.update.insert(v);
            } else if d.tags[y] == Tag::T {
                out.tilde.insert(v);
            } else {
                out.cond_param.insert(v);
            }
        }
    }
    Ok(out)
}

/// The factor contributed by one module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateTerm {
    pub module: usize,
    pub core: BTreeSet<NodeIdx>,
    pub members: BTreeSet<NodeIdx>,
    /// Parameters updated to their kept version here.
    pub update: Vec<NodeIdx>,
    /// Fresh tilde copies created here.
    pub tilde: Vec<ParamVersion>,
    pub cond_data: Vec<NodeIdx>,
    /// Resolved versions of the conditioned parameters.
    pub cond_param: Vec<ParamVersion>,
    /// The term is the constant 1 (nothing to update).
    pub trivial: bool,
}

impl UpdateTerm {
    /// Version of `v` as it appears in this term, if it appears.
    pub fn version_of(&self, v: NodeIdx) -> Option<ParamVersion> {
        if self.update.contains(&v) {
            return Some(ParamVersion::kept(v, self.module));
        }
        self.tilde
            .iter()
            .chain(&self.cond_param)
            .find(|pv| pv.param == v)
            .copied()
    }
}

/// Term over the parameters that belong to no module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrphanTerm {
    pub params: Vec<NodeIdx>,
    pub cond_data: Vec<NodeIdx>,
    pub cond_param: Vec<ParamVersion>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutPosterior {
    /// Terms in update order.
    pub terms: Vec<UpdateTerm>,
    pub orphan: Option<OrphanTerm>,
    /// Every tilde copy, integrated out of the result.
    pub tilde_vars: Vec<ParamVersion>,
    pub mode: TildeMode,
}

/// Builds a posterior from JSON documents. A missing partition means a single
/// block, a missing orientation points every edge from lower to higher module
/// index, and a missing decision set means the first enumerated one.
pub fn build_from_docs(
    net: &BayesNet,
    partition: Option<&str>,
    orientation: Option<&str>,
    decisions: Option<&str>,
    mode: TildeMode,
    caps: &Caps,
) -> Result<(ModuleSet, CutPosterior)> {
    let partition = match partition {
        Some(text) => Partition::parse(net, text)?,
        None => Partition::single_block(net)?,
    };
    let ms = form_module_set(net, &partition)?;
    let g = match orientation {
        Some(text) => OrientationDoc::parse(&ms, text)?,
        None => {
            let h = build_undirected(&ms);
            let forward = vec![true; h.edges().len()];
            DirectedModuleGraph::new(h, forward)?
        }
    };
    let ds = match decisions {
        Some(text) => parse_decision_set(net, text)?,
        None => enumerate_decision_sets(&ms, &g, caps.max_decision_sets)?
            .into_iter()
            .next()
            .unwrap_or_default(),
    };
    let p = build_posterior(net, &ms, &g, &ds, mode)?;
    Ok((ms, p))
}

/// Builds the cut-posterior for one module ordering and decision set.
pub fn build_posterior(
    net: &BayesNet,
    ms: &ModuleSet,
    g: &DirectedModuleGraph,
    ds: &DecisionSet,
    mode: TildeMode,
) -> Result<CutPosterior> {
    if g.graph() != &build_undirected(ms) {
        return Err(Error::Inconsistent(
            "directed module graph was not built over this module set".into(),
        ));
    }
    validate_decision_set(net, ms, g, ds).map_err(|e| match e {
        Error::Decision { theta, violation } => {
            Error::Inconsistent(format!("decision for `{theta}`: {violation}"))
        }
        other => other,
    })?;

    // Versions per shared parameter, indexed by decision vertex.
    let mut versions: BTreeMap<NodeIdx, Vec<Option<ParamVersion>>> = BTreeMap::new();
    let mut kept_origin: BTreeMap<NodeIdx, usize> = BTreeMap::new();
    let mut tilde_vars = Vec::new();
    for (&theta, d) in ds {
        let ranked = ranked_modules(ms, g, theta);
        let mut next_rank = 2u32;
        let mut row = Vec::with_capacity(ranked.len());
        for (k, &m) in ranked.iter().enumerate() {
            row.push(match d.tags[k] {
                Tag::C => None,
                Tag::T if k == d.x => Some(ParamVersion::kept(theta, m)),
                Tag::T => {
                    let pv = ParamVersion {
                        param: theta,
                        origin: m,
                        rank: Some(next_rank),
                    };
                    next_rank += 1;
                    tilde_vars.push(pv);
                    Some(pv)
                }
            });
        }
        kept_origin.insert(theta, ranked[d.x]);
        versions.insert(theta, row);
    }
    for i in 0..ms.len() {
        for &v in ms.intrinsic_params(i) {
            kept_origin.insert(v, i);
        }
    }

    let mut terms = Vec::with_capacity(ms.len());
    for &i in g.order() {
        let class = classify_module(net, ms, g, ds, i)?;
        let position = |theta: NodeIdx| {
            ranked_modules(ms, g, theta)
                .iter()
                .position(|m| *m == i)
                .expect("module contains theta")
        };
        let tilde = class
            .tilde
            .iter()
            .map(|t| versions[t][position(*t)].expect("T vertex has a version"))
            .collect();
        let cond_param = class
            .cond_param
            .iter()
            .map(|t| {
                let d = &ds[t];
                let j = d.cond[position(*t)].expect("C vertex has a neighbour");
                versions[t][j].expect("neighbour is a T vertex")
            })
            .collect();
        let update: Vec<NodeIdx> = class.update.into_iter().collect();
        let module = ms.module(i);
        terms.push(UpdateTerm {
            module: i,
            core: module.core.clone(),
            members: module.members.clone(),
            trivial: update.is_empty(),
            update,
            tilde,
            cond_data: class.cond_data.into_iter().collect(),
            cond_param,
        });
    }

    let orphan = if ms.orphan_params().is_empty() {
        None
    } else {
        let params: Vec<NodeIdx> = ms.orphan_params().iter().copied().collect();
        let mut cond_data = BTreeSet::new();
        let mut cond_param = BTreeSet::new();
        for &o in &params {
            for &p in net.parents(o) {
                if ms.orphan_params().contains(&p) {
                    continue;
                }
                if net.is_data(p) {
                    cond_data.insert(p);
                } else {
                    cond_param.insert(ParamVersion::kept(p, kept_origin[&p]));
                }
            }
        }
        Some(OrphanTerm {
            params,
            cond_data: cond_data.into_iter().collect(),
            cond_param: cond_param.into_iter().collect(),
        })
    };

    Ok(CutPosterior {
        terms,
        orphan,
        tilde_vars,
        mode,
    })
}

/// Label-independent identity of one term. Trivial terms are the constant 1,
/// so only the module they belong to is compared.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TermKey {
    members: BTreeSet<NodeIdx>,
    body: Option<TermBody>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TermBody {
    update: Vec<NodeIdx>,
    tilde: BTreeSet<NodeIdx>,
    cond_data: Vec<NodeIdx>,
    cond_param: CondParamKey,
}

/// Conditioning parameters of a term: each with the tilde copies it stands for.
type CondParamKey = BTreeSet<(NodeIdx, BTreeSet<NodeIdx>)>;

/// Canonical form used for equality and deduplication.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PosteriorKey {
    mode: TildeModeKey,
    terms: BTreeSet<TermKey>,
    orphan: Option<(Vec<NodeIdx>, Vec<NodeIdx>, CondParamKey)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum TildeModeKey {
    Prior,
    Plain,
}

impl CutPosterior {
    fn members_of(&self, module: usize) -> &BTreeSet<NodeIdx> {
        &self
            .terms
            .iter()
            .find(|t| t.module == module)
            .expect("every version originates in a term")
            .members
    }

    fn version_key(&self, pv: &ParamVersion) -> (NodeIdx, BTreeSet<NodeIdx>) {
        (pv.param, self.members_of(pv.origin).clone())
    }

    pub fn key(&self) -> PosteriorKey {
        let terms = self
            .terms
            .iter()
            .map(|t| TermKey {
                members: t.members.clone(),
                body: (!t.trivial).then(|| TermBody {
                    update: t.update.clone(),
                    tilde: t.tilde.iter().map(|pv| pv.param).collect(),
                    cond_data: t.cond_data.clone(),
                    cond_param: t.cond_param.iter().map(|pv| self.version_key(pv)).collect(),
                }),
            })
            .collect();
        let orphan = self.orphan.as_ref().map(|o| {
            (
                o.params.clone(),
                o.cond_data.clone(),
                o.cond_param.iter().map(|pv| self.version_key(pv)).collect(),
            )
        });
        PosteriorKey {
            mode: match self.mode {
                TildeMode::PriorWeighted => TildeModeKey::Prior,
                TildeMode::PlainMarginal => TildeModeKey::Plain,
            },
            terms,
            orphan,
        }
    }

    /// Tilde copies that appear in some nontrivial term.
    pub fn active_tildes(&self) -> Vec<ParamVersion> {
        self.tilde_vars
            .iter()
            .filter(|tv| {
                self.terms
                    .iter()
                    .filter(|t| !t.trivial)
                    .any(|t| t.tilde.contains(tv) || t.cond_param.contains(tv))
            })
            .copied()
            .collect()
    }

    /// Checks the version discipline against the ordering the posterior was
    /// built with: one kept version per parameter, and every conditioned
    /// version created strictly earlier.
    pub fn check_versions(&self, g: &DirectedModuleGraph) -> Result<()> {
        let mut kept: BTreeMap<NodeIdx, usize> = BTreeMap::new();
        let mut created: BTreeSet<ParamVersion> = BTreeSet::new();
        for t in &self.terms {
            for v in &t.update {
                if kept.insert(*v, t.module).is_some() {
                    return Err(Error::Inconsistent(format!("parameter {} kept twice", v.0)));
                }
            }
            for pv in &t.cond_param {
                if !created.contains(pv) || g.position(pv.origin) >= g.position(t.module) {
                    return Err(Error::Inconsistent(format!(
                        "module {} conditions on a version of {} not created earlier",
                        t.module, pv.param.0
                    )));
                }
            }
            created.extend(t.update.iter().map(|v| ParamVersion::kept(*v, t.module)));
            created.extend(t.tilde.iter().copied());
        }
        for tv in &self.tilde_vars {
            if tv.is_kept() || !created.contains(tv) {
                return Err(Error::Inconsistent(
                    "tilde list disagrees with the terms".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Structural equality: terms matched by module member sets, not labels.
pub fn posterior_equal(p: &CutPosterior, q: &CutPosterior) -> bool {
    p.key() == q.key()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Latex,
}

const GREEK: [&str; 24] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "omicron", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi",
    "psi", "omega",
];
const GREEK_LOWER: [&str; 24] = [
    "α", "β", "γ", "δ", "ε", "ζ", "η", "θ", "ι", "κ", "λ", "μ", "ν", "ξ", "ο", "π", "ρ", "σ", "τ",
    "υ", "φ", "χ", "ψ", "ω",
];
const GREEK_UPPER: [&str; 24] = [
    "Α", "Β", "Γ", "Δ", "Ε", "Ζ", "Η", "Θ", "Ι", "Κ", "Λ", "Μ", "Ν", "Ξ", "Ο", "Π", "Ρ", "Σ", "Τ",
    "Υ", "Φ", "Χ", "Ψ", "Ω",
];

/// Display form of a node name: Greek letter names become symbols, with an
/// optional numeric suffix kept as a subscript.
pub fn symbol(name: &str, format: Format) -> String {
    let split = name
        .find(|c: char| c.is_ascii_digit())
        .unwrap_or(name.len());
    let (stem, suffix) = name.split_at(split);
    let lower = stem.to_ascii_lowercase();
    let Some(k) = GREEK.iter().position(|g| *g == lower) else {
        return name.to_owned();
    };
    let upper = stem.starts_with(|c: char| c.is_ascii_uppercase());
    let base = match format {
        Format::Text => {
            if upper {
                GREEK_UPPER[k].to_owned()
            } else {
                GREEK_LOWER[k].to_owned()
            }
        }
        Format::Latex => {
            if k == 14 {
                if upper { "O" } else { "o" }.to_owned()
            } else if upper {
                let mut s = GREEK[k].to_owned();
                s[..1].make_ascii_uppercase();
                format!("\\{s}")
            } else {
                format!("\\{}", GREEK[k])
            }
        }
    };
    match (format, suffix.is_empty()) {
        (_, true) => base,
        (Format::Text, false) => format!("{base}{suffix}"),
        (Format::Latex, false) => format!("{base}_{{{suffix}}}"),
    }
}

fn version_symbol(net: &BayesNet, pv: &ParamVersion, format: Format) -> String {
    let base = symbol(net.name(pv.param), format);
    match (pv.rank, format) {
        (None, _) => base,
        (Some(r), Format::Text) if r > 2 => format!("{base}~^({r})"),
        (Some(_), Format::Text) => format!("{base}~"),
        (Some(r), Format::Latex) if r > 2 => format!("\\tilde{{{base}}}^{{({r})}}"),
        (Some(_), Format::Latex) => format!("\\tilde{{{base}}}"),
    }
}

fn factor(net: &BayesNet, dist: &[ParamVersion], cond: &[Entry], format: Format) -> String {
    let mut dist = dist.to_vec();
    dist.sort_by_key(|pv| (pv.param, pv.rank));
    let dist: Vec<String> = dist
        .iter()
        .map(|pv| version_symbol(net, pv, format))
        .collect();
    let mut cond = cond.to_vec();
    cond.sort_by_key(|e| e.node());
    let cond: Vec<String> = cond
        .iter()
        .map(|e| match e {
            Entry::Data(v) => symbol(net.name(*v), format),
            Entry::Param(pv) => version_symbol(net, pv, format),
        })
        .collect();
    let bar = match format {
        Format::Text => "|",
        Format::Latex => " \\mid ",
    };
    if cond.is_empty() {
        format!("p({})", dist.join(","))
    } else {
        format!("p({}{bar}{})", dist.join(","), cond.join(","))
    }
}

#[derive(Clone, Copy)]
enum Entry {
    Data(NodeIdx),
    Param(ParamVersion),
}

impl Entry {
    fn node(&self) -> NodeIdx {
        match self {
            Entry::Data(v) => *v,
            Entry::Param(pv) => pv.param,
        }
    }
}

fn term_factor(net: &BayesNet, t: &UpdateTerm, format: Format) -> String {
    if t.trivial {
        return "1".to_owned();
    }
    let dist: Vec<ParamVersion> = t
        .update
        .iter()
        .map(|v| ParamVersion::kept(*v, t.module))
        .chain(t.tilde.iter().copied())
        .collect();
    let cond: Vec<Entry> = t
        .cond_param
        .iter()
        .map(|pv| Entry::Param(*pv))
        .chain(t.cond_data.iter().map(|v| Entry::Data(*v)))
        .collect();
    factor(net, &dist, &cond, format)
}

/// Canonical rendering of a cut-posterior.
pub fn render(net: &BayesNet, p: &CutPosterior, format: Format) -> String {
    let mut parts = Vec::new();
    if let Some(o) = &p.orphan {
        let dist: Vec<ParamVersion> = o
            .params
            .iter()
            .map(|v| ParamVersion::kept(*v, usize::MAX))
            .collect();
        let cond: Vec<Entry> = o
            .cond_param
            .iter()
            .map(|pv| Entry::Param(*pv))
            .chain(o.cond_data.iter().map(|v| Entry::Data(*v)))
            .collect();
        parts.push(factor(net, &dist, &cond, format));
    }
    let body: Vec<String> = p
        .terms
        .iter()
        .map(|t| term_factor(net, t, format))
        .collect();
    let body = body.join(" ");
    let tildes = p.active_tildes();
    if tildes.is_empty() {
        parts.push(body);
    } else {
        let (int, pi, d) = match format {
            Format::Text => ("∫", "π", "d"),
            Format::Latex => ("\\int", "\\pi", "\\, d"),
        };
        let mut s = format!("{int} {body}");
        if p.mode == TildeMode::PriorWeighted {
            for tv in &tildes {
                s.push_str(&format!(" {pi}({})", version_symbol(net, tv, format)));
            }
        }
        for tv in &tildes {
            s.push_str(
                &format!(" {d}{}", version_symbol(net, tv, format)).replace("\\, d ", "\\, d"),
            );
        }
        parts.push(s);
    }
    parts.join(" ")
}

// Posterior document.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VersionDoc {
    pub param: String,
    pub origin: String,
    pub rank: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermDoc {
    pub module: Vec<String>,
    pub label: String,
    pub update: Vec<String>,
    pub tilde: Vec<VersionDoc>,
    pub cond_data: Vec<String>,
    pub cond_param: Vec<VersionDoc>,
    pub trivial: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrphanDoc {
    pub params: Vec<String>,
    pub cond_data: Vec<String>,
    pub cond_param: Vec<VersionDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDoc {
    pub terms: Vec<TermDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orphan: Option<OrphanDoc>,
    pub tilde_vars: Vec<VersionDoc>,
    pub mode: TildeMode,
    pub rendered: String,
}

impl PosteriorDoc {
    pub fn new(net: &BayesNet, ms: &ModuleSet, p: &CutPosterior) -> Self {
        let names = |vs: &[NodeIdx]| {
            vs.iter()
                .map(|v| net.name(*v).to_owned())
                .collect::<Vec<_>>()
        };
        let version = |pv: &ParamVersion| VersionDoc {
            param: net.name(pv.param).to_owned(),
            origin: ms.label(pv.origin).to_owned(),
            rank: pv.rank,
        };
        PosteriorDoc {
            terms: p
                .terms
                .iter()
                .map(|t| TermDoc {
                    module: names(&t.members.iter().copied().collect::<Vec<_>>()),
                    label: ms.label(t.module).to_owned(),
                    update: names(&t.update),
                    tilde: t.tilde.iter().map(version).collect(),
                    cond_data: names(&t.cond_data),
                    cond_param: t.cond_param.iter().map(version).collect(),
                    trivial: t.trivial,
                })
                .collect(),
            orphan: p.orphan.as_ref().map(|o| OrphanDoc {
                params: names(&o.params),
                cond_data: names(&o.cond_data),
                cond_param: o.cond_param.iter().map(version).collect(),
            }),
            tilde_vars: p.tilde_vars.iter().map(version).collect(),
            mode: p.mode,
            rendered: render(net, p, Format::Text),
        }
    }
}

/// One built posterior with the choices that produced it.
#[derive(Clone, Debug)]
pub struct BuiltPosterior {
    pub orientation: DirectedModuleGraph,
    pub decisions: DecisionSet,
    pub posterior: CutPosterior,
    /// Index of its equivalence class in [`Enumeration::distinct`].
    pub class: usize,
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub modules: ModuleSet,
    pub built: Vec<BuiltPosterior>,
    /// Index into `built` of the first member of each class.
    pub distinct: Vec<usize>,
}

/// Builds every posterior over orientations x decision sets, in
/// enumeration order, and groups them by structural equality.
pub fn enumerate_all(
    net: &BayesNet,
    partition: &Partition,
    mode: TildeMode,
    caps: &Caps,
) -> Result<Enumeration> {
    let ms = form_module_set(net, partition)?;
    let h = build_undirected(&ms);
    let orientations = enumerate_orientations(&h, caps.max_orient_edges)?;
    let mut built = Vec::new();
    let mut classes: BTreeMap<PosteriorKey, usize> = BTreeMap::new();
    let mut distinct = Vec::new();
    let mut total: u128 = 0;
    for g in orientations {
        let sets = enumerate_decision_sets(&ms, &g, caps.max_decision_sets)?;
        total += sets.len() as u128;
        if total > caps.max_decision_sets {
            return Err(Error::CapExceeded {
                what: "built posteriors",
                actual: total,
                cap: caps.max_decision_sets,
            });
        }
        for ds in sets {
            let posterior = build_posterior(net, &ms, &g, &ds, mode)?;
            let next = classes.len();
            let class = *classes.entry(posterior.key()).or_insert_with(|| {
                distinct.push(built.len());
                next
            });
            built.push(BuiltPosterior {
                orientation: g.clone(),
                decisions: ds,
                posterior,
                class,
            });
        }
    }
    Ok(Enumeration {
        modules: ms,
        built,
        distinct,
    })
}

/// The deduplicated cut-posteriors of `partition`.
pub fn enumerate_posteriors(
    net: &BayesNet,
    partition: &Partition,
    mode: TildeMode,
    caps: &Caps,
) -> Result<Vec<CutPosterior>> {
    let en = enumerate_all(net, partition, mode, caps)?;
    Ok(en
        .distinct
        .iter()
        .map(|i| en.built[*i].posterior.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decisions::parse_decision_set;
    use crate::fixtures;
    use crate::modgraph::OrientationDoc;

    struct ThreeModule {
        net: BayesNet,
        ms: ModuleSet,
        g: DirectedModuleGraph,
    }

    fn three_module() -> ThreeModule {
        let net = fixtures::three_module();
        let ms = form_module_set(&net, &fixtures::three_module_partition(&net)).unwrap();
        let g = OrientationDoc::parse(&ms, fixtures::RBG_JSON).unwrap();
        ThreeModule { net, ms, g }
    }

    fn names(net: &BayesNet, s: &BTreeSet<NodeIdx>) -> Vec<&'static str> {
        s.iter()
            .map(|v| &*Box::leak(net.name(*v).to_owned().into_boxed_str()))
            .collect()
    }

    #[test]
    fn classify_green_and_blue() {
        let f = three_module();
        let conditioned = parse_decision_set(&f.net, fixtures::CONDITIONED_DECISION_JSON).unwrap();
        let tilde_ds = parse_decision_set(&f.net, fixtures::TILDE_DECISION_JSON).unwrap();
        let green = classify_module(&f.net, &f.ms, &f.g, &conditioned, 1).unwrap();
        assert_eq!(names(&f.net, &green.update), ["phi"]);
        assert_eq!(
            names(&f.net, &green.conditioned()),
            ["theta", "W", "Y", "Z"]
        );
        assert!(green.tilde.is_empty());
        let green2 = classify_module(&f.net, &f.ms, &f.g, &tilde_ds, 1).unwrap();
        assert_eq!(names(&f.net, &green2.update), ["phi"]);
        assert_eq!(names(&f.net, &green2.tilde), ["theta"]);
        assert_eq!(names(&f.net, &green2.conditioned()), ["W", "Y", "Z"]);
        for ds in [&conditioned, &tilde_ds] {
            let blue = classify_module(&f.net, &f.ms, &f.g, ds, 2).unwrap();
            assert_eq!(names(&f.net, &blue.update), ["psi"]);
            assert_eq!(names(&f.net, &blue.conditioned()), ["W"]);
        }
        assert!(classify_module(&f.net, &f.ms, &f.g, &DecisionSet::new(), 1).is_err());
    }

    #[test]
    fn conditioned_and_tilde_render_exactly() {
        let f = three_module();
        let conditioned = parse_decision_set(&f.net, fixtures::CONDITIONED_DECISION_JSON).unwrap();
        let p1 =
            build_posterior(&f.net, &f.ms, &f.g, &conditioned, TildeMode::PriorWeighted).unwrap();
        assert_eq!(
            render(&f.net, &p1, Format::Text),
            "p(θ|W,X) p(ψ|W) p(φ|θ,W,Y,Z)"
        );
        assert!(p1.tilde_vars.is_empty());

        let tilde_ds = parse_decision_set(&f.net, fixtures::TILDE_DECISION_JSON).unwrap();
        let p2 = build_posterior(&f.net, &f.ms, &f.g, &tilde_ds, TildeMode::PriorWeighted).unwrap();
        assert_eq!(
            render(&f.net, &p2, Format::Text),
            "∫ p(θ|W,X) p(ψ|W) p(θ~,φ|W,Y,Z) π(θ~) dθ~"
        );
        assert_eq!(
            render(&f.net, &p2, Format::Latex),
            "\\int p(\\theta \\mid W,X) p(\\psi \\mid W) p(\\tilde{\\theta},\\phi \\mid W,Y,Z) \\pi(\\tilde{\\theta}) \\, d\\tilde{\\theta}"
        );
        let plain =
            build_posterior(&f.net, &f.ms, &f.g, &tilde_ds, TildeMode::PlainMarginal).unwrap();
        assert_eq!(
            render(&f.net, &plain, Format::Text),
            "∫ p(θ|W,X) p(ψ|W) p(θ~,φ|W,Y,Z) dθ~"
        );
    }

    #[test]
    fn kept_in_green_leaves_red_trivial() {
        let f = three_module();
        let ds = parse_decision_set(&f.net, fixtures::LATE_DECISION_JSON).unwrap();
        let p = build_posterior(&f.net, &f.ms, &f.g, &ds, TildeMode::PriorWeighted).unwrap();
        assert!(p.terms[0].trivial);
        assert_eq!(p.tilde_vars.len(), 1);
        assert_eq!(render(&f.net, &p, Format::Text), "1 p(ψ|W) p(θ,φ|W,Y,Z)");
        p.check_versions(&f.g).unwrap();
    }

    #[test]
    fn equality_examples() {
        let f = three_module();
        let build = |json: &str| {
            let ds = parse_decision_set(&f.net, json).unwrap();
            build_posterior(&f.net, &f.ms, &f.g, &ds, TildeMode::PriorWeighted).unwrap()
        };
        let (p1, p2, p3) = (
            build(fixtures::CONDITIONED_DECISION_JSON),
            build(fixtures::TILDE_DECISION_JSON),
            build(fixtures::LATE_DECISION_JSON),
        );
        assert!(posterior_equal(&p1, &p1.clone()));
        assert!(!posterior_equal(&p1, &p2));
        assert!(!posterior_equal(&p2, &p3));

        // Same modules listed in another order, with matching labels.
        let part = Partition::parse(
            &f.net,
            r#"{"blocks":[["W"],["X"],["Y","Z"]],"labels":["blue","red","green"]}"#,
        )
        .unwrap();
        let ms = form_module_set(&f.net, &part).unwrap();
        let g = OrientationDoc::parse(&ms, fixtures::RBG_JSON).unwrap();
        let ds = parse_decision_set(&f.net, fixtures::CONDITIONED_DECISION_JSON).unwrap();
        let relabelled = build_posterior(&f.net, &ms, &g, &ds, TildeMode::PriorWeighted).unwrap();
        assert_eq!(
            render(&f.net, &relabelled, Format::Text),
            render(&f.net, &p1, Format::Text)
        );
        assert!(posterior_equal(&p1, &relabelled));
    }

    #[test]
    fn single_block_is_full_bayes() {
        let net = fixtures::three_module();
        let ms = form_module_set(&net, &Partition::single_block(&net).unwrap()).unwrap();
        let g = DirectedModuleGraph::new(build_undirected(&ms), vec![]).unwrap();
        let p =
            build_posterior(&net, &ms, &g, &DecisionSet::new(), TildeMode::PriorWeighted).unwrap();
        assert_eq!(p.terms.len(), 1);
        assert_eq!(render(&net, &p, Format::Text), "p(θ,φ,ψ|W,X,Y,Z)");
        assert!(p.tilde_vars.is_empty() && p.terms[0].cond_param.is_empty());
    }

    #[test]
    fn orphan_term_renders_first() {
        let net = BayesNet::parse(
            r#"{"nodes":[{"id":"theta","kind":"param"},
               {"id":"X","kind":"data","parents":["theta"]},
               {"id":"lambda","kind":"param","parents":["X","theta"]}]}"#,
        )
        .unwrap();
        let ms = form_module_set(&net, &Partition::single_block(&net).unwrap()).unwrap();
        let g = DirectedModuleGraph::new(build_undirected(&ms), vec![]).unwrap();
        let p =
            build_posterior(&net, &ms, &g, &DecisionSet::new(), TildeMode::PriorWeighted).unwrap();
        assert_eq!(render(&net, &p, Format::Text), "p(λ|θ,X) p(θ|X)");
    }

    #[test]
    fn tilde_ranks_follow_update_order() {
        // theta in three modules, updated in all three and kept in the last.
        let net = fixtures::star(3);
        let ms = form_module_set(&net, &fixtures::star_partition(&net, 3)).unwrap();
        let g = DirectedModuleGraph::new(build_undirected(&ms), vec![true, true, true]).unwrap();
        let theta = net.lookup("theta").unwrap();
        let mut ds = DecisionSet::new();
        ds.insert(
            theta,
            crate::decisions::Decision {
                theta,
                tags: vec![Tag::T, Tag::T, Tag::T],
                x: 2,
                cond: vec![None; 3],
            },
        );
        let p = build_posterior(&net, &ms, &g, &ds, TildeMode::PriorWeighted).unwrap();
        let ranks: Vec<Option<u32>> = p.tilde_vars.iter().map(|t| t.rank).collect();
        assert_eq!(ranks, [Some(2), Some(3)]);
        assert_eq!(
            render(&net, &p, Format::Text),
            "∫ p(θ~,a1|X1) p(θ~^(3),a2|X2) p(θ,a3|X3) π(θ~) π(θ~^(3)) dθ~ dθ~^(3)"
        );
    }

    #[test]
    fn mismatched_decision_is_inconsistent() {
        let f = three_module();
        let bad = parse_decision_set(&f.net, r#"[{"theta":"theta","tags":["T"],"x":1}]"#).unwrap();
        assert!(matches!(
            build_posterior(&f.net, &f.ms, &f.g, &bad, TildeMode::PriorWeighted),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn enumeration_counts() {
        let f = three_module();
        let en = enumerate_all(
            &f.net,
            f.ms.partition(),
            TildeMode::PriorWeighted,
            &Caps::default(),
        )
        .unwrap();
        assert_eq!(en.built.len(), 18);
        // Orientations with green before red yield only posteriors also
        // reachable with red first, so three classes remain.
        assert_eq!(en.distinct.len(), 3);

        let net = fixtures::two_module();
        let en = enumerate_all(
            &net,
            &fixtures::two_module_partition(&net),
            TildeMode::PriorWeighted,
            &Caps::default(),
        )
        .unwrap();
        assert_eq!(en.built.len(), 6);
        assert_eq!(en.distinct.len(), 2);

        let single = enumerate_posteriors(
            &net,
            &Partition::single_block(&net).unwrap(),
            TildeMode::PriorWeighted,
            &Caps::default(),
        )
        .unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn symbols() {
        assert_eq!(symbol("theta", Format::Text), "θ");
        assert_eq!(symbol("Theta", Format::Latex), "\\Theta");
        assert_eq!(symbol("theta2", Format::Text), "θ2");
        assert_eq!(symbol("theta2", Format::Latex), "\\theta_{2}");
        assert_eq!(symbol("W", Format::Latex), "W");
        assert_eq!(symbol("thetas", Format::Text), "thetas");
    }
}
