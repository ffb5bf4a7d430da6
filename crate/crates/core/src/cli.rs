//! The `cutspace` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::config::Caps;
use crate::decisions::{
    count_breakdown, decision_set_docs, enumerate_decisions, ranked_modules, DecisionDoc,
    DecisionSet,
};
use crate::error::{Error, Result};
use crate::evaluate::{eval_posterior_with, full_bayes_with, score_log_pred_with, FactorTable};
use crate::modgraph::{
    build_undirected, enumerate_orientations, DirectedModuleGraph, OrientationDoc,
};
use crate::modules::{form_module_set, ModuleSet, Partition};
use crate::network::{BayesNet, Evidence};
use crate::posterior::{
    build_from_docs, enumerate_all, render, CutPosterior, Format, PosteriorDoc, TildeMode,
};
use crate::walk::{self, HeldoutScorer, MoveProbs, WalkState};

#[derive(Parser, Debug)]
#[command(
    name = "cutspace",
    version,
    about = "Enumerate, render, evaluate and search cut-posteriors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a network.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Form the modules of a partition.
    Modules {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        part: PartitionArg,
    },
    /// List the acyclic orientations of the module graph.
    Orientations {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        part: PartitionArg,
    },
    /// Count and list the decisions of every shared parameter.
    Decisions {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        part: PartitionArg,
        /// Orientation document; defaults to lower-to-higher module index.
        #[arg(long)]
        orientation: Option<PathBuf>,
    },
    /// Build every posterior over orientations and decision sets.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        part: PartitionArg,
        /// Only the first posterior of each equality class.
        #[arg(long)]
        distinct: bool,
    },
    /// Render one posterior.
    Render {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        choice: Choice,
    },
    /// Evaluate one posterior (or the full posterior) on a discrete network.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        choice: Choice,
        /// Evidence document.
        #[arg(long)]
        evidence: Option<PathBuf>,
        /// Evaluate the full posterior instead of a cut-posterior.
        #[arg(long)]
        full_bayes: bool,
    },
    /// Held-out log predictive density of one posterior.
    Score {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        choice: Choice,
        /// Training evidence document.
        #[arg(long)]
        evidence: Option<PathBuf>,
        /// Held-out evidence document.
        #[arg(long)]
        heldout: PathBuf,
    },
    /// Run the random walk, scoring by held-out log predictive density.
    Walk {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        part: PartitionArg,
        /// Training evidence document.
        #[arg(long)]
        evidence: Option<PathBuf>,
        /// Held-out evidence document.
        #[arg(long)]
        heldout: PathBuf,
        /// Random seed; equal seeds give identical traces.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of proposals.
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        /// Move probabilities document; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Probability of perturbing a decision rather than the module graph.
        #[arg(long)]
        q0: Option<f64>,
        /// Probability of perturbing the decision graph rather than the kept index.
        #[arg(long)]
        q1: Option<f64>,
        /// Probability of acting on an existing T-C edge rather than creating one.
        #[arg(long)]
        q2: Option<f64>,
        /// Probability of deleting the sampled edge rather than rewiring it.
        #[arg(long)]
        q3: Option<f64>,
        /// Probability of a merge rather than a split.
        #[arg(long)]
        q4: Option<f64>,
        /// Probability that a split T vertex keeps both halves T.
        #[arg(long)]
        q5: Option<f64>,
        /// Acceptance temperature.
        #[arg(long)]
        temperature: Option<f64>,
    },
}

/// Parses a cap, which must be at least 1.
fn positive<T>(s: &str) -> std::result::Result<T, String>
where
    T: std::str::FromStr + PartialOrd + From<u8>,
    T::Err: std::fmt::Display,
{
    let v: T = s.parse().map_err(|e: T::Err| e.to_string())?;
    if v < T::from(1) {
        return Err("caps must be positive".into());
    }
    Ok(v)
}

#[derive(Args, Debug)]
struct Common {
    /// Network document.
    #[arg(long)]
    net: PathBuf,
    /// Output format; defaults to text for render and JSON otherwise.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// How tilde copies are integrated out.
    #[arg(long, value_enum, default_value_t = ModeArg::PriorWeighted)]
    mode: ModeArg,
    /// Largest number of decision sets to enumerate.
    #[arg(long, value_parser = positive::<u128>)]
    max_decision_sets: Option<u128>,
    /// Largest module graph, in edges, whose orientations are enumerated.
    #[arg(long, value_parser = positive::<usize>)]
    max_orient_edges: Option<usize>,
    /// Largest factor table, in cells, to evaluate.
    #[arg(long, value_parser = positive::<u128>)]
    max_cells: Option<u128>,
}

#[derive(Args, Debug)]
struct PartitionArg {
    /// Partition document; defaults to a single block.
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Choice {
    #[command(flatten)]
    part: PartitionArg,
    /// Orientation document; defaults to lower-to-higher module index.
    #[arg(long)]
    orientation: Option<PathBuf>,
    /// Decision-set document; defaults to the first enumerated set.
    #[arg(long)]
    decision: Option<PathBuf>,
}

/// Everything a command needs besides its input documents.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub caps: Caps,
    pub mode: TildeMode,
    pub probs: MoveProbs,
    pub seed: u64,
    pub format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
    Latex,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    PriorWeighted,
    PlainMarginal,
}

impl From<ModeArg> for TildeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PriorWeighted => TildeMode::PriorWeighted,
            ModeArg::PlainMarginal => TildeMode::PlainMarginal,
        }
    }
}

/// Entry point used by the binary. Returns the process exit status.
pub fn dispatch<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("CUTSPACE_LOG", "warn"))
        .try_init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` and runs the command, writing to the given streams.
/// Exit status: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli) {
        Ok((doc, target)) => match emit(&doc, target.as_deref(), out) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                1
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn emit(doc: &str, target: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match target {
        Some(path) => {
            fs::write(path, doc).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        }
        None => out
            .write_all(doc.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl Common {
    fn config(&self, default_format: OutputFormat) -> RunConfig {
        let defaults = Caps::default();
        RunConfig {
            caps: Caps {
                max_decision_sets: self.max_decision_sets.unwrap_or(defaults.max_decision_sets),
                max_orient_edges: self.max_orient_edges.unwrap_or(defaults.max_orient_edges),
                max_cells: self.max_cells.unwrap_or(defaults.max_cells),
            },
            mode: self.mode.into(),
            probs: MoveProbs::default(),
            seed: 0,
            format: self.format.unwrap_or(default_format),
        }
    }

    fn net(&self) -> Result<BayesNet> {
        BayesNet::parse(&read(&self.net)?)
    }
}

fn partition(net: &BayesNet, arg: &PartitionArg) -> Result<Partition> {
    match &arg.partition {
        Some(p) => Partition::parse(net, &read(p)?),
        None => Partition::single_block(net),
    }
}

fn orientation(ms: &ModuleSet, path: Option<&Path>) -> Result<DirectedModuleGraph> {
    match path {
        Some(p) => OrientationDoc::parse(ms, &read(p)?),
        None => {
            let h = build_undirected(ms);
            let forward = vec![true; h.edges().len()];
            DirectedModuleGraph::new(h, forward)
        }
    }
}

fn evidence(net: &BayesNet, path: Option<&Path>) -> Result<Evidence> {
    match path {
        Some(p) => Evidence::parse(net, &read(p)?),
        None => Ok(Evidence::new()),
    }
}

fn read_opt(path: Option<&Path>) -> Result<Option<String>> {
    path.map(read).transpose()
}

struct Chosen {
    ms: ModuleSet,
    posterior: CutPosterior,
}

fn choose(net: &BayesNet, choice: &Choice, cfg: &RunConfig) -> Result<Chosen> {
    let part = read_opt(choice.part.partition.as_deref())?;
    let orient = read_opt(choice.orientation.as_deref())?;
    let dec = read_opt(choice.decision.as_deref())?;
    let (ms, posterior) = build_from_docs(
        net,
        part.as_deref(),
        orient.as_deref(),
        dec.as_deref(),
        cfg.mode,
        &cfg.caps,
    )?;
    Ok(Chosen { ms, posterior })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn names(net: &BayesNet, vs: impl IntoIterator<Item = crate::network::NodeIdx>) -> Vec<String> {
    vs.into_iter().map(|v| net.name(v).to_owned()).collect()
}

fn table_text(net: &BayesNet, t: &FactorTable) -> String {
    let header: Vec<String> = t.scope().iter().map(|(k, _)| k.name(net)).collect();
    let mut s = format!("{}\tp\n", header.join("\t"));
    let states: Vec<usize> = t.scope().iter().map(|(_, n)| *n).collect();
    let mut i = 0;
    crate::evaluate::for_each_assignment(&states, |a| {
        let row: Vec<String> = a.iter().map(|x| x.to_string()).collect();
        s.push_str(&format!("{}\t{:.12}\n", row.join("\t"), t.values()[i]));
        i += 1;
    });
    s
}

type Output = (String, Option<PathBuf>);

fn execute(cli: Cli) -> Result<Output> {
    match cli.command {
        Command::Validate { common } => {
            let cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let (data, params) = (net.data_nodes().count(), net.param_nodes().count());
            let doc = match cfg.format {
                OutputFormat::Json => pretty(&json!({
                    "valid": true,
                    "nodes": net.len(),
                    "edges": net.edge_count(),
                    "data": data,
                    "params": params,
                    "discrete": net.is_discrete(),
                })),
                _ => format!(
                    "valid: {} nodes ({data} data, {params} param), {} edges{}\n",
                    net.len(),
                    net.edge_count(),
                    if net.is_discrete() { ", discrete" } else { "" }
                ),
            };
            Ok((doc, common.out))
        }
        Command::Modules { common, part } => {
            let cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let ms = form_module_set(&net, &partition(&net, &part)?)?;
            let doc = match cfg.format {
                OutputFormat::Json => pretty(&json!({
                    "modules": (0..ms.len()).map(|i| json!({
                        "label": ms.label(i),
                        "core": names(&net, ms.module(i).core.iter().copied()),
                        "members": names(&net, ms.module(i).members.iter().copied()),
                        "intrinsic": names(&net, ms.intrinsic_params(i).iter().copied()),
                    })).collect::<Vec<_>>(),
                    "shared": names(&net, ms.shared_params().iter().copied()),
                    "orphans": names(&net, ms.orphan_params().iter().copied()),
                })),
                _ => {
                    let mut s = String::new();
                    for i in 0..ms.len() {
                        s.push_str(&format!(
                            "{}: {{{}}}\n",
                            ms.label(i),
                            names(&net, ms.module(i).members.iter().copied()).join(", ")
                        ));
                    }
                    s.push_str(&format!(
                        "shared: {}\n",
                        names(&net, ms.shared_params().iter().copied()).join(", ")
                    ));
                    s.push_str(&format!(
                        "orphans: {}\n",
                        names(&net, ms.orphan_params().iter().copied()).join(", ")
                    ));
                    s
                }
            };
            Ok((doc, common.out))
        }
        Command::Orientations { common, part } => {
            let cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let ms = form_module_set(&net, &partition(&net, &part)?)?;
            let all = enumerate_orientations(&build_undirected(&ms), cfg.caps.max_orient_edges)?;
            let docs: Vec<OrientationDoc> = all
                .iter()
                .map(|g| OrientationDoc::from_graph(&ms, g))
                .collect();
            let doc = match cfg.format {
                OutputFormat::Json => pretty(&serde_json::to_value(&docs).expect("serializable")),
                _ => {
                    let mut s = format!("{} orientations\n", docs.len());
                    for (i, d) in docs.iter().enumerate() {
                        let arcs: Vec<String> = d
                            .directions
                            .iter()
                            .map(|[a, b]| format!("{a}->{b}"))
                            .collect();
                        let order = d.order.clone().unwrap_or_default().join(" ");
                        s.push_str(&format!("{}: {} | order {order}\n", i + 1, arcs.join(", ")));
                    }
                    s
                }
            };
            Ok((doc, common.out))
        }
        Command::Decisions {
            common,
            part,
            orientation: orient,
        } => {
            let cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let ms = form_module_set(&net, &partition(&net, &part)?)?;
            let g = orientation(&ms, orient.as_deref())?;
            let mut entries = Vec::new();
            let mut text = String::new();
            for &theta in ms.shared_params() {
                let n = ranked_modules(&ms, &g, theta).len();
                let list = enumerate_decisions(theta, n);
                let breakdown = count_breakdown(n);
                let parts: Vec<String> = breakdown.iter().map(|c| c.to_string()).collect();
                text.push_str(&format!(
                    "{}: {} decisions ({} partitions: {})\n",
                    net.name(theta),
                    list.len(),
                    breakdown.len(),
                    parts.join("+")
                ));
                let docs: Vec<DecisionDoc> = list
                    .iter()
                    .map(|d| DecisionDoc::from_decision(&net, d))
                    .collect();
                entries.push(json!({
                    "theta": net.name(theta),
                    "modules": ranked_modules(&ms, &g, theta).iter().map(|m| ms.label(*m)).collect::<Vec<_>>(),
                    "count": list.len(),
                    "breakdown": breakdown,
                    "decisions": docs,
                }));
            }
            let doc = match cfg.format {
                OutputFormat::Json => pretty(&Value::Array(entries)),
                _ => text,
            };
            Ok((doc, common.out))
        }
        Command::Enumerate {
            common,
            part,
            distinct,
        } => {
            let cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let en = enumerate_all(&net, &partition(&net, &part)?, cfg.mode, &cfg.caps)?;
            let picked: Vec<usize> = if distinct {
                en.distinct.clone()
            } else {
                (0..en.built.len()).collect()
            };
            let doc = match cfg.format {
                OutputFormat::Json => pretty(&Value::Array(
                    picked
                        .iter()
                        .map(|&i| {
                            let b = &en.built[i];
                            json!({
                                "index": i + 1,
                                "class": b.class + 1,
                                "orientation": OrientationDoc::from_graph(&en.modules, &b.orientation),
                                "decisions": decision_set_docs(&net, &b.decisions),
                                "rendered": render(&net, &b.posterior, Format::Text),
                            })
                        })
                        .collect(),
                )),
                fmt => {
                    let f = if fmt == OutputFormat::Latex { Format::Latex } else { Format::Text };
                    let mut s = format!("{} posteriors, {} distinct\n", en.built.len(), en.distinct.len());
                    for &i in &picked {
                        let b = &en.built[i];
                        s.push_str(&format!("{} [class {}] {}\n", i + 1, b.class + 1, render(&net, &b.posterior, f)));
                    }
                    s
                }
            };
            Ok((doc, common.out))
        }
        Command::Render { common, choice } => {
            let cfg = common.config(OutputFormat::Text);
            let net = common.net()?;
            let c = choose(&net, &choice, &cfg)?;
            let doc = match cfg.format {
                OutputFormat::Json => pretty(
                    &serde_json::to_value(PosteriorDoc::new(&net, &c.ms, &c.posterior))
                        .expect("serializable"),
                ),
                OutputFormat::Text => format!("{}\n", render(&net, &c.posterior, Format::Text)),
                OutputFormat::Latex => format!("{}\n", render(&net, &c.posterior, Format::Latex)),
            };
            Ok((doc, common.out))
        }
        Command::Eval {
            common,
            choice,
            evidence: ev,
            full_bayes,
        } => {
            let cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let ev = evidence(&net, ev.as_deref())?;
            let table = if full_bayes {
                full_bayes_with(&net, &ev, &cfg.caps)?
            } else {
                let c = choose(&net, &choice, &cfg)?;
                eval_posterior_with(&net, &c.posterior, &ev, &cfg.caps)?
            };
            let doc = match cfg.format {
                OutputFormat::Json => pretty(&table.to_json(&net)),
                _ => table_text(&net, &table),
            };
            Ok((doc, common.out))
        }
        Command::Score {
            common,
            choice,
            evidence: ev,
            heldout,
        } => {
            let cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let train = evidence(&net, ev.as_deref())?;
            let held = evidence(&net, Some(&heldout))?;
            let c = choose(&net, &choice, &cfg)?;
            let score = score_log_pred_with(&net, &c.posterior, &train, &held, &cfg.caps)?;
            let doc = match cfg.format {
                OutputFormat::Json => pretty(&score.to_json()),
                _ => {
                    let mut s = format!("log_pred {}\n", score.log_pred);
                    for (k, v) in &score.per_node {
                        s.push_str(&format!("{k} {v}\n"));
                    }
                    s
                }
            };
            Ok((doc, common.out))
        }
        Command::Walk {
            common,
            part,
            evidence: ev,
            heldout,
            seed,
            iters,
            config,
            q0,
            q1,
            q2,
            q3,
            q4,
            q5,
            temperature,
        } => {
            let mut cfg = common.config(OutputFormat::Json);
            let net = common.net()?;
            let mut probs = match &config {
                Some(p) => MoveProbs::parse(&read(p)?)?,
                None => MoveProbs::default(),
            };
            for (slot, v) in [
                (&mut probs.q0, q0),
                (&mut probs.q1, q1),
                (&mut probs.q2, q2),
                (&mut probs.q3, q3),
                (&mut probs.q4, q4),
                (&mut probs.q5, q5),
                (&mut probs.temperature, temperature),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            probs.validate()?;
            cfg.probs = probs;
            cfg.seed = seed;
            net.require_discrete()?;
            let scorer = HeldoutScorer {
                train: evidence(&net, ev.as_deref())?,
                heldout: evidence(&net, Some(&heldout))?,
                caps: cfg.caps.clone(),
            };
            let result = walk::run(
                &net,
                &partition(&net, &part)?,
                iters,
                &cfg.probs,
                &scorer,
                cfg.seed,
                cfg.mode,
            )?;
            let mut doc = String::new();
            for r in &result.trace {
                doc.push_str(&serde_json::to_string(&r.to_json()).expect("serializable"));
                doc.push('\n');
            }
            doc.push_str(
                &serde_json::to_string(&best_summary(&net, &result.best)).expect("serializable"),
            );
            doc.push('\n');
            Ok((doc, common.out))
        }
    }
}

fn best_summary(net: &BayesNet, st: &WalkState) -> Value {
    let score = match st.score {
        Some(s) if s.is_finite() => json!(s),
        Some(_) => json!("-inf"),
        None => Value::Null,
    };
    let ds: &DecisionSet = &st.ds;
    json!({
        "best": {
            "score": score,
            "partition": st.ms.partition().to_doc(net),
            "orientation": OrientationDoc::from_graph(&st.ms, &st.g),
            "decisions": decision_set_docs(net, ds),
            "rendered": render(net, &st.posterior, Format::Text),
        }
    })
}
