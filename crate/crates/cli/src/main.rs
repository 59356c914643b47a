//! `dtree`: validate models, compile them into default trees, evaluate and
//! walk the trees, and run the brute-force oracle.
//!
//! Exit codes: 0 success, 1 a check failed or violations were found,
//! 2 bad usage or unreadable input.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dtree_core::compiler::{Algorithm, Compiler, CompilerConfig, Enumeration};
use dtree_core::error::ExportError;
use dtree_core::export::{to_dot, TreeDocument};
use dtree_core::model::{validate, InfluenceDiagram, Model};
use dtree_core::oracle::{self, NetworkGenSpec, Verdict};
use dtree_core::walk::{walk, Prompt, Response, ResponseSource, Scripted, WalkStatus};
use dtree_core::{fixtures, DTree, Inference};

#[derive(Parser)]
#[command(name = "dtree", version, about = "Compile influence diagrams into default trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against every structural rule.
    Validate {
        /// Model JSON file, or `fixture:NAME`.
        model: String,
        #[arg(long)]
        json: bool,
    },
    /// Compile a model into a DTree.
    Compile(CompileArgs),
    /// Recompute a tree's expected utility two ways and check coverage.
    Eval {
        tree: PathBuf,
        model: String,
        #[arg(long)]
        json: bool,
    },
    /// Walk a tree from the root to a decision.
    Walk {
        tree: PathBuf,
        /// Prompt for each item on stdin; `stop` ends the walk early.
        #[arg(long, conflicts_with = "responses", required_unless_present = "responses")]
        interactive: bool,
        /// Comma-separated value labels, in the order they are asked for.
        #[arg(long, value_delimiter = ',')]
        responses: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
    },
    /// Brute-force reference computations.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Write a tree as Graphviz dot.
    ExportDot {
        tree: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Dd,
    Ddn,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnumerationArg {
    Greedy,
    Exhaustive,
}

#[derive(Args)]
struct CompileArgs {
    model: String,
    /// JSON file with `CompilerConfig` fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_enum)]
    enumeration: Option<EnumerationArg>,
    #[arg(long)]
    max_enodes: Option<usize>,
    #[arg(long)]
    min_gain: Option<f64>,
    #[arg(long)]
    eu_fraction: Option<f64>,
    /// Score candidates on one thread.
    #[arg(long)]
    sequential: bool,
    /// Re-run network evaluations instead of memoizing them.
    #[arg(long)]
    no_cache: bool,
    /// Also report EU as a fraction of the optimal full-observation EU.
    #[arg(long)]
    with_oracle: bool,
    /// Tree output file.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Stats output file; defaults to the tree file with `.stats.json`.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// EU of deciding after observing every evidence item.
    PolicyEu {
        model: String,
        #[arg(long)]
        json: bool,
    },
    /// Exhaustive search for the best DTree within an Enode budget.
    OptimalDtree {
        model: String,
        #[arg(long)]
        max_enodes: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Check that optimal expansions of a tree expand a max-gain Dnode.
    Property3 {
        model: String,
        /// Tree to check; the single-Dnode tree if omitted.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        budget: usize,
        #[arg(long)]
        json: bool,
    },
    /// Generate a random valid model.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        concentration: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn fixture(name: &str) -> Option<InfluenceDiagram> {
    Some(match name {
        "net0" => fixtures::net0(),
        "net1" => fixtures::net1(),
        "net1_tie" => fixtures::net1_tie(),
        "net2" => fixtures::net2(),
        "net3" => fixtures::net3(),
        "net3_wide" => fixtures::net3_wide(),
        "gating" => fixtures::gating(),
        "twin" => fixtures::twin(),
        _ => return None,
    })
}

fn read_diagram(arg: &str) -> Result<InfluenceDiagram> {
    if let Some(name) = arg.strip_prefix("fixture:") {
        return fixture(name).ok_or_else(|| anyhow!("unknown fixture {name:?}"));
    }
    let text = fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
    Ok(InfluenceDiagram::from_json(&text)?)
}

fn load_model(arg: &str) -> Result<Model> {
    Model::new(read_diagram(arg)?).with_context(|| format!("loading {arg}"))
}

fn load_tree(path: &Path) -> Result<DTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(TreeDocument::from_json(&text)?.to_tree()?)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Validate { model, json } => cmd_validate(&model, json),
        Command::Compile(args) => cmd_compile(args),
        Command::Eval { tree, model, json } => cmd_eval(&tree, &model, json),
        Command::Walk {
            tree,
            interactive,
            responses,
            json,
        } => cmd_walk(&tree, interactive, responses, json),
        Command::Oracle { command } => cmd_oracle(command),
        Command::ExportDot { tree, output } => {
            let t = load_tree(&tree)?;
            write_out(output.as_deref(), &to_dot(&t))?;
            Ok(true)
        }
    }
}

fn cmd_validate(model: &str, json: bool) -> Result<bool> {
    let diagram = read_diagram(model)?;
    let report = validate(&diagram);
    if json {
        let violations: Vec<_> = report
            .violations
            .iter()
            .map(|v| json!({"node": v.node, "rule": v.rule.to_string(), "detail": v.detail}))
            .collect();
        print_json(&json!({
            "valid": report.is_valid(),
            "fingerprint": diagram.fingerprint(),
            "violations": violations,
        }));
    } else if report.is_valid() {
        println!("valid ({})", diagram.fingerprint());
    } else {
        for v in &report.violations {
            println!("{v}");
        }
    }
    Ok(report.is_valid())
}

fn compiler_config(args: &CompileArgs) -> Result<CompilerConfig> {
    let mut cfg = match &args.config {
        Some(p) => CompilerConfig::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => CompilerConfig::default(),
    };
    if let Some(a) = args.algo {
        cfg.algorithm = match a {
            AlgoArg::Dd => Algorithm::Dd,
            AlgoArg::Ddn => Algorithm::Ddn,
        };
    }
    if let Some(d) = args.depth {
        cfg.depth = d;
    }
    if let Some(e) = args.enumeration {
        cfg.enumeration = match e {
            EnumerationArg::Greedy => Enumeration::Greedy,
            EnumerationArg::Exhaustive => Enumeration::Exhaustive,
        };
    }
    if args.max_enodes.is_some() {
        cfg.max_enodes = args.max_enodes;
    }
    if let Some(g) = args.min_gain {
        cfg.min_gain = g;
    }
    if args.eu_fraction.is_some() {
        cfg.eu_fraction_target = args.eu_fraction;
    }
    if args.sequential {
        cfg.parallel = false;
    }
    if args.no_cache {
        cfg.cache = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_compile(args: CompileArgs) -> Result<bool> {
    let cfg = compiler_config(&args)?;
    let model = load_model(&args.model)?;
    let out = Compiler::new(&model, cfg)?.run()?;
    for w in &out.stats.warnings {
        eprintln!("warning: {w}");
    }
    let inf = Inference::new(&model);
    let eu = out.tree.eu_direct(&inf);
    let optimal = if args.with_oracle {
        Some(oracle::optimal_policy_eu(&model)?)
    } else {
        None
    };
    let tree_json = TreeDocument::from_tree(&out.tree).to_json();
    let stats_path = args
        .stats
        .clone()
        .or_else(|| args.output.as_ref().map(|p| p.with_extension("stats.json")));
    if let Some(p) = &args.output {
        write_out(Some(p), &tree_json)?;
    }
    if let Some(p) = &stats_path {
        write_out(Some(p), &out.stats.to_json())?;
    }
    let s = &out.stats;
    if args.json {
        print_json(&json!({
            "eu": eu,
            "optimal_policy_eu": optimal,
            "optimality_ratio": optimal.map(|o| eu / o),
            "enodes": s.enodes,
            "nodes": s.nodes,
            "iterations": s.iterations,
            "inference_calls": s.inference_calls,
            "ne": s.ne,
            "stop_reason": s.stop_reason,
            "tree": args.output,
            "stats": stats_path,
        }));
    } else {
        println!(
            "compiled {} Enodes ({} nodes) in {} iterations, {} network evaluations",
            s.enodes, s.nodes, s.iterations, s.inference_calls
        );
        println!("EU = {eu}");
        if let Some(o) = optimal {
            println!("optimal policy EU = {o}, ratio = {}", eu / o);
        }
        if args.output.is_none() {
            print!("{tree_json}");
        }
    }
    Ok(true)
}

fn cmd_eval(tree: &Path, model: &str, json: bool) -> Result<bool> {
    let model = load_model(model)?;
    let t = load_tree(tree)?;
    if t.fingerprint() != model.fingerprint() {
        return Err(ExportError::FingerprintMismatch {
            tree: t.fingerprint().to_string(),
            model: model.fingerprint().to_string(),
        }
        .into());
    }
    let inf = Inference::new(&model);
    let direct = t.eu_direct(&inf);
    let identity = t.eu_theorem1(&inf)?;
    let diff = (direct - identity).abs();
    let compiles = t.dt_compiles(&model);
    let ok = compiles && diff <= 1e-9;
    if json {
        print_json(&json!({
            "eu_direct": direct,
            "eu_identity": identity,
            "difference": diff,
            "dt_compiles": compiles,
            "ok": ok,
        }));
    } else {
        println!("EU (direct)   = {direct}");
        println!("EU (identity) = {identity}");
        println!("difference    = {diff:e}");
        if !compiles {
            println!("tree does not DT-compile");
        }
    }
    Ok(ok)
}

/// Reads responses from stdin, re-prompting on labels that are not values
/// of the current item.
struct Stdin;

impl ResponseSource for Stdin {
    fn respond(&mut self, prompt: &Prompt<'_>) -> Option<Response> {
        let stdin = io::stdin();
        loop {
            eprint!(
                "{} {}? [{}] (default {}; `stop` to decide now): ",
                prompt.node,
                prompt.item,
                prompt.values.join("/"),
                prompt.default.join(",")
            );
            io::stderr().flush().ok();
            let mut line = String::new();
            if stdin.lock().read_line(&mut line).ok()? == 0 {
                return None;
            }
            let r = Response::parse(&line);
            match &r {
                Response::Value(v) if !prompt.values.contains(v) => {
                    eprintln!("{v:?} is not a value of {}", prompt.item);
                }
                _ => return Some(r),
            }
        }
    }
}

fn cmd_walk(tree: &Path, interactive: bool, responses: Option<Vec<String>>, json: bool) -> Result<bool> {
    let t = load_tree(tree)?;
    let trace = if interactive {
        walk(&t, &mut Stdin)?
    } else {
        let rs = responses.unwrap_or_default();
        walk(&t, &mut Scripted::new(rs.iter().map(|r| Response::parse(r)).collect()))?
    };
    if json {
        print_json(&serde_json::to_value(&trace)?);
    } else {
        let path: Vec<String> = trace.visited.iter().map(|n| format!("N{n}")).collect();
        let how = match trace.status {
            WalkStatus::Decided => "reached a Dnode",
            WalkStatus::StoppedEarly => "stopped early",
        };
        println!("visited {}", path.join(" -> "));
        println!("decision: {} ({how})", trace.decisions.join(", "));
    }
    Ok(true)
}

fn cmd_oracle(command: OracleCommand) -> Result<bool> {
    match command {
        OracleCommand::PolicyEu { model, json } => {
            let m = load_model(&model)?;
            let eu = oracle::optimal_policy_eu(&m)?;
            if json {
                print_json(&json!({ "optimal_policy_eu": eu }));
            } else {
                println!("{eu}");
            }
            Ok(true)
        }
        OracleCommand::OptimalDtree {
            model,
            max_enodes,
            output,
            json,
        } => {
            let m = load_model(&model)?;
            let (t, eu) = oracle::optimal_dtree(&m, max_enodes)?;
            let doc = TreeDocument::from_tree(&t).to_json();
            if let Some(p) = &output {
                write_out(Some(p), &doc)?;
            }
            if json {
                print_json(&json!({ "eu": eu, "enodes": t.enode_count(), "tree": output }));
            } else {
                println!("optimal EU = {eu} with {} Enodes", t.enode_count());
                if output.is_none() {
                    print!("{doc}");
                }
            }
            Ok(true)
        }
        OracleCommand::Property3 {
            model,
            tree,
            budget,
            json,
        } => {
            let m = load_model(&model)?;
            let t = match &tree {
                Some(p) => load_tree(p)?,
                None => DTree::single(&Inference::new(&m))?,
            };
            if t.fingerprint() != m.fingerprint() {
                bail!("tree was compiled from a different model");
            }
            let r = oracle::verify_property3(&m, &t, budget)?;
            if json {
                print_json(&serde_json::to_value(&r)?);
            } else {
                println!("{:?}", r.verdict);
                match r.verdict {
                    Verdict::Skipped => {
                        for w in &r.witnesses {
                            let names: Vec<String> = w
                                .inserted
                                .iter()
                                .map(|&(i, v)| format!("{}={}", t.labels().items[i].name, t.labels().items[i].values[v]))
                                .collect();
                            println!(
                                "  not E-descending at {}: inserting {{{}}} raises eu_expand of {} from {} to {}",
                                w.dnode,
                                names.join(", "),
                                t.labels().items[w.item].name,
                                w.before,
                                w.after
                            );
                        }
                    }
                    _ => {
                        println!(
                            "  {} optimal expansions checked; max-gain Dnodes {:?}; existential reading {}",
                            r.optimal_expansions, r.max_gain_dnodes, r.existential
                        );
                        for c in &r.counterexamples {
                            println!("  counterexample: {c}");
                        }
                    }
                }
            }
            Ok(r.verdict != Verdict::Fail)
        }
        OracleCommand::Gen {
            seed,
            items,
            hidden,
            concentration,
            output,
        } => {
            let mut spec = NetworkGenSpec::with_seed(seed);
            if let Some(n) = items {
                spec.items = (n, n);
            }
            if let Some(n) = hidden {
                spec.hidden = (n, n);
            }
            if let Some(c) = concentration {
                if c.is_nan() || c <= 0.0 {
                    bail!("concentration must be positive");
                }
                spec.concentration = c;
            }
            let d = oracle::generate_network(&spec);
            write_out(output.as_deref(), &d.to_pretty_json())?;
            Ok(true)
        }
    }
}
