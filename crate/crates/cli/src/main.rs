//! Command-line surface: build graphs from trajectory corpora, query
//! next-tool suggestions, synthesize and simulate task suites, run
//! evaluation campaigns, and inspect graph files.
//!
//! Exit codes: 0 success, 2 input error, 3 empty or unusable corpus,
//! 4 invariant violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use sitgraph_core::env::{parse_suite, reset, suite_to_json, synth_task_suite, synth_training_suite};
use sitgraph_core::gateway::{
    ChatApi, ChatClient, ChatSummaryProvider, ProviderConfig, DEFAULT_JUDGE_RUBRIC,
};
use sitgraph_core::graph::{
    build_graph, load_graph, serialize_graph, GraphConfig, GraphError, ToolGraph, ToolRegistry,
};
use sitgraph_core::harness::{
    collect_rollouts, run_campaign_with, GraphSource, JudgeProvider, LlmJudgeProvider,
    LlmPolicyFactory, OracleJudgeProvider, PolicyFactory, ScriptedPolicyFactory,
    DEFAULT_MAX_STEPS,
};
use sitgraph_core::summary::{SummaryProvider, TemplateSummarizer};
use sitgraph_core::retrieval::{suggest, RetrievalMode};
use sitgraph_core::summary::StateDescriptor;
use sitgraph_core::trajectory::{corpus_to_jsonl, parse_corpus};

const EXIT_INPUT: u8 = 2;
const EXIT_EMPTY: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let code = match &e {
            GraphError::EmptyCorpus => EXIT_EMPTY,
            GraphError::InvariantViolation(_) | GraphError::DegenerateNode(_) => EXIT_INVARIANT,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(
    name = "sitgraph",
    about = "Experience graph for multi-turn tool use: construction, retrieval, and evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph from a trajectory corpus (.jsonl, one per line)
    BuildGraph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Efficiency-term weight in the raw edge weight
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Suggestion count stored in the graph config
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Also use trajectories marked unsuccessful
        #[arg(long)]
        include_failed: bool,
        /// JSON object mapping tool names to descriptions
        #[arg(long)]
        tools: Option<PathBuf>,
    },
    /// Rank next-tool suggestions from a graph file
    Suggest {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        last_tool: String,
        /// Live state summary text; implies the episodic path in
        /// adaptive mode
        #[arg(long)]
        state: Option<String>,
        #[arg(long, default_value = "adaptive")]
        mode: String,
        /// Suggestion count (defaults to the graph config)
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run an evaluation campaign over a task suite
    Eval {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value = "scripted")]
        policy: String,
        /// Prebuilt graph file (conflicts with --online)
        #[arg(long, conflicts_with = "online")]
        graph: Option<PathBuf>,
        /// Grow the graph online from judged-successful episodes
        #[arg(long)]
        online: bool,
        #[arg(long, default_value = "adaptive")]
        mode: String,
        #[arg(long)]
        seed: u64,
        /// Report path; defaults to reports/<content-hash>.json
        #[arg(long)]
        out: Option<PathBuf>,
        /// Judge for online mode: oracle or llm
        #[arg(long, default_value = "oracle")]
        judge: String,
        /// State summarizer: template (deterministic) or llm
        #[arg(long, default_value = "template")]
        summarizer: String,
        /// Where to write the grown graph after an --online campaign
        #[arg(long, requires = "online")]
        graph_out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
        /// Efficiency-term weight for --online graph growth
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Suggestion count for --online graph growth
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Dump a graph and verify its invariants (exit 4 on violation)
    Inspect {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: Option<String>,
    },
    /// Replay each task's ideal call sequence through the environment
    Simulate {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Generate a synthetic task suite
    GenSuite {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        tasks: usize,
        /// "test" (evaluation flavor) or "training" (rollout flavor)
        #[arg(long, default_value = "test")]
        flavor: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect rollout trajectories from a suite with the base policy
    Rollout {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 80)]
        max_steps: usize,
    },
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Failure::input(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn parse_mode(mode: &str) -> Result<RetrievalMode, Failure> {
    mode.parse::<RetrievalMode>().map_err(Failure::input)
}

fn cmd_build_graph(
    corpus: &Path,
    out: &Path,
    c: f64,
    k: usize,
    include_failed: bool,
    tools: Option<&Path>,
) -> Result<(), Failure> {
    let trajectories =
        parse_corpus(&read(corpus)?).map_err(|e| Failure::input(e.to_string()))?;
    let registry: ToolRegistry = match tools {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| Failure::input(format!("bad tool registry: {e}")))?,
        None => ToolRegistry::new(),
    };
    let config = GraphConfig { c, k, only_successful: !include_failed, ..GraphConfig::default() };
    let graph = build_graph(&trajectories, &registry, config)?;
    write(out, &serialize_graph(&graph))?;
    println!(
        "graph: {} nodes, {} edges, {} summaries -> {}",
        graph.node_count(),
        graph.edge_count(),
        graph.summary_count(),
        out.display()
    );
    Ok(())
}

fn cmd_suggest(
    graph_path: &Path,
    last_tool: &str,
    state: Option<&str>,
    mode: &str,
    k: Option<usize>,
) -> Result<(), Failure> {
    let graph = load_graph(&read(graph_path)?)?;
    let mode = parse_mode(mode)?;
    let k = k.unwrap_or(graph.config.k);
    let live = match state {
        Some(text) => {
            let embedder = graph.config.embedder.build();
            Some(
                StateDescriptor::from_text(text, embedder.as_ref())
                    .map_err(|e| Failure::input(e.to_string()))?,
            )
        }
        None => None,
    };
    let recall = live.is_some();
    let suggestions = suggest(&graph, Some(last_tool), mode, Some(recall), live.as_ref(), k)
        .map_err(|e| Failure::input(e.to_string()))?;
    println!("{}", serde_json::to_string(&suggestions).expect("suggestions serialize"));
    Ok(())
}

fn build_policy_factory(name: &str) -> Result<Box<dyn PolicyFactory>, Failure> {
    match name {
        "scripted" => Ok(Box::new(ScriptedPolicyFactory)),
        "llm" => {
            let config = ProviderConfig::default();
            let model = config.model.clone();
            let api: Arc<dyn ChatApi> = Arc::new(ChatClient::new(config));
            Ok(Box::new(LlmPolicyFactory { api, model }))
        }
        other => Err(Failure::input(format!("unknown policy `{other}`"))),
    }
}

fn build_summarizer(name: &str) -> Result<Box<dyn SummaryProvider>, Failure> {
    match name {
        "template" => Ok(Box::new(TemplateSummarizer)),
        "llm" => {
            let config = ProviderConfig::default();
            let model = config.model.clone();
            let api: Arc<dyn ChatApi> = Arc::new(ChatClient::new(config));
            Ok(Box::new(ChatSummaryProvider { api, model }))
        }
        other => Err(Failure::input(format!("unknown summarizer `{other}`"))),
    }
}

fn build_judge(name: &str) -> Result<Box<dyn JudgeProvider>, Failure> {
    match name {
        "oracle" => Ok(Box::new(OracleJudgeProvider)),
        "llm" => {
            let config = ProviderConfig::default();
            let model = config.model.clone();
            let api: Arc<dyn ChatApi> = Arc::new(ChatClient::new(config));
            Ok(Box::new(LlmJudgeProvider {
                api,
                model,
                rubric: DEFAULT_JUDGE_RUBRIC.to_string(),
            }))
        }
        other => Err(Failure::input(format!("unknown judge `{other}`"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    suite_path: &Path,
    policy: &str,
    graph_path: Option<&Path>,
    online: bool,
    mode: &str,
    seed: u64,
    out: Option<&Path>,
    judge_name: &str,
    summarizer_name: &str,
    graph_out: Option<&Path>,
    max_steps: usize,
    c: f64,
    k: usize,
) -> Result<(), Failure> {
    let tasks = parse_suite(&read(suite_path)?).map_err(|e| Failure::input(e.to_string()))?;
    let mode = parse_mode(mode)?;
    let factory = build_policy_factory(policy)?;
    let judge = build_judge(judge_name)?;
    let summarizer = build_summarizer(summarizer_name)?;
    let source = if online {
        let config = GraphConfig { c, k, ..GraphConfig::default() };
        GraphSource::Online { config, initial: None }
    } else if let Some(path) = graph_path {
        GraphSource::Prebuilt(load_graph(&read(path)?)?)
    } else {
        GraphSource::None
    };
    let suite_name = suite_path.display().to_string();
    let outcome = run_campaign_with(
        &suite_name,
        &tasks,
        factory.as_ref(),
        source,
        mode,
        seed,
        Some(judge.as_ref()),
        max_steps,
        summarizer.as_ref(),
    )
    .map_err(|e| Failure::input(e.to_string()))?;
    if let (Some(path), Some(graph)) = (graph_out, &outcome.graph) {
        write(path, &serialize_graph(graph))?;
    }
    let report = outcome.report;
    let json = report.to_json();
    let path = match out {
        Some(path) => path.to_path_buf(),
        None => {
            // Content-addressed reports make campaign diffing cheap.
            let digest = Sha256::digest(json.as_bytes());
            let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
            PathBuf::from(format!("reports/{hex}.json"))
        }
    };
    write(&path, &json)?;

    println!("campaign: suite={} mode={}", report.suite, report.mode);
    println!("accuracy          {:.6}", report.accuracy);
    println!("process_accuracy  {:.6}", report.process_accuracy);
    println!("mean_steps        {:.6}", report.mean_steps);
    println!(
        "mode_counts       weight={} state={}",
        report.mode_counts.weight, report.mode_counts.state
    );
    println!("per-task:");
    for t in &report.per_task {
        let pa = t.process_acc.map(|p| format!("{p:.3}")).unwrap_or_else(|| "-".into());
        println!("  {:<24} reward {}  process {:<6} steps {}", t.id, t.reward, pa, t.steps);
    }
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_inspect(graph_path: &Path, node: Option<&str>) -> Result<(), Failure> {
    let graph = load_or_dump(graph_path)?;
    println!(
        "graph: {} nodes, {} edges, {} summaries (c={}, k={})",
        graph.node_count(),
        graph.edge_count(),
        graph.summary_count(),
        graph.config.c,
        graph.config.k
    );
    let selected: Vec<String> = match node {
        Some(name) => {
            if graph.node(name).is_none() {
                println!("node `{name}` not present");
                return Ok(());
            }
            vec![name.to_string()]
        }
        None => graph.nodes().map(|n| n.name.clone()).collect(),
    };
    for name in selected {
        let mut outgoing = graph.successors(&name);
        outgoing.sort_by(|a, b| {
            b.0.norm_weight
                .partial_cmp(&a.0.norm_weight)
                .unwrap()
                .then_with(|| a.0.dst.cmp(&b.0.dst))
        });
        let sum: f64 = outgoing.iter().map(|(e, _)| e.norm_weight).sum();
        if outgoing.is_empty() {
            println!("node {name} (terminal)");
            continue;
        }
        println!("node {name} ({} out-edges, norm sum {sum:.9})", outgoing.len());
        for (edge, _) in outgoing {
            println!(
                "  -> {:<28} norm {:.6} raw {:.6} support {} eff {:.6} summaries {}",
                edge.dst,
                edge.norm_weight,
                edge.raw_weight,
                edge.support,
                edge.efficiency_sum,
                edge.summaries.len()
            );
        }
    }
    println!("invariants: ok");
    Ok(())
}

// Inspect doubles as fsck: a file failing load-time invariant checks
// still gets a diagnostic dump of what was violated.
fn load_or_dump(graph_path: &Path) -> Result<ToolGraph, Failure> {
    match load_graph(&read(graph_path)?) {
        Ok(graph) => Ok(graph),
        Err(GraphError::InvariantViolation(details)) => Err(Failure {
            code: EXIT_INVARIANT,
            message: format!("invariant violation: {details}"),
        }),
        Err(e) => Err(e.into()),
    }
}

fn cmd_simulate(suite_path: &Path, _seed: u64) -> Result<(), Failure> {
    let tasks = parse_suite(&read(suite_path)?).map_err(|e| Failure::input(e.to_string()))?;
    let mut solved = 0usize;
    for task in &tasks {
        let Some(ideal) = &task.ideal_call_sequence else {
            println!("task {:<24} no ideal sequence, skipped", task.id);
            continue;
        };
        let (mut env, _) = reset(task).map_err(|e| Failure::input(e.to_string()))?;
        for tool in ideal {
            env.apply_tool(tool, &serde_json::Map::new());
        }
        let reward = env.evaluate_goal();
        solved += reward as usize;
        println!("task {:<24} ideal reward {} ({} calls)", task.id, reward, ideal.len());
    }
    println!("solved {solved}/{} by ideal replay", tasks.len());
    Ok(())
}

fn cmd_gen_suite(seed: u64, tasks: usize, flavor: &str, out: &Path) -> Result<(), Failure> {
    let suite = match flavor {
        "test" => synth_task_suite(seed, tasks),
        "training" => synth_training_suite(seed),
        other => return Err(Failure::input(format!("unknown flavor `{other}`"))),
    };
    write(out, &suite_to_json(&suite))?;
    println!("suite: {} tasks ({flavor}) -> {}", suite.len(), out.display());
    Ok(())
}

fn cmd_rollout(suite_path: &Path, out: &Path, runs: usize, max_steps: usize) -> Result<(), Failure> {
    let tasks = parse_suite(&read(suite_path)?).map_err(|e| Failure::input(e.to_string()))?;
    let corpus = collect_rollouts(&tasks, &ScriptedPolicyFactory, runs, max_steps)
        .map_err(|e| Failure::input(e.to_string()))?;
    let successful = corpus.iter().filter(|t| t.success).count();
    write(out, &corpus_to_jsonl(&corpus))?;
    println!(
        "rollouts: {} trajectories ({successful} successful) -> {}",
        corpus.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::BuildGraph { corpus, out, c, k, include_failed, tools } => {
            cmd_build_graph(&corpus, &out, c, k, include_failed, tools.as_deref())
        }
        Command::Suggest { graph, last_tool, state, mode, k } => {
            cmd_suggest(&graph, &last_tool, state.as_deref(), &mode, k)
        }
        Command::Eval {
            suite,
            policy,
            graph,
            online,
            mode,
            seed,
            out,
            judge,
            summarizer,
            graph_out,
            max_steps,
            c,
            k,
        } => cmd_eval(
            &suite,
            &policy,
            graph.as_deref(),
            online,
            &mode,
            seed,
            out.as_deref(),
            &judge,
            &summarizer,
            graph_out.as_deref(),
            max_steps,
            c,
            k,
        ),
        Command::Inspect { graph, node } => cmd_inspect(&graph, node.as_deref()),
        Command::Simulate { suite, seed } => cmd_simulate(&suite, seed),
        Command::GenSuite { seed, tasks, flavor, out } => {
            cmd_gen_suite(seed, tasks, &flavor, &out)
        }
        Command::Rollout { suite, out, runs, max_steps } => {
            cmd_rollout(&suite, &out, runs, max_steps)
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when stdout is a closed pipe, like other unix tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
