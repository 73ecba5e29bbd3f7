//! Episode loop and evaluation campaigns.
//!
//! One episode is a partially observable loop: the agent sees the event
//! history, optionally receives graph suggestions keyed to its last
//! tool call, and picks an action; the environment answers with
//! observations and scripted user turns. Campaigns run a suite of
//! episodes with or without graph guidance, or grow the graph online
//! from judged-successful episodes.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::env::{self, EnvError, Task};
use crate::gateway::{llm_judge, ChatApi, ChatMessage, ChatRequest, ProviderError};
use crate::graph::{GraphConfig, GraphError, ToolGraph, ToolRegistry};
use crate::retrieval::{
    format_suggestion_block, suggest, RetrievalError, RetrievalMode, Suggestion, SuggestionMode,
};
use crate::summary::{
    extract_facts, summarize_state, tokenize, Embedder, StateDescriptor, SummaryError,
    SummaryProvider, TemplateSummarizer,
};
use crate::trajectory::{Event, EventKind, Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// What the agent does at one decision step.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Respond(String),
    CallTool(String, Map<String, Value>),
    Summarize,
    Stop,
}

/// A decision maker. `decide` must be deterministic for scripted
/// policies; `wants_recall` lets a policy own the recall decision in
/// adaptive mode (None abstains, delegating to the built-in heuristic).
pub trait AgentPolicy: Send + Sync {
    fn decide(
        &self,
        history: &[Event],
        suggestions: &[Suggestion],
        tools: &[env::ToolSpec],
    ) -> Action;

    fn wants_recall(&self, _history: &[Event]) -> Option<bool> {
        None
    }
}

/// Builds a policy instance for one task; scripted policies read their
/// per-task route here.
pub trait PolicyFactory: Send + Sync {
    fn build(&self, task: &Task) -> Box<dyn AgentPolicy>;
}

/// True when the most recent tool result introduced a fact whose tokens
/// never appeared anywhere else in the dialogue: fresh information the
/// agent has not yet consolidated. Pure function of the history.
pub fn heuristic_recall_policy(history: &[Event]) -> bool {
    let Some(pos) = history.iter().rposition(|e| e.kind == EventKind::ToolResult) else {
        return false;
    };
    let facts = extract_facts(&history[pos].content);
    if facts.is_empty() {
        return false;
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (i, ev) in history.iter().enumerate() {
        if i != pos {
            seen.extend(tokenize(&ev.content));
        }
    }
    facts
        .iter()
        .any(|fact| tokenize(fact).iter().any(|token| !seen.contains(token)))
}

/// The deterministic built-in policy: competent but myopic. It follows
/// the top applicable graph suggestion when one exists; otherwise it
/// works through its habitual route as long as the episode still
/// matches that plan, and wraps up once the plan is spent or abandoned.
pub struct ScriptedPolicy {
    route: Vec<String>,
}

impl ScriptedPolicy {
    pub fn new(route: Vec<String>) -> Self {
        ScriptedPolicy { route }
    }

    // Position in the route, or None once the actual call sequence has
    // diverged from it (e.g. because suggestions took over).
    fn route_position(&self, history: &[Event]) -> Option<usize> {
        let calls: Vec<&str> = history
            .iter()
            .filter(|e| e.kind == EventKind::ToolCall)
            .map(|e| e.tool_name.as_deref().unwrap_or_default())
            .collect();
        if calls.len() > self.route.len() {
            return None;
        }
        if calls.iter().zip(&self.route).any(|(a, b)| *a != b.as_str()) {
            return None;
        }
        Some(calls.len())
    }
}

impl AgentPolicy for ScriptedPolicy {
    fn decide(
        &self,
        history: &[Event],
        suggestions: &[Suggestion],
        tools: &[env::ToolSpec],
    ) -> Action {
        for suggestion in suggestions {
            if tools.iter().any(|t| t.name == suggestion.tool) {
                return Action::CallTool(suggestion.tool.clone(), Map::new());
            }
        }
        match self.route_position(history) {
            Some(pos) if pos < self.route.len() => {
                Action::CallTool(self.route[pos].clone(), Map::new())
            }
            _ => Action::Respond("I have completed the request.".to_string()),
        }
    }
}

pub struct ScriptedPolicyFactory;

impl PolicyFactory for ScriptedPolicyFactory {
    fn build(&self, task: &Task) -> Box<dyn AgentPolicy> {
        Box::new(ScriptedPolicy::new(task.base_route.clone()))
    }
}

/// Chat-backed policy for live runs. The model answers with a single
/// action line: `CALL <tool> <json args>`, `SAY <text>`, `SUMMARIZE`,
/// or `STOP`; anything unparseable becomes a user-facing reply.
pub struct LlmPolicy {
    api: Arc<dyn ChatApi>,
    model: String,
}

impl LlmPolicy {
    pub fn new(api: Arc<dyn ChatApi>, model: impl Into<String>) -> Self {
        LlmPolicy { api, model: model.into() }
    }

    fn render(history: &[Event], suggestions_block: &str, tools: &[env::ToolSpec]) -> Vec<ChatMessage> {
        let mut tool_lines = String::new();
        for t in tools {
            tool_lines.push_str(&format!("- {}: {}\n", t.name, t.description));
        }
        let system = format!(
            "You are a tool-using assistant. Available tools:\n{tool_lines}\n{suggestions_block}\n\
             Reply with exactly one line: CALL <tool> <json args>, SAY <text>, SUMMARIZE, or STOP."
        );
        let mut transcript = String::new();
        for ev in history {
            let line = match ev.kind {
                EventKind::UserMsg => format!("user: {}", ev.content),
                EventKind::AgentMsg => format!("agent: {}", ev.content),
                EventKind::ToolCall => {
                    format!("call: {}", ev.tool_name.as_deref().unwrap_or("?"))
                }
                EventKind::ToolResult => format!(
                    "result[{}]: {}",
                    ev.tool_name.as_deref().unwrap_or("?"),
                    ev.content
                ),
                EventKind::SummaryCall => "summary requested".to_string(),
                EventKind::SummaryResult => format!("summary: {}", ev.content),
            };
            transcript.push_str(&line);
            transcript.push('\n');
        }
        vec![ChatMessage::system(system), ChatMessage::user(transcript)]
    }

    pub fn parse_action(content: &str) -> Action {
        let line = content.trim();
        if line == "STOP" {
            return Action::Stop;
        }
        if line == "SUMMARIZE" {
            return Action::Summarize;
        }
        if let Some(rest) = line.strip_prefix("SAY ") {
            return Action::Respond(rest.trim().to_string());
        }
        if let Some(rest) = line.strip_prefix("CALL ") {
            let rest = rest.trim();
            let (tool, args_text) = match rest.split_once(' ') {
                Some((tool, args)) => (tool, args.trim()),
                None => (rest, ""),
            };
            let args = if args_text.is_empty() {
                Map::new()
            } else {
                serde_json::from_str::<Map<String, Value>>(args_text).unwrap_or_default()
            };
            return Action::CallTool(tool.to_string(), args);
        }
        Action::Respond(line.to_string())
    }
}

impl AgentPolicy for LlmPolicy {
    fn decide(
        &self,
        history: &[Event],
        suggestions: &[Suggestion],
        tools: &[env::ToolSpec],
    ) -> Action {
        // The block is rendered without a graph handle: tool
        // descriptions already sit in the system prompt.
        let block = if suggestions.is_empty() {
            crate::retrieval::NO_GUIDANCE_MARKER.to_string()
        } else {
            let names: Vec<String> = suggestions
                .iter()
                .map(|s| {
                    if s.score.is_finite() {
                        format!("{} (score {:.6})", s.tool, s.score)
                    } else {
                        format!("{} (score n/a)", s.tool)
                    }
                })
                .collect();
            format!("Suggested next tools from prior experience: {}", names.join(", "))
        };
        let request = ChatRequest::new(&self.model, Self::render(history, &block, tools));
        match self.api.chat(&request) {
            Ok(response) => Self::parse_action(&response.content),
            Err(e) => Action::Respond(format!("(provider unavailable: {e})")),
        }
    }
}

pub struct LlmPolicyFactory {
    pub api: Arc<dyn ChatApi>,
    pub model: String,
}

impl PolicyFactory for LlmPolicyFactory {
    fn build(&self, _task: &Task) -> Box<dyn AgentPolicy> {
        Box::new(LlmPolicy::new(Arc::clone(&self.api), self.model.clone()))
    }
}

/// Success estimator for online updates.
pub trait Judge {
    fn judge(&self, trajectory: &Trajectory) -> Result<bool, HarnessError>;
}

pub trait JudgeProvider: Send + Sync {
    fn for_task<'a>(&'a self, task: &'a Task) -> Box<dyn Judge + 'a>;
}

/// Ground-truth judge: replays the trajectory's tool calls against the
/// task's initial world and evaluates the goal, exactly like the
/// environment does.
pub struct OracleJudgeProvider;

struct OracleJudge<'a> {
    task: &'a Task,
}

impl Judge for OracleJudge<'_> {
    fn judge(&self, trajectory: &Trajectory) -> Result<bool, HarnessError> {
        let mut db = env::WorldState { db: self.task.initial_db.clone() };
        for ev in &trajectory.events {
            if ev.kind == EventKind::ToolCall {
                let name = ev.tool_name.as_deref().unwrap_or_default();
                if let Some(tool) = self.task.tool(name) {
                    let args = ev.args.clone().unwrap_or_default();
                    let mut scratch = env::WorldState { db: db.db.clone() };
                    tool_execute(tool, &args, &mut scratch);
                    db = scratch;
                }
            }
        }
        Ok(env::evaluate(&db, &trajectory.events, &self.task.goal) == 1)
    }
}

// Re-runs a tool behavior outside an EnvHandle (judge-side replay).
fn tool_execute(tool: &env::ToolSpec, args: &Map<String, Value>, db: &mut env::WorldState) {
    // Route through a throwaway task/handle so the semantics cannot
    // drift from the environment's own execution.
    let task = Task {
        id: "replay".into(),
        initial_db: db.db.clone(),
        tools: vec![tool.clone()],
        user: env::ScriptedUser { opening: String::new(), rules: vec![] },
        goal: env::GoalSpec::FinalStateMatch { expected: Default::default() },
        ideal_call_sequence: None,
        base_route: vec![],
    };
    if let Ok((mut handle, _)) = env::reset(&task) {
        handle.apply_tool(&tool.name, args);
        *db = handle.db().clone();
    }
}

impl JudgeProvider for OracleJudgeProvider {
    fn for_task<'a>(&'a self, task: &'a Task) -> Box<dyn Judge + 'a> {
        Box::new(OracleJudge { task })
    }
}

/// Chat-backed judge with a strict YES/NO contract.
pub struct LlmJudgeProvider {
    pub api: Arc<dyn ChatApi>,
    pub model: String,
    pub rubric: String,
}

struct LlmJudgeInstance<'a> {
    provider: &'a LlmJudgeProvider,
}

impl Judge for LlmJudgeInstance<'_> {
    fn judge(&self, trajectory: &Trajectory) -> Result<bool, HarnessError> {
        Ok(llm_judge(
            self.provider.api.as_ref(),
            &self.provider.model,
            trajectory,
            &self.provider.rubric,
        )?)
    }
}

impl JudgeProvider for LlmJudgeProvider {
    fn for_task<'a>(&'a self, _task: &'a Task) -> Box<dyn Judge + 'a> {
        Box::new(LlmJudgeInstance { provider: self })
    }
}

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub trajectory: Trajectory,
    pub reward: u8,
    pub process_acc: Option<f64>,
    pub steps: usize,
    pub mode_trace: Vec<Option<SuggestionMode>>,
}

/// Episode loop configuration shared across a campaign.
pub struct EpisodeRunner<'a> {
    pub graph: Option<&'a ToolGraph>,
    pub mode: RetrievalMode,
    pub max_steps: usize,
    pub provider: &'a dyn SummaryProvider,
}

pub const DEFAULT_MAX_STEPS: usize = 40;

impl<'a> EpisodeRunner<'a> {
    pub fn baseline(provider: &'a dyn SummaryProvider) -> Self {
        EpisodeRunner {
            graph: None,
            mode: RetrievalMode::Adaptive,
            max_steps: DEFAULT_MAX_STEPS,
            provider,
        }
    }

    pub fn with_graph(graph: &'a ToolGraph, mode: RetrievalMode, provider: &'a dyn SummaryProvider) -> Self {
        EpisodeRunner { graph: Some(graph), mode, max_steps: DEFAULT_MAX_STEPS, provider }
    }

    fn embedder(&self) -> Box<dyn Embedder> {
        match self.graph {
            Some(g) => g.config.embedder.build(),
            None => crate::summary::EmbedderConfig::default().build(),
        }
    }

    /// Runs one episode to termination: user done-marker, policy stop,
    /// or the step cap (recorded as reward 0).
    pub fn run(
        &self,
        episode_id: &str,
        task: &Task,
        policy: &dyn AgentPolicy,
    ) -> Result<EpisodeRecord, HarnessError> {
        let embedder = self.embedder();
        let (mut env, _opening) = env::reset(task)?;
        let mut steps = 0usize;
        let mut mode_trace: Vec<Option<SuggestionMode>> = Vec::new();
        // Live descriptor produced by a policy-initiated Summarize,
        // consumed by the next suggestion pass.
        let mut pending_live: Option<StateDescriptor> = None;

        let reward = 'episode: loop {
            let last_tool = env
                .events()
                .iter()
                .rev()
                .find(|e| e.kind == EventKind::ToolCall)
                .and_then(|e| e.tool_name.clone());

            let want_state = match self.mode {
                RetrievalMode::Adaptive => {
                    pending_live.is_some()
                        || policy
                            .wants_recall(env.events())
                            .unwrap_or_else(|| heuristic_recall_policy(env.events()))
                }
                RetrievalMode::WeightOnly => false,
                RetrievalMode::StateOnly => last_tool.is_some(),
                RetrievalMode::ForcedRecall => match (&self.graph, &last_tool) {
                    (Some(g), Some(t)) => {
                        g.successors(t).iter().any(|(e, _)| !e.summaries.is_empty())
                    }
                    _ => false,
                },
            };

            let live: Option<StateDescriptor> = if want_state {
                match pending_live.take() {
                    Some(d) => Some(d),
                    None => {
                        if steps >= self.max_steps {
                            break 'episode 0;
                        }
                        let descriptor =
                            summarize_state(env.events(), self.provider, embedder.as_ref())?;
                        env.record_summary(&descriptor.text);
                        steps += 1;
                        Some(descriptor)
                    }
                }
            } else {
                pending_live = None;
                None
            };

            let suggestions: Vec<Suggestion> = match self.graph {
                Some(g) => suggest(
                    g,
                    last_tool.as_deref(),
                    self.mode,
                    Some(want_state),
                    live.as_ref(),
                    g.config.k,
                )?,
                None => Vec::new(),
            };
            mode_trace.push(suggestions.first().map(|s| s.mode));

            if steps >= self.max_steps {
                break 'episode 0;
            }
            match policy.decide(env.events(), &suggestions, &task.tools) {
                Action::CallTool(name, args) => {
                    env.apply_tool(&name, &args);
                    steps += 1;
                }
                Action::Respond(text) => {
                    env.post_user_turn(&text);
                    steps += 1;
                    if env.is_done() {
                        break 'episode env.evaluate_goal();
                    }
                }
                Action::Summarize => {
                    let descriptor =
                        summarize_state(env.events(), self.provider, embedder.as_ref())?;
                    env.record_summary(&descriptor.text);
                    steps += 1;
                    pending_live = Some(descriptor);
                }
                Action::Stop => {
                    env.record_agent_msg("(session ended)");
                    steps += 1;
                    break 'episode env.evaluate_goal();
                }
            }
        };

        let events = env.events().to_vec();
        let actual_calls: Vec<String> = events
            .iter()
            .filter(|e| e.kind == EventKind::ToolCall)
            .filter_map(|e| e.tool_name.clone())
            .collect();
        let process_acc = match &task.ideal_call_sequence {
            Some(ideal) => Some(env::process_accuracy(&actual_calls, ideal)?),
            None => None,
        };
        let trajectory = Trajectory::new(episode_id, reward == 1, events)?;
        debug_assert_eq!(steps, trajectory.turn_count);
        Ok(EpisodeRecord { trajectory, reward, process_acc, steps, mode_trace })
    }
}

/// Rollout collection: episodes without graph guidance, summarization
/// driven by the recall heuristic, each trajectory tagged with its
/// earned reward as the success flag. Failures are returned too; graph
/// construction filters them.
pub fn collect_rollouts(
    tasks: &[Task],
    factory: &dyn PolicyFactory,
    runs_per_task: usize,
    max_steps: usize,
) -> Result<Vec<Trajectory>, HarnessError> {
    collect_rollouts_with(tasks, factory, runs_per_task, max_steps, &TemplateSummarizer)
}

/// Rollout collection with an explicit summary provider (live runs).
pub fn collect_rollouts_with(
    tasks: &[Task],
    factory: &dyn PolicyFactory,
    runs_per_task: usize,
    max_steps: usize,
    provider: &dyn SummaryProvider,
) -> Result<Vec<Trajectory>, HarnessError> {
    let runner = EpisodeRunner { max_steps, ..EpisodeRunner::baseline(provider) };
    let mut out = Vec::with_capacity(tasks.len() * runs_per_task);
    for task in tasks {
        let policy = factory.build(task);
        for run in 0..runs_per_task {
            let record = runner.run(&format!("{}-r{run}", task.id), task, policy.as_ref())?;
            out.push(record.trajectory);
        }
    }
    Ok(out)
}

/// Where a campaign's graph comes from.
pub enum GraphSource {
    /// No guidance: the baseline.
    None,
    /// A fixed graph, read-only across the whole campaign.
    Prebuilt(ToolGraph),
    /// Start from `initial` (or empty) and grow after each episode the
    /// judge accepts. Episodes run sequentially: single writer.
    Online { config: GraphConfig, initial: Option<ToolGraph> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub id: String,
    pub reward: u8,
    pub process_acc: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub weight: u64,
    pub state: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub suite: String,
    pub mode: String,
    pub accuracy: f64,
    pub process_accuracy: f64,
    pub mean_steps: f64,
    pub per_task: Vec<TaskReport>,
    pub mode_counts: ModeCounts,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

pub struct CampaignOutcome {
    pub report: CampaignReport,
    /// Final graph of an online campaign.
    pub graph: Option<ToolGraph>,
}

fn summarize_records(
    suite_name: &str,
    mode_label: &str,
    records: &[EpisodeRecord],
) -> CampaignReport {
    let n = records.len().max(1) as f64;
    let accuracy = records.iter().map(|r| r.reward as f64).sum::<f64>() / n;
    let with_pa: Vec<f64> = records.iter().filter_map(|r| r.process_acc).collect();
    let process_accuracy = if with_pa.is_empty() {
        0.0
    } else {
        with_pa.iter().sum::<f64>() / with_pa.len() as f64
    };
    let mean_steps = records.iter().map(|r| r.steps as f64).sum::<f64>() / n;
    let mut mode_counts = ModeCounts::default();
    for record in records {
        for used in record.mode_trace.iter().flatten() {
            match used {
                SuggestionMode::Weight => mode_counts.weight += 1,
                SuggestionMode::State => mode_counts.state += 1,
            }
        }
    }
    CampaignReport {
        suite: suite_name.to_string(),
        mode: mode_label.to_string(),
        accuracy,
        process_accuracy,
        mean_steps,
        per_task: records
            .iter()
            .map(|r| TaskReport {
                id: r.trajectory.id.clone(),
                reward: r.reward,
                process_acc: r.process_acc,
                steps: r.steps,
            })
            .collect(),
        mode_counts,
    }
}

/// Tool registry harvested from a suite's tool descriptions.
pub fn suite_registry(tasks: &[Task]) -> ToolRegistry {
    let mut registry = ToolRegistry::new();
    for task in tasks {
        for tool in &task.tools {
            registry.entry(tool.name.clone()).or_insert_with(|| tool.description.clone());
        }
    }
    registry
}

/// Runs a full evaluation campaign over a suite. Baseline and prebuilt
/// campaigns run episodes in parallel over an immutable graph snapshot;
/// online campaigns are strictly sequential and return the grown graph.
/// The seed is recorded for reproducibility bookkeeping; the
/// deterministic stack does not consume randomness.
#[allow(clippy::too_many_arguments)]
pub fn run_campaign(
    suite_name: &str,
    tasks: &[Task],
    factory: &dyn PolicyFactory,
    source: GraphSource,
    mode: RetrievalMode,
    seed: u64,
    judge: Option<&dyn JudgeProvider>,
    max_steps: usize,
) -> Result<CampaignOutcome, HarnessError> {
    run_campaign_with(
        suite_name,
        tasks,
        factory,
        source,
        mode,
        seed,
        judge,
        max_steps,
        &TemplateSummarizer,
    )
}

/// Campaign runner with an explicit summary provider (live runs).
#[allow(clippy::too_many_arguments)]
pub fn run_campaign_with(
    suite_name: &str,
    tasks: &[Task],
    factory: &dyn PolicyFactory,
    source: GraphSource,
    mode: RetrievalMode,
    _seed: u64,
    judge: Option<&dyn JudgeProvider>,
    max_steps: usize,
    provider: &dyn SummaryProvider,
) -> Result<CampaignOutcome, HarnessError> {
    match source {
        GraphSource::None => {
            let runner = EpisodeRunner { max_steps, ..EpisodeRunner::baseline(provider) };
            let records: Result<Vec<EpisodeRecord>, HarnessError> = tasks
                .par_iter()
                .map(|task| {
                    let policy = factory.build(task);
                    runner.run(&task.id, task, policy.as_ref())
                })
                .collect();
            let report = summarize_records(suite_name, "baseline", &records?);
            Ok(CampaignOutcome { report, graph: None })
        }
        GraphSource::Prebuilt(graph) => {
            let runner = EpisodeRunner {
                max_steps,
                ..EpisodeRunner::with_graph(&graph, mode, provider)
            };
            let records: Result<Vec<EpisodeRecord>, HarnessError> = tasks
                .par_iter()
                .map(|task| {
                    let policy = factory.build(task);
                    runner.run(&task.id, task, policy.as_ref())
                })
                .collect();
            let label = format!("prebuilt:{}", mode.as_str());
            let report = summarize_records(suite_name, &label, &records?);
            Ok(CampaignOutcome { report, graph: None })
        }
        GraphSource::Online { config, initial } => {
            let judge = judge.unwrap_or(&OracleJudgeProvider);
            let registry = suite_registry(tasks);
            let mut graph = match initial {
                Some(g) => g,
                None => ToolGraph::empty(config)?,
            };
            let mut records = Vec::with_capacity(tasks.len());
            for task in tasks {
                let policy = factory.build(task);
                let record = {
                    let runner = EpisodeRunner {
                        max_steps,
                        ..EpisodeRunner::with_graph(&graph, mode, provider)
                    };
                    runner.run(&task.id, task, policy.as_ref())?
                };
                let accepted = judge.for_task(task).judge(&record.trajectory)?;
                if accepted {
                    let mut trajectory = record.trajectory.clone();
                    trajectory.success = true;
                    match graph.add_trajectory(&trajectory, &registry) {
                        Ok(()) | Err(GraphError::RejectedTrajectory(..)) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
                records.push(record);
            }
            let label = format!("online:{}", mode.as_str());
            let report = summarize_records(suite_name, &label, &records);
            Ok(CampaignOutcome { report, graph: Some(graph) })
        }
    }
}

/// Convenience wrapper rendering suggestions for prompt injection.
pub fn suggestion_block(graph: &ToolGraph, suggestions: &[Suggestion]) -> String {
    format_suggestion_block(suggestions, graph)
}
