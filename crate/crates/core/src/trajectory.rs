//! Episode event model: dialogue messages, tool calls, summary-tool calls,
//! plus the extraction passes the graph builder consumes.
//!
//! Wire schema (one trajectory): `{"id": str, "success": bool, "events":
//! [{"kind": str, "content": str, "tool_name": str?, "args": object?}]}`.
//! Corpus files are `.jsonl`, one trajectory per line.

use serde::{Deserialize, Serialize};
use serde_json::Map;
use thiserror::Error;

use crate::SUMMARY_TOOL;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("empty trajectory")]
    EmptyTrajectory,
}

/// What an event is. Tool-bearing kinds carry `tool_name`; the two
/// summary kinds always refer to the reserved summarization tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    UserMsg,
    AgentMsg,
    ToolCall,
    ToolResult,
    SummaryCall,
    SummaryResult,
}

impl EventKind {
    pub fn involves_tool(self) -> bool {
        !matches!(self, EventKind::UserMsg | EventKind::AgentMsg)
    }

    /// Agent decision events: the steps the agent itself takes.
    pub fn is_decision(self) -> bool {
        matches!(
            self,
            EventKind::AgentMsg | EventKind::ToolCall | EventKind::SummaryCall
        )
    }
}

/// One entry in an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub content: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub args: Option<Map<String, serde_json::Value>>,
}

impl Event {
    pub fn user(content: impl Into<String>) -> Self {
        Event { kind: EventKind::UserMsg, content: content.into(), tool_name: None, args: None }
    }

    pub fn agent(content: impl Into<String>) -> Self {
        Event { kind: EventKind::AgentMsg, content: content.into(), tool_name: None, args: None }
    }

    pub fn tool_call(tool: impl Into<String>, args: Map<String, serde_json::Value>) -> Self {
        Event {
            kind: EventKind::ToolCall,
            content: String::new(),
            tool_name: Some(tool.into()),
            args: Some(args),
        }
    }

    pub fn tool_result(tool: impl Into<String>, content: impl Into<String>) -> Self {
        Event {
            kind: EventKind::ToolResult,
            content: content.into(),
            tool_name: Some(tool.into()),
            args: None,
        }
    }

    pub fn summary_call() -> Self {
        Event {
            kind: EventKind::SummaryCall,
            content: String::new(),
            tool_name: Some(SUMMARY_TOOL.to_string()),
            args: None,
        }
    }

    pub fn summary_result(content: impl Into<String>) -> Self {
        Event {
            kind: EventKind::SummaryResult,
            content: content.into(),
            tool_name: Some(SUMMARY_TOOL.to_string()),
            args: None,
        }
    }
}

/// A validated episode. `turn_count` is always recomputed from `events`
/// on construction, never trusted from input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub id: String,
    pub success: bool,
    pub events: Vec<Event>,
    #[serde(skip)]
    pub turn_count: usize,
}

/// One tool invocation in extraction order. When the summarization tool
/// ran between this call and the next one, the produced summary text is
/// kept here (last one wins if it ran more than once).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolStep {
    pub tool: String,
    pub summary_before_next: Option<String>,
}

impl Trajectory {
    /// Validates events and computes the turn count. The checks mirror
    /// [`parse_trajectory`] so hand-built trajectories obey the same
    /// invariants as parsed ones.
    pub fn new(
        id: impl Into<String>,
        success: bool,
        events: Vec<Event>,
    ) -> Result<Self, TrajectoryError> {
        validate_events(&events)?;
        let turn_count = count_decision_events(&events);
        Ok(Trajectory { id: id.into(), success, events, turn_count })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serialization is infallible")
    }
}

fn validate_events(events: &[Event]) -> Result<(), TrajectoryError> {
    // Pending call awaiting its result, tracked separately for regular
    // tools and the summarization tool.
    let mut pending_tool: Option<&str> = None;
    let mut pending_summary = false;

    for (idx, ev) in events.iter().enumerate() {
        match (ev.kind.involves_tool(), ev.tool_name.as_deref()) {
            (true, None) => {
                return Err(TrajectoryError::Schema(format!(
                    "event {idx}: kind requires tool_name"
                )))
            }
            (false, Some(_)) => {
                return Err(TrajectoryError::Schema(format!(
                    "event {idx}: tool_name not allowed for this kind"
                )))
            }
            _ => {}
        }
        if ev.args.is_some() && ev.kind != EventKind::ToolCall {
            return Err(TrajectoryError::Schema(format!(
                "event {idx}: args only allowed on tool_call"
            )));
        }
        match ev.kind {
            EventKind::ToolCall => {
                let name = ev.tool_name.as_deref().unwrap();
                if name == SUMMARY_TOOL {
                    return Err(TrajectoryError::Schema(format!(
                        "event {idx}: reserved tool name `{SUMMARY_TOOL}` must use summary_call"
                    )));
                }
                if let Some(prev) = pending_tool {
                    return Err(TrajectoryError::Ordering(format!(
                        "event {idx}: tool_call `{name}` before result of `{prev}`"
                    )));
                }
                pending_tool = Some(name);
            }
            EventKind::ToolResult => {
                let name = ev.tool_name.as_deref().unwrap();
                if name == SUMMARY_TOOL {
                    return Err(TrajectoryError::Schema(format!(
                        "event {idx}: reserved tool name `{SUMMARY_TOOL}` must use summary_result"
                    )));
                }
                match pending_tool {
                    Some(prev) if prev == name => pending_tool = None,
                    Some(prev) => {
                        return Err(TrajectoryError::Ordering(format!(
                            "event {idx}: tool_result `{name}` does not match pending call `{prev}`"
                        )))
                    }
                    None => {
                        return Err(TrajectoryError::Ordering(format!(
                            "event {idx}: tool_result `{name}` without preceding tool_call"
                        )))
                    }
                }
            }
            EventKind::SummaryCall => {
                let name = ev.tool_name.as_deref().unwrap();
                if name != SUMMARY_TOOL {
                    return Err(TrajectoryError::Schema(format!(
                        "event {idx}: summary_call must name `{SUMMARY_TOOL}`, got `{name}`"
                    )));
                }
                if pending_summary {
                    return Err(TrajectoryError::Ordering(format!(
                        "event {idx}: summary_call before previous summary_result"
                    )));
                }
                pending_summary = true;
            }
            EventKind::SummaryResult => {
                let name = ev.tool_name.as_deref().unwrap();
                if name != SUMMARY_TOOL {
                    return Err(TrajectoryError::Schema(format!(
                        "event {idx}: summary_result must name `{SUMMARY_TOOL}`, got `{name}`"
                    )));
                }
                if !pending_summary {
                    return Err(TrajectoryError::Ordering(format!(
                        "event {idx}: summary_result without preceding summary_call"
                    )));
                }
                pending_summary = false;
            }
            EventKind::UserMsg | EventKind::AgentMsg => {}
        }
    }
    Ok(())
}

fn count_decision_events(events: &[Event]) -> usize {
    events.iter().filter(|e| e.kind.is_decision()).count()
}

/// Parses one trajectory document, recomputing the turn count and
/// rejecting unknown kinds, schema violations, and call/result
/// ordering violations.
pub fn parse_trajectory(raw: &str) -> Result<Trajectory, TrajectoryError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Doc {
        id: String,
        success: bool,
        events: Vec<Event>,
    }
    let doc: Doc =
        serde_json::from_str(raw).map_err(|e| TrajectoryError::Schema(e.to_string()))?;
    Trajectory::new(doc.id, doc.success, doc.events)
}

/// Parses a line-delimited corpus, skipping blank lines.
pub fn parse_corpus(jsonl: &str) -> Result<Vec<Trajectory>, TrajectoryError> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(no, line)| {
            parse_trajectory(line)
                .map_err(|e| TrajectoryError::Schema(format!("line {}: {e}", no + 1)))
        })
        .collect()
}

pub fn corpus_to_jsonl(trajectories: &[Trajectory]) -> String {
    let mut out = String::new();
    for t in trajectories {
        out.push_str(&t.to_json());
        out.push('\n');
    }
    out
}

/// Tool invocations in order, excluding the summarization tool itself.
/// A summary produced strictly between call i and call i+1 is attached
/// to step i; a summary before the first call or after the last call
/// has no edge to live on and is dropped.
pub fn extract_tool_sequence(t: &Trajectory) -> Vec<ToolStep> {
    let mut steps: Vec<ToolStep> = Vec::new();
    // Summary text seen since the most recent tool call.
    let mut pending_summary: Option<String> = None;
    for ev in &t.events {
        match ev.kind {
            EventKind::ToolCall => {
                if let Some(last) = steps.last_mut() {
                    last.summary_before_next = pending_summary.take();
                } else {
                    pending_summary = None;
                }
                steps.push(ToolStep {
                    tool: ev.tool_name.clone().expect("validated tool_call has a name"),
                    summary_before_next: None,
                });
            }
            EventKind::SummaryResult if !steps.is_empty() => {
                pending_summary = Some(ev.content.clone());
            }
            _ => {}
        }
    }
    steps
}

/// Number of agent decision events (agent messages, tool calls, summary
/// calls). This is the per-trajectory turn count feeding the efficiency
/// term of edge weights; user messages and results do not count.
pub fn count_decision_turns(t: &Trajectory) -> Result<usize, TrajectoryError> {
    if t.events.is_empty() {
        return Err(TrajectoryError::EmptyTrajectory);
    }
    Ok(count_decision_events(&t.events))
}
