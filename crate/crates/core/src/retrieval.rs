//! Next-tool suggestion ranking over the graph.
//!
//! Two retrieval paths exist: the weight path ranks a tool's successors
//! by normalized edge weight (routine execution), the state path ranks
//! them by similarity between a live state summary and the summaries
//! stored on each edge (context recall). The dispatch mode decides per
//! decision which path runs; ablation modes pin one path permanently.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, ToolGraph};
use crate::summary::{edge_state_score, StateDescriptor, SummaryError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("state path chosen but no live state descriptor supplied")]
    MissingState,
    #[error(transparent)]
    Summary(#[from] SummaryError),
}

/// Which signal produced a suggestion list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionMode {
    Weight,
    State,
}

/// One ranked candidate for the next tool call. The sentinel score
/// (negative infinity, serialized as null) marks edges that carried no
/// summaries on the state path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub tool: String,
    #[serde(
        serialize_with = "serialize_score",
        deserialize_with = "deserialize_score"
    )]
    pub score: f64,
    pub mode: SuggestionMode,
}

fn serialize_score<S: serde::Serializer>(score: &f64, s: S) -> Result<S::Ok, S::Error> {
    if score.is_finite() {
        s.serialize_f64(*score)
    } else {
        s.serialize_none()
    }
}

fn deserialize_score<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v: Option<f64> = Option::deserialize(d)?;
    Ok(v.unwrap_or(f64::NEG_INFINITY))
}

/// How suggestion dispatch behaves across an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// The agent's own recall decision picks the path per step.
    Adaptive,
    /// Always the weight path.
    WeightOnly,
    /// Always the state path; the caller summarizes every step.
    StateOnly,
    /// State path whenever any successor edge carries a summary,
    /// weight path otherwise.
    ForcedRecall,
}

impl RetrievalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RetrievalMode::Adaptive => "adaptive",
            RetrievalMode::WeightOnly => "weight_only",
            RetrievalMode::StateOnly => "state_only",
            RetrievalMode::ForcedRecall => "forced_recall",
        }
    }
}

impl std::str::FromStr for RetrievalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive" => Ok(RetrievalMode::Adaptive),
            "weight_only" => Ok(RetrievalMode::WeightOnly),
            "state_only" => Ok(RetrievalMode::StateOnly),
            "forced_recall" => Ok(RetrievalMode::ForcedRecall),
            other => Err(format!("unknown retrieval mode `{other}`")),
        }
    }
}


fn weight_score(edge: &Edge) -> f64 {
    #[cfg(test)]
    instrument::WEIGHT_READS.with(|c| c.set(c.get() + 1));
    edge.norm_weight
}

fn state_score(edge: &Edge, live: &StateDescriptor) -> Result<f64, SummaryError> {
    #[cfg(test)]
    instrument::SUMMARY_READS.with(|c| c.set(c.get() + 1));
    edge_state_score(edge, live)
}

// Score descending, then destination name ascending. Scores are never
// NaN (weights are finite, state scores are cosines or the sentinel).
fn rank(mut candidates: Vec<Suggestion>, k: usize) -> Vec<Suggestion> {
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("suggestion scores are never NaN")
            .then_with(|| a.tool.cmp(&b.tool))
    });
    candidates.truncate(k);
    candidates
}

/// Top-k successors of `last_tool` by normalized edge weight. Unknown
/// tools and tools without successors yield an empty list.
pub fn suggest_by_weight(graph: &ToolGraph, last_tool: &str, k: usize) -> Vec<Suggestion> {
    let candidates = graph
        .successors(last_tool)
        .into_iter()
        .map(|(edge, node)| Suggestion {
            tool: node.name.clone(),
            score: weight_score(edge),
            mode: SuggestionMode::Weight,
        })
        .collect();
    rank(candidates, k)
}

/// Top-k successors of `last_tool` by similarity between `live` and the
/// summaries stored on each edge. Edges without summaries rank below
/// every scored edge; if no successor edge carries any summary at all
/// the weight path answers instead (and says so via the mode).
pub fn suggest_by_state(
    graph: &ToolGraph,
    last_tool: &str,
    live: &StateDescriptor,
    k: usize,
) -> Result<Vec<Suggestion>, RetrievalError> {
    let successors = graph.successors(last_tool);
    if successors.iter().all(|(edge, _)| edge.summaries.is_empty()) {
        return Ok(suggest_by_weight(graph, last_tool, k));
    }
    let mut candidates = Vec::with_capacity(successors.len());
    for (edge, node) in successors {
        candidates.push(Suggestion {
            tool: node.name.clone(),
            score: state_score(edge, live)?,
            mode: SuggestionMode::State,
        });
    }
    Ok(rank(candidates, k))
}

/// Mode dispatch for one decision step. `last_tool` is the most recent
/// tool call, if any; a missing or unknown tool is a cold start and
/// yields no suggestions. In adaptive mode `recall_decision` carries
/// the agent's choice (absent means no recall).
pub fn suggest(
    graph: &ToolGraph,
    last_tool: Option<&str>,
    mode: RetrievalMode,
    recall_decision: Option<bool>,
    live: Option<&StateDescriptor>,
    k: usize,
) -> Result<Vec<Suggestion>, RetrievalError> {
    let Some(last) = last_tool else {
        return Ok(Vec::new());
    };
    let successors = graph.successors(last);
    if successors.is_empty() {
        return Ok(Vec::new());
    }
    let state_path = match mode {
        RetrievalMode::Adaptive => recall_decision.unwrap_or(false),
        RetrievalMode::WeightOnly => false,
        RetrievalMode::StateOnly => true,
        RetrievalMode::ForcedRecall => {
            successors.iter().any(|(edge, _)| !edge.summaries.is_empty())
        }
    };
    if state_path {
        let live = live.ok_or(RetrievalError::MissingState)?;
        suggest_by_state(graph, last, live, k)
    } else {
        Ok(suggest_by_weight(graph, last, k))
    }
}

/// Marker emitted instead of a suggestion block when the graph offers
/// nothing for the current decision.
pub const NO_GUIDANCE_MARKER: &str = "No graph guidance available; rely on the base policy.";

/// Renders suggestions as a deterministic text block for injection into
/// the agent's context, naming each candidate with its description and
/// score.
pub fn format_suggestion_block(suggestions: &[Suggestion], graph: &ToolGraph) -> String {
    if suggestions.is_empty() {
        return NO_GUIDANCE_MARKER.to_string();
    }
    let mode = match suggestions[0].mode {
        SuggestionMode::Weight => "weight",
        SuggestionMode::State => "state",
    };
    let mut block = format!("Suggested next tools from prior experience (mode: {mode}):\n");
    for (i, s) in suggestions.iter().enumerate() {
        let score = if s.score.is_finite() {
            format!("{:.6}", s.score)
        } else {
            "n/a".to_string()
        };
        let description = graph
            .node(&s.tool)
            .map(|n| n.description.as_str())
            .unwrap_or_default();
        block.push_str(&format!("  {}. {} (score {score}): {description}\n", i + 1, s.tool));
    }
    block
}
