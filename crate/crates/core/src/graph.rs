//! The experience graph: tools as nodes, observed call transitions as
//! directed edges. Each edge keeps the transition's support count, an
//! efficiency accumulator over the trajectories that produced it, the
//! raw weight `support + c * efficiency_sum`, the locally normalized
//! weight, and the list of state summaries captured on that transition.
//!
//! Construction works in batch over a corpus or incrementally one
//! trajectory at a time; both routes produce the same graph for the
//! same multiset of trajectories.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summary::{Embedder, EmbedderConfig, StateDescriptor, SummaryError};
use crate::trajectory::{count_decision_turns, extract_tool_sequence, Trajectory, TrajectoryError};
use crate::SUMMARY_TOOL;

/// Tolerance for per-node normalized weight sums.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("empty corpus: no usable trajectory")]
    EmptyCorpus,
    #[error("rejected trajectory `{0}`: {1}")]
    RejectedTrajectory(String, String),
    #[error("trajectory `{0}` has no events")]
    EmptyTrajectory(String),
    #[error("degenerate node `{0}`: all outgoing raw weights are zero")]
    DegenerateNode(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
}

/// A tool known to the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolNode {
    pub name: String,
    pub description: String,
}

/// A directed transition between two tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    /// Number of times the transition was observed (every occurrence).
    pub support: u64,
    /// Sum of 1/turns over the trajectories containing the transition,
    /// one term per trajectory.
    pub efficiency_sum: f64,
    pub raw_weight: f64,
    pub norm_weight: f64,
    pub summaries: Vec<StateDescriptor>,
}

impl Edge {
    fn new(src: &str, dst: &str) -> Self {
        Edge {
            src: src.to_string(),
            dst: dst.to_string(),
            support: 0,
            efficiency_sum: 0.0,
            raw_weight: 0.0,
            norm_weight: 0.0,
            summaries: Vec::new(),
        }
    }

    #[cfg(test)]
    pub(crate) fn with_summaries(src: &str, dst: &str, summaries: Vec<StateDescriptor>) -> Self {
        let mut e = Edge::new(src, dst);
        e.summaries = summaries;
        e
    }
}

/// Construction and retrieval parameters, persisted with the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Relative weight of the efficiency term. Zero disables it.
    pub c: f64,
    /// Suggestion count for retrieval.
    pub k: usize,
    /// Use only trajectories marked successful.
    pub only_successful: bool,
    #[serde(default)]
    pub embedder: EmbedderConfig,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { c: 1.0, k: 2, only_successful: true, embedder: EmbedderConfig::default() }
    }
}

impl GraphConfig {
    fn validate(&self) -> Result<(), GraphError> {
        if !self.c.is_finite() || self.c < 0.0 {
            return Err(GraphError::Domain(format!("c must be finite and >= 0, got {}", self.c)));
        }
        if self.k < 1 {
            return Err(GraphError::Domain("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Tool name to description, consulted when a trajectory introduces a
/// node the graph has not seen.
pub type ToolRegistry = BTreeMap<String, String>;

/// The state-integrated tool graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolGraph {
    nodes: BTreeMap<String, ToolNode>,
    edges: BTreeMap<(String, String), Edge>,
    pub config: GraphConfig,
}

/// Raw edge weight: `support + c * sum(1/turns)`. The reciprocal turn
/// counts reward transitions observed in shorter successful episodes.
pub fn raw_weight(support: u64, trajectory_turn_counts: &[usize], c: f64) -> Result<f64, GraphError> {
    if !c.is_finite() || c < 0.0 {
        return Err(GraphError::Domain(format!("c must be finite and >= 0, got {c}")));
    }
    let mut efficiency = 0.0f64;
    for &n in trajectory_turn_counts {
        if n < 1 {
            return Err(GraphError::Domain("turn count must be >= 1".into()));
        }
        efficiency += 1.0 / n as f64;
    }
    Ok(support as f64 + c * efficiency)
}

impl ToolGraph {
    pub fn empty(config: GraphConfig) -> Result<Self, GraphError> {
        config.validate()?;
        Ok(ToolGraph { nodes: BTreeMap::new(), edges: BTreeMap::new(), config })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn summary_count(&self) -> usize {
        self.edges.values().map(|e| e.summaries.len()).sum()
    }

    pub fn node(&self, name: &str) -> Option<&ToolNode> {
        self.nodes.get(name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ToolNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edge(&self, src: &str, dst: &str) -> Option<&Edge> {
        self.edges.get(&(src.to_string(), dst.to_string()))
    }

    /// Outgoing edges of `tool` with their destination nodes, in
    /// destination-name order. Unknown tools yield an empty list: a
    /// cold start, not an error.
    pub fn successors(&self, tool: &str) -> Vec<(&Edge, &ToolNode)> {
        self.edges
            .range((tool.to_string(), String::new())..)
            .take_while(|((src, _), _)| src == tool)
            .map(|(_, edge)| {
                let node = self.nodes.get(&edge.dst).expect("edge endpoints exist");
                (edge, node)
            })
            .collect()
    }

    /// Recomputes normalized weights on the outgoing edges of `node`.
    /// No-ops when the node is absent or has no outgoing edges.
    pub fn normalize_out_edges(&mut self, node: &str) -> Result<(), GraphError> {
        let keys: Vec<(String, String)> = self
            .edges
            .range((node.to_string(), String::new())..)
            .take_while(|((src, _), _)| src == node)
            .map(|(k, _)| k.clone())
            .collect();
        if keys.is_empty() {
            return Ok(());
        }
        let total: f64 = keys.iter().map(|k| self.edges[k].raw_weight).sum();
        if total <= 0.0 {
            return Err(GraphError::DegenerateNode(node.to_string()));
        }
        for k in keys {
            let e = self.edges.get_mut(&k).unwrap();
            e.norm_weight = e.raw_weight / total;
        }
        Ok(())
    }

    fn renormalize_all(&mut self) -> Result<(), GraphError> {
        let sources: BTreeSet<String> = self.edges.keys().map(|(src, _)| src.clone()).collect();
        for src in sources {
            self.normalize_out_edges(&src)?;
        }
        Ok(())
    }

    /// Folds one successful trajectory into the graph and renormalizes.
    /// Rejects failed trajectories under `only_successful` and
    /// trajectories with no agent decisions; the graph is unchanged in
    /// both cases.
    pub fn add_trajectory(
        &mut self,
        t: &Trajectory,
        registry: &ToolRegistry,
    ) -> Result<(), GraphError> {
        let embedder = self.config.embedder.build();
        self.add_trajectory_with_embedder(t, registry, embedder.as_ref())
    }

    pub fn add_trajectory_with_embedder(
        &mut self,
        t: &Trajectory,
        registry: &ToolRegistry,
        embedder: &dyn Embedder,
    ) -> Result<(), GraphError> {
        if t.events.is_empty() {
            return Err(GraphError::EmptyTrajectory(t.id.clone()));
        }
        if self.config.only_successful && !t.success {
            return Err(GraphError::RejectedTrajectory(t.id.clone(), "not successful".into()));
        }
        let turns = count_decision_turns(t)?;
        if turns == 0 {
            return Err(GraphError::RejectedTrajectory(t.id.clone(), "no agent decisions".into()));
        }
        self.ingest(t, turns, registry, embedder)?;
        self.renormalize_all()
    }

    fn ingest(
        &mut self,
        t: &Trajectory,
        turns: usize,
        registry: &ToolRegistry,
        embedder: &dyn Embedder,
    ) -> Result<(), GraphError> {
        let steps = extract_tool_sequence(t);
        for step in &steps {
            debug_assert_ne!(step.tool, SUMMARY_TOOL);
            self.nodes.entry(step.tool.clone()).or_insert_with(|| ToolNode {
                name: step.tool.clone(),
                description: registry.get(&step.tool).cloned().unwrap_or_default(),
            });
        }
        let mut pairs_seen: BTreeSet<(String, String)> = BTreeSet::new();
        for window in steps.windows(2) {
            let (a, b) = (&window[0], &window[1]);
            let key = (a.tool.clone(), b.tool.clone());
            let edge =
                self.edges.entry(key.clone()).or_insert_with(|| Edge::new(&a.tool, &b.tool));
            edge.support += 1;
            if let Some(text) = &a.summary_before_next {
                edge.summaries.push(StateDescriptor::from_text(text, embedder)?);
            }
            pairs_seen.insert(key);
        }
        // Efficiency accrues once per trajectory containing the pair,
        // regardless of how often the pair repeats within it.
        for key in pairs_seen {
            let edge = self.edges.get_mut(&key).unwrap();
            edge.efficiency_sum += 1.0 / turns as f64;
        }
        let touched: Vec<(String, String)> = self
            .edges
            .keys()
            .filter(|(src, _)| steps.iter().any(|s| &s.tool == src))
            .cloned()
            .collect();
        for key in touched {
            let e = self.edges.get_mut(&key).unwrap();
            e.raw_weight = e.support as f64 + self.config.c * e.efficiency_sum;
        }
        Ok(())
    }

    /// Invariant check used by load and by graph inspection. Returns a
    /// description of every violation found (empty = healthy).
    pub fn check_invariants(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let dim = self.config.embedder.dimension();
        for edge in self.edges.values() {
            let label = format!("edge ({}, {})", edge.src, edge.dst);
            if edge.support < 1 {
                violations.push(format!("{label}: support must be >= 1"));
            }
            let expect = edge.support as f64 + self.config.c * edge.efficiency_sum;
            if expect != edge.raw_weight {
                violations.push(format!(
                    "{label}: raw_weight {} != support + c*efficiency_sum = {expect}",
                    edge.raw_weight
                ));
            }
            if !(0.0..=1.0).contains(&edge.norm_weight) {
                violations.push(format!("{label}: norm_weight {} outside [0,1]", edge.norm_weight));
            }
            for (i, s) in edge.summaries.iter().enumerate() {
                if s.embedding.len() != dim {
                    violations.push(format!(
                        "{label}: summary {i} has dimension {} (configured {dim})",
                        s.embedding.len()
                    ));
                } else {
                    let norm = s.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if (norm - 1.0).abs() > 1e-6 {
                        violations.push(format!("{label}: summary {i} norm {norm} is not unit"));
                    }
                }
            }
        }
        let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
        for edge in self.edges.values() {
            *sums.entry(edge.src.as_str()).or_insert(0.0) += edge.norm_weight;
        }
        for (node, sum) in sums {
            if (sum - 1.0).abs() > NORM_TOLERANCE {
                violations.push(format!("node {node}: outgoing norm weights sum to {sum:.9}"));
            }
        }
        violations
    }
}

/// Builds a graph from a corpus. Trajectories filtered out by the
/// success flag or carrying no agent decisions are skipped; if nothing
/// is left the corpus is unusable.
pub fn build_graph(
    trajectories: &[Trajectory],
    registry: &ToolRegistry,
    config: GraphConfig,
) -> Result<ToolGraph, GraphError> {
    let embedder = config.embedder.build();
    build_graph_with_embedder(trajectories, registry, config, embedder.as_ref())
}

pub fn build_graph_with_embedder(
    trajectories: &[Trajectory],
    registry: &ToolRegistry,
    config: GraphConfig,
    embedder: &dyn Embedder,
) -> Result<ToolGraph, GraphError> {
    let mut graph = ToolGraph::empty(config)?;
    let mut used = 0usize;
    for t in trajectories {
        if t.events.is_empty() {
            return Err(GraphError::EmptyTrajectory(t.id.clone()));
        }
        if graph.config.only_successful && !t.success {
            continue;
        }
        let turns = count_decision_turns(t)?;
        if turns == 0 {
            continue;
        }
        graph.ingest(t, turns, registry, embedder)?;
        used += 1;
    }
    if used == 0 {
        return Err(GraphError::EmptyCorpus);
    }
    graph.renormalize_all()?;
    Ok(graph)
}

// ── Persistence ──────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    config: GraphConfig,
    nodes: Vec<ToolNode>,
    edges: Vec<Edge>,
}

/// Serializes the graph deterministically: nodes in name order, edges
/// in (src, dst) order.
pub fn serialize_graph(graph: &ToolGraph) -> String {
    let doc = GraphDoc {
        config: graph.config.clone(),
        nodes: graph.nodes.values().cloned().collect(),
        edges: graph.edges.values().cloned().collect(),
    };
    serde_json::to_string_pretty(&doc).expect("graph serialization is infallible")
}

/// Loads a graph document, re-validating referential integrity and the
/// stored weight invariants.
pub fn load_graph(json: &str) -> Result<ToolGraph, GraphError> {
    let doc: GraphDoc =
        serde_json::from_str(json).map_err(|e| GraphError::Schema(e.to_string()))?;
    doc.config.validate()?;
    let mut nodes = BTreeMap::new();
    for node in doc.nodes {
        if node.name.is_empty() || node.name == SUMMARY_TOOL {
            return Err(GraphError::Schema(format!("invalid node name `{}`", node.name)));
        }
        if nodes.insert(node.name.clone(), node).is_some() {
            return Err(GraphError::Schema("duplicate node".into()));
        }
    }
    let mut edges = BTreeMap::new();
    for edge in doc.edges {
        for endpoint in [&edge.src, &edge.dst] {
            if !nodes.contains_key(endpoint) {
                return Err(GraphError::Schema(format!(
                    "edge ({}, {}) references missing node `{endpoint}`",
                    edge.src, edge.dst
                )));
            }
        }
        let key = (edge.src.clone(), edge.dst.clone());
        if edges.insert(key, edge).is_some() {
            return Err(GraphError::Schema("duplicate edge".into()));
        }
    }
    let graph = ToolGraph { nodes, edges, config: doc.config };
    let violations = graph.check_invariants();
    if !violations.is_empty() {
        return Err(GraphError::InvariantViolation(violations.join("; ")));
    }
    Ok(graph)
}
