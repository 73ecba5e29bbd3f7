//! State-integrated tool graph for multi-turn tool-use agents.
//!
//! The crate builds a directed experience graph from recorded tool-use
//! episodes. Nodes are tools; edges carry dependency weights mined from
//! call sequences (procedural memory) plus compact state summaries taken
//! by an on-demand summarization tool (episodic memory). A retrieval
//! engine ranks next-tool candidates off either signal, and a
//! deterministic simulator plus agent harness evaluate graph-guided
//! policies against baselines.
//!
//! Module map:
//! - [`trajectory`]: episode event model, parsing, sequence extraction
//! - [`graph`]: graph construction, weights, normalization, persistence
//! - [`summary`]: state summarization, embeddings, similarity scoring
//! - [`retrieval`]: weight-mode / state-mode suggestion ranking
//! - [`env`]: deterministic stateful environments and task synthesis
//! - [`harness`]: episode loop, rollout collection, evaluation campaigns
//! - [`gateway`]: chat-completion client with stub and mock transports

pub mod env;
pub mod gateway;
pub mod graph;
pub mod harness;
pub mod retrieval;
pub mod summary;
pub mod trajectory;

/// Reserved name of the state-summarization tool. It is recorded in
/// episodes via dedicated event kinds and never becomes a graph node.
pub const SUMMARY_TOOL: &str = "state_summary";
