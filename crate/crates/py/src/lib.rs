//! Python bindings. Structured payloads (suites, suggestion lists,
//! campaign reports) cross the boundary as JSON strings; the smoke test
//! under python/ shows the intended usage.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sitgraph_core::env::{parse_suite, suite_to_json, synth_task_suite, synth_training_suite};
use sitgraph_core::graph::{
    build_graph, load_graph, serialize_graph, GraphConfig, ToolGraph, ToolRegistry,
};
use sitgraph_core::harness::{
    collect_rollouts, run_campaign, suite_registry, GraphSource, OracleJudgeProvider,
    ScriptedPolicyFactory, DEFAULT_MAX_STEPS,
};
use sitgraph_core::retrieval::{suggest, RetrievalMode};
use sitgraph_core::summary::StateDescriptor;
use sitgraph_core::trajectory::{corpus_to_jsonl, parse_corpus, parse_trajectory};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<RetrievalMode> {
    mode.parse::<RetrievalMode>().map_err(value_error)
}

/// A state-integrated tool graph held in memory.
#[pyclass(name = "Graph")]
struct PyGraph {
    inner: ToolGraph,
}

#[pymethods]
impl PyGraph {
    /// Builds a graph from JSONL trajectory text (one per line).
    #[staticmethod]
    #[pyo3(signature = (corpus_jsonl, c=1.0, k=2, include_failed=false))]
    fn build(corpus_jsonl: &str, c: f64, k: usize, include_failed: bool) -> PyResult<Self> {
        let trajectories = parse_corpus(corpus_jsonl).map_err(value_error)?;
        let config =
            GraphConfig { c, k, only_successful: !include_failed, ..GraphConfig::default() };
        let inner =
            build_graph(&trajectories, &ToolRegistry::new(), config).map_err(value_error)?;
        Ok(PyGraph { inner })
    }

    /// Loads a serialized graph document, re-validating its invariants.
    #[staticmethod]
    fn load(json: &str) -> PyResult<Self> {
        Ok(PyGraph { inner: load_graph(json).map_err(value_error)? })
    }

    fn to_json(&self) -> String {
        serialize_graph(&self.inner)
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn summary_count(&self) -> usize {
        self.inner.summary_count()
    }

    /// Adds one judged-successful trajectory (JSON document) in place.
    fn add_trajectory(&mut self, trajectory_json: &str) -> PyResult<()> {
        let trajectory = parse_trajectory(trajectory_json).map_err(value_error)?;
        self.inner
            .add_trajectory(&trajectory, &ToolRegistry::new())
            .map_err(value_error)
    }

    /// Ranked next-tool suggestions as a JSON list. Passing `state`
    /// text selects the episodic path in adaptive mode.
    #[pyo3(signature = (last_tool, k=None, mode="adaptive", state=None))]
    fn suggest(
        &self,
        last_tool: &str,
        k: Option<usize>,
        mode: &str,
        state: Option<&str>,
    ) -> PyResult<String> {
        let mode = parse_mode(mode)?;
        let k = k.unwrap_or(self.inner.config.k);
        let live = match state {
            Some(text) => {
                let embedder = self.inner.config.embedder.build();
                Some(StateDescriptor::from_text(text, embedder.as_ref()).map_err(value_error)?)
            }
            None => None,
        };
        let suggestions =
            suggest(&self.inner, Some(last_tool), mode, Some(live.is_some()), live.as_ref(), k)
                .map_err(value_error)?;
        serde_json::to_string(&suggestions).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={}, summaries={})",
            self.inner.node_count(),
            self.inner.edge_count(),
            self.inner.summary_count()
        )
    }
}

/// Parses and validates one trajectory document; returns it normalized.
#[pyfunction]
fn parse_trajectory_json(raw: &str) -> PyResult<String> {
    Ok(parse_trajectory(raw).map_err(value_error)?.to_json())
}

/// Positional process accuracy against an ideal call sequence.
#[pyfunction]
fn process_accuracy(actual: Vec<String>, ideal: Vec<String>) -> PyResult<f64> {
    sitgraph_core::env::process_accuracy(&actual, &ideal).map_err(value_error)
}

/// Synthesizes a task suite ("test" or "training" flavor) as JSON.
#[pyfunction]
#[pyo3(signature = (seed, n_tasks=50, flavor="test"))]
fn synth_suite(seed: u64, n_tasks: usize, flavor: &str) -> PyResult<String> {
    let tasks = match flavor {
        "test" => synth_task_suite(seed, n_tasks),
        "training" => synth_training_suite(seed),
        other => return Err(value_error(format!("unknown flavor `{other}`"))),
    };
    Ok(suite_to_json(&tasks))
}

/// Runs graph-free rollouts with the scripted base policy; returns a
/// JSONL corpus.
#[pyfunction]
#[pyo3(signature = (suite_json, runs_per_task=1, max_steps=80))]
fn rollout(suite_json: &str, runs_per_task: usize, max_steps: usize) -> PyResult<String> {
    let tasks = parse_suite(suite_json).map_err(value_error)?;
    let corpus = collect_rollouts(&tasks, &ScriptedPolicyFactory, runs_per_task, max_steps)
        .map_err(value_error)?;
    Ok(corpus_to_jsonl(&corpus))
}

/// Runs an evaluation campaign with the scripted policy. Returns
/// `(report_json, grown_graph_json_or_None)`; the second element is
/// populated by online campaigns.
#[pyfunction]
#[pyo3(signature = (suite_json, mode="adaptive", graph=None, online=false, seed=0, max_steps=DEFAULT_MAX_STEPS))]
fn run_eval(
    suite_json: &str,
    mode: &str,
    graph: Option<&PyGraph>,
    online: bool,
    seed: u64,
    max_steps: usize,
) -> PyResult<(String, Option<String>)> {
    let tasks = parse_suite(suite_json).map_err(value_error)?;
    let mode = parse_mode(mode)?;
    let source = if online {
        GraphSource::Online { config: GraphConfig::default(), initial: None }
    } else if let Some(g) = graph {
        GraphSource::Prebuilt(g.inner.clone())
    } else {
        GraphSource::None
    };
    let outcome = run_campaign(
        "python",
        &tasks,
        &ScriptedPolicyFactory,
        source,
        mode,
        seed,
        Some(&OracleJudgeProvider),
        max_steps,
    )
    .map_err(value_error)?;
    Ok((outcome.report.to_json(), outcome.graph.as_ref().map(serialize_graph)))
}

/// Tool-name-to-description registry harvested from a suite, as JSON.
#[pyfunction]
fn registry_from_suite(suite_json: &str) -> PyResult<String> {
    let tasks = parse_suite(suite_json).map_err(value_error)?;
    serde_json::to_string(&suite_registry(&tasks)).map_err(value_error)
}

#[pymodule]
fn sitgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(parse_trajectory_json, m)?)?;
    m.add_function(wrap_pyfunction!(process_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(synth_suite, m)?)?;
    m.add_function(wrap_pyfunction!(rollout, m)?)?;
    m.add_function(wrap_pyfunction!(run_eval, m)?)?;
    m.add_function(wrap_pyfunction!(registry_from_suite, m)?)?;
    Ok(())
}
