//! Deterministic multi-turn tool-use environments: a mutable key-value
//! world, tools defined by registered behaviors with parameter tables
//! (no embedded code), scripted users that reveal intent progressively,
//! and goal evaluation in three regimes (final-state match, assertions,
//! milestones).
//!
//! Tool errors are observations the agent can read and recover from,
//! never harness failures.

mod synth;

pub use synth::{synth_task_suite, synth_training_suite};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::trajectory::{Event, EventKind};
use crate::SUMMARY_TOOL;

/// Terminal utterance of every scripted user.
pub const DONE_MARKER: &str = "###DONE###";

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid task `{0}`: {1}")]
    InvalidTask(String, String),
    #[error("ideal call sequence is empty")]
    EmptyIdeal,
}

/// The environment's database: flat string keys and values.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorldState {
    pub db: BTreeMap<String, String>,
}

/// Registered tool behaviors. Parameters come from the task file;
/// argument-driven variants read from the call's `args` map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToolBehavior {
    /// Reads a fixed key: `<key>=<value>`.
    ReadKey { key: String },
    /// Reads the key named by `args["key"]`.
    ReadArgKey,
    /// Writes a fixed key/value: `ok: <key>=<value>`.
    WriteKey { key: String, value: String },
    /// Writes `args["value"]` to a fixed key.
    WriteArgValue { key: String },
    /// Returns fixed text without touching the database.
    Info { text: String },
}

impl ToolBehavior {
    fn is_write(&self) -> bool {
        matches!(self, ToolBehavior::WriteKey { .. } | ToolBehavior::WriteArgValue { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub kind: ToolKind,
    pub behavior: ToolBehavior,
}

fn arg_str<'a>(args: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    match args.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(format!("arg `{key}` must be a string")),
        None => Err(format!("missing arg `{key}`")),
    }
}

impl ToolSpec {
    /// Runs the behavior. Read behaviors leave the database untouched;
    /// argument problems come back as error-text observations.
    fn execute(&self, args: &Map<String, Value>, db: &mut WorldState) -> String {
        let read = |db: &WorldState, key: &str| match db.db.get(key) {
            Some(value) => format!("{key}={value}"),
            None => format!("error: key {key} not set"),
        };
        match &self.behavior {
            ToolBehavior::ReadKey { key } => read(db, key),
            ToolBehavior::ReadArgKey => match arg_str(args, "key") {
                Ok(key) => read(db, key),
                Err(why) => format!("error: bad args: {why}"),
            },
            ToolBehavior::WriteKey { key, value } => {
                db.db.insert(key.clone(), value.clone());
                format!("ok: {key}={value}")
            }
            ToolBehavior::WriteArgValue { key } => match arg_str(args, "value") {
                Ok(value) => {
                    let value = value.to_string();
                    db.db.insert(key.clone(), value.clone());
                    format!("ok: {key}={value}")
                }
                Err(why) => format!("error: bad args: {why}"),
            },
            ToolBehavior::Info { text } => text.clone(),
        }
    }
}

/// When a scripted user rule fires: on the n-th agent reply (1-based),
/// or when the agent's message contains a substring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    TurnIndex(usize),
    AgentMsgPattern(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRule {
    pub trigger: Trigger,
    pub utterance: String,
}

/// Deterministic stand-in for a simulated user: an opening utterance
/// plus consumable rules scanned in order. When nothing fires the user
/// is done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedUser {
    pub opening: String,
    #[serde(default)]
    pub rules: Vec<UserRule>,
}

/// Success criteria, each a pure function of the final database and the
/// episode's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalSpec {
    /// The expected entries are a subset of the final database.
    FinalStateMatch { expected: BTreeMap<String, String> },
    /// Every predicate holds.
    Assertions { assertions: Vec<AssertionSpec> },
    /// The listed events occur in order, gaps allowed.
    Milestones { milestones: Vec<Milestone> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AssertionSpec {
    DbEquals { key: String, value: String },
    ToolCalled { tool: String },
    ToolNotCalled { tool: String },
    ToolCalledAtMost { tool: String, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Milestone {
    pub tool: String,
    /// Required arguments (string-valued subset of the call's args).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub args_subset: Option<BTreeMap<String, String>>,
}

/// One simulated task: initial world, tool set, scripted user, goal,
/// and optionally the ideal call sequence (for process accuracy) and
/// the route the scripted base policy follows when the graph offers no
/// guidance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub initial_db: BTreeMap<String, String>,
    pub tools: Vec<ToolSpec>,
    pub user: ScriptedUser,
    pub goal: GoalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideal_call_sequence: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub base_route: Vec<String>,
}

impl Task {
    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |why: &str| Err(EnvError::InvalidTask(self.id.clone(), why.to_string()));
        if self.tools.is_empty() {
            return fail("no tools");
        }
        let mut names = std::collections::BTreeSet::new();
        for tool in &self.tools {
            if tool.name.is_empty() || tool.name == SUMMARY_TOOL {
                return fail("invalid tool name");
            }
            if !names.insert(tool.name.as_str()) {
                return fail("duplicate tool name");
            }
            let write = tool.behavior.is_write();
            if write != matches!(tool.kind, ToolKind::Write) {
                return fail("tool kind does not match its behavior");
            }
        }
        for seq in self.ideal_call_sequence.iter().flatten() {
            if !names.contains(seq.as_str()) {
                return fail("ideal sequence references unknown tool");
            }
        }
        for step in &self.base_route {
            if !names.contains(step.as_str()) {
                return fail("base route references unknown tool");
            }
        }
        Ok(())
    }

    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }
}

pub fn parse_suite(json: &str) -> Result<Vec<Task>, EnvError> {
    let tasks: Vec<Task> = serde_json::from_str(json)
        .map_err(|e| EnvError::InvalidTask("<suite>".into(), e.to_string()))?;
    for task in &tasks {
        task.validate()?;
    }
    Ok(tasks)
}

pub fn suite_to_json(tasks: &[Task]) -> String {
    serde_json::to_string_pretty(tasks).expect("suite serialization is infallible")
}

/// Live episode state: one owner, one episode.
pub struct EnvHandle<'a> {
    task: &'a Task,
    db: WorldState,
    events: Vec<Event>,
    reply_index: usize,
    rules_consumed: Vec<bool>,
    done: bool,
}

/// Starts an episode: fresh world cloned from the task, event log
/// seeded with the user's opening utterance.
pub fn reset(task: &Task) -> Result<(EnvHandle<'_>, String), EnvError> {
    task.validate()?;
    let opening = task.user.opening.clone();
    let handle = EnvHandle {
        task,
        db: WorldState { db: task.initial_db.clone() },
        events: vec![Event::user(opening.clone())],
        reply_index: 0,
        rules_consumed: vec![false; task.user.rules.len()],
        done: false,
    };
    Ok((handle, opening))
}

impl<'a> EnvHandle<'a> {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn db(&self) -> &WorldState {
        &self.db
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn task(&self) -> &Task {
        self.task
    }

    /// Executes a tool call, recording the call and its observation.
    /// Unknown tools and bad arguments produce error observations; the
    /// reserved summarization name is refused without recording since
    /// summaries have their own event kinds.
    pub fn apply_tool(&mut self, name: &str, args: &Map<String, Value>) -> String {
        if name == SUMMARY_TOOL {
            return format!("error: `{SUMMARY_TOOL}` is not an environment tool");
        }
        self.events.push(Event::tool_call(name, args.clone()));
        let observation = match self.task.tool(name) {
            Some(tool) => tool.execute(args, &mut self.db),
            None => "error: unknown tool".to_string(),
        };
        self.events.push(Event::tool_result(name, observation.clone()));
        observation
    }

    /// Appends the summarization call/result pair produced by the
    /// summary tool.
    pub fn record_summary(&mut self, text: &str) {
        self.events.push(Event::summary_call());
        self.events.push(Event::summary_result(text));
    }

    /// Appends a bare agent message without consulting the user (used
    /// when a policy halts on its own).
    pub fn record_agent_msg(&mut self, text: &str) {
        self.events.push(Event::agent(text));
    }

    /// Delivers an agent message to the scripted user and returns the
    /// reply. The first unconsumed rule whose trigger matches fires;
    /// with none left the user utters the terminal marker and the
    /// episode is over.
    pub fn post_user_turn(&mut self, agent_msg: &str) -> String {
        self.events.push(Event::agent(agent_msg));
        self.reply_index += 1;
        let mut reply = None;
        for (i, rule) in self.task.user.rules.iter().enumerate() {
            if self.rules_consumed[i] {
                continue;
            }
            let fires = match &rule.trigger {
                Trigger::TurnIndex(n) => *n == self.reply_index,
                Trigger::AgentMsgPattern(p) => agent_msg.contains(p.as_str()),
            };
            if fires {
                self.rules_consumed[i] = true;
                reply = Some(rule.utterance.clone());
                break;
            }
        }
        let reply = reply.unwrap_or_else(|| DONE_MARKER.to_string());
        if reply == DONE_MARKER {
            self.done = true;
        }
        self.events.push(Event::user(reply.clone()));
        reply
    }

    /// Scores the terminated episode against the task goal.
    pub fn evaluate_goal(&self) -> u8 {
        evaluate(&self.db, &self.events, &self.task.goal)
    }
}

/// Goal evaluation over terminal artifacts only.
pub fn evaluate(final_db: &WorldState, events: &[Event], goal: &GoalSpec) -> u8 {
    let ok = match goal {
        GoalSpec::FinalStateMatch { expected } => expected
            .iter()
            .all(|(k, v)| final_db.db.get(k) == Some(v)),
        GoalSpec::Assertions { assertions } => assertions.iter().all(|a| {
            let calls = |tool: &str| {
                events
                    .iter()
                    .filter(|e| e.kind == EventKind::ToolCall && e.tool_name.as_deref() == Some(tool))
                    .count()
            };
            match a {
                AssertionSpec::DbEquals { key, value } => final_db.db.get(key) == Some(value),
                AssertionSpec::ToolCalled { tool } => calls(tool) >= 1,
                AssertionSpec::ToolNotCalled { tool } => calls(tool) == 0,
                AssertionSpec::ToolCalledAtMost { tool, max } => calls(tool) <= *max,
            }
        }),
        GoalSpec::Milestones { milestones } => {
            let mut next = 0usize;
            for ev in events {
                if next == milestones.len() {
                    break;
                }
                if ev.kind != EventKind::ToolCall {
                    continue;
                }
                let m = &milestones[next];
                if ev.tool_name.as_deref() != Some(m.tool.as_str()) {
                    continue;
                }
                let args_ok = m.args_subset.as_ref().is_none_or(|subset| {
                    subset.iter().all(|(k, v)| {
                        ev.args
                            .as_ref()
                            .and_then(|a| a.get(k))
                            .is_some_and(|got| got == &Value::String(v.clone()))
                    })
                });
                if args_ok {
                    next += 1;
                }
            }
            next == milestones.len()
        }
    };
    u8::from(ok)
}

/// Positional agreement with the ideal call sequence: summarization
/// calls are deleted from the actual sequence, then position i matches
/// when the tools are equal; the score is matches / ideal length.
pub fn process_accuracy(actual: &[String], ideal: &[String]) -> Result<f64, EnvError> {
    if ideal.is_empty() {
        return Err(EnvError::EmptyIdeal);
    }
    let actual: Vec<&String> = actual.iter().filter(|t| t.as_str() != SUMMARY_TOOL).collect();
    let matches = actual
        .iter()
        .zip(ideal)
        .filter(|(a, b)| a.as_str() == b.as_str())
        .count();
    Ok(matches as f64 / ideal.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn settings_task() -> Task {
        Task {
            id: "settings-1".into(),
            initial_db: BTreeMap::from([("roaming".into(), "on".into())]),
            tools: vec![
                ToolSpec {
                    name: "get_setting".into(),
                    description: "Reads the named setting".into(),
                    kind: ToolKind::Read,
                    behavior: ToolBehavior::ReadArgKey,
                },
                ToolSpec {
                    name: "set_roaming_off".into(),
                    description: "Disables roaming".into(),
                    kind: ToolKind::Write,
                    behavior: ToolBehavior::WriteKey { key: "roaming".into(), value: "off".into() },
                },
            ],
            user: ScriptedUser {
                opening: "my data is slow".into(),
                rules: vec![
                    UserRule {
                        trigger: Trigger::AgentMsgPattern("roaming".into()),
                        utterance: "yes, turn roaming off".into(),
                    },
                    UserRule {
                        trigger: Trigger::TurnIndex(2),
                        utterance: "thanks".into(),
                    },
                ],
            },
            goal: GoalSpec::FinalStateMatch {
                expected: BTreeMap::from([("roaming".into(), "off".into())]),
            },
            ideal_call_sequence: Some(vec!["get_setting".into(), "set_roaming_off".into()]),
            base_route: vec![],
        }
    }

    fn key_args(key: &str) -> Map<String, Value> {
        Map::from_iter([(String::from("key"), Value::String(key.into()))])
    }

    #[test]
    fn reset_is_deterministic_and_pure() {
        let task = settings_task();
        let snapshot = task.clone();
        let (h1, u1) = reset(&task).unwrap();
        let (h2, u2) = reset(&task).unwrap();
        assert_eq!(u1, u2);
        assert_eq!(u1, "my data is slow");
        assert_eq!(h1.db(), h2.db());
        assert_eq!(h1.events(), h2.events());
        assert_eq!(task, snapshot);
    }

    #[test]
    fn empty_tool_list_is_invalid() {
        let mut task = settings_task();
        task.tools.clear();
        assert!(matches!(reset(&task), Err(EnvError::InvalidTask(..))));
    }

    #[test]
    fn kind_behavior_mismatch_is_invalid() {
        let mut task = settings_task();
        task.tools[1].kind = ToolKind::Read;
        assert!(matches!(task.validate(), Err(EnvError::InvalidTask(..))));
    }

    #[test]
    fn read_tools_leave_db_unchanged() {
        let task = settings_task();
        let (mut env, _) = reset(&task).unwrap();
        let before = env.db().clone();
        let obs = env.apply_tool("get_setting", &key_args("roaming"));
        assert_eq!(obs, "roaming=on");
        assert_eq!(env.db(), &before);
    }

    #[test]
    fn write_tools_mutate_their_declared_key() {
        let task = settings_task();
        let (mut env, _) = reset(&task).unwrap();
        let obs = env.apply_tool("set_roaming_off", &Map::new());
        assert_eq!(obs, "ok: roaming=off");
        assert_eq!(env.db().db.get("roaming").map(String::as_str), Some("off"));
    }

    #[test]
    fn unknown_tool_and_bad_args_are_observations() {
        let task = settings_task();
        let (mut env, _) = reset(&task).unwrap();
        let before = env.db().clone();
        assert_eq!(env.apply_tool("reboot_tower", &Map::new()), "error: unknown tool");
        assert_eq!(env.db(), &before);
        let obs = env.apply_tool("get_setting", &Map::new());
        assert!(obs.starts_with("error: bad args"));
        // Both calls were recorded with their observations.
        assert_eq!(env.events().iter().filter(|e| e.kind == EventKind::ToolCall).count(), 2);
    }

    #[test]
    fn reserved_tool_name_is_refused_without_recording() {
        let task = settings_task();
        let (mut env, _) = reset(&task).unwrap();
        let before = env.events().len();
        let obs = env.apply_tool(SUMMARY_TOOL, &Map::new());
        assert!(obs.starts_with("error:"));
        assert_eq!(env.events().len(), before);
    }

    #[test]
    fn user_rules_fire_in_order_then_done() {
        let task = settings_task();
        let (mut env, _) = reset(&task).unwrap();
        // Pattern rule fires on matching message.
        assert_eq!(env.post_user_turn("is roaming enabled?"), "yes, turn roaming off");
        // Turn-index rule fires on the second reply.
        assert_eq!(env.post_user_turn("done"), "thanks");
        // Rules exhausted.
        assert_eq!(env.post_user_turn("anything else?"), DONE_MARKER);
        assert!(env.is_done());
    }

    #[test]
    fn identical_transcripts_give_identical_replies() {
        let task = settings_task();
        let script = ["checking your roaming now", "all set"];
        let run = || {
            let (mut env, _) = reset(&task).unwrap();
            script.iter().map(|m| env.post_user_turn(m)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn final_state_match_is_subset_based() {
        let db = WorldState {
            db: BTreeMap::from([
                ("roaming".into(), "off".into()),
                ("plan".into(), "5G".into()),
            ]),
        };
        let goal = GoalSpec::FinalStateMatch {
            expected: BTreeMap::from([("roaming".into(), "off".into())]),
        };
        assert_eq!(evaluate(&db, &[], &goal), 1);
        let goal = GoalSpec::FinalStateMatch {
            expected: BTreeMap::from([("roaming".into(), "on".into())]),
        };
        assert_eq!(evaluate(&db, &[], &goal), 0);
    }

    #[test]
    fn milestones_allow_gaps() {
        let task = settings_task();
        let (mut env, _) = reset(&task).unwrap();
        env.apply_tool("get_setting", &key_args("roaming"));
        env.record_summary("symptoms: none; facts: roaming=on");
        env.apply_tool("set_roaming_off", &Map::new());
        let goal = GoalSpec::Milestones {
            milestones: vec![
                Milestone { tool: "get_setting".into(), args_subset: None },
                Milestone { tool: "set_roaming_off".into(), args_subset: None },
            ],
        };
        assert_eq!(evaluate(env.db(), env.events(), &goal), 1);

        // Order matters.
        let goal = GoalSpec::Milestones {
            milestones: vec![
                Milestone { tool: "set_roaming_off".into(), args_subset: None },
                Milestone { tool: "get_setting".into(), args_subset: None },
            ],
        };
        assert_eq!(evaluate(env.db(), env.events(), &goal), 0);

        // Argument subsets must match.
        let goal = GoalSpec::Milestones {
            milestones: vec![Milestone {
                tool: "get_setting".into(),
                args_subset: Some(BTreeMap::from([("key".into(), "roaming".into())])),
            }],
        };
        assert_eq!(evaluate(env.db(), env.events(), &goal), 1);
        let goal = GoalSpec::Milestones {
            milestones: vec![Milestone {
                tool: "get_setting".into(),
                args_subset: Some(BTreeMap::from([("key".into(), "plan".into())])),
            }],
        };
        assert_eq!(evaluate(env.db(), env.events(), &goal), 0);
    }

    #[test]
    fn assertion_call_budgets() {
        let task = settings_task();
        let (mut env, _) = reset(&task).unwrap();
        env.apply_tool("set_roaming_off", &Map::new());
        env.apply_tool("set_roaming_off", &Map::new());
        let goal = GoalSpec::Assertions {
            assertions: vec![AssertionSpec::ToolCalledAtMost {
                tool: "set_roaming_off".into(),
                max: 1,
            }],
        };
        assert_eq!(evaluate(env.db(), env.events(), &goal), 0);
        let goal = GoalSpec::Assertions {
            assertions: vec![
                AssertionSpec::ToolCalledAtMost { tool: "set_roaming_off".into(), max: 2 },
                AssertionSpec::ToolCalled { tool: "set_roaming_off".into() },
                AssertionSpec::ToolNotCalled { tool: "get_setting".into() },
                AssertionSpec::DbEquals { key: "roaming".into(), value: "off".into() },
            ],
        };
        assert_eq!(evaluate(env.db(), env.events(), &goal), 1);
    }

    fn names(seq: &[&str]) -> Vec<String> {
        seq.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn process_accuracy_positional_rule() {
        let ideal = names(&["a", "b", "c", "d"]);
        assert_eq!(process_accuracy(&names(&["a", "b", "x", "d"]), &ideal).unwrap(), 0.75);
        assert_eq!(process_accuracy(&ideal, &ideal).unwrap(), 1.0);
        assert_eq!(process_accuracy(&[], &ideal).unwrap(), 0.0);
        assert!(matches!(process_accuracy(&ideal, &[]), Err(EnvError::EmptyIdeal)));
    }

    #[test]
    fn process_accuracy_ignores_summary_calls() {
        let ideal = names(&["a", "b"]);
        let actual = vec!["a".to_string(), SUMMARY_TOOL.to_string(), "b".to_string()];
        assert_eq!(process_accuracy(&actual, &ideal).unwrap(), 1.0);
    }

    #[test]
    fn extra_trailing_calls_do_not_add_matches() {
        let ideal = names(&["a", "b"]);
        let actual = names(&["a", "b", "c", "d"]);
        assert_eq!(process_accuracy(&actual, &ideal).unwrap(), 1.0);
        let actual = names(&["a"]);
        assert_eq!(process_accuracy(&actual, &ideal).unwrap(), 0.5);
    }

    #[test]
    fn suite_roundtrip() {
        let tasks = vec![settings_task()];
        let json = suite_to_json(&tasks);
        let back = parse_suite(&json).unwrap();
        assert_eq!(tasks, back);
    }
}
