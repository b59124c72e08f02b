//! Execution engine for tool plans: dependency validation, cycle detection,
//! "$call_id.field" output substitution, and wave-based parallel scheduling
//! with deterministic result order.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map as JsonMap, Value};
use thiserror::Error;

use super::{ToolError, ToolRegistry};

pub const DEFAULT_MAX_CALLS: usize = 10;
pub const DEFAULT_PARALLELISM: usize = 4;

static REF_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\$([A-Za-z0-9_-]+)\.([A-Za-z0-9_][A-Za-z0-9_.\-]*)$").expect("static pattern")
});

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("malformed plan: {0}")]
    Malformed(String),
    #[error("plan has {count} calls, the maximum is {max}")]
    TooManyCalls { count: usize, max: usize },
    #[error("duplicate call id '{0}'")]
    DuplicateCallId(String),
    #[error("call '{call_id}' uses unknown tool '{tool}'")]
    UnknownTool { call_id: String, tool: String },
    #[error("call '{call_id}' depends on unknown call '{dependency}'")]
    UnknownDependency { call_id: String, dependency: String },
    #[error("dependency cycle among calls: {}", members.join(" -> "))]
    Cycle { members: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCall {
    pub call_id: String,
    pub tool: String,
    #[serde(default, rename = "args", alias = "arguments")]
    pub arguments: JsonMap<String, Value>,
    #[serde(default)]
    pub depends_on: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolCallStatus {
    Ok,
    Error,
    Refused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub tool: String,
    pub arguments: JsonMap<String, Value>,
    pub status: ToolCallStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Outcome of a plan execution. `results` holds every attempted call in plan
/// order; a refusal aborts scheduling, so later calls may be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub results: Vec<ToolResult>,
    pub refused: bool,
}

impl ExecOutcome {
    pub fn all_ok(&self) -> bool {
        !self.refused && self.results.iter().all(|r| r.status == ToolCallStatus::Ok)
    }

    pub fn refused_call(&self) -> Option<&ToolResult> {
        self.results.iter().find(|r| r.status == ToolCallStatus::Refused)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutorConfig {
    pub max_calls: usize,
    pub parallelism: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self { max_calls: DEFAULT_MAX_CALLS, parallelism: DEFAULT_PARALLELISM }
    }
}

/// Parses a plan from model output: a JSON array of calls, optionally inside
/// a markdown code fence or under a {"calls": [...]} wrapper.
pub fn parse_plan(text: &str) -> Result<Vec<PlanCall>, PlanError> {
    let mut body = text.trim();
    if body.starts_with("```") {
        body = body
            .trim_start_matches("```json")
            .trim_start_matches("```")
            .trim_end_matches("```")
            .trim();
    }
    let value: Value =
        serde_json::from_str(body).map_err(|e| PlanError::Malformed(e.to_string()))?;
    let array = match value {
        Value::Array(items) => Value::Array(items),
        Value::Object(ref map) if map.contains_key("calls") => map["calls"].clone(),
        other => {
            return Err(PlanError::Malformed(format!(
                "expected a JSON array of calls, got {}",
                kind_name(&other)
            )))
        }
    };
    serde_json::from_value(array).map_err(|e| PlanError::Malformed(e.to_string()))
}

fn kind_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Collects the call ids referenced as "$call_id.field" anywhere in a value.
fn collect_refs(value: &Value, out: &mut BTreeSet<String>) {
    match value {
        Value::String(s) => {
            if let Some(caps) = REF_RE.captures(s) {
                out.insert(caps[1].to_string());
            }
        }
        Value::Array(items) => items.iter().for_each(|v| collect_refs(v, out)),
        Value::Object(map) => map.values().for_each(|v| collect_refs(v, out)),
        _ => {}
    }
}

/// Explicit depends_on entries plus ids referenced from the arguments.
pub fn call_dependencies(call: &PlanCall) -> BTreeSet<String> {
    let mut deps: BTreeSet<String> = call.depends_on.iter().cloned().collect();
    collect_refs(&Value::Object(call.arguments.clone()), &mut deps);
    deps
}

/// Checks the call-count cap, id uniqueness, tool registration, dependency
/// existence, and acyclicity. On a cycle the error lists the calls involved
/// in plan order.
pub fn validate_plan(
    plan: &[PlanCall],
    registry: &ToolRegistry,
    max_calls: usize,
) -> Result<(), PlanError> {
    if plan.len() > max_calls {
        return Err(PlanError::TooManyCalls { count: plan.len(), max: max_calls });
    }
    let mut ids = BTreeSet::new();
    for call in plan {
        if !ids.insert(call.call_id.clone()) {
            return Err(PlanError::DuplicateCallId(call.call_id.clone()));
        }
        if !registry.contains(&call.tool) {
            return Err(PlanError::UnknownTool {
                call_id: call.call_id.clone(),
                tool: call.tool.clone(),
            });
        }
    }
    let mut deps: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for call in plan {
        let call_deps = call_dependencies(call);
        for dep in &call_deps {
            if !ids.contains(dep) {
                return Err(PlanError::UnknownDependency {
                    call_id: call.call_id.clone(),
                    dependency: dep.clone(),
                });
            }
        }
        deps.insert(&call.call_id, call_deps);
    }

    // Kahn's algorithm; whatever cannot be scheduled is part of a cycle.
    let mut done: BTreeSet<&str> = BTreeSet::new();
    loop {
        let ready: Vec<&str> = plan
            .iter()
            .filter(|c| !done.contains(c.call_id.as_str()))
            .filter(|c| deps[c.call_id.as_str()].iter().all(|d| done.contains(d.as_str())))
            .map(|c| c.call_id.as_str())
            .collect();
        if ready.is_empty() {
            break;
        }
        done.extend(ready);
    }
    if done.len() < plan.len() {
        let members: Vec<String> = plan
            .iter()
            .filter(|c| !done.contains(c.call_id.as_str()))
            .map(|c| c.call_id.clone())
            .collect();
        return Err(PlanError::Cycle { members });
    }
    Ok(())
}

/// Replaces every argument string of the exact form "$call_id.field.path"
/// with the referenced output value, preserving its JSON type. Missing
/// outputs or paths are resolution errors.
fn resolve_arguments(
    arguments: &JsonMap<String, Value>,
    outputs: &BTreeMap<String, Value>,
) -> Result<JsonMap<String, Value>, String> {
    fn resolve_value(value: &Value, outputs: &BTreeMap<String, Value>) -> Result<Value, String> {
        match value {
            Value::String(s) => {
                if let Some(caps) = REF_RE.captures(s) {
                    let call_id = &caps[1];
                    let path = &caps[2];
                    let output = outputs
                        .get(call_id)
                        .ok_or_else(|| format!("reference {s} has no completed producer"))?;
                    let mut cursor = output;
                    for segment in path.split('.') {
                        cursor = match cursor {
                            Value::Object(map) => map.get(segment),
                            Value::Array(items) => {
                                segment.parse::<usize>().ok().and_then(|i| items.get(i))
                            }
                            _ => None,
                        }
                        .ok_or_else(|| {
                            format!("reference {s} does not resolve to an output field")
                        })?;
                    }
                    Ok(cursor.clone())
                } else {
                    Ok(value.clone())
                }
            }
            Value::Array(items) => items
                .iter()
                .map(|v| resolve_value(v, outputs))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array),
            Value::Object(map) => {
                let mut out = JsonMap::new();
                for (k, v) in map {
                    out.insert(k.clone(), resolve_value(v, outputs)?);
                }
                Ok(Value::Object(out))
            }
            _ => Ok(value.clone()),
        }
    }

    let mut resolved = JsonMap::new();
    for (k, v) in arguments {
        resolved.insert(k.clone(), resolve_value(v, outputs)?);
    }
    Ok(resolved)
}

/// Runs a validated plan. Calls whose dependencies are all satisfied run
/// concurrently (bounded by `parallelism`); dependents of a failed call get
/// an error result without being invoked; a refusal stops scheduling.
pub fn execute_plan(
    plan: &[PlanCall],
    registry: &ToolRegistry,
    config: &ExecutorConfig,
) -> Result<ExecOutcome, PlanError> {
    validate_plan(plan, registry, config.max_calls)?;

    let mut finished: BTreeMap<String, ToolResult> = BTreeMap::new();
    let mut ok_outputs: BTreeMap<String, Value> = BTreeMap::new();
    let mut refused = false;

    while finished.len() < plan.len() && !refused {
        let wave: Vec<&PlanCall> = plan
            .iter()
            .filter(|c| !finished.contains_key(&c.call_id))
            .filter(|c| {
                call_dependencies(c).iter().all(|d| finished.contains_key(d.as_str()))
            })
            .collect();
        debug_assert!(!wave.is_empty(), "validated plans always make progress");

        let mut wave_results: Vec<ToolResult> = Vec::with_capacity(wave.len());
        for group in wave.chunks(config.parallelism.max(1)) {
            let mut group_results: Vec<Option<ToolResult>> = Vec::new();
            std::thread::scope(|scope| {
                let handles: Vec<_> = group
                    .iter()
                    .map(|call| {
                        let ok_outputs = &ok_outputs;
                        let finished = &finished;
                        scope.spawn(move || run_call(call, registry, ok_outputs, finished))
                    })
                    .collect();
                for handle in handles {
                    group_results.push(Some(handle.join().expect("tool thread never panics")));
                }
            });
            wave_results.extend(group_results.into_iter().flatten());
        }

        for result in wave_results {
            if result.status == ToolCallStatus::Refused {
                refused = true;
            }
            if result.status == ToolCallStatus::Ok {
                if let Some(output) = &result.output {
                    ok_outputs.insert(result.call_id.clone(), output.clone());
                }
            }
            finished.insert(result.call_id.clone(), result);
        }
    }

    let results: Vec<ToolResult> = plan
        .iter()
        .filter_map(|c| finished.get(&c.call_id).cloned())
        .collect();
    Ok(ExecOutcome { results, refused })
}

fn run_call(
    call: &PlanCall,
    registry: &ToolRegistry,
    ok_outputs: &BTreeMap<String, Value>,
    finished: &BTreeMap<String, ToolResult>,
) -> ToolResult {
    let mut result = ToolResult {
        call_id: call.call_id.clone(),
        tool: call.tool.clone(),
        arguments: call.arguments.clone(),
        status: ToolCallStatus::Error,
        output: None,
        summary: None,
        error: None,
    };

    for dep in call_dependencies(call) {
        let dep_ok = finished
            .get(&dep)
            .map(|r| r.status == ToolCallStatus::Ok)
            .unwrap_or(false);
        if !dep_ok {
            result.error = Some(format!("dependency '{dep}' did not complete successfully"));
            return result;
        }
    }

    let resolved = match resolve_arguments(&call.arguments, ok_outputs) {
        Ok(resolved) => resolved,
        Err(message) => {
            result.error = Some(message);
            return result;
        }
    };
    result.arguments = resolved.clone();

    let tool = registry.get(&call.tool).expect("validated plans only name registered tools");
    match tool.invoke(&resolved) {
        Ok(output) => {
            result.status = ToolCallStatus::Ok;
            result.summary = Some(output.summary);
            result.output = Some(output.output);
        }
        Err(ToolError::Refused { message, .. }) => {
            result.status = ToolCallStatus::Refused;
            result.error = Some(message);
        }
        Err(e) => {
            result.error = Some(e.to_string());
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::{Calculator, Tool, ToolOutput, ToolSpec};
    use serde_json::json;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Refuser;

    impl Tool for Refuser {
        fn spec(&self) -> ToolSpec {
            ToolSpec::new("refuser", "always refuses", &[])
        }

        fn invoke(&self, _: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
            Err(ToolError::Refused {
                tool: "refuser".to_string(),
                message: "declined".to_string(),
            })
        }
    }

    struct Failer;

    impl Tool for Failer {
        fn spec(&self) -> ToolSpec {
            ToolSpec::new("failer", "always fails", &[])
        }

        fn invoke(&self, _: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
            Err(ToolError::Failed { tool: "failer".to_string(), message: "boom".to_string() })
        }
    }

    struct Counter(Arc<AtomicUsize>);

    impl Tool for Counter {
        fn spec(&self) -> ToolSpec {
            ToolSpec::new("counter", "counts invocations", &[])
        }

        fn invoke(&self, _: &JsonMap<String, Value>) -> Result<ToolOutput, ToolError> {
            let n = self.0.fetch_add(1, Ordering::SeqCst);
            Ok(ToolOutput { output: json!({ "n": n }), summary: format!("counter: {n}") })
        }
    }

    fn registry() -> ToolRegistry {
        let mut r = ToolRegistry::new();
        r.register(Arc::new(Calculator));
        r.register(Arc::new(Refuser));
        r.register(Arc::new(Failer));
        r
    }

    fn call(id: &str, tool: &str, arguments: Value, deps: &[&str]) -> PlanCall {
        PlanCall {
            call_id: id.to_string(),
            tool: tool.to_string(),
            arguments: arguments.as_object().cloned().unwrap_or_default(),
            depends_on: deps.iter().map(|d| d.to_string()).collect(),
        }
    }

    #[test]
    fn parse_accepts_array_fenced_and_wrapped() {
        let raw = r#"[{"call_id": "A", "tool": "calculator", "args": {"op": "add", "a": 1, "b": 2}}]"#;
        assert_eq!(parse_plan(raw).unwrap().len(), 1);
        let fenced = format!("```json\n{raw}\n```");
        assert_eq!(parse_plan(&fenced).unwrap().len(), 1);
        let wrapped = format!("{{\"calls\": {raw}}}");
        assert_eq!(parse_plan(&wrapped).unwrap().len(), 1);
        assert!(parse_plan("17").is_err());
        assert!(parse_plan("not json").is_err());
    }

    #[test]
    fn validate_rejects_eleven_calls() {
        let plan: Vec<PlanCall> = (0..11)
            .map(|i| call(&format!("c{i}"), "calculator", json!({}), &[]))
            .collect();
        let err = validate_plan(&plan, &registry(), 10).unwrap_err();
        assert!(matches!(err, PlanError::TooManyCalls { count: 11, max: 10 }));
        assert!(validate_plan(&plan[..10], &registry(), 10).is_ok());
    }

    #[test]
    fn validate_rejects_unknowns_and_duplicates() {
        let plan = vec![call("a", "no_such_tool", json!({}), &[])];
        assert!(matches!(
            validate_plan(&plan, &registry(), 10).unwrap_err(),
            PlanError::UnknownTool { .. }
        ));

        let plan = vec![
            call("a", "calculator", json!({}), &[]),
            call("a", "calculator", json!({}), &[]),
        ];
        assert!(matches!(
            validate_plan(&plan, &registry(), 10).unwrap_err(),
            PlanError::DuplicateCallId(_)
        ));

        let plan = vec![call("a", "calculator", json!({}), &["ghost"])];
        assert!(matches!(
            validate_plan(&plan, &registry(), 10).unwrap_err(),
            PlanError::UnknownDependency { .. }
        ));
    }

    #[test]
    fn validate_names_cycle_members() {
        let plan = vec![
            call("a", "calculator", json!({}), &["b"]),
            call("b", "calculator", json!({}), &["a"]),
            call("c", "calculator", json!({"op": "add", "a": 1, "b": 1}), &[]),
        ];
        let err = validate_plan(&plan, &registry(), 10).unwrap_err();
        match err {
            PlanError::Cycle { members } => assert_eq!(members, vec!["a", "b"]),
            other => panic!("expected cycle, got {other}"),
        }

        let self_dep = vec![call("a", "calculator", json!({}), &["a"])];
        let err = validate_plan(&self_dep, &registry(), 10).unwrap_err();
        assert!(err.to_string().contains('a'));
        assert!(matches!(err, PlanError::Cycle { .. }));
    }

    #[test]
    fn substitution_preserves_json_type() {
        let plan = vec![
            call("first", "calculator", json!({"op": "add", "a": 2, "b": 3}), &[]),
            call("second", "calculator", json!({"op": "mul", "a": "$first.value", "b": 10}), &[]),
        ];
        let outcome = execute_plan(&plan, &registry(), &ExecutorConfig::default()).unwrap();
        assert!(outcome.all_ok());
        assert_eq!(outcome.results[1].arguments["a"], json!(5.0));
        assert_eq!(outcome.results[1].output.as_ref().unwrap()["value"], json!(50.0));
    }

    #[test]
    fn unresolvable_reference_fails_dependent_without_literal_passthrough() {
        let plan = vec![
            call("first", "calculator", json!({"op": "add", "a": 2, "b": 3}), &[]),
            call(
                "second",
                "calculator",
                json!({"op": "mul", "a": "$first.no_such_field", "b": 10}),
                &[],
            ),
        ];
        let outcome = execute_plan(&plan, &registry(), &ExecutorConfig::default()).unwrap();
        assert_eq!(outcome.results[1].status, ToolCallStatus::Error);
        let message = outcome.results[1].error.as_deref().unwrap();
        assert!(message.contains("$first.no_such_field"));
    }

    #[test]
    fn failed_dependency_blocks_dependent_but_not_independent_calls() {
        let plan = vec![
            call("bad", "failer", json!({}), &[]),
            call("child", "calculator", json!({"op": "add", "a": "$bad.x", "b": 1}), &[]),
            call("free", "calculator", json!({"op": "add", "a": 1, "b": 1}), &[]),
        ];
        let outcome = execute_plan(&plan, &registry(), &ExecutorConfig::default()).unwrap();
        assert_eq!(outcome.results.len(), 3);
        assert_eq!(outcome.results[0].status, ToolCallStatus::Error);
        assert_eq!(outcome.results[1].status, ToolCallStatus::Error);
        assert!(outcome.results[1].error.as_deref().unwrap().contains("'bad'"));
        assert_eq!(outcome.results[2].status, ToolCallStatus::Ok);
        assert!(!outcome.all_ok());
        assert!(!outcome.refused);
    }

    #[test]
    fn refusal_aborts_remaining_waves() {
        let plan = vec![
            call("r", "refuser", json!({}), &[]),
            call("after", "calculator", json!({"op": "add", "a": 1, "b": 1}), &["r"]),
        ];
        let outcome = execute_plan(&plan, &registry(), &ExecutorConfig::default()).unwrap();
        assert!(outcome.refused);
        assert_eq!(outcome.results.len(), 1);
        assert_eq!(outcome.results[0].status, ToolCallStatus::Refused);
        assert_eq!(outcome.refused_call().unwrap().call_id, "r");
    }

    #[test]
    fn sequential_and_parallel_execution_agree() {
        let mut plan = vec![call(
            "seed",
            "calculator",
            json!({"op": "add", "a": 1, "b": 1}),
            &[],
        )];
        for i in 0..6 {
            plan.push(call(
                &format!("branch{i}"),
                "calculator",
                json!({"op": "mul", "a": "$seed.value", "b": i}),
                &[],
            ));
        }
        plan.push(call(
            "join",
            "calculator",
            json!({"op": "add", "a": "$branch0.value", "b": "$branch5.value"}),
            &[],
        ));

        let sequential = execute_plan(
            &plan,
            &registry(),
            &ExecutorConfig { max_calls: 10, parallelism: 1 },
        )
        .unwrap();
        let parallel = execute_plan(
            &plan,
            &registry(),
            &ExecutorConfig { max_calls: 10, parallelism: 8 },
        )
        .unwrap();
        assert_eq!(sequential, parallel);
        assert!(sequential.all_ok());
        let ids: Vec<&str> = sequential.results.iter().map(|r| r.call_id.as_str()).collect();
        assert_eq!(ids, vec!["seed", "branch0", "branch1", "branch2", "branch3", "branch4", "branch5", "join"]);
    }

    #[test]
    fn no_call_starts_before_dependencies_complete() {
        let counter = Arc::new(AtomicUsize::new(0));
        let mut r = ToolRegistry::new();
        r.register(Arc::new(Counter(counter.clone())));
        let plan = vec![
            call("a", "counter", json!({}), &[]),
            call("b", "counter", json!({}), &["a"]),
            call("c", "counter", json!({}), &["b"]),
        ];
        let outcome =
            execute_plan(&plan, &r, &ExecutorConfig { max_calls: 10, parallelism: 8 }).unwrap();
        assert!(outcome.all_ok());
        let ns: Vec<u64> = outcome
            .results
            .iter()
            .map(|r| r.output.as_ref().unwrap()["n"].as_u64().unwrap())
            .collect();
        assert_eq!(ns, vec![0, 1, 2]);
    }
}
