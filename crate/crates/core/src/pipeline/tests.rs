use super::*;
use crate::executor::runtime_descriptors;
use crate::memory::{EnvironmentInfo, ModuleDescriptor};
use alloc::vec;
use std::sync::Mutex;

fn docs() -> Vec<ApiFunctionDescriptor> {
    let mut d = runtime_descriptors();
    d.push(ApiFunctionDescriptor::new("lamp", "level", &[("room", Kind::String)], Kind::Number));
    d
}

fn context() -> ContextSnapshot {
    ContextSnapshot {
        environment: EnvironmentInfo {
            devices: vec![],
            modules: vec![ModuleDescriptor { id: "lamp".into(), capability: "reads light levels".into() }],
            notes: vec![],
        },
        api_docs: docs(),
        ..ContextSnapshot::default()
    }
}

const SKETCH: &str = r#"{"states":[{"name":"read","goal":"read level"},{"name":"bright","goal":"done"},{"name":"dim","goal":"done"}],
"initial":"read","terminals":["bright","dim"],
"transitions":[{"from":"read","to":"bright","condition":"level above 5"},{"from":"read","to":"dim","condition":"otherwise"}]}"#;

/// Replies by purpose; records every request.
struct Script {
    replies: BTreeMap<Purpose, String>,
    seen: Mutex<Vec<CompletionRequest>>,
}

impl Script {
    fn new(ops: &str, transitions: &str) -> Self {
        let mut replies = BTreeMap::new();
        replies.insert(Purpose::Enrich, "Use the lamp in the hall.".to_string());
        replies.insert(Purpose::FsmDerive, format!("Here is the plan:\n```json\n{SKETCH}\n```"));
        replies.insert(Purpose::StageOps, ops.to_string());
        replies.insert(Purpose::Transitions, transitions.to_string());
        Script { replies, seen: Mutex::new(vec![]) }
    }
}

impl Provider for Script {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.seen.lock().unwrap().push(request.clone());
        let reply = self.replies.get(&request.purpose).cloned().unwrap_or_default();
        if request.purpose == Purpose::StageOps && !request.subject().contains("Stage: read") {
            return Ok(r#"{"actions":[]}"#.into());
        }
        Ok(reply)
    }
}

const OPS: &str = r#"{"actions":[{"owner":"lamp","fn":"level","args":["\"hall\""],"bind":"level"}]}"#;
const GUARDS: &str = r#"{"transitions":[{"from":"read","to":"dim","guard":"else"},{"from":"read","to":"bright","guard":"level > 5"}]}"#;

fn run(p: &Script) -> Result<Generated, PipelineError> {
    let prompts = PromptConfig::default();
    let snapshot = context();
    let ctx = GenContext::new(&prompts, "Eason", &snapshot, "check the hall light");
    let task = enrich(p, &ctx)?;
    generate(p, &ctx, &task)
}

#[test]
fn json_is_found_in_fences_and_prose() {
    assert_eq!(extract_json("```json\n{\"a\": 1}\n```"), Some("{\"a\": 1}"));
    assert_eq!(extract_json("Sure! {\"a\": {\"b\": 2}} hope it helps"), Some("{\"a\": {\"b\": 2}}"));
    assert_eq!(extract_json("no json here"), None);
}

#[test]
fn generation_follows_the_sketch() {
    let p = Script::new(OPS, GUARDS);
    let g = run(&p).unwrap();
    assert!(preserves_structure(&g.sketch, &g.program));
    assert_eq!(g.program.vars.get("level"), Some(&Kind::Number));
    // sketch order wins over reply order
    assert_eq!(g.program.transitions[0].to, "bright");
    assert!(g.program.transitions[1].guard.is_else());
    let again = run(&Script::new(OPS, GUARDS)).unwrap();
    assert_eq!(g.program.to_json_string(), again.program.to_json_string());
}

#[test]
fn enrichment_references_known_ids_only() {
    let p = Script::new(OPS, GUARDS);
    let prompts = PromptConfig::default();
    let snapshot = context();
    let ctx = GenContext::new(&prompts, "Eason", &snapshot, "use the teleporter and the lamp");
    let t = enrich(&p, &ctx).unwrap();
    assert_eq!(t.referenced_modules, vec!["lamp".to_string()]);
    assert!(t.referenced_devices.is_empty());
}

#[test]
fn prose_is_a_parse_error() {
    let mut p = Script::new(OPS, GUARDS);
    p.replies.insert(Purpose::FsmDerive, "I would first look around the room.".into());
    let e = run(&p).unwrap_err();
    assert_eq!(e.class(), "ParseError");
    assert!(e.is_retryable());
}

#[test]
fn sketch_without_exit_is_a_structure_error() {
    let mut p = Script::new(OPS, GUARDS);
    p.replies.insert(
        Purpose::FsmDerive,
        r#"{"states":[{"name":"a","goal":""},{"name":"b","goal":""}],"initial":"a","terminals":["b"],"transitions":[]}"#.into(),
    );
    assert_eq!(run(&p).unwrap_err().class(), "StructureError");
}

#[test]
fn fictional_function_is_rejected() {
    let p = Script::new(r#"{"actions":[{"owner":"lamp","fn":"teleport","args":[]}]}"#, GUARDS);
    assert!(matches!(run(&p).unwrap_err(), PipelineError::UnknownFunction { function, .. } if function == "teleport"));
    let p = Script::new(r#"{"actions":[{"owner":"lamp","fn":"level","args":[]}]}"#, GUARDS);
    assert_eq!(run(&p).unwrap_err().class(), "ArityMismatch");
}

#[test]
fn guard_on_undeclared_variable_is_a_type_error() {
    let p = Script::new(OPS, r#"{"transitions":[{"from":"read","to":"bright","guard":"brightness > 5"},{"from":"read","to":"dim","guard":"else"}]}"#);
    assert_eq!(run(&p).unwrap_err().class(), "TypeError");
    let p = Script::new(OPS, r#"{"transitions":[{"from":"read","to":"bright","guard":"level >"},{"from":"read","to":"dim","guard":"else"}]}"#);
    assert_eq!(run(&p).unwrap_err().class(), "ExprParseError");
    let p = Script::new(OPS, r#"{"transitions":[{"from":"read","to":"bright","guard":"level > 5"}]}"#);
    assert_eq!(run(&p).unwrap_err().class(), "StructureError");
}

#[test]
fn conflicting_bind_kinds_fail_assembly() {
    let p = Script::new(
        r#"{"actions":[{"owner":"lamp","fn":"level","args":["\"hall\""],"bind":"level"},{"owner":"runtime","fn":"append","args":["[]","1"],"bind":"level"}]}"#,
        GUARDS,
    );
    assert_eq!(run(&p).unwrap_err().class(), "TypeError");
}

#[test]
fn single_terminal_stage_gives_trivial_program() {
    let sketch: FsmSketch =
        serde_json::from_str(r#"{"states":[{"name":"done","goal":"nothing"}],"initial":"done","terminals":["done"],"transitions":[]}"#)
            .unwrap();
    let p = assemble_program(&sketch, &StageOps::new(), vec![], &docs()).unwrap();
    assert_eq!(p.states.len(), 1);
    assert!(p.transitions.is_empty() && p.vars.is_empty());
}

#[test]
fn retries_carry_the_previous_error() {
    let p = Script::new(OPS, GUARDS);
    let prompts = PromptConfig::default();
    let mut snapshot = context();
    snapshot.exec_results.push(ResultEntry::Error {
        task: "check the hall light".into(),
        attempt: 0,
        class: "ParseError".into(),
        message: "no JSON".into(),
    });
    let mut ctx = GenContext::new(&prompts, "Eason", &snapshot, "check the hall light");
    ctx.attempt = 2;
    ctx.last_error = Some("ParseError: no JSON");
    let task = enrich(&p, &ctx).unwrap();
    derive_fsm(&p, &ctx, &task).unwrap();
    let seen = p.seen.lock().unwrap();
    let last = seen.last().unwrap();
    assert!(last.subject().starts_with("Task: check the hall light\n"));
    assert!(last.subject().contains("Retry 2 of 3: the previous attempt failed with ParseError: no JSON."));
    assert!(last.messages.iter().any(|m| m.text.contains("failed with ParseError: no JSON")));
}
