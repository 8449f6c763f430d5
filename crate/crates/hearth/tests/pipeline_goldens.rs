use hearth::scenario::offline_agent;
use hearth_core::fixtures;
use hearth_core::session::EventLog;

fn generated(scene: hearth_core::sim::Scene, instruction: &str) -> String {
    let agent = offline_agent(scene, &[]).unwrap();
    let mut conv = agent.conversation("golden", "Eason");
    let turn = agent.send(&mut conv, &mut EventLog::new(), instruction);
    let program = turn.workflow.unwrap().program.expect("a program was generated");
    serde_json::to_string_pretty(&program).unwrap()
}

#[test]
fn mock_pipeline_reproduces_scenario1_golden() {
    let got = generated(fixtures::scenario1_scene(), fixtures::SCENARIO1_INSTRUCTION);
    assert_eq!(got, fixtures::SCENARIO1_PROGRAM.trim_end());
}

#[test]
fn mock_pipeline_reproduces_scenario2_golden() {
    let got = generated(fixtures::scenario2_scene(), fixtures::SCENARIO2_INSTRUCTION);
    assert_eq!(got, fixtures::SCENARIO2_PROGRAM.trim_end());
}

#[test]
fn greeting_is_chat_only() {
    let agent = offline_agent(fixtures::scenario1_scene(), &[]).unwrap();
    let mut conv = agent.conversation("g", "Ada");
    let mut log = EventLog::new();
    let a = agent.send(&mut conv, &mut log, "hello");
    assert!(a.workflow.is_none());
    assert_eq!(a.reply, "Hello! How can I help you today?");
    let b = agent.send(&mut conv, &mut log, "hello");
    assert_eq!(a.reply, b.reply);
}

#[test]
fn robot_off_scene_reports_unavailable_hardware() {
    let agent = offline_agent(fixtures::scenario1_robot_off_scene(), &[]).unwrap();
    let mut conv = agent.conversation("off", "Eason");
    let turn = agent.send(&mut conv, &mut EventLog::new(), fixtures::SCENARIO1_INSTRUCTION);
    let wf = turn.workflow.unwrap();
    assert!(wf.report.is_none());
    assert!(wf.errors.iter().all(|e| e.starts_with("HardwareUnavailable")), "{:?}", wf.errors);
    assert_eq!(wf.errors.len(), 4);
}
