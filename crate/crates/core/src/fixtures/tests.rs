use super::*;
use crate::clock::ManualClock;
use crate::executor::{run, ExecutionStatus, RunOptions};
use crate::sim::{standard_registry, Fleet};
use crate::validate::validate;
use crate::value::Value;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

fn strs(items: &[&str]) -> Value {
    Value::List(items.iter().map(|s| Value::str(*s)).collect())
}

fn cells(items: &[[i64; 2]]) -> Value {
    Value::List(
        items
            .iter()
            .map(|c| Value::List(vec![Value::Number(c[0] as f64), Value::Number(c[1] as f64)]))
            .collect(),
    )
}

#[test]
fn goldens_are_canonical_json() {
    for (text, program) in [(SCENARIO1_PROGRAM, scenario1_program()), (SCENARIO2_PROGRAM, scenario2_program())] {
        assert_eq!(serde_json::to_string_pretty(&program).unwrap(), text.trim_end());
    }
}

#[test]
fn bundled_scenes_load() {
    for name in ["scenario1", "scenario1-robot-off", "scenario2"] {
        scene_by_name(name).unwrap().unwrap();
    }
    assert!(scene_by_name("nope").is_none());
    let s = scenario1_scene();
    assert_eq!(s.persons.len(), 5);
    assert_eq!(s.router.as_ref().unwrap().state.allocated(), 90);
}

#[test]
fn scenario1_program_counts_and_identifies() {
    let mut fleet = Fleet::new(scenario1_scene()).unwrap();
    let registry = standard_registry::<Fleet>(&fleet);
    let program = scenario1_program();
    let report = validate(&program, &registry, &fleet);
    assert!(report.is_valid(), "{}", report.describe_errors());
    assert_eq!(report.warnings().count(), 0);

    let clock = ManualClock::new(0);
    let out = run(&program, &registry, &mut fleet, RunOptions::default(), &clock);
    assert_eq!(out.status, ExecutionStatus::Success, "{:?}", out.logs);
    assert_eq!(out.outputs["count"], Value::Number(5.0));
    assert_eq!(out.outputs["known"], strs(&["Mike", "Ada", "Joe"]));
    assert_eq!(out.outputs["unknown_locations"], cells(&[[10, 1], [12, 5]]));
    assert_eq!(out.outputs.len(), 3);
    assert_eq!(
        out.visited_states,
        ["capture", "recognize", "inspect", "retain", "inspect", "retain", "report"]
    );
    // The robot ends next to the second stranger.
    let [x, y] = fleet.robot_position().unwrap();
    assert!((x - 12).abs() + (y - 5).abs() <= 2);
}

#[test]
fn robot_off_fails_validation() {
    let fleet = Fleet::new(scenario1_robot_off_scene()).unwrap();
    let registry = standard_registry::<Fleet>(&fleet);
    let report = validate(&scenario1_program(), &registry, &fleet);
    assert!(report.has("HardwareUnavailable"));
    let pinged = registry.ping_devices(&fleet, ["turtlebot", "robot_cam", "cam_corner_a"]);
    assert_eq!(pinged["turtlebot"], false);
    assert_eq!(pinged["robot_cam"], false);
    assert_eq!(pinged["cam_corner_a"], true);
}

#[test]
fn scenario2_upgrades_then_rejects() {
    let mut fleet = Fleet::new(scenario2_scene()).unwrap();
    let registry = standard_registry::<Fleet>(&fleet);
    let program = scenario2_program();
    let report = validate(&program, &registry, &fleet);
    assert!(report.is_valid(), "{}", report.describe_errors());
    let clock = ManualClock::new(0);

    let first = run(&program, &registry, &mut fleet, RunOptions::default(), &clock);
    assert_eq!(first.status, ExecutionStatus::Success);
    assert_eq!(first.visited_states, ["query", "apply"]);
    assert_eq!(first.outputs["total"], Value::Number(90.0));
    assert_eq!(first.outputs["delta"], Value::Number(10.0));
    assert_eq!(first.outputs["applied"].get("total"), Some(&Value::Number(100.0)));
    assert_eq!(fleet.router().unwrap().allocated(), 100);
    let before = fleet.router().unwrap().clone();

    let second = run(&program, &registry, &mut fleet, RunOptions::default(), &clock);
    assert_eq!(
        second.status,
        ExecutionStatus::Terminated { reason: "total bandwidth would exceed 100 Mbps (projected 120 Mbps)".to_string() }
    );
    assert_eq!(second.visited_states, ["query", "reject"]);
    assert_eq!(fleet.router().unwrap(), &before);
}

#[test]
fn mock_rule_files_are_json_objects() {
    for text in [MOCK_PROVIDER, FAULT_ALWAYS_INVALID, FAULT_INVALID_TWICE] {
        let v: serde_json::Value = serde_json::from_str(text).unwrap();
        let purposes: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert!(purposes
            .iter()
            .all(|p| crate::llm::Purpose::ALL.iter().any(|q| q.as_str() == *p)));
    }
}
