//! Bundled scenes, reference programs and the mock provider rule file for
//! the two demonstration scenarios.

use crate::program::FsmProgram;
use crate::sim::{Scene, SceneError};

pub const SCENARIO1_SCENE: &str = include_str!("../fixtures/scenario1.scene.json");
pub const SCENARIO1_ROBOT_OFF_SCENE: &str = include_str!("../fixtures/scenario1.robot-off.scene.json");
pub const SCENARIO2_SCENE: &str = include_str!("../fixtures/scenario2.scene.json");
pub const SCENARIO1_PROGRAM: &str = include_str!("../fixtures/scenario1.program.json");
pub const SCENARIO2_PROGRAM: &str = include_str!("../fixtures/scenario2.program.json");
pub const MOCK_PROVIDER: &str = include_str!("../fixtures/mock_provider.json");
pub const FAULT_ALWAYS_INVALID: &str = include_str!("../fixtures/faults/always_invalid.json");
pub const FAULT_INVALID_TWICE: &str = include_str!("../fixtures/faults/invalid_twice.json");

pub const SCENARIO1_INSTRUCTION: &str =
    "Can you help me to count the number of people in the room and identify who they are?";
pub const SCENARIO2_INSTRUCTION: &str = "Can you improve my internet speed? My movie has a slight lag.";
pub const SCENARIO1_SUMMARY: &str = "Count people in room, identify them.";
pub const SCENARIO2_SUMMARY: &str = "Improve internet speed for Eason.";

pub fn scenario1_scene() -> Scene {
    Scene::from_json_str(SCENARIO1_SCENE).expect("bundled scene is valid")
}

pub fn scenario1_robot_off_scene() -> Scene {
    Scene::from_json_str(SCENARIO1_ROBOT_OFF_SCENE).expect("bundled scene is valid")
}

pub fn scenario2_scene() -> Scene {
    Scene::from_json_str(SCENARIO2_SCENE).expect("bundled scene is valid")
}

pub fn scene_by_name(name: &str) -> Option<Result<Scene, SceneError>> {
    let text = match name {
        "scenario1" => SCENARIO1_SCENE,
        "scenario1-robot-off" => SCENARIO1_ROBOT_OFF_SCENE,
        "scenario2" => SCENARIO2_SCENE,
        _ => return None,
    };
    Some(Scene::from_json_str(text))
}

pub fn scenario1_program() -> FsmProgram {
    serde_json::from_str(SCENARIO1_PROGRAM).expect("bundled program parses")
}

pub fn scenario2_program() -> FsmProgram {
    serde_json::from_str(SCENARIO2_PROGRAM).expect("bundled program parses")
}

#[cfg(test)]
mod tests;
