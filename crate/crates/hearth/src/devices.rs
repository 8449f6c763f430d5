//! Scene loading and the thread-safe device fleet.

use std::path::Path;
use std::sync::{Arc, Mutex};

use anyhow::Context;
use hearth_core::sim::{Fleet, FleetAccess, Scene};

/// Parse and check a scene file. Errors name the file and the field path.
pub fn load_scene(path: &Path) -> anyhow::Result<Scene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read scene file {}", path.display()))?;
    parse_scene(&text).with_context(|| format!("in scene file {}", path.display()))
}

pub fn parse_scene(text: &str) -> anyhow::Result<Scene> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scene: Scene = serde_path_to_error::deserialize(de)?;
    scene.validate()?;
    Ok(scene)
}

/// A fleet shared between sessions and the device facade. Each closure runs
/// under the lock, so every device operation is serialized.
#[derive(Debug, Clone)]
pub struct SharedFleet(Arc<Mutex<Fleet>>);

impl SharedFleet {
    pub fn new(fleet: Fleet) -> SharedFleet {
        SharedFleet(Arc::new(Mutex::new(fleet)))
    }

    pub fn from_scene(scene: Scene) -> anyhow::Result<SharedFleet> {
        Ok(Self::new(Fleet::new(scene)?))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Fleet> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl FleetAccess for SharedFleet {
    fn read<R>(&self, f: impl FnOnce(&Fleet) -> R) -> R {
        f(&self.lock())
    }

    fn write<R>(&mut self, f: impl FnOnce(&mut Fleet) -> R) -> R {
        f(&mut self.lock())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_errors_carry_a_path() {
        let mut v: serde_json::Value = serde_json::from_str(hearth_core::fixtures::SCENARIO1_SCENE).unwrap();
        v["persons"][2]["face_quality"] = serde_json::json!("high");
        let err = format!("{:#}", parse_scene(&v.to_string()).unwrap_err());
        assert!(err.contains("persons[2].face_quality"), "{err}");

        v["persons"][2]["face_quality"] = serde_json::json!(0.5);
        v["robot"]["position"] = serde_json::json!([40, 1]);
        let err = format!("{:#}", parse_scene(&v.to_string()).unwrap_err());
        assert!(err.contains("robot.position"), "{err}");
    }
}
