//! Scene files: room layout, people, devices and router configuration.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::router::RouterState;
use super::Cell;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: i64,
    pub height: i64,
    #[serde(default)]
    pub obstacles: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonSpec {
    /// `None` for people whose face is not on record anywhere.
    pub name: Option<String>,
    pub position: Cell,
    pub face_quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coverage {
    FullRoom,
    Radius { radius: f64 },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub id: String,
    /// Fixed installation cell; absent for cameras carried by the robot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Cell>,
    /// Id of the robot carrying this camera.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mount: Option<String>,
    pub coverage: Coverage,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub description: String,
}

fn one() -> u32 {
    1
}

fn robot_id() -> String {
    "turtlebot".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    #[serde(default = "robot_id")]
    pub id: String,
    pub position: Cell,
    /// Cells per step.
    #[serde(default = "one")]
    pub speed: u32,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub description: String,
}

fn router_id() -> String {
    "router".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterSpec {
    #[serde(default = "router_id")]
    pub id: String,
    #[serde(flatten)]
    pub state: RouterState,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub class: String,
    pub position: Cell,
}

fn d_max() -> f64 {
    12.0
}
fn threshold() -> f64 {
    0.6
}
fn close_range() -> f64 {
    2.0
}

/// Camera attenuation and recognition constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perception {
    #[serde(default = "d_max")]
    pub d_max: f64,
    #[serde(default = "threshold")]
    pub recognition_threshold: f64,
    /// Robot-camera distance (cells) within which faces are seen unattenuated.
    #[serde(default = "close_range")]
    pub close_range: f64,
}

impl Default for Perception {
    fn default() -> Self {
        Perception { d_max: d_max(), recognition_threshold: threshold(), close_range: close_range() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub name: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub persons: Vec<PersonSpec>,
    /// Names with a face on record for recognition.
    #[serde(default)]
    pub enrolled: Vec<String>,
    #[serde(default)]
    pub cameras: Vec<CameraSpec>,
    #[serde(default)]
    pub robot: Option<RobotSpec>,
    #[serde(default)]
    pub router: Option<RouterSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub perception: Perception,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SceneError {
    #[error("scene does not parse: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid { path: path.into(), message: message.into() }
}

impl Scene {
    pub fn from_json_str(text: &str) -> Result<Scene, SceneError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| SceneError::Parse(alloc::string::ToString::to_string(&e)))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn in_grid(&self, [x, y]: Cell) -> bool {
        (0..self.grid.width).contains(&x) && (0..self.grid.height).contains(&y)
    }

    /// Semantic checks beyond the schema; the first violation is reported
    /// with a field path.
    pub fn validate(&self) -> Result<(), SceneError> {
        let g = &self.grid;
        if g.width <= 0 || g.height <= 0 || g.width * g.height > 1_000_000 {
            return Err(invalid("grid", format!("unsupported size {}x{}", g.width, g.height)));
        }
        for (i, c) in g.obstacles.iter().enumerate() {
            if !self.in_grid(*c) {
                return Err(invalid(format!("grid.obstacles[{i}]"), format!("{c:?} is outside the grid")));
            }
        }
        for (i, p) in self.persons.iter().enumerate() {
            if !self.in_grid(p.position) {
                return Err(invalid(format!("persons[{i}].position"), format!("{:?} is outside the grid", p.position)));
            }
            if !(0.0..=1.0).contains(&p.face_quality) {
                return Err(invalid(format!("persons[{i}].face_quality"), "must be within [0, 1]"));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !self.in_grid(o.position) {
                return Err(invalid(format!("objects[{i}].position"), "outside the grid"));
            }
        }
        let mut ids = BTreeSet::new();
        let mut claim = |id: &str, path: String| {
            if ids.insert(String::from(id)) {
                Ok(())
            } else {
                Err(invalid(path, format!("duplicate device id `{id}`")))
            }
        };
        if let Some(r) = &self.robot {
            claim(&r.id, "robot.id".into())?;
            if !self.in_grid(r.position) {
                return Err(invalid("robot.position", "outside the grid"));
            }
            if g.obstacles.contains(&r.position) {
                return Err(invalid("robot.position", "robot starts on an obstacle"));
            }
            if r.speed == 0 {
                return Err(invalid("robot.speed", "must be positive"));
            }
        }
        for (i, c) in self.cameras.iter().enumerate() {
            claim(&c.id, format!("cameras[{i}].id"))?;
            match (&c.position, &c.mount) {
                (Some(p), None) if self.in_grid(*p) => {}
                (Some(_), None) => return Err(invalid(format!("cameras[{i}].position"), "outside the grid")),
                (None, Some(m)) if self.robot.as_ref().is_some_and(|r| &r.id == m) => {}
                (None, Some(m)) => return Err(invalid(format!("cameras[{i}].mount"), format!("no robot `{m}`"))),
                _ => return Err(invalid(format!("cameras[{i}]"), "needs exactly one of `position` or `mount`")),
            }
            if let Coverage::Radius { radius } = c.coverage {
                if !(radius > 0.0) {
                    return Err(invalid(format!("cameras[{i}].coverage.radius"), "must be positive"));
                }
            }
        }
        if let Some(r) = &self.router {
            claim(&r.id, "router.id".into())?;
            let s = &r.state;
            for (user, tier) in &s.users {
                if !s.tiers.contains_key(tier) {
                    return Err(invalid(format!("router.users.{user}"), format!("unknown tier `{tier}`")));
                }
            }
            if s.allocated() > s.total_mbps {
                return Err(invalid(
                    "router.users",
                    format!("allocation {} Mbps exceeds total {} Mbps", s.allocated(), s.total_mbps),
                ));
            }
        }
        let p = &self.perception;
        if !(p.d_max > 0.0) || !(0.0..=1.0).contains(&p.recognition_threshold) || !(p.close_range >= 0.0) {
            return Err(invalid("perception", "d_max must be positive, threshold within [0, 1], close_range >= 0"));
        }
        Ok(())
    }

    /// People per name, for quick lookups in tests and tools.
    pub fn named_persons(&self) -> BTreeMap<&str, &PersonSpec> {
        self.persons.iter().filter_map(|p| Some((p.name.as_deref()?, p))).collect()
    }
}
