//! Camera observations with distance attenuation.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::scene::{Coverage, ObjectSpec, Perception, PersonSpec};
use super::Cell;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonView {
    pub position: Cell,
    pub apparent_face_quality: f64,
    /// Ground-truth stand-in for the face pixels: the enrolled name this face
    /// would match, if any. Only the recognition mock reads it.
    pub face_signature: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub class: String,
    pub position: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub camera_id: String,
    /// Capture counter of the fleet (monotonic, deterministic).
    pub taken_at: u64,
    pub persons_in_view: Vec<PersonView>,
    #[serde(default)]
    pub objects_in_view: Vec<ObjectView>,
}

impl Observation {
    pub fn to_value(&self) -> Value {
        Value::from_json(&serde_json::to_value(self).expect("observations serialize"))
    }

    pub fn from_value(v: &Value) -> Result<Observation, String> {
        serde_json::from_value(v.to_json()).map_err(|e| alloc::format!("not an observation: {e}"))
    }
}

pub fn distance(a: Cell, b: Cell) -> f64 {
    let dx = (a[0] - b[0]) as f64;
    let dy = (a[1] - b[1]) as f64;
    libm::sqrt(dx * dx + dy * dy)
}

fn round3(x: f64) -> f64 {
    libm::round(x * 1000.0) / 1000.0
}

/// Attenuated face quality for a camera at distance `d`. Mounted cameras
/// see faces unattenuated within `close_range`.
pub fn apparent_quality(quality: f64, d: f64, mounted: bool, p: &Perception) -> f64 {
    let effective = if mounted { (d - p.close_range).max(0.0) } else { d };
    round3((quality * (1.0 - effective / p.d_max).max(0.0)).clamp(0.0, 1.0))
}

pub fn in_coverage(coverage: Coverage, d: f64) -> bool {
    match coverage {
        Coverage::FullRoom => true,
        Coverage::Radius { radius } => d <= radius,
    }
}

pub fn observe(
    camera_id: &str,
    at: Cell,
    coverage: Coverage,
    mounted: bool,
    persons: &[PersonSpec],
    objects: &[ObjectSpec],
    perception: &Perception,
    taken_at: u64,
) -> Observation {
    let persons_in_view = persons
        .iter()
        .filter_map(|p| {
            let d = distance(at, p.position);
            in_coverage(coverage, d).then(|| PersonView {
                position: p.position,
                apparent_face_quality: apparent_quality(p.face_quality, d, mounted, perception),
                face_signature: p.name.clone(),
            })
        })
        .collect();
    let objects_in_view = objects
        .iter()
        .filter(|o| in_coverage(coverage, distance(at, o.position)))
        .map(|o| ObjectView { class: o.class.clone(), position: o.position })
        .collect();
    Observation { camera_id: camera_id.into(), taken_at, persons_in_view, objects_in_view }
}
