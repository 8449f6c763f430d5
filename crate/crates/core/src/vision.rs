//! Mock perception modules: object detection and face recognition over
//! camera observations.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::program::ApiFunctionDescriptor;
use crate::registry::{ApiError, Registry};
use crate::sim::camera::{Observation, PersonView};
use crate::sim::fleet::to_value;
use crate::sim::scene::Perception;
use crate::sim::Cell;
use crate::value::{Kind, Value};

pub const DETECTION_OWNER: &str = "object_detection";
pub const RECOGNITION_OWNER: &str = "face_recognition";

const PERSON_CONFIDENCE: f64 = 0.99;
const OBJECT_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: String,
    pub position: Cell,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub known: bool,
    /// Empty when not recognized.
    pub name: String,
    pub position: Cell,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    pub known: Vec<String>,
    pub unknown: Vec<Cell>,
    pub faces: Vec<Face>,
}

/// One view per person position across all observations, keeping the
/// sharpest face; ordered by first appearance.
pub fn merge_observations(observations: &[Observation]) -> Vec<PersonView> {
    let mut merged: Vec<PersonView> = Vec::new();
    for view in observations.iter().flat_map(|o| &o.persons_in_view) {
        match merged.iter_mut().find(|m| m.position == view.position) {
            Some(m) if view.apparent_face_quality > m.apparent_face_quality => *m = view.clone(),
            Some(_) => {}
            None => merged.push(view.clone()),
        }
    }
    merged
}

pub fn detect_objects(observations: &[Observation], class: &str) -> Vec<Detection> {
    if class.eq_ignore_ascii_case("person") {
        return merge_observations(observations)
            .into_iter()
            .map(|p| Detection { class: "person".into(), position: p.position, confidence: PERSON_CONFIDENCE })
            .collect();
    }
    let mut seen = BTreeSet::new();
    observations
        .iter()
        .flat_map(|o| &o.objects_in_view)
        .filter(|o| o.class.eq_ignore_ascii_case(class) && seen.insert(o.position))
        .map(|o| Detection { class: o.class.clone(), position: o.position, confidence: OBJECT_CONFIDENCE })
        .collect()
}

fn face(view: &PersonView, enrolled: &BTreeSet<String>, threshold: f64) -> Face {
    let name = view
        .face_signature
        .as_ref()
        .filter(|n| enrolled.contains(*n) && view.apparent_face_quality >= threshold);
    Face {
        known: name.is_some(),
        name: name.cloned().unwrap_or_default(),
        position: view.position,
        quality: view.apparent_face_quality,
    }
}

pub fn recognize_faces(observations: &[Observation], enrolled: &BTreeSet<String>, threshold: f64) -> Recognition {
    let faces: Vec<Face> = merge_observations(observations).iter().map(|v| face(v, enrolled, threshold)).collect();
    let mut known: Vec<String> = Vec::new();
    let mut unknown = Vec::new();
    for f in &faces {
        if !f.known {
            unknown.push(f.position);
        } else if !known.contains(&f.name) {
            known.push(f.name.clone());
        }
    }
    Recognition { known, unknown, faces }
}

/// Recognition restricted to the person standing at `position`.
pub fn identify_at(observations: &[Observation], position: Cell, enrolled: &BTreeSet<String>, threshold: f64) -> Face {
    merge_observations(observations)
        .iter()
        .find(|v| v.position == position)
        .map(|v| face(v, enrolled, threshold))
        .unwrap_or(Face { known: false, name: String::new(), position, quality: 0.0 })
}

/// Accepts a list of observation records or a single record.
fn arg_observations(v: &Value) -> Result<Vec<Observation>, ApiError> {
    let items: &[Value] = match v {
        Value::List(items) => items,
        other => core::slice::from_ref(other),
    };
    items.iter().map(|o| Observation::from_value(o).map_err(ApiError::new)).collect()
}

fn arg_cell(v: &Value) -> Result<Cell, ApiError> {
    match v.as_list() {
        Some([x, y]) => match (x.as_i64(), y.as_i64()) {
            (Some(x), Some(y)) => Ok([x, y]),
            _ => Err(ApiError::new(format!("{v} is not an integer position"))),
        },
        _ => Err(ApiError::new(format!("{v} is not a position [x, y]"))),
    }
}

pub fn vision_descriptors() -> Vec<ApiFunctionDescriptor> {
    alloc::vec![
        ApiFunctionDescriptor::new(DETECTION_OWNER, "detect", &[("observations", Kind::List), ("class", Kind::String)], Kind::List)
            .latency(200)
            .describe("Detect objects of a class (e.g. \"person\") in a list of observations; one entry {class, position, confidence} per distinct position."),
        ApiFunctionDescriptor::new(RECOGNITION_OWNER, "identify", &[("observations", Kind::List)], Kind::Record)
            .latency(300)
            .describe("Recognize faces in a list of observations: {known: [names], unknown: [positions], faces: [{known, name, position, quality}]}."),
        ApiFunctionDescriptor::new(RECOGNITION_OWNER, "identify_at", &[("observations", Kind::List), ("position", Kind::List)], Kind::Record)
            .latency(300)
            .describe("Recognize the person at a position: {known, name, position, quality}."),
    ]
}

pub fn register_vision_apis<C: 'static>(registry: &mut Registry<C>, enrolled: &[String], perception: &Perception) {
    let enrolled: BTreeSet<String> = enrolled.iter().cloned().collect();
    let threshold = perception.recognition_threshold;
    let mut descriptors = vision_descriptors().into_iter();
    let detect = descriptors.next().expect("three descriptors");
    registry
        .register_api(detect, |_: &mut C, args: &[Value]| {
            let obs = arg_observations(&args[0])?;
            let class = args[1].as_str().ok_or_else(|| ApiError::new("class must be a string"))?;
            Ok(to_value(&detect_objects(&obs, class)))
        })
        .expect("vision apis registered once");
    let names = enrolled.clone();
    registry
        .register_api(descriptors.next().expect("three descriptors"), move |_: &mut C, args: &[Value]| {
            Ok(to_value(&recognize_faces(&arg_observations(&args[0])?, &names, threshold)))
        })
        .expect("vision apis registered once");
    registry
        .register_api(descriptors.next().expect("three descriptors"), move |_: &mut C, args: &[Value]| {
            let obs = arg_observations(&args[0])?;
            Ok(to_value(&identify_at(&obs, arg_cell(&args[1])?, &enrolled, threshold)))
        })
        .expect("vision apis registered once");
}
