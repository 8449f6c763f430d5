//! The live device fleet built from a scene, and its API registration.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::camera::{observe, Observation};
use super::grid::Grid;
use super::router::{RouterError, RouterState};
use super::scene::{CameraSpec, Coverage, Scene, SceneError};
use super::Cell;
use crate::memory::{DeviceDescriptor, EnvironmentInfo, Location, ModuleDescriptor};
use crate::program::ApiFunctionDescriptor;
use crate::registry::{ApiError, Registry};
use crate::value::{Kind, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{0}` is powered off")]
    Disabled(String),
    #[error("target {0:?} is outside the room")]
    OutOfGrid(Cell),
    #[error(transparent)]
    Router(#[from] RouterError),
}

impl From<DeviceError> for ApiError {
    fn from(e: DeviceError) -> Self {
        ApiError::new(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveResult {
    pub arrived: bool,
    pub path: Vec<Cell>,
    pub position: Cell,
}

#[derive(Debug, Clone, PartialEq)]
struct Robot {
    id: String,
    position: Cell,
    enabled: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Router {
    id: String,
    state: RouterState,
    enabled: bool,
}

/// Mutable device state. All operations are synchronous; callers that share
/// a fleet across threads serialize access (see [`FleetAccess`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    scene: Scene,
    grid: Grid,
    robot: Option<Robot>,
    cameras: Vec<CameraSpec>,
    router: Option<Router>,
    captures: u64,
}

impl Fleet {
    pub fn new(scene: Scene) -> Result<Fleet, SceneError> {
        scene.validate()?;
        let grid = Grid::new(scene.grid.width, scene.grid.height, scene.grid.obstacles.iter().copied());
        let robot = scene.robot.as_ref().map(|r| Robot { id: r.id.clone(), position: r.position, enabled: r.enabled });
        let router = scene
            .router
            .as_ref()
            .map(|r| Router { id: r.id.clone(), state: r.state.clone(), enabled: r.enabled });
        Ok(Fleet { cameras: scene.cameras.clone(), scene, grid, robot, router, captures: 0 })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn camera_ids(&self) -> impl Iterator<Item = &str> {
        self.cameras.iter().map(|c| c.id.as_str())
    }

    pub fn robot_id(&self) -> Option<&str> {
        self.robot.as_ref().map(|r| r.id.as_str())
    }

    pub fn router_id(&self) -> Option<&str> {
        self.router.as_ref().map(|r| r.id.as_str())
    }

    pub fn device_ids(&self) -> Vec<String> {
        self.camera_ids()
            .chain(self.robot_id())
            .chain(self.router_id())
            .map(String::from)
            .collect()
    }

    /// `None` for ids that are not devices of this fleet.
    pub fn is_alive(&self, id: &str) -> Option<bool> {
        if let Some(c) = self.cameras.iter().find(|c| c.id == id) {
            let carrier_up = match &c.mount {
                Some(_) => self.robot.as_ref().is_some_and(|r| r.enabled),
                None => true,
            };
            return Some(c.enabled && carrier_up);
        }
        if let Some(r) = self.robot.as_ref().filter(|r| r.id == id) {
            return Some(r.enabled);
        }
        self.router.as_ref().filter(|r| r.id == id).map(|r| r.enabled)
    }

    pub fn set_enabled(&mut self, id: &str, enabled: bool) -> Result<(), DeviceError> {
        if let Some(c) = self.cameras.iter_mut().find(|c| c.id == id) {
            c.enabled = enabled;
        } else if let Some(r) = self.robot.as_mut().filter(|r| r.id == id) {
            r.enabled = enabled;
        } else if let Some(r) = self.router.as_mut().filter(|r| r.id == id) {
            r.enabled = enabled;
        } else {
            return Err(DeviceError::UnknownDevice(id.into()));
        }
        Ok(())
    }

    fn require_alive(&self, id: &str) -> Result<(), DeviceError> {
        match self.is_alive(id) {
            Some(true) => Ok(()),
            Some(false) => Err(DeviceError::Disabled(id.into())),
            None => Err(DeviceError::UnknownDevice(id.into())),
        }
    }

    pub fn capture(&mut self, camera_id: &str) -> Result<Observation, DeviceError> {
        self.require_alive(camera_id)?;
        let cam = self.cameras.iter().find(|c| c.id == camera_id).expect("checked above");
        let (at, mounted) = match (cam.position, &self.robot) {
            (Some(p), _) => (p, false),
            (None, Some(r)) => (r.position, true),
            (None, None) => return Err(DeviceError::UnknownDevice(camera_id.into())),
        };
        self.captures += 1;
        Ok(observe(
            camera_id,
            at,
            cam.coverage,
            mounted,
            &self.scene.persons,
            &self.scene.objects,
            &self.scene.perception,
            self.captures,
        ))
    }

    fn robot_mut(&mut self) -> Result<&mut Robot, DeviceError> {
        let id = self.robot_id().ok_or_else(|| DeviceError::UnknownDevice("robot".into()))?.to_string();
        self.require_alive(&id)?;
        Ok(self.robot.as_mut().expect("checked above"))
    }

    /// Plan a shortest path and drive there; `arrived` is false when the
    /// target is blocked or walled off.
    pub fn move_to(&mut self, target: Cell) -> Result<MoveResult, DeviceError> {
        if !self.grid.in_bounds(target) {
            return Err(DeviceError::OutOfGrid(target));
        }
        let grid = self.grid.clone();
        let robot = self.robot_mut()?;
        Ok(match grid.bfs_path(robot.position, target) {
            Some(path) => {
                robot.position = target;
                MoveResult { arrived: true, path, position: target }
            }
            None => MoveResult { arrived: false, path: Vec::new(), position: robot.position },
        })
    }

    pub fn robot_position(&self) -> Result<Cell, DeviceError> {
        let r = self.robot.as_ref().ok_or_else(|| DeviceError::UnknownDevice("robot".into()))?;
        self.require_alive(&r.id)?;
        Ok(r.position)
    }

    pub fn router(&self) -> Result<&RouterState, DeviceError> {
        let r = self.router.as_ref().ok_or_else(|| DeviceError::UnknownDevice("router".into()))?;
        self.require_alive(&r.id)?;
        Ok(&r.state)
    }

    pub fn router_mut(&mut self) -> Result<&mut RouterState, DeviceError> {
        let id = self.router_id().ok_or_else(|| DeviceError::UnknownDevice("router".into()))?.to_string();
        self.require_alive(&id)?;
        Ok(&mut self.router.as_mut().expect("checked above").state)
    }

    /// Devices, modules and room facts for the model's context.
    pub fn environment_info(&self) -> EnvironmentInfo {
        let mut devices = Vec::new();
        for c in &self.cameras {
            let (location, default_desc) = match (&c.position, &c.mount) {
                (Some(p), _) => (Location::Cell(*p), "ceiling security camera covering the whole room".to_string()),
                (None, Some(m)) => (
                    Location::Named(format!("mounted on {m}")),
                    match c.coverage {
                        Coverage::Radius { radius } => format!("camera on the robot, sees people within {radius} cells"),
                        Coverage::FullRoom => "camera on the robot".to_string(),
                    },
                ),
                (None, None) => (Location::Named("unknown".into()), String::new()),
            };
            devices.push(DeviceDescriptor {
                id: c.id.clone(),
                kind: "camera".into(),
                location,
                description: if c.description.is_empty() { default_desc } else { c.description.clone() },
            });
        }
        if let Some(spec) = &self.scene.robot {
            devices.push(DeviceDescriptor {
                id: spec.id.clone(),
                kind: "mobile_robot".into(),
                location: Location::Named("mobile".into()),
                description: if spec.description.is_empty() {
                    "mobile robot that plans obstacle-free paths to a target cell".into()
                } else {
                    spec.description.clone()
                },
            });
        }
        if let Some(spec) = &self.scene.router {
            devices.push(DeviceDescriptor {
                id: spec.id.clone(),
                kind: "wifi_router".into(),
                location: Location::Named("network".into()),
                description: if spec.description.is_empty() {
                    "WiFi router that caps each user's bandwidth by tier".into()
                } else {
                    spec.description.clone()
                },
            });
        }
        let modules = alloc::vec![
            ModuleDescriptor {
                id: "object_detection".into(),
                capability: "detects objects of a given class (for example people) in camera observations".into(),
            },
            ModuleDescriptor {
                id: "face_recognition".into(),
                capability: "identifies enrolled people from faces in camera observations".into(),
            },
        ];
        let mut notes = alloc::vec![format!(
            "The room is a {} x {} grid of cells; positions are [x, y].",
            self.scene.grid.width, self.scene.grid.height
        )];
        if let Some(r) = &self.scene.router {
            let tiers: Vec<String> = r.state.ladder().iter().map(|(n, m)| format!("{n} {m} Mbps")).collect();
            notes.push(format!(
                "The shared network is limited to {} Mbps. Tiers: {}.",
                r.state.total_mbps,
                tiers.join(", ")
            ));
        }
        notes.extend(self.scene.notes.iter().cloned());
        EnvironmentInfo { devices, modules, notes }
    }

    /// JSON view of all device state for dashboards.
    pub fn snapshot(&self) -> serde_json::Value {
        let cameras: Vec<serde_json::Value> = self
            .cameras
            .iter()
            .map(|c| {
                let position = c.position.or_else(|| self.robot.as_ref().map(|r| r.position));
                json!({"id": c.id, "position": position, "enabled": self.is_alive(&c.id)})
            })
            .collect();
        let persons: Vec<serde_json::Value> = self
            .scene
            .persons
            .iter()
            .map(|p| json!({"name": p.name, "position": p.position}))
            .collect();
        let robot = self
            .robot
            .as_ref()
            .map(|r| json!({"id": r.id, "position": r.position, "enabled": r.enabled}));
        let router = self.router.as_ref().map(|r| {
            let users: serde_json::Map<String, serde_json::Value> = r
                .state
                .users
                .iter()
                .map(|(u, t)| (u.clone(), json!({"tier": t, "mbps": r.state.tiers.get(t)})))
                .collect();
            json!({
                "id": r.id,
                "enabled": r.enabled,
                "total_mbps": r.state.total_mbps,
                "allocated_mbps": r.state.allocated(),
                "users": users,
            })
        });
        json!({
            "grid": {
                "width": self.grid.width,
                "height": self.grid.height,
                "obstacles": self.grid.obstacles().collect::<Vec<_>>(),
            },
            "persons": persons,
            "cameras": cameras,
            "robot": robot,
            "router": router,
        })
    }
}

/// How registry handlers reach a fleet: directly when owned, through a
/// lock when shared.
pub trait FleetAccess {
    fn read<R>(&self, f: impl FnOnce(&Fleet) -> R) -> R;
    fn write<R>(&mut self, f: impl FnOnce(&mut Fleet) -> R) -> R;
}

impl FleetAccess for Fleet {
    fn read<R>(&self, f: impl FnOnce(&Fleet) -> R) -> R {
        f(self)
    }

    fn write<R>(&mut self, f: impl FnOnce(&mut Fleet) -> R) -> R {
        f(self)
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    Value::from_json(&serde_json::to_value(v).expect("device results serialize"))
}

fn arg_cell(args: &[Value]) -> Result<Cell, ApiError> {
    let coord = |v: &Value| v.as_i64().ok_or_else(|| ApiError::new(format!("coordinate {v} is not an integer")));
    Ok([coord(&args[0])?, coord(&args[1])?])
}

fn arg_str(v: &Value) -> Result<&str, ApiError> {
    v.as_str().ok_or_else(|| ApiError::new(format!("{v} is not a string")))
}

/// Descriptors for every device in `fleet`.
pub fn fleet_descriptors(fleet: &Fleet) -> Vec<ApiFunctionDescriptor> {
    let mut out = Vec::new();
    for c in &fleet.cameras {
        out.push(
            ApiFunctionDescriptor::new(&c.id, "capture", &[], Kind::Record).latency(150).describe(
                "Take a photo; returns an observation record {camera_id, taken_at, persons_in_view: [{position, apparent_face_quality}], objects_in_view}.",
            ),
        );
    }
    if let Some(id) = fleet.robot_id() {
        out.push(
            ApiFunctionDescriptor::new(id, "move_to", &[("x", Kind::Number), ("y", Kind::Number)], Kind::Record)
                .latency(2000)
                .describe("Drive to cell [x, y] avoiding obstacles; returns {arrived, path, position}."),
        );
        out.push(
            ApiFunctionDescriptor::new(id, "position", &[], Kind::List)
                .latency(20)
                .describe("Current cell [x, y] of the robot."),
        );
    }
    if let Some(id) = fleet.router_id() {
        out.push(
            ApiFunctionDescriptor::new(id, "rates", &[], Kind::Record)
                .latency(50)
                .describe("Per-user allocation: {user: {tier, mbps}}."),
        );
        out.push(
            ApiFunctionDescriptor::new(id, "total", &[], Kind::Number)
                .latency(50)
                .describe("Sum of all users' tier rates in Mbps."),
        );
        out.push(
            ApiFunctionDescriptor::new(id, "next_tier", &[("user", Kind::String)], Kind::Record)
                .latency(50)
                .describe("Next faster tier for the user: {tier, mbps, delta}; tier is \"\" when already at the top."),
        );
        out.push(
            ApiFunctionDescriptor::new(id, "check_tier", &[("user", Kind::String), ("tier", Kind::String)], Kind::Record)
                .latency(50)
                .describe("Dry run of set_tier: {ok, projected, limit, reason}."),
        );
        out.push(
            ApiFunctionDescriptor::new(id, "set_tier", &[("user", Kind::String), ("tier", Kind::String)], Kind::Record)
                .latency(300)
                .describe("Move the user to a tier if the total stays within the limit; otherwise the program terminates with the reason. Returns {user, from, tier, mbps, total}.")
                .terminating(),
        );
    }
    out
}

/// Register handlers, liveness probes and the snapshot for every device.
pub fn register_fleet_apis<C: FleetAccess + 'static>(registry: &mut Registry<C>, fleet: &Fleet) {
    for d in fleet_descriptors(fleet) {
        let owner = d.owner.clone();
        let name = d.name.clone();
        let result = match name.as_str() {
            "capture" => registry.register_api(d, move |c: &mut C, _: &[Value]| {
                c.write(|f| f.capture(&owner)).map(|o| o.to_value()).map_err(Into::into)
            }),
            "move_to" => registry.register_api(d, |c: &mut C, args: &[Value]| {
                let target = arg_cell(args)?;
                c.write(|f| f.move_to(target)).map(|m| to_value(&m)).map_err(Into::into)
            }),
            "position" => registry.register_api(d, |c: &mut C, _: &[Value]| {
                c.read(|f| f.robot_position()).map(|p| to_value(&p)).map_err(Into::into)
            }),
            "rates" => registry.register_api(d, |c: &mut C, _: &[Value]| {
                c.read(|f| {
                    let r = f.router()?;
                    Ok(Value::Record(
                        r.users
                            .iter()
                            .map(|(u, t)| {
                                let mbps = r.rate(t).unwrap_or(0);
                                (u.clone(), crate::value::record([("tier", Value::str(t.as_str())), ("mbps", Value::from(mbps as i64))]))
                            })
                            .collect(),
                    ))
                })
                .map_err(|e: DeviceError| e.into())
            }),
            "total" => registry.register_api(d, |c: &mut C, _: &[Value]| {
                c.read(|f| f.router().map(|r| Value::from(r.allocated() as i64))).map_err(Into::into)
            }),
            "next_tier" => registry.register_api(d, |c: &mut C, args: &[Value]| {
                let user = arg_str(&args[0])?;
                c.read(|f| -> Result<Value, DeviceError> {
                    let r = f.router()?;
                    let current = r.rate(r.user_tier(user)?)?;
                    let (tier, mbps) = r.next_tier(user)?.unwrap_or(("", current));
                    Ok(crate::value::record([
                        ("tier", Value::str(tier)),
                        ("mbps", Value::from(mbps as i64)),
                        ("delta", Value::from(mbps as i64 - current as i64)),
                    ]))
                })
                .map_err(Into::into)
            }),
            "check_tier" => registry.register_api(d, |c: &mut C, args: &[Value]| {
                let (user, tier) = (arg_str(&args[0])?, arg_str(&args[1])?);
                c.read(|f| -> Result<Value, DeviceError> { Ok(to_value(&f.router()?.check(user, tier)?)) })
                    .map_err(Into::into)
            }),
            _ => registry.register_api(d, |c: &mut C, args: &[Value]| {
                let (user, tier) = (arg_str(&args[0])?, arg_str(&args[1])?);
                c.write(|f| -> Result<Value, DeviceError> {
                    let r = f.router_mut()?;
                    let from = String::from(r.user_tier(user)?);
                    let total = r.set_tier(user, tier)?;
                    Ok(crate::value::record([
                        ("user", Value::str(user)),
                        ("from", Value::str(from)),
                        ("tier", Value::str(tier)),
                        ("mbps", Value::from(r.rate(tier)? as i64)),
                        ("total", Value::from(total as i64)),
                    ]))
                })
                .map_err(Into::into)
            }),
        };
        result.expect("device apis registered once");
    }
    for id in fleet.device_ids() {
        let probe_id = id.clone();
        registry.register_liveness(&id, move |c: &C| c.read(|f| f.is_alive(&probe_id).unwrap_or(false)));
    }
    registry.set_snapshot(|c: &C| c.read(Fleet::snapshot));
}
