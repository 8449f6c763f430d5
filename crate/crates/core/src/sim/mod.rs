//! Simulated smart-home devices: a grid room, cameras, a mobile robot and a
//! bandwidth-capped router.

pub mod camera;
pub mod fleet;
pub mod grid;
pub mod router;
pub mod scene;

/// Grid coordinates `[x, y]`.
pub type Cell = [i64; 2];

pub use camera::{Observation, PersonView};
pub use fleet::{register_fleet_apis, DeviceError, Fleet, FleetAccess, MoveResult};
pub use grid::Grid;
pub use router::{RouterError, RouterState, TierCheck};
pub use scene::{Scene, SceneError};

use crate::registry::Registry;

/// Runtime built-ins, every device of `fleet` and the perception modules.
pub fn standard_registry<C: FleetAccess + 'static>(fleet: &Fleet) -> Registry<C> {
    let mut registry = Registry::new();
    crate::executor::register_runtime_apis(&mut registry);
    register_fleet_apis(&mut registry, fleet);
    crate::vision::register_vision_apis(&mut registry, &fleet.scene().enrolled, &fleet.scene().perception);
    registry
}
