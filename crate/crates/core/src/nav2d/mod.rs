//! Continuous 2D navigation on occupancy-grid maps.
//!
//! A disc agent commands a bounded x/y velocity. Each step costs −1, a
//! collision costs another −5, and reaching the goal pays +10 and ends the
//! episode. Five observation modalities are offered, from full state to range
//! beams only to a whole-map image.

pub mod env;
pub mod grid;
pub mod motion;
pub mod sensing;

pub use env::{
    build_observation, nav_step_reward, spawn, NavEnv, NavObsMode, NavState, NavVariation, AGENT_RADIUS, GOAL_RADIUS,
};
pub use grid::{bundled_map, load_map, parse_map_asset, MapAsset, OccupancyGrid, MAP_COUNT};
pub use motion::{disc_overlaps_obstacle, integrate_motion};
pub use sensing::{nearest_obstacle, raycast, sense_rays, Pose};
