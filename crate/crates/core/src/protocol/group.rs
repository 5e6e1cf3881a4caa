//! Named task groups, listed in training order.

use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::env::registry::{gravity_env_id, morphology_env_id, nav_env_id, GRAVITY_GRID, MORPHOLOGY_GRID};
use crate::env::Registry;
use crate::nav2d::{NavObsMode, MAP_COUNT};

pub const EVAL_ROLLOUTS: usize = 20;
/// Full-size per-environment iteration budget.
pub const FULL_ITERATIONS: usize = 1000;
/// Reduced budget used by the morphology groups, which have more members.
pub const FULL_MORPHOLOGY_ITERATIONS: usize = 500;
pub const DESK_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGroup {
    pub name: String,
    pub description: String,
    /// Training order.
    pub env_ids: Vec<String>,
    pub iterations_per_env: usize,
    pub eval_rollouts: usize,
}

impl TaskGroup {
    pub fn new(name: &str, description: &str, env_ids: Vec<String>, iterations_per_env: usize) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
            env_ids,
            iterations_per_env,
            eval_rollouts: EVAL_ROLLOUTS,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations_per_env = iterations;
        self
    }

    /// Checks every member is registered and all members share the
    /// observation and action dimensions, so one policy can move between them.
    pub fn validate(&self, registry: &Registry) -> Result<(), ProtocolError> {
        if self.env_ids.is_empty() {
            return Err(ProtocolError::InvalidGroup(format!("group `{}` has no environments", self.name)));
        }
        if self.eval_rollouts == 0 {
            return Err(ProtocolError::InvalidGroup("eval_rollouts must be at least 1".into()));
        }
        let mut dims = None;
        for id in &self.env_ids {
            let env = registry.make(id, 0)?;
            let d = (env.observation_space().dim(), env.action_space().dim());
            match dims {
                None => dims = Some(d),
                Some(first) if first != d => {
                    return Err(ProtocolError::InvalidGroup(format!(
                        "`{id}` has (obs, act) dims {d:?} but the group started with {first:?}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn nav_group(mode: NavObsMode, tag: &str, what: &str) -> TaskGroup {
    let ids = (0..MAP_COUNT).flat_map(|m| (0..3).map(move |g| nav_env_id(m, g, mode))).collect();
    TaskGroup::new(tag, what, ids, FULL_ITERATIONS)
}

/// All built-in groups at full-size iteration budgets.
pub fn catalogue() -> Vec<TaskGroup> {
    let gravity = GRAVITY_GRID.iter().map(|(s, _)| gravity_env_id("Hopper", s)).collect();
    let morphology = MORPHOLOGY_GRID.iter().map(|(size, part, _)| morphology_env_id("Hopper", size, *part)).collect();
    vec![
        TaskGroup::new("hopper-gravity", "hopper under five gravity scales", gravity, FULL_ITERATIONS),
        TaskGroup::new(
            "hopper-morphology",
            "hopper with one body part scaled in mass and width",
            morphology,
            FULL_MORPHOLOGY_ITERATIONS,
        ),
        TaskGroup::new(
            "hopper-sensor-wall",
            "torso range sensor, then the same sensor with a wall in the path",
            vec!["HopperWithSensor-v0".into(), "HopperWall-v0".into()],
            FULL_ITERATIONS,
        ),
        TaskGroup::new(
            "striker",
            "fixed striker task, then a randomized object start",
            vec!["Striker-v0".into(), "StrikerMovingStart-v0".into()],
            FULL_ITERATIONS,
        ),
        TaskGroup::new(
            "pusher",
            "fixed pusher task, then a randomized goal",
            vec!["Pusher-v0".into(), "PusherMovingGoal-v0".into()],
            FULL_ITERATIONS,
        ),
        nav_group(NavObsMode::State, "nav-state", "position and nearest-obstacle observations"),
        nav_group(NavObsMode::StateKnownGoal, "nav-state-known-goal", "state observations plus the goal position"),
        nav_group(NavObsMode::Range, "nav-range", "range readouts only"),
        nav_group(NavObsMode::RangeKnownPos, "nav-range-known-positions", "range readouts plus own and goal positions"),
        nav_group(NavObsMode::Image, "nav-image", "map image with agent and goal channels"),
    ]
}

pub fn find_group(name: &str) -> Result<TaskGroup, ProtocolError> {
    catalogue()
        .into_iter()
        .find(|g| g.name == name)
        .ok_or_else(|| ProtocolError::InvalidGroup(format!("unknown group `{name}`")))
}
