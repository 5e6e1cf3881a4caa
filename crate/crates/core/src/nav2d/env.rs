//! Navigation tasks: spawn, reward, observation builders and the environment.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{bundled_map, MapAsset, OccupancyGrid, MAP_COUNT};
use super::motion::integrate_motion;
use super::sensing::{nearest_obstacle, sense_rays, Pose};
use crate::env::{BoxSpace, EnvError, Environment, EpisodeClock, Info, RngState, StepResult};

pub const AGENT_RADIUS: f64 = 0.3;
pub const GOAL_RADIUS: f64 = 0.5;
pub const MAX_SPEED: f64 = 1.0;
pub const DT: f64 = 0.1;
pub const RANGE_BEAMS: usize = 30;
pub const RANGE_ARC: f64 = 2.0 * PI;
pub const RANGE_MAX: f64 = 10.0;

pub const STEP_REWARD: f64 = -1.0;
pub const COLLISION_REWARD: f64 = -5.0;
pub const GOAL_REWARD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavObsMode {
    /// Own position plus distance and bearing to the closest obstacle.
    State,
    /// `State` plus the goal coordinates.
    StateKnownGoal,
    /// Range readouts only.
    Range,
    /// Range readouts plus own and goal positions.
    RangeKnownPos,
    /// Whole-map image with agent and goal channels.
    Image,
}

impl NavObsMode {
    pub const ALL: [NavObsMode; 5] = [
        NavObsMode::State,
        NavObsMode::StateKnownGoal,
        NavObsMode::Range,
        NavObsMode::RangeKnownPos,
        NavObsMode::Image,
    ];

    fn needs_rays(self) -> bool {
        matches!(self, NavObsMode::Range | NavObsMode::RangeKnownPos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavVariation {
    pub map: usize,
    pub goal: usize,
    pub mode: NavObsMode,
}

impl NavVariation {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.map >= MAP_COUNT {
            return Err(EnvError::InvalidVariation(format!("map index {} out of range", self.map)));
        }
        if self.goal >= 3 {
            return Err(EnvError::InvalidVariation(format!("goal index {} out of range", self.goal)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub position: [f64; 2],
    pub goal: [f64; 2],
    pub step_count: usize,
    pub agent_radius: f64,
}

impl NavState {
    pub fn goal_distance(&self) -> f64 {
        (self.position[0] - self.goal[0]).hypot(self.position[1] - self.goal[1])
    }
}

/// Per-step reward: step cost, plus the collision penalty, plus the goal bonus.
pub fn nav_step_reward(collided: bool, reached_goal: bool) -> f64 {
    let mut r = STEP_REWARD;
    if collided {
        r += COLLISION_REWARD;
    }
    if reached_goal {
        r += GOAL_REWARD;
    }
    r
}

/// Draws a spawn with the map's `goal_index` goal. The agent position is
/// uniform over free space with at least `2·radius` clearance from obstacles and
/// outside the goal radius.
pub fn spawn(asset: &MapAsset, rng: &mut RngState, goal_index: usize) -> NavState {
    let grid = &asset.grid;
    let goal = asset.goals[goal_index];
    let free: Vec<(usize, usize)> = grid.free_cells().collect();
    let s = grid.cell_size();
    loop {
        let (i, j) = free[rng.random_range(0..free.len())];
        let p = [(i as f64 + rng.random::<f64>()) * s, (j as f64 + rng.random::<f64>()) * s];
        if grid.point_in_obstacle(p) {
            continue;
        }
        let (clearance, _) = nearest_obstacle(grid, p);
        let to_goal = (p[0] - goal[0]).hypot(p[1] - goal[1]);
        if clearance >= 2.0 * AGENT_RADIUS && to_goal > GOAL_RADIUS {
            return NavState { position: p, goal, step_count: 0, agent_radius: AGENT_RADIUS };
        }
    }
}

pub fn observation_dim(mode: NavObsMode, grid: &OccupancyGrid) -> usize {
    match mode {
        NavObsMode::State => 4,
        NavObsMode::StateKnownGoal => 6,
        NavObsMode::Range => RANGE_BEAMS,
        NavObsMode::RangeKnownPos => RANGE_BEAMS + 4,
        NavObsMode::Image => grid.width() * grid.height() * 3,
    }
}

fn observation_space(mode: NavObsMode, grid: &OccupancyGrid) -> BoxSpace {
    let (w, h) = grid.extent();
    let diag = w.hypot(h);
    let pos = |lo: &mut Vec<f64>, hi: &mut Vec<f64>| {
        lo.extend([0.0, 0.0]);
        hi.extend([w, h]);
    };
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    match mode {
        NavObsMode::State | NavObsMode::StateKnownGoal => {
            pos(&mut lo, &mut hi);
            lo.extend([0.0, -PI]);
            hi.extend([diag, PI]);
            if mode == NavObsMode::StateKnownGoal {
                pos(&mut lo, &mut hi);
            }
        }
        NavObsMode::Range | NavObsMode::RangeKnownPos => {
            lo.extend(std::iter::repeat_n(0.0, RANGE_BEAMS));
            hi.extend(std::iter::repeat_n(1.0, RANGE_BEAMS));
            if mode == NavObsMode::RangeKnownPos {
                pos(&mut lo, &mut hi);
                pos(&mut lo, &mut hi);
            }
        }
        NavObsMode::Image => {
            let n = observation_dim(mode, grid);
            lo = vec![0.0; n];
            hi = vec![1.0; n];
        }
    }
    BoxSpace::new(lo, hi).expect("observation bounds are ordered")
}

/// Range readouts for the agent's position (world-fixed heading 0).
pub fn range_readouts(grid: &OccupancyGrid, state: &NavState) -> Result<Vec<f64>, EnvError> {
    sense_rays(grid, Pose { position: state.position, heading: 0.0 }, RANGE_BEAMS, RANGE_ARC, RANGE_MAX)
}

/// Pure observation builder. `readouts` is only read by the range modes.
///
/// The image layout is H×W×3, row-major, channels (obstacle, agent, goal),
/// values in {0, 1}.
pub fn build_observation(mode: NavObsMode, state: &NavState, grid: &OccupancyGrid, readouts: &[f64]) -> Vec<f64> {
    let [x, y] = state.position;
    let [gx, gy] = state.goal;
    match mode {
        NavObsMode::State | NavObsMode::StateKnownGoal => {
            let (d, b) = nearest_obstacle(grid, state.position);
            let mut obs = vec![x, y, d, b];
            if mode == NavObsMode::StateKnownGoal {
                obs.extend([gx, gy]);
            }
            obs
        }
        NavObsMode::Range => readouts.to_vec(),
        NavObsMode::RangeKnownPos => {
            let mut obs = readouts.to_vec();
            obs.extend([x, y, gx, gy]);
            obs
        }
        NavObsMode::Image => {
            let (w, h) = (grid.width(), grid.height());
            let mut img = vec![0.0; w * h * 3];
            for (i, j) in grid.obstacle_cells() {
                img[(j * w + i) * 3] = 1.0;
            }
            let mut mark = |p: [f64; 2], channel: usize| {
                let (i, j) = grid.cell_of(p);
                let i = i.clamp(0, w as i64 - 1) as usize;
                let j = j.clamp(0, h as i64 - 1) as usize;
                img[(j * w + i) * 3 + channel] = 1.0;
            };
            mark(state.position, 1);
            mark(state.goal, 2);
            img
        }
    }
}

pub struct NavEnv {
    id: String,
    variation: NavVariation,
    asset: &'static MapAsset,
    obs_space: BoxSpace,
    act_space: BoxSpace,
    clock: EpisodeClock,
    rng: RngState,
    state: NavState,
    collisions: usize,
}

impl NavEnv {
    pub fn new(id: &str, variation: NavVariation, horizon: usize, seed: u64) -> Result<Self, EnvError> {
        variation.validate()?;
        let asset = bundled_map(variation.map).expect("validated map index");
        Ok(Self {
            id: id.to_string(),
            variation,
            asset,
            obs_space: observation_space(variation.mode, &asset.grid),
            act_space: BoxSpace::uniform(2, -MAX_SPEED, MAX_SPEED),
            clock: EpisodeClock::new(horizon),
            rng: RngState::new(seed),
            state: NavState {
                position: asset.goals[variation.goal],
                goal: asset.goals[variation.goal],
                step_count: 0,
                agent_radius: AGENT_RADIUS,
            },
            collisions: 0,
        })
    }

    pub fn state(&self) -> &NavState {
        &self.state
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.asset.grid
    }

    pub fn variation(&self) -> NavVariation {
        self.variation
    }

    pub fn collisions(&self) -> usize {
        self.collisions
    }

    fn observe(&self) -> Vec<f64> {
        let readouts = if self.variation.mode.needs_rays() {
            range_readouts(&self.asset.grid, &self.state).expect("agent stays in free space")
        } else {
            Vec::new()
        };
        build_observation(self.variation.mode, &self.state, &self.asset.grid, &readouts)
    }
}

impl Environment for NavEnv {
    fn id(&self) -> &str {
        &self.id
    }

    fn observation_space(&self) -> &BoxSpace {
        &self.obs_space
    }

    fn observation_shape(&self) -> Vec<usize> {
        match self.variation.mode {
            NavObsMode::Image => vec![self.asset.grid.height(), self.asset.grid.width(), 3],
            _ => vec![self.obs_space.dim()],
        }
    }

    fn action_space(&self) -> &BoxSpace {
        &self.act_space
    }

    fn horizon(&self) -> usize {
        self.clock.horizon
    }

    fn reset(&mut self) -> Vec<f64> {
        self.clock.reset();
        self.collisions = 0;
        self.state = spawn(self.asset, &mut self.rng, self.variation.goal);
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let mut info = Info::new();
        let v = self.clock.begin(&self.act_space, action, &mut info)?;
        let (p, collided) = integrate_motion(&self.asset.grid, self.state.position, AGENT_RADIUS, [v[0], v[1]], DT);
        self.state.position = p;
        self.state.step_count += 1;
        let reached = self.state.goal_distance() <= GOAL_RADIUS;
        if collided {
            self.collisions += 1;
        }
        let reward = nav_step_reward(collided, reached);
        info.insert("collided".into(), collided as u8 as f64);
        info.insert("reached_goal".into(), reached as u8 as f64);
        let done = self.clock.finish(reached, &mut info);
        Ok(StepResult { observation: self.observe(), reward, done, info })
    }
}
