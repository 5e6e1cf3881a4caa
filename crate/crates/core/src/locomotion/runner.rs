//! Planar hopper: model construction, variations, reward and environment.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{Base, ChainState, ContactParams, Link, PlanarChain, Terrain, WallBox};
use crate::env::{BoxSpace, EnvError, Environment, EpisodeClock, Info, RngState, StepResult};

pub const EARTH_GRAVITY: f64 = -9.81;
pub const CONTROL_DT: f64 = 0.01;
pub const SUBSTEPS: usize = 10;
pub const INTERNAL_DT: f64 = CONTROL_DT / SUBSTEPS as f64;
pub const ALIVE_BONUS: f64 = 1.0;
pub const CONTROL_COST: f64 = 1e-3;
pub const FALL_FRACTION: f64 = 0.7;
pub const PITCH_LIMIT: f64 = 1.0;
pub const VELOCITY_CAP: f64 = 500.0;
pub const OBS_VELOCITY_CLIP: f64 = 10.0;
pub const RESET_NOISE: f64 = 5e-3;
pub const WALL_RANGE: (f64, f64) = (1.8, 3.8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BodyPart {
    Torso,
    Thigh,
    Leg,
    Foot,
}

impl BodyPart {
    pub const ALL: [BodyPart; 4] = [BodyPart::Torso, BodyPart::Thigh, BodyPart::Leg, BodyPart::Foot];

    pub fn label(self) -> &'static str {
        match self {
            BodyPart::Torso => "Torso",
            BodyPart::Thigh => "Thigh",
            BodyPart::Leg => "Leg",
            BodyPart::Foot => "Foot",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartScale {
    pub mass_scale: f64,
    pub width_scale: f64,
}

impl PartScale {
    pub const IDENTITY: PartScale = PartScale { mass_scale: 1.0, width_scale: 1.0 };

    pub fn uniform(s: f64) -> Self {
        Self { mass_scale: s, width_scale: s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallConfig {
    pub enabled: bool,
    pub height: f64,
    pub thickness: f64,
}

impl Default for WallConfig {
    fn default() -> Self {
        Self { enabled: true, height: 0.5, thickness: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub n_beams: usize,
    pub arc: f64,
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { n_beams: 10, arc: std::f64::consts::FRAC_PI_2, max_range: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationParams {
    pub gravity_scale: f64,
    #[serde(default)]
    pub part_scales: BTreeMap<BodyPart, PartScale>,
    #[serde(default)]
    pub wall: Option<WallConfig>,
    #[serde(default)]
    pub sensor: Option<SensorConfig>,
}

impl Default for VariationParams {
    fn default() -> Self {
        Self { gravity_scale: 1.0, part_scales: BTreeMap::new(), wall: None, sensor: None }
    }
}

impl VariationParams {
    pub fn gravity(scale: f64) -> Self {
        Self { gravity_scale: scale, ..Self::default() }
    }

    pub fn morphology(part: BodyPart, scale: f64) -> Self {
        let mut p = Self::default();
        p.part_scales.insert(part, PartScale::uniform(scale));
        p
    }

    pub fn with_sensor() -> Self {
        Self { sensor: Some(SensorConfig::default()), ..Self::default() }
    }

    /// Wall in the running path, seen through the torso sensor.
    pub fn with_wall() -> Self {
        Self { wall: Some(WallConfig::default()), sensor: Some(SensorConfig::default()), ..Self::default() }
    }

    pub fn part_scale(&self, part: BodyPart) -> PartScale {
        self.part_scales.get(&part).copied().unwrap_or(PartScale::IDENTITY)
    }

    pub fn wall_enabled(&self) -> bool {
        self.wall.is_some_and(|w| w.enabled)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.gravity_scale) {
            return Err(EnvError::InvalidVariation(format!(
                "gravity scale must be positive, got {}",
                self.gravity_scale
            )));
        }
        for (part, s) in &self.part_scales {
            if !positive(s.mass_scale) || !positive(s.width_scale) {
                return Err(EnvError::InvalidVariation(format!("{} scale must be positive", part.label())));
            }
        }
        if let Some(w) = self.wall {
            if !positive(w.height) || !positive(w.thickness) {
                return Err(EnvError::InvalidVariation("wall dimensions must be positive".into()));
            }
        }
        if let Some(s) = self.sensor {
            if s.n_beams == 0 || !positive(s.max_range) || !s.arc.is_finite() || s.arc < 0.0 {
                return Err(EnvError::InvalidVariation("sensor needs beams, a range and a non-negative arc".into()));
            }
        }
        Ok(())
    }
}

/// Unscaled geometry of one hopper part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartGeometry {
    pub mass: f64,
    pub length: f64,
    pub width: f64,
}

pub const BASE_PARTS: [PartGeometry; 4] = [
    PartGeometry { mass: 3.53, length: 0.4, width: 0.1 },
    PartGeometry { mass: 3.93, length: 0.45, width: 0.1 },
    PartGeometry { mass: 2.71, length: 0.5, width: 0.08 },
    PartGeometry { mass: 5.09, length: 0.39, width: 0.12 },
];

/// Foot extent relative to the ankle: heel behind, toe ahead.
const HEEL: f64 = -0.13;
const TOE: f64 = 0.26;
const GEAR: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunnerModel {
    pub chain: PlanarChain,
    /// Torso centre height in the upright pose with the sole on the ground.
    pub standing_height: f64,
}

impl RunnerModel {
    pub fn total_mass(&self) -> f64 {
        self.chain.total_mass()
    }

    pub fn gravity(&self) -> f64 {
        self.chain.gravity
    }

    pub fn body(&self, part: BodyPart) -> &Link {
        &self.chain.links[part.index()]
    }

    /// Upright pose at rest with the sole just touching the ground.
    pub fn standing_state(&self) -> ChainState {
        let mut s = self.chain.zero_state();
        s.q[1] = self.standing_height;
        s
    }
}

fn runner_links(params: &VariationParams) -> Vec<Link> {
    let geo = |part: BodyPart| {
        let g = BASE_PARTS[part.index()];
        let s = params.part_scale(part);
        PartGeometry { mass: g.mass * s.mass_scale, length: g.length, width: g.width * s.width_scale }
    };
    let link = |part: BodyPart, com: [f64; 2], child: [f64; 2], points: Vec<[f64; 2]>| {
        let g = geo(part);
        Link {
            name: part.label().to_lowercase(),
            mass: g.mass,
            inertia: Link::box_inertia(g.mass, g.length, g.width),
            length: g.length,
            width: g.width,
            com,
            child,
            contact_points: points,
        }
    };
    let torso = geo(BodyPart::Torso).length / 2.0;
    let thigh = geo(BodyPart::Thigh).length;
    let leg = geo(BodyPart::Leg).length;
    let sole = -geo(BodyPart::Foot).width / 2.0;
    vec![
        link(BodyPart::Torso, [0.0, 0.0], [0.0, -torso], vec![[0.0, torso], [0.0, -torso]]),
        link(BodyPart::Thigh, [0.0, -thigh / 2.0], [0.0, -thigh], vec![[0.0, -thigh]]),
        link(BodyPart::Leg, [0.0, -leg / 2.0], [0.0, -leg], vec![[0.0, -leg]]),
        link(BodyPart::Foot, [(HEEL + TOE) / 2.0, 0.0], [0.0, 0.0], vec![[HEEL, sole], [TOE, sole]]),
    ]
}

/// Builds the hopper for a variation: masses and widths scaled per part,
/// inertias recomputed from the scaled boxes, gravity from the scale.
pub fn build_runner(params: &VariationParams) -> Result<RunnerModel, EnvError> {
    params.validate()?;
    let links = runner_links(params);
    let foot = &links[BodyPart::Foot.index()];
    let standing_height = foot.width / 2.0 + links[2].length + links[1].length + links[0].length / 2.0;
    let deg = std::f64::consts::PI / 180.0;
    let chain = PlanarChain {
        base: Base::Floating,
        links,
        gravity: params.gravity_scale * EARTH_GRAVITY,
        armature: 1.0,
        joint_damping: 1.0,
        joint_limits: vec![Some((-150.0 * deg, 0.0)), Some((-150.0 * deg, 0.0)), Some((-45.0 * deg, 45.0 * deg))],
        limit_stiffness: 500.0,
        limit_damping: 10.0,
        gear: vec![GEAR; 3],
        contact: ContactParams::default(),
    };
    Ok(RunnerModel { chain, standing_height })
}

/// Unscaled hopper chain.
pub fn base_runner_chain() -> PlanarChain {
    build_runner(&VariationParams::default()).expect("defaults are valid").chain
}

/// Flags raised while advancing one control interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepFlags {
    pub exploded: bool,
    pub max_penetration: f64,
}

/// Advances the hopper by `dt` under constant joint torques (N·m), using as
/// many internal substeps of at most [`INTERNAL_DT`] as needed.
pub fn dynamics_step(
    model: &RunnerModel,
    state: &mut ChainState,
    torques: &[f64],
    terrain: &Terrain,
    dt: f64,
) -> StepFlags {
    let n = (dt / INTERNAL_DT).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut flags = StepFlags::default();
    for _ in 0..n {
        let r = model.chain.substep(state, torques, terrain, h);
        flags.max_penetration = flags.max_penetration.max(r.max_penetration);
        if state.qdot.iter().chain(&state.q).any(|v| !v.is_finite())
            || state.qdot.iter().any(|v| v.abs() > VELOCITY_CAP)
        {
            flags.exploded = true;
            break;
        }
    }
    flags
}

/// Running reward for one control interval and whether the hopper has fallen.
pub fn runner_reward(
    model: &RunnerModel,
    prev: &ChainState,
    next: &ChainState,
    action: &[f64],
    dt: f64,
) -> (f64, bool) {
    let forward = (next.q[0] - prev.q[0]) / dt;
    let ctrl: f64 = action.iter().map(|a| a * a).sum();
    let reward = forward + ALIVE_BONUS - CONTROL_COST * ctrl;
    let fallen = next.q[1] < FALL_FRACTION * model.standing_height || next.q[2].abs() > PITCH_LIMIT;
    (reward, fallen)
}

/// Distance ahead of the start at which the wall's near face stands.
pub fn sample_wall(rng: &mut RngState) -> f64 {
    rng.random_range(WALL_RANGE.0..=WALL_RANGE.1)
}

/// Distance along a ray to an axis-aligned box, if hit within `max_range`.
/// Slab intersection; an origin inside the box reports zero.
pub fn ray_box(origin: [f64; 2], dir: [f64; 2], lo: [f64; 2], hi: [f64; 2], max_range: f64) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = max_range;
    for k in 0..2 {
        if dir[k].abs() < 1e-15 {
            if origin[k] < lo[k] || origin[k] > hi[k] {
                return None;
            }
        } else {
            let a = (lo[k] - origin[k]) / dir[k];
            let b = (hi[k] - origin[k]) / dir[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
            if t0 > t1 {
                return None;
            }
        }
    }
    Some(t0)
}

/// Torso-mounted range beams fanning from straight ahead down to `arc` below,
/// measured in the torso frame. Readouts are `distance / max_range` on a wall
/// hit and `0.0` otherwise.
pub fn torso_sense(config: &SensorConfig, state: &ChainState, wall: Option<&WallBox>) -> Vec<f64> {
    let Some(w) = wall else {
        return vec![0.0; config.n_beams];
    };
    let origin = [state.q[0], state.q[1]];
    let pitch = state.q[2];
    let n = config.n_beams;
    (0..n)
        .map(|k| {
            let frac = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            let a = pitch - frac * config.arc;
            let dir = [a.cos(), a.sin()];
            ray_box(origin, dir, [w.x0, 0.0], [w.x0 + w.thickness, w.height], config.max_range)
                .map_or(0.0, |d| d / config.max_range)
        })
        .collect()
}

/// One row of a recorded trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub reward: f64,
}

/// Whitespace-separated text table with a header line.
pub fn trajectory_to_text(rows: &[TrajectoryRow]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        out.push_str("time");
        for i in 0..first.q.len() {
            out.push_str(&format!(" q{i}"));
        }
        for i in 0..first.qdot.len() {
            out.push_str(&format!(" qd{i}"));
        }
        out.push_str(" reward\n");
    }
    for r in rows {
        out.push_str(&format!("{:.6}", r.time));
        for v in r.q.iter().chain(&r.qdot) {
            out.push_str(&format!(" {v:.9e}"));
        }
        out.push_str(&format!(" {:.9e}\n", r.reward));
    }
    out
}

pub struct RunnerEnv {
    id: String,
    params: VariationParams,
    model: RunnerModel,
    obs_space: BoxSpace,
    act_space: BoxSpace,
    clock: EpisodeClock,
    rng: RngState,
    state: ChainState,
    terrain: Terrain,
    trajectory: Option<Vec<TrajectoryRow>>,
}

impl RunnerEnv {
    pub fn new(id: &str, params: &VariationParams, horizon: usize, seed: u64) -> Result<Self, EnvError> {
        let model = build_runner(params)?;
        let dim = 11 + params.sensor.map_or(0, |s| s.n_beams);
        let state = model.standing_state();
        Ok(Self {
            id: id.to_string(),
            params: params.clone(),
            obs_space: BoxSpace::uniform(dim, f64::NEG_INFINITY, f64::INFINITY),
            act_space: BoxSpace::uniform(3, -1.0, 1.0),
            clock: EpisodeClock::new(horizon),
            rng: RngState::new(seed),
            state,
            terrain: Terrain::FLAT,
            trajectory: None,
            model,
        })
    }

    pub fn model(&self) -> &RunnerModel {
        &self.model
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn wall(&self) -> Option<&WallBox> {
        self.terrain.wall.as_ref()
    }

    /// Starts recording `(time, q, q̇, reward)` rows; reset clears them.
    pub fn record_trajectory(&mut self, on: bool) {
        self.trajectory = on.then(Vec::new);
    }

    pub fn trajectory(&self) -> Option<&[TrajectoryRow]> {
        self.trajectory.as_deref()
    }

    fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        let mut obs: Vec<f64> = s.q[1..].to_vec();
        obs.extend(s.qdot.iter().map(|v| v.clamp(-OBS_VELOCITY_CLIP, OBS_VELOCITY_CLIP)));
        if let Some(cfg) = &self.params.sensor {
            obs.extend(torso_sense(cfg, s, self.terrain.wall.as_ref()));
        }
        obs
    }
}

impl Environment for RunnerEnv {
    fn id(&self) -> &str {
        &self.id
    }

    fn observation_space(&self) -> &BoxSpace {
        &self.obs_space
    }

    fn action_space(&self) -> &BoxSpace {
        &self.act_space
    }

    fn horizon(&self) -> usize {
        self.clock.horizon
    }

    fn reset(&mut self) -> Vec<f64> {
        self.clock.reset();
        let mut s = self.model.standing_state();
        for v in s.q.iter_mut().chain(s.qdot.iter_mut()) {
            *v += self.rng.random_range(-RESET_NOISE..=RESET_NOISE);
        }
        self.state = s;
        self.terrain.wall = match self.params.wall {
            Some(w) if w.enabled => Some(WallBox {
                x0: self.state.q[0] + sample_wall(&mut self.rng),
                thickness: w.thickness,
                height: w.height,
            }),
            _ => None,
        };
        if let Some(t) = self.trajectory.as_mut() {
            t.clear();
            t.push(TrajectoryRow { time: 0.0, q: self.state.q.clone(), qdot: self.state.qdot.clone(), reward: 0.0 });
        }
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let mut info = Info::new();
        let a = self.clock.begin(&self.act_space, action, &mut info)?;
        let torques: Vec<f64> = a.iter().zip(&self.model.chain.gear).map(|(a, g)| a * g).collect();
        let prev = self.state.clone();
        let flags = dynamics_step(&self.model, &mut self.state, &torques, &self.terrain, CONTROL_DT);
        let (mut reward, fallen) = runner_reward(&self.model, &prev, &self.state, &a, CONTROL_DT);
        if flags.exploded {
            // Keep the last finite state so observations stay usable.
            self.state = prev;
            reward = 0.0;
            info.insert("exploded".into(), 1.0);
        }
        info.insert("x".into(), self.state.q[0]);
        info.insert("penetration".into(), flags.max_penetration);
        if let Some(t) = self.trajectory.as_mut() {
            t.push(TrajectoryRow {
                time: self.state.time,
                q: self.state.q.clone(),
                qdot: self.state.qdot.clone(),
                reward,
            });
        }
        let done = self.clock.finish(fallen || flags.exploded, &mut info);
        Ok(StepResult { observation: self.observation(), reward, done, info })
    }
}
