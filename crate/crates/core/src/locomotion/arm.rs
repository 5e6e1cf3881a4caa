//! Planar two-link arm that strikes or pushes a disc toward a goal.
//!
//! The arm is a fixed-base chain in the horizontal plane, so gravity plays no
//! part. The object is massless for the arm: whenever the end-effector disc
//! overlaps it, the object is moved straight out along the line of centres
//! until the two discs just touch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{Base, ChainState, ContactParams, Link, PlanarChain, Terrain};
use crate::env::{BoxSpace, EnvError, Environment, EpisodeClock, Info, RngState, StepResult};

pub const LINK_LENGTHS: [f64; 2] = [0.6, 0.6];
pub const LINK_MASS: f64 = 1.0;
pub const LINK_WIDTH: f64 = 0.05;
pub const GEAR: f64 = 3.0;
pub const CONTROL_DT: f64 = 0.01;
pub const SUBSTEPS: usize = 10;
pub const EE_RADIUS: f64 = 0.05;
pub const OBJECT_RADIUS: f64 = 0.05;
pub const WORKSPACE: [f64; 4] = [-1.2, -1.2, 1.2, 1.2];
pub const EE_WEIGHT: f64 = 0.5;
pub const TORQUE_WEIGHT: f64 = 0.1;

/// Axis-aligned region `[x0, y0, x1, y1]`.
pub type Region = [f64; 4];

pub const STRIKER_OBJECT: [f64; 2] = [0.5, 0.0];
pub const STRIKER_GOAL: [f64; 2] = [0.9, 0.45];
pub const STRIKER_START_BOX: Region = [0.3, -0.3, 0.6, 0.3];
pub const PUSHER_OBJECT: [f64; 2] = [0.6, 0.4];
pub const PUSHER_GOAL: [f64; 2] = [0.7, -0.3];
pub const PUSHER_GOAL_BOX: Region = [0.4, -0.6, 0.9, -0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    Striker,
    Pusher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmVariant {
    Fixed,
    StrikerMovingStart,
    PusherMovingGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmVariation {
    pub kind: ArmKind,
    pub variant: ArmVariant,
}

impl ArmVariation {
    pub fn validate(&self) -> Result<(), EnvError> {
        match (self.kind, self.variant) {
            (_, ArmVariant::Fixed)
            | (ArmKind::Striker, ArmVariant::StrikerMovingStart)
            | (ArmKind::Pusher, ArmVariant::PusherMovingGoal) => Ok(()),
            (k, v) => Err(EnvError::InvalidVariation(format!("{v:?} does not apply to {k:?}"))),
        }
    }
}

fn in_region(p: [f64; 2], r: Region) -> bool {
    p[0] >= r[0] && p[0] <= r[2] && p[1] >= r[1] && p[1] <= r[3]
}

fn sample_region(rng: &mut RngState, r: Region) -> [f64; 2] {
    [rng.random_range(r[0]..=r[2]), rng.random_range(r[1]..=r[3])]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmTask {
    pub variation: ArmVariation,
    pub link_lengths: [f64; 2],
    pub joints: ChainState,
    pub object: [f64; 2],
    pub goal: [f64; 2],
}

impl ArmTask {
    pub fn within_workspace(&self) -> bool {
        in_region(self.object, WORKSPACE) && in_region(self.goal, WORKSPACE)
    }
}

/// Draws a task instance: the randomized quantity comes from its box, the
/// rest take their canonical positions.
pub fn build_arm_task(variation: ArmVariation, rng: &mut RngState) -> Result<ArmTask, EnvError> {
    variation.validate()?;
    let (mut object, mut goal) = match variation.kind {
        ArmKind::Striker => (STRIKER_OBJECT, STRIKER_GOAL),
        ArmKind::Pusher => (PUSHER_OBJECT, PUSHER_GOAL),
    };
    match variation.variant {
        ArmVariant::Fixed => {}
        ArmVariant::StrikerMovingStart => object = sample_region(rng, STRIKER_START_BOX),
        ArmVariant::PusherMovingGoal => goal = sample_region(rng, PUSHER_GOAL_BOX),
    }
    Ok(ArmTask {
        variation,
        link_lengths: LINK_LENGTHS,
        joints: ChainState { q: vec![0.0, 0.0], qdot: vec![0.0, 0.0], time: 0.0 },
        object,
        goal,
    })
}

pub fn arm_chain(link_lengths: [f64; 2]) -> PlanarChain {
    let link = |name: &str, l: f64| Link {
        name: name.into(),
        mass: LINK_MASS,
        inertia: Link::box_inertia(LINK_MASS, l, LINK_WIDTH),
        length: l,
        width: LINK_WIDTH,
        com: [l / 2.0, 0.0],
        child: [l, 0.0],
        contact_points: vec![],
    };
    PlanarChain {
        base: Base::Fixed { anchor: [0.0, 0.0] },
        links: vec![link("upper", link_lengths[0]), link("fore", link_lengths[1])],
        gravity: 0.0,
        armature: 0.05,
        joint_damping: 0.5,
        joint_limits: vec![None, None],
        limit_stiffness: 0.0,
        limit_damping: 0.0,
        gear: vec![GEAR; 2],
        contact: ContactParams::default(),
    }
}

pub fn end_effector(link_lengths: [f64; 2], q: &[f64]) -> [f64; 2] {
    let a1 = q[0];
    let a2 = q[0] + q[1];
    [link_lengths[0] * a1.cos() + link_lengths[1] * a2.cos(), link_lengths[0] * a1.sin() + link_lengths[1] * a2.sin()]
}

pub fn arm_reward(object: [f64; 2], goal: [f64; 2], ee: [f64; 2], action: &[f64]) -> f64 {
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let effort: f64 = action.iter().map(|a| a * a).sum();
    -dist(object, goal) - EE_WEIGHT * dist(ee, object) - TORQUE_WEIGHT * effort
}

/// Pushes the object out of the end-effector disc along the line of centres.
fn resolve_push(ee: [f64; 2], object: &mut [f64; 2]) -> bool {
    let d = [object[0] - ee[0], object[1] - ee[1]];
    let n = d[0].hypot(d[1]);
    let reach = EE_RADIUS + OBJECT_RADIUS;
    if n >= reach {
        return false;
    }
    let dir = if n > 1e-12 { [d[0] / n, d[1] / n] } else { [1.0, 0.0] };
    object[0] = (ee[0] + dir[0] * reach).clamp(WORKSPACE[0], WORKSPACE[2]);
    object[1] = (ee[1] + dir[1] * reach).clamp(WORKSPACE[1], WORKSPACE[3]);
    true
}

/// Advances the arm one control interval under normalized `action` and
/// returns the reward. The torque penalty uses the normalized action.
pub fn arm_step(chain: &PlanarChain, task: &mut ArmTask, action: &[f64], dt: f64) -> (f64, bool) {
    let torques: Vec<f64> = action.iter().zip(&chain.gear).map(|(a, g)| a * g).collect();
    let h = dt / SUBSTEPS as f64;
    let mut touched = false;
    for _ in 0..SUBSTEPS {
        chain.substep(&mut task.joints, &torques, &Terrain::NONE, h);
        touched |= resolve_push(end_effector(task.link_lengths, &task.joints.q), &mut task.object);
    }
    let ee = end_effector(task.link_lengths, &task.joints.q);
    (arm_reward(task.object, task.goal, ee, action), touched)
}

pub struct ArmEnv {
    id: String,
    variation: ArmVariation,
    chain: PlanarChain,
    task: ArmTask,
    obs_space: BoxSpace,
    act_space: BoxSpace,
    clock: EpisodeClock,
    rng: RngState,
}

impl ArmEnv {
    pub fn new(id: &str, variation: ArmVariation, horizon: usize, seed: u64) -> Result<Self, EnvError> {
        let mut rng = RngState::new(seed);
        let task = build_arm_task(variation, &mut rng)?;
        Ok(Self {
            id: id.to_string(),
            variation,
            chain: arm_chain(LINK_LENGTHS),
            task,
            obs_space: BoxSpace::uniform(12, f64::NEG_INFINITY, f64::INFINITY),
            act_space: BoxSpace::uniform(2, -1.0, 1.0),
            clock: EpisodeClock::new(horizon),
            rng,
        })
    }

    pub fn task(&self) -> &ArmTask {
        &self.task
    }

    fn observation(&self) -> Vec<f64> {
        let q = &self.task.joints.q;
        let qd = &self.task.joints.qdot;
        let ee = end_effector(self.task.link_lengths, q);
        vec![
            q[0].cos(),
            q[0].sin(),
            q[1].cos(),
            q[1].sin(),
            qd[0],
            qd[1],
            ee[0],
            ee[1],
            self.task.object[0],
            self.task.object[1],
            self.task.goal[0],
            self.task.goal[1],
        ]
    }
}

impl Environment for ArmEnv {
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
        self.task = build_arm_task(self.variation, &mut self.rng).expect("variation validated at construction");
        for v in self.task.joints.q.iter_mut() {
            *v += self.rng.random_range(-0.01..=0.01);
        }
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let mut info = Info::new();
        let a = self.clock.begin(&self.act_space, action, &mut info)?;
        let (reward, touched) = arm_step(&self.chain, &mut self.task, &a, CONTROL_DT);
        info.insert("touched".into(), if touched { 1.0 } else { 0.0 });
        let g = self.task.goal;
        let o = self.task.object;
        info.insert("object_goal_distance".into(), (o[0] - g[0]).hypot(o[1] - g[1]));
        let done = self.clock.finish(false, &mut info);
        Ok(StepResult { observation: self.observation(), reward, done, info })
    }
}
