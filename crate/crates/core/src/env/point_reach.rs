//! Dense-reward planar point-reach task.
//!
//! A point mass is driven by a bounded velocity command toward a goal drawn at
//! reset. The per-step reward is the negative distance to the goal, so any
//! learner that moves toward the goal improves its return quickly. It is used
//! as a learning smoke test and is not part of the benchmark catalogue.

use rand::Rng;

use super::{BoxSpace, EnvError, Environment, EpisodeClock, Info, RngState, StepResult};

const DT: f64 = 0.1;
const ARENA: f64 = 1.5;

pub struct PointReach {
    obs_space: BoxSpace,
    act_space: BoxSpace,
    clock: EpisodeClock,
    rng: RngState,
    position: [f64; 2],
    goal: [f64; 2],
}

impl PointReach {
    pub const ID: &'static str = "PointReach-v0";
    pub const HORIZON: usize = 50;

    pub fn new(seed: u64) -> Self {
        Self {
            obs_space: BoxSpace::uniform(4, -ARENA, ARENA),
            act_space: BoxSpace::uniform(2, -1.0, 1.0),
            clock: EpisodeClock::new(Self::HORIZON),
            rng: RngState::new(seed),
            position: [0.0; 2],
            goal: [0.0; 2],
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position[0], self.position[1], self.goal[0], self.goal[1]]
    }

    fn distance(&self) -> f64 {
        (self.position[0] - self.goal[0]).hypot(self.position[1] - self.goal[1])
    }
}

impl Environment for PointReach {
    fn id(&self) -> &str {
        Self::ID
    }

    fn observation_space(&self) -> &BoxSpace {
        &self.obs_space
    }

    fn action_space(&self) -> &BoxSpace {
        &self.act_space
    }

    fn horizon(&self) -> usize {
        Self::HORIZON
    }

    fn reset(&mut self) -> Vec<f64> {
        self.clock.reset();
        for k in 0..2 {
            self.position[k] = self.rng.random_range(-1.0..1.0);
            self.goal[k] = self.rng.random_range(-1.0..1.0);
        }
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let mut info = Info::new();
        let a = self.clock.begin(&self.act_space, action, &mut info)?;
        for k in 0..2 {
            self.position[k] = (self.position[k] + DT * a[k]).clamp(-ARENA, ARENA);
        }
        let reward = -self.distance();
        info.insert("distance".into(), -reward);
        let done = self.clock.finish(false, &mut info);
        Ok(StepResult { observation: self.observation(), reward, done, info })
    }
}
