//! Environment abstraction shared by every task family.
//!
//! Environments follow the familiar reset/step contract: `reset` redraws the
//! episode's stochastic elements from the instance's own [`RngState`], and
//! `step` advances one control interval, clamping out-of-range actions to the
//! declared [`BoxSpace`].

pub mod point_reach;
pub mod registry;
pub mod rng;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use registry::{registry, EnvSpec, Family, Registry, Variation, PHYSICS_TAG};
pub use rng::RngState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("environment id `{0}` is already registered")]
    DuplicateRegistration(String),
    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),
    #[error("step called after the episode finished; call reset first")]
    EpisodeFinished,
    #[error("action has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed map: {0}")]
    MalformedMap(String),
    #[error("ray origin lies inside an obstacle")]
    InvalidOrigin,
    #[error("invalid variation: {0}")]
    InvalidVariation(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
}

/// Axis-aligned box of real vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpace {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl BoxSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, EnvError> {
        if low.len() != high.len() {
            return Err(EnvError::InvalidSpace(format!("bound lengths differ ({} vs {})", low.len(), high.len())));
        }
        if low.is_empty() {
            return Err(EnvError::InvalidSpace("zero-dimensional space".into()));
        }
        if let Some(i) = (0..low.len()).find(|&i| !(low[i] <= high[i])) {
            return Err(EnvError::InvalidSpace(format!("low[{i}] > high[{i}]")));
        }
        Ok(Self { low, high })
    }

    /// `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim]).expect("uniform box bounds are valid")
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.low).zip(&self.high).all(|((v, l), h)| v >= l && v <= h)
    }

    /// Clamp into the box. The flag reports whether any component moved.
    /// NaN components are mapped to the box centre.
    pub fn clamp(&self, x: &[f64]) -> (Vec<f64>, bool) {
        let mut clamped = false;
        let out = x
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&v, (&l, &h))| {
                let c = if v.is_nan() { 0.5 * (l + h) } else { v.clamp(l, h) };
                if c != v {
                    clamped = true;
                }
                c
            })
            .collect();
        (out, clamped)
    }
}

pub type Info = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: Info,
}

/// A single simulated task instance. Instances are independent and may be
/// moved to other threads; a single instance is not shared.
pub trait Environment: Send {
    fn id(&self) -> &str;
    fn observation_space(&self) -> &BoxSpace;
    /// Logical shape of an observation; flat vector unless overridden.
    fn observation_shape(&self) -> Vec<usize> {
        vec![self.observation_space().dim()]
    }
    fn action_space(&self) -> &BoxSpace;
    fn horizon(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
}

pub type EnvInstance = Box<dyn Environment>;

/// Step bookkeeping common to all environments: the done latch, the horizon
/// cut-off, the dimension check and action clamping.
#[derive(Debug, Clone)]
pub(crate) struct EpisodeClock {
    pub steps: usize,
    pub horizon: usize,
    pub done: bool,
}

impl EpisodeClock {
    pub fn new(horizon: usize) -> Self {
        // Not started until the first reset.
        Self { steps: 0, horizon, done: true }
    }

    pub fn reset(&mut self) {
        self.steps = 0;
        self.done = false;
    }

    /// Validates and clamps an action for the step about to be taken.
    pub fn begin(&self, space: &BoxSpace, action: &[f64], info: &mut Info) -> Result<Vec<f64>, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action.len() != space.dim() {
            return Err(EnvError::DimensionMismatch { expected: space.dim(), got: action.len() });
        }
        let (a, clamped) = space.clamp(action);
        info.insert("action_clamped".into(), if clamped { 1.0 } else { 0.0 });
        Ok(a)
    }

    /// Counts the step and latches `done` on termination or at the horizon.
    pub fn finish(&mut self, terminal: bool, info: &mut Info) -> bool {
        self.steps += 1;
        let truncated = self.steps >= self.horizon;
        if truncated && !terminal {
            info.insert("time_limit".into(), 1.0);
        }
        self.done = terminal || truncated;
        self.done
    }
}
