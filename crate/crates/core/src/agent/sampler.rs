//! Episode rollouts and batch assembly.

use nalgebra::DMatrix;

use super::baseline::{feature_dim, features, LinearBaseline};
use super::gae::{compute_gae, discount_cumsum, normalize};
use super::policy::GaussianPolicy;
use super::AgentError;
use crate::env::{Environment, RngState};

/// One episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Path {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Runs one episode. With `deterministic` the policy mean is executed.
pub fn rollout(
    env: &mut dyn Environment,
    policy: &GaussianPolicy,
    rng: &mut RngState,
    deterministic: bool,
) -> Result<Path, AgentError> {
    let mut path = Path::default();
    let mut obs = env.reset();
    for _ in 0..env.horizon() {
        let (mean, log_std) = policy.forward(&obs)?;
        let action = if deterministic { mean.clone() } else { super::policy::perturb(&mean, &log_std, rng) };
        let lp = super::policy::gaussian_log_prob(&mean, &log_std, &action);
        let step = env.step(&action)?;
        path.observations.push(std::mem::replace(&mut obs, step.observation));
        path.actions.push(action);
        path.rewards.push(step.reward);
        path.log_probs.push(lp);
        if step.done {
            break;
        }
    }
    Ok(path)
}

/// Flattened batch of whole episodes.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub observations: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub rewards: Vec<f64>,
    /// `bounds[i]..bounds[i + 1]` indexes episode `i`.
    pub bounds: Vec<usize>,
    pub time_steps: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub episode_returns: Vec<f64>,
    pub horizon: usize,
}

impl TrajectoryBatch {
    pub fn from_paths(paths: &[Path], horizon: usize) -> Self {
        let n: usize = paths.iter().map(Path::len).sum();
        let obs_dim = paths.iter().find_map(|p| p.observations.first()).map_or(0, Vec::len);
        let act_dim = paths.iter().find_map(|p| p.actions.first()).map_or(0, Vec::len);
        let mut observations = DMatrix::zeros(n, obs_dim);
        let mut actions = DMatrix::zeros(n, act_dim);
        let mut bounds = vec![0];
        let mut time_steps = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut old_log_probs = Vec::with_capacity(n);
        let mut row = 0;
        for p in paths {
            for t in 0..p.len() {
                for (j, v) in p.observations[t].iter().enumerate() {
                    observations[(row, j)] = *v;
                }
                for (j, v) in p.actions[t].iter().enumerate() {
                    actions[(row, j)] = *v;
                }
                time_steps.push(t);
                row += 1;
            }
            rewards.extend(&p.rewards);
            old_log_probs.extend(&p.log_probs);
            bounds.push(row);
        }
        Self {
            observations,
            actions,
            rewards,
            bounds,
            time_steps,
            old_log_probs,
            values: vec![0.0; n],
            returns: vec![0.0; n],
            advantages: vec![0.0; n],
            episode_returns: paths.iter().map(Path::total_reward).collect(),
            horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn n_episodes(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn mean_return(&self) -> f64 {
        self.episode_returns.iter().sum::<f64>() / self.episode_returns.len().max(1) as f64
    }

    pub fn feature_matrix(&self) -> DMatrix<f64> {
        let d = feature_dim(self.observations.ncols());
        let mut x = DMatrix::zeros(self.len(), d);
        for n in 0..self.len() {
            let obs: Vec<f64> = self.observations.row(n).iter().copied().collect();
            for (j, v) in features(&obs, self.time_steps[n], self.horizon).into_iter().enumerate() {
                x[(n, j)] = v;
            }
        }
        x
    }

    /// Baseline values, discounted returns and normalized advantages. The
    /// baseline is refitted to this batch's returns afterwards, so the values
    /// used here come from the previous fit.
    pub fn process(&mut self, baseline: &mut LinearBaseline, gamma: f64, lambda: f64) {
        let x = self.feature_matrix();
        self.values = baseline.predict(&x);
        self.advantages = compute_gae(&self.rewards, &self.values, &self.bounds, gamma, lambda);
        normalize(&mut self.advantages);
        self.returns = self.bounds.windows(2).flat_map(|w| discount_cumsum(&self.rewards[w[0]..w[1]], gamma)).collect();
        baseline.fit(&x, &self.returns);
    }
}

/// Collects whole episodes until at least `batch_size` steps are gathered.
pub fn collect_batch(
    env: &mut dyn Environment,
    policy: &GaussianPolicy,
    rng: &mut RngState,
    batch_size: usize,
) -> Result<TrajectoryBatch, AgentError> {
    let mut paths = Vec::new();
    let mut steps = 0;
    while steps < batch_size.max(1) {
        let p = rollout(env, policy, rng, false)?;
        steps += p.len();
        paths.push(p);
    }
    Ok(TrajectoryBatch::from_paths(&paths, env.horizon()))
}
