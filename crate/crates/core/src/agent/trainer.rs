//! Sample–fit–update loop and its per-iteration log.

use std::io::Write;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::baseline::LinearBaseline;
use super::policy::{GaussianPolicy, PolicyArch};
use super::sampler::collect_batch;
use super::trpo::{trpo_update, TrpoConfig, UpdateStatus};
use super::AgentError;
use crate::env::{Environment, RngState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub env_id: String,
    pub mean_return: f64,
    pub n_episodes: usize,
    pub n_steps: usize,
    pub kl: f64,
    pub step_size: f64,
    pub backtracks: usize,
    pub status: UpdateStatus,
    pub entropy: f64,
}

pub struct Trainer {
    pub policy: GaussianPolicy,
    pub baseline: LinearBaseline,
    pub config: TrpoConfig,
    root: RngState,
    /// Iterations completed so far, across every environment trained on.
    pub iteration: usize,
}

impl Trainer {
    pub fn new(obs_dim: usize, env: &dyn Environment, config: TrpoConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let root = RngState::new(seed);
        let arch = PolicyArch::new(obs_dim, env.action_space().dim(), &config.hidden);
        let policy = GaussianPolicy::new(arch, env.action_space(), &mut root.split(RngState::tag_of("policy-init")))?;
        Ok(Self { policy, baseline: LinearBaseline::default(), config, root, iteration: 0 })
    }

    pub fn for_env(env: &dyn Environment, config: TrpoConfig, seed: u64) -> Result<Self, AgentError> {
        Self::new(env.observation_space().dim(), env, config, seed)
    }

    /// One batch of rollouts, advantage estimation and a trust-region step.
    /// A numerical failure skips the parameter update but still counts as an
    /// iteration.
    pub fn train_iteration(&mut self, env: &mut dyn Environment) -> Result<IterationDiagnostics, AgentError> {
        let mut rng = self.root.split_path(&[RngState::tag_of("sample"), self.iteration as u64]);
        let mut batch = collect_batch(env, &self.policy, &mut rng, self.config.batch_size)?;
        batch.process(&mut self.baseline, self.config.discount, self.config.gae_lambda);
        let (status, kl, step_size, backtracks) = match trpo_update(&self.policy, &batch, &self.config) {
            Ok((policy, d)) => {
                self.policy = policy;
                (d.status, d.kl, d.step_size, d.backtracks)
            }
            Err(AgentError::NumericalFailure(_)) => (UpdateStatus::NumericalFailure, 0.0, 0.0, 0),
            Err(e) => return Err(e),
        };
        let entropy = self
            .policy
            .log_std()
            .iter()
            .map(|ls| ls + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln())
            .sum();
        let diag = IterationDiagnostics {
            iteration: self.iteration,
            env_id: env.id().to_string(),
            mean_return: batch.mean_return(),
            n_episodes: batch.n_episodes(),
            n_steps: batch.len(),
            kl,
            step_size,
            backtracks,
            status,
            entropy,
        };
        self.iteration += 1;
        Ok(diag)
    }

    pub fn train(
        &mut self,
        env: &mut dyn Environment,
        iterations: usize,
        mut log: Option<&mut DiagnosticsLog>,
    ) -> Result<Vec<IterationDiagnostics>, AgentError> {
        let mut out = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let d = self.train_iteration(env)?;
            if let Some(l) = log.as_deref_mut() {
                l.append(&d)?;
            }
            out.push(d);
        }
        Ok(out)
    }
}

/// Append-only JSON-lines log of iteration diagnostics.
pub struct DiagnosticsLog {
    file: std::fs::File,
}

impl DiagnosticsLog {
    pub fn create(path: &FsPath) -> Result<Self, AgentError> {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }

    pub fn append(&mut self, d: &IterationDiagnostics) -> Result<(), AgentError> {
        let line = serde_json::to_string(d).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        writeln!(self.file, "{line}")?;
        Ok(())
    }

    pub fn read(path: &FsPath) -> Result<Vec<IterationDiagnostics>, AgentError> {
        let text = std::fs::read_to_string(path)?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| AgentError::Checkpoint(e.to_string())))
            .collect()
    }
}
