//! Rollout-based policy evaluation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ProtocolError;
use crate::agent::{rollout, GaussianPolicy};
use crate::env::{Environment, Registry, RngState};

/// Summary of a set of episode returns. `std` is the population standard
/// deviation. The raw returns are kept so the summary can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&returns);
        Self { mean, std, returns }
    }

    /// True when `mean` and `std` are exactly what the stored returns give.
    pub fn is_consistent(&self) -> bool {
        let (m, s) = mean_std(&self.returns);
        m.to_bits() == self.mean.to_bits() && s.to_bits() == self.std.to_bits()
    }
}

/// Mean and population standard deviation; `(NaN, NaN)` for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `n` episodes with sampled (not mean) actions on an existing instance.
pub fn evaluate_env(
    policy: &GaussianPolicy,
    env: &mut dyn Environment,
    n: usize,
    rng: &mut RngState,
) -> Result<EvalStats, ProtocolError> {
    let returns =
        (0..n).map(|_| rollout(env, policy, rng, false).map(|p| p.total_reward())).collect::<Result<Vec<_>, _>>()?;
    Ok(EvalStats::from_returns(returns))
}

/// Evaluates on a fresh instance of `env_id`. Both the environment and the
/// action noise are seeded from `seed`.
pub fn evaluate_in(
    registry: &Registry,
    policy: &GaussianPolicy,
    env_id: &str,
    n: usize,
    seed: u64,
) -> Result<EvalStats, ProtocolError> {
    let root = RngState::new(seed);
    let mut env = registry.make(env_id, root.split(RngState::tag_of("eval-env")).seed)?;
    evaluate_env(policy, env.as_mut(), n, &mut root.split(RngState::tag_of("eval-actions")))
}

pub fn evaluate(policy: &GaussianPolicy, env_id: &str, n: usize, seed: u64) -> Result<EvalStats, ProtocolError> {
    evaluate_in(crate::env::registry(), policy, env_id, n, seed)
}

/// Short hex digest of a policy's parameters, used to prove two evaluations
/// saw the same network.
pub fn params_hash(policy: &GaussianPolicy) -> String {
    let mut h = Sha256::new();
    for p in &policy.params {
        h.update(p.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::PolicyArch;
    use crate::env::{BoxSpace, EnvError, StepResult};

    /// Ten steps, reward 0.5 each, whatever the action.
    struct Constant {
        obs: BoxSpace,
        act: BoxSpace,
        t: usize,
    }

    impl Environment for Constant {
        fn id(&self) -> &str {
            "Constant-v0"
        }
        fn observation_space(&self) -> &BoxSpace {
            &self.obs
        }
        fn action_space(&self) -> &BoxSpace {
            &self.act
        }
        fn horizon(&self) -> usize {
            10
        }
        fn reset(&mut self) -> Vec<f64> {
            self.t = 0;
            vec![0.0]
        }
        fn step(&mut self, _action: &[f64]) -> Result<StepResult, EnvError> {
            self.t += 1;
            Ok(StepResult { observation: vec![0.0], reward: 0.5, done: self.t >= 10, info: Default::default() })
        }
    }

    fn policy_for(obs: usize, act: &BoxSpace, seed: u64) -> GaussianPolicy {
        GaussianPolicy::new(PolicyArch::new(obs, act.dim(), &[8]), act, &mut RngState::new(seed)).unwrap()
    }

    #[test]
    fn constant_returns_have_zero_spread() {
        let mut env = Constant { obs: BoxSpace::uniform(1, -1.0, 1.0), act: BoxSpace::uniform(1, -1.0, 1.0), t: 0 };
        let p = policy_for(1, &env.act.clone(), 3);
        let s = evaluate_env(&p, &mut env, 7, &mut RngState::new(1)).unwrap();
        assert_eq!(s.returns, vec![5.0; 7]);
        assert_eq!((s.mean, s.std), (5.0, 0.0));
    }

    #[test]
    fn twenty_rollouts_are_reproducible() {
        let env = crate::env::registry().make("Pusher-v0", 0).unwrap();
        let p = policy_for(env.observation_space().dim(), env.action_space(), 5);
        let a = evaluate(&p, "Pusher-v0", 20, 9).unwrap();
        assert_eq!(a.returns.len(), 20);
        assert_eq!(a, evaluate(&p, "Pusher-v0", 20, 9).unwrap());
        assert_ne!(a, evaluate(&p, "Pusher-v0", 20, 10).unwrap());
        assert!(a.is_consistent());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn hash_tracks_parameters() {
        let act = BoxSpace::uniform(2, -1.0, 1.0);
        let p = policy_for(3, &act, 1);
        let mut q = p.clone();
        assert_eq!(params_hash(&p), params_hash(&q));
        q.params[0] += 1e-12;
        assert_ne!(params_hash(&p), params_hash(&q));
        assert_eq!(params_hash(&p).len(), 16);
    }
}
