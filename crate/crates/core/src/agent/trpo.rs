//! Trust-region policy update: natural-gradient direction by conjugate
//! gradient on the Fisher matrix, scaled to the KL radius, then a
//! backtracking line search on the surrogate objective.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::optim::conjugate_gradient;
use super::policy::{ForwardCache, GaussianPolicy};
use super::sampler::TrajectoryBatch;
use super::AgentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrpoConfig {
    pub kl_step: f64,
    pub gae_lambda: f64,
    pub discount: f64,
    pub cg_damping: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub hidden: Vec<usize>,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            kl_step: 0.01,
            gae_lambda: 1.0,
            discount: 0.99,
            cg_damping: 1e-5,
            cg_iters: 10,
            cg_tol: 1e-10,
            backtrack_ratio: 0.8,
            max_backtracks: 10,
            batch_size: 5000,
            iterations: 100,
            hidden: super::policy::DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl TrpoConfig {
    /// Full-size settings: 50 000 samples per batch, 1000 iterations per env.
    pub fn full_scale() -> Self {
        Self { batch_size: 50_000, iterations: 1000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.into()));
        if !(self.kl_step > 0.0) {
            return bad("kl_step must be positive");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio must lie in (0, 1)");
        }
        if self.cg_damping < 0.0 || self.batch_size == 0 {
            return bad("cg_damping must be non-negative and batch_size positive");
        }
        Ok(())
    }

    /// Short hex digest of the serialized configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Reference distribution the update is measured against.
#[derive(Debug, Clone)]
pub struct OldDist {
    pub mean: DMatrix<f64>,
    pub log_std: Vec<f64>,
}

impl OldDist {
    pub fn of(cache: &ForwardCache, policy: &GaussianPolicy) -> Self {
        Self { mean: cache.mean.clone(), log_std: policy.log_std().to_vec() }
    }
}

fn batch_log_probs(cache: &ForwardCache, log_std: &[f64], actions: &DMatrix<f64>) -> Vec<f64> {
    (0..actions.nrows())
        .map(|n| {
            let mean: Vec<f64> = cache.mean.row(n).iter().copied().collect();
            let a: Vec<f64> = actions.row(n).iter().copied().collect();
            super::policy::gaussian_log_prob(&mean, log_std, &a)
        })
        .collect()
}

fn ratios(policy: &GaussianPolicy, cache: &ForwardCache, batch: &TrajectoryBatch) -> Vec<f64> {
    batch_log_probs(cache, policy.log_std(), &batch.actions)
        .iter()
        .zip(&batch.old_log_probs)
        .map(|(lp, old)| (lp - old).exp())
        .collect()
}

/// `mean(ratio · A)`.
pub fn surrogate(policy: &GaussianPolicy, batch: &TrajectoryBatch) -> Result<f64, AgentError> {
    let cache = policy.forward_batch(&batch.observations)?;
    Ok(surrogate_cached(policy, &cache, batch))
}

fn surrogate_cached(policy: &GaussianPolicy, cache: &ForwardCache, batch: &TrajectoryBatch) -> f64 {
    let r = ratios(policy, cache, batch);
    r.iter().zip(&batch.advantages).map(|(r, a)| r * a).sum::<f64>() / batch.len() as f64
}

pub fn surrogate_grad(policy: &GaussianPolicy, batch: &TrajectoryBatch) -> Result<Vec<f64>, AgentError> {
    let cache = policy.forward_batch(&batch.observations)?;
    let r = ratios(policy, &cache, batch);
    let n = batch.len() as f64;
    let act = policy.arch.act_dim;
    let ls = policy.log_std();
    let mut d_mean = DMatrix::zeros(batch.len(), act);
    let mut d_ls = vec![0.0; act];
    for i in 0..batch.len() {
        let w = r[i] * batch.advantages[i] / n;
        for j in 0..act {
            let var = (2.0 * ls[j]).exp();
            let diff = batch.actions[(i, j)] - cache.mean[(i, j)];
            d_mean[(i, j)] = w * diff / var;
            d_ls[j] += w * (diff * diff / var - 1.0);
        }
    }
    Ok(policy.backward(&cache, &d_mean, &d_ls))
}

fn kl_cached(old: &OldDist, cache: &ForwardCache, log_std: &[f64]) -> f64 {
    let n = cache.mean.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for (j, &ls) in log_std.iter().enumerate() {
            let ls_old = old.log_std[j];
            let d = old.mean[(i, j)] - cache.mean[(i, j)];
            total += ls - ls_old + ((2.0 * ls_old).exp() + d * d) / (2.0 * (2.0 * ls).exp()) - 0.5;
        }
    }
    total / n as f64
}

/// Mean `KL(old ‖ policy)` over the batch observations.
pub fn mean_kl(old: &OldDist, policy: &GaussianPolicy, obs: &DMatrix<f64>) -> Result<f64, AgentError> {
    let cache = policy.forward_batch(obs)?;
    Ok(kl_cached(old, &cache, policy.log_std()))
}

pub fn kl_grad(old: &OldDist, policy: &GaussianPolicy, obs: &DMatrix<f64>) -> Result<Vec<f64>, AgentError> {
    let cache = policy.forward_batch(obs)?;
    let n = obs.nrows() as f64;
    let ls = policy.log_std();
    let act = policy.arch.act_dim;
    let mut d_mean = DMatrix::zeros(obs.nrows(), act);
    let mut d_ls = vec![0.0; act];
    for i in 0..obs.nrows() {
        for j in 0..act {
            let var = (2.0 * ls[j]).exp();
            let d = cache.mean[(i, j)] - old.mean[(i, j)];
            d_mean[(i, j)] = d / var / n;
            d_ls[j] += (1.0 - ((2.0 * old.log_std[j]).exp() + d * d) / var) / n;
        }
    }
    Ok(policy.backward(&cache, &d_mean, &d_ls))
}

/// `F v + damping · v`, with `F` the Hessian of the mean KL at the current
/// parameters (the average Fisher information of the policy).
pub fn fisher_vector_product(policy: &GaussianPolicy, cache: &ForwardCache, v: &[f64], damping: f64) -> Vec<f64> {
    let n = cache.mean.nrows() as f64;
    let ls = policy.log_std();
    let mut u = policy.mean_jvp(cache, v);
    for j in 0..policy.arch.act_dim {
        let inv_var = (-2.0 * ls[j]).exp() / n;
        u.column_mut(j).scale_mut(inv_var);
    }
    let off = policy.arch.log_std_offset();
    let d_ls: Vec<f64> = v[off..].iter().map(|x| 2.0 * x).collect();
    let mut out = policy.backward(cache, &u, &d_ls);
    for (o, x) in out.iter_mut().zip(v) {
        *o += damping * x;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStatus {
    Accepted,
    /// No backtracking step satisfied both conditions.
    Rejected,
    ZeroGradient,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub status: UpdateStatus,
    pub backtracks: usize,
    pub kl: f64,
    /// Length of the parameter step actually taken.
    pub step_size: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub grad_norm: f64,
}

impl UpdateDiagnostics {
    fn unchanged(status: UpdateStatus, surrogate: f64, grad_norm: f64) -> Self {
        Self {
            status,
            backtracks: 0,
            kl: 0.0,
            step_size: 0.0,
            surrogate_before: surrogate,
            surrogate_after: surrogate,
            grad_norm,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One trust-region step. Returns the new policy (a clone of the old one
/// when no step is accepted). A numerical failure in the solver surfaces as
/// an error so the caller can skip the iteration.
pub fn trpo_update(
    policy: &GaussianPolicy,
    batch: &TrajectoryBatch,
    config: &TrpoConfig,
) -> Result<(GaussianPolicy, UpdateDiagnostics), AgentError> {
    let cache = policy.forward_batch(&batch.observations)?;
    let old = OldDist::of(&cache, policy);
    let surr_old = surrogate_cached(policy, &cache, batch);
    let g = surrogate_grad(policy, batch)?;
    let g_norm = norm(&g);
    if g_norm == 0.0 {
        return Ok((policy.clone(), UpdateDiagnostics::unchanged(UpdateStatus::ZeroGradient, surr_old, 0.0)));
    }
    if !g_norm.is_finite() {
        return Err(AgentError::NumericalFailure("non-finite surrogate gradient".into()));
    }

    let fvp = |v: &[f64]| fisher_vector_product(policy, &cache, v, config.cg_damping);
    let s = conjugate_gradient(fvp, &g, config.cg_iters, config.cg_tol)?;
    let shs: f64 = s.iter().zip(fisher_vector_product(policy, &cache, &s, config.cg_damping)).map(|(a, b)| a * b).sum();
    if !shs.is_finite() || shs <= 0.0 {
        return Err(AgentError::NumericalFailure(format!("step curvature sᵀFs = {shs}")));
    }
    let beta = (2.0 * config.kl_step / shs).sqrt();

    let mut frac = 1.0;
    for k in 0..config.max_backtracks {
        let params: Vec<f64> = policy.params.iter().zip(&s).map(|(p, d)| p + frac * beta * d).collect();
        let candidate = policy.with_params(params);
        let c_cache = candidate.forward_batch(&batch.observations)?;
        let kl = kl_cached(&old, &c_cache, candidate.log_std());
        let surr = surrogate_cached(&candidate, &c_cache, batch);
        if kl.is_finite() && surr.is_finite() && kl <= config.kl_step && surr > surr_old {
            let diag = UpdateDiagnostics {
                status: UpdateStatus::Accepted,
                backtracks: k,
                kl,
                step_size: frac * beta * norm(&s),
                surrogate_before: surr_old,
                surrogate_after: surr,
                grad_norm: g_norm,
            };
            return Ok((candidate, diag));
        }
        frac *= config.backtrack_ratio;
    }
    let mut diag = UpdateDiagnostics::unchanged(UpdateStatus::Rejected, surr_old, g_norm);
    diag.backtracks = config.max_backtracks;
    Ok((policy.clone(), diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::policy::PolicyArch;
    use crate::env::{BoxSpace, RngState};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_policy(rng: &mut RngState, obs: usize, act: usize, hidden: &[usize]) -> GaussianPolicy {
        let mut p =
            GaussianPolicy::new(PolicyArch::new(obs, act, hidden), &BoxSpace::uniform(act, -1.0, 1.0), rng).unwrap();
        for v in p.params.iter_mut() {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        p
    }

    fn random_batch(rng: &mut RngState, policy: &GaussianPolicy, n: usize) -> TrajectoryBatch {
        let obs_dim = policy.arch.obs_dim;
        let observations = DMatrix::from_fn(n, obs_dim, |_, _| rng.random_range(-1.0..1.0));
        let mut paths = vec![crate::agent::sampler::Path::default()];
        for i in 0..n {
            let o: Vec<f64> = observations.row(i).iter().copied().collect();
            let a = policy.sample(&o, rng).unwrap();
            paths[0].log_probs.push(policy.log_prob(&o, &a).unwrap());
            paths[0].observations.push(o);
            paths[0].actions.push(a);
            paths[0].rewards.push(0.0);
        }
        let mut b = TrajectoryBatch::from_paths(&paths, n);
        b.advantages = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        b
    }

    fn fd_check(f: impl Fn(&[f64]) -> f64, grad: &[f64], x: &[f64]) {
        let h = 1e-6;
        for k in 0..x.len() {
            let mut p = x.to_vec();
            p[k] += h;
            let mut m = x.to_vec();
            m[k] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            let denom = grad[k].abs().max(fd.abs()).max(1e-3);
            assert!((grad[k] - fd).abs() / denom <= 1e-5, "param {k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let mut rng = RngState::new(31);
        let p = random_policy(&mut rng, 3, 2, &[6, 4]);
        let b = random_batch(&mut rng, &p, 12);
        // Move away from the sampling policy so ratios differ from one.
        let q = p.with_params(p.params.iter().map(|v| v + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect());
        let g = surrogate_grad(&q, &b).unwrap();
        fd_check(|x| surrogate(&q.with_params(x.to_vec()), &b).unwrap(), &g, &q.params);
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let mut rng = RngState::new(32);
        let p = random_policy(&mut rng, 3, 2, &[6, 4]);
        let obs = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-1.0..1.0));
        let old = OldDist::of(&p.forward_batch(&obs).unwrap(), &p);
        let q = p.with_params(p.params.iter().map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect());
        let g = kl_grad(&old, &q, &obs).unwrap();
        fd_check(|x| mean_kl(&old, &q.with_params(x.to_vec()), &obs).unwrap(), &g, &q.params);
    }

    #[test]
    fn kl_is_zero_at_old_policy() {
        let mut rng = RngState::new(33);
        let p = random_policy(&mut rng, 3, 2, &[5]);
        let obs = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0));
        let old = OldDist::of(&p.forward_batch(&obs).unwrap(), &p);
        assert!(mean_kl(&old, &p, &obs).unwrap().abs() < 1e-15);
    }

    /// Reference: Hessian of the mean KL by second differences.
    fn fd_fisher(p: &GaussianPolicy, obs: &DMatrix<f64>) -> DMatrix<f64> {
        let old = OldDist::of(&p.forward_batch(obs).unwrap(), p);
        let kl = |x: &[f64]| mean_kl(&old, &p.with_params(x.to_vec()), obs).unwrap();
        let d = p.params.len();
        let h = 1e-4;
        DMatrix::from_fn(d, d, |i, j| {
            let shifted = |si: f64, sj: f64| {
                let mut x = p.params.clone();
                x[i] += si * h;
                x[j] += sj * h;
                kl(&x)
            };
            (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0) + shifted(-1.0, -1.0)) / (4.0 * h * h)
        })
    }

    #[test]
    fn fisher_product_matches_dense_assembly() {
        let mut rng = RngState::new(34);
        for hidden in [vec![], vec![3]] {
            let p = random_policy(&mut rng, 1, 1, &hidden);
            let obs = DMatrix::from_fn(6, 1, |_, _| rng.random_range(-1.0..1.0));
            let cache = p.forward_batch(&obs).unwrap();
            let dense = fd_fisher(&p, &obs);
            let v: Vec<f64> = (0..p.params.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fv = fisher_vector_product(&p, &cache, &v, 0.0);
            let expected = &dense * nalgebra::DVector::from_column_slice(&v);
            for (a, b) in fv.iter().zip(expected.iter()) {
                assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn fisher_product_is_linear_and_positive() {
        let mut rng = RngState::new(35);
        let p = random_policy(&mut rng, 4, 2, &[8, 6]);
        let obs = DMatrix::from_fn(20, 4, |_, _| rng.random_range(-1.0..1.0));
        let cache = p.forward_batch(&obs).unwrap();
        let zero = fisher_vector_product(&p, &cache, &vec![0.0; p.params.len()], 1e-5);
        assert!(zero.iter().all(|v| *v == 0.0));
        for _ in 0..20 {
            let v: Vec<f64> = (0..p.params.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fv = fisher_vector_product(&p, &cache, &v, 1e-5);
            assert!(v.iter().zip(&fv).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn zero_advantages_leave_params_unchanged() {
        let mut rng = RngState::new(36);
        let p = random_policy(&mut rng, 3, 2, &[5]);
        let mut b = random_batch(&mut rng, &p, 30);
        b.advantages = vec![0.0; 30];
        let (q, d) = trpo_update(&p, &b, &TrpoConfig::default()).unwrap();
        assert_eq!(d.status, UpdateStatus::ZeroGradient);
        assert_eq!(q.params, p.params);
    }

    #[test]
    fn accepted_steps_respect_trust_region_and_improve() {
        let mut rng = RngState::new(37);
        let cfg = TrpoConfig::default();
        let mut accepted = 0;
        for _ in 0..20 {
            let p = random_policy(&mut rng, 3, 2, &[6, 4]);
            let b = random_batch(&mut rng, &p, 64);
            let (q, d) = trpo_update(&p, &b, &cfg).unwrap();
            let old = OldDist::of(&p.forward_batch(&b.observations).unwrap(), &p);
            match d.status {
                UpdateStatus::Accepted => {
                    accepted += 1;
                    assert!(mean_kl(&old, &q, &b.observations).unwrap() <= cfg.kl_step);
                    assert!(surrogate(&q, &b).unwrap() > surrogate(&p, &b).unwrap());
                }
                _ => assert_eq!(q.params, p.params),
            }
        }
        assert!(accepted > 0);
    }

    #[test]
    fn config_validation_and_hash() {
        assert!(TrpoConfig::default().validate().is_ok());
        assert!(TrpoConfig { gae_lambda: 1.5, ..TrpoConfig::default() }.validate().is_err());
        assert!(TrpoConfig { discount: 0.0, ..TrpoConfig::default() }.validate().is_err());
        assert_eq!(TrpoConfig::default().hash(), TrpoConfig::default().hash());
        assert_ne!(TrpoConfig::default().hash(), TrpoConfig::full_scale().hash());
    }
}
