//! Sequential training across a group, single-environment baselines and the
//! transfer deltas derived from them.

use serde::{Deserialize, Serialize};

use super::eval::{evaluate_in, params_hash, EvalStats};
use super::group::TaskGroup;
use super::report::{EnvRecord, GroupReport};
use super::ProtocolError;
use crate::agent::{DiagnosticsLog, GaussianPolicy, Trainer, TrpoConfig, UpdateStatus};
use crate::env::{Registry, RngState, PHYSICS_TAG};

/// Seeds derived from the run seed. Evaluation seeds depend only on the
/// checkpoint kind and the environment's position, so the after-training and
/// final evaluations of one environment replay the same episodes.
#[derive(Debug, Clone, Copy)]
struct Seeds(RngState);

impl Seeds {
    fn new(seed: u64) -> Self {
        Seeds(RngState::new(seed))
    }

    fn trainer(&self) -> u64 {
        self.0.split(RngState::tag_of("trainer")).seed
    }

    fn train_env(&self, index: usize) -> u64 {
        self.0.split_path(&[RngState::tag_of("train-env"), index as u64]).seed
    }

    fn first_step(&self, index: usize) -> u64 {
        self.0.split_path(&[RngState::tag_of("first-step"), index as u64]).seed
    }

    fn eval(&self, index: usize) -> u64 {
        self.0.split_path(&[RngState::tag_of("eval"), index as u64]).seed
    }
}

/// Report plus the policy as it stood when the run stopped.
pub struct GroupOutcome {
    pub report: GroupReport,
    pub policy: GaussianPolicy,
}

fn check_inputs(registry: &Registry, group: &TaskGroup, config: &TrpoConfig) -> Result<(), ProtocolError> {
    group.validate(registry)?;
    config.validate()?;
    if group.iterations_per_env == 0 {
        return Err(ProtocolError::InvalidGroup("iterations_per_env must be at least 1".into()));
    }
    Ok(())
}

fn fresh_trainer(
    registry: &Registry,
    group: &TaskGroup,
    config: &TrpoConfig,
    seeds: Seeds,
) -> Result<Trainer, ProtocolError> {
    let env = registry.make(&group.env_ids[0], 0)?;
    Ok(Trainer::for_env(env.as_ref(), config.clone(), seeds.trainer())?)
}

/// Trains on one environment for the group's budget. The evaluation after the
/// first iteration is returned together with the per-iteration batch returns.
fn train_on(
    registry: &Registry,
    trainer: &mut Trainer,
    group: &TaskGroup,
    index: usize,
    seeds: Seeds,
    curve: &mut Vec<f64>,
    mut log: Option<&mut DiagnosticsLog>,
) -> Result<EvalStats, ProtocolError> {
    let id = &group.env_ids[index];
    let mut env = registry.make(id, seeds.train_env(index))?;
    let mut first = None;
    for k in 0..group.iterations_per_env {
        let d = trainer.train_iteration(env.as_mut())?;
        if let Some(l) = log.as_deref_mut() {
            l.append(&d)?;
        }
        curve.push(d.mean_return);
        if d.status == UpdateStatus::NumericalFailure {
            return Err(ProtocolError::Agent(crate::agent::AgentError::NumericalFailure(format!(
                "update {k} on `{id}` failed"
            ))));
        }
        if k == 0 {
            first = Some(evaluate_in(registry, &trainer.policy, id, group.eval_rollouts, seeds.first_step(index))?);
        }
    }
    Ok(first.expect("at least one iteration"))
}

fn sequence(
    registry: &Registry,
    trainer: &mut Trainer,
    group: &TaskGroup,
    seeds: Seeds,
    report: &mut GroupReport,
    mut log: Option<&mut DiagnosticsLog>,
) -> Result<(), ProtocolError> {
    for (i, id) in group.env_ids.iter().enumerate() {
        report.envs.push(EnvRecord::new(id));
        let mut curve = Vec::with_capacity(group.iterations_per_env);
        let first = train_on(registry, trainer, group, i, seeds, &mut curve, log.as_deref_mut());
        let rec = report.envs.last_mut().expect("just pushed");
        rec.learning_curve = curve;
        rec.first_step = Some(first?);
        rec.after_env_training = Some(evaluate_in(registry, &trainer.policy, id, group.eval_rollouts, seeds.eval(i))?);
        rec.after_env_params = Some(params_hash(&trainer.policy));
    }
    let final_hash = params_hash(&trainer.policy);
    for (i, rec) in report.envs.iter_mut().enumerate() {
        rec.fully_trained =
            Some(evaluate_in(registry, &trainer.policy, &rec.env_id, group.eval_rollouts, seeds.eval(i))?);
        rec.fully_trained_params = Some(final_hash.clone());
    }
    let last = report.envs.last().expect("group is non-empty");
    if last.after_env_params.as_deref() != Some(final_hash.as_str()) {
        return Err(ProtocolError::Bookkeeping(format!(
            "`{}` was evaluated after training with parameters {:?} but the final policy is {final_hash}",
            last.env_id, last.after_env_params
        )));
    }
    Ok(())
}

fn empty_report(group: &TaskGroup, config: &TrpoConfig, seed: u64) -> GroupReport {
    GroupReport {
        format: GroupReport::FORMAT.to_string(),
        group: group.name.clone(),
        description: group.description.clone(),
        physics: PHYSICS_TAG.to_string(),
        seed,
        config_hash: config.hash(),
        config: config.clone(),
        iterations_per_env: group.iterations_per_env,
        eval_rollouts: group.eval_rollouts,
        complete: false,
        failure: None,
        envs: Vec::new(),
        totals: Default::default(),
    }
}

/// Trains one policy through the group in order, recording the first-step,
/// after-training and final evaluations. A failure part-way through returns a
/// partial report holding everything finished before it.
pub fn run_group_in(
    registry: &Registry,
    group: &TaskGroup,
    config: &TrpoConfig,
    seed: u64,
    log: Option<&mut DiagnosticsLog>,
) -> Result<GroupOutcome, ProtocolError> {
    check_inputs(registry, group, config)?;
    let seeds = Seeds::new(seed);
    let mut trainer = fresh_trainer(registry, group, config, seeds)?;
    let mut report = empty_report(group, config, seed);
    match sequence(registry, &mut trainer, group, seeds, &mut report, log) {
        Ok(()) => report.complete = true,
        Err(e) => report.failure = Some(e.to_string()),
    }
    report.recompute_totals();
    Ok(GroupOutcome { report, policy: trainer.policy })
}

pub fn run_group(group: &TaskGroup, config: &TrpoConfig, seed: u64) -> Result<GroupOutcome, ProtocolError> {
    run_group_in(crate::env::registry(), group, config, seed, None)
}

/// Result of training a fresh policy on a single environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleEnvResult {
    pub env_id: String,
    pub config_hash: String,
    /// Evaluation after the first iteration, the from-scratch counterpart of
    /// the group's first-step column.
    pub first_iteration: EvalStats,
    pub final_eval: EvalStats,
    pub params_hash: String,
    pub learning_curve: Vec<f64>,
}

/// One freshly initialised policy per environment, with the group run's
/// budget and seeds. Each baseline starts from the same initial parameters
/// and replays the same training and evaluation streams as the group run
/// would at that position, so the only difference is the absence of earlier
/// environments.
pub fn run_single_env_baselines_in(
    registry: &Registry,
    group: &TaskGroup,
    config: &TrpoConfig,
    seed: u64,
    mut log: Option<&mut DiagnosticsLog>,
) -> Result<Vec<SingleEnvResult>, ProtocolError> {
    check_inputs(registry, group, config)?;
    let seeds = Seeds::new(seed);
    let mut out = Vec::with_capacity(group.env_ids.len());
    for (i, id) in group.env_ids.iter().enumerate() {
        let mut trainer = fresh_trainer(registry, group, config, seeds)?;
        let mut curve = Vec::new();
        let first_iteration = train_on(registry, &mut trainer, group, i, seeds, &mut curve, log.as_deref_mut())?;
        out.push(SingleEnvResult {
            env_id: id.clone(),
            config_hash: config.hash(),
            first_iteration,
            final_eval: evaluate_in(registry, &trainer.policy, id, group.eval_rollouts, seeds.eval(i))?,
            params_hash: params_hash(&trainer.policy),
            learning_curve: curve,
        });
    }
    Ok(out)
}

pub fn run_single_env_baselines(
    group: &TaskGroup,
    config: &TrpoConfig,
    seed: u64,
) -> Result<Vec<SingleEnvResult>, ProtocolError> {
    run_single_env_baselines_in(crate::env::registry(), group, config, seed, None)
}

/// Copies baseline results into the report's single-env column.
pub fn attach_baselines(report: &mut GroupReport, baselines: &[SingleEnvResult]) -> Result<(), ProtocolError> {
    for b in baselines {
        if b.config_hash != report.config_hash {
            return Err(ProtocolError::Bookkeeping(format!(
                "baseline for `{}` used config {} but the group run used {}",
                b.env_id, b.config_hash, report.config_hash
            )));
        }
        let rec = report
            .envs
            .iter_mut()
            .find(|r| r.env_id == b.env_id)
            .ok_or_else(|| ProtocolError::Bookkeeping(format!("`{}` is not part of the report", b.env_id)))?;
        rec.single_env = Some(b.final_eval.clone());
        rec.single_env_first_iteration = Some(b.first_iteration.clone());
    }
    report.recompute_totals();
    Ok(())
}

/// Group run followed by the single-environment baselines. The baselines are
/// skipped when the group run is partial.
pub fn run_full_in(
    registry: &Registry,
    group: &TaskGroup,
    config: &TrpoConfig,
    seed: u64,
    mut log: Option<&mut DiagnosticsLog>,
) -> Result<GroupOutcome, ProtocolError> {
    let mut outcome = run_group_in(registry, group, config, seed, log.as_deref_mut())?;
    if outcome.report.complete {
        match run_single_env_baselines_in(registry, group, config, seed, log) {
            Ok(b) => attach_baselines(&mut outcome.report, &b)?,
            Err(e) => {
                outcome.report.complete = false;
                outcome.report.failure = Some(format!("single-env baselines: {e}"));
            }
        }
    }
    Ok(outcome)
}

/// Per-environment transfer numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub env_id: String,
    /// First-step mean minus the from-scratch first-iteration mean.
    pub forward_transfer: Option<f64>,
    /// Final-policy mean minus the mean right after training on this env.
    pub backward_delta: Option<f64>,
}

/// `a.mean − b.mean`.
pub fn mean_delta(a: &EvalStats, b: &EvalStats) -> f64 {
    a.mean - b.mean
}

pub fn transfer_metrics(report: &GroupReport) -> Result<Vec<TransferRecord>, ProtocolError> {
    if !report.complete {
        return Err(ProtocolError::Incomplete(report.failure.clone().unwrap_or_else(|| "report is partial".into())));
    }
    Ok(report
        .envs
        .iter()
        .map(|r| TransferRecord {
            env_id: r.env_id.clone(),
            forward_transfer: r
                .first_step
                .as_ref()
                .zip(r.single_env_first_iteration.as_ref())
                .map(|(a, b)| mean_delta(a, b)),
            backward_delta: r.fully_trained.as_ref().zip(r.after_env_training.as_ref()).map(|(a, b)| mean_delta(a, b)),
        })
        .collect())
}
