//! Sequential multitask protocol: one policy is trained through a group's
//! environments in order and evaluated after the first iteration on each new
//! environment, after finishing that environment, and at the very end on
//! every member. Single-environment baselines supply the fourth column.

pub mod eval;
pub mod group;
pub mod report;
pub mod run;

use thiserror::Error;

use crate::agent::AgentError;
use crate::env::EnvError;

pub use eval::{evaluate, evaluate_env, evaluate_in, mean_std, params_hash, EvalStats};
pub use group::{catalogue, find_group, TaskGroup, DESK_ITERATIONS, EVAL_ROLLOUTS};
pub use report::{Column, ColumnTotal, EnvRecord, GroupReport, GroupTotals};
pub use run::{
    attach_baselines, mean_delta, run_full_in, run_group, run_group_in, run_single_env_baselines,
    run_single_env_baselines_in, transfer_metrics, GroupOutcome, SingleEnvResult, TransferRecord,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("bookkeeping: {0}")]
    Bookkeeping(String),
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("report incomplete: {0}")]
    Incomplete(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}
