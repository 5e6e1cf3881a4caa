//! Run settings: `key = value` config files merged under command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{Category, CliError};
use crate::agent::TrpoConfig;
use crate::protocol::{find_group, TaskGroup, DESK_ITERATIONS};

pub const OUTPUT_ENV: &str = "MTBENCH_OUTPUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "results";
pub const DESK_BATCH: usize = 5000;
pub const FULL_BATCH: usize = 50_000;

const KEYS: [&str; 8] =
    ["group", "seed", "iterations", "batch_size", "eval_rollouts", "output", "output_root", "scale"];

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("line {}: expected `key = value`, got `{raw}`", n + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::config(format!("line {}: unknown key `{}`", n + 1, k.trim())));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::config(format!("line {}: `{key}` given twice", n + 1)));
        }
    }
    Ok(out)
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub group: Option<String>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub batch_size: Option<usize>,
    pub eval_rollouts: Option<usize>,
    pub output: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
    pub scale: Option<String>,
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub group: String,
    pub seed: u64,
    pub iterations: Option<usize>,
    pub batch_size: Option<usize>,
    pub eval_rollouts: Option<usize>,
    pub output: PathBuf,
    pub desk_scale: bool,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::config(format!("`{key}` must be a non-negative integer, got `{v}`")))
}

fn parse_scale(v: &str) -> Result<bool, CliError> {
    match v {
        "desk" => Ok(true),
        "full" => Ok(false),
        _ => Err(CliError::config(format!("`scale` must be `desk` or `full`, got `{v}`"))),
    }
}

impl RunConfig {
    /// Flags first, then the config file, then the environment and defaults.
    pub fn resolve(flags: &RunFlags, env_root: Option<String>) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::new(Category::Io, format!("reading {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let get = |k: &str| file.get(k).map(String::as_str);
        let pick_num = |flag: Option<usize>, k: &str| -> Result<Option<usize>, CliError> {
            match flag {
                Some(v) => Ok(Some(v)),
                None => get(k).map(|v| parse_num(k, v)).transpose(),
            }
        };

        let group = flags
            .group
            .clone()
            .or_else(|| get("group").map(str::to_string))
            .ok_or_else(|| CliError::config("no group given; pass --group or set `group` in the config file"))?;
        find_group(&group).map_err(|e| CliError::config(e.to_string()))?;
        let seed = match flags.seed {
            Some(s) => s,
            None => get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0),
        };
        let desk_scale = match flags.scale.as_deref().or(get("scale")) {
            Some(v) => parse_scale(v)?,
            None => true,
        };
        let output = match flags.output.clone().or_else(|| get("output").map(PathBuf::from)) {
            Some(p) => p,
            None => {
                let root = flags
                    .output_root
                    .clone()
                    .or_else(|| get("output_root").map(PathBuf::from))
                    .or_else(|| env_root.filter(|s| !s.is_empty()).map(PathBuf::from))
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
                root.join(format!("{group}-seed{seed}"))
            }
        };
        Ok(Self {
            group,
            seed,
            iterations: pick_num(flags.iterations, "iterations")?,
            batch_size: pick_num(flags.batch_size, "batch_size")?,
            eval_rollouts: pick_num(flags.eval_rollouts, "eval_rollouts")?,
            output,
            desk_scale,
        })
    }

    /// The catalogued group with this run's budget applied.
    pub fn task_group(&self) -> Result<TaskGroup, CliError> {
        let mut g = find_group(&self.group).map_err(|e| CliError::config(e.to_string()))?;
        g.iterations_per_env = match (self.iterations, self.desk_scale) {
            (Some(n), _) => n,
            (None, true) => DESK_ITERATIONS,
            (None, false) => g.iterations_per_env,
        };
        if let Some(n) = self.eval_rollouts {
            g.eval_rollouts = n;
        }
        if g.iterations_per_env == 0 || g.eval_rollouts == 0 {
            return Err(CliError::config("iterations and eval_rollouts must be at least 1"));
        }
        Ok(g)
    }

    pub fn trpo_config(&self) -> Result<TrpoConfig, CliError> {
        let group = self.task_group()?;
        let base = if self.desk_scale { TrpoConfig::default() } else { TrpoConfig::full_scale() };
        let batch_size = self.batch_size.unwrap_or(if self.desk_scale { DESK_BATCH } else { FULL_BATCH });
        let cfg = TrpoConfig { batch_size, iterations: group.iterations_per_env, ..base };
        cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn output_dir(&self) -> &Path {
        &self.output
    }
}
