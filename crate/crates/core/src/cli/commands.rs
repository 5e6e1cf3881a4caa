use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use super::{Category, CliError, RunConfig};
use crate::agent::{checkpoint, DiagnosticsLog};
use crate::env::{registry, BoxSpace, EnvSpec, Family, RngState};
use crate::protocol::{
    catalogue, run_full_in, run_group_in, run_single_env_baselines_in, transfer_metrics, GroupReport,
};

pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "table.txt";
pub const RETURNS_FILE: &str = "returns.csv";
pub const PLOT_FILE: &str = "learning.svg";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";
pub const BASELINES_FILE: &str = "baselines.json";
pub const POLICY_FILE: &str = "policy.ckpt";

pub fn list(family: Option<&str>, groups: bool, out: &mut dyn Write) -> Result<(), CliError> {
    if groups {
        for g in catalogue() {
            writeln!(out, "{}\t{} envs\t{}", g.name, g.env_ids.len(), g.description)?;
        }
        return Ok(());
    }
    let family = match family {
        None | Some("") => None,
        Some(f) => Some(Family::parse(f).ok_or_else(|| CliError::config(format!("unknown family `{f}`")))?),
    };
    for spec in registry().list(family) {
        writeln!(out, "{}", spec.id)?;
    }
    Ok(())
}

/// A fresh diagnostics log; any earlier file is replaced so reruns into the
/// same directory produce the same bytes.
fn fresh_log(path: &Path) -> Result<DiagnosticsLog, CliError> {
    if path.exists() {
        std::fs::remove_file(path)?;
    }
    Ok(DiagnosticsLog::create(path)?)
}

fn write_rendered(report: &GroupReport, dir: &Path) -> Result<String, CliError> {
    let table = report.render_table();
    std::fs::write(dir.join(TABLE_FILE), &table)?;
    std::fs::write(dir.join(RETURNS_FILE), report.returns_csv()?)?;
    std::fs::write(dir.join(PLOT_FILE), report.learning_svg()?)?;
    Ok(table)
}

pub fn run(cfg: &RunConfig, with_baselines: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let group = cfg.task_group()?;
    let trpo = cfg.trpo_config()?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(dir)?;
    let mut log = fresh_log(&dir.join(DIAGNOSTICS_FILE))?;
    let started = Instant::now();
    let outcome = if with_baselines {
        run_full_in(registry(), &group, &trpo, cfg.seed, Some(&mut log))?
    } else {
        run_group_in(registry(), &group, &trpo, cfg.seed, Some(&mut log))?
    };
    let report = &outcome.report;
    std::fs::write(dir.join(REPORT_FILE), report.to_json())?;
    checkpoint::save(&dir.join(POLICY_FILE), &outcome.policy, &report.config_hash)?;
    let table = write_rendered(report, dir)?;
    write!(out, "{table}")?;
    if report.complete {
        for t in transfer_metrics(report)? {
            let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |x| format!("{x:.2}"));
            writeln!(
                out,
                "{}: forward transfer {}, backward delta {}",
                t.env_id,
                fmt(t.forward_transfer),
                fmt(t.backward_delta)
            )?;
        }
    }
    eprintln!("mtbench: wrote {} in {:.1} s", dir.display(), started.elapsed().as_secs_f64());
    match &report.failure {
        None => Ok(()),
        Some(f) => Err(CliError::new(Category::Training, format!("run stopped early, partial report written: {f}"))),
    }
}

pub fn baseline(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let group = cfg.task_group()?;
    let trpo = cfg.trpo_config()?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(dir)?;
    let mut log = fresh_log(&dir.join(DIAGNOSTICS_FILE))?;
    let results = run_single_env_baselines_in(registry(), &group, &trpo, cfg.seed, Some(&mut log))?;
    let mut json =
        serde_json::to_string_pretty(&results).map_err(|e| CliError::new(Category::Report, e.to_string()))?;
    json.push('\n');
    std::fs::write(dir.join(BASELINES_FILE), json)?;
    for r in &results {
        writeln!(out, "{}\t{:.2} ± {:.2}", r.env_id, r.final_eval.mean, r.final_eval.std)?;
    }
    Ok(())
}

pub fn render(report_path: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(report_path)
        .map_err(|e| CliError::new(Category::Io, format!("reading {}: {e}", report_path.display())))?;
    let report = GroupReport::from_json(&text)?;
    let dir = match output {
        Some(d) => d.to_path_buf(),
        None => report_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir)?;
    }
    let table = write_rendered(&report, &dir)?;
    write!(out, "{table}")?;
    Ok(())
}

#[derive(Serialize)]
struct EnvDump<'a> {
    #[serde(flatten)]
    spec: &'a EnvSpec,
    observation_shape: Vec<usize>,
    observation_space: &'a BoxSpace,
    action_space: &'a BoxSpace,
}

#[derive(Serialize)]
struct TraceLine {
    step: usize,
    action: Option<Vec<f64>>,
    observation: Vec<f64>,
    reward: f64,
    done: bool,
}

/// Prints the spec as JSON. With `steps > 0` a JSON-lines trace is produced
/// as well, its first line being the reset observation; without a `trace`
/// path the trace replaces the spec on `out`. Actions are uniform over the
/// action box, drawn from a stream seeded by `seed`, and the env resets
/// whenever an episode ends.
pub fn dump_env(id: &str, seed: u64, steps: usize, trace: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = registry().spec(id)?;
    let mut env = spec.build(seed)?;
    let dump = EnvDump {
        spec,
        observation_shape: env.observation_shape(),
        observation_space: env.observation_space(),
        action_space: env.action_space(),
    };
    let json = serde_json::to_string_pretty(&dump).map_err(|e| CliError::new(Category::Report, e.to_string()))?;
    if steps == 0 {
        writeln!(out, "{json}")?;
        return Ok(());
    }

    let mut lines = Vec::with_capacity(steps + 1);
    let mut rng = RngState::new(seed).split(RngState::tag_of("dump-actions"));
    let space = env.action_space().clone();
    let mut push = |l: TraceLine| serde_json::to_string(&l).map(|s| lines.push(s));
    let ser = |e: serde_json::Error| CliError::new(Category::Report, e.to_string());
    push(TraceLine { step: 0, action: None, observation: env.reset(), reward: 0.0, done: false }).map_err(ser)?;
    for t in 1..=steps {
        let action: Vec<f64> =
            space.low().iter().zip(space.high()).map(|(&lo, &hi)| rng.random_range(lo..=hi)).collect();
        let r = env.step(&action)?;
        let done = r.done;
        push(TraceLine { step: t, action: Some(action), observation: r.observation, reward: r.reward, done })
            .map_err(ser)?;
        if done && t < steps {
            push(TraceLine { step: t, action: None, observation: env.reset(), reward: 0.0, done: false })
                .map_err(ser)?;
        }
    }
    let body = lines.join("\n") + "\n";
    match trace {
        Some(p) => {
            writeln!(out, "{json}")?;
            std::fs::write(p, body)?;
        }
        None => out.write_all(body.as_bytes())?,
    }
    Ok(())
}
