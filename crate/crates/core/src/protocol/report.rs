//! Group reports: JSON persistence, the four-column results table, raw-return
//! CSV export and a learning-curve plot.

use serde::{Deserialize, Serialize};

use super::eval::{mean_std, EvalStats};
use super::ProtocolError;
use crate::agent::TrpoConfig;

/// The four result columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    FullyTrained,
    AfterEnvTraining,
    FirstStep,
    SingleEnv,
}

impl Column {
    pub const ALL: [Column; 4] = [Column::FullyTrained, Column::AfterEnvTraining, Column::FirstStep, Column::SingleEnv];

    pub fn title(self) -> &'static str {
        match self {
            Column::FullyTrained => "Fully Trained",
            Column::AfterEnvTraining => "After Env Training",
            Column::FirstStep => "First Step",
            Column::SingleEnv => "Single Env",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Column::FullyTrained => "fully_trained",
            Column::AfterEnvTraining => "after_env_training",
            Column::FirstStep => "first_step",
            Column::SingleEnv => "single_env",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRecord {
    pub env_id: String,
    pub first_step: Option<EvalStats>,
    pub after_env_training: Option<EvalStats>,
    pub fully_trained: Option<EvalStats>,
    pub single_env: Option<EvalStats>,
    /// From-scratch evaluation after one iteration, for forward transfer.
    pub single_env_first_iteration: Option<EvalStats>,
    pub after_env_params: Option<String>,
    pub fully_trained_params: Option<String>,
    /// Batch mean return of every training iteration on this env.
    pub learning_curve: Vec<f64>,
}

impl EnvRecord {
    pub fn new(env_id: &str) -> Self {
        Self {
            env_id: env_id.to_string(),
            first_step: None,
            after_env_training: None,
            fully_trained: None,
            single_env: None,
            single_env_first_iteration: None,
            after_env_params: None,
            fully_trained_params: None,
            learning_curve: Vec::new(),
        }
    }

    pub fn column(&self, c: Column) -> Option<&EvalStats> {
        match c {
            Column::FullyTrained => self.fully_trained.as_ref(),
            Column::AfterEnvTraining => self.after_env_training.as_ref(),
            Column::FirstStep => self.first_step.as_ref(),
            Column::SingleEnv => self.single_env.as_ref(),
        }
    }

    fn all_stats(&self) -> impl Iterator<Item = &EvalStats> {
        Column::ALL.into_iter().filter_map(|c| self.column(c)).chain(self.single_env_first_iteration.as_ref())
    }
}

/// Aggregate over the environments that have a column. `mean` is the mean
/// of the per-env means. Two spreads are given: the population std of every
/// pooled raw return, and the plain mean of the per-env stds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTotal {
    pub mean: f64,
    pub pooled_std: f64,
    pub mean_of_stds: f64,
    pub n_envs: usize,
}

impl ColumnTotal {
    pub fn of<'a>(stats: impl IntoIterator<Item = &'a EvalStats>) -> Option<Self> {
        let stats: Vec<&EvalStats> = stats.into_iter().collect();
        if stats.is_empty() {
            return None;
        }
        let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
        let stds: Vec<f64> = stats.iter().map(|s| s.std).collect();
        let pooled: Vec<f64> = stats.iter().flat_map(|s| s.returns.iter().copied()).collect();
        Some(Self {
            mean: mean_std(&means).0,
            pooled_std: mean_std(&pooled).1,
            mean_of_stds: mean_std(&stds).0,
            n_envs: stats.len(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupTotals {
    pub fully_trained: Option<ColumnTotal>,
    pub after_env_training: Option<ColumnTotal>,
    pub first_step: Option<ColumnTotal>,
    pub single_env: Option<ColumnTotal>,
}

impl GroupTotals {
    pub fn column(&self, c: Column) -> Option<&ColumnTotal> {
        match c {
            Column::FullyTrained => self.fully_trained.as_ref(),
            Column::AfterEnvTraining => self.after_env_training.as_ref(),
            Column::FirstStep => self.first_step.as_ref(),
            Column::SingleEnv => self.single_env.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub format: String,
    pub group: String,
    pub description: String,
    pub physics: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: TrpoConfig,
    pub iterations_per_env: usize,
    pub eval_rollouts: usize,
    pub complete: bool,
    pub failure: Option<String>,
    pub envs: Vec<EnvRecord>,
    pub totals: GroupTotals,
}

impl GroupReport {
    pub const FORMAT: &'static str = "mtbench-report v1";

    pub fn recompute_totals(&mut self) {
        let col = |c| ColumnTotal::of(self.envs.iter().filter_map(|r| r.column(c)));
        self.totals = GroupTotals {
            fully_trained: col(Column::FullyTrained),
            after_env_training: col(Column::AfterEnvTraining),
            first_step: col(Column::FirstStep),
            single_env: col(Column::SingleEnv),
        };
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses and checks a report: every summary must recompute exactly from
    /// its raw returns and the stored totals must match the records.
    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let r: GroupReport = serde_json::from_str(text).map_err(|e| ProtocolError::MalformedReport(e.to_string()))?;
        if r.format != Self::FORMAT {
            return Err(ProtocolError::MalformedReport(format!("unsupported format `{}`", r.format)));
        }
        for rec in &r.envs {
            if let Some(bad) = rec.all_stats().find(|s| !s.is_consistent()) {
                return Err(ProtocolError::MalformedReport(format!(
                    "`{}`: summary {} ± {} does not match its {} stored returns",
                    rec.env_id,
                    bad.mean,
                    bad.std,
                    bad.returns.len()
                )));
            }
        }
        let mut check = r.clone();
        check.recompute_totals();
        if serde_json::to_value(&check.totals).ok() != serde_json::to_value(&r.totals).ok() {
            return Err(ProtocolError::MalformedReport("group totals do not match the per-env records".into()));
        }
        Ok(r)
    }

    /// Aligned text table with one row per env and two total rows.
    pub fn render_table(&self) -> String {
        let cell = |s: Option<(f64, f64)>| s.map_or_else(|| "n/a".to_string(), |(m, d)| format!("{m:.2} ± {d:.2}"));
        let mut rows: Vec<Vec<String>> = Vec::new();
        rows.push(
            std::iter::once("Environment".to_string())
                .chain(Column::ALL.iter().map(|c| c.title().to_string()))
                .collect(),
        );
        for r in &self.envs {
            let mut row = vec![r.env_id.clone()];
            row.extend(Column::ALL.iter().map(|&c| cell(r.column(c).map(|s| (s.mean, s.std)))));
            rows.push(row);
        }
        let total_row = |label: &str, spread: fn(&ColumnTotal) -> f64| {
            let mut row = vec![label.to_string()];
            row.extend(Column::ALL.iter().map(|&c| cell(self.totals.column(c).map(|t| (t.mean, spread(t))))));
            row
        };
        let n_body = rows.len();
        rows.push(total_row("Total (pooled std)", |t| t.pooled_std));
        rows.push(total_row("Total (mean of stds)", |t| t.mean_of_stds));

        let ncol = rows[0].len();
        let widths: Vec<usize> =
            (0..ncol).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
        let line = |r: &Vec<String>| {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let pad = widths[j] - c.chars().count();
                    if j == 0 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            cells.join(" | ").trim_end().to_string()
        };
        let rule: String = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");

        let mut out = format!(
            "{} ({}): seed {}, config {}, {} iterations/env, {} rollouts per evaluation{}\n",
            self.group,
            self.description,
            self.seed,
            self.config_hash,
            self.iterations_per_env,
            self.eval_rollouts,
            if self.complete { String::new() } else { format!(", PARTIAL: {}", self.failure.as_deref().unwrap_or("")) }
        );
        for (i, r) in rows.iter().enumerate() {
            if i == 1 || i == n_body {
                out.push_str(&rule);
                out.push('\n');
            }
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    /// Every stored rollout return as `env_id,column,rollout,return`.
    pub fn returns_csv(&self) -> Result<String, ProtocolError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| ProtocolError::MalformedReport(e.to_string());
        w.write_record(["env_id", "column", "rollout", "return"]).map_err(csv_err)?;
        for r in &self.envs {
            let cols = Column::ALL
                .iter()
                .filter_map(|&c| r.column(c).map(|s| (c.key(), s)))
                .chain(r.single_env_first_iteration.as_ref().map(|s| ("single_env_first_iteration", s)));
            for (key, s) in cols {
                for (k, v) in s.returns.iter().enumerate() {
                    w.write_record([r.env_id.as_str(), key, &k.to_string(), &v.to_string()]).map_err(csv_err)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| ProtocolError::MalformedReport(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// SVG plot of batch mean return per training iteration, one series per
    /// env laid end to end in training order.
    pub fn learning_svg(&self) -> Result<String, ProtocolError> {
        use plotters::prelude::*;

        let total: usize = self.envs.iter().map(|r| r.learning_curve.len()).sum();
        let ys = self.envs.iter().flat_map(|r| r.learning_curve.iter().copied()).filter(|v| v.is_finite());
        let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let pad = ((hi - lo) * 0.05).max(1e-6);
        let plot_err = |e: String| ProtocolError::Plot(e);

        let mut svg = String::new();
        {
            let root = SVGBackend::with_string(&mut svg, (960, 540)).into_drawing_area();
            root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
            let mut chart = ChartBuilder::on(&root)
                .margin(20)
                .x_label_area_size(40)
                .y_label_area_size(60)
                .build_cartesian_2d(0f64..total.max(1) as f64, (lo - pad)..(hi + pad))
                .map_err(|e| plot_err(e.to_string()))?;
            chart
                .configure_mesh()
                .x_desc("training iteration")
                .y_desc("batch mean return")
                .draw()
                .map_err(|e| plot_err(e.to_string()))?;
            let mut offset = 0usize;
            for (i, r) in self.envs.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                let pts: Vec<(f64, f64)> =
                    r.learning_curve.iter().enumerate().map(|(k, v)| ((offset + k) as f64, *v)).collect();
                offset += r.learning_curve.len();
                chart
                    .draw_series(LineSeries::new(pts, color.stroke_width(2)))
                    .map_err(|e| plot_err(e.to_string()))?
                    .label(r.env_id.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| plot_err(e.to_string()))?;
            root.present().map_err(|e| plot_err(e.to_string()))?;
        }
        Ok(svg)
    }
}
