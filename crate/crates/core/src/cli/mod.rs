//! The `mtbench` command line.
//!
//! Exit status is 0 only when the requested pipeline finished in full. Other
//! outcomes map to one [`Category`] each, printed with the error message.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::agent::AgentError;
use crate::env::EnvError;
use crate::protocol::ProtocolError;

pub use config::{parse_config, RunConfig, RunFlags};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Config,
    Io,
    Environment,
    Training,
    Report,
}

impl Category {
    pub fn exit_code(self) -> u8 {
        match self {
            Category::Usage => 2,
            Category::Config => 3,
            Category::Io => 4,
            Category::Environment => 5,
            Category::Training => 6,
            Category::Report => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Config => "config",
            Category::Io => "io",
            Category::Environment => "environment",
            Category::Training => "training",
            Category::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self { category, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::Config, message)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error [{}]: {}", self.category.name(), self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(Category::Io, e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        Self::new(Category::Environment, e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Io(io) => io.into(),
            AgentError::Env(env) => env.into(),
            AgentError::InvalidConfig(m) => Self::config(m),
            other => Self::new(Category::Training, other.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::InvalidGroup(m) => Self::config(m),
            ProtocolError::MalformedReport(m) => Self::new(Category::Report, m),
            ProtocolError::Plot(m) => Self::new(Category::Report, format!("plot: {m}")),
            ProtocolError::Env(env) => env.into(),
            ProtocolError::Agent(a) => a.into(),
            other => Self::new(Category::Training, other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mtbench", version, about = "Multitask continuous-control benchmark suite")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List registered environments, or the task groups with --groups.
    List {
        /// Only this family: nav2d, runner or arm.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        groups: bool,
    },
    /// Train one policy through a group and write the report files.
    Run(RunArgs),
    /// Train a fresh policy on each member of a group separately.
    Baseline(RunArgs),
    /// Print a saved report as a table and write its plot and CSV.
    Render {
        report: PathBuf,
        /// Where to write the rendered files; defaults to the report's directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print an environment's spec and variation parameters as JSON.
    DumpEnv {
        id: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also roll out this many steps with seeded uniform random actions.
        #[arg(long, default_value_t = 0)]
        steps: usize,
        /// Write the step trace here (JSON lines) instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training iterations per environment.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Minimum environment steps per training batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub eval_rollouts: Option<usize>,
    /// Exact output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Parent directory for the default `<group>-seed<seed>` output folder.
    #[arg(long)]
    pub output_root: Option<PathBuf>,
    /// `desk` (default) or `full`.
    #[arg(long)]
    pub scale: Option<String>,
    /// `key = value` settings file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Skip the single-environment baselines (run only).
    #[arg(long)]
    pub skip_baselines: bool,
}

impl RunArgs {
    fn flags(&self) -> RunFlags {
        RunFlags {
            group: self.group.clone(),
            seed: self.seed,
            iterations: self.iterations,
            batch_size: self.batch_size,
            eval_rollouts: self.eval_rollouts,
            output: self.output.clone(),
            output_root: self.output_root.clone(),
            scale: self.scale.clone(),
            config: self.config.clone(),
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        RunConfig::resolve(&self.flags(), std::env::var(config::OUTPUT_ENV).ok())
    }
}

/// Runs a parsed command, writing normal output to `out`.
pub fn execute(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match cli.command {
        Command::List { family, groups } => commands::list(family.as_deref(), groups, out),
        Command::Run(args) => commands::run(&args.resolve()?, !args.skip_baselines, out),
        Command::Baseline(args) => commands::baseline(&args.resolve()?, out),
        Command::Render { report, output } => commands::render(&report, output.as_deref(), out),
        Command::DumpEnv { id, seed, steps, trace } => commands::dump_env(&id, seed, steps, trace.as_deref(), out),
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mtbench: {e}");
            ExitCode::from(e.category.exit_code())
        }
    }
}
