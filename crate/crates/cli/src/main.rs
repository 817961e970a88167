mod action_cmd;
mod bench_cmd;
mod io;
mod penalty_cmd;
mod run_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Agentic protein-design environment: penalty tooling, protocol rendering,
/// trajectories and evaluation.
#[derive(Parser)]
#[command(name = "rsgym", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum SyntaxArg {
    #[default]
    Auto,
    Simplified,
    Original,
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Query budget.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    backend: Option<rsgym::config::BackendKind>,
    /// Overrides the model name of the configured profile.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compile simplified penalty blocks into the original syntax.
    Compile {
        #[arg(default_value = "-")]
        input: String,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Evaluate penalty blocks at occupancies (`3` is a count, `0.25` a fraction).
    Eval {
        input: String,
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<String>,
        #[arg(long, value_enum, default_value_t)]
        syntax: SyntaxArg,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Check that ACTUAL computes the same penalties as EXPECTED. Without
    /// ACTUAL, EXPECTED is checked against its own compilation.
    Verify {
        expected: String,
        actual: Option<String>,
        #[arg(long, value_enum, default_value_t)]
        syntax: SyntaxArg,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Decode the first action in an agent response.
    ParseAction {
        #[arg(default_value = "-")]
        input: String,
        /// Current trajectory step, bounding go_back_to_step.
        #[arg(long, default_value_t = 0)]
        step: usize,
        /// Reasoning delimiters to strip before decoding.
        #[arg(long, num_args = 2, value_names = ["OPEN", "CLOSE"])]
        reasoning_tags: Option<Vec<String>>,
        /// Run config supplying the residue palette.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the protocol for an action (response text or action JSON).
    RenderScript {
        #[arg(default_value = "-")]
        input: String,
        /// Step the protocol will produce.
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the protocol and its penalty files here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a trajectory against a live model endpoint.
    Run(RunArgs),
    /// Run a trajectory from a recorded transcript.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Grade penalty-block generations for the bench prompts.
    BenchPenalty {
        #[arg(long, value_enum)]
        syntax: BenchSyntax,
        /// Recorded replies, served in prompt-major order.
        #[arg(long, conflicts_with = "config")]
        transcript: Option<PathBuf>,
        /// Run config whose model profile is queried live.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Percentile and best-of-n bootstrap reports from trajectory logs.
    Stats {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n_boot: usize,
        #[arg(long, default_value_t = 8)]
        sample_size: usize,
        #[arg(long, default_value_t = rsgym::evalkit::PLDDT_FLOOR)]
        plddt_floor: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BenchSyntax {
    Simplified,
    Original,
}

/// A bad flag value found after argument parsing.
#[derive(Debug)]
pub struct UsageError {
    pub flag: &'static str,
    pub message: String,
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid value for {}: {}", self.flag, self.message)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(flag: &'static str, message: impl Into<String>) -> anyhow::Error {
    UsageError { flag, message: message.into() }.into()
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Compile { input, format } => penalty_cmd::compile(&input, format),
        Command::Eval { input, at, syntax, format } => penalty_cmd::eval(&input, &at, syntax, format),
        Command::Verify { expected, actual, syntax, format } => {
            penalty_cmd::verify(&expected, actual.as_deref(), syntax, format)
        }
        Command::ParseAction { input, step, reasoning_tags, config } => {
            action_cmd::parse_action(&input, step, reasoning_tags, config.as_deref())
        }
        Command::RenderScript { input, step, config, out } => {
            action_cmd::render_script(&input, step, config.as_deref(), out.as_deref())
        }
        Command::Run(args) => run_cmd::run(&args, None),
        Command::Replay { run, transcript } => run_cmd::run(&run, Some(&transcript)),
        Command::BenchPenalty { syntax, transcript, config, n, out } => {
            bench_cmd::bench(syntax, transcript.as_deref(), config.as_deref(), n, out.as_deref())
        }
        Command::Stats { logs, seed, n_boot, sample_size, plddt_floor, out } => {
            bench_cmd::stats(&logs, seed, n_boot, sample_size, plddt_floor, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("RSGYM_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
