use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;
use txf_cli::{
    cmd_build, cmd_compare, cmd_contamination, cmd_evaluate, cmd_scoreboard, BuildOptions, CliError,
    CompareInput, EvaluateOptions, ModelChoice, StubKind,
};
use txf_core::analysis::ScoreboardOptions;
use txf_core::promptgen::ShotPolicy;

#[derive(Parser)]
#[command(name = "txf", version, about = "Therapeutics instruction-prompt pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CorpusArgs {
    /// Directory of *.manifest files
    #[arg(long)]
    manifests: PathBuf,
    /// Directory holding the tables the manifests name
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// 0, random<k> or knn<k>
    #[arg(long, default_value = "0")]
    shots: ShotPolicy,
    /// Token budget for prompts (estimated as bytes / 4)
    #[arg(long, default_value_t = 2048)]
    budget: usize,
    /// Restrict to these task ids (repeatable)
    #[arg(long = "task")]
    tasks: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Split tables and write prompt JSONL per task and split
    Build {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Also sample a training mixture of this many prompts
        #[arg(long)]
        mixture: Option<usize>,
    },
    /// Run test prompts through a model endpoint or a built-in stub
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, env = "TXF_MODEL_URL", conflicts_with = "stub")]
        model_url: Option<String>,
        #[arg(long, value_enum)]
        stub: Option<StubKind>,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        /// Per-request timeout in seconds
        #[arg(long, default_value_t = 60)]
        timeout: u64,
    },
    /// Signed-rank comparison of two models across tasks
    Compare {
        /// Table with task, lower_is_better and one column per model
        #[arg(long, requires_all = ["a", "b"], conflicts_with = "results")]
        table: Option<PathBuf>,
        /// Column (with --table) for model A
        #[arg(long)]
        a: Option<String>,
        /// Column (with --table) for model B
        #[arg(long)]
        b: Option<String>,
        /// Two evaluate output directories, A then B
        #[arg(long, num_args = 2, value_names = ["DIR_A", "DIR_B"])]
        results: Option<Vec<PathBuf>>,
    },
    /// Counts against published baselines and median relative differences
    Scoreboard {
        /// Baseline tables (repeatable)
        #[arg(long, required = true)]
        sota: Vec<PathBuf>,
        /// Evaluate output directory whose values replace the table's model column
        #[arg(long)]
        results: Option<PathBuf>,
        /// Count rows without a baseline as "no baseline" instead of exceeding
        #[arg(long)]
        missing_sota_separate: bool,
    },
    /// Exact-substring overlap of task features with a corpus
    Contamination {
        /// TSV: record id, then feature columns
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Evaluation report to recompute without the flagged records
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn print(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build { corpus, mixture } => {
            let summary = cmd_build(&BuildOptions {
                manifests: corpus.manifests,
                data: corpus.data,
                out: corpus.out,
                seed: corpus.seed,
                shots: corpus.shots,
                budget: corpus.budget,
                tasks: corpus.tasks,
                mixture,
            })?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            print(&summary);
        }
        Command::Evaluate {
            corpus,
            model_url,
            stub,
            concurrency,
            timeout,
        } => {
            let model = match (stub, model_url) {
                (Some(s), _) => ModelChoice::Stub(s),
                (None, Some(url)) => ModelChoice::Url(url),
                (None, None) => {
                    return Err(CliError::Validation(
                        "give --model-url, TXF_MODEL_URL or --stub".into(),
                    ))
                }
            };
            let outcomes = cmd_evaluate(&EvaluateOptions {
                manifests: corpus.manifests,
                data: corpus.data,
                out: corpus.out,
                seed: corpus.seed,
                shots: corpus.shots,
                budget: corpus.budget,
                tasks: corpus.tasks,
                model,
                concurrency,
                timeout: Duration::from_secs(timeout),
            })?;
            print(&outcomes);
        }
        Command::Compare { table, a, b, results } => {
            let input = match (table, results) {
                (Some(path), _) => CompareInput::Table {
                    path,
                    a: a.unwrap_or_default(),
                    b: b.unwrap_or_default(),
                },
                (None, Some(dirs)) => CompareInput::Results {
                    a: dirs[0].clone(),
                    b: dirs[1].clone(),
                },
                (None, None) => return Err(CliError::Validation("give --table or --results".into())),
            };
            print(&cmd_compare(&input)?);
        }
        Command::Scoreboard {
            sota,
            results,
            missing_sota_separate,
        } => {
            let options = ScoreboardOptions {
                missing_sota_exceeds: !missing_sota_separate,
                ..Default::default()
            };
            print(&cmd_scoreboard(&sota, results.as_deref(), options)?);
        }
        Command::Contamination {
            features,
            corpus,
            report,
        } => print(&cmd_contamination(&features, &corpus, report.as_deref())?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
