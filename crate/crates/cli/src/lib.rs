//! Pipeline commands behind the `txf` binary.
//!
//! Each command is a plain function so tests can drive it without a process.
//! Output layout under `--out`:
//!
//! ```text
//! <task>/manifest.resolved   manifest with a fitted label range frozen in
//! <task>/splits.tsv          record id -> split
//! <task>/{train,valid,test}.jsonl
//! <task>/report.json         evaluation result with per-example rows
//! <task>/rows.csv
//! mixture.jsonl              optional training mixture
//! failures.json              records whose requests failed after retries
//! ```

use serde::Serialize;
use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;
use txf_core::analysis::{
    compare_pairs, contamination_scan, filtered_eval, load_pairs, load_score_rows,
    median_relative_difference_by_feature_type, scoreboard, ComparisonResult, ContaminationReport,
    FeatureSet, PairedScore, ScoreRow, Scoreboard, ScoreboardOptions,
};
use txf_core::corpus::{
    assign_splits, load_table, resolve_label_range, validate_manifest, write_split_audit, DataRecord, Split,
    SplitSpec, TaskManifest,
};
use txf_core::evalharness::{
    evaluate_task, write_rows_csv, ConstantStub, EvalConfig, EvalResult, HttpClient, LookupStub, ModelClient,
};
use txf_core::promptgen::{
    build_mixture, build_task_prompts, write_jsonl, MixtureSpec, PromptRecord, ShotPolicy, TaskCorpus,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Transport(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir.display().to_string()))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(path.display().to_string()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path.display().to_string()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).expect("serializable");
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(io_err(path.display().to_string()))
}

/// A manifest with its records split and its label range resolved.
pub struct PreparedTask {
    pub manifest: TaskManifest,
    pub records: Vec<DataRecord>,
    pub dropped: usize,
}

/// Reads every `*.manifest` in `dir` (sorted by file name), keeping only
/// `tasks` when given.
pub fn load_manifests(dir: &Path, tasks: &[String]) -> Result<Vec<TaskManifest>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir.display().to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "manifest"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for p in paths {
        let m = match TaskManifest::parse(&read(&p)?) {
            Ok(m) => m,
            Err(e) => {
                problems.push(format!("{}: {e}", p.display()));
                continue;
            }
        };
        if !tasks.is_empty() && !tasks.contains(&m.task) {
            continue;
        }
        for v in validate_manifest(&m) {
            problems.push(format!("{}: {v}", p.display()));
        }
        out.push(m);
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(problems.join("\n")));
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!(
            "no matching manifests in {}",
            dir.display()
        )));
    }
    Ok(out)
}

pub fn prepare_task(manifest: &TaskManifest, data_dir: &Path, seed: u64) -> Result<PreparedTask, CliError> {
    let task = &manifest.task;
    let file = manifest.data.as_deref().unwrap_or_default();
    let table = load_table(&data_dir.join(file), manifest)
        .map_err(|e| CliError::Validation(format!("{task}: {e}")))?;
    let mut records = table.records;
    let method = manifest.split.expect("validated manifest has a split");
    let spec = SplitSpec {
        seed,
        ..SplitSpec::new(method)
    };
    assign_splits(&mut records, manifest, &spec).map_err(|e| CliError::Validation(format!("{task}: {e}")))?;
    let mut manifest = manifest.clone();
    if !resolve_label_range(&mut manifest, &records) {
        return Err(CliError::Validation(format!(
            "{task}: cannot fit a label range on the train split"
        )));
    }
    Ok(PreparedTask {
        manifest,
        records,
        dropped: table.dropped,
    })
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub manifests: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub shots: ShotPolicy,
    pub budget: usize,
    pub tasks: Vec<String>,
    pub mixture: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskSummary {
    pub task: String,
    pub records: usize,
    pub dropped: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub over_budget: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildSummary {
    pub tasks: Vec<TaskSummary>,
    pub mixture: Option<usize>,
    pub warnings: Vec<String>,
}

pub fn cmd_build(opts: &BuildOptions) -> Result<BuildSummary, CliError> {
    let manifests = load_manifests(&opts.manifests, &opts.tasks)?;
    let mut prepared = Vec::new();
    for m in &manifests {
        prepared.push(prepare_task(m, &opts.data, opts.seed)?);
    }
    let mut summary = BuildSummary {
        tasks: Vec::new(),
        mixture: None,
        warnings: Vec::new(),
    };
    for t in &prepared {
        let task = &t.manifest.task;
        let dir = opts.out.join(task);
        let built = build_task_prompts(&t.manifest, &t.records, opts.shots, opts.seed, opts.budget)
            .map_err(|e| CliError::Validation(format!("{task}: {e}")))?;
        summary.warnings.extend(built.warnings);
        let mut w = create(&dir.join("manifest.resolved"))?;
        w.write_all(t.manifest.to_text().as_bytes())
            .and_then(|_| w.flush())
            .map_err(io_err(task.clone()))?;
        let mut w = create(&dir.join("splits.tsv"))?;
        write_split_audit(&t.records, &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(task.clone()))?;
        let count = |s: Split| t.records.iter().filter(|r| r.split == Some(s)).count();
        for s in Split::ALL {
            let path = dir.join(format!("{}.jsonl", s.as_str()));
            let mut w = create(&path)?;
            write_jsonl(built.prompts.iter().filter(|p| p.split == Some(s)), &mut w)
                .and_then(|_| w.flush())
                .map_err(io_err(path.display().to_string()))?;
        }
        summary.tasks.push(TaskSummary {
            task: task.clone(),
            records: t.records.len(),
            dropped: t.dropped,
            train: count(Split::Train),
            valid: count(Split::Valid),
            test: count(Split::Test),
            over_budget: built.prompts.iter().filter(|p| p.over_budget).count(),
        });
    }
    if let Some(n) = opts.mixture {
        let trains: Vec<Vec<DataRecord>> = prepared
            .iter()
            .map(|t| {
                t.records
                    .iter()
                    .filter(|r| r.split == Some(Split::Train))
                    .cloned()
                    .collect()
            })
            .collect();
        let corpora: Vec<TaskCorpus> = prepared
            .iter()
            .zip(&trains)
            .filter(|(_, train)| !train.is_empty())
            .map(|(t, train)| TaskCorpus {
                manifest: &t.manifest,
                train,
            })
            .collect();
        if corpora.is_empty() {
            return Err(CliError::Validation(
                "no task has train records for a mixture".into(),
            ));
        }
        let spec = MixtureSpec {
            seed: opts.seed,
            input_budget: opts.budget,
            ..MixtureSpec::default()
        };
        let samples = build_mixture(&corpora, &spec, n).map_err(|e| CliError::Validation(e.to_string()))?;
        let path = opts.out.join("mixture.jsonl");
        let mut w = create(&path)?;
        write_jsonl(samples.iter().map(|s| &s.prompt), &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(path.display().to_string()))?;
        summary.mixture = Some(n);
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StubKind {
    Echo,
    Majority,
    Knn,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Url(String),
    Stub(StubKind),
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub manifests: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub shots: ShotPolicy,
    pub budget: usize,
    pub tasks: Vec<String>,
    pub model: ModelChoice,
    pub concurrency: usize,
    pub timeout: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskOutcome {
    pub task: String,
    pub metric: String,
    pub value: Option<f64>,
    pub n: usize,
    pub invalid_rate: f64,
    pub transport_failures: usize,
}

fn stub_client(
    kind: StubKind,
    t: &PreparedTask,
    prompts: &[PromptRecord],
) -> Result<Box<dyn ModelClient>, CliError> {
    Ok(match kind {
        StubKind::Echo => Box::new(LookupStub::echo(prompts)),
        StubKind::Majority => {
            let targets: Vec<String> = t
                .records
                .iter()
                .filter(|r| r.split == Some(Split::Train))
                .filter_map(|r| txf_core::promptgen::render_target(&r.label, &t.manifest).ok())
                .collect();
            Box::new(ConstantStub::majority(targets.iter().map(String::as_str)))
        }
        StubKind::Knn => {
            let pool: Vec<&DataRecord> = t
                .records
                .iter()
                .filter(|r| matches!(r.split, Some(Split::Train) | Some(Split::Valid)))
                .collect();
            Box::new(
                LookupStub::nearest_neighbour(&t.manifest, prompts, &t.records, &pool).ok_or_else(|| {
                    CliError::Validation(format!(
                        "{}: knn stub needs a molecule or sequence role",
                        t.manifest.task
                    ))
                })?,
            )
        }
    })
}

/// Rebuilds the test prompts exactly as `build` would and runs them through
/// the chosen model. Reports are written even when requests fail; the error
/// returned afterwards carries the exit status.
pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<Vec<TaskOutcome>, CliError> {
    let manifests = load_manifests(&opts.manifests, &opts.tasks)?;
    let config = EvalConfig {
        concurrency: opts.concurrency.max(1),
        ..EvalConfig::default()
    };
    let mut outcomes = Vec::new();
    let mut failures: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut degenerate = Vec::new();
    for m in &manifests {
        let t = prepare_task(m, &opts.data, opts.seed)?;
        let task = t.manifest.task.clone();
        let built = build_task_prompts(&t.manifest, &t.records, opts.shots, opts.seed, opts.budget)
            .map_err(|e| CliError::Validation(format!("{task}: {e}")))?;
        for w in &built.warnings {
            eprintln!("warning: {w}");
        }
        let prompts: Vec<PromptRecord> = built
            .prompts
            .into_iter()
            .filter(|p| p.split == Some(Split::Test))
            .collect();
        let client: Box<dyn ModelClient> = match &opts.model {
            ModelChoice::Url(url) => Box::new(HttpClient::new(url.clone(), opts.timeout)),
            ModelChoice::Stub(kind) => stub_client(*kind, &t, &prompts)?,
        };
        let result = evaluate_task(&t.manifest, &prompts, client.as_ref(), &config)
            .map_err(|e| CliError::Validation(format!("{task}: {e}")))?;
        let dir = opts.out.join(&task);
        write_json(&dir.join("report.json"), &result)?;
        let mut w = create(&dir.join("rows.csv"))?;
        write_rows_csv(&result, &mut w).map_err(|e| CliError::Validation(format!("{task}: {e}")))?;
        w.flush().map_err(io_err(task.clone()))?;
        let failed: Vec<String> = result
            .rows
            .iter()
            .filter(|r| r.transport_failed)
            .map(|r| r.id.clone())
            .collect();
        if !failed.is_empty() {
            failures.insert(task.clone(), failed);
        }
        if result.value.is_none() {
            degenerate.push(task.clone());
        }
        outcomes.push(TaskOutcome {
            task,
            metric: result.metric.to_string(),
            value: result.value,
            n: result.n,
            invalid_rate: result.invalid_rate,
            transport_failures: result.transport_failures,
        });
    }
    if !failures.is_empty() {
        write_json(&opts.out.join("failures.json"), &failures)?;
        let total: usize = failures.values().map(Vec::len).sum();
        return Err(CliError::Transport(format!(
            "{total} requests failed after retries; see {}",
            opts.out.join("failures.json").display()
        )));
    }
    if !degenerate.is_empty() {
        return Err(CliError::Degenerate(format!(
            "metric undefined for: {}",
            degenerate.join(", ")
        )));
    }
    Ok(outcomes)
}

pub fn read_report(path: &Path) -> Result<EvalResult, CliError> {
    let file = File::open(path).map_err(io_err(path.display().to_string()))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn reports_in(dir: &Path) -> Result<BTreeMap<String, EvalResult>, CliError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir.display().to_string()))? {
        let path = entry
            .map_err(io_err(dir.display().to_string()))?
            .path()
            .join("report.json");
        if path.is_file() {
            let r = read_report(&path)?;
            out.insert(r.task.clone(), r);
        }
    }
    Ok(out)
}

/// Pairs two results directories by task; tasks missing or undefined on
/// either side are skipped.
pub fn pairs_from_results(a: &Path, b: &Path) -> Result<Vec<PairedScore>, CliError> {
    let (ra, rb) = (reports_in(a)?, reports_in(b)?);
    Ok(ra
        .iter()
        .filter_map(|(task, x)| {
            let y = rb.get(task)?;
            Some(PairedScore {
                task: task.clone(),
                a: x.value?,
                b: y.value?,
                lower_is_better: x.lower_is_better,
                tie_winner: None,
            })
        })
        .collect())
}

pub enum CompareInput {
    Table { path: PathBuf, a: String, b: String },
    Results { a: PathBuf, b: PathBuf },
}

pub fn cmd_compare(input: &CompareInput) -> Result<ComparisonResult, CliError> {
    let pairs = match input {
        CompareInput::Table { path, a, b } => load_pairs(&read(path)?, a, b)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        CompareInput::Results { a, b } => pairs_from_results(a, b)?,
    };
    compare_pairs(&pairs).map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreboardReport {
    pub counts: Scoreboard,
    pub near_or_above: usize,
    pub median_relative_difference: BTreeMap<String, f64>,
}

/// Scoreboard over baseline tables. With `results`, each task's model value
/// is replaced by the evaluated one where a report exists.
pub fn cmd_scoreboard(
    sota: &[PathBuf],
    results: Option<&Path>,
    options: ScoreboardOptions,
) -> Result<ScoreboardReport, CliError> {
    let mut rows: Vec<ScoreRow> = Vec::new();
    for p in sota {
        rows.extend(
            load_score_rows(&read(p)?).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?,
        );
    }
    if let Some(dir) = results {
        let reports = reports_in(dir)?;
        for row in &mut rows {
            if let Some(v) = reports.get(&row.task).and_then(|r| r.value) {
                row.model = v;
            }
        }
    }
    let counts = scoreboard(&rows, options);
    Ok(ScoreboardReport {
        near_or_above: counts.near_or_above(),
        counts,
        median_relative_difference: median_relative_difference_by_feature_type(&rows),
    })
}

/// Features file: tab-separated with a header; the first column is the record
/// id and every other column a feature.
pub fn read_feature_sets(path: &Path) -> Result<Vec<FeatureSet>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut it = rec.iter();
        let id = it.next().unwrap_or_default().to_string();
        out.push(FeatureSet {
            id,
            features: it.map(str::to_string).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContaminationOutput {
    pub scan: ContaminationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unfiltered: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filtered: Option<Option<f64>>,
}

pub fn cmd_contamination(
    features: &Path,
    corpus: &Path,
    report: Option<&Path>,
) -> Result<ContaminationOutput, CliError> {
    let sets = read_feature_sets(features)?;
    let file = File::open(corpus).map_err(io_err(corpus.display().to_string()))?;
    let scan =
        contamination_scan(&sets, BufReader::new(file)).map_err(io_err(corpus.display().to_string()))?;
    let (unfiltered, filtered) = match report {
        Some(p) => {
            let r = read_report(p)?;
            let flagged: HashSet<String> = scan.flagged_ids();
            (Some(r.value), Some(filtered_eval(&r, &flagged).value))
        }
        None => (None, None),
    };
    Ok(ContaminationOutput {
        scan,
        unfiltered,
        filtered,
    })
}
