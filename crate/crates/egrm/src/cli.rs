//! Command-line surface: `egrm route|infer|partition|train-scorer|grpo|report`.
//!
//! Every command reads one engine config (defaults apply when none is
//! given), takes `--input`, and writes its artifacts atomically. Exit
//! codes are a stable contract: 0 success, 2 input error, 3 backend error,
//! 4 training error.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{ConfigError, EngineConfig};
use crate::consensus::{
    canonicalize, compute_consensus, extract_final_answer, route_by_threshold, ConsensusReport,
};
use crate::dataset::{
    self, load_prompts, pairs_from_records, prompt_text_map, scored_from_records, DatasetError,
    PairRecord, ScoredRecord, ValidationReport,
};
use crate::pipeline::{run_batch, BatchReport, InferContext, PipelineError};
use crate::rewards::{train_grpo, GrpoError, GrpoVariant};
use crate::scorer::{train, ScorerModel, TrainError, FEATURE_DIM};

/// Exit code 2: unreadable, malformed, or invalid input.
pub const EXIT_INPUT: i32 = 2;
/// Exit code 3: backend failure.
pub const EXIT_BACKEND: i32 = 3;
/// Exit code 4: training failure.
pub const EXIT_TRAINING: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Backend(String),
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Backend(_) => EXIT_BACKEND,
            CliError::Training(_) => EXIT_TRAINING,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Backend(m) | CliError::Training(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Backend(b) => CliError::Backend(b.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Training(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<GrpoError> for CliError {
    fn from(e: GrpoError) -> Self {
        match e {
            GrpoError::NonFiniteObjective { .. } => CliError::Training(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "egrm", version, about = "Consensus-routed generation engine")]
pub struct Cli {
    /// Engine config file (TOML). Omit to run with built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed for training commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Standard,
    Extended,
}

impl From<VariantArg> for GrpoVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => GrpoVariant::Standard,
            VariantArg::Extended => GrpoVariant::Extended,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe each prompt with M parallel decodes and stream consensus
    /// reports as JSON lines.
    Route {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Report file; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Run the adaptive inference pipeline over a prompts file and write a
    /// batch report.
    Infer {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Report file; defaults to <out_dir>/report.json.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Bypass routing: every prompt takes the long route.
        #[arg(long)]
        forced_cot: bool,
    },
    /// Partition prompts into short/long SFT files by probe consensus.
    Partition {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output directory; defaults to the config out_dir.
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Train the discriminative scorer on a scored-sample file.
    TrainScorer {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output directory; defaults to the config out_dir.
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Optimize the toy policy on a preference-pair file.
    Grpo {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "extended")]
        variant: VariantArg,
        /// Output directory; defaults to the config out_dir.
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Print the summary of a batch report produced by `infer`.
    Report {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig, CliError> {
    match path {
        Some(p) => Ok(EngineConfig::load(p)?),
        None => Ok(EngineConfig::default()),
    }
}

fn out_dir(config: &EngineConfig, output: Option<&Path>) -> PathBuf {
    output
        .map(Path::to_path_buf)
        .or_else(|| config.paths.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Writes via a temp file plus rename so partially written artifacts never
/// appear under the final name.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Loads the configured scorer model, or a deterministic seeded one when no
/// model path is configured.
fn load_scorer(config: &EngineConfig) -> Result<ScorerModel, CliError> {
    match &config.scorer.model {
        Some(path) => {
            let model = ScorerModel::load(path).map_err(|e| CliError::Input(e.to_string()))?;
            if model.d() != FEATURE_DIM {
                return Err(CliError::Input(format!(
                    "scorer model at {} has input dimension {}, expected {FEATURE_DIM}",
                    path.display(),
                    model.d()
                )));
            }
            Ok(model)
        }
        None => Ok(ScorerModel::seeded(FEATURE_DIM, config.scorer.hidden.max(1), config.defaults.seed)),
    }
}

#[derive(Serialize)]
struct RouteLine<'a> {
    prompt_id: &'a str,
    #[serde(flatten)]
    report: &'a ConsensusReport,
}

#[derive(Serialize)]
struct RouteErrorLine<'a> {
    prompt_id: &'a str,
    error: String,
}

/// Outcome of `cmd_route`: the emitted lines plus how many prompts failed.
#[derive(Debug)]
pub struct RouteOutput {
    pub lines: Vec<String>,
    pub failures: usize,
}

/// Probes every prompt and renders one consensus report line per prompt.
/// Probe failures become error lines and count as failures.
pub fn cmd_route(
    config: &EngineConfig,
    input: &Path,
    output: Option<&Path>,
) -> Result<RouteOutput, CliError> {
    let prompts = load_prompts(input)?;
    let backend = config.build_backend()?;
    let router = config.router_config()?;
    let (parallel, _) = config.schedules()?;
    let extractor = &config.extractor;

    let mut lines = Vec::with_capacity(prompts.len());
    let mut failures = 0usize;
    for prompt in &prompts {
        match crate::backend::fan_out(
            backend.as_ref(),
            prompt,
            &parallel,
            config.backend.in_flight,
            0,
        ) {
            Ok(outcomes) => {
                let answers: Vec<_> = outcomes
                    .iter()
                    .filter_map(|o| o.as_ref().ok())
                    .map(|g| canonicalize(&extract_final_answer(g.text(), extractor)))
                    .collect();
                let report = compute_consensus(&answers).expect("fan-out guarantees one success");
                let decision = route_by_threshold(report.consensus, router.tau);
                let report = report.with_route(decision);
                let line = RouteLine { prompt_id: prompt.id(), report: &report };
                lines.push(serde_json::to_string(&line).expect("report serializes"));
            }
            Err(e) => {
                failures += 1;
                let line = RouteErrorLine { prompt_id: prompt.id(), error: e.to_string() };
                lines.push(serde_json::to_string(&line).expect("error serializes"));
            }
        }
    }

    let rendered = lines.join("\n") + "\n";
    match output {
        Some(path) => atomic_write(path, rendered.as_bytes())
            .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(RouteOutput { lines, failures })
}

/// Runs the batch pipeline and writes the JSON report atomically. Returns
/// the report and where it was written.
pub fn cmd_infer(
    config: &EngineConfig,
    input: &Path,
    output: Option<&Path>,
    forced_cot: bool,
) -> Result<(BatchReport, PathBuf), CliError> {
    let prompts = load_prompts(input)?;
    let backend = config.build_backend()?;
    let router = config.router_config()?;
    let scorer = load_scorer(config)?;
    let (parallel, candidates) = config.schedules()?;
    let ctx = InferContext::new(
        backend.as_ref(),
        &router,
        &config.extractor,
        &scorer,
        &parallel,
        &candidates,
    )?
    .with_in_flight(config.backend.in_flight);

    let report = run_batch(&prompts, &ctx, forced_cot);

    let path = match output {
        Some(p) => p.to_path_buf(),
        None => out_dir(config, None).join("report.json"),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    atomic_write(&path, json.as_bytes())
        .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))?;
    Ok((report, path))
}

#[derive(Serialize)]
struct ShortLine<'a> {
    id: &'a str,
    text: &'a str,
    answer: &'a str,
    consensus: f64,
}

#[derive(Serialize)]
struct LongLine<'a> {
    id: &'a str,
    text: &'a str,
    chain: &'a str,
    answer: &'a str,
    consensus: f64,
}

#[derive(Serialize)]
struct FailureLine<'a> {
    id: &'a str,
    error: &'a str,
}

/// Partition outcome: counts plus where the three files were written.
#[derive(Debug)]
pub struct PartitionOutput {
    pub short: usize,
    pub long: usize,
    pub failures: usize,
    pub dir: PathBuf,
}

/// Partitions prompts into short/long SFT datasets on disk.
pub fn cmd_partition(
    config: &EngineConfig,
    input: &Path,
    output: Option<&Path>,
) -> Result<PartitionOutput, CliError> {
    let prompts = load_prompts(input)?;
    let backend = config.build_backend()?;
    let router = config.router_config()?;
    let (parallel, _) = config.schedules()?;
    let ctx = crate::pipeline::PartitionContext {
        backend: backend.as_ref(),
        teacher: None,
        router: &router,
        extractor: &config.extractor,
        parallel: &parallel,
        in_flight: config.backend.in_flight,
    };
    let partition = crate::pipeline::partition_sft(&prompts, &ctx)?;

    let dir = out_dir(config, output);
    let mut short = String::new();
    for e in &partition.short {
        let line = ShortLine {
            id: e.prompt.id(),
            text: e.prompt.text(),
            answer: &e.answer,
            consensus: e.report.consensus,
        };
        short.push_str(&serde_json::to_string(&line).expect("serializes"));
        short.push('\n');
    }
    let mut long = String::new();
    for e in &partition.long {
        let line = LongLine {
            id: e.prompt.id(),
            text: e.prompt.text(),
            chain: &e.chain,
            answer: &e.answer,
            consensus: e.report.consensus,
        };
        long.push_str(&serde_json::to_string(&line).expect("serializes"));
        long.push('\n');
    }
    let mut errors = String::new();
    for f in &partition.failures {
        let line = FailureLine { id: &f.prompt_id, error: &f.error };
        errors.push_str(&serde_json::to_string(&line).expect("serializes"));
        errors.push('\n');
    }
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        atomic_write(&path, body.as_bytes())
            .map_err(|e| CliError::Input(format!("write {}: {e}", path.display())))
    };
    write("short.jsonl", &short)?;
    write("long.jsonl", &long)?;
    write("errors.jsonl", &errors)?;

    Ok(PartitionOutput {
        short: partition.short.len(),
        long: partition.long.len(),
        failures: partition.failures.len(),
        dir,
    })
}

fn report_violations(kind: &str, report: &ValidationReport) -> CliError {
    let mut message = format!("invalid {kind} dataset: {} violation(s)", report.errors.len());
    for e in &report.errors {
        message.push_str(&format!("\n  record {}: {}", e.index, e.message));
    }
    CliError::Input(message)
}

/// Trains the scorer and writes the model file plus a loss-curve CSV.
pub fn cmd_train_scorer(
    config: &EngineConfig,
    input: &Path,
    output: Option<&Path>,
    seed: Option<u64>,
) -> Result<(PathBuf, PathBuf), CliError> {
    let records: Vec<ScoredRecord> = dataset::read_jsonl(input)?;
    let validation = dataset::validate_scored(&records);
    if !validation.is_valid() {
        return Err(report_violations("scored-sample", &validation));
    }
    let texts = match &config.paths.prompts {
        Some(p) => prompt_text_map(p)?,
        None => HashMap::new(),
    };
    let samples = scored_from_records(records, &texts);

    let report = train(&samples, &config.loss_config(), &config.train_config(seed))?;

    let dir = out_dir(config, output);
    let model_path = dir.join("scorer.txt");
    let mut model_bytes = Vec::new();
    report.model.to_writer(&mut model_bytes).expect("in-memory write");
    atomic_write(&model_path, &model_bytes)
        .map_err(|e| CliError::Input(format!("write {}: {e}", model_path.display())))?;

    let curve_path = dir.join("scorer_loss.csv");
    let mut curve = String::from("step,loss\n");
    for (i, loss) in report.loss_history.iter().enumerate() {
        curve.push_str(&format!("{i},{loss:.12e}\n"));
    }
    atomic_write(&curve_path, curve.as_bytes())
        .map_err(|e| CliError::Input(format!("write {}: {e}", curve_path.display())))?;

    Ok((model_path, curve_path))
}

/// Trains the toy policy on preference pairs and writes the curve CSV plus
/// the final policy file.
pub fn cmd_grpo(
    config: &EngineConfig,
    input: &Path,
    variant: GrpoVariant,
    output: Option<&Path>,
    seed: Option<u64>,
) -> Result<(PathBuf, PathBuf), CliError> {
    let records: Vec<PairRecord> = dataset::read_jsonl(input)?;
    let validation = dataset::validate_pairs(&records);
    if !validation.is_valid() {
        return Err(report_violations("preference-pair", &validation));
    }
    let pairs = pairs_from_records(records);
    let scorer = load_scorer(config)?;

    let run = train_grpo(
        &pairs,
        variant,
        &scorer,
        config.policy_template(),
        &config.grpo_config(seed),
    )?;

    let dir = out_dir(config, output);
    let curve_path = dir.join(format!("curves-{}.csv", variant.label()));
    let mut curve_bytes = Vec::new();
    run.write_curve_csv(&mut curve_bytes).expect("in-memory write");
    atomic_write(&curve_path, &curve_bytes)
        .map_err(|e| CliError::Input(format!("write {}: {e}", curve_path.display())))?;

    let policy_path = dir.join(format!("policy-{}.txt", variant.label()));
    let mut policy_bytes = Vec::new();
    run.policy.to_writer(&mut policy_bytes).expect("in-memory write");
    atomic_write(&policy_path, &policy_bytes)
        .map_err(|e| CliError::Input(format!("write {}: {e}", policy_path.display())))?;

    Ok((curve_path, policy_path))
}

/// Prints the summary block of a batch report.
pub fn cmd_report(input: &Path, mut out: impl Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Input(format!("read {}: {e}", input.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("parse {}: {e}", input.display())))?;
    let summary = value
        .get("summary")
        .ok_or_else(|| CliError::Input("not a batch report: missing `summary`".into()))?;
    let field = |name: &str| summary.get(name).cloned().unwrap_or(serde_json::Value::Null);
    writeln!(out, "prompts:        {}", field("n")).ok();
    writeln!(out, "short fraction: {}", field("short_fraction")).ok();
    writeln!(out, "backend calls:  {}", field("calls")).ok();
    writeln!(out, "tokens:         {}", field("tokens")).ok();
    writeln!(out, "wall ms:        {}", field("wall_ms")).ok();
    let errors = value.get("errors").and_then(|e| e.as_array()).map(|e| e.len()).unwrap_or(0);
    writeln!(out, "errors:         {errors}").ok();
    Ok(())
}

/// Parses arguments and runs the selected command, returning the process
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Clap prints its own message; usage problems are input errors.
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };

    let result = (|| -> Result<i32, CliError> {
        let config = load_config(cli.config.as_deref())?;
        match &cli.command {
            Command::Route { input, output } => {
                let out = cmd_route(&config, input, output.as_deref())?;
                if out.failures > 0 {
                    eprintln!("{} prompt(s) failed", out.failures);
                    return Ok(EXIT_BACKEND);
                }
                Ok(0)
            }
            Command::Infer { input, output, forced_cot } => {
                let (report, path) = cmd_infer(&config, input, output.as_deref(), *forced_cot)?;
                println!(
                    "wrote {} ({} prompts, short fraction {:.3}, {} calls)",
                    path.display(),
                    report.summary.n,
                    report.summary.short_fraction,
                    report.summary.calls
                );
                if !report.errors.is_empty() {
                    eprintln!("{} prompt(s) failed", report.errors.len());
                    return Ok(EXIT_BACKEND);
                }
                Ok(0)
            }
            Command::Partition { input, output } => {
                let out = cmd_partition(&config, input, output.as_deref())?;
                println!(
                    "short {}  long {}  errors {}  -> {}",
                    out.short,
                    out.long,
                    out.failures,
                    out.dir.display()
                );
                if out.failures > 0 {
                    return Ok(EXIT_BACKEND);
                }
                Ok(0)
            }
            Command::TrainScorer { input, output } => {
                let (model, curve) = cmd_train_scorer(&config, input, output.as_deref(), cli.seed)?;
                println!("wrote {} and {}", model.display(), curve.display());
                Ok(0)
            }
            Command::Grpo { input, variant, output } => {
                let (curve, policy) =
                    cmd_grpo(&config, input, (*variant).into(), output.as_deref(), cli.seed)?;
                println!("wrote {} and {}", curve.display(), policy.display());
                Ok(0)
            }
            Command::Report { input } => {
                cmd_report(input, std::io::stdout().lock())?;
                Ok(0)
            }
        }
    })();

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
