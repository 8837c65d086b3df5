//! Command-line interface: dataset ingestion, training, evaluation,
//! verification suites, the restricted-isometry study and interpretation
//! exports, all seeded and emitting JSON/CSV artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use aware_core::checkpoint::{load_checkpoint, save_checkpoint};
use aware_core::dataset_io::{dataset_to_json, load_json_dataset, load_tudataset};
use aware_core::graph::{degree_featurize_dataset, Dataset, TaskKind, DEFAULT_DEGREE_CAP};
use aware_core::interpret::{
    alignment_to_csv, edge_importance, extract_substructure, wg_alignment,
    DEFAULT_IMPORTANCE_THRESHOLD,
};
use aware_core::metrics::Metric;
use aware_core::model::{forward_trace, AwareConfig, ScoreMode};
use aware_core::rip::{rip_sweep, sweep_to_csv, EmbeddingFamily};
use aware_core::synth::{linear_walk_label_dataset, planted_motif_dataset, synthetic_social_dataset};
use aware_core::train::{hyperparameter_grid, run_ablation, seed_sweep_with_params, TrainConfig};
use aware_core::verify::{run_suite, SUITES};

#[derive(Parser)]
#[command(name = "aware", version, about = "Walk-aggregating graph network toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset (TUDataset directory or JSON) and write normalized JSON.
    Ingest(IngestArgs),
    /// Train over one or more seeds and write results plus checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run a verification suite and write a JSON report.
    Verify(VerifyArgs),
    /// Sweep the embedding dimension and write the isometry/recovery CSV.
    Rip(RipArgs),
    /// Export edge importance and weighting alignment for a trained model.
    Interpret(InterpretArgs),
    /// Run the component-removal ablation matrix.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Dataset path or name (see train --help for the accepted forms).
    #[arg(long)]
    data: String,
    /// Replace attributes with clamped vertex degrees.
    #[arg(long)]
    degree_featurize: bool,
    /// Clamp for degree featurization.
    #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
    degree_cap: usize,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Seed for synthetic dataset names.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset: a .json file, a TUDataset directory, a dataset name looked
    /// up under AWARE_DATA_DIR (or ./data), or one of
    /// synth-motif / synth-linear / synth-social.
    #[arg(long)]
    data: String,
    /// JSON file with the training configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds (overrides the config).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Number of graphs for synthetic datasets.
    #[arg(long, default_value_t = 120)]
    synth_size: usize,
    /// Seed for synthetic dataset generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; artifacts go into <out_dir>/<config-hash>/.
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Write the full hyperparameter grid (216 configurations derived from
    /// the effective config) to this path and exit without training.
    #[arg(long)]
    emit_grid: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: String,
    /// Metric name: acc, roc-auc, rmse, mae (defaults by task).
    #[arg(long)]
    metric: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    synth_size: usize,
    /// Optional JSON output path (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: theorem1, lemma1, theorem4, ngram, figure1, or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Optional JSON output path (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RipArgs {
    #[arg(long, default_value = "rademacher")]
    family: String,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    sparsity: usize,
    /// Comma-separated embedding dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 256, 1024])]
    r: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 40)]
    vectors_per_trial: usize,
    #[arg(long, default_value_t = 100)]
    recovery_trials: usize,
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Output CSV path (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InterpretArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: String,
    /// Graph index for the edge-importance export.
    #[arg(long, default_value_t = 0)]
    graph: usize,
    #[arg(long, default_value_t = DEFAULT_IMPORTANCE_THRESHOLD)]
    threshold: f64,
    /// Also export the weighting/predictor alignment (needs a linear head).
    #[arg(long)]
    alignment: bool,
    #[arg(long, default_value_t = 200)]
    alignment_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    synth_size: usize,
    #[arg(long, default_value = "interpret-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    synth_size: usize,
    #[arg(long, default_value = "ablation-out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Rip(args) => cmd_rip(args),
        Command::Interpret(args) => cmd_interpret(args),
        Command::Ablate(args) => cmd_ablate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

/// Resolve a dataset argument: JSON file, TUDataset directory, a name under
/// the data root, or a synthetic generator.
fn resolve_dataset(spec: &str, seed: u64, synth_size: usize) -> anyhow::Result<Dataset> {
    match spec {
        "synth-motif" => return Ok(planted_motif_dataset(synth_size, seed).dataset),
        "synth-linear" => return Ok(linear_walk_label_dataset(synth_size, seed, 3, 2)?),
        "synth-social" => return Ok(synthetic_social_dataset(synth_size, seed)),
        _ => {}
    }
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(load_json_dataset(path)?);
    }
    if path.is_dir() {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| anyhow!("cannot derive a dataset name from {spec:?}"))?;
        return Ok(load_tudataset(path, name)?);
    }
    // Name lookup under the data root.
    let canonical = canonical_dataset_name(spec);
    let root = std::env::var("AWARE_DATA_DIR").unwrap_or_else(|_| "data".to_string());
    let dir = Path::new(&root).join(&canonical);
    if dir.is_dir() {
        return Ok(load_tudataset(&dir, &canonical)?);
    }
    bail!(
        "dataset {spec:?} not found (tried {} and the synthetic names \
         synth-motif/synth-linear/synth-social); set AWARE_DATA_DIR",
        dir.display()
    )
}

fn canonical_dataset_name(spec: &str) -> String {
    match spec.to_ascii_lowercase().as_str() {
        "imdb-b" | "imdb-binary" => "IMDB-BINARY".to_string(),
        "imdb-m" | "imdb-multi" => "IMDB-MULTI".to_string(),
        "reddit-b" | "reddit-binary" => "REDDIT-BINARY".to_string(),
        "collab" => "COLLAB".to_string(),
        other => other.to_string(),
    }
}

/// Social-network-style datasets arrive without attributes; featurize with
/// clamped degrees so the one-hot width is defined.
fn featurize_if_needed(dataset: Dataset, cap: usize) -> Dataset {
    if dataset.schema.total_width() == 0 {
        degree_featurize_dataset(&dataset, cap)
    } else {
        dataset
    }
}

fn default_train_config(task: TaskKind) -> TrainConfig {
    let mut aware = AwareConfig::new(6, 100, 100, task);
    aware.layers = 2;
    aware.alpha = 0.1;
    aware.score_mode = ScoreMode::Softmax;
    TrainConfig::new(aware, Metric::default_for(task))
}

fn load_train_config(path: Option<&Path>, dataset: &Dataset) -> anyhow::Result<TrainConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let parsed: TrainConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))?;
            parsed
        }
        None => default_train_config(dataset.task_kind),
    };
    config.aware.task_kind = dataset.task_kind;
    config.aware.normalize();
    Ok(config)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn config_hash(config: &TrainConfig) -> anyhow::Result<String> {
    let canonical = serde_json::to_string(config)?;
    Ok(format!("{:016x}", fnv1a64(canonical.as_bytes())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> anyhow::Result<ExitCode> {
    let mut dataset = resolve_dataset(&args.data, args.seed, 120)?;
    if args.degree_featurize {
        dataset = degree_featurize_dataset(&dataset, args.degree_cap);
    }
    if let Some(parent) = args.out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.out, dataset_to_json(&dataset)?)?;
    println!(
        "ingested {} graphs ({:?}, one-hot width {}) -> {}",
        dataset.len(),
        dataset.task_kind,
        dataset.schema.total_width(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<ExitCode> {
    let dataset = featurize_if_needed(
        resolve_dataset(&args.data, args.seed, args.synth_size)?,
        DEFAULT_DEGREE_CAP,
    );
    let mut config = load_train_config(args.config.as_deref(), &dataset)?;
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(lr) = args.lr {
        config.lr = lr;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(patience) = args.patience {
        config.patience = patience;
    }
    if let Some(batch) = args.batch_size {
        config.batch_size = batch;
    }
    config.validate()?;

    if let Some(path) = args.emit_grid {
        let grid = hyperparameter_grid(&config);
        write_json(&path, &grid)?;
        println!("wrote {} grid configurations -> {}", grid.len(), path.display());
        return Ok(ExitCode::SUCCESS);
    }

    let hash = config_hash(&config)?;
    let run_dir = args.out_dir.join(&hash);
    fs::create_dir_all(&run_dir)?;
    write_json(&run_dir.join("effective_config.json"), &config)?;

    let started = Instant::now();
    let (result, trained) = seed_sweep_with_params(&dataset, &config)?;
    let wall = started.elapsed().as_secs_f64();

    for (&seed, params) in config.seeds.iter().zip(trained.iter()) {
        save_checkpoint(
            &run_dir.join(format!("seed{seed}.ckpt")),
            params,
            &config.aware,
            &dataset.schema,
        )?;
    }

    #[derive(serde::Serialize)]
    struct TrainOutput<'a> {
        config_hash: &'a str,
        result: &'a aware_core::train::RunResult,
        wall_clock_seconds: f64,
        timestamp: String,
    }
    let output = TrainOutput {
        config_hash: &hash,
        result: &result,
        wall_clock_seconds: wall,
        timestamp: now_stamp(),
    };
    write_json(&run_dir.join("result.json"), &output)?;
    println!(
        "{} seeds: mean {:?} = {:.4} +- {:.4} -> {}",
        result.records.len(),
        result.metric,
        result.mean_test_metric,
        result.std_test_metric,
        run_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Wall-clock stamp; the only non-deterministic output field.
fn now_stamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{now}")
}

fn parse_metric(name: &str) -> anyhow::Result<Metric> {
    match name.to_ascii_lowercase().as_str() {
        "acc" | "accuracy" => Ok(Metric::Acc),
        "roc-auc" | "auc" => Ok(Metric::RocAuc),
        "rmse" => Ok(Metric::Rmse),
        "mae" => Ok(Metric::Mae),
        other => bail!("unknown metric {other:?}"),
    }
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let (params, config, schema) = load_checkpoint(&args.checkpoint)?;
    let dataset = featurize_if_needed(
        resolve_dataset(&args.data, args.seed, args.synth_size)?,
        schema.total_width().saturating_sub(1).max(1),
    );
    if dataset.schema != schema {
        bail!(
            "dataset schema {:?} does not match the checkpoint schema {:?}",
            dataset.schema.value_counts,
            schema.value_counts
        );
    }
    let metric = match args.metric.as_deref() {
        Some(name) => parse_metric(name)?,
        None => Metric::default_for(config.task_kind),
    };
    let indices: Vec<usize> = (0..dataset.len()).collect();
    let value = aware_core::train::evaluate(&params, &config, &dataset, &indices, metric)?;
    #[derive(serde::Serialize)]
    struct EvalOutput {
        metric: Metric,
        value: f64,
        graphs: usize,
    }
    let output = EvalOutput {
        metric,
        value,
        graphs: dataset.len(),
    };
    match args.out {
        Some(path) => write_json(&path, &output)?,
        None => println!("{}", serde_json::to_string_pretty(&output)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let suites: Vec<&str> = if args.suite == "all" {
        SUITES.to_vec()
    } else {
        vec![args.suite.as_str()]
    };
    let mut reports = Vec::with_capacity(suites.len());
    let mut all_pass = true;
    for suite in suites {
        let report = run_suite(suite, args.seed)?;
        println!(
            "suite {:<9} checks {:<4} max residual {:.3e}  {}",
            report.suite,
            report.checks.len(),
            report.max_residual(),
            if report.pass { "PASS" } else { "FAIL" }
        );
        all_pass &= report.pass;
        reports.push(report);
    }
    if let Some(path) = args.out {
        write_json(&path, &reports)?;
    } else {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_rip(args: RipArgs) -> anyhow::Result<ExitCode> {
    let family = match args.family.to_ascii_lowercase().as_str() {
        "rademacher" => EmbeddingFamily::Rademacher,
        "gaussian" => EmbeddingFamily::Gaussian,
        other => bail!("unknown family {other:?} (rademacher or gaussian)"),
    };
    let rows = rip_sweep(
        family,
        args.k,
        args.n,
        args.sparsity,
        &args.r,
        args.trials,
        args.vectors_per_trial,
        args.recovery_trials,
        args.seed,
    )?;
    let csv = sweep_to_csv(&rows);
    match args.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, csv)?;
            println!("wrote {} rows -> {}", rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_interpret(args: InterpretArgs) -> anyhow::Result<ExitCode> {
    let (params, config, schema) = load_checkpoint(&args.checkpoint)?;
    let dataset = featurize_if_needed(
        resolve_dataset(&args.data, args.seed, args.synth_size)?,
        schema.total_width().saturating_sub(1).max(1),
    );
    if dataset.schema != schema {
        bail!("dataset schema does not match the checkpoint schema");
    }
    if args.graph >= dataset.len() {
        bail!(
            "graph index {} out of range ({} graphs)",
            args.graph,
            dataset.len()
        );
    }
    fs::create_dir_all(&args.out_dir)?;
    let graph = &dataset.graphs[args.graph];
    let trace = forward_trace(graph, &schema, &params, &config)?;
    let mut importance = edge_importance(&trace, graph)?;
    importance.threshold = args.threshold;
    fs::write(
        args.out_dir.join(format!("edges_graph{}.json", args.graph)),
        importance.to_json()?,
    )?;
    fs::write(
        args.out_dir.join(format!("edges_graph{}.dot", args.graph)),
        importance.to_dot(&format!("g{}", args.graph)),
    )?;
    let substructure = extract_substructure(graph, &importance, args.threshold);
    write_json(
        &args
            .out_dir
            .join(format!("substructure_graph{}.json", args.graph)),
        &substructure,
    )?;

    if args.alignment {
        let mut embeddings = Vec::new();
        for g in dataset.graphs.iter().take(args.alignment_samples) {
            let t = forward_trace(g, &schema, &params, &config)?;
            embeddings.push(t.graph_embedding.col(0));
        }
        let report = wg_alignment(&params, &config, &embeddings)?;
        write_json(&args.out_dir.join("alignment.json"), &report)?;
        fs::write(args.out_dir.join("alignment.csv"), alignment_to_csv(&report))?;
        println!(
            "alignment: top cosine {:.4}{}",
            report.cosines.first().copied().unwrap_or(0.0),
            if report.degenerate {
                " (degenerate spectrum)"
            } else {
                ""
            }
        );
    }
    println!(
        "graph {}: {} edges, {} kept at threshold {}",
        args.graph,
        importance.edges.len(),
        substructure.edges.len(),
        args.threshold
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(args: AblateArgs) -> anyhow::Result<ExitCode> {
    let dataset = featurize_if_needed(
        resolve_dataset(&args.data, args.seed, args.synth_size)?,
        DEFAULT_DEGREE_CAP,
    );
    let mut config = load_train_config(args.config.as_deref(), &dataset)?;
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    config.validate()?;
    let rows = run_ablation(&dataset, &config)?;
    fs::create_dir_all(&args.out_dir)?;
    write_json(&args.out_dir.join("ablation.json"), &rows)?;
    let mut csv = String::from("name,mean_test_metric,std_test_metric,relative_delta_pct\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.name, row.mean_test_metric, row.std_test_metric, row.relative_delta_pct
        ));
    }
    fs::write(args.out_dir.join("ablation.csv"), csv)?;
    for row in &rows {
        println!(
            "{:<18} {:.4} +- {:.4} ({:+.2}%)",
            row.name, row.mean_test_metric, row.std_test_metric, row.relative_delta_pct
        );
    }
    Ok(ExitCode::SUCCESS)
}
