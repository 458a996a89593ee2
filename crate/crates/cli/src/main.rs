//! `dbcs` command-line frontend.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dbcs_core::confidence::fingerprint;
use dbcs_core::eval::accuracy_table;
use dbcs_core::io::{
    read_dataset_csv, read_json, read_readings_csv, to_sorted_json, write_atomic,
    write_dataset_csv, write_json,
};
use dbcs_core::*;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "dbcs", version, about = "DAG-based sensor channel selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every channel with k-NN: dataset CSV -> precision table JSON.
    Rank(RankArgs),
    /// Root set and per-task ranking sets from a precision table.
    Rankings(RankingsArgs),
    /// Layered DAG from rankings (or directly from a precision table).
    BuildDag(BuildDagArgs),
    /// Train one subset model per DAG key and store the registry.
    Train(TrainArgs),
    /// Run the greedy DAG walk for one readings row.
    Select(SelectArgs),
    /// Run the DAG walk over the test fold and report accuracy and utilisation.
    Eval(EvalArgs),
    /// Generate a synthetic dataset CSV.
    Synth(SynthArgs),
    /// Complete-graph selection over all channels, for comparison.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
struct ClassifierArgs {
    /// Neighbours per k-NN vote.
    #[arg(long, default_value_t = 4, value_parser = parse_k)]
    k: usize,
    /// Seed for the train/validation/test shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.7,0.15,0.15", value_parser = parse_ratios)]
    ratios: [f64; 3],
}

impl ClassifierArgs {
    fn config(&self) -> ClassifierConfig {
        ClassifierConfig {
            k: self.k,
            split: SplitSpec {
                ratios: self.ratios,
                seed: self.seed,
            },
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset CSV (`ch_<id>:<j>` feature columns plus `label`).
    #[arg(long)]
    data: PathBuf,
    /// Expected features per channel; checked against the file.
    #[arg(long)]
    feature_width: Option<usize>,
}

impl DataArgs {
    fn load(&self, tasks: Option<&[String]>) -> anyhow::Result<Dataset> {
        let ds = read_dataset_csv(&self.data, tasks)?;
        check_width(ds.feature_width, self.feature_width)?;
        Ok(ds)
    }
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankingsArgs {
    /// Precision table JSON.
    #[arg(long)]
    precision: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildDagArgs {
    /// Rankings JSON written by `rankings`.
    #[arg(
        long,
        conflicts_with = "precision",
        required_unless_present = "precision"
    )]
    rankings: Option<PathBuf>,
    /// Precision table JSON; rankings are derived on the fly.
    #[arg(long)]
    precision: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// DAG JSON written by `build-dag`.
    #[arg(long)]
    dag: PathBuf,
    #[command(flatten)]
    classifier: ClassifierArgs,
    /// Registry directory to create.
    #[arg(long, alias = "out")]
    models: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Readings CSV; a `label` column is optional.
    #[arg(long)]
    data: PathBuf,
    /// Row of the readings file to select for.
    #[arg(long, default_value_t = 0)]
    row: usize,
    /// DAG JSON written by `build-dag`.
    #[arg(long)]
    dag: PathBuf,
    /// Registry directory written by `train`.
    #[arg(long)]
    models: PathBuf,
    /// Confidence threshold in (0, 1].
    #[arg(long, default_value_t = Threshold::default(), value_parser = parse_theta)]
    theta: Threshold,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Full dataset; the registry's split is re-applied to recover the test fold.
    #[command(flatten)]
    data: DataArgs,
    /// DAG JSON written by `build-dag`.
    #[arg(long)]
    dag: PathBuf,
    /// Registry directory written by `train`.
    #[arg(long)]
    models: PathBuf,
    /// Confidence threshold in (0, 1].
    #[arg(long, default_value_t = Threshold::default(), value_parser = parse_theta)]
    theta: Threshold,
    /// Report JSON; the histogram CSV is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// SynthSpec JSON; the built-in 14-channel benchmark when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's features per channel.
    #[arg(long)]
    feature_width: Option<usize>,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    /// Confidence threshold in (0, 1].
    #[arg(long, default_value_t = Threshold::default(), value_parser = parse_theta)]
    theta: Threshold,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_k(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("k must be at least 1".into()),
        Ok(k) => Ok(k),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_theta(s: &str) -> Result<Threshold, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    Threshold::new(v).map_err(|e| e.to_string())
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let ratios: [f64; 3] = parts
        .try_into()
        .map_err(|_| "expected three comma-separated fractions".to_string())?;
    SplitSpec { ratios, seed: 0 }
        .validate()
        .map_err(|e| e.to_string())?;
    Ok(ratios)
}

fn check_width(actual: usize, expected: Option<usize>) -> anyhow::Result<()> {
    match expected {
        Some(w) if w != actual => Err(Error::DimensionMismatch {
            expected: w,
            actual,
        }
        .into()),
        _ => Ok(()),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => write_json(value, path)?,
        None => println!("{}", to_sorted_json(value)?),
    }
    Ok(())
}

fn load_dag(path: &Path) -> anyhow::Result<LayeredDag> {
    read_json(path).with_context(|| format!("loading DAG {}", path.display()))
}

fn load_registry(path: &Path, dag: &LayeredDag) -> anyhow::Result<ConfidenceRegistry> {
    let registry = ConfidenceRegistry::load(path)?;
    if let Some(key) = enumerate_model_keys(dag)
        .into_iter()
        .find(|k| !registry.contains(k))
    {
        return Err(Error::InvalidRegistry(format!(
            "registry {} was not trained for this DAG (no model for {key})",
            path.display()
        ))
        .into());
    }
    Ok(registry)
}

fn rank(args: RankArgs) -> anyhow::Result<()> {
    let ds = args.data.load(None)?;
    let table = rank_channels(&ds, &args.classifier.config())?;
    emit(&table, args.out.as_deref())
}

fn rankings(args: RankingsArgs) -> anyhow::Result<()> {
    let table: PrecisionTable = read_json(&args.precision)?;
    emit(&ChannelRanking::from_table(&table)?, args.out.as_deref())
}

fn build_dag_cmd(args: BuildDagArgs) -> anyhow::Result<()> {
    let ranking: ChannelRanking = match (&args.rankings, &args.precision) {
        (Some(path), _) => read_json(path)?,
        (None, Some(path)) => ChannelRanking::from_table(&read_json(path)?)?,
        (None, None) => bail!("one of --rankings or --precision is required"),
    };
    let dag = ranking.build_dag()?;
    log::info!("DAG\n{dag}");
    emit(&dag, args.out.as_deref())
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let ds = args.data.load(None)?;
    let dag = load_dag(&args.dag)?;
    let cfg = args.classifier.config();
    let folds = split(&ds, &cfg.split)?;
    let registry = train_registry(&folds.train, &dag, &cfg)?;
    registry.save(&args.models)?;
    log::info!(
        "stored {} models in {}",
        registry.len(),
        args.models.display()
    );
    Ok(())
}

fn select(args: SelectArgs) -> anyhow::Result<()> {
    let dag = load_dag(&args.dag)?;
    let registry = load_registry(&args.models, &dag)?;
    let rows = read_readings_csv(&args.data)?;
    let readings = rows.get(args.row).ok_or_else(|| {
        anyhow!(
            "row {} out of range, file has {} rows",
            args.row,
            rows.len()
        )
    })?;
    let result = dbcs_select(&dag, &registry, readings, args.theta)?;
    emit(&result, args.out.as_deref())
}

/// Test fold of `ds` under the registry's split, after checking that the
/// train fold is the one the registry was trained on.
fn test_fold(ds: &Dataset, registry: &ConfidenceRegistry) -> anyhow::Result<(Dataset, Dataset)> {
    let folds = split(ds, &registry.config().split)?;
    if fingerprint(&folds.train) != fingerprint(registry.train_set()) {
        return Err(Error::InvalidRegistry(
            "dataset does not reproduce the registry's training fold".into(),
        )
        .into());
    }
    Ok((folds.train, folds.test))
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let dag = load_dag(&args.dag)?;
    let registry = load_registry(&args.models, &dag)?;
    let ds = args.data.load(Some(registry.tasks()))?;
    let (train, test) = test_fold(&ds, &registry)?;
    let report = run_experiment(&dag, &registry, &test, args.theta)?;
    let full = full_channel_accuracy(&train, &test, registry.config())?;

    let label = format!("DBCS (theta {})", args.theta.value());
    print!(
        "{}",
        accuracy_table(
            &report.tasks,
            &[
                (
                    "All channels",
                    &full.per_task_accuracy,
                    full.overall_accuracy
                ),
                (&label, &report.per_task_accuracy, report.overall_accuracy),
            ],
        )
    );
    println!();
    print!(
        "{}",
        report
            .to_text(&label)
            .split_once("\n\n")
            .map_or("", |(_, rest)| rest)
    );

    write_json(&report, &args.out)?;
    write_atomic(
        &args.out.with_extension("histogram.csv"),
        report.histogram_csv().as_bytes(),
    )?;
    Ok(())
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut spec = match &args.spec {
        Some(path) => read_json::<SynthSpec>(path)?,
        None => SynthSpec::benchmark(args.seed.unwrap_or(0)),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(width) = args.feature_width {
        spec.feature_width = width;
    }
    let ds = generate_synthetic(&spec)?;
    write_dataset_csv(&ds, &args.out)?;
    log::info!("wrote {} samples to {}", ds.len(), args.out.display());
    Ok(())
}

fn baseline(args: BaselineArgs) -> anyhow::Result<()> {
    let ds = args.data.load(None)?;
    let cfg = args.classifier.config();
    let folds = split(&ds, &cfg.split)?;
    let models = LazyRegistry::new(&folds.train, &cfg)?;
    let report = run_baseline(&ds.channels, &models, &folds.test, args.theta)?;
    eprint!("{}", report.to_text("Baseline"));
    emit(&report, args.out.as_deref())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Rank(a) => rank(a),
        Command::Rankings(a) => rankings(a),
        Command::BuildDag(a) => build_dag_cmd(a),
        Command::Train(a) => train(a),
        Command::Select(a) => select(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Baseline(a) => baseline(a),
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

/// 2 for I/O failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_io() { 2 } else { 1 };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DBCS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
