use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use supsom::dataset::{band_column_names, load_band_mask, read_csv_header};
use supsom::evaluation::label_kind_for;
use supsom::{
    cross_validate, evaluate, load_csv, train_model, ClassLabel, Dataset, LabelKind, MetricId,
    Predictions, ScheduleKind, SomError, SomModel, Task, TrainOptions,
};

mod config;

use config::{DecayOverrides, RunConfig, SomOverrides, SEED_DERIVATION};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or missing required inputs (exit 1).
    Usage(String),
    Som(SomError),
    Output(PathBuf, io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Som(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Som(e) => e.fmt(f),
            CliError::Output(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<SomError> for CliError {
    fn from(e: SomError) -> Self {
        CliError::Som(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "supsom",
    version,
    about = "Self-organizing maps for mapping, regression and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an unsupervised map and an optional supervised head
    Train(TrainArgs),
    /// Predict one value per row of a data file
    Predict(PredictArgs),
    /// Score a trained model on labeled data
    Evaluate(EvaluateArgs),
    /// k-fold cross-validation with per-fold and mean metrics
    Crossval(CrossvalArgs),
    /// Write the BMU histogram and the per-node output map as CSV
    ExportMaps(ExportArgs),
}

fn parse_via<T: FromStr<Err = SomError>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: SomError| e.to_string())
}

#[derive(Args, Default)]
struct SomArgs {
    #[arg(long)]
    n_row: Option<usize>,
    #[arg(long)]
    n_column: Option<usize>,
    #[arg(long)]
    n_iter_unsupervised: Option<usize>,
    #[arg(long)]
    n_iter_supervised: Option<usize>,
    /// euclidean | manhattan | tanimoto | mahalanobis
    #[arg(long, value_parser = parse_via::<MetricId>)]
    metric: Option<MetricId>,
    /// inverse | linear | power | exponential | start-end
    #[arg(long, value_parser = parse_via::<ScheduleKind>)]
    lr_schedule: Option<ScheduleKind>,
    #[arg(long)]
    lr_start: Option<f64>,
    #[arg(long)]
    lr_end: Option<f64>,
    /// linear | exponential | start-end
    #[arg(long, value_parser = parse_via::<ScheduleKind>)]
    radius_schedule: Option<ScheduleKind>,
    #[arg(long)]
    radius_start: Option<f64>,
    #[arg(long)]
    radius_end: Option<f64>,
    /// gaussian | mexican-hat
    #[arg(long, value_parser = parse_via::<supsom::KernelKind>)]
    kernel: Option<supsom::KernelKind>,
    /// online | batch
    #[arg(long, value_parser = parse_via::<supsom::UpdateMode>)]
    update_mode: Option<supsom::UpdateMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    class_weighting: Option<bool>,
}

impl SomArgs {
    fn overrides(&self) -> SomOverrides {
        SomOverrides {
            n_row: self.n_row,
            n_column: self.n_column,
            n_iter_unsupervised: self.n_iter_unsupervised,
            n_iter_supervised: self.n_iter_supervised,
            metric: self.metric,
            learning_rate: DecayOverrides {
                kind: self.lr_schedule,
                start: self.lr_start,
                end: self.lr_end,
            },
            radius: DecayOverrides {
                kind: self.radius_schedule,
                start: self.radius_start,
                end: self.radius_end,
            },
            kernel: self.kernel,
            update_mode: self.update_mode,
            seed: self.seed,
            class_weighting: self.class_weighting,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the resolved configuration (default: stderr)
    #[arg(long)]
    resolved_config: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: Option<PathBuf>,
    /// none | regression | classification
    #[arg(long, value_parser = parse_via::<Task>)]
    task: Option<Task>,
    /// Label column name (default: label)
    #[arg(long)]
    label_column: Option<String>,
    /// Min-max scale features using the training range
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    scale: Option<bool>,
    /// File of 1-based band indices whose `band_<k>` columns are discarded
    #[arg(long)]
    band_mask: Option<PathBuf>,
    /// Discard datapoints with this class label; repeatable
    #[arg(long)]
    drop_label: Vec<String>,
}

impl DataArgs {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            data: self.data.clone(),
            task: self.task,
            label_column: self.label_column.clone(),
            scale: self.scale,
            band_mask: self.band_mask.clone(),
            drop_label: (!self.drop_label.is_empty()).then(|| self.drop_label.clone()),
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Output model file
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    som: SomArgs,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Number of folds (default: 5)
    #[arg(long)]
    folds: Option<usize>,
    /// Report file (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    som: SomArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Predictions CSV (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Labeled test data
    #[arg(long)]
    data: Option<PathBuf>,
    /// Labeled training data, reported alongside the test data
    #[arg(long)]
    train_data: Option<PathBuf>,
    /// Discard datapoints with this class label; repeatable
    #[arg(long)]
    drop_label: Vec<String>,
    /// Report file (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory for bmu_histogram.csv and output_map.csv
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{flag} is required (flag or config file)")))
}

fn merged(common: &CommonArgs, command: &str, flags: RunConfig) -> Result<RunConfig> {
    let mut run = RunConfig::load_optional(common.config.as_deref())?.overlay(flags);
    run.command = Some(command.to_owned());
    Ok(run)
}

fn emit_resolved(common: &CommonArgs, mut run: RunConfig) -> Result<()> {
    run.seed_derivation = Some(SEED_DERIVATION.into());
    let text = run.to_json();
    match &common.resolved_config {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Output(path.clone(), e)),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Output(p.to_owned(), e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| CliError::Output(p.to_owned(), e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()
                .map_err(|e| CliError::Output("<stdout>".into(), e))
        }
    }
}

/// Loads training data per the run config; fills in the resolved task and
/// label column.
fn load_training_data(run: &mut RunConfig) -> Result<Dataset> {
    let task = *run.task.get_or_insert(Task::None);
    let path = require(&run.data, "--data")?.clone();
    if task != Task::None && run.label_column.is_none() {
        run.label_column = Some("label".into());
    }
    let kind = match (task, &run.label_column) {
        // labels are carried but unused
        (Task::None, Some(_)) => LabelKind::Categorical,
        _ => label_kind_for(task),
    };
    let mut data: Dataset = load_csv(&path, run.label_column.as_deref(), kind)?;
    if let Some(mask) = &run.band_mask {
        data = data.drop_features(&band_column_names(&load_band_mask(mask)?))?;
    }
    data = drop_labels(data, run.drop_label.as_deref().unwrap_or_default())?;
    run.scale.get_or_insert(false);
    Ok(data)
}

fn drop_labels(mut data: Dataset, labels: &[String]) -> Result<Dataset> {
    if !labels.is_empty() && data.label_kind() != LabelKind::Categorical {
        return Err(CliError::Usage(
            "--drop-label needs categorical labels".into(),
        ));
    }
    for l in labels {
        data = data.drop_class(&ClassLabel::new(l.as_str()))?;
    }
    if data.is_empty() {
        return Err(SomError::EmptyDataset.into());
    }
    Ok(data)
}

/// Loads data for an existing model. The model's label column, when present
/// in the file, is read as labels so it is never parsed as a feature.
fn load_for_model(path: &Path, model: &SomModel, labeled: bool) -> Result<Dataset> {
    let header = read_csv_header(path)?;
    let kind = label_kind_for(model.task());
    match &model.label_name {
        Some(name) if header.contains(name) => {
            let kind = if labeled {
                kind
            } else {
                LabelKind::Categorical
            };
            Ok(load_csv(path, Some(name), kind)?)
        }
        Some(name) if labeled => Err(SomError::MissingColumn(name.clone()).into()),
        _ if labeled => Err(CliError::Usage(
            "model has no label column to evaluate against".into(),
        )),
        _ => Ok(load_csv(path, None, LabelKind::None)?),
    }
}

fn load_model(path: &Path) -> Result<SomModel> {
    Ok(SomModel::load(path)?)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let flags = RunConfig {
        model: args.model.clone(),
        som: args.som.overrides(),
        ..args.data.run_config()
    };
    let mut run = merged(&args.common, "train", flags)?;
    let config = run.som.resolve()?;
    let model_path = require(&run.model, "--model")?.clone();
    let data = load_training_data(&mut run)?;
    let opts = TrainOptions {
        task: run.task.unwrap_or_default(),
        scale: run.scale.unwrap_or_default(),
    };
    let model = train_model(&data, &config, opts, 0)?;
    model.save(&model_path)?;
    run.som = SomOverrides::from_config(&config);
    emit_resolved(&args.common, run)
}

fn cmd_crossval(args: CrossvalArgs) -> Result<()> {
    let flags = RunConfig {
        folds: args.folds,
        output: args.output.clone(),
        som: args.som.overrides(),
        ..args.data.run_config()
    };
    let mut run = merged(&args.common, "crossval", flags)?;
    let config = run.som.resolve()?;
    let k = *run.folds.get_or_insert(5);
    let data = load_training_data(&mut run)?;
    let opts = TrainOptions {
        task: run.task.unwrap_or_default(),
        scale: run.scale.unwrap_or_default(),
    };
    let report = cross_validate(&data, &config, opts, k)?;
    write_output(run.output.as_deref(), |w| {
        w.write_all(report.render().as_bytes())
            .map_err(|e| CliError::Output("report".into(), e))
    })?;
    run.som = SomOverrides::from_config(&config);
    emit_resolved(&args.common, run)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let flags = RunConfig {
        model: args.model.clone(),
        data: args.data.clone(),
        output: args.output.clone(),
        ..Default::default()
    };
    let run = merged(&args.common, "predict", flags)?;
    let model = load_model(require(&run.model, "--model")?)?;
    let data = load_for_model(require(&run.data, "--data")?, &model, false)?;
    let predictions = model.predict(&data)?;
    write_output(run.output.as_deref(), |w| {
        let io = |e| CliError::Output("predictions".into(), e);
        writeln!(w, "prediction").map_err(io)?;
        match &predictions {
            Predictions::Regression(v) => v.iter().try_for_each(|p| writeln!(w, "{p}")),
            Predictions::Classification(v) => v.iter().try_for_each(|p| writeln!(w, "{p}")),
        }
        .map_err(io)
    })?;
    emit_resolved(&args.common, run)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let flags = RunConfig {
        model: args.model.clone(),
        data: args.data.clone(),
        train_data: args.train_data.clone(),
        output: args.output.clone(),
        drop_label: (!args.drop_label.is_empty()).then(|| args.drop_label.clone()),
        ..Default::default()
    };
    let run = merged(&args.common, "evaluate", flags)?;
    let model = load_model(require(&run.model, "--model")?)?;
    if model.task() == Task::None {
        return Err(CliError::Usage(
            "model has no supervised head to evaluate".into(),
        ));
    }
    let drop = run.drop_label.as_deref().unwrap_or_default();
    let test = drop_labels(
        load_for_model(require(&run.data, "--data")?, &model, true)?,
        drop,
    )?;
    let train = run
        .train_data
        .as_deref()
        .map(|p| load_for_model(p, &model, true).and_then(|d| drop_labels(d, drop)))
        .transpose()?;
    let report = evaluate(&model, train.as_ref(), Some(&test))?;
    write_output(run.output.as_deref(), |w| {
        w.write_all(report.render().as_bytes())
            .map_err(|e| CliError::Output("report".into(), e))
    })?;
    emit_resolved(&args.common, run)
}

fn cmd_export_maps(args: ExportArgs) -> Result<()> {
    let flags = RunConfig {
        model: args.model.clone(),
        data: args.data.clone(),
        out_dir: args.out_dir.clone(),
        ..Default::default()
    };
    let run = merged(&args.common, "export-maps", flags)?;
    let model = load_model(require(&run.model, "--model")?)?;
    let data = load_for_model(require(&run.data, "--data")?, &model, false)?;
    let out_dir = require(&run.out_dir, "--out-dir")?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Output(out_dir.clone(), e))?;

    let histogram = model.map.bmu_histogram(&model.prepare(&data)?)?;
    let path = out_dir.join("bmu_histogram.csv");
    let file = File::create(&path).map_err(|e| CliError::Output(path.clone(), e))?;
    histogram.write_csv(BufWriter::new(file))?;
    if model.task() == Task::None {
        eprintln!("model has no supervised head, output_map.csv not written");
    } else {
        let path = out_dir.join("output_map.csv");
        let file = File::create(&path).map_err(|e| CliError::Output(path.clone(), e))?;
        model.write_output_map(BufWriter::new(file))?;
    }
    emit_resolved(&args.common, run)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Crossval(a) => cmd_crossval(a),
        Command::ExportMaps(a) => cmd_export_maps(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
