//! Command-line driver for the whole pipeline.
//!
//! Each subcommand is one stage; stages communicate through plain files so
//! any of them can be rerun or swapped out:
//!
//! ```text
//! synth      -> table.csv, schema.txt
//! ingest     -> resampled.csv
//! label      -> labeled.csv            (adds the LABEL column)
//! select     -> correlation.txt, selected.txt
//! train      -> model.json, history.txt, metrics.txt, split.txt, windows.bin
//! gridsearch -> grid.tsv
//! evaluate   -> metrics.txt
//! warn       -> alert lines on stdout
//! ```
//!
//! All artifact writes are atomic (temp file plus rename), so an
//! interrupted run never leaves a half-written file. Failures map to
//! distinct process exit codes; see `Error::exit_code`.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, Axis};

use crate::config::{load_config, Normalization, PipelineConfig};
use crate::dataset::{
    apply_minmax, build_windows, fit_minmax, split_80_20, NormStats, SplitIndices, WindowSet,
};
use crate::error::{Error, Result};
use crate::features::select_features;
use crate::gridsearch::grid_search;
use crate::labeling::{label_overlimit, LABEL_COLUMN};
use crate::loss::{classify, ConfusionMatrix};
use crate::lstm::forward_batch;
use crate::model::{load_model, save_model, ModelMeta};
use crate::qar::{
    convert_text_labels, generate_synthetic, parse_table, read_numeric_table, resample_1hz,
    schema_of, Cell, Column, ColumnKind, QarTable, Schema, TextCodebook,
};
use crate::stream::{warn_stream, WarnOptions};
use crate::train::train;
use crate::util::{derive_seed, read_to_string, seed_tag, write_atomic};

#[derive(Parser, Debug)]
#[command(
    name = "overlimit",
    version,
    about = "Early warning of over-limit events in recorder time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic recorder table plus its schema
    Synth(SynthArgs),
    /// Parse a raw recorder CSV, convert text labels, resample to 1 Hz
    Ingest(IngestArgs),
    /// Mark each second over-limit or normal from the monitored column
    Label(LabelArgs),
    /// Rank attributes by correlation with the labels and pick features
    Select(SelectArgs),
    /// Train the warning model and write model plus evaluation artifacts
    Train(TrainArgs),
    /// Sweep window length, units, and learning rate with cross-validation
    Gridsearch(GridArgs),
    /// Re-evaluate a saved model on a labeled table
    Evaluate(EvaluateArgs),
    /// Replay a table through a saved model, one alert line per second
    Warn(WarnArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory for table.csv and schema.txt
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Seconds of flight to generate
    #[arg(long, default_value_t = 3600)]
    pub seconds: usize,
    /// Total attribute count including the monitored channel
    #[arg(long, default_value_t = 10)]
    pub attributes: usize,
    /// Approximate fraction of over-limit seconds, in (0, 0.5)
    #[arg(long, default_value_t = 0.05)]
    pub rate: f64,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Raw recorder CSV
    #[arg(long)]
    pub table: PathBuf,
    /// Schema file: one `name = continuous|binary` line per column
    #[arg(long)]
    pub schema: PathBuf,
    /// Extra codebook lines `attribute/label = code`, merged over the built-ins
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Output directory for resampled.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    /// Resampled numeric CSV
    #[arg(long)]
    pub table: PathBuf,
    /// Pipeline config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for labeled.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    /// Labeled CSV as written by the label stage
    #[arg(long)]
    pub table: PathBuf,
    /// Pipeline config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for correlation.txt and selected.txt
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labeled CSV as written by the label stage
    #[arg(long)]
    pub table: PathBuf,
    /// Feature list, one column name per line (selected.txt)
    #[arg(long)]
    pub features: PathBuf,
    /// Pipeline config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the model and evaluation artifacts
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Labeled CSV as written by the label stage
    #[arg(long)]
    pub table: PathBuf,
    /// Feature list, one column name per line (selected.txt)
    #[arg(long)]
    pub features: PathBuf,
    /// Pipeline config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for grid.tsv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Saved model.json
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled CSV as written by the label stage
    #[arg(long)]
    pub table: PathBuf,
    /// Output directory for metrics.txt
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct WarnArgs {
    /// Saved model.json
    #[arg(long)]
    pub model: PathBuf,
    /// Numeric CSV to replay, or `-` for stdin
    #[arg(long)]
    pub table: PathBuf,
    /// Pipeline config file (for replay pacing)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sleep one second per row, mimicking a live feed
    #[arg(long)]
    pub realtime: bool,
}

/// Parse the given arguments (first one is the program name), run the
/// selected command, and return the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point for the binary: parse `std::env::args_os()`.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Ingest(args) => cmd_ingest(&args),
        Command::Label(args) => cmd_label(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Gridsearch(args) => cmd_gridsearch(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Warn(args) => cmd_warn(&args),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn open_reader(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::file(path, e))
}

fn read_table(path: &Path) -> Result<QarTable> {
    read_numeric_table(open_reader(path)?)
}

fn load_cfg(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Feature names, one per line; `#` comments and blank lines are skipped.
fn read_feature_list(path: &Path) -> Result<Vec<String>> {
    let text = read_to_string(path)?;
    let mut names = Vec::new();
    for line in text.lines() {
        let name = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        }
        .trim();
        if name.is_empty() {
            continue;
        }
        if names.iter().any(|n| n == name) {
            return Err(Error::Argument(format!(
                "feature {name:?} is listed more than once in {}",
                path.display()
            )));
        }
        names.push(name.to_string());
    }
    if names.is_empty() {
        return Err(Error::Argument(format!(
            "{} lists no features; selection may have kept none",
            path.display()
        )));
    }
    Ok(names)
}

/// Stack the named columns into a (rows x features) matrix.
fn feature_matrix(table: &QarTable, names: &[String]) -> Result<Array2<f64>> {
    let mut matrix = Array2::zeros((table.row_count(), names.len()));
    for (j, name) in names.iter().enumerate() {
        if name == LABEL_COLUMN {
            return Err(Error::Argument(
                "LABEL is the target and cannot be used as a feature".into(),
            ));
        }
        let col = table.numeric_column(name)?;
        for (i, v) in col.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    Ok(matrix)
}

/// The LABEL column as 0/1 labels.
fn label_vector(table: &QarTable) -> Result<Vec<u8>> {
    if table.column(LABEL_COLUMN).is_none() {
        return Err(Error::Schema(format!(
            "table has no {LABEL_COLUMN} column; run the label stage first"
        )));
    }
    table
        .numeric_column(LABEL_COLUMN)?
        .into_iter()
        .map(|v| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::Domain(format!("label value {v} is not 0 or 1")))
            }
        })
        .collect()
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let table = generate_synthetic(args.seed, args.seconds, args.attributes, args.rate)?;
    ensure_dir(&args.out)?;
    write_text(&args.out.join("table.csv"), &table.to_csv_string()?)?;
    write_text(&args.out.join("schema.txt"), &schema_of(&table).to_text())?;
    println!(
        "wrote {} seconds x {} attributes to {}",
        table.row_count(),
        table.columns().len(),
        args.out.join("table.csv").display()
    );
    Ok(())
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let schema = Schema::parse(&read_to_string(&args.schema)?)?;
    let raw = parse_table(open_reader(&args.table)?, &schema)?;
    let mut codebook = TextCodebook::builtin();
    if let Some(extra) = &args.codebook {
        codebook.extend_from_text(&read_to_string(extra)?)?;
    }
    let converted = convert_text_labels(&raw, &codebook)?;
    let resampled = resample_1hz(&converted)?;
    ensure_dir(&args.out)?;
    write_text(&args.out.join("resampled.csv"), &resampled.to_csv_string()?)?;
    println!(
        "{} raw rows resampled to {} seconds across {} attributes",
        raw.row_count(),
        resampled.row_count(),
        resampled.columns().len()
    );
    Ok(())
}

fn cmd_label(args: &LabelArgs) -> Result<()> {
    let cfg = load_cfg(&args.config)?;
    let table = read_table(&args.table)?;
    if table.column(LABEL_COLUMN).is_some() {
        return Err(Error::Schema(format!(
            "table already has a {LABEL_COLUMN} column"
        )));
    }
    let g = table.numeric_column(&cfg.g_column)?;
    let series = label_overlimit(&g)?;

    let mut columns = table.columns().to_vec();
    columns.push(Column {
        name: LABEL_COLUMN.to_string(),
        kind: ColumnKind::Binary,
        values: series.labels.iter().map(|&l| Cell::Num(l as f64)).collect(),
    });
    let labeled = QarTable::new(columns, table.timestamps().to_vec())?;
    ensure_dir(&args.out)?;
    write_text(&args.out.join("labeled.csv"), &labeled.to_csv_string()?)?;

    println!("column {}: mean {}", cfg.g_column, series.stats.mean);
    println!("sigma {}", series.stats.sigma);
    println!("threshold {}", series.threshold);
    println!(
        "over-limit seconds {} of {} ({:.4})",
        series.overlimit_count(),
        series.len(),
        series.overlimit_fraction()
    );
    if series.degenerate() {
        println!("warning: constant series, no second can be over-limit");
    }
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let cfg = load_cfg(&args.config)?;
    let table = read_table(&args.table)?;
    let stored = label_vector(&table)?;
    let g = table.numeric_column(&cfg.g_column)?;
    let series = label_overlimit(&g)?;
    if series.labels != stored {
        return Err(Error::State(format!(
            "{LABEL_COLUMN} column does not match labels recomputed from {:?}; re-run the label stage",
            cfg.g_column
        )));
    }

    let candidates = QarTable::new(
        table
            .columns()
            .iter()
            .filter(|c| c.name != LABEL_COLUMN)
            .cloned()
            .collect(),
        table.timestamps().to_vec(),
    )?;
    let report = select_features(&candidates, &series, &cfg.g_column, cfg.select_threshold)?;

    ensure_dir(&args.out)?;
    write_text(&args.out.join("correlation.txt"), &report.to_text())?;
    let mut list = report.selected.join("\n");
    if !list.is_empty() {
        list.push('\n');
    }
    write_text(&args.out.join("selected.txt"), &list)?;

    print!("{}", report.to_text());
    println!(
        "selected {} of {} attributes",
        report.selected.len(),
        report.rows.len()
    );
    Ok(())
}

/// Rows covered by the training windows: window w spans rows [w, w + T).
fn train_covered_rows(split: &SplitIndices, time_step: usize, row_count: usize) -> Vec<usize> {
    let mut covered = vec![false; row_count];
    for &w in &split.train {
        for flag in covered.iter_mut().skip(w).take(time_step) {
            *flag = true;
        }
    }
    covered
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| c.then_some(i))
        .collect()
}

struct PreparedData {
    stats: NormStats,
    windows: WindowSet,
    split: SplitIndices,
}

/// Shared train/evaluate data preparation: stack features, fit or apply
/// normalization, window, and split.
fn prepare(
    table: &QarTable,
    features: &[String],
    time_step: usize,
    seed: u64,
    normalization: Normalization,
    frozen: Option<&NormStats>,
) -> Result<PreparedData> {
    let labels = label_vector(table)?;
    let rows = feature_matrix(table, features)?;
    if table.row_count() < time_step + 2 {
        return Err(Error::Argument(format!(
            "{} rows cannot form two windows of {} seconds; need at least {}",
            table.row_count(),
            time_step,
            time_step + 2
        )));
    }
    let window_count = table.row_count() - time_step;
    let split = split_80_20(window_count, derive_seed(seed, &[seed_tag::SPLIT]))?;
    let stats = match frozen {
        Some(stats) => stats.clone(),
        None => match normalization {
            Normalization::FullSeries => fit_minmax(&rows.view())?,
            Normalization::TrainOnly => {
                let idx = train_covered_rows(&split, time_step, table.row_count());
                fit_minmax(&rows.select(Axis(0), &idx).view())?
            }
        },
    };
    let normed = apply_minmax(&rows.view(), &stats)?;
    let windows = build_windows(&normed.view(), &labels, time_step)?;
    Ok(PreparedData {
        stats,
        windows,
        split,
    })
}

/// Classify the held-out windows and format the metrics report.
fn test_report(
    params: &crate::lstm::NetworkParams,
    windows: &WindowSet,
    split: &SplitIndices,
    threshold: f64,
) -> Result<String> {
    if split.test.is_empty() {
        return Ok("# no held-out samples\n".to_string());
    }
    let probs = forward_batch(params, windows, &split.test)?;
    let preds = classify(&probs, threshold)?;
    let actual: Vec<u8> = split.test.iter().map(|&i| windows.labels[i]).collect();
    let matrix = ConfusionMatrix::from_labels(&actual, &preds)?;
    Ok(matrix.to_report(threshold))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = load_cfg(&args.config)?;
    let table = read_table(&args.table)?;
    let features = read_feature_list(&args.features)?;
    let data = prepare(
        &table,
        &features,
        cfg.train.time_step,
        cfg.train.seed,
        cfg.normalization,
        None,
    )?;

    let (params, history) = train(&data.windows, &data.split, &cfg.train)?;

    let meta = ModelMeta {
        time_step: cfg.train.time_step,
        units: cfg.train.units,
        features,
        g_column: cfg.g_column.clone(),
        mins: data.stats.mins.clone(),
        maxs: data.stats.maxs.clone(),
        seed: cfg.train.seed,
        threshold: cfg.train.threshold,
        squash: cfg.train.squash.as_str().to_string(),
        cost_mode: cfg.train.cost_mode.as_str().to_string(),
        cost_01: history.costs.cost_01,
        cost_10: history.costs.cost_10,
    };

    ensure_dir(&args.out)?;
    save_model(&args.out.join("model.json"), &params, &meta)?;
    write_text(&args.out.join("history.txt"), &history.to_text())?;
    write_text(&args.out.join("split.txt"), &data.split.to_text())?;
    data.windows.save(&args.out.join("windows.bin"))?;
    let report = test_report(&params, &data.windows, &data.split, cfg.train.threshold)?;
    write_text(&args.out.join("metrics.txt"), &report)?;

    if let Some(last) = history.epochs.last() {
        println!(
            "epoch {}: train loss {}, train accuracy {}, test accuracy {}",
            last.epoch, last.train_loss, last.train_accuracy, last.test_accuracy
        );
    }
    print!("{report}");
    println!("model saved to {}", args.out.join("model.json").display());
    Ok(())
}

fn cmd_gridsearch(args: &GridArgs) -> Result<()> {
    let cfg = load_cfg(&args.config)?;
    let table = read_table(&args.table)?;
    let features = read_feature_list(&args.features)?;
    let labels = label_vector(&table)?;
    let rows = feature_matrix(&table, &features)?;
    // The grid compares combinations against each other, so every
    // combination sees the same full-series scaling.
    let stats = fit_minmax(&rows.view())?;
    let normed = apply_minmax(&rows.view(), &stats)?;

    let result = grid_search(&normed.view(), &labels, &cfg.grid)?;

    ensure_dir(&args.out)?;
    write_text(&args.out.join("grid.tsv"), &result.to_tsv())?;
    print!("{}", result.to_text());
    match result.best() {
        Some(best) => println!(
            "best: time_step {} units {} learning_rate {}",
            best.time_step, best.units, best.learning_rate
        ),
        None => println!("no feasible combination for this table"),
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (params, meta) = load_model(&args.model)?;
    let table = read_table(&args.table)?;
    let stats = meta.norm_stats();
    let data = prepare(
        &table,
        &meta.features,
        meta.time_step,
        meta.seed,
        Normalization::FullSeries,
        Some(&stats),
    )?;
    let report = test_report(&params, &data.windows, &data.split, meta.threshold)?;
    ensure_dir(&args.out)?;
    write_text(&args.out.join("metrics.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_warn(args: &WarnArgs) -> Result<()> {
    let cfg = load_cfg(&args.config)?;
    let (params, meta) = load_model(&args.model)?;
    let options = WarnOptions {
        realtime: args.realtime || cfg.realtime,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let summary = if args.table.as_os_str() == "-" {
        let stdin = io::stdin();
        warn_stream(&params, &meta, stdin.lock(), &mut out, &options)?
    } else {
        warn_stream(&params, &meta, open_reader(&args.table)?, &mut out, &options)?
    };
    out.flush()?;
    eprintln!(
        "{} rows in, {} predictions, {} alerts",
        summary.rows, summary.predictions(), summary.alerts
    );
    Ok(())
}
