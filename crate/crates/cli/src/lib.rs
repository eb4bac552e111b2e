//! Command-line front end: `verify`, `train` and `cv`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dlfm::config::{DatasetKind, RunConfig};
use dlfm::data::{
    load_predefined_fold, load_predefined_folds, parse_movielens, random_folds, DatasetStats,
    Delimiter, FoldSplit, RatingTriple,
};
use dlfm::eval::{cross_validate, evaluate_fold, EvalReport, FoldOutcome};
use dlfm::synthetic::movielens_like;
use dlfm::{Error, ErrorKind, Result};

pub const RESOLVED_CONFIG: &str = "config.resolved.txt";
pub const REPORT_CSV: &str = "report.csv";
pub const TRACE_CSV: &str = "trace.csv";

#[derive(Debug, Parser)]
#[command(
    name = "dlfm",
    version,
    about = "Deep latent factor models for rating prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a dataset and check its user, item and rating counts.
    Verify {
        /// Directory holding u.data (ml100k) or ratings.dat (ml1m, ml10m).
        #[arg(long)]
        dataset_path: PathBuf,
        #[arg(long, default_value = "ml100k")]
        dataset_kind: String,
    },
    /// Fit one fold and write trace.csv, report.csv and the resolved config.
    Train(RunArgs),
    /// Cross-validate over every fold and write report.csv and the resolved config.
    Cv(RunArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// key = value configuration file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset_path: Option<String>,
    #[arg(long)]
    pub dataset_kind: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub outer_iters: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub fold: Option<String>,
    #[arg(long)]
    pub output_dir: Option<String>,
    /// Any configuration key, repeatable: --set lambda=5. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl RunArgs {
    /// File (or defaults), then named flags, then `--set` pairs; validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("dataset_path", &self.dataset_path),
            ("dataset_kind", &self.dataset_kind),
            ("method", &self.method),
            ("arch", &self.arch),
            ("gamma", &self.gamma),
            ("outer_iters", &self.outer_iters),
            ("seed", &self.seed),
            ("fold", &self.fold),
            ("output_dir", &self.output_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        config.apply_overrides(self.overrides.iter().map(String::as_str))?;
        config.validate()?;
        Ok(config)
    }
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Numerical => 3,
    }
}

/// Expected `(users, items, ratings)` of the GroupLens releases.
pub fn expected_counts(kind: DatasetKind) -> Option<(usize, usize, usize)> {
    match kind {
        DatasetKind::Ml100k => Some((943, 1682, 100_000)),
        DatasetKind::Ml1m => Some((6040, 3706, 1_000_209)),
        DatasetKind::Ml10m => Some((69_878, 10_677, 10_000_054)),
        DatasetKind::Synthetic => None,
    }
}

/// Reads every rating of a corpus directory.
pub fn load_all(dir: &Path, kind: DatasetKind) -> Result<Vec<RatingTriple>> {
    match kind {
        DatasetKind::Ml100k => parse_movielens(dir.join("u.data"), Delimiter::Tab),
        DatasetKind::Ml1m | DatasetKind::Ml10m => {
            parse_movielens(dir.join("ratings.dat"), Delimiter::DoubleColon)
        }
        DatasetKind::Synthetic => Err(Error::Invalid("synthetic data has no directory".into())),
    }
}

pub fn verify(dir: &Path, kind: DatasetKind) -> Result<DatasetStats> {
    let triples = load_all(dir, kind)?;
    let stats = DatasetStats::of(&triples);
    if let Some((users, items, ratings)) = expected_counts(kind) {
        if (stats.users, stats.items, stats.ratings) != (users, items, ratings) {
            return Err(Error::Invalid(format!(
                "{kind} should have {users} users, {items} items, {ratings} ratings; found {stats}"
            )));
        }
    }
    Ok(stats)
}

fn dataset_dir(config: &RunConfig) -> Result<&Path> {
    config
        .dataset_path
        .as_deref()
        .ok_or_else(|| Error::Invalid("dataset_path is not set".into()))
}

/// Folds for a run: the predefined `u1..u5` splits for ml100k, otherwise a
/// seeded random partition into `config.folds` parts.
pub fn load_folds(config: &RunConfig, only: Option<usize>) -> Result<Vec<FoldSplit>> {
    if config.dataset_kind == DatasetKind::Ml100k {
        let dir = dataset_dir(config)?;
        return match only {
            Some(f) => Ok(vec![load_predefined_fold(dir, f)?]),
            None => load_predefined_folds(dir),
        };
    }
    let triples = match config.dataset_kind {
        DatasetKind::Synthetic => movielens_like(&config.synthetic())?,
        kind => load_all(dataset_dir(config)?, kind)?,
    };
    let mut folds = random_folds(&triples, config.folds, config.seed, None)?;
    if let Some(f) = only {
        folds.retain(|s| s.fold_id == f);
    }
    Ok(folds)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn prepare_output(config: &RunConfig) -> Result<()> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    write(&dir.join(RESOLVED_CONFIG), &config.resolved())
}

fn write_trace(dir: &Path, name: &str, outcome: &FoldOutcome) -> Result<()> {
    match outcome.fitted.trace() {
        Some(trace) => write(&dir.join(name), &trace.to_csv()),
        None => Ok(()),
    }
}

/// Fits `config.fold` and writes its outputs.
pub fn train(config: &RunConfig) -> Result<EvalReport> {
    let folds = load_folds(config, Some(config.fold))?;
    let split = folds
        .first()
        .ok_or_else(|| Error::Invalid(format!("fold {} not available", config.fold)))?;
    prepare_output(config)?;
    let method = config.to_method();
    let outcome = evaluate_fold(
        split,
        &method,
        config.dataset_kind.scale(),
        config.relevance_threshold,
    )?;
    write_trace(&config.output_dir, TRACE_CSV, &outcome)?;
    let report = EvalReport {
        method: method.name().to_string(),
        folds: vec![outcome.metrics],
    };
    write(&config.output_dir.join(REPORT_CSV), &report.to_csv())?;
    Ok(report)
}

/// Evaluates every fold; per-fold traces go to `trace_fold{k}.csv`.
pub fn cv(config: &RunConfig) -> Result<EvalReport> {
    let folds = load_folds(config, None)?;
    prepare_output(config)?;
    let dir = config.output_dir.clone();
    let report = cross_validate(
        &folds,
        &config.to_method(),
        config.dataset_kind.scale(),
        config.relevance_threshold,
        |outcome| {
            write_trace(
                &dir,
                &format!("trace_fold{}.csv", outcome.metrics.fold),
                outcome,
            )
        },
    )?;
    write(&dir.join(REPORT_CSV), &report.to_csv())?;
    Ok(report)
}

/// Runs a parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Verify {
            dataset_path,
            dataset_kind,
        } => {
            let kind: DatasetKind = dataset_kind.parse()?;
            let stats = verify(&dataset_path, kind)?;
            println!("{kind}: {stats}");
        }
        Command::Train(args) => {
            let config = args.resolve()?;
            let report = train(&config)?;
            print!("{}", report.table());
            println!("outputs in {}", config.output_dir.display());
        }
        Command::Cv(args) => {
            let config = args.resolve()?;
            let report = cv(&config)?;
            print!("{}", report.table());
            println!("outputs in {}", config.output_dir.display());
        }
    }
    Ok(())
}
