//! The `sentiscope` command line: one subcommand per pipeline stage, a JSON
//! run config with full defaults, and a manifest per output directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::benchmark::{make_plan, run_benchmark};
use crate::data::{
    correlation_matrix, drop_technical, generate_synthetic_reviews, histogram, screen_missing,
    screen_uniform, split_holdout, to_class_target, Column, TabularDataset, RATING_COLUMN,
};
use crate::explain::{
    average_breakdowns, average_profiles, breakdown, breakdowns_to_csv, group_profiles,
    make_explainer, permutation_importance, profiles_to_csv, Explainer, ImportanceReport, Loss,
};
use crate::figures::{write_figure, FigurePayload, FigureSpec};
use crate::lexicon::{extract_corpus, Lexicon, ScoreMode, SentimentLabel};
use crate::matrix::FeatureMatrix;
use crate::models::{
    self, Algorithm, CartParams, ForestParams, GbmParams, Hyperparameters, KnnParams, ModelSpec,
    Target, Task, TrainedModel,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing input {}: {source}", path.display())]
    MissingInput {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// `2` for usage and config problems, `1` for failures while computing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            _ => 2,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "sentiscope",
    version,
    about = "Lexicon sentiment features, rating models and explanations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON run config; omitted fields take their defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one config leaf, e.g. `--set explain.selection.1=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainMode {
    Importance,
    Breakdown,
    Whatif,
}

impl ExplainMode {
    fn as_str(self) -> &'static str {
        match self {
            ExplainMode::Importance => "importance",
            ExplainMode::Breakdown => "breakdown",
            ExplainMode::Whatif => "whatif",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop technical, uniform and mostly-missing columns from the raw export.
    Prepare(ConfigArgs),
    /// Score review texts against the lexicon and split off the hold-out set.
    Extract(ConfigArgs),
    /// Sentiment histograms and the correlation heatmap.
    Stats(ConfigArgs),
    /// Cross-validate all four algorithms on one task.
    Benchmark {
        #[arg(long)]
        task: Task,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit one algorithm on the training split and save it.
    Train {
        #[arg(long)]
        algorithm: Algorithm,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Explain the trained regression model.
    Explain {
        #[arg(long, value_enum)]
        mode: ExplainMode,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a synthetic feature table.
    Synth {
        #[arg(long)]
        rows: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::Extract(_) => "extract",
            Command::Stats(_) => "stats",
            Command::Benchmark { .. } => "benchmark",
            Command::Train { .. } => "train",
            Command::Explain { .. } => "explain",
            Command::Synth { .. } => "synth",
        }
    }

    fn config_args(&self) -> &ConfigArgs {
        match self {
            Command::Prepare(c) | Command::Extract(c) | Command::Stats(c) => c,
            Command::Benchmark { config, .. }
            | Command::Train { config, .. }
            | Command::Explain { config, .. }
            | Command::Synth { config, .. } => config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Raw review export read by `prepare`.
    pub input_csv: Option<PathBuf>,
    /// NRC-format word/label/flag TSV read by `extract`.
    pub lexicon_tsv: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<out>/prepare/cleaned.csv`.
    pub cleaned_csv: Option<PathBuf>,
    /// Defaults to `<out>/extract/features.csv`.
    pub features_csv: Option<PathBuf>,
    /// Defaults to `<out>/extract/holdout.csv`.
    pub holdout_csv: Option<PathBuf>,
    /// Defaults to `<out>/train/model_<explain.algorithm>.json`.
    pub model_json: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            input_csv: None,
            lexicon_tsv: None,
            output_dir: PathBuf::from("out"),
            cleaned_csv: None,
            features_csv: None,
            holdout_csv: None,
            model_json: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnsConfig {
    pub text: String,
    pub rating: String,
}

impl Default for ColumnsConfig {
    fn default() -> Self {
        ColumnsConfig {
            text: "reviews.text".into(),
            rating: "reviews.rating".into(),
        }
    }
}

pub const DEFAULT_TECHNICAL_COLUMNS: [&str; 10] = [
    "id",
    "dateAdded",
    "dateUpdated",
    "keys",
    "reviews.date",
    "reviews.dateSeen",
    "reviews.sourceURLs",
    "reviews.username",
    "sourceURLs",
    "websites",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    pub uniform_threshold: f64,
    pub missing_threshold: f64,
    pub technical_columns: Vec<String>,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            uniform_threshold: 0.999,
            missing_threshold: 0.10,
            technical_columns: DEFAULT_TECHNICAL_COLUMNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub holdout_size: usize,
    pub score_mode: ScoreMode,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            holdout_size: 100,
            score_mode: ScoreMode::TokenNormalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub histogram_bins: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { histogram_bins: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResamplingConfig {
    pub folds: usize,
    pub repeats: usize,
}

impl Default for ResamplingConfig {
    fn default() -> Self {
        ResamplingConfig {
            folds: 5,
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub knn: KnnParams,
    pub cart: CartParams,
    pub random_forest: ForestParams,
    pub gbm: GbmParams,
}

impl ModelsConfig {
    pub fn params(&self, algorithm: Algorithm) -> Hyperparameters {
        match algorithm {
            Algorithm::Knn => Hyperparameters::Knn(self.knn),
            Algorithm::Cart => Hyperparameters::Cart(self.cart),
            Algorithm::RandomForest => Hyperparameters::RandomForest(self.random_forest),
            Algorithm::Gbm => Hyperparameters::Gbm(self.gbm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Regression,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Which trained model to explain.
    pub algorithm: Algorithm,
    /// Ground-truth rating → number of hold-out instances to explain.
    pub selection: BTreeMap<String, usize>,
    pub permutations: usize,
    pub loss: Loss,
    pub distribution_cap: usize,
    pub whatif_features: usize,
    pub grid_size: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            algorithm: Algorithm::RandomForest,
            selection: BTreeMap::from([("1".to_string(), 5), ("5".to_string(), 5)]),
            permutations: 10,
            loss: Loss::Rmse,
            distribution_cap: 1000,
            whatif_features: 4,
            grid_size: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub rows: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { rows: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub columns: ColumnsConfig,
    pub screening: ScreeningConfig,
    pub extract: ExtractConfig,
    pub stats: StatsConfig,
    pub resampling: ResamplingConfig,
    pub models: ModelsConfig,
    pub train: TrainConfig,
    pub explain: ExplainConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            paths: PathsConfig::default(),
            columns: ColumnsConfig::default(),
            screening: ScreeningConfig::default(),
            extract: ExtractConfig::default(),
            stats: StatsConfig::default(),
            resampling: ResamplingConfig::default(),
            models: ModelsConfig::default(),
            train: TrainConfig::default(),
            explain: ExplainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let s = &self.screening;
        for (name, v) in [
            ("uniform_threshold", s.uniform_threshold),
            ("missing_threshold", s.missing_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("screening.{name} must be in [0, 1], got {v}"));
            }
        }
        if self.extract.holdout_size == 0 {
            return bad("extract.holdout_size must be positive".into());
        }
        if self.stats.histogram_bins == 0 {
            return bad("stats.histogram_bins must be positive".into());
        }
        if self.resampling.folds < 2 || self.resampling.repeats < 1 {
            return bad("resampling needs folds >= 2 and repeats >= 1".into());
        }
        for alg in Algorithm::ALL {
            self.models
                .params(alg)
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        let e = &self.explain;
        if e.permutations == 0 || e.grid_size < 2 || e.whatif_features == 0 {
            return bad(
                "explain needs permutations >= 1, grid_size >= 2, whatif_features >= 1".into(),
            );
        }
        for key in e.selection.keys() {
            if key.parse::<f64>().is_err() {
                return bad(format!("explain.selection key {key:?} is not a rating"));
            }
        }
        if self.synth.rows < 10 {
            return bad(format!(
                "synth.rows must be at least 10, got {}",
                self.synth.rows
            ));
        }
        Ok(())
    }

    pub fn spec(&self, algorithm: Algorithm, task: Task) -> ModelSpec {
        ModelSpec::new(task, self.models.params(algorithm), self.seed)
    }

    fn out(&self, command: &str) -> PathBuf {
        self.paths.output_dir.join(command)
    }

    fn cleaned_csv(&self) -> PathBuf {
        self.paths
            .cleaned_csv
            .clone()
            .unwrap_or_else(|| self.out("prepare").join("cleaned.csv"))
    }

    fn features_csv(&self) -> PathBuf {
        self.paths
            .features_csv
            .clone()
            .unwrap_or_else(|| self.out("extract").join("features.csv"))
    }

    fn holdout_csv(&self) -> PathBuf {
        self.paths
            .holdout_csv
            .clone()
            .unwrap_or_else(|| self.out("extract").join("holdout.csv"))
    }

    fn model_json(&self) -> PathBuf {
        self.paths.model_json.clone().unwrap_or_else(|| {
            self.out("train")
                .join(format!("model_{}.json", self.explain.algorithm.as_str()))
        })
    }
}

/// Sets `path` (dot-separated) in a JSON object, creating objects on the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("bad --set key {path:?}")));
    }
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Usage(format!(
                "--set {path}: {} is not an object",
                parts[..i].join(".")
            ))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    unreachable!("split yields at least one part")
}

/// Objects merge key by key; anything else replaces.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Builds the effective config. Later sources win: defaults, the config
/// file, `SENTISCOPE_SEED`, then each `--set`.
pub fn load_config(
    path: Option<&Path>,
    sets: &[String],
    env_seed: Option<&str>,
) -> Result<RunConfig> {
    let mut root = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|source| CliError::MissingInput {
            path: p.to_path_buf(),
            source,
        })?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        if !file.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        merge(&mut root, file);
    }
    if let Some(seed) = env_seed {
        let seed: u64 = seed.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "SENTISCOPE_SEED {seed:?} is not an unsigned integer"
            ))
        })?;
        set_path(&mut root, "seed", json!(seed))?;
    }
    for assignment in sets {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--set expects KEY=VALUE, got {assignment:?}"))
        })?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut root, key, value)?;
    }
    let config: RunConfig =
        serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Files written by one command, relative to the output directory.
struct Outputs {
    base: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(config: &RunConfig, command: &str) -> Result<Self> {
        let dir = config.out(command);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs {
            base: config.paths.output_dir.clone(),
            dir,
            files: Vec::new(),
        })
    }

    fn record(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.base).unwrap_or(path);
        self.files.push(rel.to_string_lossy().replace('\\', "/"));
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| failed(format!("writing {}: {e}", path.display())))?;
        self.record(&path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(failed)? + "\n";
        self.write(name, text)
    }

    fn figure(&mut self, spec: FigureSpec) -> Result<()> {
        for path in write_figure(&self.dir, &spec).map_err(failed)? {
            self.record(&path);
        }
        Ok(())
    }

    /// Adds this run under `key` in `manifest.json`, keeping other runs.
    fn finish(mut self, command: &str, key: &str, config: &RunConfig) -> Result<Vec<String>> {
        let path = self.dir.join("manifest.json");
        let mut runs: BTreeMap<String, Value> = std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str::<Value>(&t).ok())
            .and_then(|v| v.get("runs").cloned())
            .and_then(|r| serde_json::from_value(r).ok())
            .unwrap_or_default();
        self.files.sort();
        runs.insert(
            key.to_string(),
            json!({ "files": self.files, "config": config }),
        );
        let manifest = json!({ "command": command, "runs": runs });
        let text = serde_json::to_string_pretty(&manifest).map_err(failed)? + "\n";
        std::fs::write(&path, text)
            .map_err(|e| failed(format!("writing {}: {e}", path.display())))?;
        Ok(self.files)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::MissingInput {
            path: path.to_path_buf(),
            source,
        })
}

fn read_table(path: &Path, text_columns: &[&str]) -> Result<TabularDataset> {
    TabularDataset::read_csv(open(path)?, text_columns)
        .map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn feature_names() -> Vec<String> {
    SentimentLabel::column_names()
}

fn features_and_ratings(ds: &TabularDataset) -> Result<(FeatureMatrix, Vec<f64>)> {
    let x = ds.feature_matrix(&feature_names()).map_err(failed)?;
    let y = ds.dense_numeric(RATING_COLUMN).map_err(failed)?;
    Ok((x, y))
}

fn target_for(task: Task, ratings: &[f64]) -> Result<Target> {
    Ok(match task {
        Task::Regression => Target::Regression(ratings.to_vec()),
        Task::Classification => Target::Classification(to_class_target(ratings).map_err(failed)?),
    })
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("{key} is not set")))
}

fn cmd_prepare(config: &RunConfig) -> Result<Outputs> {
    let input = required(&config.paths.input_csv, "paths.input_csv")?;
    let raw = read_table(input, &[config.columns.text.as_str()])?;
    let raw = if raw.column(&config.columns.rating).is_ok() {
        raw.with_target(Some(config.columns.rating.clone()))
            .map_err(failed)?
    } else {
        raw
    };
    let s = &config.screening;
    let (ds, technical) = drop_technical(&raw, &s.technical_columns);
    let (ds, uniform) = screen_uniform(&ds, s.uniform_threshold);
    let (ds, missing) = screen_missing(&ds, s.missing_threshold);
    let report = technical.then(uniform).then(missing);
    log::info!(
        "kept {} of {} columns ({} rows)",
        report.kept.len(),
        raw.columns().len(),
        ds.row_count()
    );
    let mut out = Outputs::new(config, "prepare")?;
    out.write("cleaned.csv", ds.to_csv_string().map_err(failed)?)?;
    out.json("screening_report.json", &report)?;
    Ok(out)
}

fn cmd_extract(config: &RunConfig) -> Result<Outputs> {
    let lexicon_path = required(&config.paths.lexicon_tsv, "paths.lexicon_tsv")?;
    let lexicon = Lexicon::parse(open(lexicon_path)?)
        .map_err(|e| failed(format!("{}: {e}", lexicon_path.display())))?;
    let cleaned_path = config.cleaned_csv();
    let ds = read_table(&cleaned_path, &[config.columns.text.as_str()])?;
    let texts = ds.string_column(&config.columns.text).map_err(failed)?;
    let ratings = ds.numeric_column(&config.columns.rating).map_err(failed)?;
    let (docs, kept_ratings): (Vec<&str>, Vec<f64>) = texts
        .iter()
        .zip(ratings)
        .filter_map(|(t, r)| Some((t.as_deref()?, (*r)?)))
        .unzip();
    let table = extract_corpus(&docs, &lexicon, config.extract.score_mode);
    let mut columns: Vec<Column> = feature_names()
        .into_iter()
        .zip(table.columns())
        .map(|(name, values)| Column::numeric(name, values.into_iter().map(Some).collect()))
        .collect();
    columns.push(Column::numeric(
        RATING_COLUMN,
        kept_ratings.into_iter().map(Some).collect(),
    ));
    let features = TabularDataset::new(columns, Some(RATING_COLUMN.into())).map_err(failed)?;
    let (train, holdout) =
        split_holdout(&features, config.extract.holdout_size, config.seed).map_err(failed)?;
    log::info!(
        "{} usable of {} rows; {} train, {} hold-out",
        features.row_count(),
        ds.row_count(),
        train.row_count(),
        holdout.row_count()
    );
    let summary = json!({
        "input_rows": ds.row_count(),
        "usable_rows": features.row_count(),
        "empty_documents": table.empty_rows().len(),
        "train_rows": train.row_count(),
        "holdout_rows": holdout.row_count(),
        "lexicon_words": lexicon.word_count(),
        "lexicon_associations": lexicon.association_count(),
        "score_mode": config.extract.score_mode,
    });
    let mut out = Outputs::new(config, "extract")?;
    out.write("features.csv", train.to_csv_string().map_err(failed)?)?;
    out.write("holdout.csv", holdout.to_csv_string().map_err(failed)?)?;
    out.json("extraction_summary.json", &summary)?;
    Ok(out)
}

fn cmd_stats(config: &RunConfig) -> Result<Outputs> {
    let ds = read_table(&config.features_csv(), &[])?;
    let names = feature_names();
    let hists = names
        .iter()
        .map(|n| histogram(&ds, n, config.stats.histogram_bins))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(failed)?;
    let mut with_rating = names.clone();
    with_rating.push(RATING_COLUMN.into());
    let corr = correlation_matrix(&ds, &with_rating).map_err(failed)?;
    let mut out = Outputs::new(config, "stats")?;
    let cols = (hists.len() as f64).sqrt().ceil() as u32;
    out.figure(
        FigureSpec::new(
            "Sentiment score distributions",
            "sentiments",
            FigurePayload::HistogramGrid(hists),
        )
        .with_size(260 * cols, 200 * cols),
    )?;
    out.figure(
        FigureSpec::new(
            "Correlation of sentiments and rating",
            "sentiments",
            FigurePayload::CorrelationHeatmap(corr),
        )
        .with_size(760, 700),
    )?;
    Ok(out)
}

fn cmd_benchmark(config: &RunConfig, task: Task) -> Result<Outputs> {
    let ds = read_table(&config.features_csv(), &[])?;
    let (x, y) = features_and_ratings(&ds)?;
    let target = target_for(task, &y)?;
    let plan = make_plan(
        x.n_rows(),
        config.resampling.folds,
        config.resampling.repeats,
        config.seed,
    )
    .map_err(failed)?;
    let specs: Vec<ModelSpec> = Algorithm::ALL
        .iter()
        .map(|&a| config.spec(a, task))
        .collect();
    let result = run_benchmark(&specs, &x, &target, &plan).map_err(failed)?;
    for a in &result.algorithms {
        log::info!(
            "{} {}: mean {:.4}, sd {:.4}",
            a.algorithm,
            result.metric,
            a.mean,
            a.sd
        );
    }
    let task_name = task.to_string();
    let mut out = Outputs::new(config, "benchmark")?;
    out.json(&format!("benchmark_{task_name}.json"), &result)?;
    out.write(&format!("benchmark_{task_name}.csv"), result.to_csv())?;
    let title = format!("Cross-validated {} ({task_name})", result.metric);
    out.figure(
        FigureSpec::new(title, task_name, FigurePayload::BenchmarkBox(result)).with_size(720, 480),
    )?;
    Ok(out)
}

fn cmd_train(config: &RunConfig, algorithm: Algorithm) -> Result<Outputs> {
    let ds = read_table(&config.features_csv(), &[])?;
    let (x, y) = features_and_ratings(&ds)?;
    let task = config.train.task;
    let model =
        models::fit(&config.spec(algorithm, task), &x, &target_for(task, &y)?).map_err(failed)?;
    let mut out = Outputs::new(config, "train")?;
    out.write(
        &format!("model_{}.json", algorithm.as_str()),
        model.to_json().map_err(failed)? + "\n",
    )?;
    Ok(out)
}

/// Hold-out rows per requested rating, first in document order.
fn select_instances(config: &RunConfig, ratings: &[f64]) -> Result<Vec<(String, Vec<usize>)>> {
    let mut groups = Vec::new();
    for (key, &count) in &config.explain.selection {
        if count == 0 {
            continue;
        }
        let rating: f64 = key
            .parse()
            .map_err(|_| CliError::Config(format!("selection key {key:?} is not a rating")))?;
        let rows: Vec<usize> = (0..ratings.len())
            .filter(|&i| ratings[i] == rating)
            .take(count)
            .collect();
        if rows.len() < count {
            return Err(failed(format!(
                "requested {count} hold-out rows with rating {key}, found only {}",
                rows.len()
            )));
        }
        groups.push((key.clone(), rows));
    }
    Ok(groups)
}

fn instance_id(row: usize) -> String {
    format!("holdout_{row}")
}

fn global_importance(
    config: &RunConfig,
    ex: &Explainer<'_, TrainedModel>,
    x: &FeatureMatrix,
    y: &[f64],
) -> Result<ImportanceReport> {
    let e = &config.explain;
    permutation_importance(ex, x, y, e.loss, e.permutations, config.seed).map_err(failed)
}

fn cmd_explain(config: &RunConfig, mode: ExplainMode) -> Result<Outputs> {
    let model_path = config.model_json();
    let model_text =
        std::fs::read_to_string(&model_path).map_err(|source| CliError::MissingInput {
            path: model_path.clone(),
            source,
        })?;
    let model = TrainedModel::from_json(&model_text).map_err(failed)?;
    if model.task() != Task::Regression {
        return Err(failed("explanations need a regression model"));
    }
    let (x, y) = features_and_ratings(&read_table(&config.features_csv(), &[])?)?;
    let ex = make_explainer(&model, x.clone()).map_err(failed)?;
    let e = &config.explain;
    let mut out = Outputs::new(config, "explain")?;
    if mode == ExplainMode::Importance {
        let report = global_importance(config, &ex, &x, &y)?;
        out.json("importance.json", &report)?;
        out.write("importance.csv", report.to_csv())?;
        out.figure(
            FigureSpec::new(
                "Permutation feature importance",
                "global",
                FigurePayload::ImportanceBar(report),
            )
            .with_size(720, 480),
        )?;
        return Ok(out);
    }
    let (hx, hy) = features_and_ratings(&read_table(&config.holdout_csv(), &[])?)?;
    let groups = select_instances(config, &hy)?;
    match mode {
        ExplainMode::Breakdown => {
            let mut instances = Vec::new();
            let mut averages = Vec::new();
            for (rating, rows) in &groups {
                let reports = rows
                    .iter()
                    .map(|&i| breakdown(&ex, &instance_id(i), hx.row(i), e.distribution_cap))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(failed)?;
                let avg = average_breakdowns(
                    &reports,
                    &format!("rating_{rating}_mean"),
                    e.distribution_cap,
                )
                .map_err(failed)?;
                instances.extend(reports);
                averages.push(avg);
            }
            out.json(
                "breakdown.json",
                &json!({ "instances": instances, "averages": averages }),
            )?;
            let mut all = instances.clone();
            all.extend(averages.iter().cloned());
            out.write("breakdown.csv", breakdowns_to_csv(&all))?;
            for r in all {
                let slug = r.instance_id.clone();
                out.figure(
                    FigureSpec::new(
                        format!("Break-down for {slug}"),
                        slug.clone(),
                        FigurePayload::BreakdownWaterfall(r.clone()),
                    )
                    .with_size(760, 520),
                )?;
                out.figure(
                    FigureSpec::new(
                        format!("Prediction distributions for {slug}"),
                        slug,
                        FigurePayload::BreakdownViolin(r),
                    )
                    .with_size(760, 620),
                )?;
            }
        }
        ExplainMode::Whatif => {
            let top = global_importance(config, &ex, &x, &y)?.top(e.whatif_features);
            let mut group_docs = Vec::new();
            let mut csv_profiles = Vec::new();
            for (rating, rows) in &groups {
                let members: Vec<(String, Vec<f64>)> = rows
                    .iter()
                    .map(|&i| (instance_id(i), hx.row(i).to_vec()))
                    .collect();
                let mut per_instance = Vec::new();
                let mut averaged = Vec::new();
                for feature in &top {
                    let profiles =
                        group_profiles(&ex, &members, feature, e.grid_size).map_err(failed)?;
                    averaged.push(
                        average_profiles(&profiles, &format!("rating_{rating}_mean"))
                            .map_err(failed)?,
                    );
                    per_instance.extend(profiles);
                }
                csv_profiles.extend(per_instance.iter().cloned());
                csv_profiles.extend(averaged.iter().cloned());
                let mut drawn = averaged.clone();
                drawn.extend(per_instance.iter().cloned());
                out.figure(
                    FigureSpec::new(
                        format!("What-if profiles, rating {rating}"),
                        format!("rating_{rating}"),
                        FigurePayload::CpProfile(drawn),
                    )
                    .with_size(900, 700),
                )?;
                group_docs.push(
                    json!({ "rating": rating, "instances": per_instance, "averages": averaged }),
                );
            }
            out.json(
                "whatif.json",
                &json!({ "features": top, "groups": group_docs }),
            )?;
            out.write("whatif.csv", profiles_to_csv(&csv_profiles))?;
        }
        ExplainMode::Importance => unreachable!("handled above"),
    }
    Ok(out)
}

fn cmd_synth(config: &RunConfig, rows: usize) -> Result<Outputs> {
    if rows < 10 {
        return Err(CliError::Usage(format!(
            "--rows must be at least 10, got {rows}"
        )));
    }
    let ds = generate_synthetic_reviews(rows, config.seed).map_err(failed)?;
    let mut out = Outputs::new(config, "synth")?;
    out.write("features.csv", ds.to_csv_string().map_err(failed)?)?;
    Ok(out)
}

/// Runs one parsed command; returns the files it wrote.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<Vec<String>> {
    let args = cli.command.config_args();
    let config = load_config(args.config.as_deref(), &args.set, env_seed)?;
    let name = cli.command.name();
    let (out, key) = match &cli.command {
        Command::Prepare(_) => (cmd_prepare(&config)?, name.to_string()),
        Command::Extract(_) => (cmd_extract(&config)?, name.to_string()),
        Command::Stats(_) => (cmd_stats(&config)?, name.to_string()),
        Command::Benchmark { task, .. } => (cmd_benchmark(&config, *task)?, task.to_string()),
        Command::Train { algorithm, .. } => (
            cmd_train(&config, *algorithm)?,
            algorithm.as_str().to_string(),
        ),
        Command::Explain { mode, .. } => (cmd_explain(&config, *mode)?, mode.as_str().to_string()),
        Command::Synth { rows, .. } => {
            let rows = rows.unwrap_or(config.synth.rows);
            (cmd_synth(&config, rows)?, name.to_string())
        }
    };
    out.finish(name, &key, &config)
}

/// Entry point behind `main`: parses arguments, runs, maps errors to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .try_init();
    let env_seed = std::env::var("SENTISCOPE_SEED").ok();
    match execute(&cli, env_seed.as_deref()) {
        Ok(files) => {
            println!("{}: wrote {} files", cli.command.name(), files.len() + 1);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_complete_and_valid() {
        let c = load_config(None, &[], None).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.extract.holdout_size, 100);
        assert_eq!(c.explain.selection.get("1"), Some(&5));
        assert_eq!((c.resampling.folds, c.resampling.repeats), (5, 5));
    }

    #[test]
    fn seed_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 3}"#).unwrap();
        assert_eq!(load_config(Some(&path), &[], None).unwrap().seed, 3);
        assert_eq!(load_config(Some(&path), &[], Some("9")).unwrap().seed, 9);
        assert_eq!(
            load_config(Some(&path), &["seed=11".into()], Some("9"))
                .unwrap()
                .seed,
            11
        );
        assert!(matches!(
            load_config(None, &[], Some("x")),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn set_overrides_nested_leaves() {
        let sets = vec![
            "explain.selection.1=3".to_string(),
            "models.random_forest.tree_count=7".into(),
            "paths.input_csv=data/raw.csv".into(),
        ];
        let c = load_config(None, &sets, None).unwrap();
        assert_eq!(c.explain.selection.get("1"), Some(&3));
        assert_eq!(c.explain.selection.get("5"), Some(&5));
        assert_eq!(c.models.random_forest.tree_count, 7);
        assert_eq!(c.paths.input_csv, Some(PathBuf::from("data/raw.csv")));
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for set in [
            "extract.holdout_size=0",
            "screening.missing_threshold=1.5",
            "seed=\"abc\"",
            "resampling.folds=1",
            "nonsense=1",
            "explain.selection.one=2",
            "models.knn.k=0",
        ] {
            let err = load_config(None, &[set.to_string()], None).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{set}: {err}");
        }
        assert!(matches!(
            load_config(None, &["novalue".into()], None),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn instance_selection_is_first_in_document_order() {
        let c = RunConfig::default();
        let ratings = [5.0, 1.0, 5.0, 1.0, 1.0, 5.0, 1.0, 1.0, 5.0, 5.0, 1.0, 5.0];
        let groups = select_instances(&c, &ratings).unwrap();
        assert_eq!(groups[0], ("1".to_string(), vec![1, 3, 4, 6, 7]));
        assert_eq!(groups[1], ("5".to_string(), vec![0, 2, 5, 8, 9]));
        let err = select_instances(&c, &[1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0, 5.0]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("found only 3"), "{err}");
    }
}
