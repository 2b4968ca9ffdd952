//! The `sfnn` command-line front end.
//!
//! Every command writes only into the output directory (`--output-dir`, or
//! `SFNN_OUTPUT_DIR`, default `sfnn-out`) and leaves a
//! `<command>.manifest.json` there listing the resolved configuration, the
//! input's SHA-256 and the SHA-256 of every file it produced.
//!
//! Settings resolve as flag, then `--config` TOML file, then built-in default.
//!
//! Exit codes: 0 success, 1 failed verification or other error, 2 data or
//! argument error, 3 training divergence.

pub mod verify;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_csv, zscore_fit_transform, DataError, NormalizedDataset, SplitSpec};
use crate::diagnostics::{diagnose, DiagnosticsError};
use crate::model::{save_checkpoint, ModelError, SfnnConfig};
use crate::protocol::{
    aggregate_table, builtin_grid, builtin_split, fit_n_linears, lookback_curve_csv, run_trials,
    selected_cells, CellResult, GridSpec, ModelTemplate, NLinearsOptions, ProtocolError,
    SelectionMode, SeriesLookbacks, TrialOptions,
};
use crate::training::{train, TrainConfig, TrainingError};
use verify::{run_suite, Suite};

pub const OUTPUT_DIR_ENV: &str = "SFNN_OUTPUT_DIR";
pub const NLINEARS_LABEL: &str = "N-linears";

#[derive(Debug, Parser)]
#[command(name = "sfnn", version, about = "Simple feedforward forecasters: diagnostics, training and benchmarking")]
pub struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, default_value = "sfnn-out")]
    pub output_dir: PathBuf,
    /// TOML file of default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trend strength, scale difference, Johansen curve and module advice.
    Diagnose(DiagnoseArgs),
    /// Train one configuration and save its checkpoint and report.
    Train(TrainArgs),
    /// Multi-seed look-back sweep with peek/fair selection and summary tables.
    Benchmark(BenchmarkArgs),
    /// Run a built-in check suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub csv: PathBuf,
    #[arg(long)]
    pub lookback: Option<usize>,
    /// Comma-separated Johansen lags.
    #[arg(long, value_delimiter = ',')]
    pub lags: Option<Vec<usize>>,
    /// Train:val:test ratio such as `7:1:2`.
    #[arg(long)]
    pub split: Option<String>,
    /// Dataset label; a built-in name also selects its split.
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ModelFlags {
    /// Optional modules: any of `center`, `mix`, `ln`, `ln-affine`, or `none`.
    #[arg(long, value_delimiter = ',')]
    pub modules: Option<Vec<String>>,
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub num_blocks: Option<usize>,
    #[arg(long)]
    pub num_mixing_blocks: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub csv: PathBuf,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Peek,
    Fair,
    Both,
}

impl ModeChoice {
    fn modes(self) -> Vec<SelectionMode> {
        match self {
            ModeChoice::Peek => vec![SelectionMode::Peek],
            ModeChoice::Fair => vec![SelectionMode::Fair],
            ModeChoice::Both => vec![SelectionMode::Peek, SelectionMode::Fair],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Nlinears,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    pub csv: PathBuf,
    /// Built-in dataset name supplying grid, horizons and split.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    /// Comma-separated look-backs.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Worker threads; 0 means all logical cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub split: Option<String>,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
}

/// Keys accepted in the `--config` file. All are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<String>,
    pub lookback: Option<usize>,
    pub horizon: Option<usize>,
    pub lags: Option<Vec<usize>>,
    pub split: Option<String>,
    pub seed: Option<u64>,
    pub modules: Option<Vec<String>>,
    pub hidden_width: Option<usize>,
    pub num_blocks: Option<usize>,
    pub num_mixing_blocks: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub horizons: Option<Vec<usize>>,
    pub grid: Option<Vec<usize>>,
    pub seeds: Option<usize>,
    pub mode: Option<ModeChoice>,
    pub baseline: Option<Baseline>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// SHA-256 of the canonical JSON of `config`; equal hashes mean equal reruns.
    pub config_hash: String,
    pub dataset_path: Option<String>,
    pub dataset_sha256: Option<String>,
    pub tool_version: String,
    pub timestamp: String,
    /// Output file name to its SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug)]
pub enum CliError {
    Data(String),
    Divergence(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Data(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(m) | CliError::Divergence(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => CliError::Data(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::NonFiniteLoss { .. } => CliError::Divergence(e.to_string()),
            TrainingError::TooShort(_) | TrainingError::InvalidConfig(_) | TrainingError::ShapeMismatch { .. } => {
                CliError::Data(e.to_string())
            }
            TrainingError::Model(m) => m.into(),
            TrainingError::Ledger(_) => CliError::Failed(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Data(d) => d.into(),
            ProtocolError::Training(t) => t.into(),
            ProtocolError::UnknownDataset { .. } | ProtocolError::InvalidInput(_) | ProtocolError::Parse(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::TooShort { .. } | DiagnosticsError::SingleSeries => CliError::Data(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

/// Output directory guard: files are addressed by bare name only.
pub struct OutputDir {
    root: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Failed(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: BTreeMap::new(),
        })
    }

    /// Path of `name` inside the directory; rejects anything but a plain file name.
    pub fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        let mut comps = Path::new(name).components();
        match (comps.next(), comps.next()) {
            (Some(Component::Normal(_)), None) => Ok(self.root.join(name)),
            _ => Err(CliError::Failed(format!("refusing to write '{name}' outside the output directory"))),
        }
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(name)?;
        fs::write(&path, contents.as_ref()).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        self.record(name)
    }

    /// Records the hash of a file written by other means.
    pub fn record(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name)?;
        let hash = file_sha256(&path)?;
        self.written.insert(name.to_owned(), hash);
        Ok(())
    }

    fn finish(mut self, command: &str, config: &impl Serialize, dataset: Option<&Path>) -> Result<(), CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Failed(e.to_string()))?;
        let canonical = serde_json::to_string(&config).map_err(|e| CliError::Failed(e.to_string()))?;
        let manifest = RunManifest {
            command: command.to_owned(),
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            config,
            dataset_path: dataset.map(|p| p.display().to_string()),
            dataset_sha256: dataset.map(file_sha256).transpose()?,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs: std::mem::take(&mut self.written),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Failed(e.to_string()))?;
        let path = self.path(&format!("{command}.manifest.json"))?;
        fs::write(&path, text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
    }
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn to_json(value: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))
}

fn dataset_label(explicit: Option<&String>, csv: &Path) -> String {
    explicit.cloned().unwrap_or_else(|| {
        csv.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    })
}

/// Explicit ratio, else the built-in dataset's split, else 7:1:2.
fn resolve_split(flag: Option<&String>, dataset: Option<&String>) -> Result<SplitSpec, CliError> {
    if let Some(r) = flag {
        return Ok(SplitSpec::from_ratio(r)?);
    }
    Ok(match dataset.map(|d| builtin_split(d)) {
        Some(Ok(s)) => s,
        _ => SplitSpec::standard(),
    })
}

fn load_dataset(csv: &Path, split: &SplitSpec) -> Result<NormalizedDataset, CliError> {
    Ok(zscore_fit_transform(&load_csv(csv)?, split)?)
}

#[derive(Debug, Clone, Serialize)]
struct ResolvedModel {
    template: ModelTemplate,
    num_mixing_blocks: usize,
    train: TrainConfig,
}

fn parse_modules(list: &[String], template: &mut ModelTemplate) -> Result<(), CliError> {
    for m in list {
        match m.trim().to_ascii_lowercase().as_str() {
            "center" | "centering" | "mean_centering" => template.use_mean_centering = true,
            "mix" | "mixing" | "series_mixing" => template.use_series_mixing = true,
            "ln" | "layer_norm" => template.use_layer_norm = true,
            "ln-affine" => {
                template.use_layer_norm = true;
                template.layer_norm_affine = true;
            }
            "none" | "plain" | "" => {}
            other => return Err(CliError::Data(format!("unknown module '{other}' (expected center, mix, ln, ln-affine)"))),
        }
    }
    Ok(())
}

fn resolve_model(flags: &ModelFlags, file: &FileConfig, seed: u64) -> Result<ResolvedModel, CliError> {
    let defaults = ModelTemplate::default();
    let mut template = ModelTemplate {
        hidden_width: flags.hidden_width.or(file.hidden_width),
        num_blocks: flags.num_blocks.or(file.num_blocks).unwrap_or(defaults.num_blocks),
        num_mixing_blocks: flags.num_mixing_blocks.or(file.num_mixing_blocks).unwrap_or(defaults.num_mixing_blocks),
        ..defaults
    };
    if let Some(list) = flags.modules.as_ref().or(file.modules.as_ref()) {
        parse_modules(list, &mut template)?;
    }
    let d = TrainConfig::default();
    let max_epochs = flags.max_epochs.or(file.max_epochs).unwrap_or(d.max_epochs);
    let train = TrainConfig {
        learning_rate: flags.learning_rate.or(file.learning_rate).unwrap_or(d.learning_rate),
        batch_size: flags.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        max_epochs,
        // An unset patience never exceeds an explicitly shortened run.
        patience: flags.patience.or(file.patience).unwrap_or(d.patience.min(max_epochs)),
        seed,
        ..d
    };
    train.validate()?;
    Ok(ResolvedModel {
        num_mixing_blocks: template.num_mixing_blocks,
        template,
        train,
    })
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors are reported on stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Diagnose(a) => cmd_diagnose(a, &file, &cli.output_dir),
        Command::Train(a) => cmd_train(a, &file, &cli.output_dir),
        Command::Benchmark(a) => cmd_benchmark(a, &file, &cli.output_dir),
        Command::Verify(a) => cmd_verify(a, &cli.output_dir),
    }
}

#[derive(Debug, Serialize)]
struct DiagnoseConfig {
    dataset: String,
    lookback: usize,
    lags: Vec<usize>,
    split: SplitSpec,
}

pub fn cmd_diagnose(args: &DiagnoseArgs, file: &FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let name_flag = args.dataset.as_ref().or(file.dataset.as_ref());
    let split = resolve_split(args.split.as_ref().or(file.split.as_ref()), name_flag)?;
    let config = DiagnoseConfig {
        dataset: dataset_label(name_flag, &args.csv),
        lookback: args.lookback.or(file.lookback).unwrap_or(96),
        lags: args.lags.clone().or_else(|| file.lags.clone()).unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32, 64]),
        split,
    };
    let ds = load_dataset(&args.csv, &config.split)?;
    let report = diagnose(&config.dataset, &ds.train(), config.lookback, &config.lags)?;

    let mut out = OutputDir::create(out_dir)?;
    out.write("diagnostics.json", to_json(&report)?)?;
    out.write("diagnostics.txt", report.to_text())?;
    out.write("johansen_curve.csv", report.johansen_csv())?;
    out.finish("diagnose", &config, Some(&args.csv))?;
    println!("{}", report.to_text());
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainRunConfig {
    dataset: String,
    split: SplitSpec,
    model: SfnnConfig,
    train: TrainConfig,
}

pub fn cmd_train(args: &TrainArgs, file: &FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let name_flag = args.dataset.as_ref().or(file.dataset.as_ref());
    let split = resolve_split(args.split.as_ref().or(file.split.as_ref()), name_flag)?;
    let lookback = args.lookback.or(file.lookback).unwrap_or(96);
    let horizon = args.horizon.or(file.horizon).unwrap_or(96);
    let resolved = resolve_model(&args.model, file, args.seed.or(file.seed).unwrap_or(0))?;
    let ds = load_dataset(&args.csv, &split)?;
    let config = TrainRunConfig {
        dataset: dataset_label(name_flag, &args.csv),
        split,
        model: resolved.template.instantiate(lookback, horizon, ds.n_series()),
        train: resolved.train,
    };
    let (params, report) = train(&ds, &config.model, &config.train)?;

    let mut out = OutputDir::create(out_dir)?;
    let ckpt = out.path("checkpoint.sfnn")?;
    save_checkpoint(&ckpt, &config.model, &params)?;
    out.record("checkpoint.sfnn")?;
    out.record("checkpoint.sfnn.meta.txt")?;
    out.write("train_report.json", to_json(&report)?)?;
    out.finish("train", &config, Some(&args.csv))?;
    println!(
        "{} {}: best val MSE {:.6} (epoch {}), test MSE {:.6}, {} epochs",
        config.dataset,
        config.model.modules_tag(),
        report.best_val_mse,
        report.best_epoch,
        report.test_mse,
        report.epochs_run
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct BenchmarkConfig {
    dataset: String,
    split: SplitSpec,
    grid: GridSpec,
    modes: Vec<SelectionMode>,
    baseline: Option<Baseline>,
    workers: usize,
    model: ResolvedModel,
}

fn nlinears_cells(ds: &NormalizedDataset, grid: &GridSpec, modes: &[SelectionMode]) -> Vec<CellResult> {
    let mut cells = Vec::new();
    for &h in &grid.horizons {
        let lookbacks = SeriesLookbacks::Tune(grid.lookbacks.clone());
        match fit_n_linears(ds, &lookbacks, h, &NLinearsOptions::default()) {
            Ok(r) => {
                for &mode in modes {
                    cells.push(CellResult {
                        model: NLINEARS_LABEL.into(),
                        dataset: grid.dataset_name.clone(),
                        horizon: h,
                        mean: r.test_mse,
                        std: 0.0,
                        n: 1,
                        lookback: None,
                        mode: Some(mode),
                        published_best: None,
                        published_significant: None,
                    });
                }
            }
            Err(e) => log::warn!("{NLINEARS_LABEL} at H={h} failed: {e}"),
        }
    }
    cells
}

pub fn cmd_benchmark(args: &BenchmarkArgs, file: &FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let name_flag = args.dataset.as_ref().or(file.dataset.as_ref());
    let split = resolve_split(args.split.as_ref().or(file.split.as_ref()), name_flag)?;
    let builtin = name_flag.map(|n| builtin_grid(n)).transpose()?;
    let dataset = builtin
        .as_ref()
        .map(|g| g.dataset_name.clone())
        .unwrap_or_else(|| dataset_label(None, &args.csv));
    let pick = |flag: &Option<Vec<usize>>, fc: &Option<Vec<usize>>, dflt: Option<&Vec<usize>>, what: &str| {
        flag.clone()
            .or_else(|| fc.clone())
            .or_else(|| dflt.cloned())
            .ok_or_else(|| CliError::Data(format!("--{what} is required unless --dataset names a built-in dataset")))
    };
    let grid = GridSpec {
        dataset_name: dataset.clone(),
        period: builtin.as_ref().map_or(0, |g| g.period),
        lookbacks: pick(&args.grid, &file.grid, builtin.as_ref().map(|g| &g.lookbacks), "grid")?,
        horizons: pick(&args.horizons, &file.horizons, builtin.as_ref().map(|g| &g.horizons), "horizons")?,
        n_seeds: args.seeds.or(file.seeds).unwrap_or(10),
    };
    grid.validate()?;
    let mode = args.mode.or(file.mode).unwrap_or(ModeChoice::Both);
    let config = BenchmarkConfig {
        dataset,
        split,
        modes: mode.modes(),
        baseline: args.baseline.or(file.baseline),
        workers: args.workers.or(file.workers).unwrap_or(0),
        model: resolve_model(&args.model, file, 0)?,
        grid,
    };
    let ds = load_dataset(&args.csv, &config.split)?;

    let mut out = OutputDir::create(out_dir)?;
    let ledger = out.path("ledger.jsonl")?;
    let trials = run_trials(
        &ds,
        &config.grid,
        &config.model.template,
        &config.model.train,
        &TrialOptions {
            ledger: Some(&ledger),
            workers: config.workers,
        },
    )?;
    out.record("ledger.jsonl")?;
    let failed = trials.iter().filter(|t| !t.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} trials failed; see ledger.jsonl", trials.len());
    }
    out.write("lookback_curve.csv", lookback_curve_csv(&trials))?;

    let baseline = match config.baseline {
        Some(Baseline::Nlinears) => nlinears_cells(&ds, &config.grid, &config.modes),
        None => Vec::new(),
    };
    let reference = config.model.template.label();
    let mut completed = 0;
    for &mode in &config.modes {
        let mut cells = match selected_cells(&trials, mode) {
            Ok(c) => c,
            Err(ProtocolError::NoTrials) => continue,
            Err(e) => return Err(e.into()),
        };
        completed += cells.len();
        cells.extend(baseline.iter().filter(|c| c.mode == Some(mode)).cloned());
        let summary = aggregate_table(&cells, &reference)?;
        out.write(&format!("summary_{mode}.md"), summary.to_markdown())?;
        out.write(&format!("summary_{mode}.csv"), summary.to_csv())?;
        out.write(&format!("cells_{mode}.json"), to_json(&cells)?)?;
        println!("## {} ({mode} selection)\n\n{}", config.dataset, summary.to_markdown());
    }
    out.finish("benchmark", &config, Some(&args.csv))?;
    if completed == 0 {
        let divergent = trials.iter().any(|t| t.error.as_deref().is_some_and(|e| e.contains("non-finite")));
        let msg = format!("no benchmark cell completed ({failed} failed trials)");
        return Err(if divergent { CliError::Divergence(msg) } else { CliError::Failed(msg) });
    }
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs, out_dir: &Path) -> Result<(), CliError> {
    let checks = run_suite(args.suite);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let suite = args.suite.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
    let mut out = OutputDir::create(out_dir)?;
    out.write(&format!("verify_{suite}.json"), to_json(&checks)?)?;
    out.finish(&format!("verify_{suite}"), &args.suite, None)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
