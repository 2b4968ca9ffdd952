//! Multi-seed training sweeps with a resumable JSON-lines ledger.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::{GridSpec, ProtocolError};
use crate::data::NormalizedDataset;
use crate::model::SfnnConfig;
use crate::training::{train, TrainConfig};

/// Architecture settings shared by every trial of a sweep; look-back,
/// horizon and series count are filled in per trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelTemplate {
    /// Fixed hidden width; `None` applies the `max(512, 2L)` rule per look-back.
    pub hidden_width: Option<usize>,
    pub num_blocks: usize,
    pub use_mean_centering: bool,
    pub use_series_mixing: bool,
    pub num_mixing_blocks: usize,
    pub use_layer_norm: bool,
    pub layer_norm_affine: bool,
}

impl Default for ModelTemplate {
    fn default() -> Self {
        Self {
            hidden_width: None,
            num_blocks: 2,
            use_mean_centering: false,
            use_series_mixing: false,
            num_mixing_blocks: 1,
            use_layer_norm: false,
            layer_norm_affine: false,
        }
    }
}

impl ModelTemplate {
    pub fn instantiate(&self, lookback: usize, horizon: usize, n_series: usize) -> SfnnConfig {
        SfnnConfig {
            lookback,
            horizon,
            hidden_width: self
                .hidden_width
                .unwrap_or_else(|| SfnnConfig::default_width(lookback)),
            num_blocks: self.num_blocks,
            n_series,
            use_mean_centering: self.use_mean_centering,
            use_series_mixing: self.use_series_mixing,
            num_mixing_blocks: self.num_mixing_blocks,
            use_layer_norm: self.use_layer_norm,
            layer_norm_affine: self.layer_norm_affine,
        }
    }

    /// Model label used in ledgers and tables, e.g. `SFNN[center+ln]` or
    /// `SFNN[plain;W=64;B=1]` when width or depth differ from the defaults.
    pub fn label(&self) -> String {
        let mut s = format!("SFNN[{}", self.instantiate(1, 1, 1).modules_tag());
        if let Some(w) = self.hidden_width {
            s.push_str(&format!(";W={w}"));
        }
        if self.num_blocks != 2 {
            s.push_str(&format!(";B={}", self.num_blocks));
        }
        s.push(']');
        s
    }
}

/// One training run. Failed runs carry `error` and no metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub dataset: String,
    pub model: String,
    pub lookback: usize,
    pub horizon: usize,
    pub seed: u64,
    pub val_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub epochs_run: Option<usize>,
    pub wall_time: f64,
    pub config: SfnnConfig,
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.val_mse.is_some() && self.test_mse.is_some()
    }

    fn key(&self) -> (String, String, usize, usize, u64) {
        (self.dataset.clone(), self.model.clone(), self.horizon, self.lookback, self.seed)
    }

    /// Copy with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

/// Sweep execution settings.
#[derive(Debug, Clone, Default)]
pub struct TrialOptions<'a> {
    /// Ledger to resume from and append to.
    pub ledger: Option<&'a Path>,
    /// Worker threads; 0 means the number of logical cores.
    pub workers: usize,
}

pub fn read_ledger(path: &Path) -> Result<Vec<TrialResult>, ProtocolError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(path).map_err(|e| ProtocolError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ProtocolError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from an interrupted writer is dropped; that trial reruns.
        match serde_json::from_str(&line) {
            Ok(t) => out.push(t),
            Err(e) => log::warn!("{}:{}: skipping unreadable ledger line: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Rewrites the ledger with one line per trial in canonical order
/// (dataset, model, horizon, lookback, seed).
pub fn write_ledger(path: &Path, trials: &[TrialResult]) -> Result<(), ProtocolError> {
    let mut sorted: Vec<&TrialResult> = trials.iter().collect();
    sorted.sort_by_key(|t| t.key());
    sorted.dedup_by_key(|t| t.key());
    let mut text = String::new();
    for t in sorted {
        text.push_str(&serde_json::to_string(t).map_err(|e| ProtocolError::Parse(e.to_string()))?);
        text.push('\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, text).map_err(|e| ProtocolError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| ProtocolError::io(path, e))
}

fn run_one(
    dataset: &NormalizedDataset,
    name: &str,
    template: &ModelTemplate,
    train_config: &TrainConfig,
    (horizon, lookback, seed): (usize, usize, u64),
) -> TrialResult {
    let config = template.instantiate(lookback, horizon, dataset.n_series());
    let tc = TrainConfig {
        seed,
        ..train_config.clone()
    };
    let mut result = TrialResult {
        dataset: name.to_owned(),
        model: template.label(),
        lookback,
        horizon,
        seed,
        val_mse: None,
        test_mse: None,
        epochs_run: None,
        wall_time: 0.0,
        config: config.clone(),
        train: tc.clone(),
        error: None,
    };
    let started = std::time::Instant::now();
    match train(dataset, &config, &tc) {
        Ok((_, report)) => {
            result.val_mse = Some(report.best_val_mse);
            result.test_mse = Some(report.test_mse).filter(|v| v.is_finite());
            result.epochs_run = Some(report.epochs_run);
            if result.test_mse.is_none() {
                result.error = Some("test segment produced no windows".into());
            }
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result.wall_time = started.elapsed().as_secs_f64();
    result
}

/// Trains `n_seeds` models (seeds `0..n_seeds`) for every (look-back, horizon)
/// of `grid`, skipping those already in the ledger, and returns the full set
/// for this model in canonical order. Failures are recorded, not raised.
pub fn run_trials(
    dataset: &NormalizedDataset,
    grid: &GridSpec,
    template: &ModelTemplate,
    train_config: &TrainConfig,
    options: &TrialOptions<'_>,
) -> Result<Vec<TrialResult>, ProtocolError> {
    grid.validate()?;
    let label = template.label();
    let mut all = match options.ledger {
        Some(p) => read_ledger(p)?,
        None => Vec::new(),
    };
    let done: BTreeSet<_> = all.iter().map(TrialResult::key).collect();
    let mut jobs = Vec::new();
    for &h in &grid.horizons {
        for &l in &grid.lookbacks {
            for seed in 0..grid.n_seeds as u64 {
                if !done.contains(&(grid.dataset_name.clone(), label.clone(), h, l, seed)) {
                    jobs.push((h, l, seed));
                }
            }
        }
    }

    let workers = match options.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut appender = match options.ledger {
        Some(p) => Some(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| ProtocolError::io(p, e))?,
        ),
        None => None,
    };
    let mut fresh = Vec::with_capacity(jobs.len());
    std::thread::scope(|scope| -> Result<(), ProtocolError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, jobs) = (&next, &jobs);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&job) = jobs.get(i) else { break };
                let r = run_one(dataset, &grid.dataset_name, template, train_config, job);
                if tx.send(r).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for r in rx {
            match &r.error {
                Some(e) => log::warn!("trial L={} H={} seed={} failed: {e}", r.lookback, r.horizon, r.seed),
                None => log::info!(
                    "trial L={} H={} seed={}: val {:.5} test {:.5}",
                    r.lookback,
                    r.horizon,
                    r.seed,
                    r.val_mse.unwrap_or(f64::NAN),
                    r.test_mse.unwrap_or(f64::NAN)
                ),
            }
            if let (Some(f), Some(p)) = (appender.as_mut(), options.ledger) {
                let line = serde_json::to_string(&r).map_err(|e| ProtocolError::Parse(e.to_string()))?;
                writeln!(f, "{line}").map_err(|e| ProtocolError::io(p, e))?;
            }
            fresh.push(r);
        }
        Ok(())
    })?;
    drop(appender);

    all.extend(fresh);
    if let Some(p) = options.ledger {
        write_ledger(p, &all)?;
    }
    let wanted: BTreeSet<usize> = grid.horizons.iter().copied().collect();
    let lbs: BTreeSet<usize> = grid.lookbacks.iter().copied().collect();
    let mut mine: Vec<TrialResult> = all
        .into_iter()
        .filter(|t| {
            t.model == label
                && t.dataset == grid.dataset_name
                && wanted.contains(&t.horizon)
                && lbs.contains(&t.lookback)
                && t.seed < grid.n_seeds as u64
        })
        .collect();
    mine.sort_by_key(|t| t.key());
    mine.dedup_by_key(|t| t.key());
    Ok(mine)
}
