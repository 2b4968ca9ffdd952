use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ProtocolError, TrialResult};

/// How the look-back is chosen: by test MSE (`peek`) or validation MSE (`fair`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Peek,
    Fair,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::Peek => "peek",
            SelectionMode::Fair => "fair",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "peek" => Ok(SelectionMode::Peek),
            "fair" => Ok(SelectionMode::Fair),
            other => Err(ProtocolError::InvalidInput(format!(
                "unknown selection mode '{other}' (expected peek or fair)"
            ))),
        }
    }
}

/// Seed statistics of one (look-back, horizon) cell. Spreads are sample
/// standard deviations (`n − 1` denominator), zero for a single seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookbackStats {
    pub lookback: usize,
    pub horizon: usize,
    pub n: usize,
    pub mean_val: f64,
    pub std_val: f64,
    pub mean_test: f64,
    pub std_test: f64,
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups successful trials by (horizon, look-back), both ascending.
pub fn summarize_trials(trials: &[TrialResult]) -> Vec<LookbackStats> {
    let mut groups: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.is_ok()) {
        let e = groups.entry((t.horizon, t.lookback)).or_default();
        e.0.push(t.val_mse.unwrap());
        e.1.push(t.test_mse.unwrap());
    }
    groups
        .into_iter()
        .map(|((horizon, lookback), (val, test))| {
            let (mean_val, std_val) = mean_std(&val);
            let (mean_test, std_test) = mean_std(&test);
            LookbackStats {
                lookback,
                horizon,
                n: val.len(),
                mean_val,
                std_val,
                mean_test,
                std_test,
            }
        })
        .collect()
}

/// Chosen look-back for every horizon that has at least one successful trial.
/// Ties go to the smaller look-back.
pub fn select_lookback(
    trials: &[TrialResult],
    mode: SelectionMode,
) -> Result<BTreeMap<usize, LookbackStats>, ProtocolError> {
    let mut best: BTreeMap<usize, LookbackStats> = BTreeMap::new();
    for s in summarize_trials(trials) {
        let score = |s: &LookbackStats| match mode {
            SelectionMode::Peek => s.mean_test,
            SelectionMode::Fair => s.mean_val,
        };
        match best.get(&s.horizon) {
            Some(b) if score(b) <= score(&s) => {}
            _ => {
                best.insert(s.horizon, s);
            }
        }
    }
    if best.is_empty() {
        return Err(ProtocolError::NoTrials);
    }
    Ok(best)
}
