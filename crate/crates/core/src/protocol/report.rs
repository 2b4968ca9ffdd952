use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{select_lookback, summarize_trials, CellResult, ProtocolError, SelectionMode, TrialResult};

/// Mean and spread per (model, horizon, look-back), for look-back curves.
pub fn lookback_curve_csv(trials: &[TrialResult]) -> String {
    let mut out = String::from("dataset,model,horizon,lookback,n,mean_test_mse,std_test_mse,mean_val_mse,std_val_mse\n");
    for ((dataset, model), group) in group_by_model(trials) {
        for s in summarize_trials(&group) {
            let _ = writeln!(
                out,
                "{dataset},{model},{},{},{},{},{},{},{}",
                s.horizon, s.lookback, s.n, s.mean_test, s.std_test, s.mean_val, s.std_val
            );
        }
    }
    out
}

fn group_by_model(trials: &[TrialResult]) -> BTreeMap<(String, String), Vec<TrialResult>> {
    let mut groups: BTreeMap<(String, String), Vec<TrialResult>> = BTreeMap::new();
    for t in trials {
        groups
            .entry((t.dataset.clone(), t.model.clone()))
            .or_default()
            .push(t.clone());
    }
    groups
}

/// One cell per (dataset, model, horizon) at the look-back `mode` selects;
/// the reported mean and spread are those of the test MSE.
pub fn selected_cells(
    trials: &[TrialResult],
    mode: SelectionMode,
) -> Result<Vec<CellResult>, ProtocolError> {
    let mut out = Vec::new();
    for ((dataset, model), group) in group_by_model(trials) {
        let chosen = match select_lookback(&group, mode) {
            Ok(c) => c,
            Err(ProtocolError::NoTrials) => continue,
            Err(e) => return Err(e),
        };
        for (horizon, s) in chosen {
            out.push(CellResult {
                model: model.clone(),
                dataset: dataset.clone(),
                horizon,
                mean: s.mean_test,
                std: s.std_test,
                n: s.n,
                lookback: Some(s.lookback),
                mode: Some(mode),
                published_best: None,
                published_significant: None,
            });
        }
    }
    if out.is_empty() {
        return Err(ProtocolError::NoTrials);
    }
    Ok(out)
}
