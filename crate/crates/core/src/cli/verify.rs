//! Self-contained check suites run by `sfnn verify`.

use serde::Serialize;

use crate::data::{make_windows, parse_csv, zscore_fit_transform, SplitSpec};
use crate::model::{gradient_check, SfnnConfig};
use crate::numerics::{least_squares, Matrix, SeededRng};
use crate::protocol::{
    aggregate_table, fit_n_linears, parse_summary_csv, welch_t_test, NLinearsOptions,
    SeriesLookbacks, PUBLISHED_FAIR_CSV, PUBLISHED_PEEK_CSV,
};
use crate::training::{stack_windows, train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Gradients,
    Oracles,
    Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Gradients => gradients(),
        Suite::Oracles => oracles(),
        Suite::Protocol => protocol(),
    }
}

/// The 16 on/off combinations of centering, mixing, layer norm and blocks > 0.
pub fn module_combinations() -> Vec<SfnnConfig> {
    (0..16u32)
        .map(|bits| SfnnConfig {
            lookback: 6,
            horizon: 3,
            hidden_width: 5,
            num_blocks: if bits & 8 != 0 { 2 } else { 0 },
            n_series: 3,
            use_mean_centering: bits & 1 != 0,
            use_series_mixing: bits & 2 != 0,
            num_mixing_blocks: 1,
            use_layer_norm: bits & 4 != 0,
            layer_norm_affine: bits & 4 != 0,
        })
        .collect()
}

fn gradients() -> Vec<Check> {
    module_combinations()
        .into_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let name = format!("gradients[{}{}]", cfg.modules_tag(), if cfg.num_blocks > 0 { ";blocks" } else { "" });
            match gradient_check(&cfg, 100 + i as u64, 1e-4) {
                Ok(r) => Check::new(name, r.passed(), format!("max relative error {:.2e}", r.worst())),
                Err(e) => Check::failed(name, e),
            }
        })
        .collect()
}

/// Stable AR(2) process per series, written as CSV text.
pub fn ar_process_csv(t: usize, n: usize, seed: u64) -> String {
    let mut rng = SeededRng::new(seed);
    let mut out: String = (0..n).map(|s| format!("s{s}")).collect::<Vec<_>>().join(",") + "\n";
    let mut prev = vec![(0.0f64, 0.0f64); n];
    for _ in 0..t {
        let row: Vec<String> = prev
            .iter_mut()
            .map(|(a, b)| {
                let x = 0.6 * *a - 0.3 * *b + rng.standard_normal();
                *b = *a;
                *a = x;
                format!("{x}")
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `sin(2πt/period)` per series with a series-specific phase.
pub fn sinusoid_csv(t: usize, n: usize, period: usize) -> String {
    let mut out: String = (0..n).map(|s| format!("s{s}")).collect::<Vec<_>>().join(",") + "\n";
    for i in 0..t {
        let row: Vec<String> = (0..n)
            .map(|s| format!("{}", (std::f64::consts::TAU * i as f64 / period as f64 + s as f64).sin()))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Test MSE of a channel-independent affine map fitted by least squares.
fn pooled_least_squares(
    ds: &crate::data::NormalizedDataset,
    lookback: usize,
    horizon: usize,
) -> Result<f64, Box<dyn std::error::Error>> {
    let design = |w: &crate::data::WindowBatch<'_>| {
        let idx: Vec<usize> = (0..w.len()).collect();
        let (x, y) = stack_windows(w, &idx);
        let rows = w.len() * w.n_series();
        let n = w.n_series();
        // x is (b·L) × N, y is (b·H) × N; regroup per (window, series).
        let a = Matrix::from_fn(rows, lookback + 1, |r, c| {
            let (b, s) = (r / n, r % n);
            if c == lookback { 1.0 } else { x[(b * lookback + c, s)] }
        });
        let t = Matrix::from_fn(rows, horizon, |r, c| y[((r / n) * horizon + c, r % n)]);
        (a, t)
    };
    let (a, b) = design(&make_windows(&ds.train(), lookback, horizon, false)?);
    let coef = least_squares(&a, &b)?;
    let (a, b) = design(&make_windows(&ds.test(), lookback, horizon, true)?);
    let pred = a.matmul(&coef)?;
    let err = pred.sub(&b)?;
    Ok(err.as_slice().iter().map(|e| e * e).sum::<f64>() / err.as_slice().len() as f64)
}

fn oracles() -> Vec<Check> {
    let mut out = Vec::new();

    let (l, h) = (16, 4);
    let linear = (|| -> Result<(f64, f64), Box<dyn std::error::Error>> {
        let ds = zscore_fit_transform(&parse_csv(&ar_process_csv(2000, 3, 5))?, &SplitSpec::standard())?;
        let ls = pooled_least_squares(&ds, l, h)?;
        let cfg = SfnnConfig::linear(l, h, 3, 32);
        let tc = TrainConfig {
            max_epochs: 60,
            ..TrainConfig::default()
        };
        let (_, report) = train(&ds, &cfg, &tc)?;
        Ok((report.test_mse, ls))
    })();
    out.push(match linear {
        Ok((sfnn, ls)) => {
            let rel = (sfnn - ls).abs() / ls;
            Check::new("linear SFNN vs least squares", rel <= 0.02, format!("SFNN {sfnn:.5}, LS {ls:.5}, relative gap {rel:.4}"))
        }
        Err(e) => Check::failed("linear SFNN vs least squares", e),
    });

    let sin = (|| -> Result<f64, Box<dyn std::error::Error>> {
        let ds = zscore_fit_transform(&parse_csv(&sinusoid_csv(1200, 2, 24))?, &SplitSpec::standard())?;
        Ok(fit_n_linears(&ds, &SeriesLookbacks::Fixed(vec![24; 2]), 12, &NLinearsOptions::default())?.test_mse)
    })();
    out.push(match sin {
        Ok(m) => Check::new("N-linears on a noiseless sinusoid", m < 1e-6, format!("test MSE {m:.2e}")),
        Err(e) => Check::failed("N-linears on a noiseless sinusoid", e),
    });

    // scipy.stats.ttest_ind_from_stats(0.3503, 0.0021, 10, 0.3550, 0.0032, 10, equal_var=False)
    out.push(match welch_t_test(0.3503, 0.0021, 10, 0.3550, 0.0032, 10) {
        Ok(w) => {
            let ok = (w.t + 3.883104208428515).abs() < 1e-9 && (w.p_two_sided - 0.0013859573035645133).abs() < 1e-9;
            Check::new("Welch t-test reference", ok, format!("t {:.6}, p {:.6e}", w.t, w.p_two_sided))
        }
        Err(e) => Check::failed("Welch t-test reference", e),
    });
    out
}

fn protocol() -> Vec<Check> {
    let mut out = Vec::new();
    for (label, text, first, sig) in [
        ("peek", PUBLISHED_PEEK_CSV, [19, 6, 3], [14, 4, 3]),
        ("fair", PUBLISHED_FAIR_CSV, [24, 3, 1], [23, 1, 1]),
    ] {
        let summary = parse_summary_csv(text).and_then(|cells| aggregate_table(&cells, "SFNN"));
        match summary {
            Ok(s) => {
                let f = s.first_counts();
                let g = s.significant_counts();
                let mismatched: usize = g.iter().zip(sig).map(|(a, b)| a.abs_diff(b)).sum();
                out.push(Check::new(format!("{label} first counts"), f == first, format!("{f:?}, published {first:?}")));
                out.push(Check::new(
                    format!("{label} significant first counts"),
                    mismatched <= 2,
                    format!("{g:?}, published {sig:?}, {} marker discrepancies", s.marker_discrepancies().len()),
                ));
            }
            Err(e) => out.push(Check::failed(format!("{label} table"), e)),
        }
    }
    out
}
