//! Dataset statistics that suggest which optional modules to enable.
//!
//! All statistics are meant for the z-scored training segment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Segment;
use crate::numerics::{cholesky, generalized_symmetric_eigen, HouseholderQr, Matrix, NumericsError};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("need at least {needed} rows, have {available}")]
    TooShort { needed: usize, available: usize },
    #[error("statistic needs at least two series")]
    SingleSeries,
    #[error("moment matrix not positive definite (collinear or constant series): {0}")]
    NotPositiveDefinite(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Trend threshold above which input mean centering is suggested.
pub const TREND_THRESHOLD: f64 = 0.2;
/// Scale-difference threshold above which layer normalization is suggested.
pub const SCALE_THRESHOLD: f64 = 0.5;
/// Series mixing is suggested outright below this many series.
pub const SMALL_N: usize = 30;
/// Above this many series mixing is never suggested.
pub const LARGE_N: usize = 100;

/// Per-window, per-series means of every length-`L` window of `segment`,
/// returned as a `windows × N` matrix (via prefix sums).
fn window_means(segment: &Segment<'_>, lookback: usize) -> Result<Matrix, DiagnosticsError> {
    if lookback == 0 || segment.len() < lookback {
        return Err(DiagnosticsError::TooShort {
            needed: lookback.max(1),
            available: segment.len(),
        });
    }
    let n = segment.values.cols();
    let count = segment.len() - lookback + 1;
    let mut out = Matrix::zeros(count, n);
    let mut prefix = vec![0.0; n];
    let mut cum = Vec::with_capacity((segment.len() + 1) * n);
    cum.extend_from_slice(&prefix);
    for r in segment.start..segment.end {
        for (p, v) in prefix.iter_mut().zip(segment.values.row(r)) {
            *p += v;
        }
        cum.extend_from_slice(&prefix);
    }
    for w in 0..count {
        for s in 0..n {
            out[(w, s)] = (cum[(w + lookback) * n + s] - cum[w * n + s]) / lookback as f64;
        }
    }
    Ok(out)
}

/// Mean over all length-`L` windows of `(1/N)·‖x̄‖²`, where `x̄` holds the
/// per-series window means.
pub fn trend_strength(segment: &Segment<'_>, lookback: usize) -> Result<f64, DiagnosticsError> {
    let means = window_means(segment, lookback)?;
    let n = means.cols() as f64;
    let total: f64 = (0..means.rows())
        .map(|w| means.row(w).iter().map(|m| m * m).sum::<f64>() / n)
        .sum();
    Ok(total / means.rows() as f64)
}

/// Mean over all length-`L` windows of the population standard deviation,
/// across series, of the per-series window means.
pub fn scale_difference(segment: &Segment<'_>, lookback: usize) -> Result<f64, DiagnosticsError> {
    if segment.values.cols() < 2 {
        return Err(DiagnosticsError::SingleSeries);
    }
    let means = window_means(segment, lookback)?;
    let n = means.cols() as f64;
    let total: f64 = (0..means.rows())
        .map(|w| {
            let row = means.row(w);
            let mu = row.iter().sum::<f64>() / n;
            (row.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / n).sqrt()
        })
        .sum();
    Ok(total / means.rows() as f64)
}

/// 90/95/99% trace critical values for an unrestricted constant and no
/// trend, indexed by `N − r − 1` (MacKinnon, Haug and Michelis, 1999, as
/// tabulated in statsmodels' `c_sjt` for `det_order = 0`).
pub const TRACE_CRITICAL_VALUES: [[f64; 3]; 12] = [
    [2.7055, 3.8415, 6.6349],
    [13.4294, 15.4943, 19.9349],
    [27.0669, 29.7961, 35.4628],
    [44.4929, 47.8545, 54.6815],
    [65.8202, 69.8189, 77.8202],
    [91.1090, 95.7542, 104.9637],
    [120.3673, 125.6185, 135.9825],
    [153.6341, 159.5290, 171.0905],
    [190.8714, 197.3772, 210.0366],
    [232.1030, 239.2468, 253.2526],
    [277.3740, 285.1402, 300.2821],
    [326.5354, 334.9795, 351.2150],
];

/// 95% trace critical value for `n_minus_r` common trends.
pub fn trace_critical_value_95(n_minus_r: usize) -> Result<f64, DiagnosticsError> {
    match n_minus_r {
        1..=12 => Ok(TRACE_CRITICAL_VALUES[n_minus_r - 1][1]),
        _ => Err(DiagnosticsError::Unsupported(format!(
            "no tabulated critical value for N − r = {n_minus_r} (supported 1..=12)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohansenResult {
    pub lag: usize,
    pub rank: usize,
    pub trace_statistic: f64,
    pub critical_value_95: f64,
    pub reject: bool,
    /// Squared canonical correlations, descending.
    pub eigenvalues: Vec<f64>,
    pub effective_samples: usize,
}

fn demean_columns(m: &mut Matrix) {
    let rows = m.rows() as f64;
    for c in 0..m.cols() {
        let mean = (0..m.rows()).map(|r| m[(r, c)]).sum::<f64>() / rows;
        for r in 0..m.rows() {
            m[(r, c)] -= mean;
        }
    }
}

/// Johansen trace test of `H0: rank ≤ r` with `k` lagged differences and an
/// unrestricted constant.
///
/// `Δx_t` and `x_{t−k}` are regressed on `Δx_{t−1} … Δx_{t−k}` and a
/// constant; with residuals `R0`, `R1` and `S_ij = R_iᵀR_j / T_eff`, the
/// eigenvalues solve `S10·S00⁻¹·S01 v = λ·S11 v` and the statistic is
/// `−T_eff·Σ_{i>r} ln(1 − λ_i)` with `T_eff = T − k − 1`.
pub fn johansen_trace(values: &Matrix, lag: usize, rank: usize) -> Result<JohansenResult, DiagnosticsError> {
    let (t, n) = values.shape();
    if n < 2 {
        return Err(DiagnosticsError::SingleSeries);
    }
    if rank >= n {
        return Err(DiagnosticsError::Unsupported(format!("rank {rank} must be below N = {n}")));
    }
    let critical = trace_critical_value_95(n - rank)?;
    let needed = lag * n + n + 11;
    if t < needed {
        return Err(DiagnosticsError::TooShort { needed, available: t });
    }
    let level_lag = lag.max(1);
    let t_eff = t - lag - 1;
    // Row i corresponds to time s = lag + 1 + i.
    let mut z0 = Matrix::zeros(t_eff, n);
    let mut z1 = Matrix::zeros(t_eff, n);
    let mut z2 = Matrix::zeros(t_eff, lag * n);
    for i in 0..t_eff {
        let s = lag + 1 + i;
        for c in 0..n {
            z0[(i, c)] = values[(s, c)] - values[(s - 1, c)];
            z1[(i, c)] = values[(s - level_lag, c)];
            for j in 1..=lag {
                z2[(i, (j - 1) * n + c)] = values[(s - j, c)] - values[(s - j - 1, c)];
            }
        }
    }
    // Demeaning everything is the same as including a constant regressor.
    demean_columns(&mut z0);
    demean_columns(&mut z1);
    demean_columns(&mut z2);
    let (r0, r1) = if lag == 0 {
        (z0, z1)
    } else {
        let mut both = Matrix::zeros(t_eff, 2 * n);
        for i in 0..t_eff {
            both.row_mut(i)[..n].copy_from_slice(z0.row(i));
            both.row_mut(i)[n..].copy_from_slice(z1.row(i));
        }
        let coef = HouseholderQr::new(&z2)?.solve(&both)?;
        let resid = both.sub(&z2.matmul(&coef)?)?;
        (resid.select_columns(&(0..n).collect::<Vec<_>>()), resid.select_columns(&(n..2 * n).collect::<Vec<_>>()))
    };
    let scale = 1.0 / t_eff as f64;
    let s00 = r0.t_matmul(&r0)?.scale(scale);
    let s01 = r0.t_matmul(&r1)?.scale(scale);
    let s11 = r1.t_matmul(&r1)?.scale(scale);
    let not_pd = |e: NumericsError| match e {
        NumericsError::NotPositiveDefinite { .. } => DiagnosticsError::NotPositiveDefinite(e.to_string()),
        other => other.into(),
    };
    // S10·S00⁻¹·S01 = (L⁻¹S01)ᵀ(L⁻¹S01) with S00 = L·Lᵀ.
    let l00 = cholesky(&s00).map_err(not_pd)?;
    let w = forward_substitute(&l00, &s01);
    let mut a = w.t_matmul(&w)?;
    symmetrize(&mut a);
    let mut b = s11;
    symmetrize(&mut b);
    let eig = generalized_symmetric_eigen(&a, &b).map_err(not_pd)?;
    let eigenvalues: Vec<f64> = eig.values.iter().map(|v| v.clamp(0.0, 1.0 - 1e-15)).collect();
    let trace_statistic = -(t_eff as f64) * eigenvalues[rank..].iter().map(|l| (1.0 - l).ln()).sum::<f64>();
    Ok(JohansenResult {
        lag,
        rank,
        trace_statistic,
        critical_value_95: critical,
        reject: trace_statistic > critical,
        eigenvalues,
        effective_samples: t_eff,
    })
}

/// Solves `L·X = B` for lower-triangular `L`.
fn forward_substitute(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// One lag of a Johansen curve; failed lags keep their error and no statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohansenPoint {
    pub lag: usize,
    pub trace_statistic: Option<f64>,
    pub critical_value_95: Option<f64>,
    pub reject: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// [`johansen_trace`] at each lag (sorted, deduplicated) with `r = N − 1`
/// unless given. Per-lag failures are recorded and the curve continues.
pub fn johansen_curve(values: &Matrix, lags: &[usize], rank: Option<usize>) -> Vec<JohansenPoint> {
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let rank = rank.unwrap_or(values.cols().saturating_sub(1));
    lags.into_iter()
        .map(|lag| match johansen_trace(values, lag, rank) {
            Ok(r) => JohansenPoint {
                lag,
                trace_statistic: Some(r.trace_statistic),
                critical_value_95: Some(r.critical_value_95),
                reject: Some(r.reject),
                error: None,
            },
            Err(e) => JohansenPoint {
                lag,
                trace_statistic: None,
                critical_value_95: None,
                reject: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    MeanCentering,
    LayerNorm,
    SeriesMixing,
}

impl Module {
    pub fn name(&self) -> &'static str {
        match self {
            Module::MeanCentering => "mean_centering",
            Module::LayerNorm => "layer_norm",
            Module::SeriesMixing => "series_mixing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub module: Module,
    pub rationale: String,
}

/// Statistics the recommendation rules read.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationInputs<'a> {
    pub trend_strength: f64,
    pub scale_difference: Option<f64>,
    pub n_series: usize,
    pub johansen_curve: &'a [JohansenPoint],
}

/// Rule-of-thumb module choice:
///
/// - mean centering when trend strength exceeds 0.2;
/// - layer normalization when the scale difference exceeds 0.5;
/// - series mixing for `2 ≤ N < 30`, or for `30 ≤ N ≤ 100` when the Johansen
///   statistic at the longest successfully tested lag still exceeds its
///   critical value. Never above 100 series.
pub fn recommend_modules(inputs: &RecommendationInputs<'_>) -> Vec<Recommendation> {
    let mut out = Vec::new();
    if inputs.trend_strength > TREND_THRESHOLD {
        out.push(Recommendation {
            module: Module::MeanCentering,
            rationale: format!(
                "trend strength {:.4} > {TREND_THRESHOLD}",
                inputs.trend_strength
            ),
        });
    }
    if let Some(scale) = inputs.scale_difference.filter(|s| *s > SCALE_THRESHOLD) {
        out.push(Recommendation {
            module: Module::LayerNorm,
            rationale: format!("scale difference {scale:.4} > {SCALE_THRESHOLD}"),
        });
    }
    let n = inputs.n_series;
    if (2..SMALL_N).contains(&n) {
        out.push(Recommendation {
            module: Module::SeriesMixing,
            rationale: format!("N = {n} < {SMALL_N}: few series"),
        });
    } else if (SMALL_N..=LARGE_N).contains(&n) {
        let last = inputs
            .johansen_curve
            .iter()
            .rev()
            .find(|p| p.trace_statistic.is_some());
        if let Some(p) = last.filter(|p| p.reject == Some(true)) {
            out.push(Recommendation {
                module: Module::SeriesMixing,
                rationale: format!(
                    "{SMALL_N} ≤ N = {n} ≤ {LARGE_N} and cointegration persists at lag {} \
                     (trace {:.2} > {:.4}); interpolated rule",
                    p.lag,
                    p.trace_statistic.unwrap(),
                    p.critical_value_95.unwrap()
                ),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub dataset: String,
    pub n_series: usize,
    pub lookback: usize,
    pub trend_strength: f64,
    pub scale_difference: Option<f64>,
    pub johansen_curve: Vec<JohansenPoint>,
    pub recommendations: Vec<Recommendation>,
    pub notes: Vec<String>,
}

/// Computes every statistic on `segment` (normally the z-scored training
/// segment) and applies [`recommend_modules`].
pub fn diagnose(
    dataset: &str,
    segment: &Segment<'_>,
    lookback: usize,
    lags: &[usize],
) -> Result<DiagnosticsReport, DiagnosticsError> {
    let n = segment.values.cols();
    let trend = trend_strength(segment, lookback)?;
    let mut notes = vec!["Recommendations are a general guideline, not a strict rule.".to_owned()];
    let scale = if n >= 2 {
        Some(scale_difference(segment, lookback)?)
    } else {
        notes.push("scale difference omitted: a single series has no cross-series spread".into());
        None
    };
    let curve = if n >= 2 {
        johansen_curve(&segment.to_matrix(), lags, None)
    } else {
        notes.push("Johansen curve omitted: cointegration needs at least two series".into());
        Vec::new()
    };
    if (SMALL_N..=LARGE_N).contains(&n) {
        notes.push(format!(
            "for {SMALL_N} ≤ N ≤ {LARGE_N} the series-mixing rule is an interpolation"
        ));
    }
    let recommendations = recommend_modules(&RecommendationInputs {
        trend_strength: trend,
        scale_difference: scale,
        n_series: n,
        johansen_curve: &curve,
    });
    Ok(DiagnosticsReport {
        dataset: dataset.to_owned(),
        n_series: n,
        lookback,
        trend_strength: trend,
        scale_difference: scale,
        johansen_curve: curve,
        recommendations,
        notes,
    })
}

impl DiagnosticsReport {
    pub fn has(&self, module: Module) -> bool {
        self.recommendations.iter().any(|r| r.module == module)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset          {}", self.dataset);
        let _ = writeln!(s, "series (N)       {}", self.n_series);
        let _ = writeln!(s, "look-back (L)    {}", self.lookback);
        let _ = writeln!(s, "trend strength   {:.6}", self.trend_strength);
        match self.scale_difference {
            Some(v) => {
                let _ = writeln!(s, "scale difference {v:.6}");
            }
            None => {
                let _ = writeln!(s, "scale difference n/a");
            }
        }
        if !self.johansen_curve.is_empty() {
            let _ = writeln!(s, "johansen trace (r = N-1):");
            for p in &self.johansen_curve {
                match (p.trace_statistic, p.critical_value_95) {
                    (Some(t), Some(c)) => {
                        let verdict = if p.reject == Some(true) { "reject" } else { "keep" };
                        let _ = writeln!(s, "  lag {:>4}  {t:>12.4}  crit {c:.4}  {verdict}", p.lag);
                    }
                    _ => {
                        let _ = writeln!(s, "  lag {:>4}  error: {}", p.lag, p.error.as_deref().unwrap_or("?"));
                    }
                }
            }
        }
        let _ = writeln!(s, "recommended modules:");
        if self.recommendations.is_empty() {
            let _ = writeln!(s, "  (none)");
        }
        for r in &self.recommendations {
            let _ = writeln!(s, "  {:<15} {}", r.module.name(), r.rationale);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }

    /// `lag,statistic,critical` rows; failed lags have empty fields.
    pub fn johansen_csv(&self) -> String {
        let mut s = String::from("lag,statistic,critical\n");
        for p in &self.johansen_curve {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{}", p.lag, f(p.trace_statistic), f(p.critical_value_95));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let m = Matrix::from_fn(20, 2, |_, c| if c == 0 { 1.0 } else { -1.0 });
        let seg = Segment::whole(&m);
        assert!((trend_strength(&seg, 5).unwrap() - 1.0).abs() < 1e-15);
        assert!((scale_difference(&seg, 5).unwrap() - 1.0).abs() < 1e-15);
        let c = Matrix::filled(10, 3, 2.5);
        assert!((trend_strength(&Segment::whole(&c), 4).unwrap() - 6.25).abs() < 1e-12);
        assert!(scale_difference(&Segment::whole(&c), 4).unwrap().abs() < 1e-12);
        let one = Matrix::zeros(10, 1);
        assert!(matches!(
            scale_difference(&Segment::whole(&one), 3),
            Err(DiagnosticsError::SingleSeries)
        ));
        assert!(matches!(
            trend_strength(&Segment::whole(&one), 11),
            Err(DiagnosticsError::TooShort { .. })
        ));
    }

    #[test]
    fn critical_values() {
        assert_eq!(trace_critical_value_95(1).unwrap(), 3.8415);
        assert_eq!(trace_critical_value_95(12).unwrap(), 334.9795);
        assert!(trace_critical_value_95(13).is_err());
    }

    fn point(lag: usize, stat: f64) -> JohansenPoint {
        JohansenPoint {
            lag,
            trace_statistic: Some(stat),
            critical_value_95: Some(3.8415),
            reject: Some(stat > 3.8415),
            error: None,
        }
    }

    fn modules(r: &[Recommendation]) -> Vec<Module> {
        r.iter().map(|r| r.module).collect()
    }

    #[test]
    fn recommendation_rules() {
        let rec = |trend, scale, n, curve: &[JohansenPoint]| {
            modules(&recommend_modules(&RecommendationInputs {
                trend_strength: trend,
                scale_difference: Some(scale),
                n_series: n,
                johansen_curve: curve,
            }))
        };
        assert_eq!(rec(0.3, 0.1, 7, &[]), [Module::MeanCentering, Module::SeriesMixing]);
        assert_eq!(rec(0.05, 0.9, 862, &[point(1, 50.0)]), [Module::LayerNorm]);
        assert_eq!(rec(0.0, 0.0, 2, &[]), [Module::SeriesMixing]);
        assert_eq!(rec(0.2, 0.5, 1, &[]), Vec::<Module>::new());
        let persistent = [point(1, 40.0), point(48, 9.0)];
        let fading = [point(1, 40.0), point(48, 1.0)];
        assert_eq!(rec(0.0, 0.0, 50, &persistent), [Module::SeriesMixing]);
        assert!(rec(0.0, 0.0, 50, &fading).is_empty());
        assert!(rec(0.0, 0.0, 101, &persistent).is_empty());
    }
}
