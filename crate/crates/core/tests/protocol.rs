use proptest::prelude::*;
use sfnn::cli::verify::{ar_process_csv, sinusoid_csv};
use sfnn::data::{make_windows, parse_csv, zscore_fit_transform, NormalizedDataset, SplitSpec};
use sfnn::model::SfnnConfig;
use sfnn::numerics::least_squares;
use sfnn::protocol::*;
use sfnn::training::TrainConfig;
use sfnn::{Matrix, SeededRng};

fn dataset(csv: &str) -> NormalizedDataset {
    zscore_fit_transform(&parse_csv(csv).unwrap(), &SplitSpec::standard()).unwrap()
}

/// Two-sided tail of Student's t by composite Simpson integration of the
/// density over `u = 1/(1+x)`, which maps `[|t|, ∞)` to a finite interval.
fn t_tail_by_quadrature(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let (a, b) = (0.0, 1.0 / (1.0 + t.abs()));
    let n = 20_000;
    let h = (b - a) / n as f64;
    // The endpoint u = 0 is taken as a limit, approached at u = 1e-8.
    let f = |u: f64| {
        let u = u.max(1e-8);
        density(1.0 / u - 1.0) / (u * u)
    };
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * s * h / 3.0
}

#[test]
fn t_tail_matches_quadrature() {
    for &(t, df) in &[(0.3, 3.0), (1.0, 1.0), (2.2, 7.5), (-3.9, 17.8), (5.0, 30.0), (0.01, 120.0)] {
        let p = student_t_two_sided_p(t, df);
        let q = t_tail_by_quadrature(t, df);
        assert!((p - q).abs() < 1e-9, "t={t} df={df}: {p} vs {q}");
    }
    assert_eq!(student_t_two_sided_p(0.0, 5.0), 1.0);
}

#[test]
fn welch_size_under_the_null_by_simulation() {
    let mut rng = SeededRng::new(1234);
    let reps = 4000;
    let mut rejects = 0;
    for _ in 0..reps {
        let a: Vec<f64> = (0..10).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = (0..7).map(|_| 3.0 * rng.standard_normal()).collect();
        let (ma, sa) = mean_std(&a);
        let (mb, sb) = mean_std(&b);
        if welch_t_test(ma, sa, 10, mb, sb, 7).unwrap().p_two_sided < 0.05 {
            rejects += 1;
        }
    }
    let rate = rejects as f64 / reps as f64;
    // Binomial standard error at 5% with 4000 draws is about 0.0034.
    assert!((rate - 0.05).abs() < 0.012, "{rate}");
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn welch_edge_cases() {
    assert!(matches!(welch_t_test(1.0, 0.0, 5, 1.0, 0.0, 5), Err(ProtocolError::DegenerateVariance)));
    let r = welch_t_test(1.0, 0.0, 5, 2.0, 0.0, 5).unwrap();
    assert!(r.t.is_infinite() && r.p_two_sided == 0.0);
    assert!(welch_t_test(1.0, 0.1, 1, 2.0, 0.1, 5).is_err());
    // Equal variances and sizes: df = 2(n − 1).
    let r = welch_t_test(0.0, 1.0, 10, 1.0, 1.0, 10).unwrap();
    assert!((r.df - 18.0).abs() < 1e-12);
    assert!((r.t + 1.0 / (0.2f64).sqrt()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn welch_is_antisymmetric_and_bounded(m1 in -5.0f64..5.0, m2 in -5.0f64..5.0, s1 in 0.01f64..3.0, s2 in 0.01f64..3.0, n1 in 2usize..40, n2 in 2usize..40) {
        let a = welch_t_test(m1, s1, n1, m2, s2, n2).unwrap();
        let b = welch_t_test(m2, s2, n2, m1, s1, n1).unwrap();
        prop_assert!((a.t + b.t).abs() < 1e-12);
        prop_assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p_two_sided));
        prop_assert!(a.df >= (n1.min(n2) - 1) as f64 - 1e-9 && a.df <= (n1 + n2 - 2) as f64 + 1e-9);
        let wider = welch_t_test(m1, s1, n1, m2 + (m2 - m1).signum() * 0.5, s2, n2).unwrap();
        prop_assert!(wider.p_two_sided <= a.p_two_sided + 1e-12);
    }

    #[test]
    fn aggregate_counts_are_consistent(seed in 0u64..5000, n_models in 2usize..5, n_cells in 1usize..12, scale in 0.1f64..10.0) {
        let mut rng = SeededRng::new(seed);
        let mut cells = Vec::new();
        for c in 0..n_cells {
            for m in 0..n_models {
                cells.push(CellResult {
                    model: format!("m{m}"),
                    dataset: "d".into(),
                    horizon: c + 1,
                    mean: 0.2 + rng.uniform(),
                    std: 0.05 * rng.uniform(),
                    n: 10,
                    lookback: None,
                    mode: None,
                    published_best: None,
                    published_significant: None,
                });
            }
        }
        let s = aggregate_table(&cells, "m0").unwrap();
        let first = s.first_counts();
        prop_assert_eq!(first.iter().sum::<usize>(), n_cells);
        for (f, g) in first.iter().zip(s.significant_counts()) {
            prop_assert!(g <= *f);
        }
        prop_assert!((s.aggregate("m0").unwrap().avg_relative_loss - 1.0).abs() < 1e-12);
        let scaled: Vec<CellResult> = cells.iter().map(|c| CellResult { mean: c.mean * scale, std: c.std * scale, ..c.clone() }).collect();
        let t = aggregate_table(&scaled, "m0").unwrap();
        prop_assert_eq!(t.first_counts(), first);
        prop_assert_eq!(t.significant_counts(), s.significant_counts());
    }

    #[test]
    fn fair_selection_never_looks_at_test_scores(seed in 0u64..5000) {
        let mut rng = SeededRng::new(seed);
        let mut trials = Vec::new();
        for l in [24, 48, 96] {
            for h in [12, 24] {
                for s in 0..3 {
                    trials.push(trial(l, h, s, rng.uniform(), rng.uniform()));
                }
            }
        }
        let fair = select_lookback(&trials, SelectionMode::Fair).unwrap();
        for t in trials.iter_mut() {
            t.test_mse = Some(rng.uniform() * 100.0);
        }
        let again = select_lookback(&trials, SelectionMode::Fair).unwrap();
        for (h, s) in &fair {
            prop_assert_eq!(s.lookback, again[h].lookback);
            prop_assert_eq!(s.mean_val, again[h].mean_val);
        }
        let peek = select_lookback(&trials, SelectionMode::Peek).unwrap();
        for s in peek.values() {
            let best = summarize_trials(&trials).into_iter().filter(|x| x.horizon == s.horizon).map(|x| x.mean_test).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(s.mean_test, best);
        }
    }
}

fn trial(l: usize, h: usize, seed: u64, val: f64, test: f64) -> TrialResult {
    TrialResult {
        dataset: "toy".into(),
        model: "SFNN[plain]".into(),
        lookback: l,
        horizon: h,
        seed,
        val_mse: Some(val),
        test_mse: Some(test),
        epochs_run: Some(1),
        wall_time: 0.0,
        config: SfnnConfig::new(l, h, 1),
        train: TrainConfig::default(),
        error: None,
    }
}

#[test]
fn published_tables_reproduce_footer_counts() {
    let peek = aggregate_table(&parse_summary_csv(PUBLISHED_PEEK_CSV).unwrap(), "SFNN").unwrap();
    assert_eq!(peek.models, ["SFNN", "DUET", "iTransformer"]);
    assert_eq!(peek.first_counts(), [19, 6, 3]);
    assert_eq!(peek.significant_counts(), [15, 4, 3]);
    let d = peek.marker_discrepancies();
    assert_eq!(d.len(), 1);
    assert_eq!((d[0].dataset.as_str(), d[0].horizon, d[0].field), ("ETTm2", 336, "significant"));
    let avg: Vec<f64> = peek.aggregates.iter().map(|a| a.avg_relative_loss).collect();
    for (a, b) in avg.iter().zip([1.0, 1.0114, 1.1007]) {
        assert!((a - b).abs() < 5e-4, "{a} vs {b}");
    }

    let fair = aggregate_table(&parse_summary_csv(PUBLISHED_FAIR_CSV).unwrap(), "SFNN").unwrap();
    assert_eq!(fair.first_counts(), [24, 3, 1]);
    assert_eq!(fair.significant_counts(), [23, 1, 1]);
    assert!(fair.marker_discrepancies().is_empty());
    let avg: Vec<f64> = fair.aggregates.iter().map(|a| a.avg_relative_loss).collect();
    for (a, b) in avg.iter().zip([1.0, 1.0284, 1.1169]) {
        assert!((a - b).abs() < 5e-4, "{a} vs {b}");
    }
    let md = fair.to_markdown();
    assert!(md.contains("ETTh1") && md.contains('†'));
    assert_eq!(fair.to_csv().lines().filter(|l| l.starts_with("ETTh1,96,")).count(), 3);
}

#[test]
fn summary_csv_rejects_malformed_rows() {
    assert!(parse_summary_csv("model,dataset,horizon,mean,std,n\nA,d,96,0.3,0.1\n").is_err());
    assert!(parse_summary_csv("model,dataset,horizon,mean,std,n\nA,d,x,0.3,0.1,10\n").is_err());
    let cells = parse_summary_csv("model,dataset,horizon,mean,std,n\nA,d,96,0.3,0.1,10\nB,d,96,0.4,0.1,10\n").unwrap();
    assert!(matches!(aggregate_table(&cells, "C"), Err(ProtocolError::InvalidInput(_))));
}

#[test]
fn builtin_grids_and_splits() {
    let g = builtin_grid("ETTh1").unwrap();
    assert_eq!(g.lookbacks, [168, 336, 672, 1344]);
    assert_eq!(g.horizons, [96, 192, 336, 720]);
    assert_eq!(g.n_seeds, 10);
    assert_eq!(builtin_grid("national_illness").unwrap().horizons, [24, 36, 48, 60]);
    assert_eq!(builtin_split("etth2").unwrap(), SplitSpec::ett());
    assert_eq!(builtin_split("Solar Energy").unwrap(), SplitSpec::standard());
    assert!(matches!(builtin_grid("Mars"), Err(ProtocolError::UnknownDataset { .. })));
    for name in builtin_names() {
        builtin_grid(name).unwrap().validate().unwrap();
    }
}

#[test]
fn n_linears_sinusoid_is_exact() {
    let ds = dataset(&sinusoid_csv(1000, 3, 24));
    let r = fit_n_linears(&ds, &SeriesLookbacks::Fixed(vec![24; 3]), 24, &NLinearsOptions::default()).unwrap();
    assert!(r.test_mse < 1e-6, "{}", r.test_mse);
    assert_eq!(r.series.len(), 3);
    assert!(r.series.iter().all(|s| s.coefficients.shape() == (25, 24)));
    let centered = fit_n_linears(&ds, &SeriesLookbacks::Fixed(vec![24; 3]), 24, &NLinearsOptions { center: true, ..Default::default() }).unwrap();
    assert!(centered.test_mse < 1e-6);
}

#[test]
fn n_linears_matches_direct_least_squares() {
    let ds = dataset(&ar_process_csv(800, 2, 6));
    let opts = NLinearsOptions { center: false, ridge: 0.0 };
    let r = fit_n_linears(&ds, &SeriesLookbacks::Fixed(vec![6, 10]), 3, &opts).unwrap();
    let (mut sse, mut count) = (0.0, 0);
    for (s, &l) in [6usize, 10].iter().enumerate() {
        let col = Matrix::column_vector(&ds.values.column(s));
        let seg = |a, b| sfnn::data::Segment::new(&col, a, b);
        let design = |w: &sfnn::data::WindowBatch<'_>| {
            let a = Matrix::from_fn(w.len(), l + 1, |i, j| if j == l { 1.0 } else { w.input_slice(i)[j] });
            let b = Matrix::from_fn(w.len(), 3, |i, j| w.target_slice(i)[j]);
            (a, b)
        };
        let (a, b) = design(&make_windows(&seg(0, ds.train_end), l, 3, false).unwrap());
        let coef = least_squares(&a, &b).unwrap();
        assert!(coef.max_abs_diff(&r.series[s].coefficients) < 1e-9);
        let (a, b) = design(&make_windows(&seg(ds.val_end, ds.len()), l, 3, true).unwrap());
        let err = a.matmul(&coef).unwrap().sub(&b).unwrap();
        sse += err.as_slice().iter().map(|e| e * e).sum::<f64>();
        count += err.as_slice().len();
    }
    assert!((r.test_mse - sse / count as f64).abs() < 1e-12);
}

#[test]
fn n_linears_tuning_picks_lowest_validation_error() {
    let ds = dataset(&ar_process_csv(800, 2, 3));
    let cands = vec![2, 4, 8];
    let tuned = fit_n_linears(&ds, &SeriesLookbacks::Tune(cands.clone()), 4, &NLinearsOptions::default()).unwrap();
    for s in &tuned.series {
        for &l in &cands {
            let mut fixed = vec![2; 2];
            fixed[s.series] = l;
            let f = fit_n_linears(&ds, &SeriesLookbacks::Fixed(fixed), 4, &NLinearsOptions::default()).unwrap();
            assert!(s.val_mse <= f.series[s.series].val_mse);
        }
    }
    assert!(fit_n_linears(&ds, &SeriesLookbacks::Fixed(vec![3]), 4, &NLinearsOptions::default()).is_err());
    assert!(fit_n_linears(&ds, &SeriesLookbacks::Tune(vec![]), 4, &NLinearsOptions::default()).is_err());
}

#[test]
fn n_linears_without_ridge_reports_rank_deficiency() {
    // Sinusoid windows span only three directions.
    let ds = dataset(&sinusoid_csv(600, 1, 24));
    let plain = NLinearsOptions { center: false, ridge: 0.0 };
    assert!(matches!(fit_n_linears(&ds, &SeriesLookbacks::Fixed(vec![12]), 4, &plain), Err(ProtocolError::Numerics(_))));
    assert!(fit_n_linears(&ds, &SeriesLookbacks::Fixed(vec![12]), 4, &NLinearsOptions::default()).is_ok());
}

#[test]
fn parallel_and_serial_sweeps_agree() {
    let ds = dataset(&ar_process_csv(400, 2, 1));
    let grid = GridSpec { dataset_name: "ar".into(), period: 0, lookbacks: vec![4, 8], horizons: vec![2], n_seeds: 3 };
    let template = ModelTemplate { hidden_width: Some(8), ..Default::default() };
    let tc = TrainConfig { max_epochs: 3, patience: 3, ..TrainConfig::default() };
    let serial = run_trials(&ds, &grid, &template, &tc, &TrialOptions { ledger: None, workers: 1 }).unwrap();
    let parallel = run_trials(&ds, &grid, &template, &tc, &TrialOptions { ledger: None, workers: 3 }).unwrap();
    let strip = |v: &[TrialResult]| v.iter().map(TrialResult::without_timing).collect::<Vec<_>>();
    assert_eq!(serial.len(), 6);
    assert_eq!(strip(&serial), strip(&parallel));
    let curve = lookback_curve_csv(&serial);
    assert_eq!(curve.lines().count(), 3);
    let cells = selected_cells(&serial, SelectionMode::Fair).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].n, 3);
}

#[test]
fn failed_trials_are_recorded_not_raised() {
    let ds = dataset(&ar_process_csv(200, 1, 1));
    let grid = GridSpec { dataset_name: "ar".into(), period: 0, lookbacks: vec![4, 150], horizons: vec![2], n_seeds: 1 };
    let template = ModelTemplate { hidden_width: Some(4), ..Default::default() };
    let tc = TrainConfig { max_epochs: 2, patience: 2, ..TrainConfig::default() };
    let out = run_trials(&ds, &grid, &template, &tc, &TrialOptions::default()).unwrap();
    assert_eq!(out.len(), 2);
    assert!(out[0].is_ok());
    assert!(out[1].error.as_deref().unwrap().contains("need"));
    assert_eq!(select_lookback(&out, SelectionMode::Fair).unwrap()[&2].lookback, 4);
}
