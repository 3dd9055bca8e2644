//! Criteria 9-11: reproduction against real market data.
//!
//! These run only when `BIDCRAFT_DATA_DIR` holds canonical per-market files
//! (afrr_pos.csv, afrr_neg.csv, mfrr_pos.csv, mfrr_neg.csv) covering
//! 2021-01-01 through 2024-06-30; without the data each prints SKIP and
//! passes. The full pipeline criteria retrain every model kind over its
//! default grid and take a while; run them in release
//! (`cargo test --release --test acceptance`).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use rayon::prelude::*;

use bidcraft_core::analysis::pearson;
use bidcraft_core::backtest::{
    walk_forward, Lag, OffsetConfig, Period, Retrain, Strategy, TrailingWindow,
};
use bidcraft_core::data::{
    build_supervised, read_canonical_csv, split, summary_stats, Market, MarketSeries,
};
use bidcraft_core::models::{ModelKind, ModelSpec};
use bidcraft_core::tuning::{grid_search, ParamGrid, Scoring};

const TRAIN_END: &str = "2023-12-31";
const TEST_END: &str = "2024-06-30";

fn skip(criterion: &str) {
    println!("[acceptance] {criterion}: SKIP — set BIDCRAFT_DATA_DIR to run the reproduction");
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("BIDCRAFT_DATA_DIR").map(PathBuf::from)
}

fn market_file(market: Market) -> String {
    format!("{}.csv", market.to_string().to_lowercase())
}

fn load_market(dir: &std::path::Path, market: Market) -> MarketSeries {
    let path = dir.join(market_file(market));
    let mut all = read_canonical_csv(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    all.remove(&market)
        .unwrap_or_else(|| panic!("{} holds no {market} rows", path.display()))
}

#[test]
fn c09_training_split_statistics_match_published_table() {
    let Some(dir) = data_dir() else {
        skip("criterion 9");
        return;
    };
    // (market, mean, std, min, max, q25, median, q75); the two maxima are
    // published at one decimal, everything else at two.
    let expected: [(Market, [f64; 7], f64); 4] = [
        (
            Market::AfrrPos,
            [21.36, 72.14, 0.50, 1871.04, 6.42, 10.85, 19.67],
            0.005,
        ),
        (
            Market::AfrrNeg,
            [24.38, 70.13, 0.30, 1979.0, 3.77, 9.21, 23.14],
            0.05,
        ),
        (
            Market::MfrrPos,
            [7.99, 43.81, 0.00, 2437.5, 1.00, 2.99, 8.52],
            0.05,
        ),
        (
            Market::MfrrNeg,
            [7.35, 21.67, 0.00, 798.77, 0.35, 1.33, 5.34],
            0.005,
        ),
    ];
    for (market, want, max_tol) in expected {
        let series = load_market(&dir, market);
        let (train, _) = split(
            &series,
            TRAIN_END.parse().unwrap(),
            TEST_END.parse().unwrap(),
        )
        .unwrap();
        let t = summary_stats(&train).unwrap();
        let got = [t.mean, t.std, t.min, t.max, t.q25, t.median, t.q75];
        let names = ["mean", "std", "min", "max", "q25", "median", "q75"];
        for i in 0..7 {
            let tol = if names[i] == "max" { max_tol } else { 0.005 };
            assert!(
                (got[i] - want[i]).abs() < tol,
                "{market} {}: got {} want {}",
                names[i],
                got[i],
                want[i]
            );
        }
    }
    println!("[acceptance] criterion 9: PASS — training-split statistics match the published table");
}

struct MarketOutcome {
    best_model_id: String,
    best_model_revenue: f64,
    best_benchmark_id: String,
    best_benchmark_revenue: f64,
    /// (strategy id, pre-offset MAE, post-offset revenue) per model run.
    study_points: Vec<(String, f64, f64)>,
}

fn run_market_pipeline(dir: &std::path::Path, market: Market) -> MarketOutcome {
    let series = load_market(dir, market);
    let (train, test) = split(
        &series,
        TRAIN_END.parse().unwrap(),
        TEST_END.parse().unwrap(),
    )
    .unwrap();
    let sup = build_supervised(&train, 42, 6).unwrap();

    // the full model set: every kind, default and grid-tuned parameters,
    // evaluated without and with monthly retraining (matching the study's
    // forty model points per market)
    let tuned: BTreeMap<ModelKind, ModelSpec> = ModelKind::ALL
        .par_iter()
        .map(|&kind| {
            let cv = grid_search(&ParamGrid::defaults(kind), &sup, 5, Scoring::NegRevenue, 0)
                .unwrap_or_else(|e| panic!("{market}/{kind}: tuning failed: {e}"));
            (kind, cv.best_spec().clone())
        })
        .collect();

    let mut configs: Vec<(String, ModelSpec, Retrain)> = Vec::new();
    for kind in ModelKind::ALL {
        let default_spec = ModelSpec::new(kind);
        let tuned_spec = tuned[&kind].clone();
        configs.push((format!("{kind}/default/fixed"), default_spec.clone(), Retrain::Fixed));
        configs.push((format!("{kind}/tuned/fixed"), tuned_spec.clone(), Retrain::Fixed));
        configs.push((
            format!("{kind}/default/monthly"),
            default_spec,
            Retrain::Periodic(Period::Monthly),
        ));
        configs.push((
            format!("{kind}/tuned/monthly"),
            tuned_spec,
            Retrain::Periodic(Period::Monthly),
        ));
    }
    let study_points: Vec<(String, f64, f64)> = configs
        .par_iter()
        .map(|(id, spec, retrain)| {
            let strategy = Strategy::model(spec.clone(), OffsetConfig::default());
            let run = walk_forward(&train, &test, &strategy, *retrain)
                .unwrap_or_else(|e| panic!("{market}/{id}: {e}"));
            (id.clone(), run.pre_offset.mae, run.post_offset.revenue)
        })
        .collect();

    let benchmarks = vec![
        Strategy::fixed(TrailingWindow::Day),
        Strategy::fixed(TrailingWindow::Week),
        Strategy::fixed(TrailingWindow::Month),
        Strategy::lagged(Lag::Day),
        Strategy::lagged(Lag::Week),
    ];
    let mut best_benchmark_id = String::new();
    let mut best_benchmark_revenue = f64::NEG_INFINITY;
    for strategy in benchmarks {
        let run = walk_forward(&train, &test, &strategy, Retrain::Fixed).unwrap();
        if run.revenue() > best_benchmark_revenue {
            best_benchmark_revenue = run.revenue();
            best_benchmark_id = run.strategy_id;
        }
    }

    let (best_model_id, _, best_model_revenue) = study_points
        .iter()
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .cloned()
        .expect("model set is non-empty");
    MarketOutcome {
        best_model_id,
        best_model_revenue,
        best_benchmark_id,
        best_benchmark_revenue,
        study_points,
    }
}

fn pipeline() -> &'static BTreeMap<Market, MarketOutcome> {
    static OUT: OnceLock<BTreeMap<Market, MarketOutcome>> = OnceLock::new();
    OUT.get_or_init(|| {
        let dir = data_dir().expect("caller checks BIDCRAFT_DATA_DIR");
        Market::ALL
            .iter()
            .map(|&m| (m, run_market_pipeline(&dir, m)))
            .collect()
    })
}

#[test]
fn c10_pipeline_reproduces_revenue_ordering_and_levels() {
    if data_dir().is_none() {
        skip("criterion 10");
        return;
    }
    let out = pipeline();
    let published: [(Market, f64); 4] = [
        (Market::AfrrPos, 31090.99),
        (Market::AfrrNeg, 29448.57),
        (Market::MfrrPos, 5338.32),
        (Market::MfrrNeg, 19631.92),
    ];
    for (market, want) in published {
        let o = &out[&market];
        let rel = (o.best_model_revenue - want) / want;
        assert!(
            rel.abs() <= 0.15,
            "{market}: best model {} revenue {:.2} vs published {want:.2} ({:+.1} %)",
            o.best_model_id,
            o.best_model_revenue,
            rel * 100.0
        );
        assert!(
            o.best_model_revenue > o.best_benchmark_revenue,
            "{market}: best model {:.2} does not beat benchmark {} at {:.2}",
            o.best_model_revenue,
            o.best_benchmark_id,
            o.best_benchmark_revenue
        );
    }
    let rev = |m: Market| out[&m].best_model_revenue;
    assert!(
        rev(Market::AfrrPos) > rev(Market::AfrrNeg)
            && rev(Market::AfrrNeg) > rev(Market::MfrrNeg)
            && rev(Market::MfrrNeg) > rev(Market::MfrrPos),
        "revenue ordering aFRR+ > aFRR- > mFRR- > mFRR+ violated"
    );
    println!("[acceptance] criterion 10: PASS — revenue ordering and levels within ±15 %");
}

#[test]
fn c11_error_revenue_correlation_signs() {
    if data_dir().is_none() {
        skip("criterion 11");
        return;
    }
    let out = pipeline();
    for market in [Market::MfrrNeg, Market::AfrrPos, Market::MfrrPos] {
        let o = &out[&market];
        let x: Vec<f64> = o.study_points.iter().map(|p| p.1).collect();
        let y: Vec<f64> = o.study_points.iter().map(|p| p.2).collect();
        let (r, p) = pearson(&x, &y).unwrap();
        assert!(
            r < 0.0 && p < 0.05,
            "{market}: expected significant negative correlation, got r={r:.3} p={p:.4}"
        );
        println!("[acceptance]   {market}: r = {r:.3}, p = {p:.2e} over {} models", x.len());
    }
    println!("[acceptance] criterion 11: PASS — negative error-revenue correlation where published");
}
