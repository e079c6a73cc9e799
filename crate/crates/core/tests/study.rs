//! Convergence studies on the Black-Scholes perpetual down-in contract.

use parisian::models::{BsParams, ModelParams};
use parisian::pricing::PricingOptions;
use parisian::study::*;
use parisian::tables::WIDE_DOMAIN;
use parisian::Flavor;

fn perpetual_downin(grids: Vec<usize>, benchmark: Option<f64>) -> StudyConfig {
    StudyConfig {
        label: "bs perpetual down-in".into(),
        model: ModelParams::Bs(BsParams {
            sigma: 0.3,
            r_f: 0.1,
            dividend: 0.05,
            log_space: true,
        }),
        contract: ContractConfig {
            payoff: PayoffKind::Call,
            strike: 95.0,
            barrier: 90.0,
            window: 1.0 / 12.0,
            maturity: None,
            flavor: Flavor::DownIn,
        },
        spot: 90.0,
        grids,
        options: PricingOptions {
            domain: Some(WIDE_DOMAIN),
            ..Default::default()
        },
        benchmark,
        benchmark_note: Some("perpetual down-in reference".into()),
        order: 2.0,
        output: None,
        seed: 7,
    }
}

#[test]
fn errors_decay_and_extrapolation_is_tight() {
    let rows = run_study(&perpetual_downin(vec![129, 161, 193, 225, 257], Some(26.3239)), 2).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r.abs_err.unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    let last = rows.last().unwrap();
    assert!(last.extra_rel_err.unwrap() <= 5e-4, "{:?}", last.extra_rel_err);
    assert!((last.extrapolated.unwrap() - 26.32).abs() < 0.02);
}

#[test]
fn observed_order_against_finest_grid() {
    let rows = run_study(&perpetual_downin(vec![256, 512, 1024, 4096], None), 2).unwrap();
    let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.price.unwrap())).collect();
    let q = observed_orders(&pts);
    assert!(!q.is_empty());
    for o in q {
        assert!((0.8..=2.5).contains(&o), "observed order {o}");
    }
}

#[test]
fn missing_benchmark_leaves_error_columns_empty() {
    let rows = run_study(&perpetual_downin(vec![65, 97], None), 1).unwrap();
    assert!(rows.iter().all(|r| r.price.is_some() && r.abs_err.is_none() && r.rel_err.is_none()));
    assert!(rows[1].extrapolated.is_some() && rows[1].extra_abs_err.is_none());
}

fn without_timing(csv: &[u8]) -> String {
    let text = std::str::from_utf8(csv).unwrap();
    let col = STUDY_HEADER.split(',').position(|c| c == "seconds").unwrap();
    text.lines()
        .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != col).map(|(_, c)| c).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn output_is_deterministic_apart_from_timing() {
    let cfg = perpetual_downin(vec![65, 97, 129], Some(26.3239));
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_study_csv(&run_study(&cfg, 1).unwrap(), cfg.benchmark, &mut a).unwrap();
    write_study_csv(&run_study(&cfg, 3).unwrap(), cfg.benchmark, &mut b).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));
    let mut plot = Vec::new();
    write_plot_csv(&run_study(&cfg, 1).unwrap(), &mut plot).unwrap();
    assert_eq!(String::from_utf8(plot).unwrap().lines().count(), 4);
}

#[test]
fn rows_keep_input_order_under_parallelism() {
    let rows = run_study(&perpetual_downin(vec![33, 65, 97, 129, 161], None), 4).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![33, 65, 97, 129, 161]);
}
