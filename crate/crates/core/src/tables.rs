//! Reference convergence tables for the Black-Scholes, Kou and variance
//! gamma models, rerun side by side with previously published CTMC values.

use std::fmt::Write as _;

use crate::contract::Flavor;
use crate::ctmc::RatePolicy;
use crate::error::{Error, Result};
use crate::models::{BsParams, KouParams, ModelParams, VgParams};
use crate::pricing::PricingOptions;
use crate::study::{richardson, run_study, ContractConfig, PayoffKind, StudyConfig, StudyRow};

/// Wide grid range for perpetual contracts, whose values depend on where
/// the grid stops above the exercise boundary.
pub const WIDE_DOMAIN: (f64, f64) = (1.0, 1100.0);

/// What a cell must satisfy at its finest grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Shown for comparison only.
    Info,
    /// Relative error of the finest grid.
    Raw { tol: f64 },
    /// Relative errors of the finest grid and of the extrapolation from the
    /// two finest grids.
    RawAndExtrapolated { raw: f64, extrapolated: f64 },
    /// Relative error of the extrapolation from the two finest grids, or
    /// failing that an extrapolated error at most half the raw error and
    /// shrinking with `n`.
    Extrapolated { tol: f64 },
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub label: &'static str,
    pub study: StudyConfig,
    /// Previously published CTMC values on the same grids.
    pub reference: Vec<f64>,
    pub criterion: Criterion,
    /// Wall-clock budget in seconds for the finest grid.
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CellReport {
    pub cell: Cell,
    pub rows: Vec<StudyRow>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone)]
pub struct TableReport {
    pub name: String,
    pub cells: Vec<CellReport>,
}

impl TableReport {
    /// True when every graded cell passes.
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(|c| c.verdict.as_ref().is_none_or(|v| v.pass))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            render_cell(c, &mut out);
        }
        out
    }
}

fn render_cell(c: &CellReport, out: &mut String) {
    let bench = c.cell.study.benchmark.unwrap_or(f64::NAN);
    let _ = writeln!(out, "{} ({}), benchmark {bench:.4}", c.cell.label, c.cell.study.label);
    let _ = writeln!(
        out,
        "{:>6} {:>10} {:>10} {:>8} {:>10} {:>10} {:>8}",
        "n", "ours", "ref", "rel%", "extra", "ref-ex", "secs"
    );
    let ref_pts: Vec<(usize, f64)> = c.cell.study.grids.iter().copied().zip(c.cell.reference.iter().copied()).collect();
    let ref_ex = richardson(&ref_pts, c.cell.study.order).unwrap_or_default();
    let f = |v: Option<f64>, p: usize| v.map(|x| format!("{x:.p$}")).unwrap_or_else(|| "-".into());
    for (i, r) in c.rows.iter().enumerate() {
        let pe = i.checked_sub(1).and_then(|j| ref_ex.get(j).copied());
        let _ = writeln!(
            out,
            "{:>6} {:>10} {:>10} {:>8} {:>10} {:>10} {:>8.2}{}",
            r.n,
            f(r.price, 4),
            f(c.cell.reference.get(i).copied(), 4),
            f(r.rel_err.map(|e| 100.0 * e), 3),
            f(r.extrapolated, 4),
            f(pe, 4),
            r.seconds,
            r.error.as_deref().map(|e| format!("  {e}")).unwrap_or_default()
        );
    }
    match &c.verdict {
        Some(v) => {
            let _ = writeln!(out, "{}: {}\n", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        }
        None => {
            let _ = writeln!(out, "info only\n");
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

/// Grades the rows of a cell.
pub fn grade(criterion: Criterion, budget: Option<f64>, rows: &[StudyRow]) -> Option<Verdict> {
    if criterion == Criterion::Info {
        return None;
    }
    let Some(last) = rows.last() else {
        return Some(Verdict {
            pass: false,
            detail: "no grids".into(),
        });
    };
    if let Some(e) = &last.error {
        return Some(Verdict {
            pass: false,
            detail: format!("n={} failed: {e}", last.n),
        });
    }
    let raw = last.rel_err.unwrap_or(f64::INFINITY);
    let extra = last.extra_rel_err.unwrap_or(f64::INFINITY);
    let (mut pass, mut detail) = match criterion {
        Criterion::Info => unreachable!(),
        Criterion::Raw { tol } => (raw <= tol, format!("n={} raw {} (tol {})", last.n, pct(raw), pct(tol))),
        Criterion::RawAndExtrapolated { raw: rt, extrapolated: et } => (
            raw <= rt && extra <= et,
            format!("n={} raw {} (tol {}), extrapolated {} (tol {})", last.n, pct(raw), pct(rt), pct(extra), pct(et)),
        ),
        Criterion::Extrapolated { tol } => {
            let prev = rows.len().checked_sub(2).and_then(|i| rows[i].extra_rel_err);
            let shrinking = prev.is_some_and(|p| extra < p);
            let fallback = extra <= 0.5 * raw && shrinking;
            let how = if extra <= tol {
                "within tolerance"
            } else if fallback {
                "fallback: at most half the raw error and shrinking"
            } else {
                "outside tolerance"
            };
            (
                extra <= tol || fallback,
                format!("n={} extrapolated {} (tol {}), raw {}, {how}", last.n, pct(extra), pct(tol), pct(raw)),
            )
        }
    };
    if let Some(b) = budget {
        let ok = last.seconds <= b;
        pass &= ok;
        let _ = write!(detail, ", {:.2}s (budget {b}s)", last.seconds);
    }
    Some(Verdict { pass, detail })
}

fn cell(
    label: &'static str,
    model: ModelParams,
    spot: f64,
    contract: ContractConfig,
    grids: &[usize],
    reference: &[f64],
    benchmark: f64,
    options: PricingOptions,
) -> Cell {
    Cell {
        label,
        study: StudyConfig {
            label: format!("{} {label}", model.family()),
            model,
            contract,
            spot,
            grids: grids.to_vec(),
            options,
            benchmark: Some(benchmark),
            benchmark_note: None,
            order: 2.0,
            output: None,
            seed: 0,
        },
        reference: reference.to_vec(),
        criterion: Criterion::Info,
        budget: None,
    }
}

impl Cell {
    fn graded(mut self, criterion: Criterion, budget: f64) -> Self {
        self.criterion = criterion;
        self.budget = Some(budget);
        self
    }
}

fn call(strike: f64, barrier: f64, window: f64, maturity: Option<f64>, flavor: Flavor) -> ContractConfig {
    ContractConfig {
        payoff: PayoffKind::Call,
        strike,
        barrier,
        window,
        maturity,
        flavor,
    }
}

fn bs(sigma: f64, r_f: f64, dividend: f64, log_space: bool) -> ModelParams {
    ModelParams::Bs(BsParams {
        sigma,
        r_f,
        dividend,
        log_space,
    })
}

fn bs_cells() -> Vec<Cell> {
    let base = PricingOptions::default();
    let w = 1.0 / 12.0;
    vec![
        cell(
            "perpetual down-in",
            bs(0.3, 0.1, 0.05, true),
            90.0,
            call(95.0, 90.0, w, None, Flavor::DownIn),
            &[129, 161, 193, 225, 257],
            &[25.9747, 26.0946, 26.1658, 26.2087, 26.2346],
            26.3239,
            PricingOptions {
                domain: Some(WIDE_DOMAIN),
                ..base
            },
        )
        .graded(
            Criterion::RawAndExtrapolated {
                raw: 0.006,
                extrapolated: 0.0015,
            },
            2.0,
        ),
        cell(
            "perpetual down-out",
            bs(0.3, 0.1, 0.05, false),
            90.0,
            call(95.0, 90.0, w, None, Flavor::DownOut),
            &[661, 793, 925, 1057, 1189],
            &[10.4574, 10.4341, 10.4217, 10.4137, 10.4083],
            10.3882,
            PricingOptions { dd: 1.0 / 120.0, ..base },
        )
        .graded(
            Criterion::RawAndExtrapolated {
                raw: 0.004,
                extrapolated: 0.001,
            },
            30.0,
        ),
        cell(
            "finite down-in",
            bs(0.3, 0.05, 0.0, false),
            90.0,
            call(95.0, 90.0, w, Some(1.0), Flavor::DownIn),
            &[177, 193, 209, 225, 241],
            &[3.3169, 3.3230, 3.3275, 3.3309, 3.3333],
            3.3483,
            PricingOptions { dt: 1.0 / 60.0, ..base },
        )
        .graded(
            Criterion::RawAndExtrapolated {
                raw: 0.01,
                extrapolated: 0.003,
            },
            120.0,
        ),
        cell(
            "finite down-out",
            bs(0.4, 0.06, 0.1, false),
            105.0,
            call(100.0, 95.0, 1.0 / 15.0, Some(1.0), Flavor::DownOut),
            &[265, 397, 529, 661, 793],
            &[13.6015, 13.5501, 13.5332, 13.5256, 13.5216],
            13.5126,
            PricingOptions {
                dt: 1.0 / 60.0,
                dd: 1.0 / 150.0,
                ..base
            },
        )
        .graded(
            Criterion::RawAndExtrapolated {
                raw: 0.002,
                extrapolated: 0.0005,
            },
            300.0,
        ),
    ]
}

fn jump_cells(model: ModelParams, grids: [&[usize]; 4], reference: [&[f64]; 4], bench: [f64; 4], policy: RatePolicy) -> Vec<Cell> {
    let base = PricingOptions {
        rate_policy: policy,
        dt: 1.0 / 60.0,
        dd: 1.0 / 120.0,
        ..PricingOptions::default()
    };
    let wide = PricingOptions {
        domain: Some(WIDE_DOMAIN),
        ..base
    };
    let w = 1.0 / 12.0;
    let specs = [
        ("perpetual down-in", None, Flavor::DownIn, wide),
        ("perpetual down-out", None, Flavor::DownOut, wide),
        ("finite down-in", Some(1.0), Flavor::DownIn, base),
        ("finite down-out", Some(1.0), Flavor::DownOut, base),
    ];
    specs
        .into_iter()
        .enumerate()
        .map(|(i, (label, maturity, flavor, opts))| {
            cell(label, model, 90.0, call(95.0, 90.0, w, maturity, flavor), grids[i], reference[i], bench[i], opts)
        })
        .collect()
}

fn kou_cells() -> Vec<Cell> {
    let model = ModelParams::Kou(KouParams {
        sigma: 0.3,
        lambda: 3.0,
        eta_plus: 10.0,
        eta_minus: 10.0,
        p_plus: 0.5,
        p_minus: 0.5,
        r_f: 0.05,
        dividend: 0.0,
    });
    let mut cells = jump_cells(
        model,
        [
            &[97, 129, 161, 193, 225],
            &[397, 529, 661, 793, 925],
            &[161, 177, 193, 209, 225],
            &[529, 595, 661, 727, 793],
        ],
        [
            &[64.7315, 64.8809, 64.9492, 64.9862, 65.0085],
            &[15.6182, 15.4965, 15.4415, 15.4119, 15.3941],
            &[4.7502, 4.7583, 4.7642, 4.7685, 4.7716],
            &[9.1261, 9.1118, 9.1013, 9.0934, 9.0873],
        ],
        [65.0695, 15.3456, 4.7907, 9.0537],
        RatePolicy::Strict,
    );
    cells[0] = cells[0].clone().graded(Criterion::Raw { tol: 0.003 }, 10.0);
    cells
}

fn vg_cells() -> Vec<Cell> {
    let model = ModelParams::Vg(VgParams {
        sigma: 0.1213,
        nu: 0.1686,
        theta: -0.1436,
        r_f: 0.05,
        dividend: 0.0,
    });
    // pure jump: the drift has no diffusion to balance it, so upwind it
    let mut cells = jump_cells(
        model,
        [
            &[353, 385, 417, 449, 481],
            &[1849, 1915, 1981, 2047, 2113],
            &[353, 385, 417, 449, 481],
            &[1123, 1189, 1255, 1321, 1387],
        ],
        [
            &[52.5464, 52.5314, 52.5183, 52.5070, 52.4972],
            &[20.7064, 20.7114, 20.7160, 20.7203, 20.7244],
            &[1.0847, 1.0877, 1.0901, 1.0921, 1.0938],
            &[3.8158, 3.7957, 3.7777, 3.7614, 3.7467],
        ],
        [52.4163, 20.7958, 1.1137, 3.5011],
        RatePolicy::Upwind,
    );
    cells[3] = cells[3].clone().graded(Criterion::Extrapolated { tol: 0.01 }, 900.0);
    cells
}

/// Table names accepted by [`table_cells`].
pub const TABLES: [&str; 3] = ["bs", "kou", "vg"];

pub fn table_cells(name: &str) -> Result<Vec<Cell>> {
    match name {
        "bs" => Ok(bs_cells()),
        "kou" => Ok(kou_cells()),
        "vg" => Ok(vg_cells()),
        other => Err(Error::InvalidParameter(format!("unknown table '{other}', expected one of {TABLES:?}"))),
    }
}

/// Reruns one cell, pricing up to `jobs` grids at a time.
pub fn run_cell(cell: Cell, jobs: usize) -> Result<CellReport> {
    let rows = run_study(&cell.study, jobs)?;
    let verdict = grade(cell.criterion, cell.budget, &rows);
    Ok(CellReport { cell, rows, verdict })
}

/// Reruns every cell of a table. Cells run one after another so the
/// reported timings are not distorted by each other.
pub fn reproduce_table(name: &str, jobs: usize, only_graded: bool) -> Result<TableReport> {
    let cells = table_cells(name)?
        .into_iter()
        .filter(|c| !only_graded || c.criterion != Criterion::Info)
        .map(|c| run_cell(c, jobs))
        .collect::<Result<Vec<_>>>()?;
    Ok(TableReport {
        name: name.to_string(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, rel: f64, extra: Option<f64>, seconds: f64) -> StudyRow {
        StudyRow {
            n,
            price: Some(1.0),
            abs_err: Some(rel),
            rel_err: Some(rel),
            seconds,
            extrapolated: extra.map(|_| 1.0),
            extra_abs_err: extra,
            extra_rel_err: extra,
            error: None,
        }
    }

    #[test]
    fn tables_are_consistent() {
        for t in TABLES {
            let cells = table_cells(t).unwrap();
            assert_eq!(cells.len(), 4);
            for c in &cells {
                assert_eq!(c.reference.len(), c.study.grids.len());
                c.study.validate().unwrap();
            }
        }
        assert!(table_cells("heston").is_err());
    }

    #[test]
    fn grading() {
        let rows = vec![row(100, 0.01, None, 0.1), row(200, 0.004, Some(0.0008), 0.2)];
        assert!(grade(Criterion::Info, None, &rows).is_none());
        assert!(grade(Criterion::Raw { tol: 0.005 }, None, &rows).unwrap().pass);
        assert!(!grade(Criterion::Raw { tol: 0.003 }, None, &rows).unwrap().pass);
        let both = Criterion::RawAndExtrapolated {
            raw: 0.005,
            extrapolated: 0.001,
        };
        assert!(grade(both, Some(1.0), &rows).unwrap().pass);
        assert!(!grade(both, Some(0.1), &rows).unwrap().pass);
    }

    #[test]
    fn extrapolated_fallback() {
        let shrinking = vec![row(100, 0.05, None, 0.0), row(200, 0.04, Some(0.03), 0.0), row(300, 0.04, Some(0.015), 0.0)];
        let v = grade(Criterion::Extrapolated { tol: 0.01 }, None, &shrinking).unwrap();
        assert!(v.pass && v.detail.contains("fallback"));
        let growing = vec![row(200, 0.04, Some(0.01), 0.0), row(300, 0.04, Some(0.015), 0.0)];
        assert!(!grade(Criterion::Extrapolated { tol: 0.01 }, None, &growing).unwrap().pass);
    }
}
