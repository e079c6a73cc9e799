//! Convergence studies over the grid size, with pairwise Richardson
//! extrapolation.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::{ContractSpec, Flavor, Payoff};
use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::pricing::{price, PricingOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    #[default]
    Call,
    Put,
}

/// Serializable contract terms; the discount rate comes from the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractConfig {
    #[serde(default)]
    pub payoff: PayoffKind,
    pub strike: f64,
    pub barrier: f64,
    pub window: f64,
    /// Absent for a perpetual contract.
    #[serde(default)]
    pub maturity: Option<f64>,
    pub flavor: Flavor,
}

impl ContractConfig {
    pub fn to_spec(&self, rate: f64) -> ContractSpec {
        ContractSpec {
            payoff: match self.payoff {
                PayoffKind::Call => Payoff::Call(self.strike),
                PayoffKind::Put => Payoff::Put(self.strike),
            },
            barrier: self.barrier,
            window: self.window,
            maturity: self.maturity,
            rate,
            flavor: self.flavor,
        }
    }
}

fn default_order() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub label: String,
    pub model: ModelParams,
    pub contract: ContractConfig,
    pub spot: f64,
    /// Grid sizes `n`, strictly increasing.
    pub grids: Vec<usize>,
    /// Everything but `n`, which each row overrides.
    #[serde(default)]
    pub options: PricingOptions,
    #[serde(default)]
    pub benchmark: Option<f64>,
    #[serde(default)]
    pub benchmark_note: Option<String>,
    /// Richardson order `q` in `p* = (n₂^q p₂ - n₁^q p₁) / (n₂^q - n₁^q)`.
    #[serde(default = "default_order")]
    pub order: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Recorded with the results; the pricers themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grids.is_empty() {
            return Err(Error::InvalidParameter("study needs at least one grid".into()));
        }
        if self.grids.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("grid list must be strictly increasing".into()));
        }
        if !(self.spot > 0.0) || !self.spot.is_finite() {
            return Err(Error::InvalidParameter(format!("spot must be positive, got {}", self.spot)));
        }
        if !(self.order > 0.0) || !self.order.is_finite() {
            return Err(Error::InvalidParameter(format!("extrapolation order must be positive, got {}", self.order)));
        }
        if let Some(b) = self.benchmark {
            if !b.is_finite() {
                return Err(Error::InvalidParameter("benchmark must be finite".into()));
            }
        }
        self.contract.to_spec(self.model.rate()).validate()
    }
}

/// One line of a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub price: Option<f64>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    pub seconds: f64,
    /// Extrapolated from this grid and the previous one.
    pub extrapolated: Option<f64>,
    pub extra_abs_err: Option<f64>,
    pub extra_rel_err: Option<f64>,
    pub error: Option<String>,
}

/// Pairwise extrapolation of consecutive `(n, price)` points; entry `i`
/// combines points `i` and `i + 1`.
pub fn richardson(points: &[(usize, f64)], order: f64) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("extrapolation needs at least two grids".into()));
    }
    points
        .windows(2)
        .map(|w| {
            let ((n1, p1), (n2, p2)) = (w[0], w[1]);
            if n1 == n2 {
                return Err(Error::InvalidParameter(format!("repeated grid size {n1}")));
            }
            let (a, b) = ((n1 as f64).powf(order), (n2 as f64).powf(order));
            Ok((b * p2 - a * p1) / (b - a))
        })
        .collect()
}

/// Observed convergence orders against the finest point taken as the
/// limit: slopes of `log |p(n) - p_finest|` against `log n` between
/// consecutive coarser grids.
pub fn observed_orders(points: &[(usize, f64)]) -> Vec<f64> {
    let Some(&(_, limit)) = points.last() else {
        return Vec::new();
    };
    let coarse = &points[..points.len() - 1];
    coarse
        .windows(2)
        .filter_map(|w| {
            let (e1, e2) = ((w[0].1 - limit).abs(), (w[1].1 - limit).abs());
            (e1 > 0.0 && e2 > 0.0).then(|| (e1 / e2).ln() / (w[1].0 as f64 / w[0].0 as f64).ln())
        })
        .collect()
}

fn errors(benchmark: Option<f64>, value: Option<f64>) -> (Option<f64>, Option<f64>) {
    match (benchmark, value) {
        (Some(b), Some(v)) => {
            let abs = (v - b).abs();
            (Some(abs), (b != 0.0).then(|| abs / b.abs()))
        }
        _ => (None, None),
    }
}

/// Prices the contract on every grid of the study, up to `jobs` grids at a
/// time. Pricing failures are recorded per row.
pub fn run_study(cfg: &StudyConfig, jobs: usize) -> Result<Vec<StudyRow>> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let contract = cfg.contract.to_spec(cfg.model.rate());
    let run_one = |n: usize| {
        let opts = PricingOptions { n, ..cfg.options };
        let start = Instant::now();
        let result = price(&model, &contract, cfg.spot, &opts);
        let seconds = start.elapsed().as_secs_f64();
        log::info!("{} n={n}: {:.3}s", cfg.label, seconds);
        (n, result.map(|v| v.price), seconds)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let raw: Vec<_> = pool.install(|| cfg.grids.par_iter().map(|&n| run_one(n)).collect());
    let mut rows: Vec<StudyRow> = raw
        .into_iter()
        .map(|(n, res, seconds)| {
            let (price, error) = match res {
                Ok(p) => (Some(p), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let (abs_err, rel_err) = errors(cfg.benchmark, price);
            StudyRow {
                n,
                price,
                abs_err,
                rel_err,
                seconds,
                extrapolated: None,
                extra_abs_err: None,
                extra_rel_err: None,
                error,
            }
        })
        .collect();
    for i in 1..rows.len() {
        if let (Some(p1), Some(p2)) = (rows[i - 1].price, rows[i].price) {
            let x = richardson(&[(rows[i - 1].n, p1), (rows[i].n, p2)], cfg.order)?[0];
            let (a, r) = errors(cfg.benchmark, Some(x));
            rows[i].extrapolated = Some(x);
            rows[i].extra_abs_err = a;
            rows[i].extra_rel_err = r;
        }
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10}")).unwrap_or_default()
}

/// Column header of [`write_study_csv`].
pub const STUDY_HEADER: &str = "n,benchmark,price,abs_err,rel_err,seconds,extrapolated,extra_abs_err,extra_rel_err,error";

/// Writes study rows as CSV with the columns of [`STUDY_HEADER`].
pub fn write_study_csv<W: Write>(rows: &[StudyRow], benchmark: Option<f64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{STUDY_HEADER}")?;
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            w,
            "{},{},{},{},{},{:.4},{},{},{},{}",
            r.n,
            cell(benchmark),
            cell(r.price),
            cell(r.abs_err),
            cell(r.rel_err),
            r.seconds,
            cell(r.extrapolated),
            cell(r.extra_abs_err),
            cell(r.extra_rel_err),
            err
        )?;
    }
    Ok(())
}

/// Log-log error series for plotting.
pub fn write_plot_csv<W: Write>(rows: &[StudyRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n,log10_n,abs_err,log10_abs_err,extra_abs_err,log10_extra_abs_err")?;
    let lg = |v: Option<f64>| v.filter(|x| *x > 0.0).map(f64::log10);
    for r in rows {
        writeln!(
            w,
            "{},{:.10},{},{},{},{}",
            r.n,
            (r.n as f64).log10(),
            cell(r.abs_err),
            cell(lg(r.abs_err)),
            cell(r.extra_abs_err),
            cell(lg(r.extra_abs_err))
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::models::BsParams;

    #[test]
    fn richardson_cases() {
        assert_eq!(richardson(&[(10, 3.0), (20, 3.0)], 2.0).unwrap(), vec![3.0]);
        let p = |n: usize| 1.5 + 7.0 / (n * n) as f64;
        let x = richardson(&[(100, p(100)), (140, p(140)), (200, p(200))], 2.0).unwrap();
        assert!(x.iter().all(|v| (v - 1.5).abs() < 1e-12));
        assert!(richardson(&[(10, 1.0)], 2.0).is_err());
        assert!(richardson(&[(10, 1.0), (10, 2.0)], 2.0).is_err());
    }

    #[test]
    fn reference_pair() {
        let x = richardson(&[(225, 26.2087), (257, 26.2346)], 2.0).unwrap()[0];
        assert!((x - 26.3196).abs() < 1e-4);
    }

    #[test]
    fn orders_of_synthetic_sequence() {
        let pts: Vec<(usize, f64)> = [64, 128, 256, 100_000].iter().map(|&n| (n, 2.0 + 1.0 / (n * n) as f64)).collect();
        let q = observed_orders(&pts);
        assert_eq!(q.len(), 2);
        assert!(q.iter().all(|v| (v - 2.0).abs() < 0.01));
    }

    fn small_study() -> StudyConfig {
        StudyConfig {
            label: "bs".into(),
            model: ModelParams::Bs(BsParams {
                sigma: 0.3,
                r_f: 0.1,
                dividend: 0.05,
                log_space: false,
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
            grids: vec![65, 97, 129],
            options: PricingOptions::default(),
            benchmark: None,
            benchmark_note: None,
            order: 2.0,
            output: None,
            seed: 0,
        }
    }

    #[test]
    fn study_without_benchmark_leaves_errors_empty() {
        let rows = run_study(&small_study(), 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.price.is_some() && r.abs_err.is_none()));
        assert!(rows[0].extrapolated.is_none() && rows[2].extrapolated.is_some());
        let mut out = Vec::new();
        write_study_csv(&rows, None, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(STUDY_HEADER));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn failures_are_recorded_per_row() {
        let mut cfg = small_study();
        cfg.options.domain = Some((91.0, 300.0));
        let rows = run_study(&cfg, 1).unwrap();
        assert!(rows.iter().all(|r| r.price.is_none() && r.error.is_some()));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small_study();
        cfg.grids = vec![129, 97];
        assert!(cfg.validate().is_err());
        cfg.grids = vec![];
        assert!(cfg.validate().is_err());
        let mut cfg = small_study();
        cfg.order = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kv_study_config() {
        let text = "label = demo\nmodel.model = bs\nmodel.sigma = 0.3\nmodel.r_f = 0.1\nmodel.dividend = 0.05\n\
                    contract.strike = 95\ncontract.barrier = 90\ncontract.window = 0.0833333333\ncontract.flavor = down-in\n\
                    spot = 90\ngrids = 65, 97\noptions.domain = 1, 1100\nbenchmark = 26.3239\n";
        let cfg: StudyConfig = parse_config(text).unwrap();
        assert_eq!(cfg.grids, vec![65, 97]);
        assert_eq!(cfg.options.domain, Some((1.0, 1100.0)));
        assert_eq!(cfg.order, 2.0);
        assert!(cfg.contract.maturity.is_none());
        cfg.validate().unwrap();
    }
}
