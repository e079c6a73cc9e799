use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use parisian::config::{from_value, merge, parse_value};
use parisian::oracle::suites::{run_suite, SUITES};
use parisian::pricing::{price, PricingOptions};
use parisian::study::{run_study, write_plot_csv, write_study_csv, ContractConfig, StudyConfig};
use parisian::tables::{reproduce_table, TABLES};
use parisian::models::ModelParams;
use parisian::Flavor;

#[derive(Parser)]
#[command(name = "parisian", version, about = "American Parisian option pricing by CTMC approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one contract.
    Price(PriceArgs),
    /// Price one contract over a list of grid sizes.
    Study(StudyArgs),
    /// Rerun a reference convergence table and grade it.
    ReproduceTable(TableArgs),
    /// Run randomised comparisons against the reference solvers.
    Verify(VerifyArgs),
}

#[derive(Args, Default)]
struct ContractFlags {
    /// Key-value or JSON file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model family with its reference parameters: bs, kou or vg.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Risk-free rate.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    dividend: Option<f64>,
    /// Black-Scholes on a log-price grid.
    #[arg(long)]
    log_space: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta_plus: Option<f64>,
    #[arg(long)]
    eta_minus: Option<f64>,
    /// Probability of an upward jump; the downward one is its complement.
    #[arg(long)]
    p_plus: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// down-in or down-out.
    #[arg(long)]
    flavor: Option<String>,
    /// `perpetual` or a maturity in years.
    #[arg(long)]
    maturity: Option<String>,
    /// call or put.
    #[arg(long)]
    payoff: Option<String>,
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long)]
    barrier: Option<f64>,
    /// Parisian window in years.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    spot: Option<f64>,
    /// Grid intervals.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    dd: Option<f64>,
    /// Grid range in price units, `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    domain: Option<Vec<f64>>,
    /// auto, howard, psor or lemke.
    #[arg(long)]
    solver: Option<String>,
    /// strict, clamp or upwind.
    #[arg(long)]
    rate_policy: Option<String>,
    /// Shorthand for `--rate-policy clamp`.
    #[arg(long)]
    clamp_rates: bool,
    /// Discount the finite down-in recursion per time tick.
    #[arg(long)]
    discount_ticks: bool,
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    c: ContractFlags,
    /// Write every state's value as CSV.
    #[arg(long)]
    full_surface: Option<PathBuf>,
    /// Write the generator as `i,j,rate` CSV.
    #[arg(long)]
    dump_generator: Option<PathBuf>,
    /// Also report delta and gamma by bumping the spot on a fixed grid range.
    #[arg(long)]
    greeks: bool,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    c: ContractFlags,
    /// Grid sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    #[arg(long)]
    benchmark: Option<f64>,
    #[arg(long)]
    order: Option<f64>,
    /// Grids priced at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Study CSV; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Log-log error series CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    /// bs, kou or vg.
    name: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Skip the cells shown for comparison only.
    #[arg(long)]
    graded_only: bool,
    /// Also write all rows as CSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// lcp, kernels, dp or all.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Multiplies instance and path counts.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn preset(name: &str) -> Result<Value> {
    Ok(match name {
        "bs" => json!({"model": "bs", "sigma": 0.3, "r_f": 0.1, "dividend": 0.05}),
        "kou" => json!({"model": "kou", "sigma": 0.3, "lambda": 3.0, "eta_plus": 10.0, "eta_minus": 10.0,
                        "p_plus": 0.5, "p_minus": 0.5, "r_f": 0.05, "dividend": 0.0}),
        "vg" => json!({"model": "vg", "sigma": 0.1213, "nu": 0.1686, "theta": -0.1436, "r_f": 0.05, "dividend": 0.0}),
        other => bail!("unknown model '{other}', expected bs, kou or vg"),
    })
}

fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_value(&text).with_context(|| format!("parsing {}", path.display()))
}

fn set(obj: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        obj.insert(key.to_string(), v);
    }
}

/// Merges defaults, the config file and the flags into one configuration
/// object with `model`, `contract`, `spot` and `options` sections.
fn assemble(c: &ContractFlags) -> Result<Value> {
    let mut cfg = json!({
        "model": preset("bs")?,
        "contract": {"payoff": "call", "strike": 95.0, "barrier": 90.0, "window": 1.0 / 12.0, "flavor": "down-in"},
        "spot": 90.0,
        "options": {},
    });
    if let Some(path) = &c.config {
        let mut file = read_config(path)?;
        // a model section names its family, so it replaces the default outright
        if let Some(m) = file.as_object_mut().and_then(|o| o.remove("model")) {
            cfg["model"] = m;
        }
        merge(&mut cfg, file);
    }
    if let Some(name) = &c.model {
        cfg["model"] = preset(name)?;
    }
    let num = |x: Option<f64>| x.map(Value::from);
    let m = cfg["model"].as_object_mut().context("model section must be an object")?;
    set(m, "sigma", num(c.sigma));
    set(m, "r_f", num(c.rate));
    set(m, "dividend", num(c.dividend));
    set(m, "lambda", num(c.lambda));
    set(m, "eta_plus", num(c.eta_plus));
    set(m, "eta_minus", num(c.eta_minus));
    set(m, "p_plus", num(c.p_plus));
    set(m, "p_minus", num(c.p_plus.map(|p| 1.0 - p)));
    set(m, "nu", num(c.nu));
    set(m, "theta", num(c.theta));
    if c.log_space {
        m.insert("log_space".into(), true.into());
    }
    let k = cfg["contract"].as_object_mut().context("contract section must be an object")?;
    set(k, "flavor", c.flavor.clone().map(Value::from));
    set(k, "payoff", c.payoff.clone().map(Value::from));
    set(k, "strike", num(c.strike));
    set(k, "barrier", num(c.barrier));
    set(k, "window", num(c.window));
    match c.maturity.as_deref() {
        None => {}
        Some("perpetual") => {
            k.insert("maturity".into(), Value::Null);
        }
        Some(t) => {
            let t: f64 = t.parse().with_context(|| format!("maturity must be 'perpetual' or a number, got '{t}'"))?;
            k.insert("maturity".into(), t.into());
        }
    }
    if let Some(s) = c.spot {
        cfg["spot"] = s.into();
    }
    let o = cfg["options"].as_object_mut().context("options section must be an object")?;
    set(o, "n", c.n.map(Value::from));
    set(o, "dt", num(c.dt));
    set(o, "dd", num(c.dd));
    if let Some(d) = &c.domain {
        if d.len() != 2 {
            bail!("--domain takes two values, lo,hi");
        }
        o.insert("domain".into(), d.clone().into());
    }
    set(o, "solver", c.solver.clone().map(Value::from));
    set(o, "rate_policy", c.rate_policy.clone().map(Value::from));
    if c.clamp_rates {
        o.insert("rate_policy".into(), "clamp".into());
    }
    if c.discount_ticks {
        o.insert("discount_ticks".into(), true.into());
    }
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_price(a: &PriceArgs) -> Result<ExitCode> {
    let cfg = assemble(&a.c)?;
    let params: ModelParams = from_value(cfg["model"].clone())?;
    let contract: ContractConfig = from_value(cfg["contract"].clone())?;
    let spot = cfg["spot"].as_f64().context("spot must be a number")?;
    let opts: PricingOptions = from_value(cfg["options"].clone())?;
    let model = params.build()?;
    let spec = contract.to_spec(params.rate());
    let start = Instant::now();
    let v = price(&model, &spec, spot, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(p) = &a.dump_generator {
        v.lattice.generator.write_csv(output(Some(p))?)?;
    }
    if let Some(p) = &a.full_surface {
        v.write_surface(&model, output(Some(p))?)?;
    }
    let maturity = spec.maturity.map(|t| t.to_string()).unwrap_or_else(|| "perpetual".into());
    let flavor = match spec.flavor {
        Flavor::DownIn => "down-in",
        Flavor::DownOut => "down-out",
    };
    let mut out = output(None)?;
    if a.greeks {
        // keep the grid range fixed so the bump moves only the spot
        let fixed = PricingOptions {
            domain: Some(opts.domain.unwrap_or((spot / 5.0, 4.0 * spot))),
            ..opts
        };
        let h = 0.01 * spot;
        let up = price(&model, &spec, spot + h, &fixed)?.price;
        let down = price(&model, &spec, spot - h, &fixed)?.price;
        let mid = price(&model, &spec, spot, &fixed)?.price;
        let delta = (up - down) / (2.0 * h);
        let gamma = (up - 2.0 * mid + down) / (h * h);
        writeln!(out, "model,flavor,maturity,n,spot,price,seconds,delta,gamma")?;
        writeln!(out, "{},{flavor},{maturity},{},{spot},{},{seconds:.4},{delta},{gamma}", model.name, opts.n, v.price)?;
    } else {
        writeln!(out, "model,flavor,maturity,n,spot,price,seconds")?;
        writeln!(out, "{},{flavor},{maturity},{},{spot},{},{seconds:.4}", model.name, opts.n, v.price)?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_study(a: &StudyArgs) -> Result<ExitCode> {
    let mut cfg = assemble(&a.c)?;
    let o = cfg.as_object_mut().context("configuration must be an object")?;
    set(o, "grids", a.grids.clone().map(Value::from));
    set(o, "benchmark", a.benchmark.map(Value::from));
    set(o, "order", a.order.map(Value::from));
    let study: StudyConfig = from_value(cfg)?;
    let rows = run_study(&study, a.jobs)?;
    let path = a.output.clone().or_else(|| study.output.clone());
    let mut out = output(path.as_deref())?;
    write_study_csv(&rows, study.benchmark, &mut out)?;
    out.flush()?;
    if let Some(p) = &a.plot {
        let mut w = output(Some(p))?;
        write_plot_csv(&rows, &mut w)?;
        w.flush()?;
    }
    for r in rows.iter().filter(|r| r.error.is_some()) {
        log::error!("n={}: {}", r.n, r.error.as_deref().unwrap_or_default());
    }
    Ok(if rows.iter().all(|r| r.error.is_none()) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_table(a: &TableArgs) -> Result<ExitCode> {
    if !TABLES.contains(&a.name.as_str()) {
        bail!("unknown table '{}', expected one of {TABLES:?}", a.name);
    }
    let report = reproduce_table(&a.name, a.jobs, a.graded_only)?;
    print!("{}", report.render());
    if let Some(p) = &a.output {
        let mut w = output(Some(p))?;
        writeln!(w, "cell,{}", parisian::study::STUDY_HEADER)?;
        for c in &report.cells {
            let mut buf = Vec::new();
            write_study_csv(&c.rows, c.cell.study.benchmark, &mut buf)?;
            for line in String::from_utf8(buf)?.lines().skip(1) {
                writeln!(w, "{},{line}", c.cell.label)?;
            }
        }
        w.flush()?;
    }
    let pass = report.all_pass();
    println!("{}: {}", a.name, if pass { "all graded cells pass" } else { "some graded cells fail" });
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_verify(a: &VerifyArgs) -> Result<ExitCode> {
    if !SUITES.contains(&a.suite.as_str()) {
        bail!("unknown suite '{}', expected one of {SUITES:?}", a.suite);
    }
    let mut ok = true;
    for (name, check) in run_suite(&a.suite, a.scale, a.seed)? {
        match check {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                ok = false;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Price(a) => cmd_price(a),
        Command::Study(a) => cmd_study(a),
        Command::ReproduceTable(a) => cmd_table(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
