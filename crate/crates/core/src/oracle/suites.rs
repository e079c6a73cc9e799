//! Randomised comparisons of the pricers against the reference
//! computations, shared by `parisian verify` and the test suites. Each check
//! returns a one-line summary or a failure message.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocks::shifted_generator;
use crate::contract::{ContractSpec, Flavor, Payoff};
use crate::ctmc::{simulate_paths, GeneratorMatrix, RatePolicy, SimulationSpec, TimeGrid};
use crate::downin::{parisian_transform, price_finite_downin, price_perpetual_downin, vanilla_american_perpetual};
use crate::downout::{price_finite_downout, price_perpetual_downout, AugmentedOperator, AugmentedStateSpace};
use crate::models::{BsParams, KouParams, ModelParams, ModelSpec, VgParams};
use crate::numerics::{complementarity_residual, lemke_solve, LcpOperator, LcpStatus, SolverKind};
use crate::pricing::{build_lattice, PricingOptions};
use crate::oracle::lcp::brute_force_lcp;
use crate::oracle::{finite_downin_exact, finite_downout_dp, value_iterate_american, UniformizedChain};

pub type Check = Result<String, String>;

/// Random conservative chain with absorbing end states. Interior states move
/// to their neighbours and, when `jumps` is set, occasionally further away.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize, jumps: bool) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n, n);
    for i in 1..n - 1 {
        g[(i, i - 1)] = rng.random_range(0.5..4.0);
        g[(i, i + 1)] = rng.random_range(0.5..4.0);
        if jumps {
            for j in 0..n {
                if i.abs_diff(j) > 1 && rng.random::<f64>() < 0.3 {
                    g[(i, j)] = rng.random_range(0.0..1.0);
                }
            }
        }
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
        g[(i, i)] = -s;
    }
    g
}

pub fn call_payoff(n: usize, strike: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 - strike as f64 + 0.5).max(0.0)).collect()
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Positive definite, hence P-matrix, LCP instances against enumeration.
pub fn lemke_vs_enumeration(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let n = rng.random_range(1..=8);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let skew = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.1 + (&skew - skew.transpose());
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let want = brute_force_lcp(&a, &q).ok_or(format!("case {case}: enumeration found no solution"))?;
        let got = lemke_solve(&a, &q, &Default::default()).map_err(|e| format!("case {case}: {e}"))?;
        if got.status != LcpStatus::Solved {
            return Err(format!("case {case}: Lemke ended with {:?}", got.status));
        }
        let active = |z: &[f64]| z.iter().map(|&v| v > 1e-9).collect::<Vec<_>>();
        if active(&got.z) != active(&want) {
            return Err(format!("case {case}: active sets differ"));
        }
        worst = worst.max(rel_gap(&got.z, &want));
    }
    if worst > 1e-9 {
        return Err(format!("max |z - z*| = {worst:.2e}"));
    }
    Ok(format!("{instances} instances, max |z - z*| = {worst:.1e}"))
}

/// Perpetual American values from the LCP against value iteration.
pub fn vanilla_vs_value_iteration(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let n = rng.random_range(3..=40);
        let jumps = rng.random::<bool>();
        let g = random_chain(&mut rng, n, jumps);
        let r = rng.random_range(0.02..0.3);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let gm = GeneratorMatrix::from_dense(&g, 0.0).map_err(|e| e.to_string())?;
        let got = vanilla_american_perpetual(&gm, &f, r, SolverKind::Auto).map_err(|e| format!("case {case}: {e}"))?;
        let chain = UniformizedChain::new(&g).map_err(|e| e.to_string())?;
        let want = value_iterate_american(&chain, &f, r, 1e-12).map_err(|e| e.to_string())?;
        worst = worst.max(rel_gap(&got, &want));
    }
    if worst > 1e-6 {
        return Err(format!("max gap {worst:.2e}"));
    }
    Ok(format!("{instances} chains, max gap {worst:.1e}"))
}

/// One random finite-maturity instance: chain, barrier index, window, age
/// step, time step and slice count.
pub struct FiniteInstance {
    pub g: DMatrix<f64>,
    pub l: usize,
    pub window: f64,
    pub dd: f64,
    pub dt: f64,
    pub maturity: f64,
    pub r: f64,
    pub f: Vec<f64>,
}

pub fn finite_instance(rng: &mut ChaCha8Rng) -> FiniteInstance {
    let n = rng.random_range(4..=12);
    let jumps = rng.random::<bool>();
    let g = random_chain(rng, n, jumps);
    let l = rng.random_range(1..n - 1);
    let dd = 0.05;
    // one to three age steps before knock-out, so at most four age levels
    let window = dd * rng.random_range(1..=3) as f64;
    let dt = 0.1;
    let maturity = dt * rng.random_range(1..=5) as f64;
    let strike = rng.random_range(0..n);
    FiniteInstance {
        f: call_payoff(n, strike),
        g,
        l,
        window,
        dd,
        dt,
        maturity,
        r: rng.random_range(0.01..0.2),
    }
}

/// Finite down-in surfaces against the exact joint-lattice computation.
pub fn finite_downin_vs_lattice(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let p = finite_instance(&mut rng);
        let gm = GeneratorMatrix::from_dense(&p.g, 0.0).map_err(|e| e.to_string())?;
        let time = TimeGrid::new(p.dt, p.maturity).map_err(|e| e.to_string())?;
        for tick in [0.0, p.r] {
            let got = price_finite_downin(&gm, p.l, p.window, &p.f, p.r, tick, &time, SolverKind::Auto, Some(1 << 16), true)
                .map_err(|e| format!("case {case}: {e}"))?;
            let want = finite_downin_exact(&p.g, p.l, p.window, &p.f, p.r, tick, p.dt, time.n_slices)
                .map_err(|e| format!("case {case}: {e}"))?;
            for s in 0..time.n_slices {
                worst = worst.max(rel_gap(&got.discounted[s], &want[s]));
            }
        }
    }
    if worst > 1e-5 {
        return Err(format!("max gap {worst:.2e}"));
    }
    Ok(format!("{instances} instances, max gap {worst:.1e}"))
}

/// Finite down-out surfaces against value iteration on the age chain.
pub fn finite_downout_vs_dp(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let p = finite_instance(&mut rng);
        let n = p.g.nrows();
        let gm = GeneratorMatrix::from_dense(&p.g, 0.0).map_err(|e| e.to_string())?;
        let time = TimeGrid::new(p.dt, p.maturity).map_err(|e| e.to_string())?;
        let space = AugmentedStateSpace::from_counts(n, p.l, p.window, p.dd).map_err(|e| e.to_string())?;
        let got = price_finite_downout(&|_| Ok(gm.clone()), &space, &p.f, p.r, &time, SolverKind::Auto, true)
            .map_err(|e| format!("case {case}: {e}"))?;
        let want = finite_downout_dp(&p.g, p.l, p.window, p.dd, &p.f, p.r, p.dt, time.n_slices)
            .map_err(|e| format!("case {case}: {e}"))?;
        for s in 0..time.n_slices {
            worst = worst.max(rel_gap(&got[s], &want[s]));
        }
    }
    if worst > 1e-5 {
        return Err(format!("max gap {worst:.2e}"));
    }
    Ok(format!("{instances} instances, max gap {worst:.1e}"))
}

/// Rows of the discounted Parisian transform against simulation of the
/// chain, within `k` standard errors.
pub fn transform_vs_monte_carlo(n_paths: usize, k: f64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 15;
    let g = random_chain(&mut rng, n, true);
    let gm = GeneratorMatrix::from_dense(&g, 0.0).map_err(|e| e.to_string())?;
    let (l, window, r) = (6, 0.4, 0.1);
    let kernels = parisian_transform(&gm, l, window, r, Some(1 << 16)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for x0 in [2, 6, 10] {
        let spec = SimulationSpec {
            l_index: l,
            window,
            discount: r,
            kill_rate: 0.0,
            horizon: 400.0,
            seed: seed + x0 as u64,
            n_paths,
        };
        let mc = simulate_paths(&gm, x0, &spec).map_err(|e| e.to_string())?;
        let row: Vec<f64> = kernels.h_p.row(x0).iter().copied().collect();
        worst = worst.max(mc.worst_z(&row));
        if !mc.agrees_with(&row, k) {
            return Err(format!("row {x0}: worst deviation {:.2} s.e.", mc.worst_z(&row)));
        }
    }
    Ok(format!("3 rows, {n_paths} paths each, worst {worst:.2} s.e."))
}

fn bs_perpetual(flavor: Flavor, window: f64) -> (ModelSpec, ContractSpec, PricingOptions) {
    let model = ModelParams::Bs(BsParams {
        sigma: 0.3,
        r_f: 0.1,
        dividend: 0.05,
        log_space: false,
    });
    let contract = ContractSpec {
        payoff: Payoff::Call(95.0),
        barrier: 90.0,
        window,
        maturity: None,
        rate: 0.1,
        flavor,
    };
    let opts = PricingOptions {
        n: 129,
        ..Default::default()
    };
    (model.build().expect("valid parameters"), contract, opts)
}

/// Generator validity on every model family, sub-probability kernels,
/// complementarity residuals, monotonicity in the window and domination by
/// the vanilla American value, all on the Black-Scholes `n = 129` grid.
pub fn structural_invariants() -> Check {
    let e = |e: crate::Error| e.to_string();
    let kou = ModelParams::Kou(KouParams {
        sigma: 0.3,
        lambda: 3.0,
        eta_plus: 10.0,
        eta_minus: 10.0,
        p_plus: 0.5,
        p_minus: 0.5,
        r_f: 0.05,
        dividend: 0.0,
    });
    let vg = ModelParams::Vg(VgParams {
        sigma: 0.1213,
        nu: 0.1686,
        theta: -0.1436,
        r_f: 0.05,
        dividend: 0.0,
    });
    let (bs, contract, opts) = bs_perpetual(Flavor::DownIn, 1.0 / 12.0);
    for (spec, policy) in [(bs.clone(), RatePolicy::Strict), (kou.build().map_err(e)?, RatePolicy::Strict), (vg.build().map_err(e)?, RatePolicy::Upwind)] {
        let lat = build_lattice(&spec, &contract, 90.0, &PricingOptions { rate_policy: policy, ..opts }).map_err(e)?;
        lat.generator.validate().map_err(|err| format!("{} generator: {err}", spec.name))?;
    }

    let lat = build_lattice(&bs, &contract, 90.0, &opts).map_err(e)?;
    let (g, l, f, r) = (&lat.generator, lat.grid.l_index(), &lat.payoff, contract.rate);
    let k = parisian_transform(g, l, contract.window, r, Some(1 << 16)).map_err(e)?;
    // H_p comes from a dense solve with I - U_p, whose conditioning grows as
    // rows near the barrier approach unit mass
    let mut worst_neg = 0.0f64;
    for (name, m) in [("H_p", &k.h_p), ("U+", &k.u_plus), ("U-", &k.u_minus), ("V_p", &k.v_p)] {
        let neg = m.iter().fold(0.0f64, |a, &v| a.min(v));
        let mass = m.row_iter().map(|row| row.sum()).fold(0.0f64, f64::max);
        if neg < -1e-7 || mass > 1.0 + 1e-10 {
            return Err(format!("{name} is not sub-stochastic: min {neg:e}, max row sum {mass}"));
        }
        worst_neg = worst_neg.min(neg);
    }

    let vanilla = vanilla_american_perpetual(g, f, r, SolverKind::Auto).map_err(e)?;
    let a = shifted_generator(g, r, 1.0, true);
    let psi = a.apply(f);
    let z: Vec<f64> = vanilla.iter().zip(f).map(|(c, f)| c - f).collect();
    let scale = psi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut residual = complementarity_residual(&a, &psi, &z) / scale;
    let space = AugmentedStateSpace::new(&lat.grid, contract.window, opts.dd).map_err(e)?;
    let op = AugmentedOperator::new(space.clone(), g, r, 1.0, true).map_err(e)?;
    let ft = space.payoff(f);
    let out = price_perpetual_downout(g, &space, f, r, SolverKind::Auto, true).map_err(e)?;
    let psi = op.apply(&ft);
    let z: Vec<f64> = out.iter().zip(&ft).map(|(c, f)| c - f).collect();
    let scale = psi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    residual = residual.max(complementarity_residual(&op, &psi, &z) / scale);
    if residual > 1e-8 {
        return Err(format!("complementarity residual {residual:e}"));
    }

    let tol = 1e-8;
    let mut prev_in: Option<Vec<f64>> = None;
    let mut prev_out: Option<Vec<f64>> = None;
    for window in [1.0 / 24.0, 1.0 / 12.0, 1.0 / 6.0] {
        let din = price_perpetual_downin(g, l, window, f, r, SolverKind::Auto, Some(1 << 16), true).map_err(e)?.values;
        let space = AugmentedStateSpace::new(&lat.grid, window, opts.dd).map_err(e)?;
        let dout = price_perpetual_downout(g, &space, f, r, SolverKind::Auto, true).map_err(e)?;
        let dout = space.spatial_slice(&dout, 0);
        for i in 0..vanilla.len() {
            if din[i] > vanilla[i] + tol || dout[i] > vanilla[i] + tol {
                return Err(format!("window {window}: value above vanilla at state {i}: in {} out {} vanilla {}", din[i], dout[i], vanilla[i]));
            }
        }
        if let Some(p) = &prev_in {
            if din.iter().zip(p).any(|(a, b)| *a > b + tol) {
                return Err(format!("down-in value increases with the window at {window}"));
            }
        }
        if let Some(p) = &prev_out {
            if dout.iter().zip(p).any(|(a, b)| *a < b - tol) {
                return Err(format!("down-out value decreases with the window at {window}"));
            }
        }
        prev_in = Some(din);
        prev_out = Some(dout);
    }
    Ok(format!(
        "generators valid, kernels sub-stochastic (min entry {worst_neg:.1e}), residual {residual:.1e}, monotone in the window, below vanilla"
    ))
}

/// Names accepted by [`run_suite`].
pub const SUITES: [&str; 4] = ["lcp", "kernels", "dp", "all"];

/// Runs a named suite; `scale` multiplies instance and path counts.
pub fn run_suite(name: &str, scale: f64, seed: u64) -> crate::Result<Vec<(&'static str, Check)>> {
    let count = |base: usize| ((base as f64 * scale).round() as usize).max(1);
    let mut out = Vec::new();
    let all = name == "all";
    if !SUITES.contains(&name) {
        return Err(crate::Error::InvalidParameter(format!("unknown suite '{name}', expected one of {SUITES:?}")));
    }
    if all || name == "lcp" {
        out.push(("Lemke vs enumeration", lemke_vs_enumeration(count(200), seed)));
        out.push(("perpetual vanilla vs value iteration", vanilla_vs_value_iteration(count(50), seed + 1)));
    }
    if all || name == "kernels" {
        out.push(("Parisian transform vs simulation", transform_vs_monte_carlo(count(1_000_000), 3.0, seed + 2)));
        out.push(("structural invariants", structural_invariants()));
    }
    if all || name == "dp" {
        out.push(("finite down-in vs joint lattice", finite_downin_vs_lattice(count(20), seed + 3)));
        out.push(("finite down-out vs age-chain DP", finite_downout_vs_dp(count(20), seed + 4)));
    }
    Ok(out)
}
