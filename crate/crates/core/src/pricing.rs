//! Model-level entry point: builds the grid and generator for a contract and
//! dispatches to the down-in or down-out pricer.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::contract::{ContractSpec, Flavor};
use crate::ctmc::{build_generator, build_grid, GeneratorMatrix, RatePolicy, SpatialGrid, SplitPolicy, TimeGrid};
use crate::downin::{price_finite_downin, price_perpetual_downin};
use crate::downout::{price_finite_downout, price_perpetual_downout, AugmentedStateSpace};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::numerics::SolverKind;

/// Discretization and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingOptions {
    /// Number of grid intervals; the chain has `n + 1` states.
    pub n: usize,
    /// Grid range in price units; defaults to `[S₀/5, 4 S₀]`.
    pub domain: Option<(f64, f64)>,
    #[serde(skip)]
    pub split: SplitPolicy,
    pub rate_policy: RatePolicy,
    pub dt: f64,
    pub dd: f64,
    pub solver: SolverKind,
    /// Backward-Euler substeps for matrix exponentials.
    pub substeps: Option<usize>,
    /// Tridiagonal storage and scalar coupling for birth–death chains.
    pub fast_path: bool,
    /// Discount the finite-maturity vanilla recursion by `e^{-rδ_t}` per
    /// time tick. Off by default: the recursion is undiscounted and only the
    /// Parisian time is discounted.
    pub discount_ticks: bool,
}

impl Default for PricingOptions {
    fn default() -> Self {
        Self {
            n: 257,
            domain: None,
            split: SplitPolicy::Proportional,
            rate_policy: RatePolicy::Strict,
            dt: 1.0 / 60.0,
            dd: 1.0 / 120.0,
            solver: SolverKind::Auto,
            substeps: None,
            fast_path: true,
            discount_ticks: false,
        }
    }
}

/// Grid, generator and payoff vector of one pricing run.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub grid: SpatialGrid,
    pub generator: GeneratorMatrix,
    pub payoff: Vec<f64>,
    /// Spot in grid coordinates.
    pub spot: f64,
}

pub fn build_lattice(model: &ModelSpec, contract: &ContractSpec, spot: f64, opts: &PricingOptions) -> Result<Lattice> {
    contract.validate()?;
    if !(spot > 0.0) {
        return Err(Error::InvalidParameter(format!("spot must be positive, got {spot}")));
    }
    let (lo, hi) = opts.domain.unwrap_or((spot / 5.0, 4.0 * spot));
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!("bad domain [{lo}, {hi}]")));
    }
    let c = model.coordinate;
    let l = contract.barrier;
    // the strike only fixes where the grid is refined; a custom payoff
    // refines around the spot instead
    let k = match contract.payoff.strike() {
        Some(k) if k != l => k,
        _ if spot != l => spot,
        _ => 0.5 * (l + hi),
    };
    let grid = build_grid(c.from_price(lo), c.from_price(hi), c.from_price(l), c.from_price(k), opts.n, opts.split)?;
    let generator = build_generator(model, &grid, 0.0, opts.rate_policy)?;
    let payoff = grid.points().iter().map(|&y| contract.payoff.eval(c.to_price(y))).collect();
    Ok(Lattice {
        grid,
        generator,
        payoff,
        spot: c.from_price(spot),
    })
}

/// Values over the state space of the pricer that produced them.
#[derive(Debug, Clone)]
pub enum Surface {
    /// Perpetual down-in, one value per spatial state.
    Spatial(Vec<f64>),
    /// Finite down-in, undiscounted values per slice.
    Slices { times: Vec<f64>, values: Vec<Vec<f64>> },
    /// Down-out values per slice over the augmented states; perpetual
    /// contracts have a single slice at `t = 0`.
    Augmented {
        space: AugmentedStateSpace,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct Valuation {
    pub price: f64,
    pub lattice: Lattice,
    pub surface: Surface,
}

impl Valuation {
    /// Writes the surface as CSV: `t,state,price` for down-in and
    /// `t,d,state,price` for down-out, with states in price units.
    pub fn write_surface<W: Write>(&self, model: &ModelSpec, mut w: W) -> std::io::Result<()> {
        let pts = self.lattice.grid.points();
        let c = model.coordinate;
        match &self.surface {
            Surface::Spatial(v) => {
                writeln!(w, "t,state,price")?;
                for (y, p) in pts.iter().zip(v) {
                    writeln!(w, "0,{},{}", c.to_price(*y), p)?;
                }
            }
            Surface::Slices { times, values } => {
                writeln!(w, "t,state,price")?;
                for (t, row) in times.iter().zip(values) {
                    for (y, p) in pts.iter().zip(row) {
                        writeln!(w, "{t},{},{}", c.to_price(*y), p)?;
                    }
                }
            }
            Surface::Augmented { space, times, values } => {
                writeln!(w, "t,d,state,price")?;
                for (t, row) in times.iter().zip(values) {
                    for (idx, p) in row.iter().enumerate() {
                        let (d, x) = space.state(idx);
                        writeln!(w, "{t},{},{},{}", d as f64 * space.dd, c.to_price(pts[x]), p)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Prices `contract` under `model` at `spot`.
pub fn price(model: &ModelSpec, contract: &ContractSpec, spot: f64, opts: &PricingOptions) -> Result<Valuation> {
    let lattice = build_lattice(model, contract, spot, opts)?;
    let g = &lattice.generator;
    let l = lattice.grid.l_index();
    let r = contract.rate;
    let d = contract.window;
    let f = &lattice.payoff;
    let at_spot = |v: &[f64]| lattice.grid.interpolate(v, lattice.spot);
    let (price, surface) = match (contract.flavor, contract.maturity) {
        (Flavor::DownIn, None) => {
            require_homogeneous(model)?;
            let p = price_perpetual_downin(g, l, d, f, r, opts.solver, opts.substeps, opts.fast_path)?;
            (at_spot(&p.values), Surface::Spatial(p.values))
        }
        (Flavor::DownIn, Some(t)) => {
            require_homogeneous(model)?;
            let time = TimeGrid::new(opts.dt, t)?;
            let p = price_finite_downin(g, l, d, f, r, if opts.discount_ticks { r } else { 0.0 }, &time, opts.solver, opts.substeps, opts.fast_path)?;
            let values: Vec<Vec<f64>> = (0..time.n_slices).map(|s| p.slice(s)).collect();
            let times = (0..time.n_slices).map(|s| time.time(s)).collect();
            (at_spot(&values[0]), Surface::Slices { times, values })
        }
        (Flavor::DownOut, None) => {
            require_homogeneous(model)?;
            let space = AugmentedStateSpace::new(&lattice.grid, d, opts.dd)?;
            let v = price_perpetual_downout(g, &space, f, r, opts.solver, opts.fast_path)?;
            let spatial = space.spatial_slice(&v, 0);
            (
                at_spot(&spatial),
                Surface::Augmented {
                    space,
                    times: vec![0.0],
                    values: vec![v],
                },
            )
        }
        (Flavor::DownOut, Some(t)) => {
            let time = TimeGrid::new(opts.dt, t)?;
            let space = AugmentedStateSpace::new(&lattice.grid, d, opts.dd)?;
            let generators = |s: usize| -> Result<GeneratorMatrix> {
                if model.time_homogeneous {
                    Ok(g.clone())
                } else {
                    build_generator(model, &lattice.grid, time.time(s), opts.rate_policy)
                }
            };
            let values = price_finite_downout(&generators, &space, f, r, &time, opts.solver, opts.fast_path)?;
            let spatial = space.spatial_slice(&values[0], 0);
            let times = (0..time.n_slices).map(|s| time.time(s)).collect();
            (at_spot(&spatial), Surface::Augmented { space, times, values })
        }
    };
    Ok(Valuation {
        price,
        lattice,
        surface,
    })
}

fn require_homogeneous(model: &ModelSpec) -> Result<()> {
    if model.time_homogeneous {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "model '{}' is time-inhomogeneous; this pricer needs a time-homogeneous generator",
            model.name
        )))
    }
}
