//! Value iteration on uniformized chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `P = I + G/Λ` with `Λ = max |G_ii|`: the jump chain of a Poisson clock of
/// rate `Λ` driving the chain.
#[derive(Debug, Clone)]
pub struct UniformizedChain {
    pub lambda: f64,
    pub p: DMatrix<f64>,
}

impl UniformizedChain {
    pub fn new(g: &DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        let lambda = (0..n).map(|i| g[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let p = DMatrix::<f64>::identity(n, n) + g / lambda;
        for i in 0..n {
            let row: f64 = p.row(i).iter().sum();
            if (row - 1.0).abs() > 1e-12 || p.row(i).iter().any(|v| *v < -1e-15) {
                return Err(Error::InvalidParameter(format!("row {i} of the uniformized chain is not stochastic")));
            }
        }
        Ok(Self { lambda, p })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    fn step(&self, v: &[f64]) -> Vec<f64> {
        (&self.p * DVector::from_column_slice(v)).as_slice().to_vec()
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

const MAX_SWEEPS: usize = 50_000_000;

/// Fixed point of `v = max(f, Λ/(Λ+r) P v)`, the perpetual American value
/// with exact exponential discounting over each holding time.
pub fn value_iterate_american(chain: &UniformizedChain, f: &[f64], r: f64, tol: f64) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("value iteration needs r > 0".into()));
    }
    let beta = chain.lambda / (chain.lambda + r);
    let mut v = f.to_vec();
    for _ in 0..MAX_SWEEPS {
        let next: Vec<f64> = chain.step(&v).iter().zip(f).map(|(c, f)| f.max(beta * c)).collect();
        let diff = sup_diff(&next, &v);
        v = next;
        // the error after convergence is at most diff * beta / (1 - beta)
        if diff * beta / (1.0 - beta) < tol {
            return Ok(v);
        }
    }
    Err(Error::InvalidParameter("value iteration did not converge".into()))
}

/// One slice of the American value on a Poisson time clock of rate `1/δ`:
/// fixed point of `c = max(f, (Λ P c + (γ/δ) c_next) / (Λ + r_c + 1/δ))`,
/// where `γ` discounts each clock tick and `r_c` is a continuous rate.
pub fn value_iterate_slice(
    chain: &UniformizedChain,
    f: &[f64],
    c_next: &[f64],
    dt: f64,
    tick_discount: f64,
    cont_rate: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let lam = chain.lambda;
    let denom = lam + cont_rate + 1.0 / dt;
    let beta = lam / denom;
    let mut v = f.to_vec();
    for _ in 0..MAX_SWEEPS {
        let pv = chain.step(&v);
        let next: Vec<f64> = (0..v.len())
            .map(|i| f[i].max((lam * pv[i] + tick_discount * c_next[i] / dt) / denom))
            .collect();
        let diff = sup_diff(&next, &v);
        v = next;
        if diff * beta / (1.0 - beta) < tol {
            return Ok(v);
        }
    }
    Err(Error::InvalidParameter("slice value iteration did not converge".into()))
}
