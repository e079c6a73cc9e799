use nalgebra::DMatrix;

use super::operator::AugmentedOperator;
use super::space::AugmentedStateSpace;
use crate::ctmc::{GeneratorMatrix, TimeGrid};
use crate::error::{Error, Result};
use crate::numerics::{active_set, solve_lcp, LcpOperator, SolverKind};

/// Dense rate matrix `G̃` of the augmented chain. Rows at the knock-out
/// level are zero.
pub fn augmented_generator(g: &GeneratorMatrix, space: &AugmentedStateSpace) -> Result<DMatrix<f64>> {
    let op = AugmentedOperator::new(space.clone(), g, 0.0, -1.0, true)?;
    Ok(op.to_dense())
}

fn check(g: &GeneratorMatrix, space: &AugmentedStateSpace, f: &[f64]) -> Result<()> {
    if f.len() != space.n || g.dim() != space.n {
        return Err(Error::InvalidParameter("payoff, generator and state space disagree".into()));
    }
    Ok(())
}

/// Perpetual down-out values over the augmented states, from
/// `min((rI - G̃) C, C - f̃) = 0`.
pub fn price_perpetual_downout(
    g: &GeneratorMatrix,
    space: &AugmentedStateSpace,
    f: &[f64],
    r: f64,
    solver: SolverKind,
    structured: bool,
) -> Result<Vec<f64>> {
    check(g, space, f)?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("perpetual pricing needs r > 0, got {r}")));
    }
    let op = AugmentedOperator::new(space.clone(), g, r, 1.0, structured)?;
    let ft = space.payoff(f);
    let psi = op.apply(&ft);
    let z = solve_lcp(&op, &psi, solver, None)?.into_result()?;
    Ok(z.iter().zip(&ft).map(|(z, f)| z + f).collect())
}

/// Finite-maturity down-out values per slice, from
/// `min(((1 + rδ)I - δG̃) C(t) - C(t + δ), C(t) - f̃) = 0` with `C(T⁺) = 0`.
///
/// `generator_at(s)` supplies the spatial generator of slice `s`; it is
/// called once per slice, so time-homogeneous callers can return a clone.
pub fn price_finite_downout(
    generator_at: &dyn Fn(usize) -> Result<GeneratorMatrix>,
    space: &AugmentedStateSpace,
    f: &[f64],
    r: f64,
    time: &TimeGrid,
    solver: SolverKind,
    structured: bool,
) -> Result<Vec<Vec<f64>>> {
    let ft = space.payoff(f);
    let dim = space.dim();
    let ns = time.n_slices;
    let mut out = vec![vec![0.0; dim]; ns];
    let mut next = vec![0.0; dim];
    let mut warm: Option<Vec<bool>> = None;
    for s in (0..ns).rev() {
        let g = generator_at(s)?;
        check(&g, space, f)?;
        let op = AugmentedOperator::new(space.clone(), &g, 1.0 + r * time.dt, time.dt, structured)?;
        let af = op.apply(&ft);
        let psi: Vec<f64> = af.iter().zip(&next).map(|(a, c)| a - c).collect();
        let sol = solve_lcp(&op, &psi, solver, warm.as_deref())?;
        log::debug!("down-out slice {s}: {} solver iterations", sol.iterations);
        let z = sol.into_result()?;
        warm = Some(active_set(&z));
        next = z.iter().zip(&ft).map(|(z, f)| z + f).collect();
        out[s] = next.clone();
    }
    Ok(out)
}
