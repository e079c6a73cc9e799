//! Exact lattice computations of Parisian values on small chains.
//!
//! These work on the joint process of the `ζ` time clock and the spatial
//! chain, using dense matrix exponentials of the joint generator instead of
//! the closed forms and time stepping used by the pricers.

use nalgebra::DMatrix;

use super::chain::{value_iterate_slice, UniformizedChain};
use super::expm::expm_taylor;
use crate::error::{Error, Result};

/// Largest joint state count accepted by the lattice oracles.
pub const MAX_JOINT_STATES: usize = 100_000;
const DENSE_CAP: usize = 1500;

/// Bermudan values `c_f(t_s)` for `s = 0..n_slices` on the `ζ` clock with
/// tick discount `e^{-ρδ}`, by value iteration.
pub fn bermudan_surface(g: &DMatrix<f64>, f: &[f64], tick_rate: f64, dt: f64, n_slices: usize) -> Result<Vec<Vec<f64>>> {
    let chain = UniformizedChain::new(g)?;
    let n = g.nrows();
    let mut out = vec![vec![0.0; n]; n_slices];
    let mut next = vec![0.0; n];
    for s in (0..n_slices).rev() {
        next = value_iterate_slice(&chain, f, &next, dt, (-tick_rate * dt).exp(), 0.0, 1e-13)?;
        out[s] = next.clone();
    }
    Ok(out)
}

/// Discounted down-in values `C̃(t_s, x)` for every slice and state.
///
/// The joint chain on (slice, state) moves spatially by `g` and advances the
/// slice at rate `1/δ`; leaving the last slice kills the path. With `E` the
/// law after an excursion of length `D` survives below `L`, `F` the law of
/// the first up-crossing within `D` and `H` the law of the first
/// down-crossing, the value solves `V₋ = E c̄ + F V₊`, `V₊ = H V₋` where
/// `c̄(s, y) = e^{-r t_s} c_f(t_s, y)` and `c_f` carries the tick discount
/// `e^{-ρδ}`.
pub fn finite_downin_exact(
    g: &DMatrix<f64>,
    l_index: usize,
    window: f64,
    f: &[f64],
    r: f64,
    tick_rate: f64,
    dt: f64,
    n_slices: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = g.nrows();
    let m = l_index;
    let total = n * n_slices;
    if total > DENSE_CAP {
        return Err(Error::TooLarge(format!("{total} joint states")));
    }
    let cf = bermudan_surface(g, f, tick_rate, dt, n_slices)?;
    // joint index: below states first, slice-major within each region
    let below: Vec<(usize, usize)> = (0..n_slices).flat_map(|s| (0..m).map(move |x| (s, x))).collect();
    let above: Vec<(usize, usize)> = (0..n_slices).flat_map(|s| (m..n).map(move |x| (s, x))).collect();
    let joint = |a: &[(usize, usize)], b: &[(usize, usize)]| {
        DMatrix::from_fn(a.len(), b.len(), |i, j| {
            let (s, x) = a[i];
            let (t, y) = b[j];
            let mut v = 0.0;
            if s == t {
                v += g[(x, y)];
                if x == y {
                    v -= 1.0 / dt;
                }
            }
            if t == s + 1 && x == y {
                v += 1.0 / dt;
            }
            v
        })
    };
    let jmm = joint(&below, &below);
    let jmp = joint(&below, &above);
    let jpm = joint(&above, &below);
    let jpp = joint(&above, &above);
    let nb = below.len();
    let na = above.len();
    let e = expm_taylor(&(&jmm * window));
    // Van Loan: exp([[A, B], [0, 0]] D) has ∫₀^D e^{uA} du B in its corner
    let mut aug = DMatrix::zeros(nb + na, nb + na);
    aug.view_mut((0, 0), (nb, nb)).copy_from(&jmm);
    aug.view_mut((0, nb), (nb, na)).copy_from(&jmp);
    let big = expm_taylor(&(aug * window));
    let fmat = big.view((0, nb), (nb, na)).into_owned();
    let h = (-jpp)
        .lu()
        .solve(&jpm)
        .ok_or_else(|| Error::Singular("first passage below the barrier".into()))?;
    let cbar = nalgebra::DVector::from_iterator(
        nb,
        below.iter().map(|&(s, x)| (-r * s as f64 * dt).exp() * cf[s][x]),
    );
    let lhs = DMatrix::<f64>::identity(nb, nb) - &fmat * &h;
    let vm = lhs
        .lu()
        .solve(&(&e * cbar))
        .ok_or_else(|| Error::Singular("joint excursion system".into()))?;
    let vp = &h * &vm;
    let mut out = vec![vec![0.0; n]; n_slices];
    for (i, &(s, x)) in below.iter().enumerate() {
        out[s][x] = vm[i];
    }
    for (i, &(s, x)) in above.iter().enumerate() {
        out[s][x] = vp[i];
    }
    Ok(out)
}

/// Rate matrix of the (excursion age, state) chain, assembled entry by entry
/// from a dense spatial generator.
///
/// States are `(0, x)` for every `x` and `(j, x)` for `x < m`, `1 ≤ j ≤ k`,
/// in level-major order. A move to `y < m` keeps the age level, a move to
/// `y ≥ m` resets it, and the age advances at rate `1/δ_d` below the barrier.
/// Level `k` is absorbing.
pub fn age_chain_generator(g: &DMatrix<f64>, m: usize, k: usize, dd: f64) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let dim = n + m * k;
    if dim > DENSE_CAP {
        return Err(Error::TooLarge(format!("{dim} joint states")));
    }
    let idx = |j: usize, x: usize| if j == 0 { x } else { n + (j - 1) * m + x };
    let mut out = DMatrix::zeros(dim, dim);
    for j in 0..k {
        let states = if j == 0 { n } else { m };
        for x in 0..states {
            let row = idx(j, x);
            for y in 0..n {
                if y == x {
                    continue;
                }
                let to = if y < m { idx(j, y) } else { y };
                out[(row, to)] += g[(x, y)];
            }
            out[(row, row)] += g[(x, x)];
            if x < m {
                out[(row, idx(j + 1, x))] += 1.0 / dd;
                out[(row, row)] -= 1.0 / dd;
            }
        }
    }
    Ok(out)
}

fn age_levels(window: f64, dd: f64) -> usize {
    let mut k = 1;
    while k as f64 * dd <= window * (1.0 + 1e-12) {
        k += 1;
    }
    k
}

fn age_payoff(n: usize, m: usize, k: usize, f: &[f64]) -> Vec<f64> {
    let mut out = f.to_vec();
    for j in 1..=k {
        out.extend(f[..m].iter().map(|&v| if j < k { v } else { 0.0 }));
    }
    debug_assert_eq!(out.len(), n + m * k);
    out
}

/// Down-out values per slice on the age chain by value iteration: each
/// slice holds an exponential time of mean `δ` discounted at rate `r`.
pub fn finite_downout_dp(
    g: &DMatrix<f64>,
    l_index: usize,
    window: f64,
    dd: f64,
    f: &[f64],
    r: f64,
    dt: f64,
    n_slices: usize,
) -> Result<Vec<Vec<f64>>> {
    let k = age_levels(window, dd);
    let gt = age_chain_generator(g, l_index, k, dd)?;
    let chain = UniformizedChain::new(&gt)?;
    let ft = age_payoff(g.nrows(), l_index, k, f);
    let mut out = vec![Vec::new(); n_slices];
    let mut next = vec![0.0; ft.len()];
    for s in (0..n_slices).rev() {
        next = value_iterate_slice(&chain, &ft, &next, dt, 1.0, r, 1e-13)?;
        out[s] = next.clone();
    }
    Ok(out)
}

/// Perpetual down-out values on the age chain by value iteration.
pub fn perpetual_downout_dp(g: &DMatrix<f64>, l_index: usize, window: f64, dd: f64, f: &[f64], r: f64) -> Result<Vec<f64>> {
    let k = age_levels(window, dd);
    let gt = age_chain_generator(g, l_index, k, dd)?;
    let chain = UniformizedChain::new(&gt)?;
    let ft = age_payoff(g.nrows(), l_index, k, f);
    super::chain::value_iterate_american(&chain, &ft, r, 1e-13)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(n, n);
        for i in 1..n - 1 {
            g[(i, i - 1)] = 2.0;
            g[(i, i + 1)] = 1.5;
            if i + 2 < n {
                g[(i, i + 2)] = 0.3;
            }
        }
        for i in 0..n {
            let s: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
            g[(i, i)] = -s;
        }
        g
    }

    #[test]
    fn age_chain_is_a_generator() {
        let g = chain(7);
        let gt = age_chain_generator(&g, 3, 4, 0.05).unwrap();
        assert_eq!(gt.nrows(), 7 + 12);
        for i in 0..gt.nrows() {
            let s: f64 = gt.row(i).iter().sum();
            assert!(s.abs() < 1e-12);
            for j in 0..gt.ncols() {
                if i != j {
                    assert!(gt[(i, j)] >= 0.0);
                }
            }
        }
        for i in 7 + 9..gt.nrows() {
            assert!(gt.row(i).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn age_levels_follow_the_window() {
        assert_eq!(age_levels(0.1, 0.05), 3);
        assert_eq!(age_levels(0.12, 0.05), 3);
        assert_eq!(age_levels(0.01, 0.05), 1);
    }

    #[test]
    fn zero_payoff_and_knockout() {
        let g = chain(6);
        let f = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let v = finite_downout_dp(&g, 2, 0.1, 0.05, &f, 0.05, 0.1, 4).unwrap();
        let k = age_levels(0.1, 0.05);
        let start = 6 + 2 * (k - 1);
        assert!(v[0][start..].iter().all(|&x| x == 0.0));
        let z = finite_downout_dp(&g, 2, 0.1, 0.05, &[0.0; 6], 0.05, 0.1, 4).unwrap();
        assert!(z.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_oracle_rejects_large_lattices() {
        let g = chain(40);
        let f = vec![1.0; 40];
        assert!(matches!(finite_downin_exact(&g, 10, 0.1, &f, 0.05, 0.05, 0.01, 100), Err(Error::TooLarge(_))));
    }
}
