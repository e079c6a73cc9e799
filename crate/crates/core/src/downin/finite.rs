//! Finite-maturity down-in options.
//!
//! Time runs on a Poisson clock `ζ` with ticks of size `δ_t` at rate
//! `1/δ_t`. Working backwards from `T⁺`, each slice needs the Bermudan value
//! `c_f` started at the Parisian time, the excursion kernels `H⁺`, `H⁻`, and
//! the carried terms `v`, `u⁺`, `u⁻` that collect contributions from later
//! slices.

use nalgebra::DMatrix;

use crate::blocks::{shifted_generator, Coupling, SplitGenerator, Solver};
use crate::ctmc::{GeneratorMatrix, TimeGrid};
use crate::error::{Error, Result};
use crate::numerics::{active_set, solve_lcp, BackwardEuler, LcpMatrix, LcpOperator, SolverKind};

/// Poisson probabilities `e^{-λ} λ^k / k!` for `k = 0..=kmax`, cut after the
/// mode once they fall below `1e-16`.
pub fn poisson_weights(lambda: f64, kmax: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(kmax + 1);
    let mut log_p = -lambda;
    for k in 0..=kmax {
        if k > 0 {
            log_p += lambda.ln() - (k as f64).ln();
        }
        let p = log_p.exp();
        if k as f64 > lambda && p < 1e-16 {
            break;
        }
        w.push(p);
    }
    w
}

/// One backward step of the Bermudan value on the `ζ` clock:
/// `min((I - δG) c - e^{-rδ} c_next, c - f) = 0`, with `discount = e^{-rδ}`.
pub fn bermudan_slice(
    g: &GeneratorMatrix,
    c_next: &[f64],
    f: &[f64],
    dt: f64,
    discount: f64,
    solver: SolverKind,
) -> Result<Vec<f64>> {
    let a = shifted_generator(g, 1.0, dt, true);
    Ok(bermudan_step(&a, c_next, f, discount, solver, None)?.0)
}

fn bermudan_step(
    a: &LcpMatrix,
    c_next: &[f64],
    f: &[f64],
    discount: f64,
    solver: SolverKind,
    warm: Option<&[bool]>,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let af = a.apply(f);
    let psi: Vec<f64> = af.iter().zip(c_next).map(|(a, c)| a - discount * c).collect();
    let z = solve_lcp(a, &psi, solver, warm)?.into_result()?;
    let active = active_set(&z);
    Ok((z.iter().zip(f).map(|(z, f)| z + f).collect(), active))
}

/// Slice-independent operators of a time-homogeneous chain.
struct FiniteOps {
    m: usize,
    /// `(I - δ G₋₋)`
    below: Solver,
    /// `(I - δ G₊₊)`
    above: Solver,
    /// `v ↦ e^{D G₋₋} v`
    expm: BackwardEuler,
    /// `(I/δ - G₋₋)^{-1} G₋₊` on the coupling columns
    w: DMatrix<f64>,
    /// `(I/δ - G₊₊)^{-1} G₊₋` on the coupling columns
    z: DMatrix<f64>,
    cols_up: Vec<usize>,
    cols_dn: Vec<usize>,
    coupling: Coupling,
    weights: Vec<f64>,
}

impl FiniteOps {
    fn new(
        g: &GeneratorMatrix,
        m: usize,
        window: f64,
        dt: f64,
        substeps: Option<usize>,
        structured: bool,
        n_slices: usize,
    ) -> Result<Self> {
        let n = g.dim();
        if m == 0 || m >= n {
            return Err(Error::InvalidParameter("barrier must lie strictly inside the grid".into()));
        }
        if !(window > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter("window and time step must be positive".into()));
        }
        let s = SplitGenerator::new(g, m, structured);
        let (cols_up, cols_dn) = s.coupling_columns();
        let below = s.below.resolvent(1.0, dt)?;
        let above = s.above.resolvent(1.0, dt)?;
        let expm = s.below.expm(window, substeps)?;
        let w = s.below.resolvent(1.0 / dt, 1.0)?.solve_matrix(&s.up.select_columns(cols_up.iter()));
        let z = s.above.resolvent(1.0 / dt, 1.0)?.solve_matrix(&s.down.select_columns(cols_dn.iter()));
        let decay = (-window / dt).exp();
        let p = &w - expm.apply_matrix(&w) * decay;
        let coupling = Coupling::new(p, z.clone(), cols_up.clone(), cols_dn.clone())?;
        Ok(Self {
            m,
            below,
            above,
            expm,
            w,
            z,
            cols_up,
            cols_dn,
            coupling,
            weights: poisson_weights(window / dt, n_slices),
        })
    }

    /// `H̄₁⁺ C̃(s)` restricted to the lower region.
    fn entry_value(&self, ct: &[f64]) -> Vec<f64> {
        let xs: Vec<f64> = self.cols_up.iter().map(|&j| ct[self.m + j]).collect();
        crate::blocks::matvec(&self.w, &xs)
    }

    /// `R(s) = H̄₁⁺ C̃(s) + N R(s+1)` with `N = (I - δ Ḡ)^{-1}`.
    fn carry(&self, ct: &[f64], r_next: &[f64]) -> Vec<f64> {
        let b = self.entry_value(ct);
        let nr = self.below.solve(r_next);
        b.iter().zip(&nr).map(|(a, b)| a + b).collect()
    }

    /// `u⁻(s)` on the upper region from `u⁻(s+1)` and `C̃(s+1)`.
    fn u_minus(&self, u_next: &[f64], ct_next: &[f64]) -> Vec<f64> {
        let xs: Vec<f64> = self.cols_dn.iter().map(|&j| ct_next[j]).collect();
        let zc = crate::blocks::matvec(&self.z, &xs);
        let rhs: Vec<f64> = u_next.iter().zip(&zc).map(|(a, b)| a + b).collect();
        self.above.solve(&rhs)
    }

    /// Lower-region terms `v(D, s)` (when `cbar` is given) plus `u⁺(D, s)`
    /// (when `carry` is given), sharing one exponential action.
    ///
    /// `cbar[k]` is `e^{-r t_k} c_f(t_k)` below `L` and `carry[k]` is `R(k)`,
    /// both indexed by absolute slice; missing slices are zero.
    fn below_terms(&self, s: usize, cbar: Option<&[Vec<f64>]>, carry: Option<&[Vec<f64>]>) -> Vec<f64> {
        let m = self.m;
        let mut acc = vec![0.0; m];
        let mut out = vec![0.0; m];
        let axpy = |acc: &mut Vec<f64>, a: f64, x: &[f64]| {
            for (y, x) in acc.iter_mut().zip(x) {
                *y += a * x;
            }
        };
        if let Some(c) = cbar {
            for (k, &p) in self.weights.iter().enumerate() {
                if let Some(v) = c.get(s + k) {
                    axpy(&mut acc, p, v);
                }
            }
        }
        if let Some(r) = carry {
            if let Some(r1) = r.get(s + 1) {
                let nr1 = self.below.solve(r1);
                axpy(&mut out, 1.0, &nr1);
                axpy(&mut acc, -self.weights[0], &nr1);
                for (i, &p) in self.weights.iter().enumerate().skip(1) {
                    if let Some(v) = r.get(s + i) {
                        axpy(&mut acc, -p, v);
                    }
                }
            }
        }
        let e = self.expm.apply(&acc);
        axpy(&mut out, 1.0, &e);
        out
    }
}

/// Dense excursion kernels at one slice, each `N × N`.
#[derive(Debug, Clone)]
pub struct FiniteKernels {
    pub h1_plus: DMatrix<f64>,
    pub h2_plus: DMatrix<f64>,
    pub h_plus: DMatrix<f64>,
    pub h_minus: DMatrix<f64>,
}

/// `H₁⁺`, `H₂⁺`, `H⁺ = H₁⁺ - H₂⁺` and `H⁻` for a barrier at `l_index`.
pub fn kernel_h(g: &GeneratorMatrix, l_index: usize, window: f64, dt: f64, substeps: Option<usize>) -> Result<FiniteKernels> {
    let n = g.dim();
    let m = l_index;
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter("barrier must lie strictly inside the grid".into()));
    }
    let np = n - m;
    let s = SplitGenerator::new(g, m, false);
    let w = s.below.resolvent(1.0 / dt, 1.0)?.solve_matrix(&s.up);
    let z = s.above.resolvent(1.0 / dt, 1.0)?.solve_matrix(&s.down);
    let ew = s.below.expm(window, substeps)?.apply_matrix(&w) * (-window / dt).exp();
    let mut h1_plus = DMatrix::zeros(n, n);
    let mut h2_plus = DMatrix::zeros(n, n);
    let mut h_minus = DMatrix::zeros(n, n);
    h1_plus.view_mut((0, m), (m, np)).copy_from(&w);
    h2_plus.view_mut((0, m), (m, np)).copy_from(&ew);
    h_minus.view_mut((m, 0), (np, m)).copy_from(&z);
    for i in m..n {
        h1_plus[(i, i)] = 1.0;
    }
    for i in 0..m {
        h_minus[(i, i)] = 1.0;
    }
    let h_plus = &h1_plus - &h2_plus;
    Ok(FiniteKernels {
        h1_plus,
        h2_plus,
        h_plus,
        h_minus,
    })
}

fn check_surface(g: &GeneratorMatrix, surface: &[Vec<f64>]) -> Result<()> {
    if surface.iter().any(|v| v.len() != g.dim()) {
        return Err(Error::InvalidParameter("surface slices must match the chain dimension".into()));
    }
    Ok(())
}

fn pad(m: usize, n: usize, below: Vec<f64>) -> Vec<f64> {
    let mut v = below;
    v.resize(n, 0.0);
    debug_assert!(m <= n);
    v
}

/// `v(D, t_s)` for every slice `s`, given `c_f(t_s)` for `s = 0..` (slices
/// past the end are zero). Rows at or above `L` are zero.
pub fn kernel_v(
    g: &GeneratorMatrix,
    l_index: usize,
    c_f: &[Vec<f64>],
    r: f64,
    window: f64,
    dt: f64,
    substeps: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    check_surface(g, c_f)?;
    let ops = FiniteOps::new(g, l_index, window, dt, substeps, true, c_f.len())?;
    let cbar: Vec<Vec<f64>> = c_f
        .iter()
        .enumerate()
        .map(|(s, c)| c[..l_index].iter().map(|v| v * (-r * s as f64 * dt).exp()).collect())
        .collect();
    Ok((0..c_f.len())
        .map(|s| pad(l_index, g.dim(), ops.below_terms(s, Some(&cbar), None)))
        .collect())
}

/// `u⁺(D, t_s)` for every slice, given `C̃(t_s)` for all slices (slices past
/// the end are zero).
pub fn kernel_u_plus(
    g: &GeneratorMatrix,
    l_index: usize,
    c_tilde: &[Vec<f64>],
    window: f64,
    dt: f64,
    substeps: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    check_surface(g, c_tilde)?;
    let ns = c_tilde.len();
    let ops = FiniteOps::new(g, l_index, window, dt, substeps, true, ns)?;
    let mut carry = vec![vec![0.0; l_index]; ns + 1];
    for s in (0..ns).rev() {
        carry[s] = ops.carry(&c_tilde[s], &carry[s + 1]);
    }
    carry.pop();
    Ok((0..ns)
        .map(|s| pad(l_index, g.dim(), ops.below_terms(s, None, Some(&carry))))
        .collect())
}

/// `u⁻(t_s)` for every slice, given `C̃(t_s)` for all slices. Rows below `L`
/// are zero.
pub fn kernel_u_minus(g: &GeneratorMatrix, l_index: usize, c_tilde: &[Vec<f64>], dt: f64) -> Result<Vec<Vec<f64>>> {
    check_surface(g, c_tilde)?;
    let n = g.dim();
    let ns = c_tilde.len();
    let ops = FiniteOps::new(g, l_index, 1.0, dt, Some(1), true, ns)?;
    let mut u = vec![vec![0.0; n]; ns];
    let mut next = vec![0.0; n - l_index];
    let zero = vec![0.0; n];
    for s in (0..ns).rev() {
        let ct_next = c_tilde.get(s + 1).unwrap_or(&zero);
        next = ops.u_minus(&next, ct_next);
        u[s][l_index..].copy_from_slice(&next);
    }
    Ok(u)
}

/// Output of [`price_finite_downin`].
#[derive(Debug, Clone)]
pub struct FiniteDownIn {
    pub time: TimeGrid,
    pub rate: f64,
    /// `C̃(t_s) = e^{-r t_s} C(t_s)` for `s = 0..n_slices`.
    pub discounted: Vec<Vec<f64>>,
    /// Bermudan value `c_f(t_s)` started at the Parisian time.
    pub c_f: Vec<Vec<f64>>,
}

impl FiniteDownIn {
    /// Undiscounted values `C(t_s)`.
    pub fn slice(&self, s: usize) -> Vec<f64> {
        let k = (self.rate * self.time.time(s)).exp();
        self.discounted[s].iter().map(|v| v * k).collect()
    }
}

/// Backward recursion over the slices of `time` for a time-homogeneous chain.
///
/// `tick_rate` discounts `c_f` by `e^{-ρδ}` per tick of the time clock; zero
/// gives the undiscounted Bermudan recursion, with all discounting carried by
/// `e^{-r t}` at the Parisian time.
///
/// `structured` enables tridiagonal blocks and the scalar coupling solve on
/// birth–death chains; jump chains always take the dense path.
pub fn price_finite_downin(
    g: &GeneratorMatrix,
    l_index: usize,
    window: f64,
    f: &[f64],
    r: f64,
    tick_rate: f64,
    time: &TimeGrid,
    solver: SolverKind,
    substeps: Option<usize>,
    structured: bool,
) -> Result<FiniteDownIn> {
    let n = g.dim();
    if f.len() != n {
        return Err(Error::InvalidParameter("payoff length differs from the chain".into()));
    }
    let m = l_index;
    let dt = time.dt;
    let ns = time.n_slices;
    let ops = FiniteOps::new(g, m, window, dt, substeps, structured, ns)?;
    let a = shifted_generator(g, 1.0, dt, structured);
    let discount = (-tick_rate * dt).exp();

    let mut c_f = vec![vec![0.0; n]; ns];
    let mut cbar = vec![Vec::new(); ns];
    let mut ct = vec![vec![0.0; n]; ns];
    // carry[s] = R(s); R(ns) = 0
    let mut carry = vec![vec![0.0; m]; ns + 1];
    let mut u_minus = vec![0.0; n - m];
    let mut warm: Option<Vec<bool>> = None;
    let zero = vec![0.0; n];
    for s in (0..ns).rev() {
        let next = if s + 1 < ns { &c_f[s + 1] } else { &zero };
        let (c, act) = bermudan_step(&a, next, f, discount, solver, warm.as_deref())?;
        warm = Some(act);
        let disc_t = (-r * time.time(s)).exp();
        cbar[s] = c[..m].iter().map(|v| v * disc_t).collect();
        c_f[s] = c;

        let ct_next = if s + 1 < ns { &ct[s + 1] } else { &zero };
        if s + 1 < ns {
            carry[s + 1] = ops.carry(ct_next, &carry[s + 2]);
        }
        u_minus = ops.u_minus(&u_minus, ct_next);
        let r_minus = ops.below_terms(s, Some(&cbar[..]), Some(&carry[..]));
        ct[s] = ops.coupling.solve(&r_minus, &u_minus);
    }
    Ok(FiniteDownIn {
        time: *time,
        rate: r,
        discounted: ct,
        c_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::matvec;
    use crate::ctmc::{build_generator, build_grid, RatePolicy, SplitPolicy};
    use crate::models::bs_model;
    use crate::numerics::TriDiag;
    use crate::numerics::quad::integrate;
    use crate::oracle::expm::expm_taylor;

    fn bd_chain(n: usize, up: f64, down: f64) -> GeneratorMatrix {
        let mut sub = vec![down; n - 1];
        let mut sup = vec![up; n - 1];
        let mut main = vec![-(up + down); n];
        main[0] = 0.0;
        sup[0] = 0.0;
        main[n - 1] = 0.0;
        sub[n - 2] = 0.0;
        GeneratorMatrix {
            tri: TriDiag::new(sub, main, sup).unwrap(),
            far: None,
            t: 0.0,
        }
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        let w = poisson_weights(5.0, 200);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(w.len() < 60);
        assert_eq!(poisson_weights(5.0, 3).len(), 4);
    }

    #[test]
    fn bermudan_trivial_cases() {
        let g = bd_chain(6, 1.0, 1.0);
        let c = bermudan_slice(&g, &[0.0; 6], &[0.0; 6], 0.1, 1.0, SolverKind::Lemke).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-14));
        let z = GeneratorMatrix {
            tri: TriDiag::zeros(4),
            far: None,
            t: 0.0,
        };
        let f = [1.0, 3.0, 0.0, 2.0];
        let next = [2.0, 1.0, 0.5, 2.5];
        let c = bermudan_slice(&z, &next, &f, 0.1, 1.0, SolverKind::Lemke).unwrap();
        for i in 0..4 {
            assert!((c[i] - f[i].max(next[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_rows_at_or_above_barrier() {
        let g = bd_chain(10, 2.0, 1.5);
        let k = kernel_h(&g, 4, 0.3, 0.05, Some(512)).unwrap();
        for x in 4..10 {
            for z in 0..10 {
                assert_eq!(k.h1_plus[(x, z)], if x == z { 1.0 } else { 0.0 });
            }
        }
        for mat in [&k.h1_plus, &k.h_plus, &k.h_minus] {
            for i in 0..10 {
                assert!(mat.row(i).iter().all(|v| *v >= -1e-12 && *v <= 1.0 + 1e-12));
                assert!(mat.row(i).iter().sum::<f64>() <= 1.0 + 1e-10);
            }
        }
        let k0 = kernel_h(&g, 4, 1e-9, 0.05, Some(64)).unwrap();
        for x in 0..4 {
            assert!(k0.h_plus.row(x).iter().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn v_at_zero_window_is_discounted_slice() {
        let g = bd_chain(8, 1.0, 2.0);
        let cf: Vec<Vec<f64>> = (0..3).map(|s| (0..8).map(|i| (i + s) as f64).collect()).collect();
        let v = kernel_v(&g, 4, &cf, 0.1, 1e-12, 0.1, Some(64)).unwrap();
        for s in 0..3 {
            for x in 0..4 {
                let want = (-0.1 * s as f64 * 0.1).exp() * cf[s][x];
                assert!((v[s][x] - want).abs() < 1e-9);
            }
            assert!(v[s][4..].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn v_single_state_is_poisson_mixture() {
        // state 0 below L is absorbing, so only the clock moves
        let g = bd_chain(3, 1.0, 1.0);
        let g = GeneratorMatrix {
            tri: TriDiag::new(vec![0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0]).unwrap(),
            ..g
        };
        let (dt, d, r) = (0.1, 0.25, 0.07);
        let cf: Vec<Vec<f64>> = (0..12).map(|s| vec![1.0 + s as f64 * 0.3, 0.0, 0.0]).collect();
        let v = kernel_v(&g, 1, &cf, r, d, dt, None).unwrap();
        for s in 0..12 {
            let mut want = 0.0;
            let lam = d / dt;
            let mut p = (-lam).exp();
            for k in 0..40 {
                if k > 0 {
                    p *= lam / k as f64;
                }
                if s + k < 12 {
                    let t = (s + k) as f64 * dt;
                    want += p * (-r * t).exp() * cf[s + k][0];
                }
            }
            assert!((v[s][0] - want).abs() < 1e-13, "{s}: {} vs {want}", v[s][0]);
        }
    }

    #[test]
    fn u_minus_rows_below_are_zero_and_trivial_input() {
        let g = bd_chain(7, 1.0, 1.0);
        let zero = vec![vec![0.0; 7]; 4];
        let u = kernel_u_minus(&g, 3, &zero, 0.1).unwrap();
        assert!(u.iter().flatten().all(|v| *v == 0.0));
        let ct: Vec<Vec<f64>> = (0..4).map(|s| (0..7).map(|i| (i * s) as f64 + 1.0).collect()).collect();
        let u = kernel_u_minus(&g, 3, &ct, 0.1).unwrap();
        assert!(u.iter().all(|row| row[..3].iter().all(|v| *v == 0.0)));
        assert!(u[0][3..].iter().all(|v| *v >= 0.0));
        assert!(u[0][3] > 0.0);
        let up = kernel_u_plus(&g, 3, &zero, 0.3, 0.1, None).unwrap();
        assert!(up.iter().flatten().all(|v| *v == 0.0));
    }

    /// `u⁺(D, t)` for one future slice equals
    /// `∫₀^D e^{(D-s)M} (1/δ) H̄⁺(s) C̃(t+δ) ds`
    /// with `H̄⁺(s) = (I - e^{sM}) H̄₁⁺`.
    #[test]
    fn u_plus_matches_quadrature_for_one_slice() {
        let g = bd_chain(5, 1.3, 0.8);
        let dt = 0.2;
        let d = 0.35;
        let m = 3;
        let ct = vec![vec![0.0; 5], vec![0.0, 0.0, 0.0, 2.0, 1.0]];
        let u = kernel_u_plus(&g, m, &ct, d, dt, Some(1 << 16)).unwrap();
        let gd = g.to_dense();
        let mm = gd.view((0, 0), (m, m)).into_owned() - DMatrix::<f64>::identity(m, m) / dt;
        let w = (DMatrix::<f64>::identity(m, m) / dt - gd.view((0, 0), (m, m)))
            .try_inverse()
            .unwrap()
            * gd.view((0, m), (m, 2));
        let wc = nalgebra::DVector::from_column_slice(&matvec(&w, &ct[1][m..]));
        for x in 0..m {
            let integrand = |s: f64| {
                let hs = &wc - expm_taylor(&(&mm * s)) * &wc;
                let out = expm_taylor(&(&mm * (d - s))) * hs / dt;
                out[x]
            };
            let want = integrate(integrand, 0.0, d, 1e-13, 1e-12).unwrap();
            // backward-Euler exponential is first order in 1/k
            assert!((u[0][x] - want).abs() < 1e-5 * want.abs().max(1e-3), "{x}: {} vs {want}", u[0][x]);
        }
        assert!(u[1].iter().all(|v| *v == 0.0));
    }

    fn bs_chain(n: usize) -> (GeneratorMatrix, usize, Vec<f64>) {
        let model = bs_model(0.05, 0.0, 0.3).unwrap();
        let grid = build_grid(18f64.ln(), 360f64.ln(), 90f64.ln(), 95f64.ln(), n, SplitPolicy::Proportional).unwrap();
        let g = build_generator(&model, &grid, 0.0, RatePolicy::Strict).unwrap();
        let f = grid.points().iter().map(|y| (y.exp() - 95.0).max(0.0)).collect();
        (g, grid.l_index(), f)
    }

    #[test]
    fn structured_and_dense_paths_agree() {
        let (g, l, f) = bs_chain(129);
        let time = TimeGrid::new(1.0 / 60.0, 0.25).unwrap();
        let a = price_finite_downin(&g, l, 1.0 / 12.0, &f, 0.05, 0.05, &time, SolverKind::Auto, None, true).unwrap();
        let b = price_finite_downin(&g, l, 1.0 / 12.0, &f, 0.05, 0.05, &time, SolverKind::Auto, None, false).unwrap();
        for s in 0..time.n_slices {
            for x in 0..g.dim() {
                let (p, q) = (a.discounted[s][x], b.discounted[s][x]);
                assert!((p - q).abs() < 1e-9 * (1.0 + p.abs()), "slice {s} state {x}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn matches_exact_lattice_oracle() {
        let mut g = bd_chain(12, 2.5, 3.0);
        g.tri.sup[3] = 1.5;
        g.tri.main[3] = -4.5;
        let f: Vec<f64> = (0..12).map(|i| (i as f64 - 5.0).max(0.0)).collect();
        let time = TimeGrid::new(0.1, 0.55).unwrap();
        let (l, d, r) = (5, 0.15, 0.08);
        for tick in [0.0, r] {
            let p = price_finite_downin(&g, l, d, &f, r, tick, &time, SolverKind::Lemke, Some(1 << 17), true).unwrap();
            let want = crate::oracle::finite_downin_exact(&g.to_dense(), l, d, &f, r, tick, 0.1, time.n_slices).unwrap();
            for s in 0..time.n_slices {
                for x in 0..12 {
                    let (a, b) = (p.discounted[s][x], want[s][x]);
                    assert!((a - b).abs() < 1e-5, "tick {tick} slice {s} state {x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_payoff_gives_zero_surface() {
        let (g, l, _) = bs_chain(40);
        let time = TimeGrid::new(0.1, 0.5).unwrap();
        let p = price_finite_downin(&g, l, 0.1, &vec![0.0; g.dim()], 0.05, 0.0, &time, SolverKind::Auto, None, true).unwrap();
        assert!(p.discounted.iter().flatten().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn down_in_is_below_vanilla_bermudan() {
        let (g, l, f) = bs_chain(80);
        let time = TimeGrid::new(1.0 / 30.0, 0.5).unwrap();
        let p = price_finite_downin(&g, l, 1.0 / 12.0, &f, 0.05, 0.05, &time, SolverKind::Auto, None, true).unwrap();
        for x in 0..g.dim() {
            assert!(p.discounted[0][x] >= -1e-12);
            assert!(p.discounted[0][x] <= p.c_f[0][x] + 1e-9);
        }
    }
}
