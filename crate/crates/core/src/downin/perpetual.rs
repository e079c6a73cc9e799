//! Perpetual down-in options on a time-homogeneous chain.

use nalgebra::DMatrix;

use crate::blocks::{shifted_generator, Coupling, SplitGenerator};
use crate::ctmc::GeneratorMatrix;
use crate::error::{Error, Result};
use crate::numerics::{solve_lcp, LcpOperator, SolverKind};

/// Value of the perpetual American option with payoff `f`, from
/// `min((rI - G) c, c - f) = 0`.
pub fn vanilla_american_perpetual(g: &GeneratorMatrix, f: &[f64], r: f64, solver: SolverKind) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("perpetual pricing needs r > 0, got {r}")));
    }
    if f.len() != g.dim() {
        return Err(Error::InvalidParameter("payoff length differs from the chain".into()));
    }
    let a = shifted_generator(g, r, 1.0, true);
    let psi = a.apply(f);
    let z = solve_lcp(&a, &psi, solver, None)?.into_result()?;
    Ok(z.iter().zip(f).map(|(z, f)| z + f).collect())
}

/// Dense first-passage kernels of the perpetual problem, each `N × N`.
#[derive(Debug, Clone)]
pub struct PerpetualKernels {
    pub v_p: DMatrix<f64>,
    pub u1_plus: DMatrix<f64>,
    pub u2_plus: DMatrix<f64>,
    pub u_plus: DMatrix<f64>,
    pub u_minus: DMatrix<f64>,
    /// `h_p(r, x; y) = E_x[e^{-r τ} 1{Y_τ = y}]` at the Parisian time `τ`.
    pub h_p: DMatrix<f64>,
}

/// Builds the Parisian transform `H_p(r)` and its ingredients for the
/// barrier at state index `l_index` and window `window`.
pub fn parisian_transform(
    g: &GeneratorMatrix,
    l_index: usize,
    window: f64,
    r: f64,
    substeps: Option<usize>,
) -> Result<PerpetualKernels> {
    let n = g.dim();
    if l_index > n {
        return Err(Error::InvalidParameter("barrier index outside the chain".into()));
    }
    if !(r >= 0.0) || !(window >= 0.0) {
        return Err(Error::InvalidParameter("rate and window must be nonnegative".into()));
    }
    let m = l_index;
    let np = n - m;
    let zero = || DMatrix::<f64>::zeros(n, n);
    let (mut v_p, mut u1_plus, mut u2_plus, mut u_minus) = (zero(), zero(), zero(), zero());
    for i in m..n {
        u1_plus[(i, i)] = 1.0;
    }
    for i in 0..m {
        u_minus[(i, i)] = 1.0;
    }
    if m == 0 {
        let u_plus = u1_plus.clone();
        return Ok(PerpetualKernels {
            v_p,
            u1_plus,
            u2_plus,
            u_plus,
            u_minus,
            h_p: zero(),
        });
    }
    let s = SplitGenerator::new(g, m, false);
    let e = s.below.expm(window, substeps)?.apply_matrix(&DMatrix::identity(m, m));
    v_p.view_mut((0, 0), (m, m)).copy_from(&e);
    let disc = (-r * window).exp();
    if np > 0 {
        let w = s.below.resolvent(r, 1.0)?.solve_matrix(&s.up);
        let ew = &e * &w * disc;
        u1_plus.view_mut((0, m), (m, np)).copy_from(&w);
        u2_plus.view_mut((0, m), (m, np)).copy_from(&ew);
        let q = s.above.resolvent(r, 1.0)?.solve_matrix(&s.down);
        u_minus.view_mut((m, 0), (np, m)).copy_from(&q);
    }
    let u_plus = &u1_plus - &u2_plus;
    let mut u_p = zero();
    u_p.view_mut((0, 0), (m, n)).copy_from(&u_plus.view((0, 0), (m, n)));
    u_p.view_mut((m, 0), (np, n)).copy_from(&u_minus.view((m, 0), (np, n)));
    let lhs = DMatrix::<f64>::identity(n, n) - u_p;
    let h_p = lhs
        .lu()
        .solve(&(&v_p * disc))
        .ok_or_else(|| Error::Singular("I - U_p in the Parisian transform".into()))?;
    Ok(PerpetualKernels {
        v_p,
        u1_plus,
        u2_plus,
        u_plus,
        u_minus,
        h_p,
    })
}

/// Perpetual down-in values on the grid.
#[derive(Debug, Clone)]
pub struct PerpetualDownIn {
    /// Vanilla American value started at the Parisian time.
    pub c_p: Vec<f64>,
    pub values: Vec<f64>,
}

/// `C_pi = H_p(r) c_p` without forming `H_p`.
///
/// `structured` enables the tridiagonal path for birth–death chains, where
/// the slice system collapses to one unknown.
pub fn price_perpetual_downin(
    g: &GeneratorMatrix,
    l_index: usize,
    window: f64,
    f: &[f64],
    r: f64,
    solver: SolverKind,
    substeps: Option<usize>,
    structured: bool,
) -> Result<PerpetualDownIn> {
    let c_p = vanilla_american_perpetual(g, f, r, solver)?;
    let n = g.dim();
    let m = l_index;
    if m > n {
        return Err(Error::InvalidParameter("barrier index outside the chain".into()));
    }
    if m == 0 {
        return Ok(PerpetualDownIn {
            c_p,
            values: vec![0.0; n],
        });
    }
    let s = SplitGenerator::new(g, m, structured);
    let disc = (-r * window).exp();
    let expm = s.below.expm(window, substeps)?;
    let r_minus: Vec<f64> = expm.apply(&c_p[..m]).iter().map(|v| v * disc).collect();
    if m == n {
        return Ok(PerpetualDownIn { c_p, values: r_minus });
    }
    let (cols_up, cols_dn) = s.coupling_columns();
    let up = s.up.select_columns(cols_up.iter());
    let w = s.below.resolvent(r, 1.0)?.solve_matrix(&up);
    let p = &w - expm.apply_matrix(&w) * disc;
    let down = s.down.select_columns(cols_dn.iter());
    let q = s.above.resolvent(r, 1.0)?.solve_matrix(&down);
    let coupling = Coupling::new(p, q, cols_up, cols_dn)?;
    let values = coupling.solve(&r_minus, &vec![0.0; n - m]);
    Ok(PerpetualDownIn { c_p, values })
}
