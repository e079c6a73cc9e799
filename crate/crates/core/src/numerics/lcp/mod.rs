//! Linear complementarity problems `z >= 0, w = Az + psi >= 0, z'w = 0`.

mod howard;
mod lemke;
mod psor;

use nalgebra::{DMatrix, DVector};

use super::tridiag::TriDiag;
use crate::error::{Error, Result};

pub use howard::{howard_solve, HowardOptions};
pub use lemke::{lemke_solve, LemkeOptions};
pub use psor::{psor_solve, PsorOptions};

/// Matrix access needed by the LCP solvers.
pub trait LcpOperator: Sync {
    fn dim(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    /// `(A x)_i`
    fn row_dot(&self, i: usize, x: &[f64]) -> f64;
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.row_dot(i, x)).collect()
    }
    /// Solves the system whose free rows are those of `A` and whose pinned
    /// rows read `x_i = rhs_i`.
    fn solve_pinned(&self, pinned: &[bool], rhs: &[f64]) -> Result<Vec<f64>>;
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LcpMatrix {
    Dense(DMatrix<f64>),
    Tri(TriDiag),
}

impl LcpOperator for LcpMatrix {
    fn dim(&self) -> usize {
        match self {
            Self::Dense(a) => a.nrows(),
            Self::Tri(a) => a.dim(),
        }
    }

    fn diag(&self, i: usize) -> f64 {
        match self {
            Self::Dense(a) => a[(i, i)],
            Self::Tri(a) => a.main[i],
        }
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            Self::Dense(a) => a.row(i).iter().zip(x).map(|(a, b)| a * b).sum(),
            Self::Tri(a) => {
                let mut s = a.main[i] * x[i];
                if i > 0 {
                    s += a.sub[i - 1] * x[i - 1];
                }
                if i + 1 < a.dim() {
                    s += a.sup[i] * x[i + 1];
                }
                s
            }
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Dense(a) => (a * DVector::from_column_slice(x)).as_slice().to_vec(),
            Self::Tri(a) => a.matvec(x),
        }
    }

    fn solve_pinned(&self, pinned: &[bool], rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Dense(a) => {
                let mut m = a.clone();
                for (i, &p) in pinned.iter().enumerate() {
                    if p {
                        m.row_mut(i).fill(0.0);
                        m[(i, i)] = 1.0;
                    }
                }
                m.lu()
                    .solve(&DVector::from_column_slice(rhs))
                    .map(|v| v.as_slice().to_vec())
                    .ok_or_else(|| Error::Singular("pinned LCP system".into()))
            }
            Self::Tri(a) => {
                let mut m = a.clone();
                let n = m.dim();
                for (i, &p) in pinned.iter().enumerate() {
                    if p {
                        m.main[i] = 1.0;
                        if i > 0 {
                            m.sub[i - 1] = 0.0;
                        }
                        if i + 1 < n {
                            m.sup[i] = 0.0;
                        }
                    }
                }
                Ok(m.factor()?.solve(rhs))
            }
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Dense(a) => a.clone(),
            Self::Tri(a) => a.to_dense(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpProblem {
    pub a: LcpMatrix,
    pub psi: Vec<f64>,
}

impl LcpProblem {
    pub fn new(a: LcpMatrix, psi: Vec<f64>) -> Result<Self> {
        if let LcpMatrix::Dense(m) = &a {
            if m.nrows() != m.ncols() {
                return Err(Error::InvalidParameter("LCP matrix must be square".into()));
            }
        }
        if a.dim() != psi.len() {
            return Err(Error::InvalidParameter(format!(
                "LCP dimension {} does not match vector length {}",
                a.dim(),
                psi.len()
            )));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("LCP vector has non-finite entries".into()));
        }
        Ok(Self { a, psi })
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcpStatus {
    Solved,
    RayTermination,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub z: Vec<f64>,
    /// `max_i |min(z_i, w_i)|`
    pub residual: f64,
    pub iterations: usize,
    pub status: LcpStatus,
}

impl LcpSolution {
    pub fn into_result(self) -> Result<Vec<f64>> {
        match self.status {
            LcpStatus::Solved => Ok(self.z),
            s => Err(Error::LcpFailure(format!(
                "{s:?} after {} iterations (residual {:e})",
                self.iterations, self.residual
            ))),
        }
    }
}

pub fn complementarity_residual<A: LcpOperator + ?Sized>(a: &A, psi: &[f64], z: &[f64]) -> f64 {
    let w = a.apply(z);
    z.iter()
        .zip(w.iter().zip(psi))
        .map(|(&z, (&w, &p))| z.min(w + p).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lemke,
    Psor,
    Howard,
    /// Lemke on small problems, policy iteration otherwise.
    #[default]
    Auto,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lemke" => Ok(Self::Lemke),
            "psor" => Ok(Self::Psor),
            "howard" | "policy" => Ok(Self::Howard),
            "auto" => Ok(Self::Auto),
            other => Err(Error::InvalidParameter(format!("unknown LCP solver '{other}'"))),
        }
    }
}

/// Largest problem handed to Lemke under [`SolverKind::Auto`].
pub const AUTO_LEMKE_MAX_DIM: usize = 200;

/// Solves `LCP(A, psi)`; check [`LcpSolution::status`] or call
/// [`LcpSolution::into_result`]. `warm` seeds policy iteration with an active set.
pub fn solve_lcp<A: LcpOperator + ?Sized>(
    a: &A,
    psi: &[f64],
    kind: SolverKind,
    warm: Option<&[bool]>,
) -> Result<LcpSolution> {
    let kind = match kind {
        SolverKind::Auto if a.dim() <= AUTO_LEMKE_MAX_DIM => SolverKind::Lemke,
        SolverKind::Auto => SolverKind::Howard,
        k => k,
    };
    let sol = match kind {
        SolverKind::Lemke => lemke_solve(&a.to_dense(), psi, &LemkeOptions::default())?,
        SolverKind::Psor => psor_solve(a, psi, &PsorOptions::default())?,
        _ => {
            // From a cold start the free boundary can move one node per step.
            let opts = HowardOptions {
                max_iter: HowardOptions::default().max_iter.max(2 * a.dim() + 100),
                ..Default::default()
            };
            howard_solve(a, psi, warm, &opts)?
        }
    };
    Ok(sol)
}

/// Active set of a solution, suitable as a warm start for [`howard_solve`].
pub fn active_set(z: &[f64]) -> Vec<bool> {
    z.iter().map(|&v| v <= 0.0).collect()
}
