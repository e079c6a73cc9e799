use super::{complementarity_residual, LcpOperator, LcpSolution, LcpStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PsorOptions {
    pub relaxation: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PsorOptions {
    fn default() -> Self {
        Self {
            relaxation: 1.2,
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

/// Projected successive over-relaxation.
pub fn psor_solve<A: LcpOperator + ?Sized>(a: &A, psi: &[f64], opts: &PsorOptions) -> Result<LcpSolution> {
    let n = a.dim();
    if psi.len() != n {
        return Err(Error::InvalidParameter("PSOR: dimension mismatch".into()));
    }
    let diag: Vec<f64> = (0..n).map(|i| a.diag(i)).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter(format!("PSOR: nonpositive diagonal at row {i}")));
    }
    let mut z = vec![0.0; n];
    let mut iterations = 0;
    let mut status = LcpStatus::MaxIterations;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut change: f64 = 0.0;
        for i in 0..n {
            let r = a.row_dot(i, &z) + psi[i];
            let next = (z[i] - opts.relaxation * r / diag[i]).max(0.0);
            change = change.max((next - z[i]).abs());
            z[i] = next;
        }
        if change <= opts.tol {
            status = LcpStatus::Solved;
            break;
        }
    }
    let residual = complementarity_residual(a, psi, &z);
    Ok(LcpSolution {
        z,
        residual,
        iterations,
        status,
    })
}
