//! Restarted GMRES with right preconditioning.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    /// Relative residual target `||b - Ax|| <= tol ||b||`.
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 40,
            max_iter: 400,
            tol: 1e-12,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` where `apply` computes `A v` and `precond` applies an
/// approximate inverse. Returns the solution and the iteration count.
pub fn gmres<F, P>(apply: F, precond: P, b: &[f64], x0: Option<&[f64]>, opts: &GmresOptions) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let target = opts.tol * bnorm;
    let m = opts.restart.max(1);
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= target {
            return Ok((x, total));
        }
        if total >= opts.max_iter {
            return Err(Error::Singular(format!(
                "GMRES stalled at relative residual {:e}",
                beta / bnorm
            )));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < opts.max_iter {
            let z = precond(&v[k])?;
            let mut w = apply(&z);
            zs.push(z);
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            let hk1 = norm(&w);
            if hk1 > 0.0 {
                v.push(w.iter().map(|v| v / hk1).collect());
            } else {
                v.push(vec![0.0; n]);
            }
            k += 1;
            total += 1;
            if g[k].abs() <= target {
                break;
            }
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&zs[j]) {
                *xi += yj * zi;
            }
        }
        if k == 0 {
            return Err(Error::Singular("GMRES breakdown".into()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_nonsymmetric_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 60;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 4.0 } else { rng.random_range(-0.1..0.1) });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let apply = |v: &[f64]| (&a * DVector::from_column_slice(v)).as_slice().to_vec();
        let (x, _) = gmres(apply, |v: &[f64]| Ok(v.to_vec()), &b, None, &GmresOptions { restart: 10, ..Default::default() }).unwrap();
        let exact = a.clone().lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_preconditioner_needs_one_step() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 2.0, 5.0]);
        let inv = a.clone().try_inverse().unwrap();
        let apply = |v: &[f64]| (&a * DVector::from_column_slice(v)).as_slice().to_vec();
        let pre = |v: &[f64]| Ok((&inv * DVector::from_column_slice(v)).as_slice().to_vec());
        let (_, iters) = gmres(apply, pre, &[1.0, 2.0, 3.0], None, &GmresOptions::default()).unwrap();
        assert_eq!(iters, 1);
    }

    #[test]
    fn zero_rhs() {
        let (x, it) = gmres(|v: &[f64]| v.to_vec(), |v: &[f64]| Ok(v.to_vec()), &[0.0; 4], None, &GmresOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(it, 0);
    }
}
