//! Action of the matrix exponential by repeated backward-Euler substeps,
//! `exp(tA) b ≈ (I - tA/k)^{-k} b`.

use nalgebra::{DMatrix, DVector};

use super::tridiag::{TriDiag, TriFactor};
use crate::error::{Error, Result};

/// Substep count used when the caller does not pick one.
pub fn default_substeps(t: f64, norm_inf: f64) -> usize {
    let k = (8.0 * t * norm_inf).ceil();
    if k.is_finite() {
        (k as usize).max(64)
    } else {
        64
    }
}

pub fn dense_norm_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// A borrowed operand for [`expm_action`].
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Dense(&'a DMatrix<f64>),
    Tri(&'a TriDiag),
}

impl Operand<'_> {
    pub fn norm_inf(&self) -> f64 {
        match self {
            Operand::Dense(a) => dense_norm_inf(a),
            Operand::Tri(a) => a.norm_inf(),
        }
    }
}

/// `exp(tA) b` with `k` substeps; `k = None` selects [`default_substeps`].
pub fn expm_action(a: Operand<'_>, b: &[f64], t: f64, k: Option<usize>) -> Result<Vec<f64>> {
    Ok(BackwardEuler::new(a, t, k)?.apply(b))
}

/// Precomputed backward-Euler propagator approximating `exp(tA)`.
///
/// The tridiagonal variant keeps one Thomas factorisation and performs `k`
/// sweeps per application. The dense variant forms the operator explicitly,
/// so each application is a single matrix-vector product.
#[derive(Debug, Clone)]
pub enum BackwardEuler {
    Identity,
    Tri { factor: TriFactor, k: usize },
    Dense(DMatrix<f64>),
}

impl BackwardEuler {
    pub fn new(a: Operand<'_>, t: f64, k: Option<usize>) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("duration must be finite and nonnegative, got {t}")));
        }
        let k = k.unwrap_or_else(|| default_substeps(t, a.norm_inf()));
        if k == 0 {
            return Err(Error::InvalidParameter("substep count must be at least 1".into()));
        }
        if t == 0.0 {
            return Ok(Self::Identity);
        }
        let h = t / k as f64;
        match a {
            Operand::Tri(a) => Ok(Self::Tri {
                factor: a.shifted(1.0, -h).factor()?,
                k,
            }),
            Operand::Dense(a) => {
                let n = a.nrows();
                let m = DMatrix::<f64>::identity(n, n) - a * h;
                let r = m
                    .try_inverse()
                    .ok_or_else(|| Error::Singular("backward-Euler substep matrix".into()))?;
                Ok(Self::Dense(matrix_power(&r, k)))
            }
        }
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity => b.to_vec(),
            Self::Tri { factor, k } => {
                let mut x = b.to_vec();
                for _ in 0..*k {
                    factor.solve_in_place(&mut x);
                }
                x
            }
            Self::Dense(e) => {
                let v = e * DVector::from_column_slice(b);
                v.as_slice().to_vec()
            }
        }
    }

    /// Applies the propagator to every column of `b`.
    pub fn apply_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Identity => b.clone(),
            Self::Dense(e) => e * b,
            Self::Tri { .. } => {
                let mut out = b.clone();
                for j in 0..b.ncols() {
                    let col = self.apply(b.column(j).as_slice());
                    out.column_mut(j).copy_from_slice(&col);
                }
                out
            }
        }
    }
}

pub fn matrix_power(a: &DMatrix<f64>, mut k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut base = a.clone();
    let mut first = true;
    while k > 0 {
        if k & 1 == 1 {
            result = if first { base.clone() } else { &result * &base };
            first = false;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::expm::expm_taylor;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_generator(n: usize, seed: u64, scale: f64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if i != j && rng.random::<f64>() < 0.4 {
                    let v = rng.random_range(0.0..scale);
                    g[(i, j)] = v;
                    s += v;
                }
            }
            g[(i, i)] = -s;
        }
        g
    }

    #[test]
    fn zero_matrix_is_identity() {
        let a = DMatrix::<f64>::zeros(3, 3);
        let b = [1.0, 2.0, 3.0];
        assert_eq!(expm_action(Operand::Dense(&a), &b, 2.0, Some(5)).unwrap(), b.to_vec());
        let t = TriDiag::zeros(3);
        assert_eq!(expm_action(Operand::Tri(&t), &b, 2.0, None).unwrap(), b.to_vec());
    }

    #[test]
    fn scalar_decay() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let k = 100_000;
        let v = expm_action(Operand::Dense(&a), &[1.0], 1.0, Some(k)).unwrap()[0];
        assert!((v - (-1.0f64).exp()).abs() < 1.0 / k as f64);
    }

    #[test]
    fn matches_taylor_oracle() {
        let g = random_generator(20, 3, 0.2);
        let b: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let exact = expm_taylor(&g) * DVector::from_vec(b.clone());
        let approx = expm_action(Operand::Dense(&g), &b, 1.0, Some(4096)).unwrap();
        for i in 0..20 {
            assert_relative_eq!(approx[i], exact[i], max_relative = 1e-4, epsilon = 1e-8);
        }
    }

    #[test]
    fn dense_and_tridiagonal_agree() {
        let n = 30;
        let sub = vec![1.3; n - 1];
        let sup = vec![0.7; n - 1];
        let main: Vec<f64> = (0..n).map(|i| -(if i > 0 { 1.3 } else { 0.0 }) - if i + 1 < n { 0.7 } else { 0.0 }).collect();
        let t = TriDiag::new(sub, main, sup).unwrap();
        let d = t.to_dense();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = expm_action(Operand::Tri(&t), &b, 0.8, Some(300)).unwrap();
        let y = expm_action(Operand::Dense(&d), &b, 0.8, Some(300)).unwrap();
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn first_order_error_decay() {
        let g = random_generator(12, 11, 2.0);
        let b: Vec<f64> = (0..12).map(|i| 1.0 + i as f64).collect();
        let exact = expm_taylor(&g) * DVector::from_vec(b.clone());
        let err = |k: usize| {
            let v = expm_action(Operand::Dense(&g), &b, 1.0, Some(k)).unwrap();
            v.iter().zip(exact.iter()).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max)
        };
        let mut prev = err(128);
        for k in [256, 512, 1024] {
            let e = err(k);
            assert!(e <= 0.75 * prev, "k={k}: {e} vs {prev}");
            prev = e;
        }
    }

    #[test]
    fn default_substeps_floor() {
        assert_eq!(default_substeps(0.0, 10.0), 64);
        assert_eq!(default_substeps(1.0, 100.0), 800);
    }
}
