use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals.
///
/// `sub[i]` is entry `(i + 1, i)` and `sup[i]` is entry `(i, i + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiag {
    pub sub: Vec<f64>,
    pub main: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TriDiag {
    pub fn new(sub: Vec<f64>, main: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = main.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::InvalidParameter(format!(
                "diagonal lengths {}, {}, {} are inconsistent",
                sub.len(),
                n,
                sup.len()
            )));
        }
        Ok(Self { sub, main, sup })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            sub: vec![0.0; n.saturating_sub(1)],
            main: vec![0.0; n],
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n);
        t.main.iter_mut().for_each(|d| *d = 1.0);
        t
    }

    pub fn dim(&self) -> usize {
        self.main.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.main[i]
        } else if j == i + 1 {
            self.sup[i]
        } else if i == j + 1 {
            self.sub[j]
        } else {
            0.0
        }
    }

    /// Returns `alpha * I + beta * self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        Self {
            sub: self.sub.iter().map(|v| beta * v).collect(),
            main: self.main.iter().map(|v| alpha + beta * v).collect(),
            sup: self.sup.iter().map(|v| beta * v).collect(),
        }
    }

    /// Principal submatrix on the contiguous index range `lo..hi`.
    pub fn block(&self, lo: usize, hi: usize) -> Self {
        Self {
            sub: self.sub[lo..hi.saturating_sub(1).max(lo)].to_vec(),
            main: self.main[lo..hi].to_vec(),
            sup: self.sup[lo..hi.saturating_sub(1).max(lo)].to_vec(),
        }
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.main[i].abs();
                if i > 0 {
                    s += self.sub[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.sup[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.main[i] * x[i];
            if i > 0 {
                s += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    pub fn factor(&self) -> Result<TriFactor> {
        TriFactor::new(self)
    }
}

/// Thomas-algorithm factorisation, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct TriFactor {
    sub: Vec<f64>,
    // modified super-diagonal and reciprocal pivots
    cp: Vec<f64>,
    inv_piv: Vec<f64>,
}

impl TriFactor {
    pub fn new(a: &TriDiag) -> Result<Self> {
        let n = a.dim();
        let scale = a.norm_inf().max(f64::MIN_POSITIVE);
        let mut cp = vec![0.0; n.saturating_sub(1)];
        let mut inv_piv = vec![0.0; n];
        let mut prev_cp = 0.0;
        for i in 0..n {
            let piv = if i == 0 {
                a.main[0]
            } else {
                a.main[i] - a.sub[i - 1] * prev_cp
            };
            if !piv.is_finite() || piv.abs() <= 1e-300_f64.max(1e-15 * scale) {
                return Err(Error::Singular(format!("zero pivot at row {i} of tridiagonal solve")));
            }
            inv_piv[i] = 1.0 / piv;
            if i + 1 < n {
                prev_cp = a.sup[i] * inv_piv[i];
                cp[i] = prev_cp;
            }
        }
        Ok(Self {
            sub: a.sub.clone(),
            cp,
            inv_piv,
        })
    }

    pub fn dim(&self) -> usize {
        self.inv_piv.len()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        x[0] *= self.inv_piv[0];
        for i in 1..n {
            x[i] = (x[i] - self.sub[i - 1] * x[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn solve_tridiag(a: &TriDiag, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(Error::InvalidParameter("right-hand side length mismatch".into()));
    }
    Ok(a.factor()?.solve(b))
}
