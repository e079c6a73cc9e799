//! Splitting a spatial generator into the blocks below and above `L`.

use nalgebra::{DMatrix, DVector};

use crate::ctmc::GeneratorMatrix;
use crate::error::{Error, Result};
use crate::numerics::{BackwardEuler, LcpMatrix, Operand, TriDiag, TriFactor};

/// A square diagonal block, tridiagonal when the chain is birth–death.
#[derive(Debug, Clone)]
pub enum Block {
    Tri(TriDiag),
    Dense(DMatrix<f64>),
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Self::Tri(t) => t.dim(),
            Self::Dense(d) => d.nrows(),
        }
    }

    /// `alpha I - beta A`
    pub fn resolvent(&self, alpha: f64, beta: f64) -> Result<Solver> {
        match self {
            Self::Tri(t) => Ok(Solver::Tri(t.shifted(alpha, -beta).factor()?)),
            Self::Dense(d) => {
                let n = d.nrows();
                let m = DMatrix::<f64>::identity(n, n) * alpha - d * beta;
                m.try_inverse()
                    .map(Solver::Dense)
                    .ok_or_else(|| Error::Singular("resolvent of generator block".into()))
            }
        }
    }

    pub fn expm(&self, t: f64, k: Option<usize>) -> Result<BackwardEuler> {
        match self {
            Self::Tri(a) => BackwardEuler::new(Operand::Tri(a), t, k),
            Self::Dense(a) => BackwardEuler::new(Operand::Dense(a), t, k),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Tri(t) => t.to_dense(),
            Self::Dense(d) => d.clone(),
        }
    }
}

/// Applies the inverse of a factored matrix.
#[derive(Debug, Clone)]
pub enum Solver {
    Tri(TriFactor),
    Dense(DMatrix<f64>),
}

impl Solver {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Self::Tri(f) => f.solve(b),
            Self::Dense(inv) => (inv * DVector::from_column_slice(b)).as_slice().to_vec(),
        }
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Dense(inv) => inv * b,
            Self::Tri(f) => {
                let mut out = b.clone();
                for j in 0..b.ncols() {
                    let col = f.solve(b.column(j).as_slice());
                    out.column_mut(j).copy_from_slice(&col);
                }
                out
            }
        }
    }
}

/// The four blocks of a generator split at index `m` (the first state at or
/// above `L`).
#[derive(Debug, Clone)]
pub struct SplitGenerator {
    pub m: usize,
    pub below: Block,
    pub above: Block,
    /// rates from below to above, `m × (N - m)`
    pub up: DMatrix<f64>,
    /// rates from above to below, `(N - m) × m`
    pub down: DMatrix<f64>,
    pub birth_death: bool,
}

impl SplitGenerator {
    /// Tridiagonal blocks are used for birth–death chains unless `structured`
    /// is false, in which case every block is dense.
    pub fn new(g: &GeneratorMatrix, m: usize, structured: bool) -> Self {
        let n = g.dim();
        let birth_death = g.is_birth_death() && structured;
        let (below, above) = if birth_death {
            (Block::Tri(g.tri.block(0, m)), Block::Tri(g.tri.block(m, n)))
        } else {
            let d = g.to_dense();
            (
                Block::Dense(d.view((0, 0), (m, m)).into_owned()),
                Block::Dense(d.view((m, m), (n - m, n - m)).into_owned()),
            )
        };
        let up = DMatrix::from_fn(m, n - m, |i, j| g.get(i, m + j));
        let down = DMatrix::from_fn(n - m, m, |i, j| g.get(m + i, j));
        Self {
            m,
            below,
            above,
            up,
            down,
            birth_death,
        }
    }

    pub fn dim(&self) -> usize {
        self.m + self.above.dim()
    }

    pub fn n_above(&self) -> usize {
        self.above.dim()
    }

    /// Above-region states entered directly from below, and below-region
    /// states entered directly from above. Dense splits keep every column.
    pub fn coupling_columns(&self) -> (Vec<usize>, Vec<usize>) {
        if !self.birth_death {
            return ((0..self.n_above()).collect(), (0..self.m).collect());
        }
        let nonzero = |a: &DMatrix<f64>| (0..a.ncols()).filter(|&j| a.column(j).iter().any(|v| *v != 0.0)).collect();
        (nonzero(&self.up), nonzero(&self.down))
    }
}

/// `αI - βG` for a generator, tridiagonal when possible.
pub fn shifted_generator(g: &GeneratorMatrix, alpha: f64, beta: f64, structured: bool) -> LcpMatrix {
    if g.is_birth_death() && structured {
        LcpMatrix::Tri(g.tri.shifted(alpha, -beta))
    } else {
        let n = g.dim();
        LcpMatrix::Dense(DMatrix::<f64>::identity(n, n) * alpha - g.to_dense() * beta)
    }
}

/// The slice system
///
/// ```text
/// x₋ = P x₊ + r₋
/// x₊ = Q x₋ + r₊
/// ```
///
/// where `P` only reads the above-region entries in `cols_up` and `Q` only
/// the below-region entries in `cols_dn`. Eliminating everything else leaves
/// a system on the `cols_dn` entries of `x₋`, which is `1 × 1` for a
/// birth–death chain.
#[derive(Debug, Clone)]
pub struct Coupling {
    cols_up: Vec<usize>,
    cols_dn: Vec<usize>,
    /// `m × |cols_up|`
    p: DMatrix<f64>,
    /// `n₊ × |cols_dn|`
    q: DMatrix<f64>,
    reduced: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Coupling {
    pub fn new(p: DMatrix<f64>, q: DMatrix<f64>, cols_up: Vec<usize>, cols_dn: Vec<usize>) -> Result<Self> {
        let k = cols_dn.len();
        let mut sys = DMatrix::<f64>::identity(k, k);
        if !cols_up.is_empty() && k > 0 {
            let ps = p.select_rows(cols_dn.iter());
            let qs = q.select_rows(cols_up.iter());
            sys -= ps * qs;
        }
        let reduced = sys.lu();
        if k > 0 && !reduced.is_invertible() {
            return Err(Error::Singular("slice coupling system".into()));
        }
        Ok(Self {
            cols_up,
            cols_dn,
            p,
            q,
            reduced,
        })
    }

    pub fn solve(&self, r_minus: &[f64], r_plus: &[f64]) -> Vec<f64> {
        let m = r_minus.len();
        let np = r_plus.len();
        let ps = |xs: &[f64]| -> DVector<f64> { DVector::from_iterator(self.cols_up.len(), self.cols_up.iter().map(|&j| xs[j])) };
        // b = x₋[cols_dn]
        let mut rhs = DVector::from_iterator(self.cols_dn.len(), self.cols_dn.iter().map(|&i| r_minus[i]));
        if !self.cols_up.is_empty() {
            let pr = &self.p * ps(r_plus);
            for (k, &i) in self.cols_dn.iter().enumerate() {
                rhs[k] += pr[i];
            }
        }
        let b = if self.cols_dn.is_empty() {
            rhs
        } else {
            self.reduced.solve(&rhs).expect("checked invertible")
        };
        let mut x = vec![0.0; m + np];
        let mut xp = r_plus.to_vec();
        if !self.cols_dn.is_empty() {
            let qb = &self.q * &b;
            for (v, w) in xp.iter_mut().zip(qb.iter()) {
                *v += w;
            }
        }
        let mut xm = r_minus.to_vec();
        if !self.cols_up.is_empty() {
            let pa = &self.p * ps(&xp);
            for (v, w) in xm.iter_mut().zip(pa.iter()) {
                *v += w;
            }
        }
        x[..m].copy_from_slice(&xm);
        x[m..].copy_from_slice(&xp);
        x
    }
}

pub fn matvec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{build_generator, build_grid, RatePolicy, SplitPolicy};
    use crate::models::bs_model;

    #[test]
    fn blocks_reassemble_generator() {
        let m = bs_model(0.1, 0.05, 0.3).unwrap();
        let grid = build_grid(18.0, 360.0, 90.0, 95.0, 20, SplitPolicy::Proportional).unwrap();
        let g = build_generator(&m, &grid, 0.0, RatePolicy::Strict).unwrap();
        let s = SplitGenerator::new(&g, grid.l_index(), true);
        let d = g.to_dense();
        let k = s.m;
        assert_eq!(s.below.to_dense(), d.view((0, 0), (k, k)).into_owned());
        assert_eq!(s.above.to_dense(), d.view((k, k), (21 - k, 21 - k)).into_owned());
        assert_eq!(s.up, d.view((0, k), (k, 21 - k)).into_owned());
        assert_eq!(s.down, d.view((k, 0), (21 - k, k)).into_owned());
        // a birth–death chain couples the two regions through one edge each way
        assert_eq!(s.up.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(s.down.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn coupling_matches_full_solve() {
        // x₋ = P x₊ + r₋, x₊ = Q x₋ + r₊ with P reading x₊[0], Q reading x₋[2]
        let p = DMatrix::from_column_slice(3, 1, &[0.1, 0.2, 0.3]);
        let q = DMatrix::from_column_slice(2, 1, &[0.4, 0.5]);
        let c = Coupling::new(p.clone(), q.clone(), vec![0], vec![2]).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0], &[4.0, 5.0]);
        let mut full = DMatrix::<f64>::identity(5, 5);
        for i in 0..3 {
            full[(i, 3)] -= p[(i, 0)];
        }
        for i in 0..2 {
            full[(3 + i, 2)] -= q[(i, 0)];
        }
        let y = full.lu().solve(&DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        for i in 0..5 {
            assert!((x[i] - y[i]).abs() < 1e-14, "{i}: {} vs {}", x[i], y[i]);
        }
    }

    #[test]
    fn tri_and_dense_resolvents_agree() {
        let t = TriDiag::new(vec![1.0, 2.0], vec![-3.0, -4.0, -2.0], vec![2.0, 1.0]).unwrap();
        let a = Block::Tri(t.clone()).resolvent(0.5, 1.0).unwrap();
        let b = Block::Dense(t.to_dense()).resolvent(0.5, 1.0).unwrap();
        let x = a.solve(&[1.0, 2.0, 3.0]);
        let y = b.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            assert!((x[i] - y[i]).abs() < 1e-12);
        }
    }
}
