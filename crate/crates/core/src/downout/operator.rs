use nalgebra::DVector;
use rayon::prelude::*;

use super::space::AugmentedStateSpace;
use crate::ctmc::GeneratorMatrix;
use crate::error::{Error, Result};
use crate::numerics::gmres::{gmres, GmresOptions};
use crate::numerics::{LcpOperator, TriDiag};

/// `αI - βG̃` on the augmented chain, never stored densely.
///
/// Pinned solves are exact for birth–death chains: each age level is a
/// tridiagonal system whose only unknown input is the value at `L⁺`, so the
/// levels are swept from the knock-out level down, carrying an affine
/// dependence on that value. Jump chains use the same sweep on the
/// tridiagonal part as a GMRES preconditioner.
#[derive(Debug, Clone)]
pub struct AugmentedOperator<'a> {
    pub space: AugmentedStateSpace,
    pub g: &'a GeneratorMatrix,
    pub alpha: f64,
    pub beta: f64,
    /// Disable to force dense pinned solves.
    pub structured: bool,
}

impl<'a> AugmentedOperator<'a> {
    pub fn new(space: AugmentedStateSpace, g: &'a GeneratorMatrix, alpha: f64, beta: f64, structured: bool) -> Result<Self> {
        if g.dim() != space.n {
            return Err(Error::InvalidParameter("augmented space and generator disagree".into()));
        }
        Ok(Self {
            space,
            g,
            alpha,
            beta,
            structured,
        })
    }

    /// `(G z)_x` for `x` in `rows`.
    fn spatial_rows(&self, z: &[f64], rows: std::ops::Range<usize>) -> Vec<f64> {
        let t = &self.g.tri;
        let n = t.dim();
        let mut out: Vec<f64> = rows
            .clone()
            .map(|i| {
                let mut s = t.main[i] * z[i];
                if i > 0 {
                    s += t.sub[i - 1] * z[i - 1];
                }
                if i + 1 < n {
                    s += t.sup[i] * z[i + 1];
                }
                s
            })
            .collect();
        if let Some(far) = &self.g.far {
            let v = far.view((rows.start, 0), (rows.len(), n)) * DVector::from_column_slice(z);
            for (o, v) in out.iter_mut().zip(v.iter()) {
                *o += v;
            }
        }
        out
    }

    /// Spatial vector seen from level `d`: own values below `L`, level-0
    /// values above.
    fn level_view(&self, x: &[f64], d: usize) -> Vec<f64> {
        self.space.spatial_slice(x, d)
    }

    /// Row `(d, xs)` of `G̃` applied to `x`.
    fn gtilde_row(&self, d: usize, xs: usize, x: &[f64]) -> f64 {
        let s = &self.space;
        if d == s.k {
            return 0.0;
        }
        let n = s.n;
        let at = |y: usize| if y < s.m { x[s.index(d, y)] } else { x[y] };
        let t = &self.g.tri;
        let mut acc = t.main[xs] * at(xs);
        if xs > 0 {
            acc += t.sub[xs - 1] * at(xs - 1);
        }
        if xs + 1 < n {
            acc += t.sup[xs] * at(xs + 1);
        }
        if let Some(far) = &self.g.far {
            for y in 0..n {
                let w = far[(xs, y)];
                if w != 0.0 {
                    acc += w * at(y);
                }
            }
        }
        if xs < s.m {
            acc += (x[s.index(d + 1, xs)] - x[s.index(d, xs)]) / s.dd;
        }
        acc
    }

    /// Exact pinned solve using only the tridiagonal part of the generator.
    fn sweep_solve(&self, t: &TriDiag, pinned: &[bool], rhs: &[f64]) -> Result<Vec<f64>> {
        let s = &self.space;
        let (n, m, k) = (s.n, s.m, s.k);
        let (al, be, rd) = (self.alpha, self.beta, 1.0 / s.dd);
        let mut x = vec![0.0; s.dim()];
        // x_d = a_d + u c_d with u the value at (0, L⁺)
        let mut a_next = vec![0.0; m];
        let mut c_next = vec![0.0; m];
        for (j, idx) in s.level_range(k).enumerate() {
            a_next[j] = if pinned[idx] { rhs[idx] } else { rhs[idx] / al };
            x[idx] = a_next[j];
        }
        let couple_up = if m < n && m > 0 { t.sup[m - 1] } else { 0.0 };
        let mut levels_a = vec![Vec::new(); k];
        let mut levels_c = vec![Vec::new(); k];
        for d in (0..k).rev() {
            if m == 0 {
                break;
            }
            let base = s.index(d, 0);
            let mut main = vec![0.0; m];
            let mut sub = vec![0.0; m.saturating_sub(1)];
            let mut sup = vec![0.0; m.saturating_sub(1)];
            let mut ra = vec![0.0; m];
            let mut rc = vec![0.0; m];
            for i in 0..m {
                if pinned[base + i] {
                    main[i] = 1.0;
                    ra[i] = rhs[base + i];
                    continue;
                }
                main[i] = al + be * rd - be * t.main[i];
                if i > 0 {
                    sub[i - 1] = -be * t.sub[i - 1];
                }
                if i + 1 < m {
                    sup[i] = -be * t.sup[i];
                }
                ra[i] = rhs[base + i] + be * rd * a_next[i];
                rc[i] = be * rd * c_next[i];
                if i == m - 1 {
                    rc[i] += be * couple_up;
                }
            }
            let f = TriDiag::new(sub, main, sup)?.factor()?;
            a_next = f.solve(&ra);
            c_next = f.solve(&rc);
            levels_a[d] = a_next.clone();
            levels_c[d] = c_next.clone();
        }
        // level 0 at or above L
        let np = n - m;
        let mut u = 0.0;
        if np > 0 {
            let mut main = vec![0.0; np];
            let mut sub = vec![0.0; np - 1];
            let mut sup = vec![0.0; np - 1];
            let mut r = vec![0.0; np];
            for j in 0..np {
                let i = m + j;
                if pinned[i] {
                    main[j] = 1.0;
                    r[j] = rhs[i];
                    continue;
                }
                main[j] = al - be * t.main[i];
                if j > 0 {
                    sub[j - 1] = -be * t.sub[i - 1];
                }
                if j + 1 < np {
                    sup[j] = -be * t.sup[i];
                }
                r[j] = rhs[i];
                if j == 0 && m > 0 {
                    let w = be * t.sub[i - 1];
                    main[0] -= w * levels_c[0][m - 1];
                    r[0] += w * levels_a[0][m - 1];
                }
            }
            let above = TriDiag::new(sub, main, sup)?.factor()?.solve(&r);
            u = above[0];
            x[m..n].copy_from_slice(&above);
        }
        for d in 0..k {
            if m == 0 {
                break;
            }
            let base = s.index(d, 0);
            for i in 0..m {
                x[base + i] = levels_a[d][i] + u * levels_c[d][i];
            }
        }
        Ok(x)
    }

    fn apply_pinned(&self, pinned: &[bool], x: &[f64]) -> Vec<f64> {
        let mut y = self.apply(x);
        for (i, &p) in pinned.iter().enumerate() {
            if p {
                y[i] = x[i];
            }
        }
        y
    }
}

impl LcpOperator for AugmentedOperator<'_> {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn diag(&self, i: usize) -> f64 {
        let (d, xs) = self.space.state(i);
        if d == self.space.k {
            return self.alpha;
        }
        let mut gd = self.g.tri.main[xs];
        if let Some(far) = &self.g.far {
            gd += far[(xs, xs)];
        }
        if xs < self.space.m {
            gd -= 1.0 / self.space.dd;
        }
        self.alpha - self.beta * gd
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (d, xs) = self.space.state(i);
        self.alpha * x[i] - self.beta * self.gtilde_row(d, xs, x)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let s = &self.space;
        let (n, m, k) = (s.n, s.m, s.k);
        let levels: Vec<Vec<f64>> = (0..=k)
            .into_par_iter()
            .map(|d| {
                let range = s.level_range(d);
                if d == k {
                    return x[range].iter().map(|v| self.alpha * v).collect();
                }
                let z = self.level_view(x, d);
                let rows = if d == 0 { 0..n } else { 0..m };
                let mut gz = self.spatial_rows(&z, rows);
                for i in 0..m {
                    gz[i] += (x[s.index(d + 1, i)] - z[i]) / s.dd;
                }
                x[range].iter().zip(&gz).map(|(v, g)| self.alpha * v - self.beta * g).collect()
            })
            .collect();
        levels.concat()
    }

    fn solve_pinned(&self, pinned: &[bool], rhs: &[f64]) -> Result<Vec<f64>> {
        if !self.structured {
            let a = self.to_dense();
            let mut a = a;
            for (i, &p) in pinned.iter().enumerate() {
                if p {
                    a.row_mut(i).fill(0.0);
                    a[(i, i)] = 1.0;
                }
            }
            return a
                .lu()
                .solve(&DVector::from_column_slice(rhs))
                .map(|v| v.as_slice().to_vec())
                .ok_or_else(|| Error::Singular("pinned augmented system".into()));
        }
        let t = self.g.tri.clone();
        if self.g.is_birth_death() {
            return self.sweep_solve(&t, pinned, rhs);
        }
        // the tridiagonal part keeps the full diagonal, so the sweep inverts
        // a diagonally dominant approximation of the jump operator
        let x0 = self.sweep_solve(&t, pinned, rhs)?;
        let opts = GmresOptions {
            restart: 60,
            max_iter: 600,
            tol: 1e-12,
        };
        let (x, iters) = gmres(
            |v| self.apply_pinned(pinned, v),
            |v| self.sweep_solve(&t, pinned, v),
            rhs,
            Some(&x0),
            &opts,
        )?;
        log::trace!("augmented GMRES converged in {iters} iterations");
        Ok(x)
    }
}
