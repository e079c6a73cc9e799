use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::{complementarity_residual, LcpMatrix, LcpSolution, LcpStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LemkeOptions {
    /// Pivot budget; `None` means `50 n + 100`.
    pub max_pivots: Option<usize>,
    /// Pivot entries below this (relative to the column scale) are ignored.
    pub pivot_tol: f64,
}

impl Default for LemkeOptions {
    fn default() -> Self {
        Self {
            max_pivots: None,
            pivot_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Var {
    W(usize),
    Z(usize),
    Z0,
}

impl Var {
    fn complement(self) -> Var {
        match self {
            Var::W(i) => Var::Z(i),
            Var::Z(i) => Var::W(i),
            Var::Z0 => Var::Z0,
        }
    }
}

struct Tableau {
    n: usize,
    // n rows of [w (n) | z (n) | z0 | rhs]
    t: Vec<f64>,
    basis: Vec<Var>,
}

impl Tableau {
    fn width(&self) -> usize {
        2 * self.n + 2
    }

    fn col(&self, v: Var) -> usize {
        match v {
            Var::W(i) => i,
            Var::Z(i) => self.n + i,
            Var::Z0 => 2 * self.n,
        }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, 2 * self.n + 1)
    }

    fn pivot(&mut self, row: usize, enter: Var) {
        let w = self.width();
        let c = self.col(enter);
        let p = self.at(row, c);
        for j in 0..w {
            self.t[row * w + j] /= p;
        }
        let prow: Vec<f64> = self.t[row * w..(row + 1) * w].to_vec();
        for r in 0..self.n {
            if r == row {
                continue;
            }
            let f = self.t[r * w + c];
            if f != 0.0 {
                for j in 0..w {
                    self.t[r * w + j] -= f * prow[j];
                }
                self.t[r * w + c] = 0.0;
            }
        }
        self.basis[row] = enter;
    }

    /// Lexicographic minimum-ratio test for the entering column. Ties between
    /// equal ratios are broken on the rows of the basis inverse, which sit in
    /// the `w` columns.
    fn lex_min_ratio(&self, enter: Var, tol: f64) -> Option<usize> {
        let c = self.col(enter);
        let mut cands: Vec<usize> = (0..self.n).filter(|&r| self.at(r, c) > tol).collect();
        if cands.is_empty() {
            return None;
        }
        let ratio = |r: usize, j: Option<usize>| {
            let num = match j {
                None => self.rhs(r),
                Some(j) => self.at(r, j),
            };
            num / self.at(r, c)
        };
        let mut key = None;
        loop {
            let best = cands.iter().map(|&r| ratio(r, key)).fold(f64::INFINITY, f64::min);
            let scale = best.abs().max(1.0);
            cands.retain(|&r| ratio(r, key) <= best + 1e-12 * scale);
            if cands.len() == 1 {
                return Some(cands[0]);
            }
            if let Some(r) = cands.iter().copied().find(|&r| self.basis[r] == Var::Z0) {
                return Some(r);
            }
            key = Some(match key {
                None => 0,
                Some(j) if j + 1 < self.n => j + 1,
                Some(_) => return Some(cands[0]),
            });
        }
    }
}

struct Trace(Option<std::fs::File>);

impl Trace {
    fn open() -> Self {
        if std::env::var("PARISIAN_LCP_TRACE").ok().as_deref() != Some("1") {
            return Self(None);
        }
        let path = std::env::var("PARISIAN_LCP_TRACE_FILE").unwrap_or_else(|_| "parisian-lcp-trace.log".into());
        Self(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .ok(),
        )
    }

    fn log(&mut self, step: usize, enter: Var, leave: Var) {
        if let Some(f) = self.0.as_mut() {
            let _ = writeln!(f, "{step}: enter {enter:?} leave {leave:?}");
        }
    }
}

/// Lemke's complementary pivoting with an all-ones covering vector.
pub fn lemke_solve(a: &DMatrix<f64>, psi: &[f64], opts: &LemkeOptions) -> Result<LcpSolution> {
    let n = psi.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::InvalidParameter("Lemke: dimension mismatch".into()));
    }
    if a.iter().chain(psi).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("Lemke: non-finite input".into()));
    }
    let op = LcpMatrix::Dense(a.clone());
    if n == 0 || psi.iter().all(|&q| q >= 0.0) {
        return Ok(LcpSolution {
            z: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
            status: LcpStatus::Solved,
        });
    }
    let max_pivots = opts.max_pivots.unwrap_or(50 * n + 100);
    let scale = a.iter().chain(psi).fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = opts.pivot_tol * scale;

    let w = 2 * n + 2;
    let mut t = vec![0.0; n * w];
    for r in 0..n {
        t[r * w + r] = 1.0;
        for c in 0..n {
            t[r * w + n + c] = -a[(r, c)];
        }
        t[r * w + 2 * n] = -1.0;
        t[r * w + 2 * n + 1] = psi[r];
    }
    let mut tab = Tableau {
        n,
        t,
        basis: (0..n).map(Var::W).collect(),
    };
    let mut trace = Trace::open();

    // First pivot: z0 replaces the most negative row; ties go to the last
    // index, which keeps every row lexicographically positive.
    let min_q = psi.iter().copied().fold(f64::INFINITY, f64::min);
    let row = (0..n).rev().find(|&r| psi[r] == min_q).unwrap();
    let mut leave = tab.basis[row];
    tab.pivot(row, Var::Z0);
    trace.log(0, Var::Z0, leave);

    let mut pivots = 1;
    let mut status = LcpStatus::Solved;
    loop {
        if leave == Var::Z0 {
            break;
        }
        if pivots >= max_pivots {
            status = LcpStatus::MaxIterations;
            break;
        }
        let enter = leave.complement();
        let Some(row) = tab.lex_min_ratio(enter, tol) else {
            status = LcpStatus::RayTermination;
            break;
        };
        leave = tab.basis[row];
        tab.pivot(row, enter);
        trace.log(pivots, enter, leave);
        pivots += 1;
    }

    let mut z = vec![0.0; n];
    for r in 0..n {
        if let Var::Z(j) = tab.basis[r] {
            z[j] = tab.rhs(r);
        }
    }
    if status == LcpStatus::Solved {
        if let Some(refined) = refine(a, psi, &z) {
            z = refined;
        }
    }
    let residual = complementarity_residual(&op, psi, &z);
    Ok(LcpSolution {
        z,
        residual,
        iterations: pivots,
        status,
    })
}

/// Re-solves the linear system on the final active set to remove pivoting
/// round-off; keeps the original if the refined point is worse.
fn refine(a: &DMatrix<f64>, psi: &[f64], z: &[f64]) -> Option<Vec<f64>> {
    let n = psi.len();
    let free: Vec<usize> = (0..n).filter(|&i| z[i] > 0.0).collect();
    let mut out = vec![0.0; n];
    if !free.is_empty() {
        let m = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -psi[i]));
        let sol = m.lu().solve(&rhs)?;
        for (k, &i) in free.iter().enumerate() {
            out[i] = sol[k].max(0.0);
        }
    }
    let op = LcpMatrix::Dense(a.clone());
    let before = complementarity_residual(&op, psi, z);
    let after = complementarity_residual(&op, psi, &out);
    (after <= before.max(1e-300)).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::lcp::brute_force_lcp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solve(a: &DMatrix<f64>, q: &[f64]) -> LcpSolution {
        lemke_solve(a, q, &LemkeOptions::default()).unwrap()
    }

    #[test]
    fn identity_nonnegative_rhs() {
        let s = solve(&DMatrix::identity(3, 3), &[1.0, 0.0, 2.0]);
        assert_eq!(s.z, vec![0.0; 3]);
        assert_eq!(s.status, LcpStatus::Solved);
    }

    #[test]
    fn identity_negative_rhs() {
        let s = solve(&DMatrix::identity(4, 4), &[-1.0; 4]);
        assert_eq!(s.status, LcpStatus::Solved);
        for v in s.z {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn textbook_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let s = solve(&a, &[-1.0, -1.0]);
        assert!((s.z[0] - 0.4).abs() < 1e-14);
        assert!((s.z[1] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn unsolvable_reports_ray() {
        // w = -z - 1 can never be nonnegative.
        let a = DMatrix::from_element(1, 1, -1.0);
        let s = solve(&a, &[-1.0]);
        assert_eq!(s.status, LcpStatus::RayTermination);
        assert!(s.clone().into_result().is_err());
    }

    #[test]
    fn degenerate_ties_terminate() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0, 2.0, 0.0, 1.0]);
        let s = solve(&a, &[-1.0, -1.0, -1.0]);
        assert_eq!(s.status, LcpStatus::Solved);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn matches_enumeration_on_p_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let n = rng.random_range(1..=6);
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = b.transpose() * &b + DMatrix::identity(n, n) * 0.5;
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = solve(&a, &q);
            let exact = brute_force_lcp(&a, &q).unwrap();
            for i in 0..n {
                assert!((s.z[i] - exact[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn trace_file_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.log");
        // Environment changes are process-wide; this test only adds a file.
        std::env::set_var("PARISIAN_LCP_TRACE_FILE", &path);
        std::env::set_var("PARISIAN_LCP_TRACE", "1");
        solve(&DMatrix::identity(2, 2), &[-1.0, -2.0]);
        std::env::remove_var("PARISIAN_LCP_TRACE");
        let text = std::fs::read_to_string(&path).unwrap_or_default();
        assert!(text.contains("enter"));
    }
}
