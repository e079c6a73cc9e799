use super::{complementarity_residual, LcpOperator, LcpSolution, LcpStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HowardOptions {
    pub max_iter: usize,
    /// Branch values closer than `tie_tol · max(1, |ψ|∞)` count as equal, so
    /// round-off in the inner solves cannot make the policy cycle.
    pub tie_tol: f64,
}

impl Default for HowardOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tie_tol: 1e-11,
        }
    }
}

/// Policy iteration on `min(Az + psi, z) = 0`.
///
/// Each step fixes which rows are pinned at `z_i = 0`, solves the remaining
/// equations exactly, then re-chooses the smaller of the two branches per
/// row. Converges in finitely many steps when `A` is an M-matrix.
pub fn howard_solve<A: LcpOperator + ?Sized>(
    a: &A,
    psi: &[f64],
    warm: Option<&[bool]>,
    opts: &HowardOptions,
) -> Result<LcpSolution> {
    let n = a.dim();
    if psi.len() != n {
        return Err(Error::InvalidParameter("policy iteration: dimension mismatch".into()));
    }
    let mut pinned: Vec<bool> = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => psi.iter().map(|&q| q >= 0.0).collect(),
    };
    let mut rhs = vec![0.0; n];
    let mut z = vec![0.0; n];
    let tie = opts.tie_tol * psi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut status = LcpStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        for i in 0..n {
            rhs[i] = if pinned[i] { 0.0 } else { -psi[i] };
        }
        z = a.solve_pinned(&pinned, &rhs)?;
        let w = a.apply(&z);
        let mut changed = false;
        for i in 0..n {
            let wi = w[i] + psi[i];
            let want = if z[i] < wi - tie {
                true
            } else if wi < z[i] - tie {
                false
            } else {
                pinned[i]
            };
            if want != pinned[i] {
                pinned[i] = want;
                changed = true;
            }
        }
        if !changed {
            status = LcpStatus::Solved;
            break;
        }
    }
    for (v, &p) in z.iter_mut().zip(&pinned) {
        if p {
            *v = 0.0;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::lcp::{lemke_solve, LcpMatrix, LemkeOptions};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_m_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if i != j && rng.random::<f64>() < 0.5 {
                    m[(i, j)] = -rng.random::<f64>();
                    s -= m[(i, j)];
                }
            }
            m[(i, i)] = s + 0.05 + rng.random::<f64>();
        }
        m
    }

    #[test]
    fn agrees_with_lemke_on_m_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(1..=25);
            let m = random_m_matrix(n, &mut rng);
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = howard_solve(&LcpMatrix::Dense(m.clone()), &q, None, &HowardOptions::default()).unwrap();
            let l = lemke_solve(&m, &q, &LemkeOptions::default()).unwrap();
            assert_eq!(h.status, LcpStatus::Solved);
            assert!(h.residual < 1e-10);
            for i in 0..n {
                assert!((h.z[i] - l.z[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn warm_start_converges_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_m_matrix(12, &mut rng);
        let q: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = LcpMatrix::Dense(m);
        let cold = howard_solve(&a, &q, None, &HowardOptions::default()).unwrap();
        let active: Vec<bool> = cold.z.iter().map(|&v| v <= 0.0).collect();
        let warm = howard_solve(&a, &q, Some(&active), &HowardOptions::default()).unwrap();
        assert_eq!(warm.iterations, 1);
        assert_eq!(warm.z, cold.z);
    }

    proptest::proptest! {
        #[test]
        fn matches_lemke_on_random_m_matrices(seed in 0u64..10_000, n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_m_matrix(n, &mut rng);
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = howard_solve(&LcpMatrix::Dense(m.clone()), &q, None, &HowardOptions::default()).unwrap();
            let l = lemke_solve(&m, &q, &LemkeOptions::default()).unwrap();
            proptest::prop_assert_eq!(h.status, LcpStatus::Solved);
            proptest::prop_assert!(h.residual < 1e-10);
            for i in 0..n {
                proptest::prop_assert!((h.z[i] - l.z[i]).abs() < 1e-9);
            }
        }
    }
}
