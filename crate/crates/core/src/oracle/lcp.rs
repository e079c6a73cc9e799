//! Exhaustive complementary-basis enumeration for small LCPs.

use nalgebra::{DMatrix, DVector};

/// Tries every split of the indices into `z_i = 0` or `w_i = 0` and returns
/// the first feasible complementary point. Exponential in `n`.
pub fn brute_force_lcp(a: &DMatrix<f64>, psi: &[f64]) -> Option<Vec<f64>> {
    let n = psi.len();
    assert!(n <= 20, "enumeration is limited to n <= 20");
    let tol = 1e-11 * (1.0 + a.amax() + psi.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let mut z = vec![0.0; n];
        if !free.is_empty() {
            let m = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -psi[i]));
            let Some(sol) = m.lu().solve(&rhs) else { continue };
            for (k, &i) in free.iter().enumerate() {
                z[i] = sol[k];
            }
        }
        if z.iter().any(|&v| v < -tol) {
            continue;
        }
        let w = a * DVector::from_column_slice(&z);
        if (0..n).all(|i| w[i] + psi[i] >= -tol) {
            return Some(z.into_iter().map(|v| v.max(0.0)).collect());
        }
    }
    None
}

/// Indices with `z_i > tol`.
pub fn support(z: &[f64], tol: f64) -> Vec<usize> {
    (0..z.len()).filter(|&i| z[i] > tol).collect()
}
