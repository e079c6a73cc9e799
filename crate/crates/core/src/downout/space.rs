use crate::ctmc::{first_index_above, SpatialGrid};
use crate::error::{Error, Result};

/// States of the (excursion age, spatial state) chain.
///
/// Level 0 holds every spatial state; levels `1..=k` hold the states below
/// `L` with age `i δ_d`, where `k δ_d = D⁺` is the first age past the window.
/// Index order is level-major, states ascending within a level.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedStateSpace {
    /// Number of spatial states.
    pub n: usize,
    /// Number of states below `L`.
    pub m: usize,
    /// Index of the knock-out level `D⁺`.
    pub k: usize,
    pub dd: f64,
    pub window: f64,
}

impl AugmentedStateSpace {
    pub fn new(grid: &SpatialGrid, window: f64, dd: f64) -> Result<Self> {
        Self::from_counts(grid.len(), grid.l_index(), window, dd)
    }

    pub fn from_counts(n: usize, m: usize, window: f64, dd: f64) -> Result<Self> {
        if !(dd > 0.0) || !dd.is_finite() {
            return Err(Error::InvalidParameter(format!("age step must be positive, got {dd}")));
        }
        if !(window > 0.0) || !window.is_finite() {
            return Err(Error::InvalidParameter(format!("window must be positive, got {window}")));
        }
        if m > n || n == 0 {
            return Err(Error::InvalidParameter("barrier index outside the chain".into()));
        }
        Ok(Self {
            n,
            m,
            k: first_index_above(window, dd),
            dd,
            window,
        })
    }

    /// Number of age levels, `D⁺/δ_d + 1`.
    pub fn n_levels(&self) -> usize {
        self.k + 1
    }

    pub fn dim(&self) -> usize {
        self.n + self.m * self.k
    }

    pub fn index(&self, level: usize, x: usize) -> usize {
        if level == 0 {
            debug_assert!(x < self.n);
            x
        } else {
            debug_assert!(level <= self.k && x < self.m);
            self.n + (level - 1) * self.m + x
        }
    }

    /// `(level, spatial state)` of an index.
    pub fn state(&self, idx: usize) -> (usize, usize) {
        if idx < self.n {
            (0, idx)
        } else {
            let r = idx - self.n;
            (1 + r / self.m, r % self.m)
        }
    }

    /// Range of indices of a level.
    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        if level == 0 {
            0..self.n
        } else {
            let s = self.n + (level - 1) * self.m;
            s..s + self.m
        }
    }

    /// `f̃(d, x) = f(x) 1{d ≤ D}`; only the knock-out level is excluded.
    pub fn payoff(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for level in 0..self.k {
            let r = self.level_range(level);
            let len = r.len();
            out[r].copy_from_slice(&f[..len]);
        }
        out
    }

    /// Values of one level as a spatial vector; above-`L` entries of levels
    /// past 0 do not exist and are read from level 0.
    pub fn spatial_slice(&self, v: &[f64], level: usize) -> Vec<f64> {
        let mut out = v[..self.n].to_vec();
        if level > 0 {
            out[..self.m].copy_from_slice(&v[self.level_range(level)]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_round_trips() {
        let s = AugmentedStateSpace::from_counts(9, 4, 1.0 / 12.0, 1.0 / 120.0).unwrap();
        assert_eq!(s.k, 11);
        assert_eq!(s.n_levels(), 12);
        assert_eq!(s.dim(), 9 + 4 * 11);
        for i in 0..s.dim() {
            let (d, x) = s.state(i);
            assert_eq!(s.index(d, x), i);
        }
        assert_eq!(s.state(9), (1, 0));
        assert_eq!(s.state(9 + 4 * 11 - 1), (11, 3));
    }

    #[test]
    fn coarse_clock_has_one_level() {
        let s = AugmentedStateSpace::from_counts(5, 2, 0.1, 0.5).unwrap();
        assert_eq!(s.k, 1);
        assert_eq!(s.dim(), 7);
        let f = s.payoff(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(f, vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_lower_region() {
        let s = AugmentedStateSpace::from_counts(5, 0, 0.1, 0.05).unwrap();
        assert_eq!(s.dim(), 5);
    }

    #[test]
    fn on_grid_window() {
        // D = 10 δ_d exactly: ages up to D are exercisable, D⁺ = 11 δ_d
        let s = AugmentedStateSpace::from_counts(5, 2, 1.0 / 12.0, 1.0 / 120.0).unwrap();
        assert_eq!(s.k, 11);
        let f = s.payoff(&[1.0; 5]);
        assert_eq!(f[s.index(10, 0)], 1.0);
        assert_eq!(f[s.index(11, 0)], 0.0);
    }
}
