use crate::error::{Error, Result};

/// Uniform time slices `{i δ_t}` covering `[0, T⁺]` with
/// `T⁺ = min{s : s > T}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub horizon: f64,
    /// `T⁺ / δ_t`
    pub n_slices: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("maturity must be finite and nonnegative, got {horizon}")));
        }
        Ok(Self {
            dt,
            horizon,
            n_slices: first_index_above(horizon, dt),
        })
    }

    pub fn t_plus(&self) -> f64 {
        self.n_slices as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Smallest `i` with `i δ > x`, tolerant to round-off in `x / δ`.
pub fn first_index_above(x: f64, delta: f64) -> usize {
    (x / delta + 1e-9).floor() as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_for_one_year() {
        let g = TimeGrid::new(1.0 / 60.0, 1.0).unwrap();
        assert_eq!(g.n_slices, 61);
        assert!((g.t_plus() - 61.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn off_grid_maturity() {
        let g = TimeGrid::new(0.3, 1.0).unwrap();
        assert_eq!(g.n_slices, 4);
        assert!(g.t_plus() - g.horizon <= g.dt);
        assert!(g.t_plus() > g.horizon);
    }

    #[test]
    fn rejects_bad_step() {
        assert!(TimeGrid::new(0.0, 1.0).is_err());
        assert!(TimeGrid::new(0.1, f64::INFINITY).is_err());
    }
}
