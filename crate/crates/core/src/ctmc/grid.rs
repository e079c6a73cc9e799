use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitPolicy {
    /// Outer segment counts proportional to their lengths, remainder to the
    /// segment between `L` and `K`.
    #[default]
    Proportional,
    /// Explicit `(n1, n2, n3)`.
    Explicit(usize, usize, usize),
}

/// Ordered states `y_0 < … < y_n` with the barrier `L` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    points: Vec<f64>,
    /// Index of `L⁺ = L`; states below it form the lower region.
    l_index: usize,
    barrier: f64,
}

impl SpatialGrid {
    /// Wraps an explicit point set; `barrier` must be one of the points.
    pub fn from_points(points: Vec<f64>, barrier: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Grid("need at least two states".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) || points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("states must be finite and strictly increasing".into()));
        }
        let l_index = points
            .iter()
            .position(|&p| p == barrier)
            .ok_or_else(|| Error::Grid(format!("barrier {barrier} is not a grid point")))?;
        Ok(Self {
            points,
            l_index,
            barrier,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of states, `n + 1`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn barrier(&self) -> f64 {
        self.barrier
    }

    /// Index of `L⁺`, equal to the number of states below `L`.
    pub fn l_index(&self) -> usize {
        self.l_index
    }

    pub fn n_below(&self) -> usize {
        self.l_index
    }

    pub fn is_below(&self, i: usize) -> bool {
        i < self.l_index
    }

    pub fn delta_plus(&self, i: usize) -> f64 {
        if i + 1 < self.len() {
            self.points[i + 1] - self.points[i]
        } else {
            0.0
        }
    }

    pub fn delta_minus(&self, i: usize) -> f64 {
        if i > 0 {
            self.points[i] - self.points[i - 1]
        } else {
            0.0
        }
    }

    /// Cell `I_y` of state `i`; the end cells are unbounded.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let y = self.points[i];
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            y - 0.5 * self.delta_minus(i)
        };
        let hi = if i + 1 == self.len() {
            f64::INFINITY
        } else {
            y + 0.5 * self.delta_plus(i)
        };
        (lo, hi)
    }

    /// `max δ⁺x` over the states below `L`.
    pub fn grid_size(&self) -> f64 {
        (0..self.l_index).map(|i| self.delta_plus(i)).fold(0.0, f64::max)
    }

    /// Linear interpolation of `values` at `y`, flat outside the grid.
    pub fn interpolate(&self, values: &[f64], y: f64) -> f64 {
        let p = &self.points;
        if y <= p[0] {
            return values[0];
        }
        if y >= p[p.len() - 1] {
            return values[p.len() - 1];
        }
        let j = p.partition_point(|&v| v <= y);
        let (x0, x1) = (p[j - 1], p[j]);
        let w = (y - x0) / (x1 - x0);
        (1.0 - w) * values[j - 1] + w * values[j]
    }
}

fn split_counts(n: usize, lens: [f64; 3], policy: SplitPolicy) -> Result<(usize, usize, usize)> {
    let (n1, n2, n3) = match policy {
        SplitPolicy::Explicit(a, b, c) => (a, b, c),
        SplitPolicy::Proportional => {
            let total: f64 = lens.iter().sum();
            let n1 = (n as f64 * lens[0] / total).floor() as usize;
            let n3 = (n as f64 * lens[2] / total).floor() as usize;
            (n1, n.saturating_sub(n1 + n3), n3)
        }
    };
    if n1 + n2 + n3 != n || n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(Error::Grid(format!("cannot split {n} intervals as ({n1}, {n2}, {n3})")));
    }
    Ok((n1, n2, n3))
}

/// Piecewise-uniform grid with `n + 1` states on `[y_min, y_max]`, `L` on a
/// node and `K` midway between two neighbouring nodes.
pub fn build_grid(y_min: f64, y_max: f64, l: f64, k: f64, n: usize, split: SplitPolicy) -> Result<SpatialGrid> {
    if n < 8 {
        return Err(Error::Grid(format!("need n >= 8, got {n}")));
    }
    if !(y_min < l.min(k)) || !(l.max(k) < y_max) {
        return Err(Error::Grid(format!(
            "barrier {l} and strike {k} must lie strictly inside ({y_min}, {y_max})"
        )));
    }
    if l == k {
        return Err(Error::Grid("strike and barrier coincide; K cannot be midway".into()));
    }
    let mut pts = Vec::with_capacity(n + 1);
    if l < k {
        let (n1, n2, n3) = split_counts(n, [l - y_min, k - l, y_max - k], split)?;
        let h2 = (k - l) / n2 as f64;
        let h1 = (l - y_min) / n1 as f64;
        let h3 = (y_max - k - h2) / n3 as f64;
        if !(h3 > 0.0) {
            return Err(Error::Grid("upper segment is empty".into()));
        }
        pts.extend((0..n1).map(|i| y_min + i as f64 * h1));
        pts.push(l);
        pts.extend((0..n2 - 1).map(|i| l + (1 + i) as f64 * h2));
        pts.extend((0..n3).map(|i| k + h2 + i as f64 * h3));
        pts.push(y_max);
    } else {
        let (n1, n2, n3) = split_counts(n, [k - y_min, l - k, y_max - l], split)?;
        let h2 = (l - k) / n2 as f64;
        let h1 = (k - h2 - y_min) / n1 as f64;
        let h3 = (y_max - l) / n3 as f64;
        if !(h1 > 0.0) {
            return Err(Error::Grid("lower segment is empty".into()));
        }
        pts.extend((0..n1).map(|i| y_min + i as f64 * h1));
        pts.push(k - h2);
        pts.extend((0..n2 - 1).map(|i| k + (1 + i) as f64 * h2));
        pts.extend((0..n3).map(|i| l + i as f64 * h3));
        pts.push(y_max);
    }
    SpatialGrid::from_points(pts, l)
}
