//! Jump measures `ν(t, x, dz)` over jump sizes `z`.

use std::fmt;
use std::sync::Arc;

use super::special::exp_integral_e1;
use crate::error::Result;
use crate::numerics::quad::integrate;

/// Integrals of a jump measure over half-open intervals `[a, b)` of jump
/// sizes. Either limit may be infinite.
pub trait JumpMeasure: Send + Sync + fmt::Debug {
    fn interval_mass(&self, t: f64, x: f64, a: f64, b: f64) -> f64;
    /// `∫_{[a,b)} z² ν(dz)`
    fn small_jump_second_moment(&self, t: f64, x: f64, a: f64, b: f64) -> f64;
    /// `∫_{[a,b) ∩ [-1,1]} z ν(dz)`
    fn truncated_first_moment(&self, t: f64, x: f64, a: f64, b: f64) -> f64;
    /// `ν(ℝ)`, possibly infinite.
    fn total_activity(&self) -> f64;
    /// True when the measure does not depend on `(t, x)`.
    fn state_independent(&self) -> bool {
        false
    }
}

/// `P(n+1, u) = 1 - e^{-u} Σ_{k≤n} u^k/k!`, the regularised lower incomplete
/// gamma function at integer order.
fn lower_gamma(n: u32, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u.is_infinite() {
        return 1.0;
    }
    if u < n as f64 + 10.0 {
        // e^{-u} Σ_{k>n} u^k / k!
        let mut term = 1.0;
        for k in 1..=n + 1 {
            term *= u / k as f64;
        }
        let mut sum = term;
        let mut k = n + 1;
        loop {
            k += 1;
            term *= u / k as f64;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-u).exp()
    } else {
        1.0 - upper_gamma(n, u)
    }
}

fn upper_gamma(n: u32, u: f64) -> f64 {
    if u.is_infinite() {
        return 0.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=n {
        term *= u / k as f64;
        sum += term;
    }
    sum * (-u).exp()
}

/// `P(n+1, ub) - P(n+1, ua)` without cancellation in either tail.
fn gamma_increment(n: u32, ua: f64, ub: f64) -> f64 {
    if ua >= n as f64 + 1.0 {
        upper_gamma(n, ua) - upper_gamma(n, ub)
    } else {
        lower_gamma(n, ub) - lower_gamma(n, ua)
    }
}

type Interval = Option<(f64, f64)>;

/// Splits `[a, b)` into its parts on `z < 0` (mirrored to positive sizes)
/// and `z ≥ 0`.
fn split(a: f64, b: f64) -> (Interval, Interval) {
    if b <= a {
        return (None, None);
    }
    let neg = (a < 0.0).then(|| (-b.min(0.0), -a));
    let pos = (b > 0.0).then(|| (a.max(0.0), b));
    (neg, pos)
}

fn clip_unit(a: f64, b: f64) -> (f64, f64) {
    (a.max(-1.0), b.min(1.0))
}

/// One side of Kou's double-exponential density, `c e^{-η z}` on `z ≥ 0`.
#[derive(Debug, Clone, Copy)]
struct ExpSide {
    c: f64,
    eta: f64,
}

impl ExpSide {
    fn mass(&self, a: f64, b: f64) -> f64 {
        self.c / self.eta * gamma_increment(0, self.eta * a, self.eta * b)
    }
    fn m1(&self, a: f64, b: f64) -> f64 {
        self.c / self.eta.powi(2) * gamma_increment(1, self.eta * a, self.eta * b)
    }
    fn m2(&self, a: f64, b: f64) -> f64 {
        2.0 * self.c / self.eta.powi(3) * gamma_increment(2, self.eta * a, self.eta * b)
    }
}

/// Kou double-exponential jumps in log-price.
#[derive(Debug, Clone)]
pub struct KouJumps {
    pub lambda: f64,
    up: ExpSide,
    down: ExpSide,
}

impl KouJumps {
    pub fn new(lambda: f64, p_plus: f64, eta_plus: f64, eta_minus: f64) -> Self {
        let p_minus = 1.0 - p_plus;
        Self {
            lambda,
            up: ExpSide {
                c: lambda * p_plus * eta_plus,
                eta: eta_plus,
            },
            down: ExpSide {
                c: lambda * p_minus * eta_minus,
                eta: eta_minus,
            },
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        if z >= 0.0 {
            self.up.c * (-self.up.eta * z).exp()
        } else {
            self.down.c * (self.down.eta * z).exp()
        }
    }
}

impl JumpMeasure for KouJumps {
    fn interval_mass(&self, _t: f64, _x: f64, a: f64, b: f64) -> f64 {
        let (neg, pos) = split(a, b);
        neg.map_or(0.0, |(l, h)| self.down.mass(l, h)) + pos.map_or(0.0, |(l, h)| self.up.mass(l, h))
    }
    fn small_jump_second_moment(&self, _t: f64, _x: f64, a: f64, b: f64) -> f64 {
        let (neg, pos) = split(a, b);
        neg.map_or(0.0, |(l, h)| self.down.m2(l, h)) + pos.map_or(0.0, |(l, h)| self.up.m2(l, h))
    }
    fn truncated_first_moment(&self, _t: f64, _x: f64, a: f64, b: f64) -> f64 {
        let (a, b) = clip_unit(a, b);
        let (neg, pos) = split(a, b);
        pos.map_or(0.0, |(l, h)| self.up.m1(l, h)) - neg.map_or(0.0, |(l, h)| self.down.m1(l, h))
    }
    fn total_activity(&self) -> f64 {
        self.lambda
    }
    fn state_independent(&self) -> bool {
        true
    }
}

/// One side of the variance-gamma Lévy density, `e^{-λ z} / (ν z)` on `z > 0`.
#[derive(Debug, Clone, Copy)]
struct GammaSide {
    inv_nu: f64,
    rate: f64,
}

impl GammaSide {
    fn mass(&self, a: f64, b: f64) -> f64 {
        self.inv_nu * (exp_integral_e1(self.rate * a) - exp_integral_e1(self.rate * b))
    }
    fn m1(&self, a: f64, b: f64) -> f64 {
        self.inv_nu / self.rate * gamma_increment(0, self.rate * a, self.rate * b)
    }
    fn m2(&self, a: f64, b: f64) -> f64 {
        self.inv_nu / self.rate.powi(2) * gamma_increment(1, self.rate * a, self.rate * b)
    }
}

/// Variance-gamma jumps in log-price; infinite activity.
#[derive(Debug, Clone)]
pub struct VgJumps {
    up: GammaSide,
    down: GammaSide,
}

impl VgJumps {
    pub fn new(sigma: f64, nu: f64, theta: f64) -> Self {
        let s2 = sigma * sigma;
        let root = (theta * theta + 2.0 * s2 / nu).sqrt();
        Self {
            up: GammaSide {
                inv_nu: 1.0 / nu,
                rate: (root - theta) / s2,
            },
            down: GammaSide {
                inv_nu: 1.0 / nu,
                rate: (root + theta) / s2,
            },
        }
    }

    /// Exponential decay rates `(λ₊, λ₋)` of the two tails.
    pub fn rates(&self) -> (f64, f64) {
        (self.up.rate, self.down.rate)
    }

    pub fn density(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.up.inv_nu * (-self.up.rate * z).exp() / z
        } else if z < 0.0 {
            self.down.inv_nu * (self.down.rate * z).exp() / -z
        } else {
            f64::INFINITY
        }
    }
}

impl JumpMeasure for VgJumps {
    fn interval_mass(&self, _t: f64, _x: f64, a: f64, b: f64) -> f64 {
        let (neg, pos) = split(a, b);
        neg.map_or(0.0, |(l, h)| self.down.mass(l, h)) + pos.map_or(0.0, |(l, h)| self.up.mass(l, h))
    }
    fn small_jump_second_moment(&self, _t: f64, _x: f64, a: f64, b: f64) -> f64 {
        let (neg, pos) = split(a, b);
        neg.map_or(0.0, |(l, h)| self.down.m2(l, h)) + pos.map_or(0.0, |(l, h)| self.up.m2(l, h))
    }
    fn truncated_first_moment(&self, _t: f64, _x: f64, a: f64, b: f64) -> f64 {
        let (a, b) = clip_unit(a, b);
        let (neg, pos) = split(a, b);
        pos.map_or(0.0, |(l, h)| self.up.m1(l, h)) - neg.map_or(0.0, |(l, h)| self.down.m1(l, h))
    }
    fn total_activity(&self) -> f64 {
        f64::INFINITY
    }
    fn state_independent(&self) -> bool {
        true
    }
}

pub type DensityFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A jump measure given by a density `k(t, x, z)`, integrated numerically.
/// Integrals are split at `z = 0` and `z = ±1`.
#[derive(Clone)]
pub struct DensityJumps {
    density: DensityFn,
    activity: f64,
    homogeneous: bool,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl fmt::Debug for DensityJumps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityJumps")
            .field("activity", &self.activity)
            .field("homogeneous", &self.homogeneous)
            .finish()
    }
}

impl DensityJumps {
    pub fn new(density: DensityFn, activity: f64, state_independent: bool) -> Self {
        Self {
            density,
            activity,
            homogeneous: state_independent,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
        }
    }

    fn integral(&self, t: f64, x: f64, a: f64, b: f64, power: i32) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let mut cuts = vec![a];
        for c in [-1.0, 0.0, 1.0] {
            if c > a && c < b {
                cuts.push(c);
            }
        }
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += integrate(
                |z| {
                    if z == 0.0 {
                        0.0
                    } else {
                        z.powi(power) * (self.density)(t, x, z)
                    }
                },
                w[0],
                w[1],
                self.abs_tol,
                self.rel_tol,
            )?;
        }
        Ok(total)
    }

    pub fn try_interval_mass(&self, t: f64, x: f64, a: f64, b: f64) -> Result<f64> {
        self.integral(t, x, a, b, 0)
    }
}

impl JumpMeasure for DensityJumps {
    fn interval_mass(&self, t: f64, x: f64, a: f64, b: f64) -> f64 {
        self.integral(t, x, a, b, 0).unwrap_or(f64::NAN)
    }
    fn small_jump_second_moment(&self, t: f64, x: f64, a: f64, b: f64) -> f64 {
        self.integral(t, x, a, b, 2).unwrap_or(f64::NAN)
    }
    fn truncated_first_moment(&self, t: f64, x: f64, a: f64, b: f64) -> f64 {
        let (a, b) = clip_unit(a, b);
        self.integral(t, x, a, b, 1).unwrap_or(f64::NAN)
    }
    fn total_activity(&self) -> f64 {
        self.activity
    }
    fn state_independent(&self) -> bool {
        self.homogeneous
    }
}
