use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SpatialGrid;
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::numerics::TriDiag;

/// Drift discretisation and handling of negative central-difference rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatePolicy {
    /// Reject the generator.
    #[default]
    Strict,
    /// Zero negative off-diagonals and repair the diagonal.
    Clamp,
    /// One-sided drift differences on every row. First order, but the rates
    /// stay nonnegative; switching only the failing rows makes the result
    /// jump between neighbouring grids.
    Upwind,
}

impl std::str::FromStr for RatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(Self::Strict),
            "clamp" => Ok(Self::Clamp),
            "upwind" => Ok(Self::Upwind),
            other => Err(Error::InvalidParameter(format!("unknown rate policy '{other}'"))),
        }
    }
}

/// Spatial generator: a tridiagonal part holding nearest-neighbour rates and
/// the diagonal, and an optional dense block of rates to states two or more
/// nodes away.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub tri: TriDiag,
    pub far: Option<DMatrix<f64>>,
    pub t: f64,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.tri.dim()
    }

    /// Splits a dense rate matrix into nearest-neighbour and far parts. The
    /// far part is dropped when it is identically zero.
    pub fn from_dense(g: &DMatrix<f64>, t: f64) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(Error::InvalidParameter("generator must be square and nonempty".into()));
        }
        let sub = (1..n).map(|i| g[(i, i - 1)]).collect();
        let main = (0..n).map(|i| g[(i, i)]).collect();
        let sup = (0..n - 1).map(|i| g[(i, i + 1)]).collect();
        let far = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) <= 1 { 0.0 } else { g[(i, j)] });
        Ok(Self {
            tri: TriDiag::new(sub, main, sup)?,
            far: if far.iter().any(|&v| v != 0.0) { Some(far) } else { None },
            t,
        })
    }

    pub fn is_birth_death(&self) -> bool {
        self.far.is_none()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let t = self.tri.get(i, j);
        if i.abs_diff(j) <= 1 {
            t
        } else {
            self.far.as_ref().map_or(0.0, |f| f[(i, j)])
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.tri.to_dense();
        if let Some(f) = &self.far {
            m += f;
        }
        m
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.tri.matvec(v);
        if let Some(f) = &self.far {
            let w = f * DVector::from_column_slice(v);
            for (o, x) in out.iter_mut().zip(w.iter()) {
                *o += x;
            }
        }
        out
    }

    /// Largest absolute diagonal entry.
    pub fn max_exit_rate(&self) -> f64 {
        self.tri.main.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks signs, zero row sums and absorbing end rows.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let d = self.to_dense();
        for i in 0..n {
            let mut sum = 0.0;
            let mut scale: f64 = 0.0;
            for j in 0..n {
                let v = d[(i, j)];
                if i != j && v < 0.0 {
                    return Err(Error::NegativeRate { from: i, to: j, rate: v });
                }
                sum += v;
                scale = scale.max(v.abs());
            }
            if sum.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::InvalidParameter(format!("row {i} sums to {sum:e}")));
            }
            if (i == 0 || i + 1 == n) && scale != 0.0 {
                return Err(Error::InvalidParameter(format!("boundary row {i} is not absorbing")));
            }
        }
        Ok(())
    }

    /// Writes nonzero entries as `i,j,rate` lines with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,rate")?;
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if v != 0.0 {
                    writeln!(w, "{i},{j},{v:e}")?;
                }
            }
        }
        Ok(())
    }
}

struct Row {
    down: f64,
    up: f64,
    far: Vec<(usize, f64)>,
}

fn build_row(model: &ModelSpec, grid: &SpatialGrid, t: f64, i: usize, policy: RatePolicy) -> Result<Row> {
    let p = grid.points();
    let x = p[i];
    let dp = grid.delta_plus(i);
    let dm = grid.delta_minus(i);
    let dx = 0.5 * (dp + dm);
    let sigma2 = model.diffusion_sq(t, x);
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative diffusion coefficient at state {x}")));
    }
    let mut mu = model.generator_drift(t, x);
    let mut sbar2 = 0.0;
    let mut far = Vec::new();
    let (mut jump_down, mut jump_up) = (0.0, 0.0);
    if let Some(nu) = model.jump_measure() {
        let (lo, hi) = grid.cell(i);
        sbar2 = nu.small_jump_second_moment(t, x, lo - x, hi - x);
        let mut mubar = 0.0;
        for j in 0..p.len() {
            if j == i {
                continue;
            }
            let (lo, hi) = grid.cell(j);
            let (a, b) = (lo - x, hi - x);
            let mass = nu.interval_mass(t, x, a, b);
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::InvalidParameter(format!("jump mass {mass} from state {i} to {j}")));
            }
            let (ta, tb) = (a.max(-1.0), b.min(1.0));
            let truncated = if ta <= a && tb >= b {
                mass
            } else if tb > ta {
                nu.interval_mass(t, x, ta, tb)
            } else {
                0.0
            };
            mubar += (p[j] - x) * truncated;
            if j + 1 == i {
                jump_down = mass;
            } else if j == i + 1 {
                jump_up = mass;
            } else if mass > 0.0 {
                far.push((j, mass));
            }
        }
        mu -= mubar;
    }
    let diff_up = (sigma2 + sbar2) / (2.0 * dp * dx);
    let diff_down = (sigma2 + sbar2) / (2.0 * dm * dx);
    let mut up = mu * dm / (2.0 * dp * dx) + diff_up + jump_up;
    let mut down = -mu * dp / (2.0 * dm * dx) + diff_down + jump_down;
    if policy == RatePolicy::Upwind {
        up = mu.max(0.0) / dp + diff_up + jump_up;
        down = (-mu).max(0.0) / dm + diff_down + jump_down;
    }
    if up < 0.0 || down < 0.0 {
        match policy {
            RatePolicy::Strict => {
                let (to, rate) = if up < 0.0 { (i + 1, up) } else { (i - 1, down) };
                return Err(Error::NegativeRate { from: i, to, rate });
            }
            RatePolicy::Clamp => {
                log::warn!("clamping negative rate at state {i} (up {up:e}, down {down:e})");
                up = up.max(0.0);
                down = down.max(0.0);
            }
            RatePolicy::Upwind => unreachable!("upwind rates are nonnegative"),
        }
    }
    Ok(Row { down, up, far })
}

/// Assembles the spatial generator at time `t`; the end states are
/// absorbing.
pub fn build_generator(model: &ModelSpec, grid: &SpatialGrid, t: f64, policy: RatePolicy) -> Result<GeneratorMatrix> {
    let n = grid.len();
    let rows: Vec<Result<Row>> = (1..n - 1)
        .into_par_iter()
        .map(|i| build_row(model, grid, t, i, policy))
        .collect();
    let mut tri = TriDiag::zeros(n);
    let mut far = (!model.is_pure_diffusion()).then(|| DMatrix::<f64>::zeros(n, n));
    let mut any_far = false;
    for (k, row) in rows.into_iter().enumerate() {
        let i = k + 1;
        let row = row?;
        tri.sub[i - 1] = row.down;
        tri.sup[i] = row.up;
        let mut total = row.down + row.up;
        if let Some(f) = far.as_mut() {
            for (j, v) in row.far {
                f[(i, j)] = v;
                total += v;
                any_far = true;
            }
        }
        tri.main[i] = -total;
    }
    Ok(GeneratorMatrix {
        tri,
        far: far.filter(|_| any_far),
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::grid::{build_grid, SplitPolicy};
    use crate::models::{bs_model, kou_model, vg_model, Coordinate, KouParams, VgParams};
    use std::sync::Arc;

    fn uniform_grid(n: usize, h: f64) -> SpatialGrid {
        SpatialGrid::from_points((0..n).map(|i| i as f64 * h).collect(), (n / 2) as f64 * h).unwrap()
    }

    fn kou() -> ModelSpec {
        kou_model(&KouParams {
            sigma: 0.3,
            lambda: 3.0,
            eta_plus: 10.0,
            eta_minus: 10.0,
            p_plus: 0.5,
            p_minus: 0.5,
            r_f: 0.05,
            dividend: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn constant_diffusion_rates() {
        let (mu, s2, h) = (0.3, 0.04, 0.1);
        let m = ModelSpec::new("c", Arc::new(move |_, _| mu), Arc::new(move |_, _| s2), None, Coordinate::PriceSpace, true, 0.0);
        let g = build_generator(&m, &uniform_grid(11, h), 0.0, RatePolicy::Strict).unwrap();
        for i in 1..10 {
            assert!((g.get(i, i + 1) - (mu / (2.0 * h) + s2 / (2.0 * h * h))).abs() < 1e-12);
            assert!((g.get(i, i - 1) - (-mu / (2.0 * h) + s2 / (2.0 * h * h))).abs() < 1e-12);
        }
        assert!(g.is_birth_death());
        g.validate().unwrap();
        let u = build_generator(&m, &uniform_grid(11, h), 0.0, RatePolicy::Upwind).unwrap();
        assert!((u.get(5, 6) - (mu / h + s2 / (2.0 * h * h))).abs() < 1e-12);
        assert!((u.get(5, 4) - s2 / (2.0 * h * h)).abs() < 1e-12);
    }

    #[test]
    fn dense_round_trip() {
        let grid = build_grid(3.0, 6.0, 4.4, 4.6, 30, SplitPolicy::Proportional).unwrap();
        let g = build_generator(&kou(), &grid, 0.0, RatePolicy::Strict).unwrap().to_dense();
        let back = GeneratorMatrix::from_dense(&g, 0.0).unwrap();
        assert_eq!(back.to_dense(), g);
        assert!(!back.is_birth_death());
        let bd = GeneratorMatrix::from_dense(&DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, -3.0, 2.0, 0.0, 0.0, 0.0]), 0.0).unwrap();
        assert!(bd.is_birth_death());
        bd.validate().unwrap();
        assert!(GeneratorMatrix::from_dense(&DMatrix::zeros(2, 3), 0.0).is_err());
    }

    #[test]
    fn zero_model_gives_zero_matrix() {
        let m = ModelSpec::new("0", Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0), None, Coordinate::PriceSpace, true, 0.0);
        let g = build_generator(&m, &uniform_grid(6, 1.0), 0.0, RatePolicy::Strict).unwrap();
        assert_eq!(g.to_dense(), DMatrix::zeros(6, 6));
    }

    #[test]
    fn bs_generator_valid() {
        let m = bs_model(0.1, 0.05, 0.3).unwrap();
        let grid = build_grid(18.0, 360.0, 90.0, 95.0, 129, SplitPolicy::Proportional).unwrap();
        let g = build_generator(&m, &grid, 0.0, RatePolicy::Strict).unwrap();
        g.validate().unwrap();
        assert!(g.tri.main[0] == 0.0 && g.tri.main[129] == 0.0);
    }

    #[test]
    fn kou_jump_rates_sum_to_intensity() {
        let m = kou();
        let grid = build_grid((18.0f64).ln(), (360.0f64).ln(), (90.0f64).ln(), (95.0f64).ln(), 64, SplitPolicy::Proportional).unwrap();
        let g = build_generator(&m, &grid, 0.0, RatePolicy::Strict).unwrap();
        g.validate().unwrap();
        let nu = m.jump_measure().unwrap();
        for i in 1..64 {
            let x = grid.points()[i];
            let (lo, hi) = grid.cell(i);
            let own = nu.interval_mass(0.0, x, lo - x, hi - x);
            let jumps: f64 = (0..65)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = grid.cell(j);
                    nu.interval_mass(0.0, x, a - x, b - x)
                })
                .sum();
            assert!((jumps + own - 3.0).abs() < 1e-10);
            let far: f64 = (0..65usize).filter(|&j| j.abs_diff(i) > 1).map(|j| g.get(i, j)).sum();
            assert!(far <= 3.0 - own + 1e-12);
        }
    }

    #[test]
    fn strict_policy_reports_negative_rates() {
        let m = ModelSpec::new("d", Arc::new(|_, _| 10.0), Arc::new(|_, _| 0.01), None, Coordinate::PriceSpace, true, 0.0);
        let grid = uniform_grid(11, 0.1);
        assert!(matches!(build_generator(&m, &grid, 0.0, RatePolicy::Strict), Err(Error::NegativeRate { .. })));
        let c = build_generator(&m, &grid, 0.0, RatePolicy::Clamp).unwrap();
        c.validate().unwrap();
        let u = build_generator(&m, &grid, 0.0, RatePolicy::Upwind).unwrap();
        u.validate().unwrap();
        assert!((u.get(5, 6) - (10.0 / 0.1 + 0.01 / 0.02)).abs() < 1e-9);
    }

    #[test]
    fn vg_generator_valid_with_upwind() {
        let m = vg_model(&VgParams {
            sigma: 0.1213,
            nu: 0.1686,
            theta: -0.1436,
            r_f: 0.05,
            dividend: 0.0,
        })
        .unwrap();
        let grid = build_grid((18.0f64).ln(), (360.0f64).ln(), (90.0f64).ln(), (95.0f64).ln(), 200, SplitPolicy::Proportional).unwrap();
        let g = build_generator(&m, &grid, 0.0, RatePolicy::Upwind).unwrap();
        g.validate().unwrap();
        assert!(!g.is_birth_death());
    }

    #[test]
    fn csv_dump_has_header_and_entries() {
        let m = bs_model(0.1, 0.05, 0.3).unwrap();
        let grid = build_grid(18.0, 360.0, 90.0, 95.0, 16, SplitPolicy::Proportional).unwrap();
        let g = build_generator(&m, &grid, 0.0, RatePolicy::Strict).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("i,j,rate\n"));
        assert_eq!(s.lines().count(), 1 + 3 * 15);
    }

    #[test]
    fn refinement_converges() {
        // action on g(x) = x^3 versus 𝒢g = μ x · 3x² + ½ σ² x² · 6x
        let m = bs_model(0.1, 0.05, 0.3).unwrap();
        let exact = |x: f64| 0.05 * x * 3.0 * x * x + 0.5 * 0.09 * x * x * 6.0 * x;
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let grid = build_grid(50.0, 150.0, 90.0, 95.0, n, SplitPolicy::Proportional).unwrap();
            let g = build_generator(&m, &grid, 0.0, RatePolicy::Strict).unwrap();
            let f: Vec<f64> = grid.points().iter().map(|x| x.powi(3)).collect();
            let gf = g.apply(&f);
            let i = grid.points().partition_point(|&x| x < 120.0);
            let x = grid.points()[i];
            errs.push((gf[i] - exact(x)).abs() / exact(x));
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
        let order = (errs[1] / errs[2]).log2();
        assert!(order >= 1.0, "observed order {order}");
    }

    proptest::proptest! {
        #[test]
        fn kou_generators_are_valid(
            sigma in 0.1f64..0.6,
            lambda in 0.1f64..6.0,
            eta in 3.0f64..30.0,
            p_plus in 0.1f64..0.9,
            n in 40usize..160,
        ) {
            let m = kou_model(&KouParams {
                sigma,
                lambda,
                eta_plus: eta,
                eta_minus: eta,
                p_plus,
                p_minus: 1.0 - p_plus,
                r_f: 0.05,
                dividend: 0.0,
            })
            .unwrap();
            let grid = build_grid((18.0f64).ln(), (360.0f64).ln(), (90.0f64).ln(), (95.0f64).ln(), n, SplitPolicy::Proportional).unwrap();
            let g = build_generator(&m, &grid, 0.0, RatePolicy::Upwind).unwrap();
            proptest::prop_assert!(g.validate().is_ok());
            let ones = vec![1.0; g.dim()];
            proptest::prop_assert!(g.apply(&ones).iter().all(|v| v.abs() < 1e-8));
        }
    }
}
