//! Exact event simulation of a time-homogeneous chain, used to check the
//! Parisian kernels by Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::generator::GeneratorMatrix;
use crate::error::{Error, Result};

/// Outgoing jump tables of a chain.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    exit: Vec<f64>,
    // cumulative probabilities and targets per state
    cdf: Vec<Vec<f64>>,
    targets: Vec<Vec<usize>>,
}

impl ChainSampler {
    pub fn new(g: &GeneratorMatrix) -> Self {
        let n = g.dim();
        let mut exit = vec![0.0; n];
        let mut cdf = vec![Vec::new(); n];
        let mut targets = vec![Vec::new(); n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let v = g.get(i, j);
                if j != i && v > 0.0 {
                    acc += v;
                    cdf[i].push(acc);
                    targets[i].push(j);
                }
            }
            exit[i] = acc;
            for c in cdf[i].iter_mut() {
                *c /= acc;
            }
        }
        Self { exit, cdf, targets }
    }

    pub fn dim(&self) -> usize {
        self.exit.len()
    }

    fn holding<R: Rng>(&self, i: usize, rng: &mut R) -> f64 {
        if self.exit[i] == 0.0 {
            f64::INFINITY
        } else {
            exp_sample(rng) / self.exit[i]
        }
    }

    fn next<R: Rng>(&self, i: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let k = self.cdf[i].partition_point(|&c| c <= u).min(self.targets[i].len() - 1);
        self.targets[i][k]
    }
}

fn exp_sample<R: Rng>(rng: &mut R) -> f64 {
    // U in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln()
}

/// Per-state Monte Carlo estimate with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_paths: usize,
}

impl McEstimate {
    /// True when every component is within `k` standard errors of `target`,
    /// with the error floored at the binomial error of a probability at the
    /// estimated level.
    pub fn agrees_with(&self, target: &[f64], k: f64) -> bool {
        self.worst_z(target) <= k
    }

    /// Largest `|mean - target| / se` over the components.
    pub fn worst_z(&self, target: &[f64]) -> f64 {
        let floor = 1.0 / self.n_paths as f64;
        self.mean
            .iter()
            .zip(&self.std_err)
            .zip(target)
            .map(|((m, s), t)| (m - t).abs() / s.max(floor))
            .fold(0.0, f64::max)
    }
}

/// Options for [`simulate_paths`].
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    /// Index of `L⁺`; states below it are in an excursion.
    pub l_index: usize,
    pub window: f64,
    pub discount: f64,
    /// Rate of an independent exponential killing clock.
    pub kill_rate: f64,
    /// Paths still running at this time contribute nothing.
    pub horizon: f64,
    pub seed: u64,
    pub n_paths: usize,
}

/// Terminal event of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathOutcome {
    /// Parisian time reached at `time` in `state`.
    Parisian { time: f64, state: usize },
    Killed,
    Censored,
}

/// Follows one path from `x0` (excursion clock at zero) until the excursion
/// below `L` first lasts `window` time units.
pub fn parisian_path<R: Rng>(sampler: &ChainSampler, spec: &SimulationSpec, x0: usize, rng: &mut R) -> PathOutcome {
    let mut t = 0.0;
    let mut x = x0;
    let mut clock = 0.0;
    let kill_at = if spec.kill_rate > 0.0 {
        exp_sample(rng) / spec.kill_rate
    } else {
        f64::INFINITY
    };
    loop {
        let hold = sampler.holding(x, rng);
        let below = x < spec.l_index;
        let finish = if below { t + (spec.window - clock) } else { f64::INFINITY };
        let jump = t + hold;
        let first = finish.min(jump).min(kill_at);
        if first > spec.horizon {
            return PathOutcome::Censored;
        }
        if kill_at <= finish.min(jump) {
            return PathOutcome::Killed;
        }
        if finish <= jump {
            return PathOutcome::Parisian { time: finish, state: x };
        }
        if below {
            clock += hold;
        }
        t = jump;
        x = sampler.next(x, rng);
        if x >= spec.l_index {
            clock = 0.0;
        }
    }
}

/// Estimates `E_{x0}[e^{-r τ} 1{Y_τ = y, τ < kill}]` for the Parisian time
/// `τ` of the excursion below `L`, for every state `y`.
///
/// Path `i` uses the stream `i` of a ChaCha8 generator seeded with
/// `spec.seed`, so results do not depend on thread scheduling.
pub fn simulate_paths(g: &GeneratorMatrix, x0: usize, spec: &SimulationSpec) -> Result<McEstimate> {
    if x0 >= g.dim() {
        return Err(Error::InvalidParameter("start state outside the chain".into()));
    }
    if !(spec.window >= 0.0) || spec.n_paths == 0 {
        return Err(Error::InvalidParameter("window must be nonnegative and paths positive".into()));
    }
    let sampler = ChainSampler::new(g);
    let n = g.dim();
    const CHUNK: usize = 4096;
    let n_chunks = spec.n_paths.div_ceil(CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut s1 = vec![0.0; n];
            let mut s2 = vec![0.0; n];
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for p in c * CHUNK..((c + 1) * CHUNK).min(spec.n_paths) {
                rng.set_stream(p as u64);
                rng.set_word_pos(0);
                if let PathOutcome::Parisian { time, state } = parisian_path(&sampler, spec, x0, &mut rng) {
                    let v = (-spec.discount * time).exp();
                    s1[state] += v;
                    s2[state] += v * v;
                }
            }
            (s1, s2)
        })
        .collect();
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for (a, b) in partial {
        for y in 0..n {
            s1[y] += a[y];
            s2[y] += b[y];
        }
    }
    let np = spec.n_paths as f64;
    let mean: Vec<f64> = s1.iter().map(|s| s / np).collect();
    let std_err = s2
        .iter()
        .zip(&mean)
        .map(|(s, m)| ((s / np - m * m).max(0.0) / np).sqrt())
        .collect();
    Ok(McEstimate {
        mean,
        std_err,
        n_paths: spec.n_paths,
    })
}

/// Estimates `P_{x0}[τ_L⁺ < window ∧ kill, Y_{τ_L⁺} = z]` for a start below
/// `L`, where `τ_L⁺` is the first entry into `{y ≥ L}`.
pub fn simulate_up_crossing(g: &GeneratorMatrix, x0: usize, spec: &SimulationSpec) -> Result<McEstimate> {
    if x0 >= spec.l_index {
        return Err(Error::InvalidParameter("start must lie below the barrier".into()));
    }
    let sampler = ChainSampler::new(g);
    let n = g.dim();
    let mut count = vec![0.0; n];
    for p in 0..spec.n_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(p as u64);
        let kill_at = if spec.kill_rate > 0.0 {
            exp_sample(&mut rng) / spec.kill_rate
        } else {
            f64::INFINITY
        };
        let limit = kill_at.min(spec.window);
        let mut t = 0.0;
        let mut x = x0;
        loop {
            t += sampler.holding(x, &mut rng);
            if t >= limit {
                break;
            }
            x = sampler.next(x, &mut rng);
            if x >= spec.l_index {
                count[x] += 1.0;
                break;
            }
        }
    }
    let np = spec.n_paths as f64;
    let mean: Vec<f64> = count.iter().map(|c| c / np).collect();
    let std_err = mean.iter().map(|p| (p * (1.0 - p) / np).sqrt()).collect();
    Ok(McEstimate {
        mean,
        std_err,
        n_paths: spec.n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::TriDiag;

    fn chain(n: usize, up: f64, down: f64) -> GeneratorMatrix {
        let mut t = TriDiag::zeros(n);
        for i in 1..n - 1 {
            t.sup[i] = up;
            t.sub[i - 1] = down;
            t.main[i] = -(up + down);
        }
        GeneratorMatrix { tri: t, far: None, t: 0.0 }
    }

    fn spec(window: f64) -> SimulationSpec {
        SimulationSpec {
            l_index: 3,
            window,
            discount: 0.0,
            kill_rate: 0.0,
            horizon: 1e6,
            seed: 1,
            n_paths: 2000,
        }
    }

    #[test]
    fn zero_window_stops_immediately() {
        let est = simulate_paths(&chain(7, 1.0, 1.0), 1, &spec(0.0)).unwrap();
        assert_eq!(est.mean[1], 1.0);
    }

    #[test]
    fn absorbing_start_waits_out_the_window() {
        let s = SimulationSpec { discount: 0.5, ..spec(0.4) };
        let est = simulate_paths(&chain(7, 1.0, 1.0), 0, &s).unwrap();
        assert!((est.mean[0] - (-0.2f64).exp()).abs() < 1e-12);
        assert!(est.std_err[0] < 1e-6);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = spec(0.3);
        let a = simulate_paths(&chain(9, 2.0, 1.0), 4, &s).unwrap();
        let b = simulate_paths(&chain(9, 2.0, 1.0), 4, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn std_err_shrinks_like_root_n() {
        let g = chain(9, 2.0, 1.5);
        let a = simulate_paths(&g, 3, &SimulationSpec { n_paths: 20_000, ..spec(0.5) }).unwrap();
        let b = simulate_paths(&g, 3, &SimulationSpec { n_paths: 80_000, ..spec(0.5) }).unwrap();
        let ratio = a.std_err[2] / b.std_err[2];
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn up_crossing_requires_start_below() {
        assert!(simulate_up_crossing(&chain(7, 1.0, 1.0), 4, &spec(1.0)).is_err());
        let est = simulate_up_crossing(&chain(7, 1.0, 1.0), 2, &spec(1e9)).unwrap();
        // with an absorbing bottom the chain either hits 3 or gets trapped at 0
        assert!((est.mean[3] - 2.0 / 3.0).abs() < 0.05);
    }
}
