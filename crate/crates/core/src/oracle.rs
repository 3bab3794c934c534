//! Closed-form collapse curve, retention checks, and Monte-Carlo threshold estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{invalid, Error, Result};
use crate::game::CoordinationGame;
use crate::partners::PartnerModel;
use crate::scalar::Scalar;
use crate::sim::{simulate, AgentConfig, RunConfig};

/// Parameters of the exponential approach of `p(t)` to `p*` under partner exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseParams<T> {
    pub epsilon0: T,
    pub eta_lr: T,
    pub delta: T,
    pub game: CoordinationGame<T>,
}

impl<T: Scalar> CollapseParams<T> {
    pub fn new(epsilon0: T, eta_lr: T, delta: T, game: CoordinationGame<T>) -> Result<Self> {
        if !(epsilon0 > T::zero()) || game.critical_threshold() + epsilon0 > T::one() {
            return Err(invalid(
                "epsilon0",
                format!("{epsilon0} must be positive with p* + epsilon0 <= 1"),
            ));
        }
        if !(eta_lr > T::zero()) {
            return Err(invalid("eta_lr", "must be positive"));
        }
        if !(delta >= T::zero() && delta <= T::one()) {
            return Err(invalid("delta", format!("{delta} is not a probability")));
        }
        Ok(Self {
            epsilon0,
            eta_lr,
            delta,
            game,
        })
    }

    /// `eta_lr * (r_h - r_s) / spread`.
    pub fn lambda(&self) -> T {
        self.eta_lr * (self.game.r_h() - self.game.r_s()) / self.game.spread()
    }

    /// Predicted decay rate of the margin, `lambda * delta`.
    pub fn decay_rate(&self) -> T {
        self.lambda() * self.delta
    }
}

pub fn collapse_curve<T: Scalar>(params: &CollapseParams<T>, t: usize) -> T {
    params.game.critical_threshold() + params.epsilon0 * (-params.decay_rate() * T::from_count(t)).exp()
}

/// Outcome of a retention check over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetentionVerdict {
    Retained,
    Failed { episode: usize },
}

impl RetentionVerdict {
    pub fn retained(&self) -> bool {
        matches!(self, RetentionVerdict::Retained)
    }

    pub fn failure_episode(&self) -> Option<usize> {
        match *self {
            RetentionVerdict::Retained => None,
            RetentionVerdict::Failed { episode } => Some(episode),
        }
    }
}

/// Whether `p(t) >= p_star` for every `t` in `[t0, t0 + horizon)`.
pub fn check_retention<T: Scalar>(trajectory: &[T], p_star: T, t0: usize, horizon: usize) -> Result<RetentionVerdict> {
    let end = t0 + horizon;
    if trajectory.len() < end {
        return Err(Error::InsufficientData {
            needed: end,
            have: trajectory.len(),
        });
    }
    Ok(trajectory[t0..end]
        .iter()
        .position(|&p| p < p_star)
        .map_or(RetentionVerdict::Retained, |k| RetentionVerdict::Failed {
            episode: t0 + k,
        }))
}

/// Least-squares decay rate of `p(t) - p*` on the prefix before the first crossing.
pub fn fit_collapse_rate<T: Scalar>(trajectory: &[T], p_star: T) -> Result<T> {
    let n = trajectory.iter().position(|&p| p <= p_star).unwrap_or(trajectory.len());
    if n < 10 {
        return Err(Error::InsufficientData { needed: 10, have: n });
    }
    let nf = T::from_count(n);
    let t_mean = T::from_count(n - 1) / (T::one() + T::one());
    let y: Vec<T> = trajectory[..n].iter().map(|&p| (p - p_star).ln()).collect();
    let y_mean = y.iter().fold(T::zero(), |a, &v| a + v) / nf;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (t, &v) in y.iter().enumerate() {
        let dt = T::from_count(t) - t_mean;
        sxy = sxy + dt * (v - y_mean);
        sxx = sxx + dt * dt;
    }
    Ok(-sxy / sxx)
}

/// Fraction of crossing runs that later hold `p >= p_star` for `hold` consecutive episodes.
///
/// Returns `(crossed, re_established)`.
pub fn reestablishment<T: Scalar>(trajectories: &[Vec<T>], p_star: T, hold: usize) -> (usize, usize) {
    let mut crossed = 0;
    let mut back = 0;
    for ps in trajectories {
        let Some(first) = ps.iter().position(|&p| p < p_star) else {
            continue;
        };
        crossed += 1;
        let mut run = 0;
        for &p in &ps[first..] {
            run = if p >= p_star { run + 1 } else { 0 };
            if run >= hold {
                back += 1;
                break;
            }
        }
    }
    (crossed, back)
}

/// Monte-Carlo sweep of stationary partners over a grid of `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep<T> {
    pub game: CoordinationGame<T>,
    /// Learner settings; `beta` and `p0` are taken from here.
    pub agent: AgentConfig<T>,
    /// Partner family; `q_nominal` is replaced by each grid value.
    pub partner: PartnerModel<T>,
    pub grid: Vec<T>,
    pub seeds: usize,
    pub episodes: usize,
    /// Retention is judged on this trailing fraction of each run.
    pub tail_fraction: T,
    pub master_seed: u64,
    pub bootstrap: usize,
}

impl<T: Scalar> ThresholdSweep<T> {
    /// Stationary-partner sweep from `p0 = 0.9` with grid step `step` over `[0, 1]`.
    pub fn stationary(
        game: CoordinationGame<T>,
        agent: AgentConfig<T>,
        step: T,
        seeds: usize,
        episodes: usize,
    ) -> Self {
        let k = (T::one() / step).round().to_usize().unwrap_or(1).max(1);
        let grid = (0..=k).map(|i| T::from_count(i) / T::from_count(k)).collect();
        Self {
            game,
            agent: AgentConfig {
                p0: T::lit(0.9),
                ..agent
            },
            partner: PartnerModel::stationary(T::zero()),
            grid,
            seeds,
            episodes,
            tail_fraction: T::lit(0.2),
            master_seed: 0,
            bootstrap: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEstimate<T> {
    pub beta: T,
    pub grid: Vec<T>,
    /// `retained[k][s]`: seed `s` retained against `grid[k]`.
    pub retained: Vec<Vec<bool>>,
    pub retained_fraction: Vec<T>,
    /// Smallest grid value at which at least half the seeds retain.
    pub threshold: Option<T>,
    /// Per seed: smallest grid value from which that seed retains at every larger value.
    pub per_seed: Vec<Option<T>>,
    /// Bootstrap 95% interval of `threshold` over resampled seeds.
    pub band: Option<(T, T)>,
    /// The majority-retention indicator is not monotone along the grid.
    pub non_monotone: bool,
}

fn population_threshold<T: Scalar>(grid: &[T], fraction: &[T]) -> Option<T> {
    let half = T::lit(0.5);
    fraction.iter().position(|&f| f >= half).map(|k| grid[k])
}

pub const MIN_THRESHOLD_SEEDS: usize = 50;

/// Empirical effective threshold of the configured learner.
///
/// Seed `s` uses the same random streams at every grid value, so per-seed
/// thresholds are comparable across grid points and across learner settings.
pub fn mc_threshold_estimate<T: Scalar>(sweep: &ThresholdSweep<T>) -> Result<ThresholdEstimate<T>> {
    if sweep.seeds < MIN_THRESHOLD_SEEDS {
        return Err(invalid(
            "seeds",
            format!("need at least {MIN_THRESHOLD_SEEDS}, got {}", sweep.seeds),
        ));
    }
    if sweep.grid.is_empty() || sweep.grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("grid", "must be non-empty and strictly increasing"));
    }
    if !(sweep.tail_fraction > T::zero() && sweep.tail_fraction <= T::one()) {
        return Err(invalid("tail_fraction", "must lie in (0, 1]"));
    }
    let p_star = sweep.game.critical_threshold();
    let tail = (sweep.tail_fraction * T::from_count(sweep.episodes))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .clamp(1, sweep.episodes);
    let configs: Vec<RunConfig<T>> = sweep
        .grid
        .iter()
        .map(|&q| {
            let mut partner = sweep.partner.clone();
            partner.q_nominal = q;
            let c = RunConfig {
                retention_start: sweep.episodes - tail,
                ..RunConfig::new(sweep.game.clone(), sweep.agent.clone(), partner, sweep.episodes)
            };
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|k| (0..sweep.seeds).map(move |s| (k, s)))
        .collect();
    let flat: Vec<bool> = jobs
        .par_iter()
        .map(|&(k, s)| {
            simulate(&configs[k], sweep.master_seed, s).map(|r| {
                let ps: Vec<T> = r.log.iter().map(|e| e.p).collect();
                ps[sweep.episodes - tail..].iter().all(|&p| p >= p_star)
            })
        })
        .collect::<Result<_>>()?;
    let retained: Vec<Vec<bool>> = flat.chunks(sweep.seeds).map(<[bool]>::to_vec).collect();

    let fraction_of = |rows: &[Vec<bool>], pick: &[usize]| -> Vec<T> {
        rows.iter()
            .map(|row| {
                let hits = pick.iter().filter(|&&s| row[s]).count();
                T::from_count(hits) / T::from_count(pick.len())
            })
            .collect()
    };
    let all: Vec<usize> = (0..sweep.seeds).collect();
    let retained_fraction = fraction_of(&retained, &all);
    let threshold = population_threshold(&sweep.grid, &retained_fraction);

    let half = T::lit(0.5);
    let majority: Vec<bool> = retained_fraction.iter().map(|&f| f >= half).collect();
    let non_monotone = majority.windows(2).any(|w| w[0] && !w[1]);

    let per_seed = (0..sweep.seeds)
        .map(|s| {
            let mut from = None;
            for k in (0..sweep.grid.len()).rev() {
                if retained[k][s] {
                    from = Some(sweep.grid[k]);
                } else {
                    break;
                }
            }
            from
        })
        .collect();

    let band = if sweep.bootstrap > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(sweep.master_seed ^ 0x00B0_0757_12A9_u64);
        let mut draws: Vec<T> = Vec::with_capacity(sweep.bootstrap);
        let mut missing = 0usize;
        for _ in 0..sweep.bootstrap {
            let pick: Vec<usize> = (0..sweep.seeds).map(|_| rng.random_range(0..sweep.seeds)).collect();
            match population_threshold(&sweep.grid, &fraction_of(&retained, &pick)) {
                Some(t) => draws.push(t),
                None => missing += 1,
            }
        }
        if missing * 40 > sweep.bootstrap || draws.is_empty() {
            None
        } else {
            draws.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
            let at = |q: f64| draws[((q * draws.len() as f64) as usize).min(draws.len() - 1)];
            Some((at(0.025), at(0.975)))
        }
    } else {
        None
    };

    Ok(ThresholdEstimate {
        beta: sweep.agent.beta,
        grid: sweep.grid.clone(),
        retained,
        retained_fraction,
        threshold,
        per_seed,
        band,
        non_monotone,
    })
}

/// Exact binomial sign test on paired outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// One-sided p-value for "wins are more likely than losses".
    pub p_greater: f64,
    pub p_two_sided: f64,
}

pub fn sign_test(wins: u64, losses: u64, ties: u64) -> SignTest {
    let n = wins + losses;
    if n == 0 {
        return SignTest {
            wins,
            losses,
            ties,
            p_greater: 1.0,
            p_two_sided: 1.0,
        };
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    // P(X >= wins)
    let p_greater = if wins == 0 { 1.0 } else { b.sf(wins - 1) };
    let extreme = wins.min(losses);
    let p_two_sided = (2.0 * b.cdf(extreme)).min(1.0);
    SignTest {
        wins,
        losses,
        ties,
        p_greater,
        p_two_sided,
    }
}

/// Sign test of `a < b` across paired seeds; unknown thresholds compare as `+inf`.
pub fn paired_threshold_test<T: Scalar>(a: &[Option<T>], b: &[Option<T>]) -> SignTest {
    let key = |x: &Option<T>| x.map_or(f64::INFINITY, |v| v.as_f64());
    let (mut w, mut l, mut t) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (key(x), key(y));
        if x < y {
            w += 1;
        } else if x > y {
            l += 1;
        } else {
            t += 1;
        }
    }
    sign_test(w, l, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(delta: f64) -> CollapseParams<f64> {
        CollapseParams::new(0.05, 0.1, delta, CoordinationGame::stag_hunt()).unwrap()
    }

    #[test]
    fn collapse_curve_examples() {
        let p = params(0.1);
        assert_abs_diff_eq!(p.lambda(), 0.07, epsilon = 1e-15);
        assert_abs_diff_eq!(collapse_curve(&p, 0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(collapse_curve(&p, 100), 0.7 + 0.05 * (-0.7f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(collapse_curve(&p, 100), 0.7248, epsilon = 5e-5);
        let flat = params(0.0);
        for t in [0, 10, 10_000] {
            assert_eq!(collapse_curve(&flat, t), collapse_curve(&flat, 0));
        }
        assert!(CollapseParams::new(0.5, 0.1, 0.1, CoordinationGame::<f64>::stag_hunt()).is_err());
    }

    #[test]
    fn retention_examples() {
        let p_star = 0.7;
        let flat = vec![p_star; 20];
        assert_eq!(
            check_retention(&flat, p_star, 0, 20).unwrap(),
            RetentionVerdict::Retained
        );
        let mut dip = vec![0.8; 20];
        dip[8] = p_star - 1e-9;
        let v = check_retention(&dip, p_star, 3, 10).unwrap();
        assert_eq!(v.failure_episode(), Some(8));
        assert!(!v.retained());
        assert!(check_retention(&dip, p_star, 15, 10).is_err());
    }

    #[test]
    fn fit_recovers_exact_rate() {
        let p = CollapseParams::new(0.05, 0.1, 0.1, CoordinationGame::stag_hunt()).unwrap();
        let traj: Vec<f64> = (0..200).map(|t| collapse_curve(&p, t)).collect();
        assert_abs_diff_eq!(fit_collapse_rate(&traj, 0.7).unwrap(), p.decay_rate(), epsilon = 1e-6);
    }

    #[test]
    fn fit_tolerates_jitter() {
        let p = CollapseParams::new(0.05, 0.1, 0.1, CoordinationGame::stag_hunt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // stop well before the margin shrinks to the jitter scale
        let traj: Vec<f64> = (0..30)
            .map(|t| collapse_curve(&p, t) + rng.random_range(-1e-3..1e-3))
            .collect();
        let fit = fit_collapse_rate(&traj, 0.7).unwrap();
        assert!((fit - p.decay_rate()).abs() / p.decay_rate() < 0.05, "{fit}");
    }

    #[test]
    fn fit_needs_ten_points() {
        let traj = [0.8, 0.79, 0.78, 0.6];
        assert!(matches!(
            fit_collapse_rate(&traj, 0.7),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn reestablishment_counts() {
        let a = vec![0.8, 0.6, 0.8, 0.8, 0.8];
        let b = vec![0.8, 0.6, 0.8, 0.6, 0.8];
        let c = vec![0.8; 5];
        assert_eq!(reestablishment(&[a, b, c], 0.7, 3), (2, 1));
    }

    #[test]
    fn sign_test_values() {
        let s = sign_test(10, 0, 3);
        assert_abs_diff_eq!(s.p_greater, 1.0 / 1024.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.p_two_sided, 2.0 / 1024.0, epsilon = 1e-15);
        assert_eq!(sign_test(0, 0, 5).p_greater, 1.0);
        assert_abs_diff_eq!(sign_test(3, 3, 0).p_two_sided, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn threshold_sweep_rejects_few_seeds() {
        let s = ThresholdSweep::stationary(
            CoordinationGame::<f64>::stag_hunt(),
            AgentConfig::default(),
            0.1,
            10,
            50,
        );
        assert!(mc_threshold_estimate(&s).is_err());
    }
}
