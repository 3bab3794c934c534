//! Seeded single-run simulation and per-run summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{Action, CoordinationGame};
use crate::learning::{Agent, BetaMode, BetaState, EpisodeLog, PartnerEstimate, PolicyState, UpdateRule};
use crate::oracle::{check_retention, RetentionVerdict};
use crate::partners::{perturb_reward, sample_partner_action, PartnerKind, PartnerModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaModeKind {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Reinforce,
    Ppo,
}

/// Learner hyperparameters. In adaptive mode `beta` is the starting value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig<T> {
    pub beta_mode: BetaModeKind,
    pub beta: T,
    pub beta_star: T,
    pub eta_beta: T,
    pub beta_min: T,
    pub beta_max: T,
    pub learning_rate: T,
    pub ema_alpha: T,
    pub baseline_window: usize,
    pub p0: T,
    pub p_hat0: T,
    pub update: UpdateKind,
    pub clip: T,
    pub epochs: usize,
    pub batch: usize,
}

impl<T: Scalar> Default for AgentConfig<T> {
    fn default() -> Self {
        Self {
            beta_mode: BetaModeKind::Fixed,
            beta: T::zero(),
            beta_star: T::one(),
            eta_beta: T::lit(0.1),
            beta_min: T::lit(-3.9),
            beta_max: T::lit(10.0),
            learning_rate: T::lit(0.05),
            ema_alpha: T::lit(0.05),
            baseline_window: 50,
            p0: T::lit(0.5),
            p_hat0: T::lit(0.5),
            update: UpdateKind::Reinforce,
            clip: T::lit(0.2),
            epochs: 4,
            batch: 16,
        }
    }
}

impl<T: Scalar> AgentConfig<T> {
    pub fn build(&self) -> Result<Agent<T>> {
        let policy = PolicyState::new(self.p0, self.learning_rate, self.baseline_window)?;
        let estimate = PartnerEstimate::new(self.p_hat0, self.ema_alpha)?;
        let beta = match self.beta_mode {
            BetaModeKind::Fixed => BetaMode::Fixed(self.beta),
            BetaModeKind::Adaptive => BetaMode::Adaptive(BetaState::new(
                self.beta,
                self.beta_star,
                self.eta_beta,
                self.beta_min,
                self.beta_max,
            )?),
        };
        let rule = match self.update {
            UpdateKind::Reinforce => UpdateRule::Reinforce,
            UpdateKind::Ppo => {
                if self.epochs == 0 || !(self.clip > T::zero()) {
                    return Err(invalid("clip", "clip and epochs must be positive"));
                }
                UpdateRule::Ppo {
                    clip: self.clip,
                    epochs: self.epochs,
                    batch: self.batch,
                }
            }
        };
        Agent::new(policy, estimate, beta, rule)
    }
}

/// Everything needed to run one seeded simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub game: CoordinationGame<T>,
    pub agent: AgentConfig<T>,
    pub partner: PartnerModel<T>,
    pub reward_noise_sigma: T,
    pub episodes: usize,
    /// First episode of the retention window.
    pub retention_start: usize,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(game: CoordinationGame<T>, agent: AgentConfig<T>, partner: PartnerModel<T>, episodes: usize) -> Self {
        Self {
            game,
            agent,
            partner,
            reward_noise_sigma: T::zero(),
            episodes,
            retention_start: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(invalid("episodes", "must be at least 1"));
        }
        if self.retention_start >= self.episodes {
            return Err(invalid("retention_start", "must fall inside the run"));
        }
        if !(self.reward_noise_sigma >= T::zero()) {
            return Err(invalid("reward_noise_sigma", "must be non-negative"));
        }
        self.partner.validate()?;
        self.agent.build().map(|_| ())
    }
}

/// Which per-run random stream a draw comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Agent = 0,
    Partner = 1,
    RewardNoise = 2,
}

/// RNG for stream `kind` of run `index` under `master`.
///
/// Every run owns three independent ChaCha8 streams, numbered `3 * index + kind`
/// under a key derived from the master seed. The same `(master, index)` always
/// yields the same draws, whatever the thread schedule.
pub fn stream_rng(master: u64, index: usize, kind: StreamKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(3 * index as u64 + kind as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T> {
    /// Fraction of Stag plays over the final tenth of the run.
    pub final_cooperation: T,
    /// Mean realized (noise-free) social welfare over the final tenth.
    pub mean_sw: T,
    pub retention: RetentionVerdict,
    /// First episode from which `p >= 0.9` holds for 50 consecutive episodes.
    pub episodes_to_criterion: Option<usize>,
    /// Standard deviation of the learner's reward over the final tenth.
    pub reward_std: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub seed: usize,
    pub log: Vec<EpisodeLog<T>>,
    pub summary: RunSummary<T>,
}

pub const CRITERION_P: f64 = 0.9;
pub const CRITERION_HOLD: usize = 50;

/// Length of the final evaluation window: the last tenth, at least one episode.
pub fn final_window(episodes: usize) -> usize {
    episodes.div_ceil(10).max(1)
}

pub fn summarize<T: Scalar>(
    log: &[EpisodeLog<T>],
    game: &CoordinationGame<T>,
    retention_start: usize,
) -> Result<RunSummary<T>> {
    if log.is_empty() {
        return Err(invalid("log", "empty episode log"));
    }
    let w = final_window(log.len());
    let tail = &log[log.len() - w..];
    let n = T::from_count(w);
    let coop = T::from_count(tail.iter().filter(|e| e.a_i.is_stag()).count()) / n;
    let mean_sw = tail
        .iter()
        .fold(T::zero(), |a, e| a + game.realized_welfare(e.a_i, e.a_j))
        / n;
    let mean_r = tail.iter().fold(T::zero(), |a, e| a + e.r_i) / n;
    let var_r = tail
        .iter()
        .fold(T::zero(), |a, e| a + (e.r_i - mean_r) * (e.r_i - mean_r))
        / n;
    let ps: Vec<T> = log.iter().map(|e| e.p).collect();
    let retention = check_retention(
        &ps,
        game.critical_threshold(),
        retention_start,
        ps.len() - retention_start,
    )?;
    Ok(RunSummary {
        final_cooperation: coop,
        mean_sw,
        retention,
        episodes_to_criterion: episodes_to_criterion(&ps, T::lit(CRITERION_P), CRITERION_HOLD),
        reward_std: var_r.sqrt(),
    })
}

/// First `t` such that `p[t..t + hold]` all reach `level`.
pub fn episodes_to_criterion<T: Scalar>(ps: &[T], level: T, hold: usize) -> Option<usize> {
    let mut run = 0;
    for (t, &p) in ps.iter().enumerate() {
        if p >= level {
            run += 1;
            if run == hold {
                return Some(t + 1 - hold);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Run one seeded simulation.
///
/// Per episode the agent stream yields one uniform; the partner stream yields
/// the partner model's fixed draw count (three for a co-learner); the noise
/// stream yields one normal per learner.
pub fn simulate<T: Scalar>(config: &RunConfig<T>, master_seed: u64, index: usize) -> Result<RunResult<T>> {
    config.validate()?;
    let mut agent_rng = stream_rng(master_seed, index, StreamKind::Agent);
    let mut partner_rng = stream_rng(master_seed, index, StreamKind::Partner);
    let mut noise_rng = stream_rng(master_seed, index, StreamKind::RewardNoise);
    let game = &config.game;
    let sigma = config.reward_noise_sigma;
    let mut agent = config.agent.build()?;
    let mut co = match config.partner.kind {
        PartnerKind::CoLearner => Some(config.agent.build()?),
        _ => None,
    };

    let mut log = Vec::with_capacity(config.episodes);
    for t in 0..config.episodes {
        let u = T::lit(agent_rng.random::<f64>());
        let a_i = agent.act(u);
        let (a_j, q_true) = match co.as_ref() {
            Some(other) => {
                let explore = T::lit(partner_rng.random::<f64>());
                let coin = T::lit(partner_rng.random::<f64>());
                let u = T::lit(partner_rng.random::<f64>());
                let (_, delta) = config.partner.params_at(t);
                let half = T::lit(0.5);
                let p2 = other.policy.prob();
                let a = if explore < delta {
                    Action::from_stag(coin < half)
                } else {
                    other.act(u)
                };
                (a, (T::one() - delta) * p2 + delta * half)
            }
            None => sample_partner_action(&config.partner, t, &mut partner_rng)?,
        };
        let r_i = perturb_reward(game.payoff(a_i, a_j), sigma, &mut noise_rng);
        let step = agent.learn(a_i, a_j, r_i)?;
        if let Some(other) = co.as_mut() {
            let r_j = perturb_reward(game.payoff(a_j, a_i), sigma, &mut noise_rng);
            other.learn(a_j, a_i, r_j)?;
        }
        log.push(EpisodeLog::from_step(t, a_i, a_j, r_i, Some(q_true), step));
    }
    let summary = summarize(&log, game, config.retention_start)?;
    Ok(RunResult {
        seed: index,
        log,
        summary,
    })
}
