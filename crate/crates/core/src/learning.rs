//! The trust-dampened learner: logit policy, EMA partner estimate,
//! dampened policy-gradient and clipped-surrogate updates, and the adaptive
//! risk-parameter controller.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{Action, CoordinationGame};
use crate::risk::trust_factor;
use crate::scalar::{logit, mean, sigmoid, Scalar};

/// Single-logit policy over {Stag, Hare} with a windowed reward baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState<T> {
    pub theta: T,
    pub learning_rate: T,
    baseline_window: usize,
    history: VecDeque<T>,
}

impl<T: Scalar> PolicyState<T> {
    pub fn new(p0: T, learning_rate: T, baseline_window: usize) -> Result<Self> {
        if !(p0 > T::zero() && p0 < T::one()) {
            return Err(invalid("p0", format!("{p0} is outside (0, 1)")));
        }
        if !(learning_rate > T::zero()) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if baseline_window == 0 {
            return Err(invalid("baseline_window", "must be at least 1"));
        }
        Ok(Self {
            theta: logit(p0),
            learning_rate,
            baseline_window,
            history: VecDeque::with_capacity(baseline_window),
        })
    }

    pub fn prob(&self) -> T {
        sigmoid(self.theta)
    }

    pub fn baseline_window(&self) -> usize {
        self.baseline_window
    }

    pub fn history(&self) -> impl Iterator<Item = &T> {
        self.history.iter()
    }

    /// Mean of the reward history, zero when empty.
    pub fn baseline(&self) -> T {
        mean(self.history.iter().copied()).unwrap_or_else(T::zero)
    }

    pub fn log_prob(&self, action: Action) -> T {
        log_prob_at(self.theta, action)
    }

    /// d/dtheta log pi(action).
    pub fn score(&self, action: Action) -> T {
        score_at(self.theta, action)
    }

    pub fn push_reward(&mut self, reward: T) {
        if self.history.len() == self.baseline_window {
            self.history.pop_front();
        }
        self.history.push_back(reward);
    }

    /// Sample an action from a uniform draw `u` in `[0, 1)`.
    pub fn act(&self, u: T) -> Action {
        Action::from_stag(u < self.prob())
    }

    /// One dampened REINFORCE update. Returns the logit increment.
    pub fn pg_step(&mut self, action: Action, reward: T, tau: T) -> T {
        let adv = dampened_advantage(action, reward - self.baseline(), tau);
        let step = self.learning_rate * adv * self.score(action);
        self.theta = self.theta + step;
        self.push_reward(reward);
        step
    }

    /// `epochs` ascent passes on the clipped surrogate over `batch`.
    ///
    /// All samples share the baseline in force when the batch is handed over;
    /// rewards enter the history after the update. Returns the total logit increment.
    pub fn ppo_clip_step(&mut self, batch: &[Transition<T>], clip: T, epochs: usize) -> Result<T> {
        if batch.is_empty() {
            return Err(invalid("batch", "must not be empty"));
        }
        if !(clip > T::zero()) || epochs == 0 {
            return Err(invalid("clip", "clip and epochs must be positive"));
        }
        let b = self.baseline();
        let advs: Vec<T> = batch
            .iter()
            .map(|tr| dampened_advantage(tr.action, tr.reward - b, tr.tau))
            .collect();
        let theta_old = self.theta;
        let n = T::from_count(batch.len());
        for _ in 0..epochs {
            let mut grad = T::zero();
            for (tr, &adv) in batch.iter().zip(&advs) {
                grad = grad + surrogate_grad(self.theta, theta_old, tr.action, adv, clip);
            }
            self.theta = self.theta + self.learning_rate * grad / n;
        }
        for tr in batch {
            self.push_reward(tr.reward);
        }
        Ok(self.theta - theta_old)
    }
}

#[inline]
fn log_prob_at<T: Scalar>(theta: T, action: Action) -> T {
    // log sigmoid(x) = -softplus(-x)
    let x = if action.is_stag() { theta } else { -theta };
    if x > T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
fn score_at<T: Scalar>(theta: T, action: Action) -> T {
    let p = sigmoid(theta);
    match action {
        Action::Stag => T::one() - p,
        Action::Hare => -p,
    }
}

/// One sample for the clipped-surrogate update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub action: Action,
    pub reward: T,
    pub tau: T,
}

/// Clipped surrogate `min(rho A, clip(rho) A)` averaged over `batch`,
/// evaluated at `theta` against `theta_old`, with advantages from `baseline`.
pub fn clipped_surrogate<T: Scalar>(theta: T, theta_old: T, batch: &[Transition<T>], baseline: T, clip: T) -> T {
    let total = batch.iter().fold(T::zero(), |acc, tr| {
        let adv = dampened_advantage(tr.action, tr.reward - baseline, tr.tau);
        let rho = (log_prob_at(theta, tr.action) - log_prob_at(theta_old, tr.action)).exp();
        let clipped = rho.max(T::one() - clip).min(T::one() + clip);
        acc + (rho * adv).min(clipped * adv)
    });
    total / T::from_count(batch.len())
}

fn surrogate_grad<T: Scalar>(theta: T, theta_old: T, action: Action, adv: T, clip: T) -> T {
    let rho = (log_prob_at(theta, action) - log_prob_at(theta_old, action)).exp();
    // the clipped branch is flat in theta
    let clipped_active = (adv > T::zero() && rho > T::one() + clip) || (adv < T::zero() && rho < T::one() - clip);
    if clipped_active {
        T::zero()
    } else {
        rho * score_at(theta, action) * adv
    }
}

/// `tau * advantage` for Stag, unchanged for Hare.
pub fn dampened_advantage<T: Scalar>(action: Action, advantage: T, tau: T) -> T {
    match action {
        Action::Stag => tau * advantage,
        Action::Hare => advantage,
    }
}

/// Exponential moving average of the partner's Stag frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartnerEstimate<T> {
    pub p_hat: T,
    pub alpha: T,
}

impl<T: Scalar> PartnerEstimate<T> {
    pub fn new(p_hat: T, alpha: T) -> Result<Self> {
        if !(T::zero()..=T::one()).contains(&p_hat) {
            return Err(invalid("p_hat", format!("{p_hat} is not a probability")));
        }
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(invalid("alpha", format!("{alpha} is outside (0, 1)")));
        }
        Ok(Self { p_hat, alpha })
    }

    pub fn sigma2(&self) -> T {
        self.p_hat * (T::one() - self.p_hat)
    }

    #[must_use]
    pub fn ema_update(self, partner_played_stag: bool) -> Self {
        let x = if partner_played_stag { T::one() } else { T::zero() };
        let p_hat = (T::one() - self.alpha) * self.p_hat + self.alpha * x;
        Self {
            p_hat: p_hat.clamp01(),
            ..self
        }
    }
}

/// State of the adaptive risk-parameter controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaState<T> {
    pub beta: T,
    pub beta_star: T,
    pub eta_beta: T,
    pub beta_min: T,
    pub beta_max: T,
    pub sw_prev: T,
}

impl<T: Scalar> BetaState<T> {
    pub fn new(beta0: T, beta_star: T, eta_beta: T, beta_min: T, beta_max: T) -> Result<Self> {
        if !(T::one() + beta_min * T::lit(0.25) > T::zero()) {
            return Err(invalid("beta_min", format!("{beta_min} must exceed -4")));
        }
        if !beta_max.is_finite() || beta_max < beta_min {
            return Err(invalid(
                "beta_max",
                format!("{beta_max} must be finite and >= beta_min"),
            ));
        }
        if !(eta_beta > T::zero()) {
            return Err(invalid("eta_beta", "must be positive"));
        }
        if beta0 < beta_min || beta0 > beta_max {
            return Err(invalid("beta0", format!("{beta0} is outside [{beta_min}, {beta_max}]")));
        }
        Ok(Self {
            beta: beta0,
            beta_star,
            eta_beta,
            beta_min,
            beta_max,
            sw_prev: T::zero(),
        })
    }

    /// Raise beta when the welfare proxy drops, otherwise relax it toward `beta_star`.
    #[must_use]
    pub fn adaptive_beta_step(self, sw_proxy: T) -> Self {
        let d = sw_proxy - self.sw_prev;
        let beta = if d < T::zero() {
            (self.beta + self.eta_beta * d.abs()).min(self.beta_max)
        } else {
            self.beta - self.eta_beta * (self.beta - self.beta_star).max(T::zero())
        };
        Self {
            beta: beta.max(self.beta_min).min(self.beta_max),
            sw_prev: sw_proxy,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode<T> {
    Fixed(T),
    Adaptive(BetaState<T>),
}

impl<T: Scalar> BetaMode<T> {
    pub fn beta(&self) -> T {
        match self {
            BetaMode::Fixed(b) => *b,
            BetaMode::Adaptive(s) => s.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule<T> {
    Reinforce,
    Ppo { clip: T, epochs: usize, batch: usize },
}

/// What the agent did and saw in one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<T> {
    pub p: T,
    pub p_hat: T,
    pub sigma2: T,
    pub beta: T,
    pub tau: T,
    pub sw_proxy: T,
}

/// A complete learner. It only ever sees actions and its own reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent<T> {
    pub policy: PolicyState<T>,
    pub estimate: PartnerEstimate<T>,
    pub beta: BetaMode<T>,
    pub rule: UpdateRule<T>,
    pending: Vec<Transition<T>>,
}

impl<T: Scalar> Agent<T> {
    pub fn new(
        policy: PolicyState<T>,
        estimate: PartnerEstimate<T>,
        beta: BetaMode<T>,
        rule: UpdateRule<T>,
    ) -> Result<Self> {
        if let BetaMode::Fixed(b) = beta {
            if !(T::one() + b * T::lit(0.25) > T::zero()) {
                return Err(invalid("beta", format!("{b} must exceed -4")));
            }
        }
        if let UpdateRule::Ppo { batch: 0, .. } = rule {
            return Err(invalid("batch", "must be at least 1"));
        }
        Ok(Self {
            policy,
            estimate,
            beta,
            rule,
            pending: Vec::new(),
        })
    }

    pub fn act(&self, u: T) -> Action {
        self.policy.act(u)
    }

    /// Learn from one episode's outcome, in the controller's order: partner
    /// estimate, risk parameter, trust factor, then the policy update.
    pub fn learn(&mut self, own: Action, partner: Action, reward: T) -> Result<Step<T>> {
        let p = self.policy.prob();
        self.estimate = self.estimate.ema_update(partner.is_stag());
        let sigma2 = self.estimate.sigma2();
        let sw_proxy = reward + reward;
        if let BetaMode::Adaptive(state) = self.beta {
            self.beta = BetaMode::Adaptive(state.adaptive_beta_step(sw_proxy));
        }
        let beta = self.beta.beta();
        let tau = trust_factor(sigma2, beta)?;
        match self.rule {
            UpdateRule::Reinforce => {
                self.policy.pg_step(own, reward, tau);
            }
            UpdateRule::Ppo { clip, epochs, batch } => {
                self.pending.push(Transition {
                    action: own,
                    reward,
                    tau,
                });
                if self.pending.len() == batch {
                    let pending = std::mem::take(&mut self.pending);
                    self.policy.ppo_clip_step(&pending, clip, epochs)?;
                }
            }
        }
        Ok(Step {
            p,
            p_hat: self.estimate.p_hat,
            sigma2,
            beta,
            tau,
            sw_proxy,
        })
    }
}

/// Where the partner's action comes from in [`rattl_episode`].
pub trait PartnerSource<T> {
    /// Partner action for episode `t`, with the partner's true Stag
    /// probability when known (for logging only).
    fn next_action(&mut self, t: usize) -> (Action, Option<T>);
}

impl<T, F: FnMut(usize) -> (Action, Option<T>)> PartnerSource<T> for F {
    fn next_action(&mut self, t: usize) -> (Action, Option<T>) {
        self(t)
    }
}

/// One row of an episode log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog<T> {
    pub t: usize,
    pub a_i: Action,
    pub a_j: Action,
    pub r_i: T,
    pub p: T,
    pub q_true: Option<T>,
    pub p_hat: T,
    pub sigma2: T,
    pub beta: T,
    pub tau: T,
    pub sw_proxy: T,
}

impl<T: Scalar> EpisodeLog<T> {
    pub const HEADER: [&'static str; 11] = [
        "t", "a_i", "a_j", "r_i", "p", "q_true", "p_hat", "sigma2", "beta", "tau", "sw_proxy",
    ];

    pub fn from_step(t: usize, a_i: Action, a_j: Action, r_i: T, q_true: Option<T>, s: Step<T>) -> Self {
        Self {
            t,
            a_i,
            a_j,
            r_i,
            p: s.p,
            q_true,
            p_hat: s.p_hat,
            sigma2: s.sigma2,
            beta: s.beta,
            tau: s.tau,
            sw_proxy: s.sw_proxy,
        }
    }
}

/// One full episode for a single agent against an external partner.
///
/// `u` is the agent's uniform draw for action sampling and `noise` is added
/// to the reward it learns from.
pub fn rattl_episode<T: Scalar>(
    agent: &mut Agent<T>,
    partner: &mut impl PartnerSource<T>,
    game: &CoordinationGame<T>,
    t: usize,
    u: T,
    noise: T,
) -> Result<EpisodeLog<T>> {
    let a_i = agent.act(u);
    let (a_j, q_true) = partner.next_action(t);
    let r_i = game.payoff(a_i, a_j) + noise;
    let step = agent.learn(a_i, a_j, r_i)?;
    Ok(EpisodeLog::from_step(t, a_i, a_j, r_i, q_true, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ema_examples() {
        let e = PartnerEstimate::new(0.5, 0.1).unwrap();
        assert_abs_diff_eq!(e.ema_update(true).p_hat, 0.55, epsilon = 1e-15);
        let e = PartnerEstimate::new(1.0, 0.3).unwrap();
        assert_eq!(e.ema_update(true).p_hat, 1.0);
        let e = PartnerEstimate::new(0.0, 0.1).unwrap();
        assert_eq!(e.ema_update(false).p_hat, 0.0);
        assert!(PartnerEstimate::new(0.5, 1.0).is_err());
    }

    #[test]
    fn dampened_advantage_examples() {
        assert_abs_diff_eq!(dampened_advantage(Action::Stag, 2.0, 0.8), 1.6, epsilon = 1e-15);
        assert_eq!(dampened_advantage(Action::Hare, 2.0, 0.8), 2.0);
        assert_eq!(dampened_advantage(Action::Stag, -0.3, 1.0), -0.3);
    }

    #[test]
    fn pg_step_examples() {
        let mut pol = PolicyState::new(0.5, 0.1, 50).unwrap();
        pol.pg_step(Action::Stag, 1.0, 1.0);
        assert_abs_diff_eq!(pol.theta, 0.05, epsilon = 1e-15);
        assert_eq!(pol.history().count(), 1);

        let mut pol = PolicyState::new(0.3, 0.1, 50).unwrap();
        pol.push_reward(2.0);
        let before = pol.theta;
        pol.pg_step(Action::Hare, 2.0, 0.5);
        assert_eq!(pol.theta, before);
    }

    #[test]
    fn baseline_window_evicts() {
        let mut pol = PolicyState::new(0.5, 0.1, 3).unwrap();
        assert_eq!(pol.baseline(), 0.0);
        for r in [1.0, 2.0, 3.0, 10.0] {
            pol.push_reward(r);
        }
        assert_eq!(pol.history().count(), 3);
        assert_abs_diff_eq!(pol.baseline(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        for _ in 0..100 {
            let theta: f64 = rng.random_range(-6.0..6.0);
            for a in [Action::Stag, Action::Hare] {
                let fd = (log_prob_at(theta + h, a) - log_prob_at(theta - h, a)) / (2.0 * h);
                assert!((score_at(theta, a) - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ppo_reduces_to_pg() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut a = PolicyState::<f64>::new(rng.random_range(0.05..0.95), 0.1, 10).unwrap();
            for _ in 0..rng.random_range(0..12) {
                a.push_reward(rng.random_range(-5.0..5.0));
            }
            let mut b = a.clone();
            let act = Action::from_stag(rng.random());
            let r = rng.random_range(-5.0..5.0);
            let tau = rng.random_range(0.5..2.0);
            a.pg_step(act, r, tau);
            b.ppo_clip_step(
                &[Transition {
                    action: act,
                    reward: r,
                    tau,
                }],
                1e6,
                1,
            )
            .unwrap();
            assert!((a.theta - b.theta).abs() < 1e-10);
            assert_eq!(a.history().collect::<Vec<_>>(), b.history().collect::<Vec<_>>());
        }
    }

    #[test]
    fn ppo_zero_advantage_is_noop() {
        let mut pol = PolicyState::new(0.6, 0.5, 10).unwrap();
        pol.push_reward(1.0);
        let theta = pol.theta;
        let batch: Vec<_> = [Action::Stag, Action::Hare, Action::Stag]
            .iter()
            .map(|&a| Transition {
                action: a,
                reward: 1.0,
                tau: 0.7,
            })
            .collect();
        pol.ppo_clip_step(&batch, 0.2, 4).unwrap();
        assert_eq!(pol.theta, theta);
        assert!(pol.ppo_clip_step(&[], 0.2, 4).is_err());
    }

    #[test]
    fn ppo_surrogate_nondecreasing_over_epochs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let mut pol = PolicyState::new(rng.random_range(0.1..0.9), 0.01, 20).unwrap();
            for _ in 0..20 {
                pol.push_reward(rng.random_range(-5.0..5.0));
            }
            let batch: Vec<_> = (0..16)
                .map(|_| Transition {
                    action: Action::from_stag(rng.random()),
                    reward: rng.random_range(-5.0..5.0),
                    tau: rng.random_range(0.5..1.5),
                })
                .collect();
            let b = pol.baseline();
            let theta_old = pol.theta;
            let mut prev = clipped_surrogate(theta_old, theta_old, &batch, b, 0.2);
            for _ in 0..6 {
                // one epoch at a time against the same reference policy
                let mut p = pol.clone();
                let n = 16.0;
                let g: f64 = batch
                    .iter()
                    .map(|tr| {
                        let adv = dampened_advantage(tr.action, tr.reward - b, tr.tau);
                        surrogate_grad(p.theta, theta_old, tr.action, adv, 0.2)
                    })
                    .sum();
                p.theta += p.learning_rate * g / n;
                let cur = clipped_surrogate(p.theta, theta_old, &batch, b, 0.2);
                assert!(cur >= prev - 1e-12, "{cur} < {prev}");
                prev = cur;
                pol.theta = p.theta;
            }
        }
    }

    #[test]
    fn ppo_epochs_match_manual_passes() {
        let mut pol = PolicyState::new(0.4, 0.05, 8).unwrap();
        pol.push_reward(0.5);
        let batch = [
            Transition {
                action: Action::Stag,
                reward: 5.0,
                tau: 0.8,
            },
            Transition {
                action: Action::Hare,
                reward: 2.0,
                tau: 0.8,
            },
        ];
        let mut manual = pol.theta;
        let b = pol.baseline();
        for _ in 0..3 {
            let g: f64 = batch
                .iter()
                .map(|tr| {
                    surrogate_grad(
                        manual,
                        pol.theta,
                        tr.action,
                        dampened_advantage(tr.action, tr.reward - b, tr.tau),
                        0.2,
                    )
                })
                .sum();
            manual += 0.05 * g / 2.0;
        }
        pol.ppo_clip_step(&batch, 0.2, 3).unwrap();
        assert_abs_diff_eq!(pol.theta, manual, epsilon = 1e-15);
    }

    fn bs(beta: f64, beta_star: f64, eta: f64, bmax: f64, sw_prev: f64) -> BetaState<f64> {
        let mut s = BetaState::new(beta, beta_star, eta, -3.9, bmax).unwrap();
        s.sw_prev = sw_prev;
        s
    }

    #[test]
    fn adaptive_beta_examples() {
        let s = bs(1.0, 1.0, 0.1, 3.0, 0.5).adaptive_beta_step(0.0);
        assert_abs_diff_eq!(s.beta, 1.05, epsilon = 1e-15);
        assert_eq!(s.sw_prev, 0.0);
        let s = bs(2.0, 1.0, 0.1, 3.0, 0.0).adaptive_beta_step(1.0);
        assert_abs_diff_eq!(s.beta, 1.9, epsilon = 1e-15);
        let s = bs(1.0, 1.0, 0.1, 3.0, 0.0).adaptive_beta_step(4.0);
        assert_eq!(s.beta, 1.0);
        assert!(BetaState::new(0.0, 0.0, 0.1, -4.0, 1.0).is_err());
        assert!(BetaState::new(0.0, 0.0, 0.1, -1.0, f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn beta_stays_in_clamps(
            beta0 in -3.0..3.0f64,
            eta in 0.001..5.0f64,
            stream in proptest::collection::vec(-1e3..1e3f64, 1..200),
        ) {
            let mut s = BetaState::new(beta0, 1.0, eta, -3.5, 3.0).unwrap();
            for sw in stream {
                let prev = s;
                s = s.adaptive_beta_step(sw);
                prop_assert!(s.beta >= -3.5 && s.beta <= 3.0);
                if sw < prev.sw_prev && prev.beta < prev.beta_max {
                    prop_assert!(s.beta > prev.beta);
                }
            }
        }

        #[test]
        fn stag_increment_shrinks_with_beta(
            p0 in 0.05..0.95f64,
            r in -5.0..5.0f64,
            hist in proptest::collection::vec(-5.0..5.0f64, 0..20),
            sigma2 in 0.0..=0.25f64,
            beta in 0.0..10.0f64,
            neg in -3.99..0.0f64,
        ) {
            let mut base = PolicyState::new(p0, 0.1, 50).unwrap();
            for h in &hist { base.push_reward(*h); }
            let inc = |b: f64, a: Action| {
                let mut p = base.clone();
                p.pg_step(a, r, trust_factor(sigma2, b).unwrap())
            };
            let vanilla = inc(0.0, Action::Stag).abs();
            prop_assert!(inc(beta, Action::Stag).abs() <= vanilla + 1e-15);
            prop_assert!(inc(neg, Action::Stag).abs() >= vanilla - 1e-15);
            prop_assert_eq!(inc(beta, Action::Hare), inc(0.0, Action::Hare));
            prop_assert_eq!(inc(neg, Action::Hare), inc(0.0, Action::Hare));
        }
    }

    fn agent(p0: f64, beta: BetaMode<f64>, alpha: f64) -> Agent<f64> {
        Agent::new(
            PolicyState::new(p0, 0.05, 50).unwrap(),
            PartnerEstimate::new(0.5, alpha).unwrap(),
            beta,
            UpdateRule::Reinforce,
        )
        .unwrap()
    }

    #[test]
    fn all_stag_partner_drives_p_up() {
        let g = CoordinationGame::<f64>::stag_hunt();
        let mut a = agent(0.9, BetaMode::Fixed(0.0), 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut partner = |_t: usize| (Action::Stag, Some(1.0));
        let mut last = a.policy.prob();
        for t in 0..300 {
            let log = rattl_episode(&mut a, &mut partner, &g, t, rng.random(), 0.0).unwrap();
            assert_eq!(log.p, last);
            let now = a.policy.prob();
            // the first Hare draw sets the baseline below r_c; after that every update is up-hill
            if t > 0 {
                assert!(now >= last, "t={t}: {now} < {last}");
            }
            last = now;
        }
        assert!(last > 0.9);
    }

    #[test]
    fn logged_tau_is_trust_factor() {
        let g = CoordinationGame::<f64>::stag_hunt();
        let state = BetaState::new(1.0, 1.0, 0.3, -3.0, 6.0).unwrap();
        let mut a = agent(0.6, BetaMode::Adaptive(state), 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut prng = ChaCha8Rng::seed_from_u64(4);
        let mut partner = move |_t: usize| (Action::from_stag(prng.random::<f64>() < 0.6), Some(0.6));
        for t in 0..200 {
            let log = rattl_episode(&mut a, &mut partner, &g, t, rng.random(), 0.0).unwrap();
            assert_eq!(log.tau, trust_factor(log.sigma2, log.beta).unwrap());
            assert_eq!(log.sigma2, log.p_hat * (1.0 - log.p_hat));
            assert_eq!(log.sw_proxy, 2.0 * log.r_i);
        }
    }
}
