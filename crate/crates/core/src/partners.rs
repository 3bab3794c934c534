//! Partner behaviour models and noise injectors.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::Action;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartnerKind {
    /// Fixed Bernoulli(q_nominal) play.
    Stationary,
    /// Per-episode q drawn uniformly from `[q - epsilon, q + epsilon]`, clamped.
    EpsilonBall,
    /// With probability `delta` play uniformly at random.
    Explorer,
    /// Gaussian noise on the mixed strategy, projected back onto the simplex.
    GaussianSimplex,
    /// A second learning agent (self-play); sampled by the simulator, not here.
    CoLearner,
}

/// Change of partner parameters from `episode` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Switch<T> {
    pub episode: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_nominal: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerModel<T> {
    pub kind: PartnerKind,
    pub q_nominal: T,
    pub epsilon: T,
    pub delta: T,
    pub noise_sigma: T,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub switch_schedule: Vec<Switch<T>>,
}

fn in_unit<T: Scalar>(name: &'static str, x: T) -> Result<()> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(invalid(name, format!("{x} is not a probability")));
    }
    Ok(())
}

impl<T: Scalar> PartnerModel<T> {
    fn base(kind: PartnerKind, q_nominal: T) -> Self {
        Self {
            kind,
            q_nominal,
            epsilon: T::zero(),
            delta: T::zero(),
            noise_sigma: T::zero(),
            switch_schedule: Vec::new(),
        }
    }

    pub fn stationary(q: T) -> Self {
        Self::base(PartnerKind::Stationary, q)
    }

    pub fn epsilon_ball(q: T, epsilon: T) -> Self {
        Self {
            epsilon,
            ..Self::base(PartnerKind::EpsilonBall, q)
        }
    }

    pub fn explorer(q: T, delta: T) -> Self {
        Self {
            delta,
            ..Self::base(PartnerKind::Explorer, q)
        }
    }

    pub fn gaussian_simplex(nominal: T, sigma: T) -> Self {
        Self {
            noise_sigma: sigma,
            ..Self::base(PartnerKind::GaussianSimplex, nominal)
        }
    }

    pub fn co_learner() -> Self {
        Self::base(PartnerKind::CoLearner, T::lit(0.5))
    }

    pub fn with_switch(mut self, switch: Switch<T>) -> Self {
        self.switch_schedule.push(switch);
        self.switch_schedule.sort_by_key(|s| s.episode);
        self
    }

    pub fn validate(&self) -> Result<()> {
        in_unit("q_nominal", self.q_nominal)?;
        in_unit("delta", self.delta)?;
        if !(self.epsilon >= T::zero()) {
            return Err(invalid("epsilon", "must be non-negative"));
        }
        if !(self.noise_sigma >= T::zero()) || !self.noise_sigma.is_finite() {
            return Err(invalid("noise_sigma", "must be finite and non-negative"));
        }
        for s in &self.switch_schedule {
            if let Some(q) = s.q_nominal {
                in_unit("switch.q_nominal", q)?;
            }
            if let Some(d) = s.delta {
                in_unit("switch.delta", d)?;
            }
        }
        Ok(())
    }

    /// `(q_nominal, delta)` in force at episode `t`.
    pub fn params_at(&self, t: usize) -> (T, T) {
        self.switch_schedule
            .iter()
            .take_while(|s| s.episode <= t)
            .fold((self.q_nominal, self.delta), |(q, d), s| {
                (s.q_nominal.unwrap_or(q), s.delta.unwrap_or(d))
            })
    }

    /// Long-run Stag frequency of the model at episode `t`, where it has a closed form.
    pub fn analytic_mean(&self, t: usize) -> Option<T> {
        let (q, d) = self.params_at(t);
        match self.kind {
            PartnerKind::Stationary => Some(q),
            PartnerKind::EpsilonBall if q - self.epsilon >= T::zero() && q + self.epsilon <= T::one() => Some(q),
            PartnerKind::Explorer => Some((T::one() - d) * q + d * T::lit(0.5)),
            PartnerKind::GaussianSimplex if self.noise_sigma == T::zero() => Some(q),
            _ => None,
        }
    }
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>())
}

fn normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Draw the partner's action for episode `t`.
///
/// Returns the action and the Stag probability it was drawn with. Each kind
/// consumes a fixed number of draws per call so that paired runs stay aligned.
pub fn sample_partner_action<T: Scalar, R: Rng + ?Sized>(
    model: &PartnerModel<T>,
    t: usize,
    rng: &mut R,
) -> Result<(Action, T)> {
    let (q, delta) = model.params_at(t);
    match model.kind {
        PartnerKind::Stationary => {
            let u: T = uniform(rng);
            Ok((Action::from_stag(u < q), q))
        }
        PartnerKind::EpsilonBall => {
            let shift: T = uniform(rng);
            let u: T = uniform(rng);
            let e = model.epsilon;
            let q_eff = (q + e * (shift + shift - T::one())).clamp01();
            Ok((Action::from_stag(u < q_eff), q_eff))
        }
        PartnerKind::Explorer => {
            let explore: T = uniform(rng);
            let coin: T = uniform(rng);
            let u: T = uniform(rng);
            let half = T::lit(0.5);
            let q_eff = (T::one() - delta) * q + delta * half;
            let stag = if explore < delta { coin < half } else { u < q };
            Ok((Action::from_stag(stag), q_eff))
        }
        PartnerKind::GaussianSimplex => {
            let n1: T = normal(rng);
            let n2: T = normal(rng);
            let u: T = uniform(rng);
            let s = model.noise_sigma;
            let (q_eff, _) = project_simplex_2(q + s * n1, T::one() - q + s * n2);
            Ok((Action::from_stag(u < q_eff), q_eff))
        }
        PartnerKind::CoLearner => Err(invalid(
            "partner.kind",
            "co_learner partners are driven by the simulator",
        )),
    }
}

/// Euclidean projection of `(v1, v2)` onto `{x >= 0, x1 + x2 = 1}`.
pub fn project_simplex_2<T: Scalar>(v1: T, v2: T) -> (T, T) {
    let shift = (T::one() - v1 - v2) * T::lit(0.5);
    let x1 = (v1 + shift).clamp01();
    (x1, T::one() - x1)
}

/// `r + sigma * n` with `n` standard normal. Always consumes one draw.
pub fn perturb_reward<T: Scalar, R: Rng + ?Sized>(r: T, sigma: T, rng: &mut R) -> T {
    let n: T = normal(rng);
    if sigma == T::zero() {
        r
    } else {
        r + sigma * n
    }
}
