//! Cooperation retention in repeated coordination games.
//!
//! The crate covers the closed-form analytics of symmetric 2x2 coordination
//! games ([`game`]), risk measures and trust dampening ([`risk`]), the
//! trust-dampened policy-gradient learner ([`learning`]), partner models
//! ([`partners`]), seeded simulation ([`sim`]), analytic and Monte-Carlo
//! oracles for the learning dynamics ([`oracle`]) and welfare metrics
//! ([`metrics`]).
//!
//! Closed-form game quantities are generic over [`Field`], so they can be
//! evaluated exactly with [`Rational`]. Everything else is generic over
//! [`Scalar`] (`f32` or `f64`).

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod learning;
pub mod metrics;
pub mod oracle;
pub mod partners;
pub mod risk;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use game::{Action, CoordinationGame, GameAnalytics, MixedProfile};
pub use scalar::{Field, Scalar};

/// Exact rational scalar for the closed-form analytics.
pub type Rational = num_rational::Ratio<i64>;

pub type Game = CoordinationGame<f64>;
pub type Game32 = CoordinationGame<f32>;
pub type ExactGame = CoordinationGame<Rational>;
pub type Agent = learning::Agent<f64>;
pub type PartnerModel = partners::PartnerModel<f64>;
pub type AgentConfig = sim::AgentConfig<f64>;
pub type RunConfig = sim::RunConfig<f64>;
pub type RunResult = sim::RunResult<f64>;
pub type EpisodeLog = learning::EpisodeLog<f64>;
pub type DiscreteDistribution = risk::DiscreteDistribution<f64>;
