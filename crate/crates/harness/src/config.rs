//! Experiment configuration: a TOML document with `[game]`, `[agent]`,
//! `[partner]` and `[run]` tables.

use std::path::Path;

use anyhow::{bail, Context};
use paranoia_core::partners::{PartnerKind, PartnerModel, Switch};
use paranoia_core::sim::{AgentConfig, RunConfig};
use paranoia_core::Game;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_s: Option<f64>,
}

impl Default for GameSpec {
    fn default() -> Self {
        Self::named("stag_hunt")
    }
}

impl GameSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            r_c: None,
            r_h: None,
            r_s: None,
        }
    }

    pub fn build(&self) -> anyhow::Result<Game> {
        match (self.r_c, self.r_h, self.r_s) {
            (None, None, None) => Ok(Game::by_name(&self.name)?),
            (Some(c), Some(h), Some(s)) => Ok(Game::new(self.name.clone(), c, h, s)?),
            _ => bail!("game: give all of r_c, r_h, r_s or none of them"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartnerSpec {
    pub kind: PartnerKind,
    pub q_nominal: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub noise_sigma: f64,
    #[serde(rename = "switch", skip_serializing_if = "Vec::is_empty")]
    pub switches: Vec<Switch<f64>>,
}

impl Default for PartnerSpec {
    fn default() -> Self {
        Self {
            kind: PartnerKind::GaussianSimplex,
            q_nominal: 0.5,
            epsilon: 0.0,
            delta: 0.0,
            noise_sigma: 1.0,
            switches: Vec::new(),
        }
    }
}

impl PartnerSpec {
    pub fn build(&self) -> anyhow::Result<PartnerModel<f64>> {
        let mut m = PartnerModel {
            kind: self.kind,
            q_nominal: self.q_nominal,
            epsilon: self.epsilon,
            delta: self.delta,
            noise_sigma: self.noise_sigma,
            switch_schedule: Vec::new(),
        };
        for s in &self.switches {
            m = m.with_switch(*s);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn from_model(m: &PartnerModel<f64>) -> Self {
        Self {
            kind: m.kind,
            q_nominal: m.q_nominal,
            epsilon: m.epsilon,
            delta: m.delta,
            noise_sigma: m.noise_sigma,
            switches: m.switch_schedule.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub episodes: usize,
    pub seeds: usize,
    pub master_seed: u64,
    pub reward_noise_sigma: f64,
    /// First episode of the retention window.
    pub retention_start: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            episodes: 3000,
            seeds: 20,
            master_seed: 0,
            reward_noise_sigma: 0.0,
            retention_start: 0,
            out_dir: None,
            preset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub agent: AgentConfig<f64>,
    pub partner: PartnerSpec,
    pub run: RunSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let c: Self = toml::from_str(text).context("parsing config")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Canonical serialization: every field, fixed table order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.run.episodes == 0 {
            bail!("run.episodes must be at least 1");
        }
        if self.run.seeds == 0 {
            bail!("run.seeds must be at least 1");
        }
        self.run_config()?.validate()?;
        Ok(())
    }

    pub fn run_config(&self) -> anyhow::Result<RunConfig<f64>> {
        Ok(RunConfig {
            reward_noise_sigma: self.run.reward_noise_sigma,
            retention_start: self.run.retention_start,
            ..RunConfig::new(
                self.game.build()?,
                self.agent.clone(),
                self.partner.build()?,
                self.run.episodes,
            )
        })
    }
}
