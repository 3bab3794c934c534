//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use paranoia_core::oracle::{mc_threshold_estimate, ThresholdSweep};
use paranoia_core::risk::paradox_threshold;
use paranoia_core::Game;
use serde::Serialize;

use crate::config::{ExperimentConfig, GameSpec};
use crate::plots::{emit_plots, Group, PlotKind};
use crate::presets::{reproduce, PresetOptions, PRESETS};
use crate::runner::{metrics_command, run_experiment, with_jobs, write_experiment, write_rows};

#[derive(Debug, Parser)]
#[command(
    name = "paranoia",
    version,
    about = "Cooperation retention experiments in coordination games"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of seeds per configuration.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    /// Output directory (or file for `predict`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form thresholds for a game over a list of beta values.
    Predict {
        /// Built-in game name, ignored when all payoffs are given.
        #[arg(long, default_value = "stag_hunt")]
        game: String,
        #[arg(long)]
        r_c: Option<f64>,
        #[arg(long)]
        r_h: Option<f64>,
        #[arg(long)]
        r_s: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
        beta: Vec<f64>,
    },
    /// Run one configuration over all seeds.
    Simulate {
        #[arg(long)]
        plots: bool,
    },
    /// Grid over beta, reward noise and one partner parameter.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        noise: Vec<f64>,
        /// Partner parameter to vary.
        #[arg(long, value_enum)]
        param: Option<PartnerParam>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Estimate the effective threshold per beta against stationary partners instead.
        #[arg(long)]
        thresholds: bool,
        /// Grid step of the threshold scan.
        #[arg(long, default_value_t = 0.02)]
        step: f64,
    },
    /// Reproduce a preset and write its report.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        preset: String,
        #[arg(long)]
        no_plots: bool,
    },
    /// Compute PoP/PoA and convergence metrics for written results.
    Metrics { dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartnerParam {
    QNominal,
    Epsilon,
    Delta,
    NoiseSigma,
}

impl PartnerParam {
    fn key(self) -> &'static str {
        match self {
            PartnerParam::QNominal => "q",
            PartnerParam::Epsilon => "eps",
            PartnerParam::Delta => "delta",
            PartnerParam::NoiseSigma => "sigma",
        }
    }

    fn set(self, c: &mut ExperimentConfig, v: f64) {
        let p = &mut c.partner;
        match self {
            PartnerParam::QNominal => p.q_nominal = v,
            PartnerParam::Epsilon => p.epsilon = v,
            PartnerParam::Delta => p.delta = v,
            PartnerParam::NoiseSigma => p.noise_sigma = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictRow {
    pub game: String,
    pub beta: f64,
    pub p_star: f64,
    pub p_star_beta: Option<f64>,
    pub p_star_paradox: Option<f64>,
}

pub fn predict_rows(game: &Game, betas: &[f64]) -> Vec<PredictRow> {
    betas
        .iter()
        .map(|&b| PredictRow {
            game: game.name().into(),
            beta: b,
            p_star: game.critical_threshold(),
            p_star_beta: game.predicted_basin_threshold(b).ok(),
            p_star_paradox: paradox_threshold(game, b).ok(),
        })
        .collect()
}

fn load_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut c = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        c.run.master_seed = s;
    }
    if let Some(k) = common.seeds {
        c.run.seeds = k;
    }
    if let Some(n) = common.episodes {
        c.run.episodes = n;
    }
    c.validate()?;
    Ok(c)
}

fn out_dir(common: &Common, config: Option<&ExperimentConfig>, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.run.out_dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn simulate(common: &Common, plots: bool) -> anyhow::Result<()> {
    let config = load_config(common)?;
    let dir = out_dir(common, Some(&config), "results/simulate");
    let runs = run_experiment(&config)?;
    let id = config.run.preset.clone().unwrap_or_else(|| "simulate".into());
    write_experiment(&dir, &id, &config, &runs)?;
    if plots {
        let game = config.game.build()?;
        let groups = [Group { label: id, runs: &runs }];
        emit_plots(&dir, "trajectory", PlotKind::Trajectory, &groups, &game)?;
        emit_plots(&dir, "outcome_space", PlotKind::OutcomeSpace, &groups, &game)?;
    }
    println!("wrote {} runs to {}", runs.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepThresholdRow {
    beta: f64,
    q: f64,
    seeds: usize,
    retained_fraction: f64,
    threshold_estimate: Option<f64>,
}

fn sweep(common: &Common, cmd: &Command) -> anyhow::Result<()> {
    let Command::Sweep {
        betas,
        noise,
        param,
        values,
        thresholds,
        step,
    } = cmd
    else {
        unreachable!()
    };
    let base = load_config(common)?;
    let dir = out_dir(common, Some(&base), "results/sweep");
    let betas = if betas.is_empty() {
        vec![base.agent.beta]
    } else {
        betas.clone()
    };
    if *thresholds {
        if !noise.is_empty() || param.is_some() {
            bail!("--thresholds scans stationary partners; --noise and --param do not apply");
        }
        let mut rows = Vec::new();
        for &b in &betas {
            let mut agent = base.agent.clone();
            agent.beta = b;
            let sweep = ThresholdSweep {
                master_seed: base.run.master_seed,
                ..ThresholdSweep::stationary(base.game.build()?, agent, *step, base.run.seeds, base.run.episodes)
            };
            let e = mc_threshold_estimate(&sweep)?;
            for (k, &q) in e.grid.iter().enumerate() {
                rows.push(SweepThresholdRow {
                    beta: b,
                    q,
                    seeds: base.run.seeds,
                    retained_fraction: e.retained_fraction[k],
                    threshold_estimate: e.threshold,
                });
            }
        }
        write_rows(&dir.join("thresholds.csv"), &rows)?;
        println!("wrote {}", dir.join("thresholds.csv").display());
        return Ok(());
    }
    if param.is_some() != !values.is_empty() {
        bail!("--param and --values go together");
    }
    let noise = if noise.is_empty() {
        vec![base.run.reward_noise_sigma]
    } else {
        noise.clone()
    };
    let vals: Vec<Option<f64>> = if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    };
    // Validate every grid point before running any of them.
    let mut grid = Vec::new();
    for &b in &betas {
        for &n in &noise {
            for &v in &vals {
                let mut c = base.clone();
                c.agent.beta = b;
                c.run.reward_noise_sigma = n;
                let mut id = format!("beta_{b}_noise_{n}");
                if let (Some(p), Some(v)) = (param, v) {
                    p.set(&mut c, v);
                    id.push_str(&format!("_{}_{v}", p.key()));
                }
                c.validate().with_context(|| format!("sweep point {id}"))?;
                grid.push((id, c));
            }
        }
    }
    for (id, c) in &grid {
        let runs = run_experiment(c)?;
        write_experiment(&dir.join(id), id, c, &runs)?;
    }
    metrics_command(&dir, &dir)?;
    println!("wrote {} configurations to {}", grid.len(), dir.display());
    Ok(())
}

fn run_command(cli: &Cli) -> anyhow::Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Predict {
            game,
            r_c,
            r_h,
            r_s,
            beta,
        } => {
            let g = GameSpec {
                name: game.clone(),
                r_c: *r_c,
                r_h: *r_h,
                r_s: *r_s,
            }
            .build()?;
            let rows = predict_rows(&g, beta);
            match &common.out {
                Some(p) => write_rows(p, &rows)?,
                None => {
                    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
                    for r in &rows {
                        w.serialize(r)?;
                    }
                    w.flush()?;
                }
            }
            Ok(())
        }
        Command::Simulate { plots } => simulate(common, *plots),
        cmd @ Command::Sweep { .. } => sweep(common, cmd),
        Command::Reproduce { preset, no_plots } => {
            if common.config.is_some() {
                bail!("reproduce uses the preset's own configuration; drop --config");
            }
            let opts = PresetOptions {
                master_seed: common.seed.unwrap_or(0),
                seeds: common.seeds,
                episodes: common.episodes,
                plots: !no_plots,
            };
            let dir = common.out.clone().unwrap_or_else(|| Path::new("results").join(preset));
            let report = reproduce(preset, &dir, &opts)?;
            let mut out = std::io::stdout().lock();
            for c in &report.checks {
                writeln!(out, "{:?}\t{}\t{}", c.status, c.check, c.measured)?;
            }
            writeln!(out, "report: {}", dir.join("report.md").display())?;
            if !report.passed() {
                bail!("preset {preset}: {} check(s) failed", report.failures().count());
            }
            Ok(())
        }
        Command::Metrics { dir } => {
            let out = common.out.clone().unwrap_or_else(|| dir.clone());
            let rows = metrics_command(dir, &out)?;
            println!("wrote metrics for {} configurations to {}", rows.len(), out.display());
            Ok(())
        }
    }
}

/// Run the parsed command on a pool of `--jobs` workers.
pub fn run(cli: &Cli) -> anyhow::Result<()> {
    with_jobs(cli.common.jobs, || run_command(cli))?
}

/// Single-line, logfmt-style error report.
pub fn error_line(e: &anyhow::Error) -> String {
    let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
    format!("level=error msg={:?}", chain.join(": "))
}
