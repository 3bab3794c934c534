//! Seeded multi-run orchestration and CSV emission.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use paranoia_core::learning::EpisodeLog;
use paranoia_core::metrics::{empirical_pop_poa, median_episodes_to_criterion, DEFAULT_POA_FLOOR};
use paranoia_core::sim::{final_window, simulate, summarize, RunResult};
use paranoia_core::{Action, Game};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Run `f` on a pool of `jobs` workers; `None` uses the global pool.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> anyhow::Result<R> {
    match jobs {
        None => Ok(f()),
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
    }
}

/// All seeds of one configuration, in seed order.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<Vec<RunResult<f64>>> {
    config.validate()?;
    let rc = config.run_config()?;
    let master = config.run.master_seed;
    (0..config.run.seeds)
        .into_par_iter()
        .map(|s| simulate(&rc, master, s).map_err(anyhow::Error::from))
        .collect()
}

fn action_str(a: Action) -> &'static str {
    match a {
        Action::Stag => "S",
        Action::Hare => "H",
    }
}

fn parse_action(s: &str) -> anyhow::Result<Action> {
    match s {
        "S" => Ok(Action::Stag),
        "H" => Ok(Action::Hare),
        other => bail!("bad action `{other}`"),
    }
}

pub fn write_run_csv(path: &Path, log: &[EpisodeLog<f64>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(EpisodeLog::<f64>::HEADER)?;
    for e in log {
        w.write_record([
            e.t.to_string(),
            action_str(e.a_i).into(),
            action_str(e.a_j).into(),
            e.r_i.to_string(),
            e.p.to_string(),
            e.q_true.map(|q| q.to_string()).unwrap_or_default(),
            e.p_hat.to_string(),
            e.sigma2.to_string(),
            e.beta.to_string(),
            e.tau.to_string(),
            e.sw_proxy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_run_csv(path: &Path) -> anyhow::Result<Vec<EpisodeLog<f64>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != EpisodeLog::<f64>::HEADER {
        bail!("{}: unexpected header {header:?}", path.display());
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> anyhow::Result<f64> { Ok(rec[i].parse()?) };
        out.push(EpisodeLog {
            t: rec[0].parse()?,
            a_i: parse_action(&rec[1])?,
            a_j: parse_action(&rec[2])?,
            r_i: f(3)?,
            p: f(4)?,
            q_true: if rec[5].is_empty() { None } else { Some(f(5)?) },
            p_hat: f(6)?,
            sigma2: f(7)?,
            beta: f(8)?,
            tau: f(9)?,
            sw_proxy: f(10)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub config_id: String,
    pub seed: usize,
    pub beta: f64,
    pub final_cooperation: f64,
    pub mean_sw: f64,
    pub retained: bool,
    pub failure_episode: Option<usize>,
    pub episodes_to_criterion: Option<usize>,
    pub reward_std: f64,
    pub pop: f64,
    pub poa: f64,
    pub poa_floored: bool,
}

pub fn summary_row(config_id: &str, beta: f64, game: &Game, run: &RunResult<f64>) -> anyhow::Result<SummaryRow> {
    let m = empirical_pop_poa(run, game, final_window(run.log.len()), DEFAULT_POA_FLOOR)?;
    let s = &run.summary;
    Ok(SummaryRow {
        config_id: config_id.into(),
        seed: run.seed,
        beta,
        final_cooperation: s.final_cooperation,
        mean_sw: s.mean_sw,
        retained: s.retention.retained(),
        failure_episode: s.retention.failure_episode(),
        episodes_to_criterion: s.episodes_to_criterion,
        reward_std: s.reward_std,
        pop: m.pop,
        poa: m.poa,
        poa_floored: m.floored,
    })
}

pub fn write_rows<R: Serialize>(path: &Path, rows: &[R]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_file(dir: &Path, seed: usize) -> PathBuf {
    dir.join("runs").join(format!("seed_{seed:04}.csv"))
}

/// Writes `config.toml`, `runs/seed_NNNN.csv` and `summary.csv` under `dir`.
pub fn write_experiment(
    dir: &Path,
    config_id: &str,
    config: &ExperimentConfig,
    results: &[RunResult<f64>],
) -> anyhow::Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir.join("runs")).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    let game = config.game.build()?;
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        write_run_csv(&run_file(dir, r.seed), &r.log)?;
        rows.push(summary_row(config_id, config.agent.beta, &game, r)?);
    }
    write_rows(&dir.join("summary.csv"), &rows)?;
    Ok(rows)
}

/// Reload a written experiment and recompute its summaries from the logs.
pub fn load_experiment(dir: &Path) -> anyhow::Result<(ExperimentConfig, Vec<RunResult<f64>>)> {
    let config = ExperimentConfig::load(&dir.join("config.toml"))?;
    let game = config.game.build()?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir.join("runs"))
        .with_context(|| format!("listing {}/runs", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut runs = Vec::with_capacity(files.len());
    for f in files {
        let seed: usize = f
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.strip_prefix("seed_"))
            .and_then(|s| s.parse().ok())
            .with_context(|| format!("{}: expected seed_NNNN.csv", f.display()))?;
        let log = read_run_csv(&f)?;
        let summary = summarize(&log, &game, config.run.retention_start)?;
        runs.push(RunResult { seed, log, summary });
    }
    Ok((config, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub config_id: String,
    pub beta: f64,
    pub pop: f64,
    pub poa: f64,
    pub final_cooperation: f64,
    pub reward_std: f64,
    pub episodes_to_criterion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRunRow {
    pub config_id: String,
    pub seed: usize,
    pub beta: f64,
    pub pop: f64,
    pub poa: f64,
    pub final_cooperation: f64,
    pub reward_std: f64,
    pub episodes_to_criterion: Option<usize>,
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Per-configuration medians over seeds, plus the per-run rows.
pub fn metrics_for(
    config_id: &str,
    config: &ExperimentConfig,
    runs: &[RunResult<f64>],
) -> anyhow::Result<(MetricsRow, Vec<MetricsRunRow>)> {
    if runs.is_empty() {
        bail!("{config_id}: no runs");
    }
    let game = config.game.build()?;
    let rows: Vec<SummaryRow> = runs
        .iter()
        .map(|r| summary_row(config_id, config.agent.beta, &game, r))
        .collect::<anyhow::Result<_>>()?;
    let per_run = rows
        .iter()
        .map(|r| MetricsRunRow {
            config_id: config_id.into(),
            seed: r.seed,
            beta: r.beta,
            pop: r.pop,
            poa: r.poa,
            final_cooperation: r.final_cooperation,
            reward_std: r.reward_std,
            episodes_to_criterion: r.episodes_to_criterion,
        })
        .collect();
    let med = |f: fn(&SummaryRow) -> f64| median(rows.iter().map(f).collect());
    Ok((
        MetricsRow {
            config_id: config_id.into(),
            beta: config.agent.beta,
            pop: med(|r| r.pop),
            poa: med(|r| r.poa),
            final_cooperation: med(|r| r.final_cooperation),
            reward_std: med(|r| r.reward_std),
            episodes_to_criterion: median_episodes_to_criterion(runs),
        },
        per_run,
    ))
}

/// Experiment directories under `root`: `root` itself if it holds a
/// `config.toml`, otherwise its immediate subdirectories that do, by name.
pub fn experiment_dirs(root: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if root.join("config.toml").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("config.toml").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("{}: no experiment results found", root.display());
    }
    Ok(dirs)
}

/// Compute `metrics.csv` and `metrics_runs.csv` for every experiment under `root`.
pub fn metrics_command(root: &Path, out: &Path) -> anyhow::Result<Vec<MetricsRow>> {
    let mut agg = Vec::new();
    let mut per = Vec::new();
    for dir in experiment_dirs(root)? {
        let id = dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("experiment")
            .to_owned();
        let (config, runs) = load_experiment(&dir)?;
        let (row, rows) = metrics_for(&id, &config, &runs)?;
        agg.push(row);
        per.extend(rows);
    }
    write_rows(&out.join("metrics.csv"), &agg)?;
    write_rows(&out.join("metrics_runs.csv"), &per)?;
    Ok(agg)
}
