//! Preset reproductions. Each preset writes its data CSVs plus `report.csv`
//! and `report.md` (measured value, reference value, tolerance, status).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use paranoia_core::learning::BetaState;
use paranoia_core::metrics::{beta_star, loss_bound, TradeoffParams};
use paranoia_core::oracle::{
    fit_collapse_rate, mc_threshold_estimate, paired_threshold_test, reestablishment, sign_test, CollapseParams,
    ThresholdEstimate, ThresholdSweep,
};
use paranoia_core::partners::{PartnerKind, Switch};
use paranoia_core::sim::{AgentConfig, BetaModeKind, RunResult};
use paranoia_core::{ExactGame, Game, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, GameSpec, PartnerSpec, RunSpec};
use crate::plots::{emit_plots, Group, PlotKind};
use crate::runner::{metrics_for, run_experiment, write_experiment, write_rows, MetricsRow, SummaryRow};

pub const PRESETS: [&str; 10] = [
    "table1",
    "table2_ordering",
    "table3_ordering",
    "fig1",
    "fig9",
    "collapse",
    "basin_sweep",
    "beta_star_check",
    "adaptive_beta_demo",
    "ish_beta_sweep",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// Reported for comparison only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub measured: String,
    pub reference: String,
    pub tolerance: String,
    pub status: Status,
    pub note: String,
}

impl Check {
    fn new(check: impl Into<String>, pass: bool, measured: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            measured: measured.into(),
            reference: String::new(),
            tolerance: String::new(),
            status: if pass { Status::Pass } else { Status::Fail },
            note: String::new(),
        }
    }

    fn info(check: impl Into<String>, measured: impl Into<String>) -> Self {
        Self {
            status: Status::Info,
            ..Self::new(check, true, measured)
        }
    }

    fn reference(mut self, r: impl Into<String>) -> Self {
        self.reference = r.into();
        self
    }

    fn tol(mut self, t: impl Into<String>) -> Self {
        self.tolerance = t.into();
        self
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.note = n.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub preset: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    /// Checks whose name starts with `prefix`.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> {
        self.checks.iter().filter(move |c| c.check.starts_with(prefix))
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        write_rows(&dir.join("report.csv"), &self.checks)?;
        let mut md = format!("# {}\n\n", self.preset);
        md.push_str("| check | measured | reference | tolerance | status | note |\n");
        md.push_str("|---|---|---|---|---|---|\n");
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Info => "INFO",
            };
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} |",
                c.check, c.measured, c.reference, c.tolerance, status, c.note
            );
        }
        let _ = writeln!(md, "\noverall: {}", if self.passed() { "PASS" } else { "FAIL" });
        fs::write(dir.join("report.md"), md)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetOptions {
    pub master_seed: u64,
    /// Overrides the preset's seed count.
    pub seeds: Option<usize>,
    /// Overrides the preset's episode count.
    pub episodes: Option<usize>,
    pub plots: bool,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            master_seed: 0,
            seeds: None,
            episodes: None,
            plots: true,
        }
    }
}

impl PresetOptions {
    fn run(&self, preset: &str, episodes: usize, seeds: usize) -> RunSpec {
        RunSpec {
            episodes: self.episodes.unwrap_or(episodes),
            seeds: self.seeds.unwrap_or(seeds),
            master_seed: self.master_seed,
            preset: Some(preset.into()),
            ..RunSpec::default()
        }
    }
}

/// Run preset `name`, writing everything under `out`.
pub fn reproduce(name: &str, out: &Path, opts: &PresetOptions) -> anyhow::Result<Report> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let checks = match name {
        "table1" => table1(out)?,
        "table2_ordering" | "ish_beta_sweep" => table2(name, out, opts)?,
        "table3_ordering" => table3(out, opts)?,
        "fig1" => fig1(out, opts)?,
        "fig9" => fig9(out, opts)?,
        "collapse" => collapse(out, opts)?,
        "basin_sweep" => basin_sweep(out, opts)?,
        "beta_star_check" => beta_star_check(out, opts)?,
        "adaptive_beta_demo" => adaptive_beta_demo(out, opts)?,
        other => bail!("unknown preset `{other}`; known presets: {}", PRESETS.join(", ")),
    };
    let report = Report {
        preset: name.into(),
        checks,
    };
    report.write(out)?;
    Ok(report)
}

fn ratio_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn fmt_ratio(r: Rational) -> String {
    format!("{r} = {:.4}", ratio_f64(r))
}

#[derive(Serialize)]
struct Table1Row {
    game: String,
    r_c: String,
    r_h: String,
    r_s: String,
    p_star: String,
    p_star_value: f64,
    p_star_beta1: String,
    p_star_beta1_value: f64,
    expansion_percent: f64,
    reference_p_star: f64,
    reference_p_star_beta1: f64,
    reference_expansion_percent: f64,
}

fn table1(out: &Path) -> anyhow::Result<Vec<Check>> {
    let reference = [
        ("stag_hunt", Rational::new(7, 10), 0.70, 0.58, 17.0),
        ("chicken", Rational::new(3, 5), 0.60, 0.45, 25.0),
        ("pure_coordination", Rational::new(1, 3), 0.33, 0.26, 21.0),
    ];
    let one = Rational::from_integer(1);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (name, exact, ref_p, ref_pb, ref_exp) in reference {
        let g = ExactGame::by_name(name)?;
        let p = g.critical_threshold();
        let pb = g.predicted_basin_threshold(one)?;
        let expansion = (p - pb) / (one - p) * Rational::from_integer(100);
        rows.push(Table1Row {
            game: name.into(),
            r_c: g.r_c().to_string(),
            r_h: g.r_h().to_string(),
            r_s: g.r_s().to_string(),
            p_star: p.to_string(),
            p_star_value: ratio_f64(p),
            p_star_beta1: pb.to_string(),
            p_star_beta1_value: ratio_f64(pb),
            expansion_percent: ratio_f64(expansion),
            reference_p_star: ref_p,
            reference_p_star_beta1: ref_pb,
            reference_expansion_percent: ref_exp,
        });
        checks.push(
            Check::new(format!("p_star {name}"), p == exact, fmt_ratio(p))
                .reference(format!("{ref_p:.2}"))
                .tol("exact")
                .note(format!("expected {exact}")),
        );
        let pb_v = ratio_f64(pb);
        let c = if name == "pure_coordination" {
            let rounded = (pb_v * 100.0).round() / 100.0;
            Check::new(
                format!("p_star_beta1 {name}"),
                pb == Rational::new(7, 27) && rounded == ref_pb,
                fmt_ratio(pb),
            )
            .tol("rounds to the reference at 2 d.p.")
        } else {
            let want = if name == "stag_hunt" {
                Rational::new(679, 1000)
            } else {
                Rational::new(69, 125)
            };
            Check::new(format!("p_star_beta1 {name}"), pb == want, fmt_ratio(pb))
                .tol("exact first-order value")
                .note(format!(
                    "reference {ref_pb:.2} does not follow from p* - beta p*(1-p*)/(r_c - r_s); first-order value reported"
                ))
        };
        checks.push(c.reference(format!("{ref_pb:.2}")));
    }
    write_rows(&out.join("table1.csv"), &rows)?;
    Ok(checks)
}

/// One configuration and its runs.
struct Family {
    label: String,
    config: ExperimentConfig,
    runs: Vec<RunResult<f64>>,
    metrics: MetricsRow,
}

impl Family {
    fn mean_cooperation(&self) -> f64 {
        self.runs.iter().map(|r| r.summary.final_cooperation).sum::<f64>() / self.runs.len() as f64
    }

    fn mean_reward_std(&self) -> f64 {
        self.runs.iter().map(|r| r.summary.reward_std).sum::<f64>() / self.runs.len() as f64
    }

    fn retention_rate(&self) -> f64 {
        self.runs.iter().filter(|r| r.summary.retention.retained()).count() as f64 / self.runs.len() as f64
    }
}

/// Run each labelled config into `dir/<label>/` and write the aggregate
/// `summary.csv` (one row per configuration and seed) and `metrics.csv`.
fn run_families(dir: &Path, configs: Vec<(String, ExperimentConfig)>) -> anyhow::Result<Vec<Family>> {
    let mut fams = Vec::new();
    let mut summary: Vec<SummaryRow> = Vec::new();
    let mut metrics = Vec::new();
    for (label, config) in configs {
        let runs = run_experiment(&config)?;
        summary.extend(write_experiment(&dir.join(&label), &label, &config, &runs)?);
        let (m, _) = metrics_for(&label, &config, &runs)?;
        metrics.push(m.clone());
        fams.push(Family {
            label,
            config,
            runs,
            metrics: m,
        });
    }
    write_rows(&dir.join("summary.csv"), &summary)?;
    write_rows(&dir.join("metrics.csv"), &metrics)?;
    Ok(fams)
}

fn plot_families(dir: &Path, fams: &[Family], kinds: &[PlotKind]) -> anyhow::Result<()> {
    let game = fams[0].config.game.build()?;
    let groups: Vec<Group<'_>> = fams
        .iter()
        .map(|f| Group {
            label: f.label.clone(),
            runs: &f.runs,
        })
        .collect();
    for &k in kinds {
        let stem = match k {
            PlotKind::Trajectory => "trajectory",
            PlotKind::OutcomeSpace => "outcome_space",
            PlotKind::Pareto => "pareto",
        };
        emit_plots(dir, stem, k, &groups, &game)?;
    }
    Ok(())
}

fn beta_label(beta: f64) -> String {
    format!("beta_{beta}")
}

fn ordering_config(
    preset: &str,
    opts: &PresetOptions,
    beta: f64,
    partner_sigma: f64,
    reward_noise: f64,
) -> ExperimentConfig {
    ExperimentConfig {
        game: GameSpec::named("stag_hunt"),
        agent: AgentConfig {
            beta,
            ema_alpha: 0.5,
            learning_rate: 0.035,
            baseline_window: 200,
            p0: 0.5,
            ..AgentConfig::default()
        },
        partner: PartnerSpec {
            kind: PartnerKind::GaussianSimplex,
            q_nominal: 0.925,
            noise_sigma: partner_sigma,
            ..PartnerSpec::default()
        },
        run: RunSpec {
            reward_noise_sigma: reward_noise,
            ..opts.run(preset, 3000, 20)
        },
    }
}

/// Reference PoP/PoA for beta = -1, the risk-neutral baseline and beta = +1.
type MetricRefs = ([f64; 3], [f64; 3]);

fn ordering_family(
    dir: &Path,
    preset: &str,
    opts: &PresetOptions,
    partner_sigma: f64,
    reward_noise: f64,
) -> anyhow::Result<Vec<Family>> {
    let configs = [-1.0, 0.0, 1.0]
        .into_iter()
        .map(|b| {
            (
                beta_label(b),
                ordering_config(preset, opts, b, partner_sigma, reward_noise),
            )
        })
        .collect();
    let fams = run_families(dir, configs)?;
    if opts.plots {
        plot_families(
            dir,
            &fams,
            &[PlotKind::Trajectory, PlotKind::OutcomeSpace, PlotKind::Pareto],
        )?;
    }
    Ok(fams)
}

/// Cooperation bands and median PoP/PoA orderings for the `[-1, 0, +1]` family.
fn ordering_checks(prefix: &str, fams: &[Family], refs: Option<MetricRefs>) -> Vec<Check> {
    let [neg, zero, pos] = [&fams[0], &fams[1], &fams[2]];
    let (cn, cz, cp) = (neg.mean_cooperation(), zero.mean_cooperation(), pos.mean_cooperation());
    let pop = [neg.metrics.pop, zero.metrics.pop, pos.metrics.pop];
    let poa = [neg.metrics.poa, zero.metrics.poa, pos.metrics.poa];
    let (ref_pop, ref_poa) = match refs {
        Some((a, b)) => (
            format!("{:.2} > {:.2} > {:.2}", a[2], a[1], a[0]),
            format!("{:.2} < {:.2} < {:.2}", b[2], b[1], b[0]),
        ),
        None => (String::new(), String::new()),
    };
    vec![
        Check::new(format!("{prefix} cooperation beta=+1"), cp > 0.9, format!("{cp:.4}"))
            .reference(">0.92")
            .tol("> 0.9")
            .note("mean final-window Stag rate over seeds"),
        Check::new(format!("{prefix} cooperation beta=-1"), cn < 0.3, format!("{cn:.4}"))
            .reference("~0.10")
            .tol("< 0.3"),
        Check::new(
            format!("{prefix} cooperation beta=0"),
            cz > 0.3 && cz < 0.9,
            format!("{cz:.4}"),
        )
        .reference("~0.63")
        .tol("in (0.3, 0.9)"),
        Check::new(
            format!("{prefix} PoP ordering"),
            pop[2] > pop[1] && pop[1] > pop[0],
            format!("{:.4} > {:.4} > {:.4}", pop[2], pop[1], pop[0]),
        )
        .reference(ref_pop)
        .tol("strict ordering of medians")
        .note("beta=+1 > beta=0 > beta=-1"),
        Check::new(
            format!("{prefix} PoA ordering"),
            poa[2] < poa[1] && poa[1] < poa[0],
            format!("{:.4} < {:.4} < {:.4}", poa[2], poa[1], poa[0]),
        )
        .reference(ref_poa)
        .tol("strict ordering of medians")
        .note("beta=+1 < beta=0 < beta=-1"),
    ]
}

const TABLE2_NO_NOISE: MetricRefs = ([1.27, 2.51, 2.88], [4.23, 2.13, 1.85]);
const TABLE2_REWARD_NOISE: MetricRefs = ([1.34, 2.49, 2.93], [3.96, 2.14, 1.82]);

fn table2(preset: &str, out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let fams = ordering_family(out, preset, opts, 1.0, 0.0)?;
    let mut checks = ordering_checks("partner_sigma_1.0", &fams, Some(TABLE2_NO_NOISE));
    if preset == "ish_beta_sweep" {
        for c in &mut checks {
            c.status = Status::Info;
        }
    }
    Ok(checks)
}

fn table3(out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let mut checks = Vec::new();
    for sigma in [0.5, 1.0] {
        let tag = format!("partner_sigma_{sigma:.1}");
        let fams = ordering_family(&out.join(&tag), "table3_ordering", opts, sigma, 0.0)?;
        checks.extend(ordering_checks(&tag, &fams, None));
    }
    Ok(checks)
}

fn fig1(out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let quiet = ordering_family(&out.join("no_noise"), "fig1", opts, 1.0, 0.0)?;
    let noisy = ordering_family(&out.join("reward_noise"), "fig1", opts, 1.0, 1.0)?;
    let a = ordering_checks("no_noise", &quiet, Some(TABLE2_NO_NOISE));
    let b = ordering_checks("reward_noise", &noisy, Some(TABLE2_REWARD_NOISE));
    let same = a.iter().zip(&b).all(|(x, y)| x.status == y.status);
    let mut checks = a;
    checks.extend(b);
    checks.push(
        Check::new(
            "reward_noise orderings unchanged",
            same,
            if same { "identical verdicts" } else { "verdicts differ" },
        )
        .note("same seeds with and without reward noise 1.0"),
    );
    Ok(checks)
}

fn demo_agent(beta_mode: BetaModeKind, beta: f64) -> AgentConfig<f64> {
    AgentConfig {
        beta_mode,
        beta,
        beta_star: 1.0,
        eta_beta: 0.5,
        beta_min: -3.9,
        beta_max: 10.0,
        learning_rate: 0.5,
        ema_alpha: 0.5,
        baseline_window: 50,
        p0: 0.75,
        ..AgentConfig::default()
    }
}

fn fig9(out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let profiles: Vec<(String, AgentConfig<f64>)> = [-1.0, 0.0, 1.0, 2.0]
        .into_iter()
        .map(|b| (beta_label(b), demo_agent(BetaModeKind::Fixed, b)))
        .chain([("adaptive".to_string(), demo_agent(BetaModeKind::Adaptive, 1.0))])
        .collect();
    let mut checks = Vec::new();
    let mut all: Vec<Family> = Vec::new();
    for delta in [0.0, 0.2, 0.4] {
        let tag = format!("delta_{delta:.1}");
        let configs = profiles
            .iter()
            .map(|(label, agent)| {
                let c = ExperimentConfig {
                    game: GameSpec::named("stag_hunt"),
                    agent: agent.clone(),
                    partner: PartnerSpec {
                        kind: PartnerKind::Explorer,
                        q_nominal: 0.95,
                        delta,
                        noise_sigma: 0.0,
                        ..PartnerSpec::default()
                    },
                    run: opts.run("fig9", 200, 20),
                };
                (label.clone(), c)
            })
            .collect();
        let fams = run_families(&out.join(&tag), configs)?;
        if opts.plots {
            plot_families(&out.join(&tag), &fams, &[PlotKind::Trajectory])?;
        }
        for f in fams {
            checks.push(
                Check::info(
                    format!("{tag} {} final cooperation", f.label),
                    format!("{:.4}", f.mean_cooperation()),
                )
                .note(format!("mean reward std {:.4}", f.mean_reward_std())),
            );
            all.push(Family {
                label: format!("{tag} {}", f.label),
                ..f
            });
        }
    }
    if opts.plots {
        plot_families(out, &all, &[PlotKind::Pareto])?;
    }
    Ok(checks)
}

#[derive(Serialize)]
struct CollapseRow {
    t: usize,
    mean_p: f64,
    predicted_p: f64,
}

#[derive(Serialize)]
struct CrossingRow {
    seed: usize,
    first_crossing: Option<usize>,
    final_p: f64,
}

fn collapse(out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let game = Game::stag_hunt();
    let p_star = game.critical_threshold();
    let (eta, delta, margin) = (0.02, 0.1, 0.05);
    let config = ExperimentConfig {
        game: GameSpec::named("stag_hunt"),
        agent: AgentConfig {
            beta: 0.0,
            learning_rate: eta,
            p0: p_star + margin,
            ..AgentConfig::default()
        },
        partner: PartnerSpec {
            kind: PartnerKind::Explorer,
            q_nominal: p_star,
            delta,
            noise_sigma: 0.0,
            ..PartnerSpec::default()
        },
        run: opts.run("collapse", 3000, 100),
    };
    fs::write(out.join("config.toml"), config.to_toml())?;
    let runs = run_experiment(&config)?;
    let trajs: Vec<Vec<f64>> = runs.iter().map(|r| r.log.iter().map(|e| e.p).collect()).collect();
    let len = trajs[0].len();
    let mean: Vec<f64> = (0..len)
        .map(|t| trajs.iter().map(|p| p[t]).sum::<f64>() / trajs.len() as f64)
        .collect();
    let params = CollapseParams::new(margin, eta, delta, game.clone())?;
    let predicted = params.decay_rate();
    let rows: Vec<CollapseRow> = mean
        .iter()
        .enumerate()
        .map(|(t, &m)| CollapseRow {
            t,
            mean_p: m,
            predicted_p: paranoia_core::oracle::collapse_curve(&params, t),
        })
        .collect();
    write_rows(&out.join("collapse_mean.csv"), &rows)?;
    let crossings: Vec<CrossingRow> = runs
        .iter()
        .zip(&trajs)
        .map(|(r, p)| CrossingRow {
            seed: r.seed,
            first_crossing: p.iter().position(|&x| x < p_star),
            final_p: *p.last().expect("non-empty run"),
        })
        .collect();
    write_rows(&out.join("collapse_runs.csv"), &crossings)?;
    if opts.plots {
        emit_plots(
            out,
            "trajectory",
            PlotKind::Trajectory,
            &[Group {
                label: "beta_0".into(),
                runs: &runs,
            }],
            &game,
        )?;
    }

    let mut checks = Vec::new();
    match fit_collapse_rate(&mean, p_star) {
        Ok(fit) => {
            let rel = (fit - predicted).abs() / predicted;
            checks.push(
                Check::new("fitted decay rate", rel <= 0.25, format!("{fit:.6}"))
                    .reference(format!("{predicted:.6}"))
                    .tol("within 25%")
                    .note(format!(
                        "log-linear fit of mean p(t) - p* before the first crossing; relative error {:.1}%",
                        100.0 * rel
                    )),
            );
        }
        Err(e) => checks.push(
            Check::new("fitted decay rate", false, "n/a")
                .reference(format!("{predicted:.6}"))
                .tol("within 25%")
                .note(format!("fit failed: {e}")),
        ),
    }
    let (crossed, back) = reestablishment(&trajs, p_star, 50);
    let never = if crossed == 0 {
        0.0
    } else {
        (crossed - back) as f64 / crossed as f64
    };
    checks.push(
        Check::new(
            "crossing runs that never re-establish",
            crossed > 0 && never >= 0.98,
            format!("{:.4} ({} of {crossed})", never, crossed - back),
        )
        .reference(">= 0.98")
        .tol(">= 0.98")
        .note("re-established = 50 consecutive episodes with p >= p* after the first crossing"),
    );
    Ok(checks)
}

#[derive(Serialize)]
struct ThresholdRow {
    beta: f64,
    q: f64,
    seeds: usize,
    retained_fraction: f64,
    threshold_estimate: Option<f64>,
    band_lo: Option<f64>,
    band_hi: Option<f64>,
}

#[derive(Serialize)]
struct SeedThresholdRow {
    seed: usize,
    threshold_beta_0: Option<f64>,
    threshold_beta_1: Option<f64>,
}

fn basin_sweep(out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let game = Game::stag_hunt();
    let seeds = opts.seeds.unwrap_or(100);
    let episodes = opts.episodes.unwrap_or(400);
    let estimate = |beta: f64| -> anyhow::Result<ThresholdEstimate<f64>> {
        let agent = AgentConfig {
            beta,
            ema_alpha: 0.5,
            learning_rate: 0.1,
            baseline_window: 50,
            ..AgentConfig::default()
        };
        let sweep = ThresholdSweep {
            master_seed: opts.master_seed,
            ..ThresholdSweep::stationary(game.clone(), agent, 0.02, seeds, episodes)
        };
        Ok(mc_threshold_estimate(&sweep)?)
    };
    let e0 = estimate(0.0)?;
    let e1 = estimate(1.0)?;
    let mut rows = Vec::new();
    for e in [&e0, &e1] {
        for (k, &q) in e.grid.iter().enumerate() {
            rows.push(ThresholdRow {
                beta: e.beta,
                q,
                seeds,
                retained_fraction: e.retained_fraction[k],
                threshold_estimate: e.threshold,
                band_lo: e.band.map(|b| b.0),
                band_hi: e.band.map(|b| b.1),
            });
        }
    }
    write_rows(&out.join("thresholds.csv"), &rows)?;
    let per_seed: Vec<SeedThresholdRow> = (0..seeds)
        .map(|s| SeedThresholdRow {
            seed: s,
            threshold_beta_0: e0.per_seed[s],
            threshold_beta_1: e1.per_seed[s],
        })
        .collect();
    write_rows(&out.join("thresholds_per_seed.csv"), &per_seed)?;

    let show = |t: Option<f64>| t.map_or("none".to_string(), |v| format!("{v:.2}"));
    let band = |e: &ThresholdEstimate<f64>| {
        e.band.map_or("no bootstrap band".to_string(), |(a, b)| {
            format!("95% band [{a:.2}, {b:.2}]")
        })
    };
    let test = paired_threshold_test(&e1.per_seed, &e0.per_seed);
    let predicted = game.predicted_basin_threshold(1.0)?;
    let t0 = e0.threshold;
    let t1 = e1.threshold;
    let mut checks = vec![
        Check::new(
            "threshold beta=1 below beta=0",
            matches!((t1, t0), (Some(a), Some(b)) if a < b),
            format!("{} < {}", show(t1), show(t0)),
        )
        .note(format!("beta=1 {}; beta=0 {}", band(&e1), band(&e0))),
        Check::new(
            "paired sign test beta=1 lower",
            test.p_greater < 0.05,
            format!("p = {:.3e}", test.p_greater),
        )
        .tol("p < 0.05 (one-sided)")
        .note(format!(
            "{} seeds lower, {} higher, {} tied",
            test.wins, test.losses, test.ties
        )),
        Check::new(
            "threshold beta=0 near p*",
            t0.is_some_and(|t| (t - 0.70).abs() <= 0.05 + 1e-12),
            show(t0),
        )
        .reference("0.70")
        .tol("+-0.05"),
        Check::info("threshold beta=1 vs first-order prediction", show(t1)).reference(format!("{predicted:.3}")),
    ];
    if e0.non_monotone || e1.non_monotone {
        checks.push(Check::info(
            "majority retention non-monotone in q",
            format!("beta=0 {}, beta=1 {}", e0.non_monotone, e1.non_monotone),
        ));
    }
    Ok(checks)
}

#[derive(Serialize)]
struct BetaStarRow {
    case: usize,
    cw: f64,
    epsilon: f64,
    c_eff: f64,
    horizon_t: usize,
    beta_star: f64,
    grid_argmin: f64,
    fd_derivative: f64,
}

fn beta_star_check(out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.master_seed);
    let step = 1e-3;
    let h = 1e-5;
    let mut rows = Vec::new();
    while rows.len() < 50 {
        let cw = rng.random_range(0.5..10.0);
        let epsilon = rng.random_range(0.05..1.0);
        let c_eff = rng.random_range(0.5..5.0);
        let horizon_t = rng.random_range(100..10_000usize);
        if cw * epsilon * horizon_t as f64 / c_eff <= std::f64::consts::E {
            continue;
        }
        let p = TradeoffParams::new(cw, epsilon, c_eff, horizon_t)?;
        let b = beta_star(&p);
        let cells = ((2.0 * b + 1.0) / step).ceil() as usize;
        let grid_argmin = (0..=cells)
            .map(|k| k as f64 * step)
            .map(|x| (x, loss_bound(&p, x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(x, _)| x)
            .expect("non-empty grid");
        let fd = (loss_bound(&p, b + h) - loss_bound(&p, b - h)) / (2.0 * h);
        rows.push(BetaStarRow {
            case: rows.len(),
            cw,
            epsilon,
            c_eff,
            horizon_t,
            beta_star: b,
            grid_argmin,
            fd_derivative: fd,
        });
    }
    write_rows(&out.join("beta_star.csv"), &rows)?;
    let worst_gap = rows
        .iter()
        .map(|r| (r.grid_argmin - r.beta_star).abs())
        .fold(0.0, f64::max);
    let worst_fd = rows.iter().map(|r| r.fd_derivative.abs()).fold(0.0, f64::max);
    Ok(vec![
        Check::new(
            "closed form vs grid argmin",
            worst_gap <= 1e-3,
            format!("max gap {worst_gap:.2e}"),
        )
        .tol("<= 1e-3")
        .note(format!("{} parameter sets, grid step {step}", rows.len())),
        Check::new(
            "derivative at beta*",
            worst_fd < 1e-6,
            format!("max |dL/dbeta| {worst_fd:.2e}"),
        )
        .tol("< 1e-6")
        .note(format!("central difference, h = {h}")),
    ])
}

#[derive(Serialize)]
struct SyntheticRow {
    stream: String,
    steps: usize,
    drops: usize,
    clamp_violations: usize,
    non_increases_on_drop: usize,
    overshoots: usize,
}

/// Drive the controller with welfare streams designed to push it against its clamps.
fn synthetic_beta_streams(rng: &mut ChaCha8Rng) -> anyhow::Result<Vec<SyntheticRow>> {
    let steps = 500;
    let kinds = ["uniform", "spikes", "falling", "random_walk", "tiny_steps"];
    let mut rows = Vec::new();
    for kind in kinds {
        for rep in 0..20 {
            let beta_min = rng.random_range(-3.9..0.0);
            let beta_max = rng.random_range(0.5..20.0);
            let beta_star = rng.random_range(beta_min..beta_max);
            let eta = rng.random_range(0.01..5.0);
            let mut s = BetaState::new(beta_star, beta_star, eta, beta_min, beta_max)?;
            let mut level = 0.0;
            let mut row = SyntheticRow {
                stream: format!("{kind}_{rep}"),
                steps,
                drops: 0,
                clamp_violations: 0,
                non_increases_on_drop: 0,
                overshoots: 0,
            };
            for t in 0..steps {
                let sw: f64 = match kind {
                    "uniform" => rng.random_range(-100.0..100.0),
                    "spikes" => {
                        if t % 2 == 0 {
                            1e6
                        } else {
                            -1e6
                        }
                    }
                    "falling" => -(t as f64) * rng.random_range(0.0..3.0),
                    "random_walk" => {
                        level += rng.random_range(-1.0..1.0);
                        level
                    }
                    _ => {
                        level -= 1e-3;
                        level
                    }
                };
                let prev = s;
                s = s.adaptive_beta_step(sw);
                if !(s.beta >= beta_min && s.beta <= beta_max) {
                    row.clamp_violations += 1;
                }
                if s.beta > beta_max {
                    row.overshoots += 1;
                }
                if sw < prev.sw_prev {
                    row.drops += 1;
                    if prev.beta < beta_max && s.beta <= prev.beta {
                        row.non_increases_on_drop += 1;
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct RetentionRow {
    seed: usize,
    adaptive_retained: bool,
    fixed_retained: bool,
}

fn adaptive_beta_demo(out: &Path, opts: &PresetOptions) -> anyhow::Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.master_seed);
    let synth = synthetic_beta_streams(&mut rng)?;
    write_rows(&out.join("beta_synthetic.csv"), &synth)?;
    let sum = |f: fn(&SyntheticRow) -> usize| synth.iter().map(f).sum::<usize>();
    let (clamp, nonincr, over, drops) = (
        sum(|r| r.clamp_violations),
        sum(|r| r.non_increases_on_drop),
        sum(|r| r.overshoots),
        sum(|r| r.drops),
    );
    let mut checks = vec![
        Check::new("beta within clamps", clamp == 0, format!("{clamp} violations"))
            .note(format!("{} synthetic streams", synth.len())),
        Check::new(
            "beta rises on welfare drops",
            nonincr == 0,
            format!("{nonincr} of {drops} drops"),
        )
        .note("steps already at the upper clamp excluded"),
        Check::new("beta never above upper clamp", over == 0, format!("{over} overshoots")),
    ];

    let switch_at = 10;
    let partner = PartnerSpec {
        kind: PartnerKind::Explorer,
        q_nominal: 0.95,
        delta: 0.0,
        noise_sigma: 0.0,
        switches: vec![Switch {
            episode: switch_at,
            q_nominal: None,
            delta: Some(0.4),
        }],
        ..PartnerSpec::default()
    };
    let make = |agent: AgentConfig<f64>| ExperimentConfig {
        game: GameSpec::named("stag_hunt"),
        agent,
        partner: partner.clone(),
        run: RunSpec {
            retention_start: switch_at,
            ..opts.run("adaptive_beta_demo", 410, 50)
        },
    };
    let fams = run_families(
        out,
        vec![
            ("adaptive".into(), make(demo_agent(BetaModeKind::Adaptive, 1.0))),
            ("beta_0".into(), make(demo_agent(BetaModeKind::Fixed, 0.0))),
        ],
    )?;
    if opts.plots {
        plot_families(out, &fams, &[PlotKind::Trajectory])?;
    }
    let (ad, fx) = (&fams[0], &fams[1]);
    let paired: Vec<RetentionRow> = ad
        .runs
        .iter()
        .zip(&fx.runs)
        .map(|(a, f)| RetentionRow {
            seed: a.seed,
            adaptive_retained: a.summary.retention.retained(),
            fixed_retained: f.summary.retention.retained(),
        })
        .collect();
    write_rows(&out.join("retention_paired.csv"), &paired)?;
    let wins = paired
        .iter()
        .filter(|r| r.adaptive_retained && !r.fixed_retained)
        .count() as u64;
    let losses = paired
        .iter()
        .filter(|r| !r.adaptive_retained && r.fixed_retained)
        .count() as u64;
    let test = sign_test(wins, losses, paired.len() as u64 - wins - losses);
    let (ra, rf) = (ad.retention_rate(), fx.retention_rate());
    checks.push(
        Check::new(
            "retention adaptive >= fixed beta=0",
            ra >= rf,
            format!("{ra:.2} vs {rf:.2}"),
        )
        .note(format!("p >= p* on every episode from the switch at t = {switch_at}")),
    );
    checks.push(
        Check::new(
            "retention sign test",
            test.p_greater < 0.05,
            format!("p = {:.3e}", test.p_greater),
        )
        .tol("p < 0.05 (one-sided)")
        .note(format!("{wins} seeds only adaptive retains, {losses} only fixed")),
    );
    Ok(checks)
}
