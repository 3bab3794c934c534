//! SVG plots plus the CSV each one is drawn from.

use std::path::Path;

use anyhow::bail;
use paranoia_core::sim::{final_window, RunResult};
use paranoia_core::Game;
use plotters::prelude::*;
use serde::Serialize;

use crate::runner::write_rows;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Trajectory,
    OutcomeSpace,
    Pareto,
}

/// A labelled set of runs sharing one configuration.
pub struct Group<'a> {
    pub label: String,
    pub runs: &'a [RunResult<f64>],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub label: String,
    pub t: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Per-episode mean of `p` across seeds with the min/max envelope.
pub fn trajectory_band(label: &str, runs: &[RunResult<f64>]) -> Vec<BandRow> {
    let len = runs.iter().map(|r| r.log.len()).min().unwrap_or(0);
    (0..len)
        .map(|t| {
            let ps = runs.iter().map(|r| r.log[t].p);
            let (lo, hi, sum) = ps.fold((f64::INFINITY, f64::NEG_INFINITY, 0.0), |(lo, hi, s), p| {
                (lo.min(p), hi.max(p), s + p)
            });
            BandRow {
                label: label.into(),
                t,
                mean: sum / runs.len() as f64,
                lo,
                hi,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub label: String,
    pub kind: String,
    pub x: f64,
    pub y: f64,
}

/// Average payoff pair over the final window of every run.
pub fn outcome_point(runs: &[RunResult<f64>], game: &Game) -> (f64, f64) {
    let (mut x, mut y, mut n) = (0.0, 0.0, 0usize);
    for r in runs {
        let w = final_window(r.log.len());
        for e in &r.log[r.log.len() - w..] {
            x += game.payoff(e.a_i, e.a_j);
            y += game.payoff(e.a_j, e.a_i);
            n += 1;
        }
    }
    (x / n as f64, y / n as f64)
}

/// Reference points: the bargaining solution (mutual Stag), the risk-dominant
/// equilibrium and the mixed equilibrium at `(p*, p*)`, as payoff pairs.
pub fn reference_points(game: &Game) -> Vec<OutcomeRow> {
    let p = game.critical_threshold();
    let mixed = game.expected_payoff(p, p);
    vec![
        OutcomeRow {
            label: "reference".into(),
            kind: "nbs".into(),
            x: game.r_c(),
            y: game.r_c(),
        },
        OutcomeRow {
            label: "reference".into(),
            kind: "risk_dominant_ne".into(),
            x: game.r_h(),
            y: game.r_h(),
        },
        OutcomeRow {
            label: "reference".into(),
            kind: "mixed_ne".into(),
            x: mixed,
            y: mixed,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoRow {
    pub label: String,
    pub seed: usize,
    pub final_cooperation: f64,
    pub reward_std: f64,
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn span(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let d = ((hi - lo) * pad).max(0.5);
    (lo - d, hi + d)
}

/// Write `<stem>.csv` and `<stem>.svg` into `dir`.
pub fn emit_plots(dir: &Path, stem: &str, kind: PlotKind, groups: &[Group<'_>], game: &Game) -> anyhow::Result<()> {
    if groups.is_empty() || groups.iter().any(|g| g.runs.is_empty()) {
        bail!("nothing to plot");
    }
    std::fs::create_dir_all(dir)?;
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    match kind {
        PlotKind::Trajectory => {
            let bands: Vec<Vec<BandRow>> = groups.iter().map(|g| trajectory_band(&g.label, g.runs)).collect();
            write_rows(&csv, &bands.concat())?;
            draw_trajectory(&svg, &bands)
        }
        PlotKind::OutcomeSpace => {
            let mut rows = reference_points(game);
            for g in groups {
                let (x, y) = outcome_point(g.runs, game);
                rows.push(OutcomeRow {
                    label: g.label.clone(),
                    kind: "achieved".into(),
                    x,
                    y,
                });
            }
            write_rows(&csv, &rows)?;
            draw_outcomes(&svg, &rows, game)
        }
        PlotKind::Pareto => {
            let rows: Vec<ParetoRow> = groups
                .iter()
                .flat_map(|g| {
                    g.runs.iter().map(|r| ParetoRow {
                        label: g.label.clone(),
                        seed: r.seed,
                        final_cooperation: r.summary.final_cooperation,
                        reward_std: r.summary.reward_std,
                    })
                })
                .collect();
            write_rows(&csv, &rows)?;
            draw_pareto(&svg, &rows)
        }
    }
}

fn draw_trajectory(path: &Path, bands: &[Vec<BandRow>]) -> anyhow::Result<()> {
    let t_max = bands.iter().map(Vec::len).max().unwrap_or(1).max(2) - 1;
    let root = SVGBackend::new(path, (900, 520)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Cooperation probability", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0f64..t_max as f64, 0f64..1f64)?;
    chart.configure_mesh().x_desc("episode").y_desc("P(Stag)").draw()?;
    for (i, band) in bands.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let mut poly: Vec<(f64, f64)> = band.iter().map(|r| (r.t as f64, r.hi)).collect();
        poly.extend(band.iter().rev().map(|r| (r.t as f64, r.lo)));
        chart.draw_series(std::iter::once(Polygon::new(poly, c.mix(0.15).filled())))?;
        chart
            .draw_series(LineSeries::new(
                band.iter().map(|r| (r.t as f64, r.mean)),
                c.stroke_width(2),
            ))?
            .label(band.first().map(|r| r.label.clone()).unwrap_or_default())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

fn draw_outcomes(path: &Path, rows: &[OutcomeRow], game: &Game) -> anyhow::Result<()> {
    let (lo, hi) = span(
        rows.iter().flat_map(|r| [r.x, r.y]).chain([game.r_s(), game.r_c()]),
        0.05,
    );
    let root = SVGBackend::new(path, (640, 640)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Outcome space", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(lo..hi, lo..hi)?;
    chart
        .configure_mesh()
        .x_desc("agent payoff")
        .y_desc("partner payoff")
        .draw()?;
    // feasible set: convex hull of the four pure outcomes
    let hull = vec![
        (game.r_h(), game.r_h()),
        (game.r_s(), game.r_h()),
        (game.r_c(), game.r_c()),
        (game.r_h(), game.r_s()),
    ];
    chart.draw_series(std::iter::once(Polygon::new(hull, BLACK.mix(0.06).filled())))?;
    for (i, r) in rows.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let label = if r.kind == "achieved" {
            r.label.clone()
        } else {
            r.kind.clone()
        };
        match r.kind.as_str() {
            "nbs" => chart
                .draw_series(std::iter::once(TriangleMarker::new((r.x, r.y), 9, c.filled())))?
                .label(label)
                .legend(move |(x, y)| TriangleMarker::new((x + 8, y), 6, c.filled())),
            "risk_dominant_ne" => chart
                .draw_series(std::iter::once(Cross::new((r.x, r.y), 8, c.stroke_width(2))))?
                .label(label)
                .legend(move |(x, y)| Cross::new((x + 8, y), 5, c.stroke_width(2))),
            "mixed_ne" => chart
                .draw_series(std::iter::once(Circle::new((r.x, r.y), 9, c.stroke_width(2))))?
                .label(label)
                .legend(move |(x, y)| Circle::new((x + 8, y), 5, c.stroke_width(2))),
            _ => chart
                .draw_series(std::iter::once(Circle::new((r.x, r.y), 5, c.filled())))?
                .label(label)
                .legend(move |(x, y)| Circle::new((x + 8, y), 4, c.filled())),
        };
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

fn draw_pareto(path: &Path, rows: &[ParetoRow]) -> anyhow::Result<()> {
    let (s_lo, s_hi) = span(rows.iter().map(|r| r.reward_std), 0.05);
    let root = SVGBackend::new(path, (760, 560)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Cooperation vs reward variability", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(s_lo.max(0.0)..s_hi, -0.02f64..1.02f64)?;
    chart
        .configure_mesh()
        .x_desc("reward std (final window)")
        .y_desc("final cooperation")
        .draw()?;
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    for (i, label) in labels.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(
                rows.iter()
                    .filter(|r| r.label == *label)
                    .map(|r| Circle::new((r.reward_std, r.final_cooperation), 4, c.filled())),
            )?
            .label(*label)
            .legend(move |(x, y)| Circle::new((x + 8, y), 4, c.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use paranoia_core::learning::EpisodeLog;
    use paranoia_core::sim::summarize;
    use paranoia_core::Action;

    fn constant_run(game: &Game, a: Action, seed: usize) -> RunResult<f64> {
        let log: Vec<EpisodeLog<f64>> = (0..20)
            .map(|t| EpisodeLog {
                t,
                a_i: a,
                a_j: a,
                r_i: game.payoff(a, a),
                p: if a.is_stag() { 0.95 } else { 0.05 },
                q_true: None,
                p_hat: 0.5,
                sigma2: 0.25,
                beta: 0.0,
                tau: 1.0,
                sw_proxy: 2.0 * game.payoff(a, a),
            })
            .collect();
        let summary = summarize(&log, game, 0).unwrap();
        RunResult { seed, log, summary }
    }

    #[test]
    fn all_hare_lands_on_risk_dominant_point() {
        let g = Game::stag_hunt();
        let runs = [constant_run(&g, Action::Hare, 0)];
        assert_eq!(outcome_point(&runs, &g), (2.0, 2.0));
    }

    /// Maximize the Nash product over mixtures of the four pure outcomes with
    /// disagreement point (r_h, r_h).
    fn nash_bargaining_oracle(g: &Game) -> (f64, f64) {
        let pts = [
            (g.r_c(), g.r_c()),
            (g.r_s(), g.r_h()),
            (g.r_h(), g.r_s()),
            (g.r_h(), g.r_h()),
        ];
        let d = g.r_h();
        let n = 60;
        let mut best = (f64::NEG_INFINITY, (d, d));
        for i in 0..=n {
            for j in 0..=(n - i) {
                for k in 0..=(n - i - j) {
                    let w = [i, j, k, n - i - j - k].map(|v| v as f64 / n as f64);
                    let x: f64 = w.iter().zip(&pts).map(|(w, p)| w * p.0).sum();
                    let y: f64 = w.iter().zip(&pts).map(|(w, p)| w * p.1).sum();
                    if x >= d && y >= d && (x - d) * (y - d) > best.0 {
                        best = ((x - d) * (y - d), (x, y));
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn all_stag_lands_on_bargaining_solution() {
        let g = Game::stag_hunt();
        let runs = [constant_run(&g, Action::Stag, 0), constant_run(&g, Action::Stag, 1)];
        let achieved = outcome_point(&runs, &g);
        assert_eq!(achieved, (5.0, 5.0));
        let nbs = nash_bargaining_oracle(&g);
        assert_eq!(nbs, (5.0, 5.0));
        let refs = reference_points(&g);
        assert_eq!((refs[0].x, refs[0].y), nbs);
        // mixed equilibrium pays r_h to both players
        assert!((refs[2].x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_seed_band_is_the_line() {
        let g = Game::stag_hunt();
        let runs = [constant_run(&g, Action::Stag, 0)];
        for row in trajectory_band("x", &runs) {
            assert_eq!(row.lo, row.mean);
            assert_eq!(row.hi, row.mean);
        }
    }

    #[test]
    fn writes_all_kinds() {
        let g = Game::stag_hunt();
        let a = [constant_run(&g, Action::Stag, 0), constant_run(&g, Action::Hare, 1)];
        let dir = tempfile::tempdir().unwrap();
        for (stem, kind) in [
            ("traj", PlotKind::Trajectory),
            ("outcome", PlotKind::OutcomeSpace),
            ("pareto", PlotKind::Pareto),
        ] {
            emit_plots(
                dir.path(),
                stem,
                kind,
                &[Group {
                    label: "a".into(),
                    runs: &a,
                }],
                &g,
            )
            .unwrap();
            assert!(dir.path().join(format!("{stem}.svg")).is_file());
            assert!(dir.path().join(format!("{stem}.csv")).is_file());
        }
        assert!(emit_plots(dir.path(), "x", PlotKind::Pareto, &[], &g).is_err());
    }
}
