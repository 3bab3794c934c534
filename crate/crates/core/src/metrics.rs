//! Welfare metrics: cooperation efficiency, the dynamic and empirical
//! paranoia/anarchy ratios, the adaptive-robustness loss bound and its minimizer.

use crate::error::{invalid, Error, Result};
use crate::game::CoordinationGame;
use crate::scalar::Scalar;
use crate::sim::RunResult;

/// Position of `sw` between maximin and optimal welfare, clamped to `[0, 1]`.
pub fn cooperation_efficiency<T: Scalar>(game: &CoordinationGame<T>, sw: T) -> T {
    let a = game.analytics();
    ((sw - a.w_mm) / (a.w_star - a.w_mm)).clamp01()
}

/// `1 + eta * (pop_gt - 1)`.
pub fn pop_dyn<T: Scalar>(game: &CoordinationGame<T>, eta: T) -> Result<T> {
    let pop_gt = game.analytics().pop_gt()?;
    Ok(T::one() + eta * (pop_gt - T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareSnapshot<T> {
    pub sw: T,
    /// Partner's Stag frequency over the window.
    pub q_bar: T,
    pub eta: T,
    pub pop_dyn: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopPoa<T> {
    pub pop: T,
    pub poa: T,
    pub sw: T,
    /// The PoA denominator hit the floor.
    pub floored: bool,
}

pub const DEFAULT_POA_FLOOR: f64 = 1e-6;

fn tail<T>(run: &RunResult<T>, window: usize) -> Result<&[crate::learning::EpisodeLog<T>]> {
    if window == 0 || window > run.log.len() {
        return Err(invalid(
            "window",
            format!("{window} does not fit a run of {} episodes", run.log.len()),
        ));
    }
    Ok(&run.log[run.log.len() - window..])
}

pub fn welfare_snapshot<T: Scalar>(
    run: &RunResult<T>,
    game: &CoordinationGame<T>,
    window: usize,
) -> Result<WelfareSnapshot<T>> {
    let rows = tail(run, window)?;
    let n = T::from_count(window);
    let sw = rows
        .iter()
        .fold(T::zero(), |a, e| a + game.realized_welfare(e.a_i, e.a_j))
        / n;
    let q_bar = T::from_count(rows.iter().filter(|e| e.a_j.is_stag()).count()) / n;
    let eta = cooperation_efficiency(game, sw);
    Ok(WelfareSnapshot {
        sw,
        q_bar,
        eta,
        pop_dyn: pop_dyn(game, eta)?,
    })
}

/// PoP and PoA of a run from its mean realized welfare over the final `window` episodes.
///
/// `floor` is a fraction of `W*`; the PoA denominator never drops below `floor * W*`.
pub fn empirical_pop_poa<T: Scalar>(
    run: &RunResult<T>,
    game: &CoordinationGame<T>,
    window: usize,
    floor: T,
) -> Result<PopPoa<T>> {
    if !(floor > T::zero()) {
        return Err(invalid("floor", "must be positive"));
    }
    let snap = welfare_snapshot(run, game, window)?;
    let w_star = game.analytics().w_star;
    let min_sw = floor * w_star;
    Ok(PopPoa {
        pop: snap.pop_dyn,
        poa: w_star / snap.sw.max(min_sw),
        sw: snap.sw,
        floored: snap.sw < min_sw,
    })
}

/// Inputs of the adaptive-robustness trade-off bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffParams<T> {
    pub cw: T,
    pub epsilon: T,
    /// `c * |A_j|`.
    pub c_eff: T,
    pub horizon_t: usize,
}

impl<T: Scalar> TradeoffParams<T> {
    pub fn new(cw: T, epsilon: T, c_eff: T, horizon_t: usize) -> Result<Self> {
        if !(cw > T::zero()) {
            return Err(invalid("cw", "must be positive"));
        }
        if !(epsilon >= T::zero()) {
            return Err(invalid("epsilon", "must be non-negative"));
        }
        if !(c_eff > T::zero()) {
            return Err(invalid("c_eff", "must be positive"));
        }
        if horizon_t == 0 {
            return Err(invalid("horizon_t", "must be positive"));
        }
        Ok(Self {
            cw,
            epsilon,
            c_eff,
            horizon_t,
        })
    }

    fn overhead(&self, beta: T) -> T {
        self.c_eff * beta.exp() / T::from_count(self.horizon_t)
    }
}

/// `cw * exp(-beta * eps) + c_eff * exp(beta) / T`.
pub fn loss_bound<T: Scalar>(params: &TradeoffParams<T>, beta: T) -> T {
    params.cw * (-beta * params.epsilon).exp() + params.overhead(beta)
}

/// Variant with the adaptation term written as `cw * (1 - exp(-beta * eps))`.
/// It increases in beta, so its minimizer is the smallest admissible beta.
pub fn loss_bound_printed<T: Scalar>(params: &TradeoffParams<T>, beta: T) -> T {
    params.cw * (T::one() - (-beta * params.epsilon).exp()) + params.overhead(beta)
}

/// `log(cw * eps * T / c_eff) / (1 + eps)`, clamped at zero.
pub fn beta_star<T: Scalar>(params: &TradeoffParams<T>) -> T {
    let ratio = params.cw * params.epsilon * T::from_count(params.horizon_t) / params.c_eff;
    if ratio <= T::one() {
        return T::zero();
    }
    ratio.ln() / (T::one() + params.epsilon)
}

fn median<T: Scalar>(mut xs: Vec<T>) -> T {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) * T::lit(0.5)
    }
}

/// Median episodes-to-criterion, counting runs that never reach it as infinite.
pub fn median_episodes_to_criterion<T: Scalar>(runs: &[RunResult<T>]) -> Option<T> {
    if runs.is_empty() {
        return None;
    }
    let xs: Vec<T> = runs
        .iter()
        .map(|r| r.summary.episodes_to_criterion.map_or(T::infinity(), T::from_count))
        .collect();
    let m = median(xs);
    m.is_finite().then_some(m)
}

/// Ratio of median episodes-to-criterion, robust over standard.
pub fn pop_alg_measure<T: Scalar>(robust: &[RunResult<T>], standard: &[RunResult<T>]) -> Result<T> {
    let r = median_episodes_to_criterion(robust).ok_or_else(|| Error::CriterionUnreachable("robust agent".into()))?;
    let s =
        median_episodes_to_criterion(standard).ok_or_else(|| Error::CriterionUnreachable("standard agent".into()))?;
    if s == T::zero() {
        return if r == T::zero() {
            Ok(T::one())
        } else {
            Err(invalid(
                "standard",
                "reached the criterion at episode 0; ratio undefined",
            ))
        };
    }
    Ok(r / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Action;
    use crate::learning::EpisodeLog;
    use crate::sim::summarize;
    use approx::assert_abs_diff_eq;

    fn g() -> CoordinationGame<f64> {
        CoordinationGame::stag_hunt()
    }

    pub(crate) fn scripted(actions: &[(Action, Action)], game: &CoordinationGame<f64>) -> RunResult<f64> {
        let log: Vec<EpisodeLog<f64>> = actions
            .iter()
            .enumerate()
            .map(|(t, &(a, b))| EpisodeLog {
                t,
                a_i: a,
                a_j: b,
                r_i: game.payoff(a, b),
                p: if a.is_stag() { 0.99 } else { 0.01 },
                q_true: None,
                p_hat: 0.5,
                sigma2: 0.25,
                beta: 0.0,
                tau: 1.0,
                sw_proxy: 2.0 * game.payoff(a, b),
            })
            .collect();
        let summary = summarize(&log, game, 0).unwrap();
        RunResult { seed: 0, log, summary }
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(cooperation_efficiency(&g(), 10.0), 1.0);
        assert_eq!(cooperation_efficiency(&g(), 4.0), 0.0);
        assert_abs_diff_eq!(cooperation_efficiency(&g(), 7.0), 0.5, epsilon = 1e-15);
        assert_eq!(cooperation_efficiency(&g(), -3.0), 0.0);
    }

    #[test]
    fn pop_dyn_examples() {
        assert_eq!(pop_dyn(&g(), 0.0).unwrap(), 1.0);
        assert_eq!(pop_dyn(&g(), 1.0).unwrap(), 2.5);
        assert_abs_diff_eq!(pop_dyn(&g(), 0.5).unwrap(), 1.75, epsilon = 1e-15);
        let neg = CoordinationGame::new("neg", 1.0, -1.0, -2.0).unwrap();
        assert!(matches!(pop_dyn(&neg, 0.5), Err(Error::RatioUndefined(_))));
    }

    #[test]
    fn pop_poa_endpoints() {
        let stag = scripted(&[(Action::Stag, Action::Stag); 40], &g());
        let m = empirical_pop_poa(&stag, &g(), 10, DEFAULT_POA_FLOOR).unwrap();
        assert_eq!((m.pop, m.poa, m.floored), (2.5, 1.0, false));
        let hare = scripted(&[(Action::Hare, Action::Hare); 40], &g());
        let m = empirical_pop_poa(&hare, &g(), 10, DEFAULT_POA_FLOOR).unwrap();
        assert_eq!((m.pop, m.poa), (1.0, 2.5));
        assert!(empirical_pop_poa(&hare, &g(), 41, DEFAULT_POA_FLOOR).is_err());
    }

    #[test]
    fn poa_floor_flags_catastrophic_runs() {
        let bad = scripted(&[(Action::Stag, Action::Hare); 10], &g());
        let m = empirical_pop_poa(&bad, &g(), 10, DEFAULT_POA_FLOOR).unwrap();
        assert!(m.floored);
        assert_abs_diff_eq!(m.poa, 1e6, epsilon = 1e-3);
        assert_eq!(m.pop, 1.0);
    }

    #[test]
    fn loss_bound_examples() {
        let p = TradeoffParams::new(6.0, 0.0, 1.0, 3000).unwrap();
        assert_abs_diff_eq!(loss_bound(&p, 0.0), 6.0 + 1.0 / 3000.0, epsilon = 1e-15);
        assert!(loss_bound(&p, -1.0) < loss_bound(&p, 0.0));
        assert_eq!(beta_star(&p), 0.0);
        let p = TradeoffParams::new(6.0, 0.1, 1.0, 3000).unwrap();
        assert_abs_diff_eq!(beta_star(&p), 1800f64.ln() / 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(beta_star(&p), 6.8141, epsilon = 5e-5);
        assert!(loss_bound_printed(&p, 0.0) < loss_bound_printed(&p, beta_star(&p)));
    }

    #[test]
    fn beta_star_grid_argmin() {
        let p = TradeoffParams::new(6.0, 0.1, 1.0, 3000).unwrap();
        let (mut arg, mut best) = (0.0, f64::INFINITY);
        for k in 0..=20_000 {
            let b = k as f64 * 1e-3;
            let v = loss_bound(&p, b);
            if v < best {
                best = v;
                arg = b;
            }
        }
        assert!((arg - beta_star(&p)).abs() <= 1e-3);
    }

    #[test]
    fn beta_star_degenerate_and_limit() {
        let p = TradeoffParams::new(2.0, 0.5, 3.0, 3).unwrap();
        assert_eq!(beta_star(&p), 0.0);
        let p = TradeoffParams::new(1.0, 1e-9, 1.0, 1).unwrap();
        let fixed = TradeoffParams { cw: 5.0 / (1e-9), ..p };
        assert_abs_diff_eq!(beta_star(&fixed), 5f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn pop_alg_ratios() {
        let delayed = |k: usize| {
            scripted(
                &[
                    vec![(Action::Hare, Action::Hare); k],
                    vec![(Action::Stag, Action::Stag); 60],
                ]
                .concat(),
                &g(),
            )
        };
        let fast = delayed(5);
        let mut slow = delayed(10);
        assert_eq!(
            pop_alg_measure(std::slice::from_ref(&fast), std::slice::from_ref(&fast)).unwrap(),
            1.0
        );
        assert_eq!(slow.summary.episodes_to_criterion, Some(10));
        assert_eq!(
            pop_alg_measure(std::slice::from_ref(&slow), std::slice::from_ref(&fast)).unwrap(),
            2.0
        );
        slow.summary.episodes_to_criterion = None;
        assert!(pop_alg_measure(&[slow], &[fast]).is_err());
    }
}
