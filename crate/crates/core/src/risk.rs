//! Risk measures on discrete return distributions, plus the variance
//! quantities that drive trust dampening.

use crate::error::{invalid, Error, Result};
use crate::game::{check_prob, CoordinationGame};
use crate::scalar::Scalar;

/// Finite-support distribution of a return `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<T> {
    outcomes: Vec<(T, T)>,
}

impl<T: Scalar> DiscreteDistribution<T> {
    /// `outcomes` are `(value, probability)` pairs.
    pub fn new(outcomes: Vec<(T, T)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        let mut total = T::zero();
        for &(x, p) in &outcomes {
            if !x.is_finite() || !p.is_finite() || p < T::zero() {
                return Err(Error::InvalidDistribution(format!("bad atom ({x}, {p})")));
            }
            total = total + p;
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::from_count(4 * outcomes.len()));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { outcomes })
    }

    pub fn point(x: T) -> Self {
        Self {
            outcomes: vec![(x, T::one())],
        }
    }

    pub fn outcomes(&self) -> &[(T, T)] {
        &self.outcomes
    }

    pub fn mean(&self) -> T {
        self.outcomes.iter().fold(T::zero(), |acc, &(x, p)| acc + x * p)
    }

    /// Essential supremum of the loss `-X`.
    pub fn worst_loss(&self) -> T {
        self.outcomes
            .iter()
            .filter(|&&(_, p)| p > T::zero())
            .map(|&(x, _)| -x)
            .fold(T::neg_infinity(), T::max)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            outcomes: self.outcomes.iter().map(|&(x, p)| (f(x), p)).collect(),
        }
    }
}

// Search bounds for z times the spread of the loss.
const EVAR_Z_MIN: f64 = 1e-8;
const EVAR_Z_MAX: f64 = 1e8;
const EVAR_TOL: f64 = 1e-10;
const EVAR_MAX_ITERS: usize = 500;

/// Entropic value-at-risk of `X` at confidence `beta`:
/// `inf_{z>0} (1/z) log(E[exp(-zX)] / (1 - beta))`.
pub fn evar_discrete<T: Scalar>(dist: &DiscreteDistribution<T>, beta: T) -> Result<T> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(invalid("beta", format!("{beta} is outside (0, 1)")));
    }
    // Work with the loss Y = -X and centre it on its mean so that small z does
    // not lose precision to cancellation.
    let atoms: Vec<(T, T)> = dist
        .outcomes
        .iter()
        .filter(|&&(_, p)| p > T::zero())
        .map(|&(x, p)| (-x, p))
        .collect();
    let mean = atoms.iter().fold(T::zero(), |a, &(y, p)| a + y * p);
    let sup = atoms.iter().fold(T::neg_infinity(), |a, &(y, _)| a.max(y));
    let mass_at_sup = atoms
        .iter()
        .filter(|&&(y, _)| y == sup)
        .fold(T::zero(), |a, &(_, p)| a + p);
    let radius = -(-beta).ln_1p();

    // Once the KL ball contains the point mass on the worst atom the
    // supremum is attained.
    if radius >= -mass_at_sup.ln() {
        return Ok(sup);
    }

    let objective = |u: T| {
        let z = u.exp();
        let shifted = atoms.iter().map(|&(y, p)| (z * (y - mean), p));
        let m = shifted.clone().fold(T::neg_infinity(), |a, (s, _)| a.max(s));
        let cgf = if m < T::lit(0.5) {
            shifted.fold(T::zero(), |a, (s, p)| a + p * s.exp_m1()).ln_1p()
        } else {
            m + shifted.fold(T::zero(), |a, (s, p)| a + p * (s - m).exp()).ln()
        };
        mean + (cgf + radius) / z
    };

    // The minimizer scales like sqrt(2 * radius) / spread as the level goes to
    // zero, so the lower bound has to follow the radius.
    let spread = atoms.iter().fold(T::zero(), |a, &(y, _)| a.max((y - mean).abs()));
    let w_min = T::lit(EVAR_Z_MIN)
        .min(T::lit(0.1) * (T::lit(2.0) * radius).sqrt())
        .max(T::min_positive_value());
    let value = golden_section_min(
        objective,
        (w_min / spread).ln(),
        (T::lit(EVAR_Z_MAX) / spread).ln(),
        T::lit(EVAR_TOL),
    )?;
    Ok(value.max(mean).min(sup))
}

fn golden_section_min<T: Scalar>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> Result<T> {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = fc.min(fd).min(f(a)).min(f(b));
    for _ in 0..EVAR_MAX_ITERS {
        if (b - a).abs() <= tol {
            return Ok(best.min(f(T::lit(0.5) * (a + b))));
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        best = best.min(fc).min(fd);
        // f32 cannot resolve the interval down to 1e-10; stop once it stops shrinking
        if c >= d {
            return Ok(best);
        }
    }
    Err(Error::NoConvergence(EVAR_MAX_ITERS))
}

/// Conditional value-at-risk of `X` at confidence `alpha`: the expected loss
/// `-X` over the worst `1 - alpha` probability mass.
///
/// Minimizes `c + E[(-X - c)_+] / (1 - alpha)` over `c`; the objective is
/// piecewise linear with kinks at the atoms, so checking the atoms is exact.
pub fn cvar_discrete<T: Scalar>(dist: &DiscreteDistribution<T>, alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(invalid("alpha", format!("{alpha} is outside (0, 1)")));
    }
    let tail = T::one() - alpha;
    let value = dist
        .outcomes
        .iter()
        .map(|&(x, _)| {
            let c = -x;
            let excess = dist
                .outcomes
                .iter()
                .fold(T::zero(), |a, &(y, p)| a + p * (-y - c).max(T::zero()));
            c + excess / tail
        })
        .fold(T::infinity(), T::min);
    Ok(value)
}

/// Mean-minus-deviation value of a Gaussian return.
pub fn robust_value_gaussian<T: Scalar>(mean: T, variance: T, beta: T) -> Result<T> {
    if variance < T::zero() {
        return Err(invalid("variance", format!("{variance} is negative")));
    }
    Ok(mean - beta * variance.sqrt())
}

/// Threshold obtained by applying the robust value to the Stag return itself,
/// linearized at `p*`. Clamped to `[0, 1]`.
pub fn paradox_threshold<T: Scalar>(game: &CoordinationGame<T>, beta: T) -> Result<T> {
    if beta < T::zero() {
        return Err(invalid("beta", format!("{beta} must be non-negative")));
    }
    let p = game.critical_threshold();
    Ok((p + beta * (p * (T::one() - p)).sqrt() / game.spread()).clamp01())
}

/// `1 / (1 + beta * sigma2)`.
pub fn trust_factor<T: Scalar>(sigma2: T, beta: T) -> Result<T> {
    if sigma2 < T::zero() || sigma2 > T::lit(0.25) {
        return Err(invalid("sigma2", format!("{sigma2} is outside [0, 1/4]")));
    }
    let d = T::one() + beta * sigma2;
    if d <= T::zero() {
        return Err(Error::TrustNotPositive {
            beta: beta.to_string(),
            sigma2: sigma2.to_string(),
        });
    }
    Ok(T::one() / d)
}

/// Variance that a Bernoulli(`q`) partner injects into a single-sample Stag gradient.
pub fn gradient_variance<T: Scalar>(q: T, delta: T, score_norm2: T) -> Result<T> {
    check_prob("q", q)?;
    if delta < T::zero() || score_norm2 < T::zero() {
        return Err(invalid("delta", "delta and score_norm2 must be non-negative"));
    }
    Ok(q * (T::one() - q) * delta * delta * score_norm2)
}

/// Squared Stag-vs-Hare signal over the partner-induced Stag return variance.
pub fn snr_at<T: Scalar>(q: T, game: &CoordinationGame<T>) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(invalid("q", format!("{q} is outside (0, 1)")));
    }
    let signal = game.stag_q_value(q) - game.r_h();
    let d = game.spread();
    Ok(signal * signal / (q * (T::one() - q) * d * d))
}
