//! Symmetric 2x2 coordination games and their closed-form analytics.

use std::fmt;

use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{two, Field, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Stag,
    Hare,
}

impl Action {
    #[inline]
    pub fn is_stag(self) -> bool {
        matches!(self, Action::Stag)
    }

    pub fn from_stag(stag: bool) -> Self {
        if stag {
            Action::Stag
        } else {
            Action::Hare
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Action::Stag => 'S',
            Action::Hare => 'H',
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A symmetric coordination game with payoffs `r_c > r_h > r_s`.
///
/// Fields are private so that every value in circulation satisfies the
/// payoff ordering; the analytic methods can then be infallible.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationGame<T> {
    r_c: T,
    r_h: T,
    r_s: T,
    name: String,
}

/// Joint mixed strategy: own Stag probability `p`, partner Stag probability `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedProfile<T> {
    pub p: T,
    pub q: T,
}

impl<T: Field> MixedProfile<T> {
    pub fn new(p: T, q: T) -> Result<Self> {
        check_prob("p", p)?;
        check_prob("q", q)?;
        Ok(Self { p, q })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameAnalytics<T> {
    pub p_star: T,
    pub w_star: T,
    pub w_mm: T,
    /// `None` when `r_h <= 0`, where the welfare ratios stop meaning anything.
    pub poa: Option<T>,
    pub pop_gt: Option<T>,
    pub cw: T,
}

impl<T: Field> GameAnalytics<T> {
    pub fn ratios_defined(&self) -> bool {
        self.pop_gt.is_some()
    }

    pub fn pop_gt(&self) -> Result<T> {
        self.pop_gt.ok_or_else(|| Error::RatioUndefined(self.w_mm.to_string()))
    }

    pub fn poa(&self) -> Result<T> {
        self.poa.ok_or_else(|| Error::RatioUndefined(self.w_mm.to_string()))
    }
}

pub(crate) fn check_prob<T: Field>(name: &'static str, x: T) -> Result<()> {
    if x < T::zero() || x > T::one() {
        return Err(invalid(name, format!("{x} is not a probability")));
    }
    Ok(())
}

impl<T: Field> CoordinationGame<T> {
    pub fn new(name: impl Into<String>, r_c: T, r_h: T, r_s: T) -> Result<Self> {
        if !(r_c > r_h && r_h > r_s) {
            return Err(Error::PayoffOrdering {
                r_c: r_c.to_string(),
                r_h: r_h.to_string(),
                r_s: r_s.to_string(),
            });
        }
        Ok(Self {
            r_c,
            r_h,
            r_s,
            name: name.into(),
        })
    }

    pub fn r_c(&self) -> T {
        self.r_c
    }
    pub fn r_h(&self) -> T {
        self.r_h
    }
    pub fn r_s(&self) -> T {
        self.r_s
    }
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Spread `r_c - r_s`, always positive.
    pub fn spread(&self) -> T {
        self.r_c - self.r_s
    }

    /// Partner cooperation probability at which Stag and Hare pay the same.
    pub fn critical_threshold(&self) -> T {
        (self.r_h - self.r_s) / self.spread()
    }

    /// Expected payoff of Stag against a partner who plays Stag with probability `q`.
    pub fn stag_q_value(&self, q: T) -> T {
        q * self.r_c + (T::one() - q) * self.r_s
    }

    pub fn payoff(&self, own: Action, other: Action) -> T {
        match (own, other) {
            (Action::Stag, Action::Stag) => self.r_c,
            (Action::Stag, Action::Hare) => self.r_s,
            (Action::Hare, _) => self.r_h,
        }
    }

    /// Sum of both players' realized payoffs.
    pub fn realized_welfare(&self, a: Action, b: Action) -> T {
        self.payoff(a, b) + self.payoff(b, a)
    }

    /// Row player's expected payoff under independent mixing.
    pub fn expected_payoff(&self, p: T, q: T) -> T {
        p * self.stag_q_value(q) + (T::one() - p) * self.r_h
    }

    pub fn social_welfare(&self, profile: MixedProfile<T>) -> T {
        let MixedProfile { p, q } = profile;
        let two = two::<T>();
        two * p * q * self.r_c + (p + q - two * p * q) * self.r_s + (two - p - q) * self.r_h
    }

    pub fn analytics(&self) -> GameAnalytics<T> {
        let two = two::<T>();
        let w_star = two * self.r_c;
        let w_mm = two * self.r_h;
        let ratios = self.r_h > T::zero();
        GameAnalytics {
            p_star: self.critical_threshold(),
            w_star,
            w_mm,
            poa: ratios.then(|| self.r_c / self.r_h),
            pop_gt: ratios.then(|| w_star / w_mm),
            cw: w_star - w_mm,
        }
    }

    /// First-order effective threshold under trust dampening with risk weight `beta`,
    /// clamped to `[0, 1]`.
    pub fn predicted_basin_threshold(&self, beta: T) -> Result<T> {
        let p = self.critical_threshold();
        let var = p * (T::one() - p);
        if T::one() + beta * var <= T::zero() {
            return Err(Error::TrustNotPositive {
                beta: beta.to_string(),
                sigma2: var.to_string(),
            });
        }
        let raw = p - beta * var / self.spread();
        Ok(if raw < T::zero() {
            T::zero()
        } else if raw > T::one() {
            T::one()
        } else {
            raw
        })
    }
}

impl<T: Field + FromPrimitive> CoordinationGame<T> {
    fn from_ints(name: &str, r_c: i64, r_h: i64, r_s: i64) -> Self {
        let c = |x: i64| T::from_i64(x).expect("small integer payoff");
        Self::new(name, c(r_c), c(r_h), c(r_s)).expect("built-in payoffs are ordered")
    }

    pub fn stag_hunt() -> Self {
        Self::from_ints("stag_hunt", 5, 2, -5)
    }

    pub fn chicken() -> Self {
        Self::from_ints("chicken", 4, 2, -1)
    }

    pub fn pure_coordination() -> Self {
        Self::from_ints("pure_coordination", 3, 1, 0)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "stag_hunt" => Ok(Self::stag_hunt()),
            "chicken" => Ok(Self::chicken()),
            "pure_coordination" => Ok(Self::pure_coordination()),
            other => Err(invalid("game", format!("unknown game `{other}`"))),
        }
    }

    pub const BUILTIN: [&'static str; 3] = ["stag_hunt", "chicken", "pure_coordination"];
}

const ROOT_SCAN_POINTS: usize = 4096;
const BISECTION_TOL: f64 = 1e-10;

impl<T: Scalar> CoordinationGame<T> {
    /// Root in `(0, 1)` of the trust-dampened indifference condition
    /// `b + tau(q(1-q)) * (Q_S(q) - b) = r_h`.
    ///
    /// With several roots the largest one is returned.
    pub fn exact_basin_threshold(&self, beta: T, baseline: T) -> Result<T> {
        // q(1-q) reaches 1/4, so tau stays positive on the whole interval iff beta > -4.
        if T::one() + beta * T::lit(0.25) <= T::zero() {
            return Err(Error::TrustNotPositive {
                beta: beta.to_string(),
                sigma2: "0.25".into(),
            });
        }
        let f = |q: T| {
            let tau = T::one() / (T::one() + beta * q * (T::one() - q));
            baseline + tau * (self.stag_q_value(q) - baseline) - self.r_h
        };
        let n = ROOT_SCAN_POINTS;
        let at = |k: usize| T::from_count(k) / T::from_count(n);
        // walk downward from q = 1 and stop at the first sign change
        let mut hi = at(n - 1);
        let mut f_hi = f(hi);
        for k in (1..n - 1).rev() {
            let lo = at(k);
            let f_lo = f(lo);
            if f_hi == T::zero() {
                return Ok(hi);
            }
            if (f_lo < T::zero()) != (f_hi < T::zero()) || f_lo == T::zero() {
                return Ok(bisect(f, lo, hi, T::lit(BISECTION_TOL)));
            }
            hi = lo;
            f_hi = f_lo;
        }
        if f_hi == T::zero() {
            return Ok(hi);
        }
        Err(Error::NoRoot(format!(
            "trust-dampened condition has constant sign (beta = {beta}, b = {baseline})"
        )))
    }

    pub fn cast<U: Scalar>(&self) -> CoordinationGame<U> {
        CoordinationGame {
            r_c: U::lit(self.r_c.as_f64()),
            r_h: U::lit(self.r_h.as_f64()),
            r_s: U::lit(self.r_s.as_f64()),
            name: self.name.clone(),
        }
    }
}

pub(crate) fn bisect<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, tol: T) -> T {
    let mut f_lo = f(lo);
    if f_lo == T::zero() {
        return lo;
    }
    let half = T::lit(0.5);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = half * (lo + hi);
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return mid;
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    half * (lo + hi)
}
