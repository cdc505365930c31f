//! Analytical objects behind the survival argument: the collision point and
//! window of dependence of a catch, the shield event probability `epsilon`,
//! the threshold inequality, the operator `A` on integer-supported laws and
//! the lazy biased random walk whose return time is its fixed point.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::engine::{parallel_map, AtomicLaw, EngineError, McConfig};
use crate::scalar::{BigRational, Rational, Scalar};
use crate::stats::Estimate;

/// Largest `m` scanned when looking for `m_0`.
pub const M_ZERO_GUARD: i64 = 1_000_000;

/// Bits of precision in the `delta_0` search.
pub const DELTA_BITS: u32 = 40;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("need at least three distinct speeds, got {0}")]
    TooFewSpeeds(usize),
    #[error("no m <= {0} has h(m) > 1")]
    GuardExceeded(i64),
    #[error("invalid walk parameters: {0}")]
    InvalidWalk(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A catch of `b_j` by the faster, later `b_i`, with unit spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec<T> {
    pub catcher_speed: T,
    pub caught_speed: T,
    pub catcher_index: i64,
    pub caught_index: i64,
    pub max_speed: T,
}

impl<T: Scalar> WindowSpec<T> {
    pub fn new(
        catcher_speed: T,
        caught_speed: T,
        catcher_index: i64,
        caught_index: i64,
        max_speed: T,
    ) -> Result<Self, TheoryError> {
        if catcher_speed == caught_speed {
            return Err(TheoryError::InvalidWindow("equal speeds never meet".into()));
        }
        if catcher_speed < caught_speed {
            return Err(TheoryError::InvalidWindow("catcher must be faster".into()));
        }
        if catcher_index <= caught_index {
            return Err(TheoryError::InvalidWindow("catcher must be fired later".into()));
        }
        if max_speed < catcher_speed {
            return Err(TheoryError::InvalidWindow("max speed below catcher speed".into()));
        }
        Ok(Self {
            catcher_speed,
            caught_speed,
            catcher_index,
            caught_index,
            max_speed,
        })
    }
}

/// Time `t_0` and place `x_0` where the catch would happen.
pub fn collision_point<T: Scalar>(spec: &WindowSpec<T>) -> (T, T) {
    let si = spec.catcher_speed.clone();
    let sj = spec.caught_speed.clone();
    let i = T::from_i64(spec.catcher_index);
    let j = T::from_i64(spec.caught_index);
    let t0 = (si.clone() * i - sj.clone() * j.clone()) / (si - sj.clone());
    let x0 = sj * (t0.clone() - j);
    (t0, x0)
}

/// Number of firing slots after the catcher from which a fastest bullet
/// still strictly reaches `x_0` before `t_0`.
pub fn window_a<T: Scalar>(spec: &WindowSpec<T>) -> i64 {
    let (t0, x0) = collision_point(spec);
    // s1 (t0 - k) > x0  <=>  k < t0 - x0 / s1
    let bound = t0 - x0 / spec.max_speed.clone();
    let last = bound.ceil_i64() - 1;
    (last - spec.catcher_index).max(0)
}

fn sorted_desc(speeds: &[Rational]) -> Result<Vec<Rational>, TheoryError> {
    let mut s = speeds.to_vec();
    s.sort_by(|a, b| b.cmp(a));
    s.dedup();
    if s.len() < 3 || s.len() != speeds.len() {
        return Err(TheoryError::TooFewSpeeds(s.len()));
    }
    Ok(s)
}

/// Window size when `b_2` is caught by `b_{2m+1}` moving at the second
/// fastest speed while `b_2` moves at the slowest.
pub fn h_of_m(speeds: &[Rational], m: i64) -> Result<i64, TheoryError> {
    let s = sorted_desc(speeds)?;
    if m < 2 {
        return Err(TheoryError::InvalidArgument(format!("m must be >= 2, got {m}")));
    }
    let spec = WindowSpec::new(s[1], s[s.len() - 1], 2 * m + 1, 2, s[0])?;
    Ok(window_a(&spec))
}

/// `min{m >= 2 : h(m) > 1}`.
pub fn m_zero(speeds: &[Rational]) -> Result<i64, TheoryError> {
    for m in 2..=M_ZERO_GUARD {
        if h_of_m(speeds, m)? > 1 {
            return Ok(m);
        }
    }
    Err(TheoryError::GuardExceeded(M_ZERO_GUARD))
}

fn big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// `p_1^{m_0-1} p_n^{m_0} p_2^{h(m_0)}` from the masses of fastest,
/// second fastest and slowest speeds.
fn epsilon_from(p1: &BigRational, p2: &BigRational, pn: &BigRational, m0: i64, h: i64) -> BigRational {
    num_traits::pow(p1.clone(), (m0 - 1) as usize)
        * num_traits::pow(pn.clone(), m0 as usize)
        * num_traits::pow(p2.clone(), h as usize)
}

/// Probability of the shield configuration `F`.
pub fn epsilon_event(law: &AtomicLaw) -> Result<BigRational, TheoryError> {
    let speeds = law.speeds();
    let m0 = m_zero(&speeds)?;
    let h = h_of_m(&speeds, m0)?;
    let probs = law.probs();
    let n = probs.len();
    Ok(epsilon_from(&big(&probs[0]), &big(&probs[1]), &big(&probs[n - 1]), m0, h))
}

/// `p_1 < p_2 + eps (1 - p_1 - p_2)`.
pub fn threshold_holds<T: Scalar>(p1: &T, p2: &T, eps: &T) -> bool {
    let rest = T::one() - p1.clone() - p2.clone();
    *p1 < p2.clone() + eps.clone() * rest
}

/// A perturbed uniform law that satisfies the threshold inequality with its
/// own `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuDelta {
    pub delta: Rational,
    pub law: AtomicLaw,
    pub epsilon: BigRational,
}

/// Largest dyadic `delta_0 <= 1/(2n)` (at [`DELTA_BITS`] bits below the
/// first power of two not exceeding `1/(2n)`) for which moving `delta_0`
/// of mass from the second fastest speed to the slowest keeps the threshold
/// inequality true.
pub fn find_mu_delta(speeds: &[Rational]) -> Result<MuDelta, TheoryError> {
    let s = sorted_desc(speeds)?;
    let n = s.len() as i64;
    let m0 = m_zero(&s)?;
    let h = h_of_m(&s, m0)?;
    let base = BigRational::new(BigInt::one(), BigInt::from(n));
    let holds = |delta: &BigRational| {
        let p1 = base.clone();
        let p2 = &base - delta;
        let pn = &base + delta;
        let eps = epsilon_from(&p1, &p2, &pn, m0, h);
        threshold_holds(&p1, &p2, &eps)
    };
    // 2^-c <= 1/(2n)
    let c = (64 - ((2 * n - 1) as u64).leading_zeros()) as i64;
    let bits = c + DELTA_BITS as i64;
    let unit = BigRational::new(BigInt::one(), BigInt::one() << bits as usize);
    let (mut lo, mut hi) = (0i64, 1i64 << DELTA_BITS);
    if holds(&(&unit * BigRational::from_i64(hi))) {
        lo = hi;
    } else {
        // Invariant: lo holds, hi fails.
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if holds(&(&unit * BigRational::from_i64(mid))) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if lo == 0 {
        return Err(TheoryError::InvalidArgument("no positive dyadic delta satisfies the inequality".into()));
    }
    let delta = Rational::new(lo, 1i64 << bits);
    let third = Rational::new(1, n);
    let pairs = s
        .iter()
        .enumerate()
        .map(|(k, &speed)| {
            let p = if k == 1 {
                third - delta
            } else if k == s.len() - 1 {
                third + delta
            } else {
                third
            };
            (speed, p)
        })
        .collect();
    let law = AtomicLaw::new(pairs)?;
    let epsilon = epsilon_event(&law)?;
    Ok(MuDelta { delta, law, epsilon })
}

/// Law on `{1, ..., K}` plus an overflow atom for everything beyond `K`
/// (including `+infinity`).
#[derive(Debug, Clone, PartialEq)]
pub struct SupportDistribution<T> {
    /// `mass[v - 1] = P[value = v]`.
    pub mass: Vec<T>,
    pub overflow: T,
}

impl<T: Scalar> SupportDistribution<T> {
    pub fn point(value: usize, trunc: usize) -> Self {
        assert!(trunc >= 1, "truncation must be positive");
        let mut mass = vec![T::zero(); trunc];
        let overflow = if value >= 1 && value <= trunc {
            mass[value - 1] = T::one();
            T::zero()
        } else {
            T::one()
        };
        Self { mass, overflow }
    }

    pub fn trunc(&self) -> usize {
        self.mass.len()
    }

    pub fn total(&self) -> T {
        self.mass.iter().fold(self.overflow.clone(), |acc, m| acc + m.clone())
    }

    /// `P[value <= v]` for `v = 1..=K`.
    pub fn cdf(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.mass
            .iter()
            .map(|m| {
                acc = acc.clone() + m.clone();
                acc.clone()
            })
            .collect()
    }

    /// `P[value > k]` for `k = 0..=K`.
    pub fn tail(&self) -> Vec<T> {
        let total = self.total();
        std::iter::once(total.clone())
            .chain(self.cdf().into_iter().map(|c| total.clone() - c))
            .collect()
    }

    /// True when `self` is stochastically at least `other` (CDF pointwise
    /// no larger), allowing `tol` of slack.
    pub fn dominates(&self, other: &Self, tol: &T) -> bool {
        self.cdf()
            .iter()
            .zip(other.cdf())
            .all(|(a, b)| a.clone() <= b + tol.clone())
    }
}

/// `d ↦ p_1 δ_1 + r (d * d) + z d` for a probability law `d`, with `r = p_2 + eps (1 - p_1 - p_2)` and
/// `z = (1 - p_1 - p_2)(1 - eps)`: the law of
/// `1{s=s_1} + 1{s=s_2}(T_1+T_2) + 1{s<s_2}(X(T_3+T_4) + (1-X)T_5)`.
pub fn apply_operator_a<T: Scalar>(d: &SupportDistribution<T>, p1: &T, p2: &T, eps: &T) -> SupportDistribution<T> {
    let k = d.trunc();
    let rest = T::one() - p1.clone() - p2.clone();
    let r = p2.clone() + eps.clone() * rest.clone();
    let z = rest * (T::one() - eps.clone());
    let mut mass: Vec<T> = d.mass.iter().map(|m| z.clone() * m.clone()).collect();
    mass[0] = mass[0].clone() + p1.clone();
    // Sum of two independent copies; values start at 2.
    let mut conv_total = T::zero();
    for v in 2..=k {
        let mut acc = T::zero();
        for a in 1..v {
            let (x, y) = (&d.mass[a - 1], &d.mass[v - a - 1]);
            if !x.is_zero() && !y.is_zero() {
                acc = acc + x.clone() * y.clone();
            }
        }
        if !acc.is_zero() {
            conv_total = conv_total + acc.clone();
            mass[v - 1] = mass[v - 1].clone() + r.clone() * acc;
        }
    }
    // Inputs are probability laws, so the pair total is taken as exactly 1.
    // Using the computed total instead feeds rounding into
    // `T -> p_1 + z T + r T^2`, whose fixed point 1 is repelling when
    // `p_1 < r`.
    let conv_overflow = T::one() - conv_total;
    let overflow = z * d.overflow.clone() + r * conv_overflow;
    SupportDistribution { mass, overflow }
}

#[derive(Debug, Clone)]
pub struct OperatorIteration<T> {
    /// `A^1(δ_1), ..., A^N(δ_1)`.
    pub iterates: Vec<SupportDistribution<T>>,
    /// Overflow mass of the last iterate.
    pub overflow: T,
}

impl<T: Scalar> OperatorIteration<T> {
    pub fn last(&self) -> &SupportDistribution<T> {
        self.iterates.last().expect("at least one iteration")
    }
}

/// Iterates the operator from `δ_1`, the stochastically smallest start, so
/// the iterates increase to the fixed point.
pub fn iterate_a<T: Scalar>(
    p1: &T,
    p2: &T,
    eps: &T,
    iterations: usize,
    trunc: usize,
) -> Result<OperatorIteration<T>, TheoryError> {
    if iterations == 0 || trunc == 0 {
        return Err(TheoryError::InvalidArgument("iterations and truncation must be positive".into()));
    }
    let valid = |p: &T| *p >= T::zero() && *p <= T::one();
    let rest = T::one() - p1.clone() - p2.clone();
    if !valid(p1) || !valid(p2) || !valid(eps) || rest < T::zero() {
        return Err(TheoryError::InvalidArgument("probabilities out of range".into()));
    }
    let mut d = SupportDistribution::point(1, trunc);
    let mut iterates = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        d = apply_operator_a(&d, p1, p2, eps);
        iterates.push(d.clone());
    }
    Ok(OperatorIteration {
        overflow: d.overflow,
        iterates,
    })
}

/// Lazy walk on the integers: left with `left`, right with `right`, stay
/// with `lazy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub left: f64,
    pub right: f64,
    pub lazy: f64,
}

impl WalkParams {
    pub fn new(left: f64, right: f64, lazy: f64) -> Result<Self, TheoryError> {
        if [left, right, lazy].iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(TheoryError::InvalidWalk("probabilities must lie in [0, 1]".into()));
        }
        if (left + right + lazy - 1.0).abs() > 1e-12 {
            return Err(TheoryError::InvalidWalk(format!(
                "probabilities must sum to 1 (got {})",
                left + right + lazy
            )));
        }
        if right <= 0.0 {
            return Err(TheoryError::InvalidWalk("right step probability must be positive".into()));
        }
        Ok(Self { left, right, lazy })
    }

    /// The walk whose return time from 1 is the operator's fixed point.
    pub fn from_threshold(p1: f64, p2: f64, eps: f64) -> Result<Self, TheoryError> {
        let rest = 1.0 - p1 - p2;
        Self::new(p1, p2 + eps * rest, rest * (1.0 - eps))
    }
}

/// Probability that the walk started at 1 ever hits 0: `min(1, l/r)`, the
/// smaller root of `r f^2 - (l + r) f + l = 0`.
pub fn walk_extinction(w: &WalkParams) -> f64 {
    (w.left / w.right).min(1.0)
}

/// Generating function `E[x^T]` of the hitting time of 0 from 1, the root of
/// `f = l x + r f^2 + z f` with `f(0) = 0`.
pub fn walk_return_pgf(w: &WalkParams, x: f64) -> Result<f64, TheoryError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(TheoryError::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    let a = 1.0 - w.lazy;
    let disc = a * a - 4.0 * w.right * w.left * x;
    if disc < 0.0 {
        return Err(TheoryError::InvalidWalk(format!("negative discriminant {disc}")));
    }
    // Rationalised "-" branch; avoids cancellation near x = 0.
    let denom = a + disc.sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * w.left * x / denom)
}

/// Monte Carlo estimate of `P[walk from 1 hits 0 within max_steps]`.
pub fn walk_simulate(w: &WalkParams, max_steps: u64, cfg: &McConfig) -> Result<Estimate, TheoryError> {
    if max_steps == 0 || cfg.reps == 0 {
        return Err(TheoryError::InvalidArgument("need max_steps >= 1 and reps >= 1".into()));
    }
    let (l, lr) = (w.left, w.left + w.right);
    let hits = parallel_map(cfg, || (), |_, _, mut rng| {
        let mut pos: u64 = 1;
        for step in 0..max_steps {
            // Too far out to come back in the remaining steps.
            if pos > max_steps - step {
                return false;
            }
            let u: f64 = rng.random();
            if u < l {
                pos -= 1;
                if pos == 0 {
                    return true;
                }
            } else if u < lr {
                pos += 1;
            }
        }
        false
    });
    Ok(cfg.estimate(hits.into_iter().filter(|&h| h).count() as u64))
}

/// `1 - min(1, l/r)` for the operator parameters, exactly.
pub fn fixed_point_escape(p1: &BigRational, p2: &BigRational, eps: &BigRational) -> BigRational {
    let r = p2 + eps * (BigRational::one() - p1 - p2);
    if r.is_zero() || p1 >= &r {
        return BigRational::zero();
    }
    BigRational::one() - p1 / r
}

/// Signed slack `p_2 + eps (1 - p_1 - p_2) - p_1` (positive when the
/// threshold holds).
pub fn threshold_slack(p1: &BigRational, p2: &BigRational, eps: &BigRational) -> BigRational {
    let s = p2 + eps * (BigRational::one() - p1 - p2) - p1;
    debug_assert_eq!(s.is_positive(), threshold_holds(p1, p2, eps));
    s
}
