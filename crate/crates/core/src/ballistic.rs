//! Ballistic annihilation through the bullet-process lens.
//!
//! A particle at position `x` with velocity `v` traces `t = (y - x) / v` in
//! the swapped (space as time) picture, i.e. a bullet fired at time `x` with
//! speed `1 / v`. Velocities are first moved to the positive axis by an
//! order-preserving affine map, which leaves the collision structure intact.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::engine::{
    run_to_quiescence, two_sided_estimate, AtomicLaw, Bullet, EngineError, FateTable, McConfig, SpacingModel,
    SpeedLaw, TwoSidedEstimate,
};
use crate::scalar::{BigRational, Rational, Scalar};
use crate::theory::threshold_holds;

/// Width below which threshold bisection stops.
pub const THRESHOLD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BallisticError {
    #[error("speeds must be distinct")]
    DuplicateSpeeds,
    #[error("particle positions must be distinct")]
    DuplicatePositions,
    #[error("p = {0} outside the allowed range")]
    InvalidP(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `r_i - min(r) + 1`.
pub fn shift_speeds<T: Scalar>(r: &[T]) -> Result<Vec<T>, BallisticError> {
    for (a, x) in r.iter().enumerate() {
        if r[..a].contains(x) {
            return Err(BallisticError::DuplicateSpeeds);
        }
    }
    let Some(min) = r.iter().cloned().reduce(|a, b| if b < a { b } else { a }) else {
        return Ok(Vec::new());
    };
    Ok(r.iter().map(|x| x.clone() - min.clone() + T::one()).collect())
}

/// Bullet speeds for particle velocities `r`: reciprocals of the shifted
/// velocities.
pub fn bullet_speeds<T: Scalar>(r: &[T]) -> Result<Vec<T>, BallisticError> {
    Ok(shift_speeds(r)?.into_iter().map(|x| T::one() / x).collect())
}

/// Particles `(position, velocity)` as bullets, ordered by position and
/// indexed from 1.
pub fn particles_to_bullets<T: Scalar>(particles: &[(T, T)]) -> Result<Vec<Bullet<T>>, BallisticError> {
    let velocities: Vec<T> = particles.iter().map(|p| p.1.clone()).collect();
    let mut distinct = velocities.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("comparable speeds"));
    distinct.dedup();
    let speeds = bullet_speeds(&distinct)?;
    let mut order: Vec<usize> = (0..particles.len()).collect();
    order.sort_by(|&a, &b| particles[a].0.partial_cmp(&particles[b].0).expect("comparable positions"));
    if order.windows(2).any(|w| particles[w[0]].0 == particles[w[1]].0) {
        return Err(BallisticError::DuplicatePositions);
    }
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let slot = distinct.iter().position(|v| *v == particles[p].1).expect("speed present");
            Bullet::new(k as i64 + 1, particles[p].0.clone(), speeds[slot].clone())
        })
        .collect())
}

/// Annihilation structure of a finite particle configuration; bullet `k` is
/// the `k`-th particle from the left.
pub fn particle_fates<T: Scalar>(particles: &[(T, T)]) -> Result<FateTable<T>, BallisticError> {
    Ok(run_to_quiescence(&particles_to_bullets(particles)?)?)
}

/// Two-sided bullet law for the symmetric three-velocity law with mass `p`
/// at velocity 0: `S = {3, 3/2, 1}`, `mu(3/2) = p`, `mu(3) = mu(1) = (1-p)/2`.
pub fn nu_to_bullet(p: &Rational) -> Result<AtomicLaw, BallisticError> {
    if *p < Rational::zero() || *p > Rational::one() {
        return Err(BallisticError::InvalidP(p.to_string()));
    }
    let side = (Rational::one() - p) / Rational::from_integer(2);
    Ok(AtomicLaw::new(vec![
        (Rational::from_integer(3), side),
        (Rational::new(3, 2), *p),
        (Rational::one(), side),
    ])?)
}

/// Shield probability with exponential gaps: `p^2 (1 - p) / 8`.
pub fn pf_expo<T: Scalar>(p: &T) -> T {
    p.clone() * p.clone() * (T::one() - p.clone()) / T::from_i64(8)
}

/// Shield probability with unit gaps for the three-speed law:
/// `((1 - p)/2)^3 p^2`.
pub fn pf_unit<T: Scalar>(p: &T) -> T {
    let side = (T::one() - p.clone()) / T::from_i64(2);
    side.clone() * side.clone() * side * p.clone() * p.clone()
}

/// Bisection bracket around the threshold root: the inequality fails at
/// `lo` and holds at `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRoot {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl ThresholdRoot {
    /// Reported root: the end of the bracket at which the inequality holds.
    pub fn root(&self) -> f64 {
        self.hi.to_f64()
    }
}

fn bisect_threshold(eps: impl Fn(&BigRational) -> BigRational) -> ThresholdRoot {
    let holds = |p: &BigRational| {
        let p1 = (BigRational::one() - p) / BigRational::from_i64(2);
        threshold_holds(&p1, p, &eps(p))
    };
    let mut lo = BigRational::zero();
    let mut hi = BigRational::one();
    debug_assert!(!holds(&lo) && holds(&hi));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    while (&hi - &lo).to_f64() > THRESHOLD_TOLERANCE {
        let mid = (&lo + &hi) * &half;
        if holds(&mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    ThresholdRoot { lo, hi }
}

/// Smallest `p` (to [`THRESHOLD_TOLERANCE`]) at which the three-speed law
/// satisfies the threshold inequality with unit spacing.
pub fn threshold_unit() -> ThresholdRoot {
    bisect_threshold(pf_unit)
}

/// As [`threshold_unit`] with Poisson spacing.
pub fn threshold_expo() -> ThresholdRoot {
    bisect_threshold(pf_expo)
}

/// Time after the catcher's firing during which a fastest bullet could still
/// reach the catch: `xi u (s1 - v) / (s1 (v - u))`.
pub fn window_duration_expo<T: Scalar>(u: &T, v: &T, s1: &T, xi: &T) -> Result<T, BallisticError> {
    if u >= v {
        return Err(BallisticError::InvalidArgument("caught speed must be below catcher speed".into()));
    }
    if v > s1 || *xi < T::zero() {
        return Err(BallisticError::InvalidArgument("need v <= s1 and xi >= 0".into()));
    }
    Ok(xi.clone() * u.clone() * (s1.clone() - v.clone()) / (s1.clone() * (v.clone() - u.clone())))
}

/// Particle spacing: lattice or Poisson of unit intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaSpacing {
    Unit,
    PoissonUnit,
}

impl From<BaSpacing> for SpacingModel {
    fn from(s: BaSpacing) -> Self {
        match s {
            BaSpacing::Unit => SpacingModel::Unit,
            BaSpacing::PoissonUnit => SpacingModel::Exponential { rate: 1.0 },
        }
    }
}

/// Bullet speed of a particle with velocity `v` in `{-1, 0, 1}` under the
/// map behind [`nu_to_bullet`] (`v ↦ 1 / (v/3 + 2/3)`).
pub fn symmetric_bullet_speed(v: i64) -> Result<Rational, BallisticError> {
    if !(-1..=1).contains(&v) {
        return Err(BallisticError::InvalidArgument(format!("velocity {v} not in {{-1, 0, 1}}")));
    }
    Ok(Rational::from_integer(3) / Rational::from_integer(v + 2))
}

/// Two-sided survival frequencies of a particle with velocity `v` under the
/// symmetric law with `P[velocity 0] = p`, in a window of `m` particles on
/// each side.
pub fn ba_particle_survival(
    p: &Rational,
    v: i64,
    m: usize,
    spacing: BaSpacing,
    cfg: &McConfig,
) -> Result<TwoSidedEstimate, BallisticError> {
    let law = nu_to_bullet(p)?;
    let speed = symmetric_bullet_speed(v)?;
    if law.prob_of(&speed).is_none_or(|q| q.is_zero()) {
        return Err(BallisticError::InvalidP(format!("{p} gives velocity {v} no mass")));
    }
    Ok(two_sided_estimate(
        &SpeedLaw::Atomic(law),
        spacing.into(),
        m,
        Some(&speed),
        cfg,
    )?)
}

/// Survival frequencies of a velocity-0 particle.
pub fn ba_survival_estimate(
    p: &Rational,
    m: usize,
    spacing: BaSpacing,
    cfg: &McConfig,
) -> Result<TwoSidedEstimate, BallisticError> {
    if p.is_zero() {
        return Err(BallisticError::InvalidP("0 (no velocity-0 particles)".into()));
    }
    ba_particle_survival(p, 0, m, spacing, cfg)
}
