use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::types::{Bullet, SpacingModel, SpeedLaw};
use super::EngineError;
use crate::rng::RandomStream;
use crate::scalar::{Rational, Scalar};

/// Lazily generated bullets `start_index, start_index + 1, ...`.
///
/// Per bullet the stream is consumed as: spacing gap (exponential spacing
/// only), then speed (skipped when the speed is forced). Two sources built
/// from clones of one stream with the same forced-speed pattern therefore see
/// identical randomness.
pub struct BulletSource<'a, T> {
    law: &'a SpeedLaw,
    spacing: SpacingModel,
    rng: &'a mut RandomStream,
    exp: Option<Exp<f64>>,
    next_index: i64,
    clock: f64,
    forced: Option<T>,
    origin: Option<T>,
}

impl<'a, T: Scalar> BulletSource<'a, T> {
    /// Bullets starting at index 1. With unit spacing bullet `i` fires at
    /// time `i`; with exponential spacing `t_1 = zeta_1` and
    /// `t_i = t_{i-1} + zeta_i`.
    pub fn new(
        law: &'a SpeedLaw,
        spacing: SpacingModel,
        first_speed: Option<T>,
        rng: &'a mut RandomStream,
    ) -> Result<Self, EngineError> {
        Self::starting_at(law, spacing, 1, None, first_speed, rng)
    }

    /// Bullets starting at `start_index`. When `origin` is given, the first
    /// bullet fires exactly at `origin` and later gaps follow the spacing
    /// model.
    pub fn starting_at(
        law: &'a SpeedLaw,
        spacing: SpacingModel,
        start_index: i64,
        origin: Option<T>,
        first_speed: Option<T>,
        rng: &'a mut RandomStream,
    ) -> Result<Self, EngineError> {
        let exp = match spacing {
            SpacingModel::Unit => None,
            SpacingModel::Exponential { rate } => {
                if T::EXACT {
                    return Err(EngineError::FloatInExactMode);
                }
                Some(Exp::new(rate).map_err(|_| EngineError::InvalidSpacing(rate))?)
            }
        };
        if T::EXACT && matches!(law, SpeedLaw::ContinuousUniform01) {
            return Err(EngineError::FloatInExactMode);
        }
        Ok(Self {
            law,
            spacing,
            rng,
            exp,
            next_index: start_index,
            clock: origin.as_ref().map_or(0.0, |o| o.to_f64()),
            forced: first_speed,
            origin,
        })
    }

    pub fn draw_speed(&mut self) -> T {
        match self.law {
            SpeedLaw::Atomic(law) => {
                let draw = self.rng.random_range(0..law.total_weight());
                T::from_rational(&law.atoms()[law.atom_for_draw(draw)].speed)
            }
            SpeedLaw::ContinuousUniform01 => {
                let u: f64 = self.rng.sample(Open01);
                T::from_f64(u).expect("float scalar")
            }
        }
    }

    fn draw_fire_time(&mut self, index: i64) -> T {
        if let Some(origin) = self.origin.take() {
            return origin;
        }
        match (self.spacing, &self.exp) {
            (SpacingModel::Unit, _) => T::from_i64(index),
            (SpacingModel::Exponential { .. }, Some(exp)) => {
                self.clock += exp.sample(&mut *self.rng);
                T::from_f64(self.clock).expect("float scalar")
            }
            (SpacingModel::Exponential { .. }, None) => unreachable!("exp sampler built with source"),
        }
    }

    /// Draws a gap for a bullet fired *before* the previous one (two-sided
    /// windows walk backwards in time).
    pub fn draw_gap(&mut self) -> T {
        match &self.exp {
            None => T::from_i64(1),
            Some(exp) => T::from_f64(exp.sample(&mut *self.rng)).expect("float scalar"),
        }
    }

    pub fn next_bullet(&mut self) -> Bullet<T> {
        let index = self.next_index;
        self.next_index += 1;
        let fire_time = self.draw_fire_time(index);
        let speed = match self.forced.take() {
            Some(s) => s,
            None => self.draw_speed(),
        };
        Bullet::new(index, fire_time, speed)
    }
}

/// Checks that a forced first speed is in the support of `law`.
pub(crate) fn check_first_speed(law: &SpeedLaw, first_speed: Option<&Rational>) -> Result<(), EngineError> {
    match first_speed {
        Some(s) if !law.contains(s) => Err(EngineError::SpeedNotInSupport(s.to_string())),
        _ => Ok(()),
    }
}

/// `n` bullets with i.i.d. speeds from `law`, the first optionally forced.
pub fn sample_bullets<T: Scalar>(
    law: &SpeedLaw,
    spacing: SpacingModel,
    n: usize,
    first_speed: Option<&Rational>,
    rng: &mut RandomStream,
) -> Result<Vec<Bullet<T>>, EngineError> {
    if n == 0 {
        return Err(EngineError::InvalidArgument("need at least one bullet".into()));
    }
    check_first_speed(law, first_speed)?;
    let mut source = BulletSource::new(law, spacing, first_speed.map(T::from_rational), rng)?;
    Ok((0..n).map(|_| source.next_bullet()).collect())
}
