use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::scalar::{Rational, Scalar};

use super::EngineError;

/// A bullet fired from the origin. Its position at time `t >= fire_time` is
/// `speed * (t - fire_time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bullet<T> {
    pub index: i64,
    pub fire_time: T,
    pub speed: T,
}

impl<T: Scalar> Bullet<T> {
    pub fn new(index: i64, fire_time: T, speed: T) -> Self {
        Self {
            index,
            fire_time,
            speed,
        }
    }

    pub fn position_at(&self, t: &T) -> T {
        self.speed.clone() * (t.clone() - self.fire_time.clone())
    }
}

/// Builds bullets `1..=n` fired at unit times `1, 2, ..., n`.
pub fn unit_bullets<T: Scalar>(speeds: &[T]) -> Vec<Bullet<T>> {
    speeds
        .iter()
        .enumerate()
        .map(|(k, s)| Bullet::new(k as i64 + 1, T::from_i64(k as i64 + 1), s.clone()))
        .collect()
}

/// Converts float bullet data into scalar `T`, refusing when `T` is exact.
pub fn bullets_from_f64<T: Scalar>(data: &[(i64, f64, f64)]) -> Result<Vec<Bullet<T>>, EngineError> {
    data.iter()
        .map(|&(index, f, s)| {
            let fire_time = T::from_f64(f).ok_or(EngineError::FloatInExactMode)?;
            let speed = T::from_f64(s).ok_or(EngineError::FloatInExactMode)?;
            Ok(Bullet::new(index, fire_time, speed))
        })
        .collect()
}

/// One atom of a discrete speed law.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub speed: Rational,
    pub prob: Rational,
}

/// Finite atomic speed law with exact probabilities, speeds sorted fastest
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicLaw {
    atoms: Vec<Atom>,
    /// Cumulative integer weights over the common denominator of the masses.
    cumulative: Vec<u64>,
    total: u64,
}

impl AtomicLaw {
    pub fn new(pairs: Vec<(Rational, Rational)>) -> Result<Self, EngineError> {
        if pairs.is_empty() {
            return Err(EngineError::InvalidLaw("speed law has no atoms".into()));
        }
        let mut atoms: Vec<Atom> = pairs
            .into_iter()
            .map(|(speed, prob)| Atom { speed, prob })
            .collect();
        if atoms.iter().any(|a| a.speed <= Rational::zero()) {
            return Err(EngineError::InvalidLaw("speeds must be strictly positive".into()));
        }
        if atoms.iter().any(|a| a.prob < Rational::zero()) {
            return Err(EngineError::InvalidLaw("probabilities must be nonnegative".into()));
        }
        atoms.sort_by_key(|a| std::cmp::Reverse(a.speed));
        if atoms.windows(2).any(|w| w[0].speed == w[1].speed) {
            return Err(EngineError::InvalidLaw("speeds must be distinct".into()));
        }
        let sum: Rational = atoms.iter().map(|a| a.prob).sum();
        if sum != Rational::one() {
            return Err(EngineError::InvalidLaw(format!(
                "probabilities must sum to 1 (got {sum})"
            )));
        }
        let denom = atoms
            .iter()
            .fold(1i64, |acc, a| num_integer::lcm(acc, *a.prob.denom()));
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut running = 0u64;
        for a in &atoms {
            running += (*a.prob.numer() * (denom / *a.prob.denom())) as u64;
            cumulative.push(running);
        }
        Ok(Self {
            atoms,
            cumulative,
            total: denom as u64,
        })
    }

    /// Uniform law on the given speeds.
    pub fn uniform(speeds: &[Rational]) -> Result<Self, EngineError> {
        let p = Rational::new(1, speeds.len().max(1) as i64);
        Self::new(speeds.iter().map(|&s| (s, p)).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Speeds, fastest first.
    pub fn speeds(&self) -> Vec<Rational> {
        self.atoms.iter().map(|a| a.speed).collect()
    }

    pub fn probs(&self) -> Vec<Rational> {
        self.atoms.iter().map(|a| a.prob).collect()
    }

    pub fn prob_of(&self, speed: &Rational) -> Option<Rational> {
        self.atoms.iter().find(|a| &a.speed == speed).map(|a| a.prob)
    }

    pub fn max_speed(&self) -> Rational {
        self.atoms[0].speed
    }

    pub fn min_speed(&self) -> Rational {
        self.atoms[self.atoms.len() - 1].speed
    }

    /// Index of the atom selected by an integer drawn uniformly from
    /// `0..self.total_weight()`.
    pub fn atom_for_draw(&self, draw: u64) -> usize {
        self.cumulative.partition_point(|&c| c <= draw)
    }

    pub fn total_weight(&self) -> u64 {
        self.total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpeedLaw {
    Atomic(AtomicLaw),
    /// Uniform on the open interval (0, 1).
    ContinuousUniform01,
}

impl SpeedLaw {
    pub fn as_atomic(&self) -> Option<&AtomicLaw> {
        match self {
            SpeedLaw::Atomic(a) => Some(a),
            SpeedLaw::ContinuousUniform01 => None,
        }
    }

    pub fn contains(&self, speed: &Rational) -> bool {
        match self {
            SpeedLaw::Atomic(a) => a.prob_of(speed).is_some(),
            SpeedLaw::ContinuousUniform01 => {
                *speed > Rational::zero() && *speed < Rational::one()
            }
        }
    }

    pub fn max_speed(&self) -> Rational {
        match self {
            SpeedLaw::Atomic(a) => a.max_speed(),
            SpeedLaw::ContinuousUniform01 => Rational::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpacingModel {
    Unit,
    Exponential { rate: f64 },
}

impl SpacingModel {
    pub fn exponential(rate: f64) -> Result<Self, EngineError> {
        if rate > 0.0 && rate.is_finite() {
            Ok(SpacingModel::Exponential { rate })
        } else {
            Err(EngineError::InvalidSpacing(rate))
        }
    }
}

/// Arithmetic used for a given law and spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithmeticMode {
    Exact,
    Float,
}

impl ArithmeticMode {
    /// Exact rationals exactly when ties can have positive probability:
    /// atomic rational speeds fired at unit spacing.
    pub fn for_inputs(law: &SpeedLaw, spacing: &SpacingModel) -> Self {
        match (law, spacing) {
            (SpeedLaw::Atomic(_), SpacingModel::Unit) => ArithmeticMode::Exact,
            _ => ArithmeticMode::Float,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fate<T> {
    Alive,
    Annihilated {
        time: T,
        position: T,
        /// Indices of every bullet destroyed in the same collision,
        /// including this one.
        group: BTreeSet<i64>,
    },
}

impl<T> Fate<T> {
    pub fn is_alive(&self) -> bool {
        matches!(self, Fate::Alive)
    }
}

/// Outcome of every bullet at a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FateTable<T> {
    pub horizon: Option<T>,
    pub bullets: Vec<Bullet<T>>,
    pub fates: Vec<Fate<T>>,
}

impl<T: Scalar> FateTable<T> {
    pub fn fate_of(&self, index: i64) -> Option<&Fate<T>> {
        self.bullets
            .iter()
            .position(|b| b.index == index)
            .map(|k| &self.fates[k])
    }

    pub fn survivors(&self) -> Vec<i64> {
        self.bullets
            .iter()
            .zip(&self.fates)
            .filter(|(_, f)| f.is_alive())
            .map(|(b, _)| b.index)
            .collect()
    }

    /// Distinct annihilation groups in order of first member.
    pub fn groups(&self) -> Vec<(T, T, BTreeSet<i64>)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for fate in &self.fates {
            if let Fate::Annihilated {
                time,
                position,
                group,
            } = fate
            {
                let first = *group.iter().next().expect("nonempty group");
                if seen.insert(first) {
                    out.push((time.clone(), position.clone(), group.clone()));
                }
            }
        }
        out
    }

    /// JSON document: `{"horizon": h|null, "bullets": [{"index", "fire_time",
    /// "speed", "fate": "alive"|"annihilated", "time", "position",
    /// "group"}]}`. Exact values are `"p/q"` strings.
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .bullets
            .iter()
            .zip(&self.fates)
            .map(|(b, f)| match f {
                Fate::Alive => json!({
                    "index": b.index,
                    "fire_time": b.fire_time.to_json(),
                    "speed": b.speed.to_json(),
                    "fate": "alive",
                }),
                Fate::Annihilated {
                    time,
                    position,
                    group,
                } => json!({
                    "index": b.index,
                    "fire_time": b.fire_time.to_json(),
                    "speed": b.speed.to_json(),
                    "fate": "annihilated",
                    "time": time.to_json(),
                    "position": position.to_json(),
                    "group": group.iter().collect::<Vec<_>>(),
                }),
            })
            .collect();
        json!({
            "horizon": self.horizon.as_ref().map(|h| h.to_json()),
            "bullets": rows,
        })
    }
}

/// What happened to the first bullet by the horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum FirstBulletFate<T> {
    CaughtBy { catcher: i64, time: T, position: T },
    AliveAtHorizon { horizon: T },
}

impl<T> FirstBulletFate<T> {
    pub fn survived(&self) -> bool {
        matches!(self, FirstBulletFate::AliveAtHorizon { .. })
    }
}
