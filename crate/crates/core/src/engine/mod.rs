//! Bullet-process simulation.
//!
//! [`run`] evaluates a finite configuration up to a horizon; the Monte Carlo
//! estimators in [`montecarlo`] drive the incremental [`Simulation`] with
//! lazily sampled bullets so a replicate stops as soon as its answer is known.

mod montecarlo;
mod sample;
mod sim;
mod types;

use thiserror::Error;

pub use montecarlo::{
    first_bullet_fate, first_bullet_fate_in, monotone_coupling_check, parallel_map, survival_curve,
    two_sided_estimate, two_sided_fates, two_sided_fates_in, McConfig, ReplicateFate, SurvivalCurve,
    TwoSidedEstimate, TwoSidedOutcome,
};
pub use sample::{sample_bullets, BulletSource};
pub use sim::{meeting_point, Collision, Simulation};
pub use types::{
    bullets_from_f64, unit_bullets, ArithmeticMode, Atom, AtomicLaw, Bullet, Fate, FateTable,
    FirstBulletFate, SpacingModel, SpeedLaw,
};

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("fire times must be strictly increasing (at bullet {index})")]
    FireTimesNotIncreasing { index: i64 },
    #[error("bullet {index} fired before already-resolved events")]
    FiredInPast { index: i64 },
    #[error("speed of bullet {index} must be strictly positive")]
    NonPositiveSpeed { index: i64 },
    #[error("float input given to an exact computation")]
    FloatInExactMode,
    #[error("invalid speed law: {0}")]
    InvalidLaw(String),
    #[error("exponential spacing needs a positive finite rate, got {0}")]
    InvalidSpacing(f64),
    #[error("first speed {0} is not in the support of the speed law")]
    SpeedNotInSupport(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Meeting time and position of `front` and `rear`, where `rear` is fired
/// later. `None` when the rear bullet is not faster.
pub fn collision_time<T: Scalar>(front: &Bullet<T>, rear: &Bullet<T>) -> Option<(T, T)> {
    debug_assert!(front.fire_time < rear.fire_time);
    meeting_point(&front.fire_time, &front.speed, &rear.fire_time, &rear.speed)
}

/// Fates of `bullets` at `horizon`, counting only bullets fired by then.
pub fn run<T: Scalar>(bullets: &[Bullet<T>], horizon: &T) -> Result<FateTable<T>, EngineError> {
    run_with(bullets, Some(horizon), false)
}

/// Fates once every collision among the finite configuration is resolved.
pub fn run_to_quiescence<T: Scalar>(bullets: &[Bullet<T>]) -> Result<FateTable<T>, EngineError> {
    run_with(bullets, None, false)
}

/// As [`run`], optionally asserting no-passing and group consistency around
/// every annihilation.
pub fn run_with<T: Scalar>(
    bullets: &[Bullet<T>],
    horizon: Option<&T>,
    checks: bool,
) -> Result<FateTable<T>, EngineError> {
    for w in bullets.windows(2) {
        if w[1].fire_time <= w[0].fire_time {
            return Err(EngineError::FireTimesNotIncreasing { index: w[1].index });
        }
    }
    let mut sim = Simulation::new().with_checks(checks);
    let mut fired = 0;
    for b in bullets {
        if horizon.is_some_and(|h| b.fire_time > *h) {
            break;
        }
        sim.fire(b.index, b.fire_time.clone(), b.speed.clone())?;
        fired += 1;
    }
    match horizon {
        Some(h) => sim.advance_to(h),
        None => sim.run_to_quiescence(),
    }
    let fates = (0..bullets.len())
        .map(|slot| {
            if slot >= fired {
                return Fate::Alive;
            }
            match sim.collision_of(slot) {
                None => Fate::Alive,
                Some(c) => Fate::Annihilated {
                    time: c.time.clone(),
                    position: c.position.clone(),
                    group: c.members.iter().map(|&m| bullets[m as usize].index).collect(),
                },
            }
        })
        .collect();
    Ok(FateTable {
        horizon: horizon.cloned(),
        bullets: bullets.to_vec(),
        fates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use std::collections::BTreeSet;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn group(ix: &[i64]) -> BTreeSet<i64> {
        ix.iter().copied().collect()
    }

    #[test]
    fn collision_time_examples() {
        let b = |f: i64, s: Rational| Bullet::new(f, r(f, 1), s);
        assert_eq!(collision_time(&b(1, r(1, 1)), &b(2, r(2, 1))), Some((r(3, 1), r(2, 1))));
        assert_eq!(collision_time(&b(1, r(2, 1)), &b(2, r(1, 1))), None);
        assert_eq!(collision_time(&b(1, r(1, 1)), &b(2, r(1, 1))), None);
        assert_eq!(collision_time(&b(2, r(1, 1)), &b(5, r(3, 2))), Some((r(11, 1), r(9, 1))));
    }

    #[test]
    fn triple_collision_example() {
        let table = run(&unit_bullets(&[r(1, 1), r(3, 2), r(3, 1)]), &r(10, 1)).unwrap();
        for idx in 1..=3 {
            assert_eq!(
                table.fate_of(idx),
                Some(&Fate::Annihilated {
                    time: r(4, 1),
                    position: r(3, 1),
                    group: group(&[1, 2, 3])
                })
            );
        }
    }

    #[test]
    fn single_bullet_survives() {
        let table = run(&unit_bullets(&[r(1, 1)]), &r(100, 1)).unwrap();
        assert_eq!(table.survivors(), vec![1]);
    }

    #[test]
    fn shield_trace_example() {
        let speeds = [r(3, 2), r(1, 1), r(1, 1), r(3, 1), r(3, 2)];
        let table = run_with(&unit_bullets(&speeds), Some(&r(12, 1)), true).unwrap();
        assert_eq!(table.survivors(), vec![1]);
        let groups = table.groups();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0], (r(11, 1), r(9, 1), group(&[2, 5])));
        assert_eq!(groups[1], (r(9, 2), r(3, 2), group(&[3, 4])));
    }

    #[test]
    fn rejects_unsorted_fire_times() {
        let bullets = vec![Bullet::new(1, r(2, 1), r(1, 1)), Bullet::new(2, r(1, 1), r(1, 1))];
        assert!(matches!(
            run(&bullets, &r(5, 1)),
            Err(EngineError::FireTimesNotIncreasing { index: 2 })
        ));
    }

    #[test]
    fn unfired_bullets_are_alive() {
        let table = run(&unit_bullets(&[r(1, 1), r(2, 1), r(5, 1)]), &r(2, 1)).unwrap();
        assert_eq!(table.survivors(), vec![1, 2, 3]);
    }

    #[test]
    fn fate_table_json_shape() {
        let table = run(&unit_bullets(&[r(1, 1), r(3, 2)]), &r(10, 1)).unwrap();
        let v = table.to_json();
        assert_eq!(v["horizon"], "10");
        assert_eq!(v["bullets"][0]["fate"], "annihilated");
        assert_eq!(v["bullets"][0]["time"], "4");
        assert_eq!(v["bullets"][1]["speed"], "3/2");
        assert_eq!(v["bullets"][1]["group"], serde_json::json!([1, 2]));
    }
}
