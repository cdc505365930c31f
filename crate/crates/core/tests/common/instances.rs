//! Random finite configurations for oracle comparisons.

use bullet_core::engine::Bullet;
use bullet_core::{RandomStream, Rational};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Speed sets on which unit-spaced bullets often meet three or more at once.
const DEGENERATE: &[&[(i64, i64)]] = &[
    &[(1, 1), (3, 2), (3, 1)],
    &[(1, 1), (2, 1), (3, 1)],
    &[(1, 1), (2, 1), (4, 1)],
    &[(1, 1), (3, 2), (2, 1), (3, 1)],
    &[(1, 2), (1, 1), (2, 1)],
];

pub struct Instance {
    pub bullets: Vec<Bullet<Rational>>,
    pub horizon: Option<Rational>,
}

pub fn random_instance(rng: &mut RandomStream) -> Instance {
    let n = rng.random_range(1..=10usize);
    let speeds: Vec<Rational> = if rng.random_bool(0.5) {
        DEGENERATE.choose(rng).unwrap().iter().map(|&(p, q)| Rational::new(p, q)).collect()
    } else {
        let k = rng.random_range(1..=4usize);
        let mut s: Vec<Rational> = Vec::new();
        while s.len() < k {
            let v = Rational::new(rng.random_range(1..=6), rng.random_range(1..=3));
            if !s.contains(&v) {
                s.push(v);
            }
        }
        s
    };
    let unit = rng.random_bool(0.75);
    let mut t = Rational::from_integer(0);
    let bullets = (1..=n as i64)
        .map(|i| {
            t = if unit {
                Rational::from_integer(i)
            } else {
                t + *[Rational::new(1, 2), Rational::from_integer(1), Rational::from_integer(2)]
                    .choose(rng)
                    .unwrap()
            };
            Bullet::new(i, t, *speeds.choose(rng).unwrap())
        })
        .collect();
    let horizon = if rng.random_bool(0.3) {
        None
    } else {
        Some(Rational::new(rng.random_range(2..=80), 2))
    };
    Instance { bullets, horizon }
}
