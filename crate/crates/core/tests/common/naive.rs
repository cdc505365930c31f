//! Reference simulator: repeatedly find the globally earliest meeting among
//! all living pairs and remove every bullet sharing a position at that time.
//! Quadratic per event and deliberately free of engine code.

use std::collections::{BTreeMap, BTreeSet};

use bullet_core::engine::{Bullet, Fate, FateTable};
use bullet_core::Rational;

fn meet(a: &Bullet<Rational>, b: &Bullet<Rational>) -> Option<Rational> {
    // a fired first; b catches a iff faster.
    if b.speed <= a.speed {
        return None;
    }
    Some((b.speed * b.fire_time - a.speed * a.fire_time) / (b.speed - a.speed))
}

pub fn naive_run(bullets: &[Bullet<Rational>], horizon: Option<Rational>) -> FateTable<Rational> {
    let n = bullets.len();
    let fired = |i: usize| horizon.is_none_or(|h| bullets[i].fire_time <= h);
    let mut alive: Vec<bool> = (0..n).map(fired).collect();
    let mut fates: Vec<Fate<Rational>> = vec![Fate::Alive; n];
    loop {
        let mut best: Option<Rational> = None;
        for i in 0..n {
            for j in i + 1..n {
                if !(alive[i] && alive[j]) {
                    continue;
                }
                if let Some(t) = meet(&bullets[i], &bullets[j]) {
                    if best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                }
            }
        }
        let Some(t) = best else { break };
        if horizon.is_some_and(|h| t > h) {
            break;
        }
        let mut at: BTreeMap<Rational, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            if alive[i] && bullets[i].fire_time <= t {
                at.entry(bullets[i].speed * (t - bullets[i].fire_time)).or_default().push(i);
            }
        }
        for (x, members) in at {
            if members.len() < 2 {
                continue;
            }
            let group: BTreeSet<i64> = members.iter().map(|&i| bullets[i].index).collect();
            for &i in &members {
                alive[i] = false;
                fates[i] = Fate::Annihilated { time: t, position: x, group: group.clone() };
            }
        }
    }
    FateTable { horizon, bullets: bullets.to_vec(), fates }
}
