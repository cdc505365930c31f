mod common;

use std::collections::{BTreeMap, BTreeSet};

use bullet_core::ballistic::{ba_particle_survival, particle_fates, BaSpacing};
use bullet_core::engine::{run, run_to_quiescence, two_sided_estimate, AtomicLaw, Fate, McConfig, SpacingModel, SpeedLaw};
use bullet_core::exact::em_s_estimate;
use bullet_core::theory::{apply_operator_a, SupportDistribution};
use bullet_core::{derive_stream, Rational};
use common::instances::random_instance;
use proptest::prelude::*;
use rand::Rng;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_bullet_is_accounted_for(seed in any::<u64>()) {
        let inst = random_instance(&mut derive_stream(seed, 0));
        let table = run_to_quiescence(&inst.bullets).unwrap();
        let mut groups: BTreeMap<BTreeSet<i64>, usize> = BTreeMap::new();
        for (b, f) in inst.bullets.iter().zip(&table.fates) {
            if let Fate::Annihilated { time, position, group } = f {
                prop_assert!(group.len() >= 2 && group.contains(&b.index));
                prop_assert!(*time > b.fire_time);
                prop_assert_eq!(b.position_at(time), *position);
                *groups.entry(group.clone()).or_default() += 1;
            }
        }
        for (g, seen) in groups {
            prop_assert_eq!(g.len(), seen);
        }
        // Survivors never meet after the last collision.
        let survivors: Vec<_> = inst.bullets.iter().zip(&table.fates).filter(|(_, f)| f.is_alive()).map(|(b, _)| b).collect();
        for w in survivors.windows(2) {
            prop_assert!(w[1].speed <= w[0].speed);
        }
    }

    #[test]
    fn earlier_horizon_is_a_prefix(seed in any::<u64>(), h1 in 1i64..40, dh in 0i64..40) {
        let inst = random_instance(&mut derive_stream(seed, 1));
        let (h1, h2) = (r(h1, 2), r(h1 + dh, 2));
        let early = run(&inst.bullets, &h1).unwrap();
        let late = run(&inst.bullets, &h2).unwrap();
        for (a, b) in early.fates.iter().zip(&late.fates) {
            match (a, b) {
                (Fate::Annihilated { .. }, _) => prop_assert_eq!(a, b),
                (Fate::Alive, Fate::Annihilated { time, .. }) => prop_assert!(*time > h1),
                _ => {}
            }
        }
    }

    #[test]
    fn operator_preserves_dominance(seed in any::<u64>(), p1 in 0.0f64..0.5, p2 in 0.0f64..0.5, eps in 0.0f64..1.0) {
        let mut rng = derive_stream(seed, 2);
        let k = 30;
        let mut lower: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let of = rng.random::<f64>() * 0.2;
        let total: f64 = lower.iter().sum::<f64>() + of;
        lower.iter_mut().for_each(|m| *m /= total);
        // Push a fraction of each atom one step up.
        let mut upper = vec![0.0; k];
        let mut upper_of = of / total;
        for v in 0..k {
            let moved = lower[v] * rng.random::<f64>();
            upper[v] += lower[v] - moved;
            if v + 1 < k { upper[v + 1] += moved } else { upper_of += moved }
        }
        let lo = SupportDistribution { mass: lower, overflow: of / total };
        let hi = SupportDistribution { mass: upper, overflow: upper_of };
        prop_assert!(hi.dominates(&lo, &1e-12));
        let (a_lo, a_hi) = (apply_operator_a(&lo, &p1, &p2, &eps), apply_operator_a(&hi, &p1, &p2, &eps));
        prop_assert!(a_hi.dominates(&a_lo, &1e-12));
        prop_assert!((a_hi.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn nazarov_event_probability_decreases_in_first_speed() {
    let cfg = McConfig::new(20_000, 8);
    let slow = em_s_estimate(2, Some(0.3), &cfg).unwrap();
    let fast = em_s_estimate(2, Some(0.8), &cfg).unwrap();
    assert!(slow.point >= fast.point, "{slow:?} vs {fast:?}");
    let free = em_s_estimate(3, None, &McConfig::new(100_000, 9)).unwrap();
    assert!(free.contains(5.0 / 16.0), "{free:?}");
}

/// Particle annihilation by global earliest meeting, in the original
/// (position, velocity) picture.
fn naive_particles(particles: &[(Rational, Rational)]) -> Vec<Option<BTreeSet<i64>>> {
    let mut order: Vec<usize> = (0..particles.len()).collect();
    order.sort_by_key(|&i| particles[i].0);
    let p: Vec<_> = order.iter().map(|&i| particles[i]).collect();
    let n = p.len();
    let mut alive = vec![true; n];
    let mut fate = vec![None; n];
    loop {
        let mut best: Option<Rational> = None;
        for a in 0..n {
            for b in a + 1..n {
                if alive[a] && alive[b] && p[a].1 > p[b].1 {
                    let t = (p[b].0 - p[a].0) / (p[a].1 - p[b].1);
                    if best.is_none_or(|x| t < x) {
                        best = Some(t);
                    }
                }
            }
        }
        let Some(t) = best else { return fate };
        let mut at: BTreeMap<Rational, Vec<usize>> = BTreeMap::new();
        for a in (0..n).filter(|&a| alive[a]) {
            at.entry(p[a].0 + p[a].1 * t).or_default().push(a);
        }
        for members in at.into_values().filter(|m| m.len() > 1) {
            let g: BTreeSet<i64> = members.iter().map(|&a| a as i64 + 1).collect();
            for a in members {
                alive[a] = false;
                fate[a] = Some(g.clone());
            }
        }
    }
}

#[test]
fn particle_picture_matches_bullet_picture() {
    let velocity_sets: [&[Rational]; 3] = [
        &[r(-1, 1), r(0, 1), r(1, 1)],
        &[r(-2, 1), r(-1, 2), r(1, 1), r(3, 1)],
        &[r(1, 1), r(2, 1), r(5, 2)],
    ];
    let mut multi = 0;
    for rep in 0..2000 {
        let mut rng = derive_stream(31, rep);
        let vs = velocity_sets[rep as usize % 3];
        let n = rng.random_range(1..=12);
        let mut x = r(0, 1);
        let particles: Vec<_> = (0..n)
            .map(|_| {
                x += r(rng.random_range(1..=3), if rng.random_bool(0.7) { 1 } else { 2 });
                (x, vs[rng.random_range(0..vs.len())])
            })
            .collect();
        let bullets = particle_fates(&particles).unwrap();
        let expected = naive_particles(&particles);
        let got: Vec<Option<BTreeSet<i64>>> = bullets
            .fates
            .iter()
            .map(|f| match f {
                Fate::Alive => None,
                Fate::Annihilated { group, .. } => Some(group.clone()),
            })
            .collect();
        assert_eq!(got, expected, "{particles:?}");
        multi += expected.iter().flatten().filter(|g| g.len() > 2).count();
        // Any order-preserving affine change of velocities keeps the partners.
        let moved: Vec<_> = particles.iter().map(|&(x, v)| (x, v * r(2, 3) + r(5, 1))).collect();
        assert_eq!(particle_fates(&moved).unwrap().fates.iter().map(Fate::is_alive).collect::<Vec<_>>(),
                   bullets.fates.iter().map(Fate::is_alive).collect::<Vec<_>>());
    }
    assert!(multi > 0);
}

#[test]
fn reciprocal_maps_agree_on_paired_seeds() {
    // Shift-then-reciprocal sends velocities {-1, 0, 1} to {1, 1/2, 1/3};
    // the affine map behind the symmetric law gives {3, 3/2, 1}.
    let cfg = McConfig::new(4000, 12);
    let p = r(1, 2);
    let direct = AtomicLaw::new(vec![(r(1, 1), r(1, 4)), (r(1, 2), p), (r(1, 3), r(1, 4))]).unwrap();
    let a = two_sided_estimate(&SpeedLaw::Atomic(direct), SpacingModel::Unit, 200, Some(&r(1, 2)), &cfg).unwrap();
    let b = ba_particle_survival(&p, 0, 200, BaSpacing::Unit, &cfg).unwrap();
    assert_eq!(a.both, b.both);
    assert_eq!(a.plus, b.plus);
}

#[test]
fn moving_particles_survive_less_as_the_window_grows() {
    let cfg = McConfig::new(4000, 13);
    let p = r(1, 2);
    let mut last = 1.0f64;
    for m in [10, 100, 1000] {
        let moving = ba_particle_survival(&p, 1, m, BaSpacing::Unit, &cfg).unwrap();
        let still = ba_particle_survival(&p, 0, m, BaSpacing::Unit, &cfg).unwrap();
        assert!(moving.both.point <= last + moving.both.half_width(), "m = {m}");
        assert!(moving.both.point < still.both.point, "m = {m}");
        last = moving.both.point;
    }
}
