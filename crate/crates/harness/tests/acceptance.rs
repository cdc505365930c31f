//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances, replicate counts and horizons are fixed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use bullet_core::ballistic::{pf_expo, pf_unit, threshold_expo, threshold_unit};
use bullet_core::engine::{
    monotone_coupling_check, run_with, survival_curve, two_sided_estimate, AtomicLaw, McConfig, SpacingModel,
    SpeedLaw,
};
use bullet_core::exact::{nazarov, qn, qn_empirical, ScaledRows};
use bullet_core::theory::{
    epsilon_event, h_of_m, iterate_a, m_zero, threshold_holds, walk_extinction, walk_return_pgf, walk_simulate,
    WalkParams,
};
use bullet_core::{derive_stream, BigRational, Rational};
use bullet_harness::{parse_config, run_plan, ExperimentPlan};
use num_traits::One;
use rand::Rng;

use common::instances::random_instance;
use common::naive::naive_run;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn big(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn law123() -> SpeedLaw {
    SpeedLaw::Atomic(AtomicLaw::uniform(&[r(1, 1), r(2, 1), r(3, 1)]).unwrap())
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn nazarov_identity() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for (n, row, scale) in ScaledRows::new().take(401) {
        if n == 0 || n % 2 == 1 {
            continue;
        }
        let target = nazarov(n / 2);
        // Q(0) / n! == a / b  <=>  Q(0) b == a n!
        let lhs = num_bigint::BigInt::from(row[0].clone()) * target.denom();
        let rhs = target.numer() * num_bigint::BigInt::from(scale);
        if lhs != rhs {
            bad.push(n / 2);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        bad.is_empty() && within(elapsed, Duration::from_secs(1)),
        format!("m = 1..=200, mismatches {bad:?}, {elapsed:.2?}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (mut mismatches, mut multi) = (0, 0);
    for rep in 0..10_000 {
        let inst = random_instance(&mut derive_stream(0xACCE, rep));
        let engine = run_with(&inst.bullets, inst.horizon.as_ref(), true).unwrap();
        multi += engine.groups().iter().filter(|g| g.2.len() >= 3).count();
        if engine != naive_run(&inst.bullets, inst.horizon) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && multi > 0 && within(elapsed, Duration::from_secs(300)),
        format!("10^4 instances, {mismatches} mismatches, {multi} groups of >= 3, {elapsed:.2?}"),
    )
}

fn qn_statistical() -> Outcome {
    let start = Instant::now();
    let emp = qn_empirical(8, &McConfig::new(100_000, 3)).unwrap();
    let tv = emp.tv_distance(&qn(8));
    let elapsed = start.elapsed();
    outcome(
        tv < 0.01 && within(elapsed, Duration::from_secs(120)),
        format!("TV = {tv:.5}, {elapsed:.2?}"),
    )
}

fn epsilon_reproduction() -> Outcome {
    let speeds = [r(1, 1), r(3, 2), r(3, 1)];
    let eps = epsilon_event(&AtomicLaw::uniform(&speeds).unwrap()).unwrap();
    let m0 = m_zero(&speeds).unwrap();
    let h = h_of_m(&speeds, m0).unwrap();
    outcome(
        eps == big(1, 243) && m0 == 2 && h == 2,
        format!("epsilon = {eps}, m0 = {m0}, h(m0) = {h}"),
    )
}

fn threshold_reproduction() -> Outcome {
    let start = Instant::now();
    let unit = threshold_unit();
    let expo = threshold_expo();
    let p = big(3325, 10_000);
    let p1 = (BigRational::one() - &p) / big(2, 1);
    let holds_unit = threshold_holds(&p1, &p, &pf_unit(&p));
    let elapsed = start.elapsed();
    let (u, e) = (unit.root(), expo.root());
    // Sanity of the expo bracket at the same resolution.
    let expo_ok = threshold_holds(&((1.0 - e) / 2.0), &e, &pf_expo(&e));
    outcome(
        (0.3320..=0.3325).contains(&u)
            && holds_unit
            && (e - 0.3313).abs() <= 0.0005
            && expo_ok
            && within(elapsed, Duration::from_secs(1)),
        format!("unit root {u:.6}, holds at .3325: {holds_unit}, expo root {e:.6}, {elapsed:.2?}"),
    )
}

fn walk_consistency() -> Outcome {
    let w = WalkParams::new(0.2, 0.4, 0.4).unwrap();
    let est = walk_simulate(&w, 10_000, &McConfig::new(100_000, 6)).unwrap();
    let ext = walk_extinction(&w);
    let mut rng = derive_stream(66, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u: [f64; 3] = [rng.random(), rng.random::<f64>() + 1e-3, rng.random()];
        let s: f64 = u.iter().sum();
        let w = WalkParams::new(u[0] / s, u[1] / s, 1.0 - u[0] / s - u[1] / s).unwrap();
        let lim = walk_return_pgf(&w, 1.0 - 1e-15).unwrap();
        worst = worst.max((lim - walk_extinction(&w)).abs());
    }
    outcome(
        est.contains(ext) && worst < 1e-9,
        format!(
            "simulated {:.4} [{:.4}, {:.4}] vs {ext}, worst pgf limit gap {worst:.2e}",
            est.point, est.lo, est.hi
        ),
    )
}

fn operator_fixed_point() -> Outcome {
    let mut rng = derive_stream(77, 0);
    let (mut below, mut above, mut worst) = (0, 0, 0.0f64);
    let mut fails = Vec::new();
    while below + above < 10 {
        let p1: f64 = rng.random_range(0.05..0.6);
        let p2: f64 = rng.random_range(0.05..(0.95 - p1));
        let eps: f64 = rng.random_range(0.0..0.3);
        let right = p2 + eps * (1.0 - p1 - p2);
        // Keep clear of the critical line so K = N = 1000 resolves the limit.
        if (p1 - right).abs() < 0.05 {
            continue;
        }
        let supercritical = p1 < right;
        if (supercritical && above == 5) || (!supercritical && below == 5) {
            continue;
        }
        if supercritical { above += 1 } else { below += 1 }
        let it = iterate_a(&p1, &p2, &eps, 1000, 1000).unwrap();
        let expected = 1.0 - (p1 / right).min(1.0);
        let gap = (it.overflow - expected).abs();
        worst = worst.max(gap);
        if gap >= 1e-3 {
            fails.push((p1, p2, eps));
        }
    }
    outcome(fails.is_empty(), format!("5 sub- / 5 supercritical triples, worst gap {worst:.2e}, failing {fails:?}"))
}

fn curve(first: i64, seed: u64) -> Vec<bullet_core::Estimate> {
    let horizons = [r(100, 1), r(1000, 1), r(10_000, 1)];
    survival_curve(&law123(), SpacingModel::Unit, Some(&r(first, 1)), &horizons, &McConfig::new(100_000, seed))
        .unwrap()
        .estimates
}

fn plateau(c: &[bullet_core::Estimate]) -> bool {
    c[2].lo > 0.0 && c[1].point - c[2].point < 0.02
}

fn describe(c: &[bullet_core::Estimate]) -> String {
    c.iter()
        .map(|e| format!("{:.4} [{:.4}, {:.4}]", e.point, e.lo, e.hi))
        .collect::<Vec<_>>()
        .join(", ")
}

fn second_fastest_plateau() -> Outcome {
    let start = Instant::now();
    let c = curve(2, 8);
    let elapsed = start.elapsed();
    let monotone = c.windows(2).all(|w| w[1].point <= w[0].point);
    let drop = c[1].point - c[2].point;
    outcome(
        monotone && c[2].lo > 0.0 && drop < 0.02 && within(elapsed, Duration::from_secs(1800)),
        format!(
            "P(10^2, 10^3, 10^4) = {}; drop 10^3 -> 10^4 = {drop:.4} (needs < 0.02), {elapsed:.2?}",
            describe(&c)
        ),
    )
}

fn slowest_decays() -> Outcome {
    let c = curve(1, 9);
    let monotone = c.windows(2).all(|w| w[1].point <= w[0].point);
    let halved = c[2].point < 0.5 * c[0].point;
    outcome(
        monotone && halved && !plateau(&c),
        format!("P(10^2, 10^3, 10^4) = {}; plateau: {}", describe(&c), plateau(&c)),
    )
}

fn dominance_bridge() -> Outcome {
    let horizons: Vec<Rational> = (1..=100).map(|k| r(k, 1)).collect();
    let c = survival_curve(&law123(), SpacingModel::Unit, Some(&r(2, 1)), &horizons, &McConfig::new(100_000, 10))
        .unwrap();
    let third = 1.0 / 3.0;
    let it = iterate_a(&third, &third, &(1.0 / 243.0), 1000, 1000).unwrap();
    let tail = it.last().tail();
    let mut worst = f64::INFINITY;
    let mut violations = Vec::new();
    for (k, e) in (1..=100).zip(&c.estimates) {
        let slack = e.point - (tail[k] - 3.0 * e.half_width());
        worst = worst.min(slack);
        if slack < 0.0 {
            violations.push(k);
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "k = 1..=100, min slack {worst:.4}; at k = 100: P = {:.4}, tail = {:.4}; violations {violations:?}",
            c.estimates[99].point, tail[100]
        ),
    )
}

fn product_lemma() -> Outcome {
    let est = two_sided_estimate(&law123(), SpacingModel::Unit, 1000, Some(&r(2, 1)), &McConfig::new(100_000, 11))
        .unwrap();
    let gap = est.independence_gap();
    outcome(
        gap < 3.0 * est.independence_half_width,
        format!(
            "P+ {:.4}, P- {:.4}, P+- {:.4}, |gap| {gap:.5} vs 3 hw {:.5}",
            est.plus.point,
            est.minus.point,
            est.both.point,
            3.0 * est.independence_half_width
        ),
    )
}

fn coupling_monotonicity() -> Outcome {
    let mut counts = Vec::new();
    for (lo, hi) in [(1, 2), (2, 3), (1, 3)] {
        let v = monotone_coupling_check(
            &law123(),
            SpacingModel::Unit,
            &r(lo, 1),
            &r(hi, 1),
            &r(1000, 1),
            &McConfig::new(10_000, 12),
        )
        .unwrap();
        counts.push(((lo, hi), v));
    }
    outcome(counts.iter().all(|c| c.1 == 0), format!("violations {counts:?}"))
}

const DATA_FILES: &[&str] = &["summary.json", "curve.csv", "curve.json", "replicates.jsonl"];

fn run_in(config: &str, out: &Path, workers: usize) -> Vec<(String, Vec<u8>)> {
    let text = format!("{config}\nout = {}\nworkers = {workers}\n", out.display());
    let plan = ExperimentPlan::from_settings(&parse_config(&text).unwrap()).unwrap();
    run_plan(&plan).unwrap();
    DATA_FILES
        .iter()
        .filter_map(|f| fs::read(out.join(f)).ok().map(|b| (f.to_string(), b)))
        .collect()
}

fn determinism() -> Outcome {
    let configs = [
        "command = survival\nspeeds = 1,2,3\nfirst_speed = 2\nhorizons = 10,100,1000\nreps = 3000\nseed = 5\nreplicates = true",
        "command = survival\nspeeds = 1,2,3\nhorizons = 5,50\nspacing = exp:1\nreps = 2000\nseed = 6\nreplicates = true",
        "command = two-sided\nspeeds = 1,2,3\nfirst_speed = 2\nm = 100\nreps = 2000\nseed = 7\nformat = json",
        "command = qn\nn = 8\nreps = 5000\nseed = 8",
        "command = walk\nleft = 0.2\nright = 0.4\nlazy = 0.4\nmax_steps = 1000\nreps = 2000\nseed = 9",
        "command = ballistic\np = 1/2\nm = 100\nspacing = exp:1\nreps = 2000\nseed = 10",
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let runs: Vec<_> = [(1, "a"), (1, "b"), (8, "c")]
            .iter()
            .map(|(w, tag)| run_in(cfg, &tmp.path().join(format!("{i}{tag}")), *w))
            .collect();
        if runs[0].is_empty() || runs[0] != runs[1] || runs[0] != runs[2] {
            differing.push(i);
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} experiments x (seed repeat, workers 1 vs 8); differing {differing:?}", configs.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        ("exact identity q_2m(0) = Nazarov product", nazarov_identity),
        ("engine equals naive reference", oracle_equivalence),
        ("empirical q_8 matches recurrence", qn_statistical),
        ("epsilon for S = {1, 3/2, 3}", epsilon_reproduction),
        ("survival thresholds", threshold_reproduction),
        ("walk simulation and generating function", walk_consistency),
        ("operator fixed point escape mass", operator_fixed_point),
        ("second fastest: censored curve plateaus", second_fastest_plateau),
        ("slowest: censored curve decays", slowest_decays),
        ("dominance bridge", dominance_bridge),
        ("two-sided product lemma", product_lemma),
        ("monotone coupling", coupling_monotonicity),
        ("byte-identical outputs", determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let o = check();
        println!("{} [{id:>2}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
