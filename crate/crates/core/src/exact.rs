//! Exact combinatorics of finite bullet processes.
//!
//! The survivor-count law `q_n` of `n` bullets with continuous i.i.d. speeds
//! satisfies
//!
//! ```text
//! q_0(0) = 1, q_1(1) = 1, q_1(0) = 0,
//! q_n(k) = q_{n-1}(k-1) / n + (1 - 1/n) q_{n-2}(k)      (n >= 2, 0 <= k <= n)
//! ```
//!
//! Multiplying through by `n!` gives the integer recurrence
//! `Q_n(k) = Q_{n-1}(k-1) + (n-1)^2 Q_{n-2}(k)` with `q_n(k) = Q_n(k) / n!`,
//! which is what [`qn`] evaluates. Probabilities are reduced to lowest terms
//! only when a caller asks for them.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{
    parallel_map, AtomicLaw, BulletSource, EngineError, McConfig, Simulation, SpacingModel, SpeedLaw,
};
use crate::scalar::{BigRational, Rational, Scalar};
use crate::stats::Estimate;

/// Default cap on the number of configurations the enumeration oracle visits.
pub const DEFAULT_ENUMERATION_GUARD: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("enumeration of {configs} configurations exceeds the guard of {guard}")]
    EnumerationTooLarge { configs: u128, guard: u64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Exact law of the number of survivors among `n` bullets.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivorDistribution {
    pub n: usize,
    /// `mass[k] = q_n(k)` for `k = 0..=n`.
    pub mass: Vec<BigRational>,
}

impl SurvivorDistribution {
    pub fn total(&self) -> BigRational {
        self.mass.iter().cloned().sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.mass.iter().map(Scalar::to_f64).collect()
    }

    pub fn mean(&self) -> BigRational {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, q)| q * BigRational::from_i64(k as i64))
            .sum()
    }
}

/// Rows `Q_0, Q_1, ...` of the scaled recurrence, each with its scale `n!`.
#[derive(Debug, Clone)]
pub struct ScaledRows {
    n: usize,
    prev2: Vec<BigUint>,
    prev1: Vec<BigUint>,
    factorial: BigUint,
}

impl Default for ScaledRows {
    fn default() -> Self {
        Self::new()
    }
}

impl ScaledRows {
    pub fn new() -> Self {
        Self {
            n: 0,
            prev2: Vec::new(),
            prev1: Vec::new(),
            factorial: BigUint::one(),
        }
    }
}

impl Iterator for ScaledRows {
    /// `(n, Q_n, n!)`
    type Item = (usize, Vec<BigUint>, BigUint);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.n;
        let row = match n {
            0 => vec![BigUint::one()],
            1 => vec![BigUint::zero(), BigUint::one()],
            _ => {
                let weight = BigUint::from((n as u64 - 1) * (n as u64 - 1));
                (0..=n)
                    .map(|k| {
                        let mut v = if k >= 1 {
                            self.prev1.get(k - 1).cloned().unwrap_or_default()
                        } else {
                            BigUint::zero()
                        };
                        if let Some(q) = self.prev2.get(k) {
                            if !q.is_zero() {
                                v += q * &weight;
                            }
                        }
                        v
                    })
                    .collect()
            }
        };
        if n >= 1 {
            self.factorial *= BigUint::from(n as u64);
        }
        self.prev2 = std::mem::replace(&mut self.prev1, row.clone());
        self.n += 1;
        Some((n, row, self.factorial.clone()))
    }
}

/// Exact survivor-count distribution for `n` bullets.
pub fn qn(n: usize) -> SurvivorDistribution {
    let (_, row, scale) = ScaledRows::new().nth(n).expect("rows are unbounded");
    let scale = num_bigint::BigInt::from(scale);
    SurvivorDistribution {
        n,
        mass: row
            .into_iter()
            .map(|q| BigRational::new(num_bigint::BigInt::from(q), scale.clone()))
            .collect(),
    }
}

/// `prod_{i=1}^m (1 - 1/(2i))`, the probability that none of `2m` bullets
/// survive.
pub fn nazarov(m: usize) -> BigRational {
    let mut odd = num_bigint::BigInt::one();
    let mut even = num_bigint::BigInt::one();
    for i in 1..=m as u64 {
        odd *= 2 * i - 1;
        even *= 2 * i;
    }
    BigRational::new(odd, even)
}

/// Exact `P[b_1 alive at horizon]` for `n` unit-spaced bullets, enumerating
/// every speed assignment of `b_2..b_n`.
pub fn brute_force_first_survival(
    law: &AtomicLaw,
    first_speed: &Rational,
    n: usize,
    horizon: &Rational,
    guard: u64,
) -> Result<BigRational, ExactError> {
    if n == 0 {
        return Err(ExactError::InvalidArgument("need at least one bullet".into()));
    }
    if law.prob_of(first_speed).is_none() {
        return Err(EngineError::SpeedNotInSupport(first_speed.to_string()).into());
    }
    let k = law.atoms().len();
    let configs = (k as u128).checked_pow(n as u32 - 1).unwrap_or(u128::MAX);
    if configs > guard as u128 {
        return Err(ExactError::EnumerationTooLarge { configs, guard });
    }
    // Integer weights over the common denominator keep the sum exact without
    // reducing a rational per configuration.
    let denom = law.total_weight();
    let weights: Vec<u64> = law
        .atoms()
        .iter()
        .map(|a| (*a.prob.numer() as u64) * (denom / *a.prob.denom() as u64))
        .collect();
    let speeds = law.speeds();
    let rest = n - 1;

    let survive_weight = |assignment: &[usize], sim: &mut Simulation<Rational>| -> Result<BigUint, EngineError> {
        sim.reset();
        sim.fire(1, Rational::from_integer(1), *first_speed)?;
        for (j, &a) in assignment.iter().enumerate() {
            let t = Rational::from_integer(j as i64 + 2);
            if t > *horizon || !sim.is_alive(0) {
                break;
            }
            sim.fire(j as i64 + 2, t, speeds[a])?;
        }
        sim.advance_to(horizon);
        if !sim.is_alive(0) {
            return Ok(BigUint::zero());
        }
        Ok(assignment
            .iter()
            .fold(BigUint::one(), |acc, &a| acc * BigUint::from(weights[a])))
    };

    let total: BigUint = if rest == 0 {
        survive_weight(&[], &mut Simulation::new())?
    } else {
        let partials: Vec<Result<BigUint, EngineError>> = (0..k)
            .into_par_iter()
            .map(|lead| {
                let mut sim = Simulation::new();
                let mut assignment = vec![0usize; rest];
                assignment[0] = lead;
                let mut sum = BigUint::zero();
                loop {
                    sum += survive_weight(&assignment, &mut sim)?;
                    // Odometer over positions 1..rest.
                    let mut pos = rest;
                    loop {
                        if pos == 1 {
                            return Ok(sum);
                        }
                        pos -= 1;
                        assignment[pos] += 1;
                        if assignment[pos] < k {
                            break;
                        }
                        assignment[pos] = 0;
                    }
                }
            })
            .collect();
        partials
            .into_iter()
            .try_fold(BigUint::zero(), |acc, p| p.map(|v| acc + v))?
    };
    let scale = BigUint::from(denom).pow(rest as u32);
    let g = total.gcd(&scale);
    Ok(BigRational::new(
        (total / &g).into(),
        (scale / g).into(),
    ))
}

/// Survivor-count histogram from simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub counts: Vec<u64>,
    pub reps: u64,
}

impl EmpiricalDistribution {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.reps as f64)
            .collect()
    }

    /// Total variation distance to an exact distribution.
    pub fn tv_distance(&self, exact: &SurvivorDistribution) -> f64 {
        let freq = self.frequencies();
        let q = exact.to_f64();
        let len = freq.len().max(q.len());
        0.5 * (0..len)
            .map(|k| (freq.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.frequencies()
            .iter()
            .enumerate()
            .map(|(k, f)| k as f64 * f)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.frequencies()
            .iter()
            .enumerate()
            .map(|(k, f)| (k as f64 - mu).powi(2) * f)
            .sum()
    }
}

fn survivors_of_uniform_run(
    sim: &mut Simulation<f64>,
    n: usize,
    first_speed: Option<f64>,
    rng: &mut crate::rng::RandomStream,
) -> Result<usize, EngineError> {
    let law = SpeedLaw::ContinuousUniform01;
    sim.reset();
    let mut source = BulletSource::new(&law, SpacingModel::Unit, first_speed, rng)?;
    for _ in 0..n {
        let b = source.next_bullet();
        sim.fire(b.index, b.fire_time, b.speed)?;
    }
    sim.run_to_quiescence();
    Ok(sim.survivor_count())
}

/// Survivor counts of `n` bullets with uniform(0, 1) speeds, each replicate
/// run until no collision remains.
pub fn qn_empirical(n: usize, cfg: &McConfig) -> Result<EmpiricalDistribution, ExactError> {
    if n == 0 || cfg.reps == 0 {
        return Err(ExactError::InvalidArgument("need n >= 1 and reps >= 1".into()));
    }
    let outcomes = parallel_map(cfg, Simulation::<f64>::new, |sim, _, mut rng| {
        survivors_of_uniform_run(sim, n, None, &mut rng)
    });
    let mut counts = vec![0u64; n + 1];
    for o in outcomes {
        counts[o?] += 1;
    }
    Ok(EmpiricalDistribution {
        counts,
        reps: cfg.reps,
    })
}

/// Fraction of replicates of `2m` uniform(0, 1) bullets in which nobody
/// survives, with the first speed forced to `s` when given.
pub fn em_s_estimate(m: usize, s: Option<f64>, cfg: &McConfig) -> Result<Estimate, ExactError> {
    if m == 0 || cfg.reps == 0 {
        return Err(ExactError::InvalidArgument("need m >= 1 and reps >= 1".into()));
    }
    if let Some(s) = s {
        if !(s > 0.0 && s <= 1.0) {
            return Err(ExactError::InvalidArgument(format!("first speed {s} outside (0, 1]")));
        }
    }
    let outcomes = parallel_map(cfg, Simulation::<f64>::new, |sim, _, mut rng| {
        survivors_of_uniform_run(sim, 2 * m, s, &mut rng)
    });
    let mut none_left = 0u64;
    for o in outcomes {
        none_left += (o? == 0) as u64;
    }
    Ok(cfg.estimate(none_left))
}
