//! Replicate-parallel estimators over the incremental simulation.

use rayon::prelude::*;
use serde::Serialize;

use super::sample::{check_first_speed, BulletSource};
use super::sim::Simulation;
use super::types::{ArithmeticMode, FirstBulletFate, SpacingModel, SpeedLaw};
use super::EngineError;
use crate::rng::{derive_stream, RandomStream};
use crate::scalar::{Rational, Scalar};
use crate::stats::{wilson, Estimate, DEFAULT_LEVEL};

/// Replication settings shared by every Monte Carlo routine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub reps: u64,
    pub master_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Confidence level of reported intervals.
    pub level: f64,
}

impl McConfig {
    pub fn new(reps: u64, master_seed: u64) -> Self {
        Self {
            reps,
            master_seed,
            workers: None,
            level: DEFAULT_LEVEL,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.level = level;
        self
    }

    pub fn estimate(&self, successes: u64) -> Estimate {
        wilson(successes, self.reps, self.level)
    }
}

/// Maps `f` over replicate ids `0..reps`, in parallel, returning results in
/// replicate order. `init` builds per-worker scratch state.
pub fn parallel_map<S, R, I, F>(cfg: &McConfig, init: I, f: F) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Send + Sync,
    F: Fn(&mut S, u64, RandomStream) -> R + Send + Sync,
{
    let seed = cfg.master_seed;
    let job = || {
        (0..cfg.reps)
            .into_par_iter()
            .map_init(&init, |state, rep| f(state, rep, derive_stream(seed, rep)))
            .collect::<Vec<R>>()
    };
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("worker pool")
            .install(job),
        None => job(),
    }
}

/// Fate of `b_1` at `horizon`, reusing `sim` as scratch space.
///
/// Only bullets fired by `horizon` are generated, and generation stops as
/// soon as `b_1` dies: later bullets cannot alter an event that has already
/// happened, so a catch is final for the infinite process.
pub fn first_bullet_fate_in<T: Scalar>(
    sim: &mut Simulation<T>,
    law: &SpeedLaw,
    spacing: SpacingModel,
    first_speed: Option<&Rational>,
    horizon: &T,
    rng: &mut RandomStream,
) -> Result<FirstBulletFate<T>, EngineError> {
    check_first_speed(law, first_speed)?;
    sim.reset();
    let mut source = BulletSource::new(law, spacing, first_speed.map(T::from_rational), rng)?;
    loop {
        let b = source.next_bullet();
        if b.fire_time > *horizon {
            break;
        }
        sim.fire(b.index, b.fire_time, b.speed)?;
        if !sim.is_alive(0) {
            break;
        }
    }
    if sim.is_empty() {
        return Ok(FirstBulletFate::AliveAtHorizon {
            horizon: horizon.clone(),
        });
    }
    sim.advance_to(horizon);
    Ok(match sim.collision_of(0) {
        None => FirstBulletFate::AliveAtHorizon {
            horizon: horizon.clone(),
        },
        Some(c) => FirstBulletFate::CaughtBy {
            catcher: c.members[1..]
                .iter()
                .map(|&m| sim.index_of(m as usize))
                .min()
                .expect("group has a second member"),
            time: c.time.clone(),
            position: c.position.clone(),
        },
    })
}

/// Fate of `b_1` at `horizon` in a freshly sampled process.
pub fn first_bullet_fate<T: Scalar>(
    law: &SpeedLaw,
    spacing: SpacingModel,
    first_speed: Option<&Rational>,
    horizon: &T,
    rng: &mut RandomStream,
) -> Result<FirstBulletFate<T>, EngineError> {
    first_bullet_fate_in(&mut Simulation::new(), law, spacing, first_speed, horizon, rng)
}

/// Per-replicate record of the first bullet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFate {
    pub replicate: u64,
    pub catcher: Option<i64>,
    pub catch_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub horizons: Vec<Rational>,
    pub estimates: Vec<Estimate>,
    pub replicates: Vec<ReplicateFate>,
}

/// Censored survival curve `P[b_1 alive at t]` at each horizon.
///
/// Each replicate is simulated once up to the largest horizon and evaluated
/// at every horizon, so per-replicate indicators are nonincreasing in the
/// horizon.
pub fn survival_curve(
    law: &SpeedLaw,
    spacing: SpacingModel,
    first_speed: Option<&Rational>,
    horizons: &[Rational],
    cfg: &McConfig,
) -> Result<SurvivalCurve, EngineError> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] < w[0]) {
        return Err(EngineError::InvalidArgument("horizons must be nonempty and ascending".into()));
    }
    if cfg.reps == 0 {
        return Err(EngineError::InvalidArgument("reps must be at least 1".into()));
    }
    check_first_speed(law, first_speed)?;
    match ArithmeticMode::for_inputs(law, &spacing) {
        ArithmeticMode::Exact => survival_curve_in::<Rational>(law, spacing, first_speed, horizons, cfg),
        ArithmeticMode::Float => survival_curve_in::<f64>(law, spacing, first_speed, horizons, cfg),
    }
}

fn survival_curve_in<T: Scalar>(
    law: &SpeedLaw,
    spacing: SpacingModel,
    first_speed: Option<&Rational>,
    horizons: &[Rational],
    cfg: &McConfig,
) -> Result<SurvivalCurve, EngineError> {
    let hs: Vec<T> = horizons.iter().map(T::from_rational).collect();
    let last = hs.last().expect("nonempty").clone();
    let outcomes = parallel_map(cfg, Simulation::<T>::new, |sim, rep, mut rng| {
        let fate = first_bullet_fate_in(sim, law, spacing, first_speed, &last, &mut rng)?;
        let alive: Vec<bool> = match &fate {
            FirstBulletFate::AliveAtHorizon { .. } => vec![true; hs.len()],
            FirstBulletFate::CaughtBy { time, .. } => hs.iter().map(|h| time > h).collect(),
        };
        let record = match fate {
            FirstBulletFate::AliveAtHorizon { .. } => ReplicateFate {
                replicate: rep,
                catcher: None,
                catch_time: None,
            },
            FirstBulletFate::CaughtBy { catcher, time, .. } => ReplicateFate {
                replicate: rep,
                catcher: Some(catcher),
                catch_time: Some(time.to_f64()),
            },
        };
        Ok::<_, EngineError>((alive, record))
    });
    let mut counts = vec![0u64; hs.len()];
    let mut replicates = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let (alive, record) = outcome?;
        for (c, a) in counts.iter_mut().zip(alive) {
            *c += a as u64;
        }
        replicates.push(record);
    }
    Ok(SurvivalCurve {
        horizons: horizons.to_vec(),
        estimates: counts.into_iter().map(|c| cfg.estimate(c)).collect(),
        replicates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedOutcome<T> {
    pub survives_plus: bool,
    pub survives_minus: bool,
    pub survives_both: bool,
    pub center_speed: T,
}

/// One draw of the two-sided window around `b_0`.
///
/// `survives_plus` is evaluated on bullets `0..=m` at the time `b_m` is
/// fired; `survives_minus` on bullets `-m..=0` run to quiescence. Randomness
/// is consumed as: center speed, then the `-` side, then the `+` side.
pub fn two_sided_fates_in<T: Scalar>(
    plus_sim: &mut Simulation<T>,
    minus_sim: &mut Simulation<T>,
    law: &SpeedLaw,
    spacing: SpacingModel,
    m: usize,
    center_speed: Option<&Rational>,
    rng: &mut RandomStream,
) -> Result<TwoSidedOutcome<T>, EngineError> {
    if m == 0 {
        return Err(EngineError::InvalidArgument("window half-width must be at least 1".into()));
    }
    check_first_speed(law, center_speed)?;
    let center = {
        let mut source = BulletSource::<T>::new(law, spacing, None, rng)?;
        match center_speed {
            Some(s) => T::from_rational(s),
            None => source.draw_speed(),
        }
    };

    // Minus side: walk backwards from b_0 at time 0.
    let mut minus = Vec::with_capacity(m);
    {
        let mut source = BulletSource::<T>::new(law, spacing, None, rng)?;
        let mut t = T::zero();
        for k in 1..=m as i64 {
            t = t - source.draw_gap();
            let s = source.draw_speed();
            minus.push((-k, t.clone(), s));
        }
    }
    minus_sim.reset();
    for (index, t, s) in minus.into_iter().rev() {
        minus_sim.fire(index, t, s)?;
    }
    let b0_minus = minus_sim.fire(0, T::zero(), center.clone())?;
    minus_sim.run_to_quiescence();
    let survives_minus = minus_sim.is_alive(b0_minus);

    plus_sim.reset();
    let mut source =
        BulletSource::<T>::starting_at(law, spacing, 0, Some(T::zero()), Some(center.clone()), rng)?;
    let mut last_fire = T::zero();
    for _ in 0..=m {
        let b = source.next_bullet();
        last_fire = b.fire_time.clone();
        plus_sim.fire(b.index, b.fire_time, b.speed)?;
        if !plus_sim.is_alive(0) {
            break;
        }
    }
    // When b_0 died early the remaining bullets are irrelevant.
    if plus_sim.is_alive(0) {
        plus_sim.advance_to(&last_fire);
    }
    let survives_plus = plus_sim.is_alive(0);

    Ok(TwoSidedOutcome {
        survives_plus,
        survives_minus,
        survives_both: survives_plus && survives_minus,
        center_speed: center,
    })
}

pub fn two_sided_fates<T: Scalar>(
    law: &SpeedLaw,
    spacing: SpacingModel,
    m: usize,
    center_speed: Option<&Rational>,
    rng: &mut RandomStream,
) -> Result<TwoSidedOutcome<T>, EngineError> {
    two_sided_fates_in(
        &mut Simulation::new(),
        &mut Simulation::new(),
        law,
        spacing,
        m,
        center_speed,
        rng,
    )
}

/// Aggregated two-sided survival frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSidedEstimate {
    pub plus: Estimate,
    pub minus: Estimate,
    pub both: Estimate,
    /// `plus.point * minus.point`.
    pub product: f64,
    /// Half-width for `both - product`, propagated from the three intervals.
    pub independence_half_width: f64,
}

impl TwoSidedEstimate {
    pub fn independence_gap(&self) -> f64 {
        (self.both.point - self.product).abs()
    }
}

pub fn two_sided_estimate(
    law: &SpeedLaw,
    spacing: SpacingModel,
    m: usize,
    center_speed: Option<&Rational>,
    cfg: &McConfig,
) -> Result<TwoSidedEstimate, EngineError> {
    match ArithmeticMode::for_inputs(law, &spacing) {
        ArithmeticMode::Exact => two_sided_estimate_in::<Rational>(law, spacing, m, center_speed, cfg),
        ArithmeticMode::Float => two_sided_estimate_in::<f64>(law, spacing, m, center_speed, cfg),
    }
}

fn two_sided_estimate_in<T: Scalar>(
    law: &SpeedLaw,
    spacing: SpacingModel,
    m: usize,
    center_speed: Option<&Rational>,
    cfg: &McConfig,
) -> Result<TwoSidedEstimate, EngineError> {
    if cfg.reps == 0 {
        return Err(EngineError::InvalidArgument("reps must be at least 1".into()));
    }
    let outcomes = parallel_map(
        cfg,
        || (Simulation::<T>::new(), Simulation::<T>::new()),
        |(plus, minus), _, mut rng| two_sided_fates_in(plus, minus, law, spacing, m, center_speed, &mut rng),
    );
    let (mut p, mut q, mut b) = (0u64, 0u64, 0u64);
    for o in outcomes {
        let o = o?;
        p += o.survives_plus as u64;
        q += o.survives_minus as u64;
        b += o.survives_both as u64;
    }
    let (plus, minus, both) = (cfg.estimate(p), cfg.estimate(q), cfg.estimate(b));
    let product = plus.point * minus.point;
    let product_hw =
        ((minus.point * plus.half_width()).powi(2) + (plus.point * minus.half_width()).powi(2)).sqrt();
    Ok(TwoSidedEstimate {
        plus,
        minus,
        both,
        product,
        independence_half_width: (both.half_width().powi(2) + product_hw.powi(2)).sqrt(),
    })
}

/// Counts paired replicates in which `b_1` survives to `horizon` with speed
/// `s_lo` but not with speed `s_hi`, all other randomness shared. Monotone
/// coupling says this is always zero.
pub fn monotone_coupling_check(
    law: &SpeedLaw,
    spacing: SpacingModel,
    s_lo: &Rational,
    s_hi: &Rational,
    horizon: &Rational,
    cfg: &McConfig,
) -> Result<u64, EngineError> {
    if s_lo > s_hi {
        return Err(EngineError::InvalidArgument("need s_lo <= s_hi".into()));
    }
    check_first_speed(law, Some(s_lo))?;
    check_first_speed(law, Some(s_hi))?;
    match ArithmeticMode::for_inputs(law, &spacing) {
        ArithmeticMode::Exact => coupling_in::<Rational>(law, spacing, s_lo, s_hi, horizon, cfg),
        ArithmeticMode::Float => coupling_in::<f64>(law, spacing, s_lo, s_hi, horizon, cfg),
    }
}

fn coupling_in<T: Scalar>(
    law: &SpeedLaw,
    spacing: SpacingModel,
    s_lo: &Rational,
    s_hi: &Rational,
    horizon: &Rational,
    cfg: &McConfig,
) -> Result<u64, EngineError> {
    let h = T::from_rational(horizon);
    let outcomes = parallel_map(cfg, Simulation::<T>::new, |sim, _, rng| {
        let mut lo_rng = rng.clone();
        let mut hi_rng = rng;
        let lo = first_bullet_fate_in(sim, law, spacing, Some(s_lo), &h, &mut lo_rng)?.survived();
        let hi = first_bullet_fate_in(sim, law, spacing, Some(s_hi), &h, &mut hi_rng)?.survived();
        Ok::<_, EngineError>(lo && !hi)
    });
    outcomes
        .into_iter()
        .try_fold(0u64, |acc, o| o.map(|v| acc + v as u64))
}
