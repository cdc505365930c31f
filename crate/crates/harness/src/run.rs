//! Plan execution and result artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bullet_core::ballistic::{ba_particle_survival, threshold_expo, threshold_unit, BaSpacing, BallisticError};
use bullet_core::engine::{
    run_with, sample_bullets, survival_curve, two_sided_estimate, ArithmeticMode, EngineError, FateTable, McConfig,
    SpacingModel, TwoSidedEstimate,
};
use bullet_core::exact::{self, ExactError, DEFAULT_ENUMERATION_GUARD};
use bullet_core::stats::DEFAULT_LEVEL;
use bullet_core::theory::{self, TheoryError, WalkParams, WindowSpec};
use bullet_core::{derive_stream, BigRational, Estimate, Rational, Scalar};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::HarnessError;
use crate::plan::{Command, ExperimentPlan, Format, DEFAULT_REPS};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest truncation / iteration count accepted by `operator`.
pub const OPERATOR_GUARD: u64 = 100_000;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub wall_time_seconds: f64,
    pub plan: BTreeMap<String, String>,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Tabular output; cells are already rendered.
#[derive(Debug, Default)]
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    Value::Object(
                        self.header
                            .iter()
                            .zip(r)
                            .map(|(h, c)| (h.to_string(), Value::String(c.clone())))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

struct Output {
    summary: Value,
    table: Table,
    replicates: Option<Vec<Value>>,
}

fn big(r: &BigRational) -> String {
    r.to_string()
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn estimate_json(e: &Estimate, seed: u64, level: f64) -> Value {
    json!({
        "point": e.point,
        "lo": e.lo,
        "hi": e.hi,
        "successes": e.successes,
        "reps": e.trials,
        "seed": seed,
        "level": level,
    })
}

fn estimate_cells(e: &Estimate, seed: u64) -> Vec<String> {
    vec![num(e.point), num(e.lo), num(e.hi), e.successes.to_string(), e.trials.to_string(), seed.to_string()]
}

fn engine_err(e: EngineError) -> HarnessError {
    HarnessError::config("parameters", e.to_string())
}

fn exact_err(e: ExactError) -> HarnessError {
    match e {
        ExactError::EnumerationTooLarge { .. } => HarnessError::Guard(e.to_string()),
        ExactError::Engine(e) => engine_err(e),
        ExactError::InvalidArgument(m) => HarnessError::config("parameters", m),
    }
}

fn theory_err(e: TheoryError) -> HarnessError {
    match e {
        TheoryError::GuardExceeded(_) => HarnessError::Guard(e.to_string()),
        other => HarnessError::config("parameters", other.to_string()),
    }
}

fn ballistic_err(e: BallisticError) -> HarnessError {
    match e {
        BallisticError::InvalidP(_) => HarnessError::config("p", e.to_string()),
        other => HarnessError::config("parameters", other.to_string()),
    }
}

struct Ctx<'a> {
    plan: &'a ExperimentPlan,
    seed: u64,
    level: f64,
}

impl Ctx<'_> {
    fn mc(&self) -> Result<McConfig, HarnessError> {
        let mut cfg = McConfig::new(self.plan.count_or("reps", DEFAULT_REPS)?, self.seed).with_level(self.level);
        if self.plan.get("workers").is_some() {
            cfg = cfg.with_workers(self.plan.count("workers")? as usize);
        }
        Ok(cfg)
    }

    fn estimate(&self, e: &Estimate) -> Value {
        estimate_json(e, self.seed, self.level)
    }
}

fn fate_rows<T: Scalar>(table: &FateTable<T>) -> (Value, Table) {
    let v = table.to_json();
    let mut t = Table::new(&["index", "fire_time", "speed", "fate", "time", "position", "group"]);
    let cell = |x: &Value| match x {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    };
    for b in v["bullets"].as_array().into_iter().flatten() {
        t.push(
            ["index", "fire_time", "speed", "fate", "time", "position", "group"]
                .iter()
                .map(|k| cell(b.get(*k).unwrap_or(&Value::Null)))
                .collect(),
        );
    }
    (v, t)
}

fn simulate_in<T: Scalar>(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    let law = plan.speed_law()?;
    let n = plan.count("n")? as usize;
    let first = plan.rational_opt("first_speed")?;
    let mut rng = derive_stream(ctx.seed, 0);
    let bullets = sample_bullets::<T>(&law, plan.spacing(), n, first.as_ref(), &mut rng).map_err(engine_err)?;
    let horizon = match plan.get("horizons") {
        Some(_) => Some(T::from_rational(&plan.rationals("horizons")?[0])),
        None => None,
    };
    let table = run_with(&bullets, horizon.as_ref(), false).map_err(engine_err)?;
    let (mut v, t) = fate_rows(&table);
    v["survivors"] = json!(table.survivors());
    v["seed"] = json!(ctx.seed);
    Ok(Output {
        summary: v,
        table: t,
        replicates: None,
    })
}

fn simulate(ctx: &Ctx) -> Result<Output, HarnessError> {
    let law = ctx.plan.speed_law()?;
    match ArithmeticMode::for_inputs(&law, &ctx.plan.spacing()) {
        ArithmeticMode::Exact => simulate_in::<Rational>(ctx),
        ArithmeticMode::Float => simulate_in::<f64>(ctx),
    }
}

fn survival(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    let horizons = plan.rationals("horizons")?;
    let first = plan.rational_opt("first_speed")?;
    let curve = survival_curve(&plan.speed_law()?, plan.spacing(), first.as_ref(), &horizons, &ctx.mc()?)
        .map_err(engine_err)?;
    let mut table = Table::new(&["horizon", "point", "lo", "hi", "successes", "reps", "seed"]);
    let mut rows = Vec::new();
    for (h, e) in curve.horizons.iter().zip(&curve.estimates) {
        let mut cells = vec![h.to_string()];
        cells.extend(estimate_cells(e, ctx.seed));
        table.push(cells);
        let mut row = ctx.estimate(e);
        row["horizon"] = json!(h.to_string());
        rows.push(row);
    }
    Ok(Output {
        summary: json!({
            "first_speed": first.map(|f| f.to_string()),
            "curve": rows,
        }),
        table,
        replicates: Some(curve.replicates.iter().map(|r| json!(r)).collect()),
    })
}

fn two_sided_output(ctx: &Ctx, est: &TwoSidedEstimate, extra: Value) -> Output {
    let mut table = Table::new(&["quantity", "point", "lo", "hi", "successes", "reps", "seed"]);
    for (name, e) in [("plus", &est.plus), ("minus", &est.minus), ("both", &est.both)] {
        let mut cells = vec![name.to_string()];
        cells.extend(estimate_cells(e, ctx.seed));
        table.push(cells);
    }
    let mut summary = json!({
        "plus": ctx.estimate(&est.plus),
        "minus": ctx.estimate(&est.minus),
        "both": ctx.estimate(&est.both),
        "product": est.product,
        "independence_gap": est.independence_gap(),
        "independence_half_width": est.independence_half_width,
    });
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, extra) {
        s.extend(e);
    }
    Output {
        summary,
        table,
        replicates: None,
    }
}

fn two_sided(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    let center = plan.rational_opt("first_speed")?;
    let m = plan.count("m")? as usize;
    let est = two_sided_estimate(&plan.speed_law()?, plan.spacing(), m, center.as_ref(), &ctx.mc()?)
        .map_err(engine_err)?;
    Ok(two_sided_output(
        ctx,
        &est,
        json!({"m": m, "center_speed": center.map(|c| c.to_string())}),
    ))
}

fn qn(ctx: &Ctx) -> Result<Output, HarnessError> {
    let n = ctx.plan.count("n")? as usize;
    let dist = exact::qn(n);
    let mut table = Table::new(&["k", "q", "q_float"]);
    for (k, q) in dist.mass.iter().enumerate() {
        if !num_traits::Zero::is_zero(q) {
            table.push(vec![k.to_string(), big(q), num(q.to_f64())]);
        }
    }
    let mut summary = json!({
        "n": n,
        "mass": dist.mass.iter().map(big).collect::<Vec<_>>(),
        "mean": big(&dist.mean()),
    });
    if ctx.plan.get("reps").is_some() {
        let emp = exact::qn_empirical(n, &ctx.mc()?).map_err(exact_err)?;
        summary["empirical"] = json!({
            "counts": emp.counts,
            "reps": emp.reps,
            "seed": ctx.seed,
            "tv_distance": emp.tv_distance(&dist),
            "mean": emp.mean(),
            "variance": emp.variance(),
        });
    }
    Ok(Output {
        summary,
        table,
        replicates: None,
    })
}

fn nazarov(ctx: &Ctx) -> Result<Output, HarnessError> {
    let m = ctx.plan.count("m")? as usize;
    if m == 0 {
        return Err(HarnessError::config("m", "must be at least 1"));
    }
    let v = exact::nazarov(m);
    let mut table = Table::new(&["m", "value", "value_float"]);
    table.push(vec![m.to_string(), big(&v), num(v.to_f64())]);
    Ok(Output {
        summary: json!({"m": m, "value": big(&v), "value_float": v.to_f64()}),
        table,
        replicates: None,
    })
}

fn oracle(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    let law = plan.atomic_law()?;
    let first = plan.rational("first_speed")?;
    let n = plan.count("n")? as usize;
    let horizon = plan.rationals("horizons")?[0];
    let guard = plan.count_or("guard", DEFAULT_ENUMERATION_GUARD)?;
    let p = exact::brute_force_first_survival(&law, &first, n, &horizon, guard).map_err(exact_err)?;
    let mut table = Table::new(&["n", "horizon", "probability", "probability_float"]);
    table.push(vec![n.to_string(), horizon.to_string(), big(&p), num(p.to_f64())]);
    Ok(Output {
        summary: json!({
            "n": n,
            "first_speed": first.to_string(),
            "horizon": horizon.to_string(),
            "probability": big(&p),
            "probability_float": p.to_f64(),
        }),
        table,
        replicates: None,
    })
}

fn window(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    if plan.get("catcher_speed").is_some() {
        let spec = WindowSpec::new(
            plan.rational("catcher_speed")?,
            plan.rational("caught_speed")?,
            plan.count("catcher_index")? as i64,
            plan.count("caught_index")? as i64,
            plan.rational("max_speed")?,
        )
        .map_err(theory_err)?;
        let (t0, x0) = theory::collision_point(&spec);
        let a = theory::window_a(&spec);
        let mut table = Table::new(&["t0", "x0", "a"]);
        table.push(vec![t0.to_string(), x0.to_string(), a.to_string()]);
        return Ok(Output {
            summary: json!({"t0": t0.to_string(), "x0": x0.to_string(), "a": a}),
            table,
            replicates: None,
        });
    }
    let speeds = plan.rationals("speeds")?;
    let m_max = plan.count_or("m", 50)? as i64;
    if m_max < 2 {
        return Err(HarnessError::config("m", "must be at least 2"));
    }
    let mut table = Table::new(&["m", "h"]);
    for m in 2..=m_max {
        table.push(vec![m.to_string(), theory::h_of_m(&speeds, m).map_err(theory_err)?.to_string()]);
    }
    let m0 = theory::m_zero(&speeds).map_err(theory_err)?;
    let h0 = theory::h_of_m(&speeds, m0).map_err(theory_err)?;
    Ok(Output {
        summary: json!({"m0": m0, "h_m0": h0, "m_max": m_max}),
        table,
        replicates: None,
    })
}

fn epsilon(ctx: &Ctx) -> Result<Output, HarnessError> {
    let law = ctx.plan.atomic_law()?;
    let speeds = law.speeds();
    let m0 = theory::m_zero(&speeds).map_err(theory_err)?;
    let h0 = theory::h_of_m(&speeds, m0).map_err(theory_err)?;
    let eps = theory::epsilon_event(&law).map_err(theory_err)?;
    let probs: Vec<BigRational> = law.probs().iter().map(BigRational::from_rational).collect();
    let holds = theory::threshold_holds(&probs[0], &probs[1], &eps);
    let mut table = Table::new(&["m0", "h_m0", "epsilon", "epsilon_float", "threshold_holds"]);
    table.push(vec![m0.to_string(), h0.to_string(), big(&eps), num(eps.to_f64()), holds.to_string()]);
    Ok(Output {
        summary: json!({
            "m0": m0,
            "h_m0": h0,
            "epsilon": big(&eps),
            "epsilon_float": eps.to_f64(),
            "threshold_holds": holds,
        }),
        table,
        replicates: None,
    })
}

fn threshold(ctx: &Ctx) -> Result<Output, HarnessError> {
    let mode = ctx.plan.text("mode").unwrap_or("unit");
    let root = if mode == "expo" { threshold_expo() } else { threshold_unit() };
    let mut table = Table::new(&["mode", "lo", "hi", "root"]);
    table.push(vec![mode.to_string(), big(&root.lo), big(&root.hi), num(root.root())]);
    Ok(Output {
        summary: json!({
            "mode": mode,
            "root": root.root(),
            "bracket": [root.lo.to_f64(), root.hi.to_f64()],
            "bracket_exact": [big(&root.lo), big(&root.hi)],
        }),
        table,
        replicates: None,
    })
}

fn walk(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    let w = WalkParams::new(plan.float("left")?, plan.float("right")?, plan.float("lazy")?)
        .map_err(|e| HarnessError::config("left/right/lazy", e.to_string()))?;
    let extinction = theory::walk_extinction(&w);
    let mut table = Table::new(&["x", "pgf"]);
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        table.push(vec![num(x), num(theory::walk_return_pgf(&w, x).map_err(theory_err)?)]);
    }
    let mut summary = json!({"extinction": extinction});
    if plan.get("reps").is_some() || plan.get("max_steps").is_some() {
        let steps = plan.count_or("max_steps", 10_000)?;
        let est = theory::walk_simulate(&w, steps, &ctx.mc()?).map_err(theory_err)?;
        let mut e = ctx.estimate(&est);
        e["max_steps"] = json!(steps);
        summary["simulated"] = e;
    }
    Ok(Output {
        summary,
        table,
        replicates: None,
    })
}

fn operator(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    let (p1, p2, eps) = (plan.rational("p1")?, plan.rational("p2")?, plan.rational("eps")?);
    let iterations = plan.count_or("iterations", 1000)?;
    let trunc = plan.count_or("trunc", 1000)?;
    if iterations > OPERATOR_GUARD || trunc > OPERATOR_GUARD {
        return Err(HarnessError::Guard(format!(
            "iterations and trunc are limited to {OPERATOR_GUARD}"
        )));
    }
    let it = theory::iterate_a(&p1.to_f64(), &p2.to_f64(), &eps.to_f64(), iterations as usize, trunc as usize)
        .map_err(theory_err)?;
    let escape = theory::fixed_point_escape(
        &BigRational::from_rational(&p1),
        &BigRational::from_rational(&p2),
        &BigRational::from_rational(&eps),
    );
    let mut table = Table::new(&["k", "tail"]);
    for (k, t) in it.last().tail().iter().enumerate() {
        table.push(vec![k.to_string(), num(*t)]);
    }
    Ok(Output {
        summary: json!({
            "iterations": iterations,
            "trunc": trunc,
            "overflow": it.overflow,
            "escape_exact": big(&escape),
            "escape": escape.to_f64(),
            "threshold_holds": theory::threshold_holds(&p1, &p2, &eps),
        }),
        table,
        replicates: None,
    })
}

fn ballistic(ctx: &Ctx) -> Result<Output, HarnessError> {
    let plan = ctx.plan;
    let p = plan.rational("p")?;
    let m = plan.count("m")? as usize;
    let spacing = match plan.spacing() {
        SpacingModel::Unit => BaSpacing::Unit,
        SpacingModel::Exponential { rate: 1.0 } => BaSpacing::PoissonUnit,
        SpacingModel::Exponential { .. } => {
            return Err(HarnessError::config("spacing", "particle spacing must be unit or exp:1"))
        }
    };
    let v: i64 = match plan.text("velocity") {
        None => 0,
        Some(s) => s
            .parse()
            .map_err(|_| HarnessError::config("velocity", format!("expected -1, 0 or 1, got {s:?}")))?,
    };
    if p == Rational::from_integer(0) && v == 0 {
        return Err(HarnessError::config("p", "p = 0 leaves no velocity-0 particle to condition on"));
    }
    let est = ba_particle_survival(&p, v, m, spacing, &ctx.mc()?).map_err(ballistic_err)?;
    Ok(two_sided_output(ctx, &est, json!({"p": p.to_string(), "m": m, "velocity": v})))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn csv_bytes(table: &Table) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Executes `plan`, writing its artifacts into `plan.out`.
pub fn run_plan(plan: &ExperimentPlan) -> Result<RunManifest, HarnessError> {
    let start = Instant::now();
    let ctx = Ctx {
        plan,
        seed: plan.seed(),
        level: plan.float_opt("level")?.unwrap_or(DEFAULT_LEVEL),
    };
    let output = match plan.command {
        Command::Simulate => simulate(&ctx),
        Command::Survival => survival(&ctx),
        Command::TwoSided => two_sided(&ctx),
        Command::Qn => qn(&ctx),
        Command::Nazarov => nazarov(&ctx),
        Command::Oracle => oracle(&ctx),
        Command::Window => window(&ctx),
        Command::Epsilon => epsilon(&ctx),
        Command::Threshold => threshold(&ctx),
        Command::Walk => walk(&ctx),
        Command::Operator => operator(&ctx),
        Command::Ballistic => ballistic(&ctx),
    }?;

    let dir: &PathBuf = &plan.out;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files = vec!["summary.json".to_string()];
    let mut summary = output.summary;
    summary["command"] = json!(plan.command.name());
    write_file(dir, "summary.json", &json_bytes(&summary))?;
    match plan.format {
        Format::Csv => {
            write_file(dir, "curve.csv", &csv_bytes(&output.table))?;
            files.push("curve.csv".into());
        }
        Format::Json => {
            write_file(dir, "curve.json", &json_bytes(&output.table.to_json()))?;
            files.push("curve.json".into());
        }
    }
    if plan.flag("replicates") {
        if let Some(lines) = output.replicates {
            let mut buf = Vec::new();
            for line in lines {
                serde_json::to_writer(&mut buf, &line).expect("serializable");
                buf.push(b'\n');
            }
            write_file(dir, "replicates.jsonl", &buf)?;
            files.push("replicates.jsonl".into());
        }
    }
    files.push("manifest.json".into());
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        command: plan.command.name().to_string(),
        config_hash: plan.config_hash(),
        master_seed: ctx.seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        plan: plan.canonical(),
        files,
        summary,
    };
    write_file(dir, "manifest.json", &json_bytes(&manifest))?;
    Ok(manifest)
}
