use std::path::PathBuf;
use std::process::ExitCode;

use bullet_harness::{read_config, run_plan, ExperimentPlan, HarnessError, Settings};
use clap::Parser;

/// Simulate and analyse bullet processes and ballistic annihilation.
///
/// Commands: simulate, survival, two-sided, qn, nazarov, oracle, window,
/// epsilon, threshold, walk, operator, ballistic. Flags override values read
/// from --config.
#[derive(Debug, Parser)]
#[command(name = "annihilate", version)]
struct Cli {
    command: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Speed support, e.g. "1,3/2,3".
    #[arg(long)]
    speeds: Option<String>,
    /// Probabilities matching --speeds, or "uniform".
    #[arg(long)]
    probs: Option<String>,
    #[arg(long)]
    first_speed: Option<String>,
    /// "unit" or "exp:RATE".
    #[arg(long)]
    spacing: Option<String>,
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    trunc: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Threshold spacing: unit or expo.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    level: Option<String>,
    /// Also write per-replicate records.
    #[arg(long)]
    replicates: bool,
    /// Any other parameter as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn settings(cli: Cli) -> Result<Settings, HarnessError> {
    let mut s = match &cli.config {
        Some(path) => read_config(path)?,
        None => Settings::new(),
    };
    s.insert("command".into(), cli.command.clone());
    let flags = [
        ("speeds", cli.speeds),
        ("probs", cli.probs),
        ("first_speed", cli.first_speed),
        ("spacing", cli.spacing),
        ("horizons", cli.horizons),
        ("reps", cli.reps),
        ("seed", cli.seed),
        ("workers", cli.workers),
        ("trunc", cli.trunc),
        ("out", cli.out),
        ("format", cli.format),
        ("n", cli.n),
        ("m", cli.m),
        ("p", cli.p),
        ("mode", cli.mode),
        ("level", cli.level),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.insert(k.into(), v);
        }
    }
    if cli.replicates {
        s.insert("replicates".into(), "true".into());
    }
    for kv in cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| HarnessError::config(kv.clone(), "--set expects KEY=VALUE"))?;
        s.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = settings(cli)
        .and_then(|s| ExperimentPlan::from_settings(&s))
        .and_then(|plan| run_plan(&plan).map(|m| (plan, m)));
    match result {
        Ok((plan, manifest)) => {
            println!("{}", serde_json::to_string(&manifest.summary).expect("serializable"));
            eprintln!("wrote {} files to {}", manifest.files.len(), plan.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("annihilate: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
