//! Validated experiment plans.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bullet_core::engine::{AtomicLaw, SpacingModel, SpeedLaw};
use bullet_core::scalar::parse_rational;
use bullet_core::Rational;
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Simulate,
    Survival,
    TwoSided,
    Qn,
    Nazarov,
    Oracle,
    Window,
    Epsilon,
    Threshold,
    Walk,
    Operator,
    Ballistic,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::Simulate,
        Command::Survival,
        Command::TwoSided,
        Command::Qn,
        Command::Nazarov,
        Command::Oracle,
        Command::Window,
        Command::Epsilon,
        Command::Threshold,
        Command::Walk,
        Command::Operator,
        Command::Ballistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Survival => "survival",
            Command::TwoSided => "two-sided",
            Command::Qn => "qn",
            Command::Nazarov => "nazarov",
            Command::Oracle => "oracle",
            Command::Window => "window",
            Command::Epsilon => "epsilon",
            Command::Threshold => "threshold",
            Command::Walk => "walk",
            Command::Operator => "operator",
            Command::Ballistic => "ballistic",
        }
    }

    /// Keys the command accepts besides the shared ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["speeds", "probs", "first_speed", "spacing", "n", "horizons"],
            Command::Survival => &["speeds", "probs", "first_speed", "spacing", "horizons", "reps"],
            Command::TwoSided => &["speeds", "probs", "first_speed", "spacing", "m", "reps"],
            Command::Qn => &["n", "reps"],
            Command::Nazarov => &["m"],
            Command::Oracle => &["speeds", "probs", "first_speed", "n", "horizons", "guard"],
            Command::Window => &[
                "speeds",
                "m",
                "catcher_speed",
                "caught_speed",
                "catcher_index",
                "caught_index",
                "max_speed",
            ],
            Command::Epsilon => &["speeds", "probs"],
            Command::Threshold => &["mode"],
            Command::Walk => &["left", "right", "lazy", "max_steps", "reps"],
            Command::Operator => &["p1", "p2", "eps", "iterations", "trunc"],
            Command::Ballistic => &["p", "m", "spacing", "reps", "velocity"],
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["speeds", "n"],
            Command::Survival => &["speeds", "horizons"],
            Command::TwoSided => &["speeds", "m"],
            Command::Qn => &["n"],
            Command::Nazarov => &["m"],
            Command::Oracle => &["speeds", "first_speed", "n", "horizons"],
            Command::Window => &[],
            Command::Epsilon => &["speeds"],
            Command::Threshold => &[],
            Command::Walk => &["left", "right", "lazy"],
            Command::Operator => &["p1", "p2", "eps"],
            Command::Ballistic => &["p", "m"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s || c.name().replace('-', "_") == s)
            .ok_or_else(|| HarnessError::config("command", format!("unknown command {s:?}")))
    }
}

const SHARED_KEYS: &[&str] = &["command", "seed", "workers", "out", "format", "level", "replicates"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Rational,
    RationalList,
    Probs,
    Count,
    Float,
    Spacing,
    Text,
    Bool,
}

fn kind_of(key: &str) -> Option<Kind> {
    Some(match key {
        "speeds" | "horizons" => Kind::RationalList,
        "probs" => Kind::Probs,
        "first_speed" | "catcher_speed" | "caught_speed" | "max_speed" | "p" | "p1" | "p2" | "eps" => {
            Kind::Rational
        }
        "n" | "m" | "reps" | "seed" | "workers" | "trunc" | "guard" | "iterations" | "max_steps"
        | "catcher_index" | "caught_index" => Kind::Count,
        "level" | "left" | "right" | "lazy" => Kind::Float,
        "velocity" => Kind::Text,
        "spacing" => Kind::Spacing,
        "command" | "out" | "format" | "mode" => Kind::Text,
        "replicates" => Kind::Bool,
        _ => return None,
    })
}

/// Typed parameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Rational(Rational),
    Rationals(Vec<Rational>),
    /// `None` means uniform.
    Probs(Option<Vec<Rational>>),
    Count(u64),
    Float(f64),
    Spacing(SpacingModel),
    Text(String),
    Bool(bool),
}

impl fmt::Display for Param {
    /// Canonical text form; parsing it back yields the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[Rational]| v.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Param::Rational(r) => write!(f, "{r}"),
            Param::Rationals(v) => f.write_str(&list(v)),
            Param::Probs(None) => f.write_str("uniform"),
            Param::Probs(Some(v)) => f.write_str(&list(v)),
            Param::Count(n) => write!(f, "{n}"),
            Param::Float(x) => write!(f, "{x:?}"),
            Param::Spacing(SpacingModel::Unit) => f.write_str("unit"),
            Param::Spacing(SpacingModel::Exponential { rate }) => write!(f, "exp:{rate:?}"),
            Param::Text(s) => f.write_str(s),
            Param::Bool(b) => write!(f, "{b}"),
        }
    }
}

fn parse_list(key: &str, text: &str) -> Result<Vec<Rational>, HarnessError> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Err(HarnessError::config(key, "empty list"));
    }
    inner
        .split(',')
        .map(|item| {
            parse_rational(item)
                .ok_or_else(|| HarnessError::config(key, format!("expected a rational, got {:?}", item.trim())))
        })
        .collect()
}

fn parse_param(key: &str, kind: Kind, text: &str) -> Result<Param, HarnessError> {
    let bad = |what: &str| HarnessError::config(key, format!("expected {what}, got {text:?}"));
    Ok(match kind {
        Kind::Rational => Param::Rational(parse_rational(text).ok_or_else(|| bad("a rational such as 3/2"))?),
        Kind::RationalList => Param::Rationals(parse_list(key, text)?),
        Kind::Probs if text.trim() == "uniform" => Param::Probs(None),
        Kind::Probs => Param::Probs(Some(parse_list(key, text)?)),
        Kind::Count => Param::Count(text.trim().parse().map_err(|_| bad("a nonnegative integer"))?),
        Kind::Float => {
            let x: f64 = text.trim().parse().map_err(|_| bad("a number"))?;
            if !x.is_finite() {
                return Err(bad("a finite number"));
            }
            Param::Float(x)
        }
        Kind::Spacing => Param::Spacing(match text.trim() {
            "unit" => SpacingModel::Unit,
            s => {
                let rate = s
                    .strip_prefix("exp:")
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| bad("unit or exp:RATE"))?;
                SpacingModel::exponential(rate).map_err(|e| HarnessError::config(key, e.to_string()))?
            }
        }),
        Kind::Text => Param::Text(text.trim().to_string()),
        Kind::Bool => Param::Bool(match text.trim() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            _ => return Err(bad("true or false")),
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub command: Command,
    pub params: BTreeMap<String, Param>,
    pub out: PathBuf,
    pub format: Format,
}

pub const DEFAULT_REPS: u64 = 10_000;

impl ExperimentPlan {
    /// Validates raw settings against the command's schema.
    pub fn from_settings(settings: &Settings) -> Result<Self, HarnessError> {
        let command: Command = settings
            .get("command")
            .ok_or_else(|| HarnessError::config("command", "missing command"))?
            .parse()?;
        let mut params = BTreeMap::new();
        for (key, text) in settings {
            let kind = kind_of(key).ok_or_else(|| HarnessError::config(key, "unknown key"))?;
            if !SHARED_KEYS.contains(&key.as_str()) && !command.keys().contains(&key.as_str()) {
                return Err(HarnessError::config(key, format!("not a parameter of `{command}`")));
            }
            if matches!(key.as_str(), "command" | "out" | "format") {
                continue;
            }
            params.insert(key.clone(), parse_param(key, kind, text)?);
        }
        for key in command.required() {
            if !params.contains_key(*key) {
                return Err(HarnessError::config(*key, format!("required by `{command}`")));
            }
        }
        let format = match settings.get("format").map(String::as_str) {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => return Err(HarnessError::config("format", format!("expected json or csv, got {other:?}"))),
        };
        let plan = Self {
            command,
            params,
            out: PathBuf::from(settings.get("out").map(String::as_str).unwrap_or("out")),
            format,
        };
        plan.validate()?;
        Ok(plan)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.params.contains_key("speeds") {
            self.speed_law()?;
        }
        if let Some(level) = self.float_opt("level")? {
            if !(level > 0.0 && level < 1.0) {
                return Err(HarnessError::config("level", "must lie in (0, 1)"));
            }
        }
        if self.params.contains_key("reps") && self.count("reps")? == 0 {
            return Err(HarnessError::config("reps", "must be at least 1"));
        }
        if self.params.contains_key("horizons") {
            let h = self.rationals("horizons")?;
            if h.iter().any(|x| *x <= Rational::from_integer(0)) || h.windows(2).any(|w| w[1] < w[0]) {
                return Err(HarnessError::config("horizons", "must be positive and ascending"));
            }
            if matches!(self.command, Command::Simulate | Command::Oracle) && h.len() != 1 {
                return Err(HarnessError::config("horizons", "takes a single horizon here"));
            }
        }
        if let Some(Param::Text(mode)) = self.params.get("mode") {
            if mode != "unit" && mode != "expo" {
                return Err(HarnessError::config("mode", format!("expected unit or expo, got {mode:?}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Param> {
        self.params.get(key)
    }

    fn missing(key: &str) -> HarnessError {
        HarnessError::config(key, "missing")
    }

    pub fn rational(&self, key: &str) -> Result<Rational, HarnessError> {
        match self.params.get(key) {
            Some(Param::Rational(r)) => Ok(*r),
            _ => Err(Self::missing(key)),
        }
    }

    pub fn rational_opt(&self, key: &str) -> Result<Option<Rational>, HarnessError> {
        self.params.get(key).map(|_| self.rational(key)).transpose()
    }

    pub fn rationals(&self, key: &str) -> Result<Vec<Rational>, HarnessError> {
        match self.params.get(key) {
            Some(Param::Rationals(v)) => Ok(v.clone()),
            _ => Err(Self::missing(key)),
        }
    }

    pub fn count(&self, key: &str) -> Result<u64, HarnessError> {
        match self.params.get(key) {
            Some(Param::Count(n)) => Ok(*n),
            _ => Err(Self::missing(key)),
        }
    }

    pub fn count_or(&self, key: &str, default: u64) -> Result<u64, HarnessError> {
        if self.params.contains_key(key) {
            self.count(key)
        } else {
            Ok(default)
        }
    }

    pub fn float(&self, key: &str) -> Result<f64, HarnessError> {
        match self.params.get(key) {
            Some(Param::Float(x)) => Ok(*x),
            _ => Err(Self::missing(key)),
        }
    }

    pub fn float_opt(&self, key: &str) -> Result<Option<f64>, HarnessError> {
        self.params.get(key).map(|_| self.float(key)).transpose()
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.params.get(key) {
            Some(Param::Text(s)) => Some(s),
            _ => None,
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        matches!(self.params.get(key), Some(Param::Bool(true)))
    }

    pub fn spacing(&self) -> SpacingModel {
        match self.params.get("spacing") {
            Some(Param::Spacing(s)) => *s,
            _ => SpacingModel::Unit,
        }
    }

    pub fn seed(&self) -> u64 {
        match self.params.get("seed") {
            Some(Param::Count(n)) => *n,
            _ => 0,
        }
    }

    pub fn atomic_law(&self) -> Result<AtomicLaw, HarnessError> {
        let speeds = self.rationals("speeds")?;
        let law = match self.params.get("probs") {
            None | Some(Param::Probs(None)) => AtomicLaw::uniform(&speeds),
            Some(Param::Probs(Some(p))) => {
                if p.len() != speeds.len() {
                    return Err(HarnessError::config(
                        "probs",
                        format!("{} probabilities for {} speeds", p.len(), speeds.len()),
                    ));
                }
                AtomicLaw::new(speeds.into_iter().zip(p.iter().copied()).collect())
            }
            Some(_) => unreachable!("probs always parse to Param::Probs"),
        };
        law.map_err(|e| {
            let key = if e.to_string().contains("probabilit") { "probs" } else { "speeds" };
            HarnessError::config(key, e.to_string())
        })
    }

    pub fn speed_law(&self) -> Result<SpeedLaw, HarnessError> {
        Ok(SpeedLaw::Atomic(self.atomic_law()?))
    }

    /// Parameters as canonical strings, the form recorded in manifests.
    /// Output location and worker count do not influence results and are
    /// left out.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut map: BTreeMap<String, String> = self
            .params
            .iter()
            .filter(|(k, _)| k.as_str() != "workers")
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect();
        map.insert("command".into(), self.command.name().into());
        map.insert(
            "format".into(),
            match self.format {
                Format::Json => "json",
                Format::Csv => "csv",
            }
            .into(),
        );
        map
    }

    /// SHA-256 of the canonical parameters, one `key=value` line each.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical() {
            hasher.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}
