//! Experiment configuration: parsing of the key=value and JSON formats,
//! defaults per experiment and exhaustive validation.
//!
//! A key=value file holds one `key = value` pair per line; `#` starts a
//! comment and lists are comma separated. The JSON form is a flat object
//! with the same keys, where lists are arrays.

use crate::constants::{EscobarParams, TraceParams};
use crate::error::{Result, TslError};
use crate::report::Format;
use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

/// Experiments the driver can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Sharp constants and the composition identity.
    Constants,
    /// Discrete reduction principle and the reduction constant.
    Reduction,
    /// Bubble energies and interaction asymptotics.
    Bubbles,
    /// Steklov spectral gap quotients.
    Steklov,
    /// Neumann operator and dual residual checks.
    Dual,
    /// One-bubble quotient scan.
    QuotientScan,
    /// Multi-bubble fit with the stability report.
    Fit,
    /// Spike construction and the elementary inequalities.
    Sharpness,
    /// Refined embedding with weak-norm remainders.
    Embedding,
}

impl Experiment {
    /// All experiments in documentation order.
    pub const ALL: [Experiment; 9] = [
        Experiment::Constants,
        Experiment::Reduction,
        Experiment::Bubbles,
        Experiment::Steklov,
        Experiment::Dual,
        Experiment::QuotientScan,
        Experiment::Fit,
        Experiment::Sharpness,
        Experiment::Embedding,
    ];

    /// Command line name.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Constants => "constants",
            Experiment::Reduction => "reduction",
            Experiment::Bubbles => "bubbles",
            Experiment::Steklov => "steklov",
            Experiment::Dual => "dual",
            Experiment::QuotientScan => "quotient-scan",
            Experiment::Fit => "fit",
            Experiment::Sharpness => "sharpness",
            Experiment::Embedding => "embedding",
        }
    }

    /// Parses a command line name.
    pub fn from_name(s: &str) -> Option<Experiment> {
        Experiment::ALL.iter().copied().find(|e| e.name() == s)
    }
}

/// Degree-2 direction of the quotient scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// −(y₁y₂ + y₂y₃ + y₃y₁).
    Symmetric,
    /// y₁y₂.
    Y1y2,
}

/// Fully resolved experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Ambient dimension n.
    pub n: usize,
    /// Trace codimension m.
    pub m: usize,
    /// Smoothness order α.
    pub alpha: f64,
    /// Number of bubbles ν.
    pub nu: usize,
    /// Closeness parameters δ.
    pub deltas: Vec<f64>,
    /// Grid points per axis N.
    pub grid_n: usize,
    /// Box half-width L.
    pub box_l: f64,
    /// Positive ε magnitudes of the quotient scan.
    pub epsilons: Vec<f64>,
    /// Interaction parameters μ.
    pub mus: Vec<f64>,
    /// Amplitude of the perturbation in the synthetic fit.
    pub perturbation: f64,
    /// Direction of the quotient scan.
    pub direction: Direction,
    /// Random samples in the spectral gap experiment.
    pub samples: usize,
    /// Largest solid harmonic degree of the Steklov basis.
    pub max_degree: usize,
    /// Number of random fields in the reduction experiment.
    pub fields: usize,
    /// Snapshot of a boundary trace to fit.
    pub input: Option<PathBuf>,
    /// Optional snapshot of the matching Neumann density.
    pub density_input: Option<PathBuf>,
    /// Floor for the ratio r/d in the stability report.
    pub ratio_floor: f64,
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Experiment to run.
    pub experiment: Experiment,
    /// Parameters with defaults filled in.
    pub params: Params,
    /// Output path; standard output when absent.
    pub output: Option<PathBuf>,
    /// Report format.
    pub format: Format,
    /// Seed of every random draw.
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "experiment",
    "n",
    "m",
    "alpha",
    "nu",
    "delta",
    "deltas",
    "grid_n",
    "box_l",
    "epsilons",
    "mu",
    "mus",
    "perturbation",
    "direction",
    "samples",
    "max_degree",
    "fields",
    "input",
    "density_input",
    "ratio_floor",
    "seed",
    "output",
    "format",
];

fn canonical_key(k: &str) -> &str {
    match k {
        "N" => "grid_n",
        "L" => "box_l",
        "delta" => "deltas",
        "mu" => "mus",
        other => other,
    }
}

/// Flat JSON object that keeps duplicate keys.
struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a flat JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

fn json_to_text(v: &Value) -> std::result::Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => {
            let parts: std::result::Result<Vec<String>, String> = items
                .iter()
                .map(|i| match i {
                    Value::Number(n) => Ok(n.to_string()),
                    Value::String(s) => Ok(s.clone()),
                    _ => Err("list entries must be numbers".to_string()),
                })
                .collect();
            Ok(parts?.join(","))
        }
        Value::Null => Err("null is not a valid value".into()),
        Value::Object(_) => Err("nested objects are not allowed".into()),
    }
}

/// Splits the text into (key, value) entries.
fn raw_entries(text: &str, errs: &mut Vec<String>) -> Vec<(String, String)> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return match serde_json::from_str::<Entries>(trimmed) {
            Ok(Entries(items)) => items
                .into_iter()
                .filter_map(|(k, v)| match json_to_text(&v) {
                    Ok(s) => Some((k, s)),
                    Err(e) => {
                        errs.push(format!("key {k}: {e}"));
                        None
                    }
                })
                .collect(),
            Err(e) => {
                errs.push(format!("invalid JSON: {e}"));
                Vec::new()
            }
        };
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
            None => errs.push(format!(
                "line {}: expected key = value, got {line:?}",
                i + 1
            )),
        }
    }
    out
}

struct Raw {
    entries: Vec<(String, String)>,
}

impl Raw {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn parse_num<T: std::str::FromStr>(raw: &Raw, key: &str, errs: &mut Vec<String>) -> Option<T> {
    let v = raw.get(key)?;
    match v.parse::<T>() {
        Ok(x) => Some(x),
        Err(_) => {
            errs.push(format!(
                "{key} = {v:?} is not a valid {}",
                std::any::type_name::<T>()
            ));
            None
        }
    }
}

fn parse_list(raw: &Raw, key: &str, errs: &mut Vec<String>) -> Option<Vec<f64>> {
    let v = raw.get(key)?;
    let items: Vec<&str> = v
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(str::trim)
        .collect();
    let mut out = Vec::new();
    for it in items {
        match it.parse::<f64>() {
            Ok(x) if x.is_finite() => out.push(x),
            _ => {
                errs.push(format!("{key}: entry {it:?} is not a finite number"));
                return None;
            }
        }
    }
    Some(out)
}

/// Parses and validates a configuration, reporting every violation found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut errs = Vec::new();
    let entries = raw_entries(text, &mut errs);
    let mut seen = BTreeSet::new();
    let mut canon = Vec::new();
    for (k, v) in entries {
        let c = canonical_key(&k).to_string();
        if !KEYS.contains(&c.as_str()) {
            errs.push(format!("unknown key {k:?}"));
            continue;
        }
        if !seen.insert(c.clone()) {
            errs.push(format!("duplicate key {k:?}"));
            continue;
        }
        canon.push((c, v));
    }
    let raw = Raw { entries: canon };
    let experiment = match raw.get("experiment") {
        Some(name) => match Experiment::from_name(name) {
            Some(e) => Some(e),
            None => {
                errs.push(format!("unknown experiment {name:?}"));
                None
            }
        },
        None => {
            errs.push("missing key \"experiment\"".into());
            None
        }
    };
    let format = match raw.get("format") {
        Some(f) => match f.parse::<Format>() {
            Ok(f) => f,
            Err(e) => {
                errs.push(e.to_string());
                Format::Json
            }
        },
        None => Format::Json,
    };
    let seed = parse_num::<u64>(&raw, "seed", &mut errs).unwrap_or(0);
    let output = raw.get("output").map(PathBuf::from);
    let exp = experiment.unwrap_or(Experiment::Constants);
    let (def_n, def_m, def_alpha) = match exp {
        Experiment::Reduction => (2, 1, 1.0),
        _ => (3, 1, 1.0),
    };
    let (def_grid, def_l) = match exp {
        Experiment::Reduction => (128, 8.0),
        Experiment::Embedding => (64, 4.0),
        _ => (1024, 80.0),
    };
    let direction = match raw.get("direction") {
        None | Some("symmetric") => Direction::Symmetric,
        Some("y1y2") => Direction::Y1y2,
        Some(other) => {
            errs.push(format!("direction must be symmetric or y1y2, got {other:?}"));
            Direction::Symmetric
        }
    };
    let params = Params {
        n: parse_num(&raw, "n", &mut errs).unwrap_or(def_n),
        m: parse_num(&raw, "m", &mut errs).unwrap_or(def_m),
        alpha: parse_num(&raw, "alpha", &mut errs).unwrap_or(def_alpha),
        nu: parse_num(&raw, "nu", &mut errs).unwrap_or(2),
        deltas: parse_list(&raw, "deltas", &mut errs).unwrap_or_else(|| vec![0.1, 0.05, 0.025]),
        grid_n: parse_num(&raw, "grid_n", &mut errs).unwrap_or(def_grid),
        box_l: parse_num(&raw, "box_l", &mut errs).unwrap_or(def_l),
        epsilons: parse_list(&raw, "epsilons", &mut errs)
            .unwrap_or_else(|| vec![0.01, 0.02, 0.04, 0.08]),
        mus: parse_list(&raw, "mus", &mut errs).unwrap_or_else(|| match exp {
            Experiment::Fit => vec![1e-3],
            _ => vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
        }),
        perturbation: parse_num(&raw, "perturbation", &mut errs).unwrap_or(1e-3),
        direction,
        samples: parse_num(&raw, "samples", &mut errs).unwrap_or(10_000),
        max_degree: parse_num(&raw, "max_degree", &mut errs).unwrap_or(4),
        fields: parse_num(&raw, "fields", &mut errs).unwrap_or(10),
        input: raw.get("input").map(PathBuf::from),
        density_input: raw.get("density_input").map(PathBuf::from),
        ratio_floor: parse_num(&raw, "ratio_floor", &mut errs).unwrap_or(0.0),
    };
    if experiment.is_some() {
        validate(exp, &params, &mut errs);
    }
    if errs.is_empty() {
        Ok(ExperimentConfig {
            experiment: exp,
            params,
            output,
            format,
            seed,
        })
    } else {
        Err(TslError::Config(errs.join("; ")))
    }
}

fn validate(exp: Experiment, p: &Params, errs: &mut Vec<String>) {
    use Experiment::*;
    let needs_grid = matches!(exp, Reduction | Dual | Fit | Embedding);
    if needs_grid {
        if !(p.grid_n.is_power_of_two() && (8..=8192).contains(&p.grid_n)) {
            errs.push(format!(
                "grid_n = {} must be a power of two in [8, 8192]",
                p.grid_n
            ));
        }
        if !(p.box_l.is_finite() && p.box_l > 0.0) {
            errs.push(format!("box_l = {} must be positive", p.box_l));
        }
    }
    let grid_dim = match exp {
        Reduction | Embedding => p.n,
        Dual | Fit => p.n.saturating_sub(1),
        _ => 0,
    };
    if needs_grid && grid_dim >= 1 && (p.grid_n as f64).powi(grid_dim as i32) > (1u64 << 24) as f64
    {
        errs.push(format!(
            "grid of {}^{grid_dim} points exceeds the 2^24 point limit",
            p.grid_n
        ));
    }
    match exp {
        Constants => {
            if let Err(e) = TraceParams::new(p.n, p.m, p.alpha) {
                errs.push(e.to_string());
            }
        }
        Reduction => {
            if let Err(e) = TraceParams::for_reduction(p.n, p.m, p.alpha) {
                errs.push(e.to_string());
            }
            if p.n > 4 {
                errs.push(format!("grid experiments support n <= 4, got {}", p.n));
            }
            if p.m == 0 {
                errs.push("reduction needs m >= 1".into());
            }
            if !(1..=1000).contains(&p.fields) {
                errs.push(format!("fields = {} must lie in [1, 1000]", p.fields));
            }
        }
        Embedding => {
            if let Err(e) = TraceParams::new(p.n, p.m, p.alpha) {
                errs.push(e.to_string());
            } else {
                let (n, m) = (p.n as f64, p.m as f64);
                let q1 = (n - m) / (n - 2.0 * p.alpha);
                let q2 = (n - m) / (n - p.alpha - m / 2.0);
                if !(q1 > q2 && q2 > 1.0) {
                    errs.push(format!(
                        "exponents q1 = {q1}, q2 = {q2} must satisfy q1 > q2 > 1"
                    ));
                }
            }
            if p.n > 4 || p.m == 0 {
                errs.push(format!(
                    "embedding needs n <= 4 and m >= 1, got n = {}, m = {}",
                    p.n, p.m
                ));
            }
        }
        Bubbles => {
            check_escobar(p.n, 8, errs);
            check_positive_list("mus", &p.mus, 1.0, errs);
            if p.mus.len() < 2 {
                errs.push("mus needs at least 2 entries for the slope fit".into());
            }
        }
        Steklov => {
            check_escobar(p.n, 8, errs);
            if !(2..=8).contains(&p.max_degree) {
                errs.push(format!("max_degree = {} must lie in [2, 8]", p.max_degree));
            }
            if !(1..=1_000_000).contains(&p.samples) {
                errs.push(format!("samples = {} must lie in [1, 1000000]", p.samples));
            }
        }
        Dual => {
            check_escobar(p.n, 4, errs);
        }
        QuotientScan => {
            check_escobar(p.n, 6, errs);
            check_positive_list("epsilons", &p.epsilons, 0.1, errs);
            let mut d = p.epsilons.clone();
            d.sort_by(f64::total_cmp);
            d.dedup();
            if d.len() < 4 {
                errs.push(format!(
                    "epsilons needs at least 4 distinct values, got {}",
                    d.len()
                ));
            }
        }
        Fit => {
            check_escobar(p.n, 4, errs);
            if !(1..=8).contains(&p.nu) {
                errs.push(format!("nu = {} must lie in [1, 8]", p.nu));
            }
            if p.input.is_none() {
                check_positive_list("mus", &p.mus, 1.0, errs);
                if p.mus.len() != 1 {
                    errs.push("the synthetic fit takes exactly one mu".into());
                } else if p.mus[0] > 0.0 && p.nu > 1 {
                    let span = (p.nu - 1) as f64 / p.mus[0].sqrt();
                    if span >= 0.5 * p.box_l {
                        errs.push(format!("bubble chain of length {span:.3} does not fit in half the box (L = {})", p.box_l));
                    }
                }
                if !(p.perturbation.is_finite() && p.perturbation >= 0.0 && p.perturbation < 1.0) {
                    errs.push(format!(
                        "perturbation = {} must lie in [0, 1)",
                        p.perturbation
                    ));
                }
            }
            if p.density_input.is_some() && p.input.is_none() {
                errs.push("density_input requires input".into());
            }
            if !(p.ratio_floor.is_finite() && p.ratio_floor >= 0.0) {
                errs.push(format!(
                    "ratio_floor = {} must be nonnegative",
                    p.ratio_floor
                ));
            }
        }
        Sharpness => {
            check_escobar(p.n, 6, errs);
            if !(1..=16).contains(&p.nu) {
                errs.push(format!("nu = {} must lie in [1, 16]", p.nu));
            }
            if p.deltas.is_empty() || p.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
                errs.push(format!(
                    "deltas {:?} must be nonempty and lie in (0, 1)",
                    p.deltas
                ));
            }
        }
    }
}

fn check_escobar(n: usize, max_n: usize, errs: &mut Vec<String>) {
    if let Err(e) = EscobarParams::new(n) {
        errs.push(e.to_string());
    } else if n > max_n {
        errs.push(format!(
            "n = {n} exceeds the supported maximum {max_n} for this experiment"
        ));
    }
}

fn check_positive_list(key: &str, v: &[f64], max: f64, errs: &mut Vec<String>) {
    if v.is_empty() {
        errs.push(format!("{key} must not be empty"));
    }
    for x in v {
        if !(*x > 0.0 && *x <= max) {
            errs.push(format!("{key} entry {x} must lie in (0, {max}]"));
        }
    }
}

/// Renders a configuration as key=value text that parses back to itself.
pub fn to_key_value(cfg: &ExperimentConfig) -> String {
    let p = &cfg.params;
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut s = format!("experiment = {}\n", cfg.experiment.name());
    s += &format!(
        "n = {}\nm = {}\nalpha = {:?}\nnu = {}\n",
        p.n, p.m, p.alpha, p.nu
    );
    s += &format!(
        "deltas = {}\ngrid_n = {}\nbox_l = {:?}\n",
        list(&p.deltas),
        p.grid_n,
        p.box_l
    );
    s += &format!(
        "epsilons = {}\nmus = {}\nperturbation = {:?}\n",
        list(&p.epsilons),
        list(&p.mus),
        p.perturbation
    );
    let dir = match p.direction {
        Direction::Symmetric => "symmetric",
        Direction::Y1y2 => "y1y2",
    };
    s += &format!(
        "direction = {dir}\nsamples = {}\nmax_degree = {}\nfields = {}\n",
        p.samples, p.max_degree, p.fields
    );
    if let Some(i) = &p.input {
        s += &format!("input = {}\n", i.display());
    }
    if let Some(i) = &p.density_input {
        s += &format!("density_input = {}\n", i.display());
    }
    s += &format!("ratio_floor = {:?}\nseed = {}\n", p.ratio_floor, cfg.seed);
    if let Some(o) = &cfg.output {
        s += &format!("output = {}\n", o.display());
    }
    s += &format!(
        "format = {}\n",
        match cfg.format {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_quotient_scan_fills_defaults() {
        let c = parse_config("experiment = quotient-scan\n").unwrap();
        assert_eq!(c.params.grid_n, 1024);
        assert_eq!(c.params.box_l, 80.0);
        assert_eq!(c.params.epsilons.len(), 4);
    }

    #[test]
    fn all_violations_are_listed() {
        let e = parse_config("experiment = quotient-scan\nn = 2\nepsilons = 0.5\nbogus = 1\n")
            .unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bogus"));
        assert!(msg.contains("n = 2"));
        assert!(msg.contains("epsilons"));
    }

    #[test]
    fn json_duplicates_are_rejected() {
        let e = parse_config(r#"{"experiment": "constants", "n": 3, "n": 4}"#).unwrap_err();
        assert!(e.to_string().contains("duplicate"));
    }

    #[test]
    fn key_value_round_trip() {
        let c = parse_config("experiment = fit\nseed = 9\n").unwrap();
        assert_eq!(parse_config(&to_key_value(&c)).unwrap(), c);
    }
}
