//! Experiment reports and their JSON and CSV serializations.

use crate::error::{Result, TslError};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

/// One point of a reported series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Name of the series the point belongs to.
    pub label: String,
    /// Abscissa.
    pub x: f64,
    /// Ordinate.
    pub y: f64,
}

/// Grid, tolerance and seed information attached to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    /// Grid size and half-width, when a grid was used.
    pub grid: Option<GridInfo>,
    /// Named tolerances used by the experiment.
    pub tolerances: BTreeMap<String, f64>,
    /// Seed of every random draw.
    pub seed: u64,
}

/// Grid description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    /// Points per axis.
    pub n: usize,
    /// Half-width of the periodic box.
    pub l: f64,
}

/// Outcome classification of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// All checks passed.
    Ok,
    /// Results were computed but flagged as inconclusive.
    Inconclusive,
}

/// Serializable experiment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Experiment name.
    pub experiment: String,
    /// Parameters that produced the report.
    pub params: BTreeMap<String, Value>,
    /// Plot-ready data.
    pub series: Vec<SeriesPoint>,
    /// Derived scalars: limits, slopes, constants and check flags.
    pub derived: BTreeMap<String, Value>,
    /// Grid, tolerances and seed.
    pub provenance: Provenance,
    /// Outcome classification.
    pub status: Status,
    /// Human-readable notes attached to flagged results.
    pub notes: Vec<String>,
}

impl ExperimentReport {
    /// An empty report for the named experiment.
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            params: BTreeMap::new(),
            series: Vec::new(),
            derived: BTreeMap::new(),
            provenance: Provenance {
                seed,
                ..Default::default()
            },
            status: Status::Ok,
            notes: Vec::new(),
        }
    }

    /// Records a parameter.
    pub fn param<T: Serialize>(&mut self, key: &str, value: T) -> &mut Self {
        self.params.insert(key.to_string(), to_value(value));
        self
    }

    /// Records a derived quantity.
    pub fn derive<T: Serialize>(&mut self, key: &str, value: T) -> &mut Self {
        self.derived.insert(key.to_string(), to_value(value));
        self
    }

    /// Appends a series point.
    pub fn point(&mut self, label: &str, x: f64, y: f64) -> &mut Self {
        self.series.push(SeriesPoint {
            label: label.to_string(),
            x,
            y,
        });
        self
    }

    /// Records a tolerance.
    pub fn tolerance(&mut self, key: &str, value: f64) -> &mut Self {
        self.provenance.tolerances.insert(key.to_string(), value);
        self
    }

    /// Records a named check; a failing check marks the report inconclusive.
    pub fn check(&mut self, key: &str, passed: bool) -> &mut Self {
        self.derive(&format!("check_{key}"), passed);
        if !passed {
            self.flag(&format!("check {key} failed"));
        }
        self
    }

    /// Marks the report inconclusive with a note.
    pub fn flag(&mut self, note: &str) -> &mut Self {
        self.status = Status::Inconclusive;
        self.notes.push(note.to_string());
        self
    }

    /// Looks up a derived number.
    pub fn derived_f64(&self, key: &str) -> Option<f64> {
        self.derived.get(key).and_then(Value::as_f64)
    }
}

/// Converts to JSON, mapping non-finite numbers to null.
fn to_value<T: Serialize>(value: T) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

/// Output format of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Pretty-printed JSON.
    Json,
    /// Series flattened to `label,x,y` rows after a header row.
    Csv,
}

impl std::str::FromStr for Format {
    type Err = TslError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(TslError::Config(format!(
                "format must be json or csv, got {other:?}"
            ))),
        }
    }
}

/// Renders the report as text in the given format.
pub fn render_report(report: &ExperimentReport, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(report).map_err(|e| TslError::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut s = String::from("label,x,y\n");
            for p in &report.series {
                s.push_str(&format!("{},{:?},{:?}\n", csv_field(&p.label), p.x, p.y));
            }
            Ok(s)
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Parses a JSON report.
pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| TslError::Input(format!("invalid report JSON: {e}")))
}

/// Writes the rendered report to `path`, or returns it for standard output when `path` is `None`.
pub fn emit_report(
    report: &ExperimentReport,
    format: Format,
    path: Option<&Path>,
) -> Result<String> {
    let text = render_report(report, format)?;
    if let Some(p) = path {
        std::fs::write(p, &text)
            .map_err(|e| TslError::Io(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo", 7);
        r.param("n", 3)
            .derive("limit", 0.4)
            .point("q", 0.01, 0.399)
            .point("q", 0.02, 0.398)
            .point("q", 0.04, 0.396);
        r
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let a = render_report(&sample(), Format::Json).unwrap();
        let b = render_report(&parse_report(&a).unwrap(), Format::Json).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_has_header_plus_rows() {
        let c = render_report(&sample(), Format::Csv).unwrap();
        assert_eq!(c.lines().count(), 4);
    }

    #[test]
    fn failing_check_flags_report() {
        let mut r = sample();
        r.check("gap", false);
        assert_eq!(r.status, Status::Inconclusive);
    }
}
