//! Report rows and their CSV / JSON serializations.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::{ExperimentConfig, Format};

pub const CSV_HEADER: [&str; 6] = ["experiment", "metric", "value", "tolerance", "pass", "seconds"];

/// One measured scalar. `pass` is `None` for diagnostics that carry no tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub experiment: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
    pub seconds: f64,
}

impl Record {
    /// Passes when `value ≤ tolerance`.
    pub fn bounded(experiment: &str, metric: &str, value: f64, tolerance: f64) -> Self {
        Self::with_pass(experiment, metric, value, Some(tolerance), Some(value <= tolerance))
    }

    /// Negative control: passes when the defect is detected, i.e. `value > tolerance`.
    pub fn control(experiment: &str, metric: &str, value: f64, tolerance: f64) -> Self {
        Self::with_pass(experiment, &format!("control:{metric}"), value, Some(tolerance), Some(value > tolerance))
    }

    pub fn info(experiment: &str, metric: &str, value: f64) -> Self {
        Self::with_pass(experiment, metric, value, None, None)
    }

    pub fn error(experiment: &str, message: &str) -> Self {
        Self::with_pass(experiment, &format!("error: {message}"), f64::NAN, None, Some(false))
    }

    fn with_pass(experiment: &str, metric: &str, value: f64, tolerance: Option<f64>, pass: Option<bool>) -> Self {
        Self { experiment: experiment.to_string(), metric: metric.to_string(), value, tolerance, pass, seconds: 0.0 }
    }

    pub fn timed(mut self, seconds: f64) -> Self {
        self.seconds = seconds;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub configs: Vec<ExperimentConfig>,
    pub records: Vec<Record>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.pass == Some(false))
    }

    pub fn extend(&mut self, other: Report) {
        self.configs.extend(other.configs);
        self.records.extend(other.records);
    }

    pub fn write(&self, out: impl Write, format: Format) -> anyhow::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    pub fn write_csv(&self, out: impl Write) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.experiment.clone(),
                r.metric.clone(),
                number(r.value),
                r.tolerance.map(number).unwrap_or_default(),
                pass_label(r.pass).to_string(),
                seconds(r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, mut out: impl Write) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            experiment: &'a str,
            metric: &'a str,
            value: Option<Box<RawValue>>,
            tolerance: Option<Box<RawValue>>,
            pass: Option<bool>,
            seconds: Box<RawValue>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            configs: &'a [ExperimentConfig],
            records: Vec<Row<'a>>,
        }
        let raw = |v: f64| -> anyhow::Result<Option<Box<RawValue>>> {
            if v.is_finite() { Ok(Some(RawValue::from_string(number(v))?)) } else { Ok(None) }
        };
        let mut records = Vec::with_capacity(self.records.len());
        for r in &self.records {
            records.push(Row {
                experiment: &r.experiment,
                metric: &r.metric,
                value: raw(r.value)?,
                tolerance: match r.tolerance {
                    Some(t) => raw(t)?,
                    None => None,
                },
                pass: r.pass,
                seconds: RawValue::from_string(seconds(r.seconds))?,
            });
        }
        serde_json::to_writer_pretty(&mut out, &Doc { configs: &self.configs, records })?;
        writeln!(out)?;
        Ok(())
    }

    pub fn save(&self, path: &Path, format: Format) -> anyhow::Result<()> {
        let file = std::fs::File::create(path).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        self.write(std::io::BufWriter::new(file), format)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn seconds(v: f64) -> String {
    format!("{v:.6}")
}

pub fn pass_label(pass: Option<bool>) -> &'static str {
    match pass {
        Some(true) => "true",
        Some(false) => "false",
        None => "n/a",
    }
}
