//! Experiment reports and their JSON-lines / CSV emission.
//!
//! Field order is fixed and every float is written with 17 significant
//! digits, so two runs with the same seed produce identical bytes.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dist::ForrelationParams;
use crate::error::{Error, Result};

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 13] = [
    "experiment",
    "n",
    "k",
    "eps",
    "estimate",
    "stderr",
    "n_samples",
    "seed",
    "workers",
    "pass",
    "wall_time_ms",
    "note",
    "details",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub workers: usize,
    #[serde(default)]
    pub pass: Option<bool>,
    #[serde(default)]
    pub wall_time_ms: Option<u64>,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, params: &ForrelationParams, seed: u64, workers: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            n: params.n,
            k: params.k,
            eps: params.eps,
            estimate: 0.0,
            stderr: 0.0,
            n_samples: 0,
            seed,
            workers,
            pass: None,
            wall_time_ms: None,
            note: None,
            details: BTreeMap::new(),
        }
    }

    pub fn with_estimate(mut self, estimate: f64, stderr: f64, n_samples: u64) -> Self {
        self.estimate = estimate;
        self.stderr = stderr;
        self.n_samples = n_samples;
        self
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.estimate.is_finite() {
            return Err(Error::NonFinite("estimate"));
        }
        if !self.stderr.is_finite() || self.stderr < 0.0 {
            return Err(Error::NonFinite("stderr"));
        }
        if !self.eps.is_finite() {
            return Err(Error::NonFinite("eps"));
        }
        if self.details.values().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("details"));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> Result<String> {
        self.validate()?;
        let mut s = String::with_capacity(256);
        s.push('{');
        s.push_str(&format!("\"experiment\":{}", serde_json::to_string(&self.experiment)?));
        s.push_str(&format!(",\"n\":{},\"k\":{}", self.n, self.k));
        s.push_str(&format!(",\"eps\":{}", fmt_float(self.eps)));
        s.push_str(&format!(",\"estimate\":{}", fmt_float(self.estimate)));
        s.push_str(&format!(",\"stderr\":{}", fmt_float(self.stderr)));
        s.push_str(&format!(
            ",\"n_samples\":{},\"seed\":{},\"workers\":{}",
            self.n_samples, self.seed, self.workers
        ));
        s.push_str(",\"pass\":");
        s.push_str(match self.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "null",
        });
        match self.wall_time_ms {
            Some(ms) => s.push_str(&format!(",\"wall_time_ms\":{ms}")),
            None => s.push_str(",\"wall_time_ms\":null"),
        }
        match &self.note {
            Some(note) => s.push_str(&format!(",\"note\":{}", serde_json::to_string(note)?)),
            None => s.push_str(",\"note\":null"),
        }
        s.push_str(",\"details\":{");
        for (i, (key, v)) in self.details.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format!("{}:{}", serde_json::to_string(key)?, fmt_float(*v)));
        }
        s.push_str("}}");
        Ok(s)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }

    fn csv_record(&self) -> Result<Vec<String>> {
        self.validate()?;
        let details = self
            .details
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_float(*v)))
            .collect::<Vec<_>>()
            .join(";");
        Ok(vec![
            self.experiment.clone(),
            self.n.to_string(),
            self.k.to_string(),
            fmt_float(self.eps),
            fmt_float(self.estimate),
            fmt_float(self.stderr),
            self.n_samples.to_string(),
            self.seed.to_string(),
            self.workers.to_string(),
            self.pass.map(|p| p.to_string()).unwrap_or_default(),
            self.wall_time_ms.map(|m| m.to_string()).unwrap_or_default(),
            self.note.clone().unwrap_or_default(),
            details,
        ])
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    JsonLines,
    Csv,
}

/// Writes reports in the requested format. Nothing is written if any
/// report fails validation.
pub fn emit<W: Write>(reports: &[ExperimentReport], format: OutputFormat, out: W) -> Result<()> {
    for r in reports {
        r.validate()?;
    }
    match format {
        OutputFormat::JsonLines => {
            let mut out = out;
            for r in reports {
                writeln!(out, "{}", r.to_json_line()?)?;
            }
            out.flush()?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in reports {
                w.write_record(r.csv_record()?)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn emit_to_string(reports: &[ExperimentReport], format: OutputFormat) -> Result<String> {
    let mut buf = Vec::new();
    emit(reports, format, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}
