use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{BenchMode, Precision};
use crate::error::Result;
use crate::model::ModelConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub segments: usize,
    pub seq_len: usize,
    pub rel_error_f32: Option<f64>,
    pub rel_error_f64: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: ModelConfig,
    pub token_seed: u64,
    pub threads: usize,
    pub tolerance_f32: f64,
    pub tolerance_f64: f64,
    pub rows: Vec<VerifyRow>,
    pub pass: bool,
}

const VERIFY_HEADER: [&str; 5] = ["segments", "seq_len", "rel_error_f32", "rel_error_f64", "pass"];

impl VerifyReport {
    pub fn write(&self, format: ReportFormat, out: impl Write) -> Result<()> {
        match format {
            ReportFormat::Json => write_json(self, out),
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(VERIFY_HEADER).map_err(csv_err)?;
                for r in &self.rows {
                    w.write_record([
                        r.segments.to_string(),
                        r.seq_len.to_string(),
                        opt(r.rel_error_f32),
                        opt(r.rel_error_f64),
                        r.pass.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
                w.flush()?;
                Ok(())
            }
        }
    }

    pub fn failing_rows(&self) -> impl Iterator<Item = &VerifyRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: BenchMode,
    pub threads: usize,
    pub seq_len: usize,
    pub segments: usize,
    /// Median over the timed repeats.
    pub wall_seconds: f64,
    pub seconds_per_segment: f64,
    pub speedup_vs_sequential: f64,
    /// `(max − min) / median` over the timed repeats.
    pub rel_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub precision: Precision,
    /// Hardware threads reported by the OS.
    pub available_parallelism: usize,
    pub repeat: usize,
    pub timestamp_unix: u64,
}

impl Environment {
    pub fn capture(precision: Precision, repeat: usize) -> Self {
        Self {
            precision,
            available_parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            repeat,
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ModelConfig,
    pub environment: Environment,
    pub rows: Vec<BenchRow>,
}

const BENCH_HEADER: [&str; 8] = [
    "mode",
    "threads",
    "seq_len",
    "segments",
    "wall_seconds",
    "seconds_per_segment",
    "speedup_vs_sequential",
    "rel_spread",
];

impl BenchReport {
    pub fn write(&self, format: ReportFormat, out: impl Write) -> Result<()> {
        match format {
            ReportFormat::Json => write_json(self, out),
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(BENCH_HEADER).map_err(csv_err)?;
                for r in &self.rows {
                    w.write_record([
                        r.mode.to_string(),
                        r.threads.to_string(),
                        r.seq_len.to_string(),
                        r.segments.to_string(),
                        r.wall_seconds.to_string(),
                        r.seconds_per_segment.to_string(),
                        r.speedup_vs_sequential.to_string(),
                        r.rel_spread.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
                w.flush()?;
                Ok(())
            }
        }
    }
}

fn write_json<T: Serialize>(value: &T, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::ArmtError {
    crate::ArmtError::Io(std::io::Error::other(e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
