//! Trace CSV and run summary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use mollify::{ConvergenceVerdict, RunTrace};
use serde::Serialize;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_header(dim: usize) -> String {
    let mut cols = vec!["n", "beta", "gamma", "value", "grad_norm", "ess", "lambda"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    cols.extend((0..dim).map(|i| format!("theta_{i}")));
    cols.join(",")
}

pub fn write_trace<W: Write>(mut out: W, trace: &RunTrace) -> io::Result<()> {
    writeln!(out, "{}", trace_header(trace.final_theta.dim()))?;
    for r in &trace.records {
        write!(out, "{}", r.n)?;
        for v in [r.beta, r.gamma, r.value, r.grad_norm, r.ess, r.lambda] {
            write!(out, ",{}", fmt_float(v))?;
        }
        for t in r.theta.coords() {
            write!(out, ",{}", fmt_float(*t))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

pub fn write_trace_file(path: &Path, trace: &RunTrace) -> io::Result<()> {
    write_trace(BufWriter::new(File::create(path)?), trace)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictSummary {
    pub level: String,
    pub c_star_used: Option<f64>,
    pub checks: Vec<String>,
}

impl From<&ConvergenceVerdict> for VerdictSummary {
    fn from(v: &ConvergenceVerdict) -> Self {
        VerdictSummary {
            level: v.level.to_string(),
            c_star_used: v.c_star_used,
            checks: v.reasons.iter().map(|r| r.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub objective: String,
    pub smoother: String,
    pub dim: usize,
    pub n_iterations: u64,
    pub n_samples: usize,
    pub seed: u64,
    pub threads: usize,
    pub final_theta: Vec<f64>,
    pub running_min_grad_norm: f64,
    pub final_value: f64,
    pub final_auc_risk: Option<f64>,
    pub verdict: VerdictSummary,
    pub wall_time_secs: f64,
}

pub fn write_summary_file(path: &Path, summary: &RunSummary) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, summary).map_err(io::Error::other)?;
    writeln!(out)?;
    out.flush()
}
