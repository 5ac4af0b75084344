//! Trace CSV and JSON summary emission.

use std::path::Path;

use anyhow::{Context, Result};
use bellcert::protocols::{PValueTrace, ThresholdScan};

/// Writes traces as CSV rows
/// `(protocol, hypothesis, threshold, N, p_bound, minus_log2_p)`.
pub fn write_trace_csv(path: &Path, traces: &[PValueTrace]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["protocol", "hypothesis", "threshold", "N", "p_bound", "minus_log2_p"])?;
    for tr in traces {
        let threshold = tr.threshold.map(|t| t.to_string()).unwrap_or_default();
        for c in &tr.checkpoints {
            w.write_record([
                tr.protocol.as_str(),
                tr.hypothesis.as_str(),
                threshold.as_str(),
                &c.n.to_string(),
                &format!("{:e}", c.p_bound),
                &c.minus_log2_p.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Serialize)]
pub struct ScanSummary<'a> {
    pub command: &'a str,
    pub gamma: f64,
    pub grid: &'a [f64],
    pub certified: Option<f64>,
    pub first_rejection: &'a [Option<usize>],
    pub n_blk: usize,
    pub level: Option<usize>,
    pub seed: Option<u64>,
    pub backend: &'a str,
    pub solver_failures: Vec<String>,
    pub post: Option<serde_json::Value>,
}

pub fn scan_failures(scan: &ThresholdScan) -> Vec<String> {
    scan.traces
        .iter()
        .filter_map(|t| t.truncated.clone())
        .collect()
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
