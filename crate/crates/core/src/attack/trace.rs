//! JSON-lines storage of attack traces, one target per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttackConfig, AttackTrace, Perturbation};
use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMargin {
    pub step: usize,
    pub margin: f64,
}

/// One line of a trace file: the trace with the configuration that
/// produced it. Only evaluated steps are listed in `margins`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub target: NodeId,
    pub true_class: usize,
    pub config: AttackConfig,
    /// Trial the trace belongs to.
    #[serde(default)]
    pub trial: usize,
    /// How the training set was selected.
    #[serde(default)]
    pub method: String,
    pub margins: Vec<StepMargin>,
    pub surrogate_margins: Vec<f64>,
    pub applied: Vec<Perturbation>,
    pub exhausted: bool,
}

impl TraceRecord {
    pub fn new(trace: &AttackTrace, config: &AttackConfig, trial: usize, method: &str) -> Self {
        TraceRecord {
            target: trace.target,
            true_class: trace.true_class,
            config: config.clone(),
            trial,
            method: method.to_string(),
            margins: trace
                .margins
                .iter()
                .enumerate()
                .filter_map(|(step, m)| m.map(|margin| StepMargin { step, margin }))
                .collect(),
            surrogate_margins: trace.surrogate_margins.clone(),
            applied: trace.applied.clone(),
            exhausted: trace.exhausted,
        }
    }

    /// Rebuilds the dense trace.
    pub fn to_trace(&self) -> Result<AttackTrace> {
        let len = self.applied.len() + 1;
        let mut margins = vec![None; len];
        for m in &self.margins {
            if m.step >= len {
                return Err(Error::invalid(format!(
                    "target {}: margin at step {} beyond {} applied perturbations",
                    self.target,
                    m.step,
                    self.applied.len()
                )));
            }
            margins[m.step] = Some(m.margin);
        }
        Ok(AttackTrace {
            target: self.target,
            true_class: self.true_class,
            margins,
            surrogate_margins: self.surrogate_margins.clone(),
            applied: self.applied.clone(),
            exhausted: self.exhausted,
            eval_stride: self.config.eval_stride,
        })
    }
}

pub fn write_traces(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_sparse_margins() {
        let trace = AttackTrace {
            target: 4,
            true_class: 1,
            margins: vec![Some(1.5), None, Some(-0.25)],
            surrogate_margins: vec![2.0, 1.0, 0.1],
            applied: vec![
                Perturbation::edge(4, 2),
                Perturbation::FeatureOff { node: 4, feature: 3 },
            ],
            exhausted: false,
            eval_stride: 2,
        };
        let cfg = AttackConfig {
            eval_stride: 2,
            budget: 2,
            ..Default::default()
        };
        let rec = TraceRecord::new(&trace, &cfg, 0, "random");
        assert_eq!(rec.margins.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        write_traces(&[rec.clone(), rec.clone()], &p).unwrap();
        let back = read_traces(&p).unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
        assert_eq!(back[0].to_trace().unwrap(), trace);
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"edge-flip\""));
    }
}
