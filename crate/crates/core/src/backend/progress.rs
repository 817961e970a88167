//! Progress metrics from a structure predictor.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DesignRecord, MockFold, ProgressMetrics};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PluginError {
    #[error("progress plugin protocol error: {0}")]
    Protocol(String),
    #[error("progress plugin could not be started: {0}")]
    Unavailable(String),
}

/// One outcome per input record, in order. Per-record failures are `Err`.
pub trait ProgressPlugin: Send + Sync {
    fn probe(&self, records: &[DesignRecord]) -> Result<Vec<Result<ProgressMetrics, String>>, PluginError>;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeReport {
    pub filled: usize,
    pub failed: Vec<(String, String)>,
}

/// Fills `progress_metrics` on each record. Records whose probe fails keep
/// `None` and are listed in the report.
pub fn probe_progress_metrics(records: &mut [DesignRecord], plugin: &dyn ProgressPlugin) -> Result<ProbeReport, PluginError> {
    let results = plugin.probe(records)?;
    if results.len() != records.len() {
        return Err(PluginError::Protocol(format!("expected {} results, got {}", records.len(), results.len())));
    }
    for m in results.iter().flatten() {
        if !(0.0..=1.0).contains(&m.plddt) || !m.plddt.is_finite() {
            return Err(PluginError::Protocol(format!("plddt {} is outside [0, 1]", m.plddt)));
        }
        if !(m.fold_rmsd >= 0.0) {
            return Err(PluginError::Protocol(format!("rmsd {} is negative", m.fold_rmsd)));
        }
    }
    let mut report = ProbeReport::default();
    for (r, m) in records.iter_mut().zip(results) {
        match m {
            Ok(m) => {
                r.progress_metrics = Some(m);
                report.filled += 1;
            }
            Err(e) => {
                r.progress_metrics = None;
                report.failed.push((r.id.clone(), e));
            }
        }
    }
    Ok(report)
}

/// Values looked up by record id.
#[derive(Debug, Clone, Default)]
pub struct TablePlugin {
    pub table: BTreeMap<String, ProgressMetrics>,
}

impl ProgressPlugin for TablePlugin {
    fn probe(&self, records: &[DesignRecord]) -> Result<Vec<Result<ProgressMetrics, String>>, PluginError> {
        Ok(records
            .iter()
            .map(|r| self.table.get(&r.id).copied().ok_or_else(|| format!("no prediction for {}", r.id)))
            .collect())
    }
}

/// Scores how well a sequence fits the fold's burial pattern.
#[derive(Debug, Clone)]
pub struct MockFoldPlugin {
    pub fold: MockFold,
}

fn hydropathy(code: &str) -> f64 {
    match code {
        "ILE" => 4.5,
        "VAL" => 4.2,
        "LEU" => 3.8,
        "NLE" => 3.9,
        "NVL" => 3.5,
        "TRF" => 3.4,
        "PHE" => 2.8,
        "CYS" => 2.5,
        "MET" => 1.9,
        "ALA" => 1.8,
        "AIB" => 2.0,
        "GLY" => -0.4,
        "THR" => -0.7,
        "SER" => -0.8,
        "TRP" => -0.9,
        "TYR" => -1.3,
        "PRO" => -1.6,
        "HYP" => -1.8,
        _ => -3.5,
    }
}

impl ProgressPlugin for MockFoldPlugin {
    fn probe(&self, records: &[DesignRecord]) -> Result<Vec<Result<ProgressMetrics, String>>, PluginError> {
        Ok(records
            .iter()
            .map(|r| {
                if r.sequence.len() != self.fold.len() {
                    return Err(format!("sequence length {} does not match the fold", r.sequence.len()));
                }
                let (mut good, mut total) = (0.0f64, 0.0f64);
                for (aa, layer) in r.sequence.0.iter().zip(self.fold.layers.bytes()) {
                    let h = hydropathy(aa.as_str());
                    match layer {
                        b'C' => {
                            total += 1.0;
                            if h >= 1.8 {
                                good += 1.0;
                            }
                        }
                        b'S' => {
                            total += 1.0;
                            if h < 0.0 {
                                good += 1.0;
                            }
                        }
                        _ => {}
                    }
                }
                let q = if total > 0.0 { good / total } else { 1.0 };
                let digest = Sha256::digest(r.sequence.to_string().as_bytes());
                let u = digest[0] as f64 / 255.0;
                let drift: f64 = r.structure_ref.split(':').nth(1).and_then(|d| d.parse().ok()).unwrap_or(0.0);
                let fold_rmsd = 0.4 + 9.0 * (1.0 - q).powi(2) + 0.3 * u + 0.5 * drift;
                let plddt = (0.97 - 0.45 * (1.0 - q) - 0.04 * u).clamp(0.05, 0.99);
                Ok(ProgressMetrics { fold_rmsd: (fold_rmsd * 1e4).round() / 1e4, plddt: (plddt * 1e4).round() / 1e4 })
            })
            .collect())
    }
}

#[derive(Serialize)]
struct PluginInput<'a> {
    id: &'a str,
    structure_ref: &'a str,
    sequence: String,
}

#[derive(Deserialize)]
struct PluginOutput {
    id: String,
    #[serde(default)]
    rmsd: Option<f64>,
    #[serde(default)]
    plddt: Option<f64>,
    #[serde(default)]
    error: Option<String>,
}

/// External predictor: receives a JSON array of `{id, structure_ref, sequence}`
/// on stdin and prints one JSON object per line with `id`, `rmsd`, `plddt`
/// (or `error`).
#[derive(Debug, Clone)]
pub struct CommandPlugin {
    pub command: Vec<String>,
}

impl ProgressPlugin for CommandPlugin {
    fn probe(&self, records: &[DesignRecord]) -> Result<Vec<Result<ProgressMetrics, String>>, PluginError> {
        let (exe, args) = self.command.split_first().ok_or_else(|| PluginError::Unavailable("empty command".into()))?;
        let mut child = Command::new(exe)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| PluginError::Unavailable(format!("{exe}: {e}")))?;
        let input: Vec<PluginInput> = records
            .iter()
            .map(|r| PluginInput { id: &r.id, structure_ref: &r.structure_ref, sequence: r.sequence.to_string() })
            .collect();
        let payload = serde_json::to_vec(&input).map_err(|e| PluginError::Protocol(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("piped")
            .write_all(&payload)
            .map_err(|e| PluginError::Protocol(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| PluginError::Protocol(e.to_string()))?;
        let mut by_id: BTreeMap<String, Result<ProgressMetrics, String>> = BTreeMap::new();
        for line in String::from_utf8_lossy(&out.stdout).lines().filter(|l| !l.trim().is_empty()) {
            let o: PluginOutput = serde_json::from_str(line).map_err(|e| PluginError::Protocol(format!("{e}: {line}")))?;
            let v = match (o.error, o.rmsd, o.plddt) {
                (Some(e), _, _) => Err(e),
                (None, Some(fold_rmsd), Some(plddt)) => Ok(ProgressMetrics { fold_rmsd, plddt }),
                _ => return Err(PluginError::Protocol(format!("record {} lacks rmsd or plddt", o.id))),
            };
            by_id.insert(o.id, v);
        }
        Ok(records
            .iter()
            .map(|r| by_id.remove(&r.id).unwrap_or_else(|| Err(format!("no prediction for {}", r.id))))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::StructureMetrics;
    use crate::residue::{code, Sequence};

    fn record(id: &str) -> DesignRecord {
        DesignRecord {
            id: id.into(),
            parent_id: None,
            structure_ref: "mock:0:init".into(),
            sequence: Sequence::uniform(code("ALA"), 4),
            scores: BTreeMap::new(),
            per_residue: BTreeMap::new(),
            structure_metrics: StructureMetrics::default(),
            progress_metrics: None,
            core_positions: vec![],
        }
    }

    fn table(ids: &[&str], plddt: f64) -> TablePlugin {
        TablePlugin {
            table: ids.iter().map(|i| (i.to_string(), ProgressMetrics { fold_rmsd: 1.5, plddt })).collect(),
        }
    }

    #[test]
    fn table_values_are_copied() {
        let mut rs = vec![record("a"), record("b")];
        let rep = probe_progress_metrics(&mut rs, &table(&["a", "b"], 0.8)).unwrap();
        assert_eq!(rep.filled, 2);
        assert_eq!(rs[1].progress_metrics, Some(ProgressMetrics { fold_rmsd: 1.5, plddt: 0.8 }));
    }

    #[test]
    fn out_of_range_plddt_is_protocol_error() {
        let mut rs = vec![record("a")];
        assert!(matches!(probe_progress_metrics(&mut rs, &table(&["a"], 1.2)), Err(PluginError::Protocol(_))));
    }

    #[test]
    fn partial_failures_are_reported() {
        let mut rs: Vec<DesignRecord> = (0..128).map(|i| record(&format!("r{i}"))).collect();
        let ids: Vec<String> = (3..128).map(|i| format!("r{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let rep = probe_progress_metrics(&mut rs, &table(&refs, 0.9)).unwrap();
        assert_eq!(rep.filled, 125);
        assert_eq!(rep.failed.len(), 3);
        assert!(rs[0].progress_metrics.is_none());
    }
}
