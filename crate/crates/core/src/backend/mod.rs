//! Execution of instantiated protocols over an ensemble of replicas.

mod external;
mod mock;
mod progress;
mod schema;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::residue::{code, ResidueCode, Sequence};
use crate::script::ScriptDocument;

pub use external::{ExternalBackend, ExternalConfig, SidecarRecord};
pub use mock::{MockBackend, MockConfig, MockFold};
pub use progress::{probe_progress_metrics, CommandPlugin, MockFoldPlugin, PluginError, ProbeReport, ProgressPlugin, TablePlugin};
pub use schema::{validate_document, validation_message};

pub const TOTAL: &str = "total";
pub const COMPOSITION_PRE: &str = "aa_composition_pre";
pub const COMPOSITION_POST: &str = "aa_composition";
pub const REPULSION: &str = "interresidue_repulsion";
pub const RAMA: &str = "ramachandran_preference";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StructureMetrics {
    /// Å³
    pub cavity_volume: f64,
    /// Å
    pub radius_of_gyration: f64,
    pub buried_unsat_penalty: f64,
    /// Å
    pub rmsd_to_reference: f64,
}

/// Metrics from a structure predictor run on the designed sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressMetrics {
    /// Å
    pub fold_rmsd: f64,
    /// In [0, 1].
    pub plddt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub id: String,
    pub parent_id: Option<String>,
    pub structure_ref: String,
    pub sequence: Sequence,
    pub scores: BTreeMap<String, f64>,
    pub per_residue: BTreeMap<String, Vec<f64>>,
    pub structure_metrics: StructureMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress_metrics: Option<ProgressMetrics>,
    /// 1-based positions in the core layer of this design's structure.
    #[serde(default)]
    pub core_positions: Vec<usize>,
}

impl DesignRecord {
    pub fn score(&self, key: &str) -> Option<f64> {
        self.scores.get(key).copied()
    }

    pub fn total_energy(&self) -> f64 {
        self.score(TOTAL).unwrap_or(f64::NAN)
    }

    /// Number of residues of type `code` at core positions.
    pub fn core_count(&self, code: ResidueCode) -> usize {
        self.core_positions
            .iter()
            .filter(|&&p| self.sequence.0.get(p.wrapping_sub(1)) == Some(&code))
            .count()
    }

    /// Objective and report metrics by key.
    pub fn metric(&self, key: &str) -> Option<f64> {
        let m = &self.structure_metrics;
        match key {
            "total_energy" => self.score(TOTAL),
            "aa_composition" => self.score(COMPOSITION_POST),
            "cavity_volume" => Some(m.cavity_volume),
            "radius_of_gyration" => Some(m.radius_of_gyration),
            "buried_unsat_penalty" => Some(m.buried_unsat_penalty),
            "rmsd_to_reference" => Some(m.rmsd_to_reference),
            "fold_rmsd" => self.progress_metrics.map(|p| p.fold_rmsd),
            "plddt" => self.progress_metrics.map(|p| p.plddt),
            "exactly_one_trf_in_core" => Some(if self.core_count(code("TRF")) == 1 { 1.0 } else { 0.0 }),
            _ => self.score(key),
        }
    }

    /// Checks the per-record invariants.
    pub fn check(&self) -> Result<(), String> {
        let n = self.sequence.len();
        for (k, v) in &self.per_residue {
            if v.len() != n {
                return Err(format!("per-residue term {k} has {} values for a sequence of length {n}", v.len()));
            }
        }
        let m = &self.structure_metrics;
        if m.cavity_volume < 0.0 || m.radius_of_gyration < 0.0 {
            return Err("cavity volume and radius of gyration must be non-negative".into());
        }
        if let Some(p) = self.progress_metrics {
            if !(0.0..=1.0).contains(&p.plddt) {
                return Err(format!("plddt {} is outside [0, 1]", p.plddt));
            }
        }
        if self.core_positions.iter().any(|&p| p == 0 || p > n) {
            return Err("core position outside the sequence".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Validation,
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub replica_index: usize,
    pub phase: Phase,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub records: Vec<DesignRecord>,
    pub attempted: usize,
    pub succeeded: usize,
    pub failures: Vec<ReplicaFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{message}")]
pub struct ExecError {
    pub phase: Phase,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("invalid ensemble request: {0}")]
    InvalidRequest(String),
}

/// Per-call settings shared by all replicas of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub seed: u64,
    pub step: usize,
    pub workers: usize,
}

/// Seed for one replica, independent of scheduling.
pub fn replica_seed(seed: u64, step: usize, replica: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"replica");
    h.update(seed.to_le_bytes());
    h.update((step as u64).to_le_bytes());
    h.update((replica as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Short stable hash of a protocol document and its generated files.
pub fn script_fingerprint(doc: &ScriptDocument) -> String {
    let mut h = Sha256::new();
    h.update(doc.text.as_bytes());
    for f in &doc.files {
        h.update(f.name.as_bytes());
        h.update([0]);
        h.update(f.contents.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// One replica run. Implementations must be pure in their arguments.
pub trait Backend: Send + Sync {
    /// Checks the document once before any replica runs.
    fn validate(&self, doc: &ScriptDocument) -> Result<(), BackendError>;

    fn run_replica(&self, doc: &ScriptDocument, input: &DesignRecord, replica: usize, ctx: &RunContext) -> Result<DesignRecord, ExecError>;
}

/// Runs `replicas` independent replicas, assigned round-robin over `inputs`.
///
/// Replica failures are collected; the step fails only when the document
/// does not validate or no replica succeeds.
pub fn run_ensemble(
    backend: &dyn Backend,
    doc: &ScriptDocument,
    inputs: &[DesignRecord],
    replicas: usize,
    ctx: &RunContext,
) -> Result<EnsembleResult, BackendError> {
    if replicas == 0 || inputs.is_empty() {
        return Err(BackendError::InvalidRequest("need at least one replica and one input".into()));
    }
    backend.validate(doc)?;
    let run = |r: usize| backend.run_replica(doc, &inputs[r % inputs.len()], r, ctx);
    let outcomes: Vec<Result<DesignRecord, ExecError>> = if ctx.workers <= 1 {
        (0..replicas).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.workers)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        pool.install(|| (0..replicas).into_par_iter().map(run).collect())
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push(r),
            Err(e) if e.phase == Phase::Validation => return Err(e.into()),
            Err(e) => failures.push(ReplicaFailure { replica_index: i, phase: e.phase, message: e.message }),
        }
    }
    if records.is_empty() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for f in &failures {
            *counts.entry(f.message.as_str()).or_default() += 1;
        }
        let most = counts.iter().max_by_key(|(_, c)| **c).map(|(m, _)| m.to_string()).unwrap_or_default();
        return Err(ExecError { phase: Phase::Runtime, message: most }.into());
    }
    Ok(EnsembleResult { attempted: replicas, succeeded: records.len(), records, failures })
}
