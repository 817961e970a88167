//! Adapter for a real Rosetta installation, run as one subprocess per replica.
//!
//! The command template may use `{exe}`, `{script}`, `{input}`, `{outdir}`,
//! `{seed}` and `{replica}`. `{exe}` is taken from the `RSGYM_ROSETTA`
//! environment variable when set. Each replica must write
//! `{outdir}/result.json` holding a [`SidecarRecord`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{replica_seed, Backend, BackendError, DesignRecord, ExecError, Phase, RunContext, StructureMetrics};
use crate::residue::Sequence;
use crate::script::ScriptDocument;

pub const EXE_ENV: &str = "RSGYM_ROSETTA";
const SCHEMA_FAILURE: &str = "failed to validate against the rosetta scripts schema";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub command: Vec<String>,
    #[serde(default)]
    pub executable: Option<String>,
    pub workdir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub sequence: Sequence,
    pub scores: BTreeMap<String, f64>,
    pub per_residue: BTreeMap<String, Vec<f64>>,
    pub structure_metrics: StructureMetrics,
    #[serde(default)]
    pub core_positions: Vec<usize>,
    #[serde(default)]
    pub structure_ref: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    config: ExternalConfig,
}

fn runtime(message: impl Into<String>) -> ExecError {
    ExecError { phase: Phase::Runtime, message: message.into() }
}

fn find_on_path(exe: &str) -> bool {
    let p = Path::new(exe);
    if p.components().count() > 1 {
        return p.is_file();
    }
    std::env::var_os("PATH").is_some_and(|paths| std::env::split_paths(&paths).any(|d| d.join(exe).is_file()))
}

impl ExternalBackend {
    pub fn new(config: ExternalConfig) -> Self {
        Self { config }
    }

    fn executable(&self) -> Option<String> {
        std::env::var(EXE_ENV).ok().or_else(|| self.config.executable.clone())
    }

    /// Checks that the configured program can be found.
    pub fn available(&self) -> Result<(), String> {
        let first = self.config.command.first().ok_or("empty command template")?;
        let exe = if first == "{exe}" {
            self.executable().ok_or(format!("set {EXE_ENV} or `executable` to the Rosetta scripts binary"))?
        } else {
            first.clone()
        };
        if find_on_path(&exe) {
            Ok(())
        } else {
            Err(format!("executable not found: {exe}"))
        }
    }

    fn step_dir(&self, ctx: &RunContext) -> PathBuf {
        self.config.workdir.join(format!("step_{:03}", ctx.step))
    }

    fn write_inputs(&self, doc: &ScriptDocument, dir: &Path) -> Result<PathBuf, ExecError> {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
        let script = dir.join("protocol.xml");
        std::fs::write(&script, &doc.text).map_err(|e| runtime(e.to_string()))?;
        for f in &doc.files {
            std::fs::write(dir.join(&f.name), &f.contents).map_err(|e| runtime(e.to_string()))?;
        }
        Ok(script)
    }
}

impl Backend for ExternalBackend {
    fn validate(&self, _doc: &ScriptDocument) -> Result<(), BackendError> {
        self.available().map_err(BackendError::Unavailable)
    }

    fn run_replica(&self, doc: &ScriptDocument, input: &DesignRecord, replica: usize, ctx: &RunContext) -> Result<DesignRecord, ExecError> {
        let dir = self.step_dir(ctx);
        let script = self.write_inputs(doc, &dir)?;
        let outdir = dir.join(format!("replica_{replica:03}"));
        std::fs::create_dir_all(&outdir).map_err(|e| runtime(e.to_string()))?;
        let seed = replica_seed(ctx.seed, ctx.step, replica);
        let exe = self.executable().unwrap_or_default();
        let fill = |t: &str| {
            t.replace("{exe}", &exe)
                .replace("{script}", &script.to_string_lossy())
                .replace("{input}", &input.structure_ref)
                .replace("{outdir}", &outdir.to_string_lossy())
                .replace("{seed}", &(seed % (i32::MAX as u64)).to_string())
                .replace("{replica}", &replica.to_string())
        };
        let argv: Vec<String> = self.config.command.iter().map(|t| fill(t)).collect();
        let (prog, args) = argv.split_first().ok_or_else(|| runtime("empty command template"))?;
        let out = Command::new(prog)
            .args(args)
            .current_dir(&dir)
            .output()
            .map_err(|e| runtime(format!("{prog}: {e}")))?;
        if !out.status.success() {
            let mut message = String::from_utf8_lossy(&out.stderr).trim().to_string();
            if message.is_empty() {
                message = String::from_utf8_lossy(&out.stdout).trim().to_string();
            }
            if message.is_empty() {
                message = format!("{prog} exited with {}", out.status);
            }
            let phase = if message.contains(SCHEMA_FAILURE) { Phase::Validation } else { Phase::Runtime };
            return Err(ExecError { phase, message });
        }
        let path = outdir.join("result.json");
        let text = std::fs::read_to_string(&path).map_err(|e| runtime(format!("missing result {}: {e}", path.display())))?;
        let side: SidecarRecord = serde_json::from_str(&text).map_err(|e| runtime(format!("bad result {}: {e}", path.display())))?;
        let record = DesignRecord {
            id: format!("s{}-r{:03}", ctx.step, replica),
            parent_id: Some(input.id.clone()),
            structure_ref: side.structure_ref.unwrap_or_else(|| outdir.to_string_lossy().into_owned()),
            sequence: side.sequence,
            scores: side.scores,
            per_residue: side.per_residue,
            structure_metrics: side.structure_metrics,
            progress_metrics: None,
            core_positions: side.core_positions,
        };
        record.check().map_err(runtime)?;
        Ok(record)
    }
}
