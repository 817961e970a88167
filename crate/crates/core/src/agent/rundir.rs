//! On-disk layout of a finished run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{RunReport, Session};
use crate::evalkit::{emit_report, percentile_table, trial_from_trajectory, PLDDT_FLOOR};
use crate::trajectory::history_summary;

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    seed: u64,
    #[serde(flatten)]
    report: &'a RunReport,
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>, written: &mut Vec<PathBuf>) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("run outputs serialize") + "\n"
}

/// Writes the log, per-step states, history, scripts, transcript and report
/// of `session` under `dir`. Returns every file written.
pub fn write_run_dir(session: &Session<'_>, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let t = &session.trajectory;
    let mut out = Vec::new();
    write(dir.join("trajectory.jsonl"), t.to_jsonl(), &mut out)?;
    for step in &t.steps {
        if let Some(text) = t.state_text(step.index) {
            write(dir.join("states").join(format!("step_{:02}.txt", step.index)), text + "\n", &mut out)?;
        }
    }
    write(dir.join("history.md"), history_summary(t) + "\n", &mut out)?;
    for (i, obs) in session.observations.iter().enumerate() {
        write(dir.join("observations").join(format!("turn_{:02}.txt", i + 1)), format!("{obs}\n"), &mut out)?;
    }
    for (step, doc) in &session.scripts {
        let scripts = dir.join("scripts");
        write(scripts.join(format!("step_{step:02}.xml")), &doc.text, &mut out)?;
        for f in &doc.files {
            write(scripts.join(format!("step_{step:02}")).join(&f.name), &f.contents, &mut out)?;
        }
    }
    write(dir.join("transcript.json"), pretty(&session.transcript), &mut out)?;
    let report = session.report();
    write(dir.join("report.json"), pretty(&ReportFile { seed: t.seed, report: &report }), &mut out)?;
    if t.objectives.progress_key().is_some() {
        let (_, per_step) = trial_from_trajectory("run", t, PLDDT_FLOOR);
        let rows: Vec<_> = per_step.into_iter().enumerate().map(|(i, p)| ("run".to_string(), i + 1, p)).collect();
        out.extend(emit_report(&[percentile_table(&rows)], dir)?);
    }
    Ok(out)
}
