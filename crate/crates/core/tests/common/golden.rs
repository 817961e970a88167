//! The replayed 30-query trajectory and its golden outputs.

use std::path::{Path, PathBuf};

use rsgym::agent::{run_trajectory, write_run_dir, ModelProfile, ReasoningMode, ReplayClient, RunReport, Transcript};
use rsgym::config::RunConfig;

pub fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

pub fn expected_dir() -> PathBuf {
    dir().join("expected")
}

/// Replays the golden transcript into `out`.
pub fn replay_into(out: &Path) -> (RunReport, usize) {
    let cfg = RunConfig::load(&dir().join("config.toml")).unwrap();
    let prepared = cfg.prepare().unwrap();
    let task = prepared.task();
    let transcript: Transcript =
        serde_json::from_str(&std::fs::read_to_string(dir().join("transcript.json")).unwrap()).unwrap();
    let n = transcript.responses.len();
    let client = ReplayClient::new(transcript);
    let profile = ModelProfile::replay(ReasoningMode::Native);
    let session =
        run_trajectory(&task, prepared.initial.clone(), &client, &profile, cfg.budget, cfg.seed.unwrap()).unwrap();
    write_run_dir(&session, out).unwrap();
    assert_eq!(client.served(), n);
    (session.report(), n)
}

/// Files under golden control, relative to the run directory.
pub fn golden_files(run: &Path) -> Vec<PathBuf> {
    let mut files = vec![PathBuf::from("trajectory.jsonl"), PathBuf::from("history.md")];
    let mut states: Vec<PathBuf> = std::fs::read_dir(run.join("states"))
        .unwrap()
        .map(|e| Path::new("states").join(e.unwrap().file_name()))
        .collect();
    states.sort();
    files.extend(states);
    files
}

/// Compares `run` against the golden files, or rewrites them when
/// `UPDATE_GOLDEN=1`. Returns the mismatching relative paths.
pub fn compare(run: &Path) -> Vec<PathBuf> {
    let expected = expected_dir();
    let files = golden_files(run);
    if std::env::var("UPDATE_GOLDEN").as_deref() == Ok("1") {
        let _ = std::fs::remove_dir_all(&expected);
        for f in &files {
            let dst = expected.join(f);
            std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
            std::fs::copy(run.join(f), dst).unwrap();
        }
        return Vec::new();
    }
    let mut bad: Vec<PathBuf> = files
        .iter()
        .filter(|f| std::fs::read(run.join(f)).ok() != std::fs::read(expected.join(f)).ok())
        .cloned()
        .collect();
    let golden_states = std::fs::read_dir(expected.join("states")).map(|d| d.count()).unwrap_or(0);
    if golden_states != files.len() - 2 {
        bad.push(PathBuf::from("states/"));
    }
    bad
}
