use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use rsgym::agent::{HttpClient, LlmClient, ModelProfile, ReasoningMode, ReplayClient, ReqwestTransport, Transcript};
use rsgym::config::RunConfig;
use rsgym::evalkit::{
    align_trials, bench_prompts, bench_table, bootstrap_best_of_n, bootstrap_table, emit_report, percentile_table,
    run_penalty_bench, trial_from_trajectory, BootstrapConfig, Selector, Syntax, Table, INCLUSION, PLDDT_P95, RMSD_P5,
};
use rsgym::trajectory::Trajectory;

use crate::{usage, BenchSyntax};

fn emit(tables: &[Table], out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            for path in emit_report(tables, dir).with_context(|| format!("writing {}", dir.display()))? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                print!("{}", t.to_csv());
            }
        }
    }
    Ok(())
}

pub fn bench(
    syntax: BenchSyntax,
    transcript: Option<&Path>,
    config: Option<&Path>,
    n: usize,
    out: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    if n == 0 {
        return Err(usage("--n", "must be at least 1"));
    }
    let syntax = match syntax {
        BenchSyntax::Simplified => Syntax::Simplified,
        BenchSyntax::Original => Syntax::Original,
    };
    let profile_from = |p: &Path| -> anyhow::Result<Option<ModelProfile>> { Ok(RunConfig::load(p)?.model) };
    let replay;
    let http;
    let (client, profile): (&dyn LlmClient, ModelProfile) = match (transcript, config) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let t: Transcript = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            replay = ReplayClient::new(t);
            (&replay, ModelProfile::replay(ReasoningMode::Native))
        }
        (None, Some(cfg)) => {
            let profile = profile_from(cfg)?.ok_or_else(|| usage("--config", "the config has no [model] profile"))?;
            http = HttpClient::new(ReqwestTransport::new(Duration::from_secs(300)).map_err(anyhow::Error::msg)?);
            (&http, profile)
        }
        (None, None) => return Err(usage("--transcript", "give a transcript to replay or --config for a live model")),
    };
    let table = run_penalty_bench(&bench_prompts(), client, &profile, syntax, n)?;
    eprintln!(
        "{} {}: {}/{} ({:.2}%)",
        table.model,
        syntax.as_str(),
        table.successes(),
        table.total(),
        100.0 * table.success_rate()
    );
    emit(&[bench_table(&table)], out)?;
    Ok(ExitCode::SUCCESS)
}

fn trial_id(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().and_then(Path::file_name) {
        Some(dir) if stem == "trajectory" => dir.to_string_lossy().into_owned(),
        _ => stem,
    }
}

pub fn stats(
    logs: &[PathBuf],
    seed: u64,
    n_boot: usize,
    sample_size: usize,
    plddt_floor: f64,
    out: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    if n_boot == 0 {
        return Err(usage("--n-boot", "must be at least 1"));
    }
    if sample_size == 0 {
        return Err(usage("--sample-size", "must be at least 1"));
    }
    eprintln!("seed: {seed}");
    let mut trials = Vec::new();
    let mut rows = Vec::new();
    for path in logs {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let t = Trajectory::from_jsonl(&text).with_context(|| format!("replaying {}", path.display()))?;
        let id = trial_id(path);
        let (series, per_step) = trial_from_trajectory(&id, &t, plddt_floor);
        rows.extend(per_step.into_iter().enumerate().map(|(i, p)| (id.clone(), i + 1, p)));
        trials.push(series);
    }
    let mut tables = vec![percentile_table(&rows)];
    if trials.len() < sample_size {
        eprintln!("skipping bootstrap: {} trials, need at least {sample_size}", trials.len());
    } else {
        align_trials(&mut trials);
        let cfg = BootstrapConfig { sample_size, n_boot, seed };
        let mut summaries = Vec::new();
        for (key, selector) in [(RMSD_P5, Selector::Minimize), (PLDDT_P95, Selector::Maximize), (INCLUSION, Selector::Maximize)] {
            if trials[0].metrics.contains_key(key) {
                summaries.push((key.to_string(), bootstrap_best_of_n(&trials, key, selector, &cfg)?));
            }
        }
        tables.push(bootstrap_table(&summaries));
    }
    emit(&tables, out)?;
    Ok(ExitCode::SUCCESS)
}
