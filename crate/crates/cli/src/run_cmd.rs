use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use rsgym::agent::{
    run_trajectory, write_run_dir, HttpClient, LlmClient, ModelProfile, ReasoningMode, ReplayClient, ReqwestTransport,
    Transcript,
};
use rsgym::config::{BackendKind, RunConfig};

use crate::io::print_json;
use crate::{usage, RunArgs};

fn apply_overrides(cfg: &mut RunConfig, args: &RunArgs) -> anyhow::Result<()> {
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(r) = args.replicas {
        if r == 0 {
            return Err(usage("--replicas", "must be at least 1"));
        }
        cfg.replicas = r;
    }
    if let Some(b) = args.budget {
        if b == 0 {
            return Err(usage("--budget", "must be at least 1"));
        }
        cfg.budget.max_queries = b;
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(usage("--workers", "must be at least 1"));
        }
        cfg.workers = w;
    }
    if let Some(kind) = args.backend {
        let present = match kind {
            BackendKind::Mock => cfg.backend.mock.is_some(),
            BackendKind::External => cfg.backend.external.is_some(),
        };
        if !present {
            return Err(usage("--backend", format!("the config has no backend.{kind:?} section").to_lowercase()));
        }
        cfg.backend.kind = kind;
    }
    if let Some(m) = &args.model {
        match cfg.model.as_mut() {
            Some(profile) => profile.model = m.clone(),
            None => return Err(usage("--model", "the config has no [model] profile to apply it to")),
        }
    }
    Ok(())
}

/// Runs a trajectory with a live client, or with a replayed transcript.
pub fn run(args: &RunArgs, transcript: Option<&Path>) -> anyhow::Result<ExitCode> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, args)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| usage("--out", "no output directory given and none in the config"))?;
    let seed = cfg.seed.unwrap_or_else(rand::random);
    eprintln!("seed: {seed}");
    let prepared = cfg.prepare()?;
    let task = prepared.task();

    let replay;
    let http;
    let (client, profile): (&dyn LlmClient, ModelProfile) = match transcript {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let t: Transcript = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            replay = ReplayClient::new(t);
            (&replay, cfg.model.clone().unwrap_or_else(|| ModelProfile::replay(ReasoningMode::Native)))
        }
        None => {
            let profile = cfg.model.clone().ok_or_else(|| usage("--config", "a live run needs a [model] profile"))?;
            http = HttpClient::new(ReqwestTransport::new(Duration::from_secs(300)).map_err(anyhow::Error::msg)?);
            (&http, profile)
        }
    };

    let session = run_trajectory(&task, prepared.initial.clone(), client, &profile, cfg.budget, seed)?;
    write_run_dir(&session, &out).with_context(|| format!("writing {}", out.display()))?;
    print_json(&session.report());
    Ok(ExitCode::SUCCESS)
}
