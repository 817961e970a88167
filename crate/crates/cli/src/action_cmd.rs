use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use rsgym::action::{extract_first_action_with, validate_action, ActionArgs};
use rsgym::script::{instantiate_script, EnvConfig};
use serde_json::json;

use crate::io::{env_from, print_json, read_input};
use crate::usage;

fn decode(text: &str, step: usize, env: &EnvConfig, tags: &[(String, String)]) -> anyhow::Result<ActionArgs> {
    let envelope = extract_first_action_with(text, tags)?;
    Ok(validate_action(&envelope, step, &env.palette())?)
}

pub fn parse_action(input: &str, step: usize, tags: Option<Vec<String>>, config: Option<&Path>) -> anyhow::Result<ExitCode> {
    let env = env_from(config)?;
    let tags: Vec<(String, String)> = match tags.as_deref() {
        Some([open, close]) if !open.is_empty() && open != close => vec![(open.clone(), close.clone())],
        Some(_) => return Err(usage("--reasoning-tags", "need two distinct, non-empty tags")),
        None => Vec::new(),
    };
    match decode(&read_input(input)?, step, &env, &tags) {
        Ok(args) => {
            print_json(&json!({ "ok": true, "action": args }));
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            print_json(&json!({ "ok": false, "error": e.to_string() }));
            Ok(ExitCode::from(1))
        }
    }
}

pub fn render_script(input: &str, step: usize, config: Option<&Path>, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let env = env_from(config)?;
    let text = read_input(input)?;
    let args = match serde_json::from_str::<ActionArgs>(&text) {
        Ok(args) => args,
        Err(_) => decode(&text, step.saturating_sub(1), &env, &[])?,
    };
    let doc = instantiate_script(&args, &env, step)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join(format!("step_{step:02}.xml")), &doc.text)?;
        for f in &doc.files {
            std::fs::write(dir.join(&f.name), &f.contents)?;
        }
    }
    print!("{}", doc.text);
    Ok(ExitCode::SUCCESS)
}
