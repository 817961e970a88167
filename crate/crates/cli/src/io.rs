use std::io::Read;
use std::path::Path;

use anyhow::Context;
use rsgym::config::RunConfig;
use rsgym::script::EnvConfig;

/// Reads a file, or standard input for `-`.
pub fn read_input(input: &str) -> anyhow::Result<String> {
    if input == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading standard input")?;
        Ok(s)
    } else {
        std::fs::read_to_string(input).with_context(|| format!("reading {input}"))
    }
}

pub fn source_name(input: &str) -> String {
    if input == "-" {
        "<stdin>".into()
    } else {
        input.into()
    }
}

pub fn env_from(config: Option<&Path>) -> anyhow::Result<EnvConfig> {
    Ok(match config {
        Some(p) => RunConfig::load(p)?.env,
        None => EnvConfig::default(),
    })
}

pub fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("output serializes"));
}
