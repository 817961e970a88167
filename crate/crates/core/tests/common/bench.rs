//! Hand-labeled replay fixtures for the penalty benchmark.

use rsgym::agent::{ModelProfile, ReasoningMode, ReplayClient};
use rsgym::evalkit::{bench_prompts, run_penalty_bench, BenchTable, Syntax};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct Labeled {
    pub prompt_id: String,
    pub text: String,
    pub label: bool,
}

pub fn labeled(syntax: Syntax) -> Vec<Labeled> {
    let path = format!("{}/tests/fixtures/bench/{}.jsonl", env!("CARGO_MANIFEST_DIR"), syntax.as_str());
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Replays `items` (ten per prompt, in prompt order) through the harness.
pub fn replay(items: &[Labeled], syntax: Syntax) -> BenchTable {
    let prompts = bench_prompts();
    for (i, item) in items.iter().enumerate() {
        assert_eq!(item.prompt_id, prompts[i / 10].id, "fixture order");
    }
    let client = ReplayClient::from_texts(items.iter().map(|i| i.text.clone()));
    let profile = ModelProfile::replay(ReasoningMode::Native);
    let table = run_penalty_bench(&prompts, &client, &profile, syntax, 10).unwrap();
    assert_eq!(client.served(), items.len());
    table
}
