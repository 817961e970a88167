//! Evaluation statistics: the penalty-generation benchmark, ensemble
//! percentiles, and best-of-n bootstrap over trials.

mod bench;
mod report;
mod stats;

pub use bench::{
    bench_prompts, bench_system_prompt, extract_response, grade_generation, parse_prompt, reference_penalty_for_prompt,
    run_penalty_bench, BenchError, BenchTable, GenerationResult, Grade, PenaltyBenchPrompt, PromptRow, PromptShape,
    ReferencePenalty, Syntax, GRADE_MAX_COUNT,
};
pub use report::{bench_table, bootstrap_table, emit_report, fmt_plddt, fmt_rate, fmt_rmsd_milli, percentile_table, Table};
pub use stats::{
    align_trials, bootstrap_best_of_n, bootstrap_samples, check_trials, ensemble_percentiles, nearest_rank,
    BootstrapConfig, BootstrapSummary, EnsemblePercentiles, Selector, TrialSeries, PLDDT_FLOOR,
};

use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unsupported prompt: {0}")]
    UnsupportedPromptShape(String),
    #[error("need at least {need} trials, got {got}")]
    InsufficientTrials { need: usize, got: usize },
    #[error("every design is below the pLDDT floor")]
    AllFiltered,
    #[error("inconsistent trials: {0}")]
    InconsistentTrials(String),
}

pub const RMSD_P5: &str = "rmsd_p5";
pub const PLDDT_P95: &str = "plddt_p95";
pub const INCLUSION: &str = "trf_core_inclusion";

/// Per-step percentiles of one trajectory, skipping step 0. Steps whose
/// designs are all filtered hold NaN. NCAA trajectories also carry the
/// percentage of designs with exactly one TRF in the core.
pub fn trial_from_trajectory(trial_id: &str, t: &Trajectory, plddt_floor: f64) -> (TrialSeries, Vec<Option<EnsemblePercentiles>>) {
    let mut rmsd = Vec::new();
    let mut plddt = Vec::new();
    let mut inclusion = Vec::new();
    let mut raw = Vec::new();
    for step in t.steps.iter().skip(1) {
        let p = ensemble_percentiles(&step.ensemble.records, plddt_floor).ok();
        rmsd.push(p.map_or(f64::NAN, |p| p.rmsd_p5));
        plddt.push(p.map_or(f64::NAN, |p| p.plddt_p95));
        let trf = t.summary(step.index).and_then(|s| s.trf);
        inclusion.push(trf.map_or(f64::NAN, |s| s.exactly_one_core_percent));
        raw.push(p);
    }
    let mut metrics: std::collections::BTreeMap<String, Vec<f64>> =
        [(RMSD_P5.to_string(), rmsd), (PLDDT_P95.to_string(), plddt)].into_iter().collect();
    if t.task == crate::trajectory::TaskKind::Ncaa {
        metrics.insert(INCLUSION.into(), inclusion);
    }
    (TrialSeries { trial_id: trial_id.into(), metrics }, raw)
}
