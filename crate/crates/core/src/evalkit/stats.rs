//! Percentile summaries and best-of-n bootstrap over independent trials.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::backend::DesignRecord;

/// Nearest-rank percentile, `p` in [0, 1]: the `ceil(p n)`-th smallest value.
pub fn nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePercentiles {
    /// Angstrom.
    pub rmsd_p5: f64,
    /// On the 0 to 1 scale.
    pub plddt_p95: f64,
    pub n_kept: usize,
}

pub const PLDDT_FLOOR: f64 = 0.85;

/// Drops designs below the pLDDT floor, then takes the 5th percentile of
/// RMSD and the 95th of pLDDT. Designs without metrics are dropped too.
pub fn ensemble_percentiles(records: &[DesignRecord], plddt_floor: f64) -> Result<EnsemblePercentiles, EvalError> {
    let kept: Vec<_> = records
        .iter()
        .filter_map(|r| r.progress_metrics.as_ref())
        .filter(|m| m.plddt >= plddt_floor)
        .collect();
    if kept.is_empty() {
        return Err(EvalError::AllFiltered);
    }
    let rmsd: Vec<f64> = kept.iter().map(|m| m.fold_rmsd).collect();
    let plddt: Vec<f64> = kept.iter().map(|m| m.plddt).collect();
    Ok(EnsemblePercentiles {
        rmsd_p5: nearest_rank(&rmsd, 0.05).expect("non-empty"),
        plddt_p95: nearest_rank(&plddt, 0.95).expect("non-empty"),
        n_kept: kept.len(),
    })
}

/// Per-step metric values of one trial. Missing steps hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSeries {
    pub trial_id: String,
    pub metrics: BTreeMap<String, Vec<f64>>,
}

impl TrialSeries {
    pub fn steps(&self) -> usize {
        self.metrics.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Best finite value of `key` over all steps.
    pub fn best(&self, key: &str, selector: Selector) -> Option<f64> {
        self.metrics.get(key)?.iter().copied().filter(|v| v.is_finite()).reduce(|a, b| selector.pick(a, b))
    }
}

/// Checks that all trials share metric keys and step counts.
pub fn check_trials(trials: &[TrialSeries]) -> Result<(), EvalError> {
    let Some(first) = trials.first() else { return Ok(()) };
    let keys: Vec<&String> = first.metrics.keys().collect();
    let steps = first.steps();
    for t in trials {
        if t.metrics.keys().collect::<Vec<_>>() != keys {
            return Err(EvalError::InconsistentTrials(format!("trial {} has different metric keys", t.trial_id)));
        }
        if t.metrics.values().any(|v| v.len() != steps) {
            return Err(EvalError::InconsistentTrials(format!("trial {} does not have {steps} steps", t.trial_id)));
        }
    }
    Ok(())
}

/// Pads every series with NaN to the longest step count.
pub fn align_trials(trials: &mut [TrialSeries]) {
    let steps = trials.iter().map(TrialSeries::steps).max().unwrap_or(0);
    for t in trials {
        for v in t.metrics.values_mut() {
            v.resize(steps, f64::NAN);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Minimize,
    Maximize,
}

impl Selector {
    pub fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Selector::Minimize => a.min(b),
            Selector::Maximize => a.max(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub median: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub sample_size: usize,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { sample_size: 8, n_boot: 1000, seed: 0 }
    }
}

/// Selected value of each bootstrap sample: the best trial-step among
/// `sample_size` trials drawn without replacement.
pub fn bootstrap_samples(best: &[f64], selector: Selector, cfg: &BootstrapConfig) -> Result<Vec<f64>, EvalError> {
    if cfg.sample_size == 0 || best.len() < cfg.sample_size {
        return Err(EvalError::InsufficientTrials { need: cfg.sample_size.max(1), got: best.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_boot)
        .map(|_| {
            sample(&mut rng, best.len(), cfg.sample_size)
                .iter()
                .map(|i| best[i])
                .reduce(|a, b| selector.pick(a, b))
                .expect("sample is non-empty")
        })
        .collect())
}

/// Median and 95% interval of the best-of-`sample_size` value for `key`.
pub fn bootstrap_best_of_n(
    trials: &[TrialSeries],
    key: &str,
    selector: Selector,
    cfg: &BootstrapConfig,
) -> Result<BootstrapSummary, EvalError> {
    check_trials(trials)?;
    let best: Vec<f64> = trials
        .iter()
        .map(|t| t.best(key, selector).ok_or_else(|| EvalError::InconsistentTrials(format!("trial {} has no finite {key}", t.trial_id))))
        .collect::<Result<_, _>>()?;
    let picks = bootstrap_samples(&best, selector, cfg)?;
    Ok(BootstrapSummary {
        median: nearest_rank(&picks, 0.5).expect("n_boot >= 1"),
        ci95_low: nearest_rank(&picks, 0.025).expect("n_boot >= 1"),
        ci95_high: nearest_rank(&picks, 0.975).expect("n_boot >= 1"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, key: &str, v: Vec<f64>) -> TrialSeries {
        TrialSeries { trial_id: id.into(), metrics: [(key.to_string(), v)].into_iter().collect() }
    }

    #[test]
    fn nearest_rank_on_one_to_hundred() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.05), Some(5.0));
        assert_eq!(nearest_rank(&v, 0.95), Some(95.0));
        assert_eq!(nearest_rank(&v, 0.0), Some(1.0));
        assert_eq!(nearest_rank(&v, 1.0), Some(100.0));
        assert_eq!(nearest_rank(&[], 0.5), None);
    }

    #[test]
    fn constant_trials_have_zero_width() {
        let trials: Vec<_> = (0..16).map(|i| series(&i.to_string(), "rmsd", vec![2.5, 3.0])).collect();
        let s = bootstrap_best_of_n(&trials, "rmsd", Selector::Minimize, &BootstrapConfig::default()).unwrap();
        assert_eq!(s, BootstrapSummary { median: 2.5, ci95_low: 2.5, ci95_high: 2.5 });
    }

    #[test]
    fn too_few_trials() {
        let trials: Vec<_> = (0..7).map(|i| series(&i.to_string(), "rmsd", vec![1.0])).collect();
        let err = bootstrap_best_of_n(&trials, "rmsd", Selector::Minimize, &BootstrapConfig::default()).unwrap_err();
        assert_eq!(err, EvalError::InsufficientTrials { need: 8, got: 7 });
    }

    #[test]
    fn mismatched_trials_are_rejected() {
        let trials = vec![series("a", "rmsd", vec![1.0, 2.0]), series("b", "rmsd", vec![1.0])];
        assert!(matches!(check_trials(&trials), Err(EvalError::InconsistentTrials(_))));
        let mut trials = trials;
        align_trials(&mut trials);
        check_trials(&trials).unwrap();
        assert_eq!(trials[1].best("rmsd", Selector::Maximize), Some(1.0));
    }
}
