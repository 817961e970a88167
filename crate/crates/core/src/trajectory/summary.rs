//! Ensemble statistics and their text rendering.
//!
//! [`summarize`] reduces an ensemble to an [`EnsembleSummary`]; [`render_summary`]
//! lays it out for one of the two task formats.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::backend::{DesignRecord, COMPOSITION_POST, COMPOSITION_PRE, RAMA, REPULSION};
use crate::residue::code;

/// Label used for fold-prediction metrics in state text.
pub const PREDICTOR_LABEL: &str = "ESMFold";

const OUTLIER_INTRO: &str = "- Top 5 most common outlier residue types. A residue is an outlier if its energy term is above the 90-th quantile of the per-residue energy term for that design. For each outlier residue type, we include the most common outlier positions along the sequence (positions are 1-based):";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Canonical,
    Ncaa,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierEntry {
    pub residue: String,
    /// Share of designs with at least one outlier of this type, in percent.
    pub percent: f64,
    pub occurrences: usize,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierTable {
    pub term: String,
    pub mean_quantile: f64,
    pub entries: Vec<OutlierEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrfSummary {
    pub core_positions: Vec<usize>,
    pub any_percent: f64,
    pub count_min: usize,
    pub count_max: usize,
    pub exactly_one_core_percent: f64,
    pub core_min: usize,
    pub core_max: usize,
    pub common_positions: Vec<usize>,
    pub repulsion: Option<MeanStd>,
    pub rama: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricLine {
    pub label: String,
    pub value: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub designs: usize,
    pub pareto: usize,
    pub energy: MeanStd,
    /// Mean composition energy before and after design.
    pub composition: Option<(f64, f64)>,
    pub trf: Option<TrfSummary>,
    pub outliers: Vec<OutlierTable>,
    pub structural: Vec<MetricLine>,
}

/// Nearest-rank 90th percentile: the `ceil(0.9 n)`-th smallest value.
pub fn quantile90(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (9 * v.len()).div_ceil(10).max(1);
    v[rank - 1]
}

/// 0-based indices whose value is strictly above the design's 90th percentile.
pub fn outlier_positions(values: &[f64]) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let q = quantile90(values);
    values.iter().enumerate().filter(|(_, v)| **v > q).map(|(i, _)| i).collect()
}

/// Positions whose count is at least half the largest count, most frequent first.
fn common_positions(freq: &BTreeMap<usize, usize>) -> Vec<usize> {
    let max = freq.values().copied().max().unwrap_or(0);
    let mut v: Vec<(usize, usize)> = freq.iter().filter(|(_, c)| 2 * **c >= max).map(|(p, c)| (*p, *c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(p, _)| p).collect()
}

fn outlier_table(records: &[DesignRecord], term: &str) -> Option<OutlierTable> {
    let mut quantiles = Vec::new();
    let mut designs: BTreeMap<String, usize> = BTreeMap::new();
    let mut occurrences: BTreeMap<String, usize> = BTreeMap::new();
    let mut positions: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    for r in records {
        let Some(values) = r.per_residue.get(term).filter(|v| !v.is_empty()) else { continue };
        quantiles.push(quantile90(values));
        let mut seen = BTreeSet::new();
        for i in outlier_positions(values) {
            let Some(aa) = r.sequence.0.get(i) else { continue };
            let name = aa.as_str().to_string();
            *occurrences.entry(name.clone()).or_default() += 1;
            *positions.entry(name.clone()).or_default().entry(i + 1).or_default() += 1;
            seen.insert(name);
        }
        for name in seen {
            *designs.entry(name).or_default() += 1;
        }
    }
    if quantiles.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    let mut entries: Vec<OutlierEntry> = designs
        .into_iter()
        .map(|(residue, d)| OutlierEntry {
            percent: 100.0 * d as f64 / n,
            occurrences: occurrences[&residue],
            positions: common_positions(&positions[&residue]),
            residue,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.percent
            .total_cmp(&a.percent)
            .then(b.occurrences.cmp(&a.occurrences))
            .then(a.residue.cmp(&b.residue))
    });
    entries.truncate(5);
    Some(OutlierTable { term: term.into(), mean_quantile: MeanStd::of(&quantiles)?.mean, entries })
}

fn trf_summary(records: &[DesignRecord]) -> TrfSummary {
    let trf = code("TRF");
    let n = records.len() as f64;
    let mut core: BTreeSet<usize> = BTreeSet::new();
    let mut counts = Vec::new();
    let mut core_counts = Vec::new();
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    let (mut rep, mut rama) = (Vec::new(), Vec::new());
    for r in records {
        core.extend(r.core_positions.iter().copied());
        let mut c = 0;
        for (i, aa) in r.sequence.0.iter().enumerate() {
            if *aa != trf {
                continue;
            }
            c += 1;
            *freq.entry(i + 1).or_default() += 1;
            if let Some(v) = r.per_residue.get(REPULSION).and_then(|v| v.get(i)) {
                rep.push(*v);
            }
            if let Some(v) = r.per_residue.get(RAMA).and_then(|v| v.get(i)) {
                rama.push(*v);
            }
        }
        counts.push(c);
        core_counts.push(r.core_count(trf));
    }
    TrfSummary {
        core_positions: core.into_iter().collect(),
        any_percent: 100.0 * counts.iter().filter(|c| **c > 0).count() as f64 / n,
        count_min: counts.iter().copied().min().unwrap_or(0),
        count_max: counts.iter().copied().max().unwrap_or(0),
        exactly_one_core_percent: 100.0 * core_counts.iter().filter(|c| **c == 1).count() as f64 / n,
        core_min: core_counts.iter().copied().min().unwrap_or(0),
        core_max: core_counts.iter().copied().max().unwrap_or(0),
        common_positions: common_positions(&freq),
        repulsion: MeanStd::of(&rep),
        rama: MeanStd::of(&rama),
    }
}

fn metric_line(records: &[DesignRecord], label: String, f: impl Fn(&DesignRecord) -> Option<f64>) -> Option<MetricLine> {
    let values: Vec<f64> = records.iter().filter_map(f).collect();
    MeanStd::of(&values).map(|value| MetricLine { label, value })
}

/// Statistics over all designs of an ensemble. Returns `None` when empty.
pub fn summarize(records: &[DesignRecord], pareto: usize, task: TaskKind) -> Option<EnsembleSummary> {
    if records.is_empty() {
        return None;
    }
    let energies: Vec<f64> = records.iter().map(DesignRecord::total_energy).collect();
    let pre: Vec<f64> = records.iter().filter_map(|r| r.score(COMPOSITION_PRE)).collect();
    let post: Vec<f64> = records.iter().filter_map(|r| r.score(COMPOSITION_POST)).collect();
    let composition = match (MeanStd::of(&pre), MeanStd::of(&post)) {
        (Some(a), Some(b)) => Some((a.mean, b.mean)),
        _ => None,
    };
    let outliers = [REPULSION, RAMA].iter().filter_map(|t| outlier_table(records, t)).collect();
    let mut structural: Vec<MetricLine> = vec![
        metric_line(records, "Cavity volume (Å^3)".into(), |r| Some(r.structure_metrics.cavity_volume)),
        metric_line(records, "Radius of gyration (Å)".into(), |r| Some(r.structure_metrics.radius_of_gyration)),
        metric_line(records, "Penalty for buried unsatisfied Hydrogen bonds".into(), |r| Some(r.structure_metrics.buried_unsat_penalty)),
    ]
    .into_iter()
    .flatten()
    .collect();
    match task {
        TaskKind::Canonical => {
            structural.extend(metric_line(
                records,
                format!("RMSD of {PREDICTOR_LABEL} prediction to initial structure (Å)"),
                |r| r.progress_metrics.map(|p| p.fold_rmsd),
            ));
            structural.extend(metric_line(records, format!("CA pLDDT of {PREDICTOR_LABEL} prediction"), |r| {
                r.progress_metrics.map(|p| p.plddt)
            }));
        }
        TaskKind::Ncaa => {
            structural.extend(metric_line(records, "RMSD to initial structure (Å)".into(), |r| {
                Some(r.structure_metrics.rmsd_to_reference)
            }));
        }
    }
    Some(EnsembleSummary {
        designs: records.len(),
        pareto,
        energy: MeanStd::of(&energies)?,
        composition,
        trf: (task == TaskKind::Ncaa).then(|| trf_summary(records)),
        outliers,
        structural,
    })
}

/// Two-decimal formatting without a negative zero.
fn f2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn pm(m: &MeanStd) -> String {
    format!("{} ± {}", f2(m.mean), f2(m.std))
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn pm_or_na(m: &Option<MeanStd>) -> String {
    m.as_ref().map(pm).unwrap_or_else(|| "n/a".into())
}

/// State text for one ensemble in the layout of `task`.
pub fn render_summary(s: &EnsembleSummary, task: TaskKind) -> String {
    let mut blocks: Vec<String> = vec![
        format!("- Number of designs: {} ({} Pareto optimal)", s.designs, s.pareto),
        format!("- Average total Rosetta energy: {}", pm(&s.energy)),
    ];
    if let Some((before, after)) = s.composition {
        let delta = format!("{:+.2}", after - before).replace("-0.00", "+0.00");
        blocks.push(format!("- Average compositional before design {}, and after design {} ({delta})", f2(before), f2(after)));
    }
    if let Some(t) = &s.trf {
        blocks.push(
            [
                "- TRF inclusion summary:".to_string(),
                format!("-- List of core residue indices after design: {}", join(&t.core_positions)),
                format!(
                    "-- Percentage of designs with at least one TRF residue: {}% (min: {}, max: {})",
                    f2(t.any_percent),
                    t.count_min,
                    t.count_max
                ),
                format!(
                    "-- Percentage of designs with exactly one TRF residue in the core: {}% (min: {}, max: {})",
                    f2(t.exactly_one_core_percent),
                    t.core_min,
                    t.core_max
                ),
                format!("-- Most common TRF residue positions: {}", join(&t.common_positions)),
                format!("-- Average {REPULSION} at TRF residues: {}", pm_or_na(&t.repulsion)),
                format!("-- Average {RAMA} at TRF residues: {}", pm_or_na(&t.rama)),
            ]
            .join("\n"),
        );
    }
    if !s.outliers.is_empty() {
        blocks.push(OUTLIER_INTRO.into());
        for t in &s.outliers {
            blocks.push(format!("-- {}:", t.term));
            blocks.push(format!("Average per-sequence 90-th quantile: {}", f2(t.mean_quantile)));
            let lines: Vec<String> = t
                .entries
                .iter()
                .map(|e| format!("{}: {:<8}(positions: {})", e.residue, format!("{}%", f2(e.percent)), join(&e.positions)))
                .collect();
            if !lines.is_empty() {
                blocks.push(lines.join("\n"));
            }
        }
    }
    if !s.structural.is_empty() {
        blocks.push("- Structural metrics:".into());
        let lines: Vec<String> = s
            .structural
            .iter()
            .map(|m| match task {
                TaskKind::Canonical => format!("{:<51}:{:>8} ± {}", m.label, f2(m.value.mean), f2(m.value.std)),
                TaskKind::Ncaa => format!("{:<45}:{:>9} ± {}", m.label, f2(m.value.mean), f2(m.value.std)),
            })
            .collect();
        blocks.push(lines.join("\n"));
    }
    blocks.join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_quantile() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantile90(&v), 9.0);
        assert_eq!(outlier_positions(&v), vec![9]);
        let w: Vec<f64> = (1..=15).map(f64::from).collect();
        assert_eq!(quantile90(&w), 14.0);
        assert_eq!(outlier_positions(&[1.0, 1.0, 1.0]), Vec::<usize>::new());
        assert_eq!(quantile90(&[5.0]), 5.0);
    }

    #[test]
    fn population_std() {
        let m = MeanStd::of(&[1.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert!(MeanStd::of(&[]).is_none());
    }

    #[test]
    fn formatting_avoids_negative_zero() {
        assert_eq!(f2(-0.001), "0.00");
        assert_eq!(f2(-1.005), "-1.00");
    }

    #[test]
    fn common_positions_keep_at_least_half_the_max() {
        let freq: BTreeMap<usize, usize> = [(3, 4), (7, 2), (9, 1), (1, 4)].into_iter().collect();
        assert_eq!(common_positions(&freq), vec![1, 3, 7]);
    }
}
