mod common;

use common::world::{bare, doc, mock, start, PLAIN_ROTAMER};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsgym::action::{ActionArgs, RotamerChangeArgs};
use rsgym::backend::{run_ensemble, DesignRecord, EnsembleResult, ProgressMetrics, RunContext, TOTAL};
use rsgym::script::EnvConfig;
use rsgym::trajectory::{
    history_summary, history_table, outlier_positions, pareto_front, pareto_indices, render_summary, summarize, Objective,
    ObjectiveSpec, TaskKind, Trajectory, TrajectoryError,
};

/// Pairwise dominance check over every ordered pair.
fn brute_force(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !(0..points.len()).any(|j| {
                j != i
                    && points[j].iter().zip(&points[i]).all(|(a, b)| a <= b)
                    && points[j].iter().zip(&points[i]).any(|(a, b)| a < b)
            })
        })
        .collect()
}

#[test]
fn pareto_matches_brute_force_on_1000_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let n = rng.gen_range(1..=300);
        let k = rng.gen_range(2..=5);
        // Small integer grids make ties and duplicates common.
        let levels = if case % 2 == 0 { 6 } else { 1000 };
        let points: Vec<Vec<f64>> =
            (0..n).map(|_| (0..k).map(|_| rng.gen_range(0..levels) as f64).collect()).collect();
        assert_eq!(pareto_indices(&points), brute_force(&points), "case {case}");
    }
}

fn metric_record(id: usize, total: f64, cavity: f64, rg: f64) -> DesignRecord {
    let mut r = bare(&format!("d{id}"), "AAAA", vec![0.0; 4], vec![0.0; 4]);
    r.scores.insert(TOTAL.into(), total);
    r.structure_metrics.cavity_volume = cavity;
    r.structure_metrics.radius_of_gyration = rg;
    r
}

fn three_objectives() -> ObjectiveSpec {
    ObjectiveSpec::new(vec![Objective::min("total_energy"), Objective::min("cavity_volume"), Objective::max("radius_of_gyration")])
        .unwrap()
}

#[test]
fn two_hundred_records_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let recs: Vec<DesignRecord> = (0..200)
        .map(|i| metric_record(i, rng.gen_range(-50.0..0.0), rng.gen_range(0.0..30.0), rng.gen_range(9.0..11.0)))
        .collect();
    let spec = three_objectives();
    let pts: Vec<Vec<f64>> = recs.iter().map(|r| spec.point(r).unwrap()).collect();
    let front = pareto_front(&recs, &spec).unwrap();
    assert_eq!(front.indices, brute_force(&pts));
    assert!(front.excluded.is_empty());
}

#[test]
fn pareto_edge_cases() {
    let spec = three_objectives();
    assert_eq!(pareto_front(&[], &spec), Err(TrajectoryError::EmptyInput));
    let one = vec![metric_record(0, -1.0, 1.0, 10.0)];
    assert_eq!(pareto_front(&one, &spec).unwrap().ids, vec!["d0"]);
    let two = vec![metric_record(0, -2.0, 1.0, 10.0), metric_record(1, -1.0, 2.0, 9.0)];
    assert_eq!(pareto_front(&two, &spec).unwrap().ids, vec!["d0"]);
    let mut missing = two.clone();
    missing.push(metric_record(2, -9.0, 0.0, 12.0));
    let canon = ObjectiveSpec::canonical();
    assert!(matches!(pareto_front(&missing, &canon), Err(TrajectoryError::NoScorableRecords(_))));
    missing[2].progress_metrics = Some(ProgressMetrics { fold_rmsd: 1.0, plddt: 0.9 });
    let f = pareto_front(&missing, &canon).unwrap();
    assert_eq!(f.ids, vec!["d2"]);
    assert_eq!(f.excluded, vec!["d0", "d1"]);
}

proptest! {
    #[test]
    fn pareto_is_scale_invariant(
        values in prop::collection::vec((-50i32..0, 0i32..30, 90i32..110), 1..60),
        which in 0usize..3,
        factor in 0.01f64..100.0,
    ) {
        let recs: Vec<DesignRecord> = values.iter().enumerate()
            .map(|(i, (a, b, c))| metric_record(i, *a as f64, *b as f64, *c as f64 / 10.0)).collect();
        let scaled: Vec<DesignRecord> = recs.iter().cloned().map(|mut r| {
            match which {
                0 => { r.scores.insert(TOTAL.into(), r.total_energy() * factor); }
                1 => r.structure_metrics.cavity_volume *= factor,
                _ => r.structure_metrics.radius_of_gyration *= factor,
            }
            r
        }).collect();
        let spec = three_objectives();
        prop_assert_eq!(pareto_front(&recs, &spec).unwrap().ids, pareto_front(&scaled, &spec).unwrap().ids);
    }

    #[test]
    fn outliers_are_at_most_a_tenth(values in prop::collection::vec(0u8..20, 1..200)) {
        let v: Vec<f64> = values.iter().map(|x| *x as f64).collect();
        let flagged = outlier_positions(&v);
        prop_assert!(flagged.len() <= v.len().div_ceil(10));
        let q = rsgym::trajectory::quantile90(&v);
        prop_assert!(flagged.iter().all(|&i| v[i] > q));
    }
}

/// Ten designs of length ten with PHE at 3 and 7. Each design has one
/// spiking position: 3 in four designs, 7 in four, 1 (ALA) in two.
fn crafted() -> Vec<DesignRecord> {
    let spikes = [3, 3, 7, 7, 3, 7, 1, 3, 7, 1];
    spikes
        .iter()
        .enumerate()
        .map(|(d, &p)| {
            let mut rep: Vec<f64> = (0..10).map(|j| 0.1 * j as f64).collect();
            rep[p - 1] = 5.0;
            bare(&format!("c{d}"), "AAFAAAFAAA", rep, vec![0.0; 10])
        })
        .collect()
}

#[test]
fn crafted_outlier_table_matches_hand_count() {
    let s = summarize(&crafted(), 10, TaskKind::Canonical).unwrap();
    let t = &s.outliers[0];
    assert_eq!(t.term, "interresidue_repulsion");
    // Every design keeps 0.9 at position 10 as its ninth smallest value.
    assert!((t.mean_quantile - 0.9).abs() < 1e-12);
    assert_eq!(t.entries.len(), 2);
    assert_eq!(t.entries[0].residue, "PHE");
    assert!((t.entries[0].percent - 80.0).abs() < 1e-12);
    assert_eq!(t.entries[0].positions, vec![3, 7]);
    assert_eq!(t.entries[1].residue, "ALA");
    assert_eq!(t.entries[1].positions, vec![1]);
    assert!(s.outliers[1].entries.is_empty());
    let text = render_summary(&s, TaskKind::Canonical);
    assert!(text.contains("Average per-sequence 90-th quantile: 0.90\n\nPHE: 80.00%  (positions: 3,7)\nALA: 20.00%  (positions: 1)"));
}

#[test]
fn identical_records_have_zero_spread() {
    let mut r = crafted().remove(0);
    r.progress_metrics = Some(ProgressMetrics { fold_rmsd: 2.0, plddt: 0.8 });
    let recs = vec![r; 7];
    let text = render_summary(&summarize(&recs, 7, TaskKind::Canonical).unwrap(), TaskKind::Canonical);
    let spreads: Vec<&str> = text.matches("± ").collect();
    assert_eq!(spreads.len(), 6);
    assert_eq!(text.matches("± 0.00").count(), 6);
}

#[test]
fn exactly_one_core_trf_percentage() {
    let mut recs = Vec::new();
    for d in 0..15 {
        let seq = match d {
            0 | 1 => "A[TRF]AAAA[TRF]",
            2..=5 => "A[TRF]A[TRF]AA[TRF]",
            _ => "AAAAAA[TRF]",
        };
        let mut r = bare(&format!("n{d}"), seq, vec![0.5; 7], vec![0.1; 7]);
        r.core_positions = vec![2, 4];
        recs.push(r);
    }
    let s = summarize(&recs, 3, TaskKind::Ncaa).unwrap();
    let text = render_summary(&s, TaskKind::Ncaa);
    assert!(text.contains("-- Percentage of designs with exactly one TRF residue in the core: 13.33% (min: 0, max: 2)"), "{text}");
    assert!(text.contains("-- Percentage of designs with at least one TRF residue: 100.00% (min: 1, max: 3)"));
    assert!(text.contains("-- List of core residue indices after design: 2,4\n"));
    assert!(text.contains("-- Most common TRF residue positions: 7\n"));
}

fn rotamer() -> ActionArgs {
    ActionArgs::RotamerChange(RotamerChangeArgs::default())
}

fn fake_ensemble(step: usize, n: usize) -> EnsembleResult {
    let records: Vec<DesignRecord> =
        (0..n).map(|i| metric_record(100 * step + i, -(step as f64) - i as f64, i as f64, 10.0)).collect();
    EnsembleResult { attempted: n, succeeded: n, records, failures: vec![] }
}

fn fresh() -> Trajectory {
    Trajectory::new(fake_ensemble(0, 1).records, 1, TaskKind::Ncaa, three_objectives()).unwrap()
}

#[test]
fn empty_history_is_header_only() {
    let t = fresh();
    assert_eq!(history_table(&t).lines().count(), 2);
    assert!(history_summary(&t).ends_with("Current step: 0"));
}

#[test]
fn revert_is_flagged_and_history_kept() {
    let mut t = fresh();
    for s in 1..=3 {
        t.advance(rotamer(), fake_ensemble(s, 4)).unwrap();
    }
    assert_eq!(t.revert_to(3), Err(TrajectoryError::StepOutOfRange { step: 3, current: 3 }));
    t.revert_to(1).unwrap();
    assert_eq!(t.steps.len(), 4);
    assert_eq!(t.pool(), t.steps[1].pool());
    t.advance(rotamer(), fake_ensemble(4, 4)).unwrap();
    t.advance(rotamer(), fake_ensemble(5, 4)).unwrap();
    let table = history_table(&t);
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[3].starts_with("| 4 | 1 | rotamer_change |"));
    assert!(rows[3].ends_with("after go_back_to_step from 3 to 1 |"));
    assert!(rows[1].ends_with("stale |") && rows[2].ends_with("stale |"));
    assert!(!rows[0].contains("stale") && !rows[4].contains("stale"));
    assert_eq!(t.steps[4].reverted_from, Some(3));
    assert_eq!(t.steps[5].reverted_from, None);
    t.revert_to(0).unwrap();
    assert_eq!(t.pool(), t.steps[0].ensemble.records);
    let replayed = Trajectory::from_jsonl(&t.to_jsonl()).unwrap();
    assert_eq!(replayed, t);
}

#[test]
fn thirty_steps_give_thirty_rows() {
    let mut t = fresh();
    for s in 1..=30 {
        t.advance(rotamer(), fake_ensemble(s, 3)).unwrap();
        assert_eq!(t.steps.len(), s + 1);
    }
    assert_eq!(history_table(&t).lines().count(), 32);
}

#[test]
fn advance_after_revert_draws_from_that_pareto_set() {
    let b = mock(0.0);
    let d = doc(PLAIN_ROTAMER, &EnvConfig::default(), 1);
    let mut t = Trajectory::new(vec![start(&b)], 3, TaskKind::Ncaa, ObjectiveSpec::ncaa()).unwrap();
    for step in 1..=4 {
        let ctx = RunContext { seed: 3, step, workers: 2 };
        let res = run_ensemble(&b, &d, &t.pool(), 16, &ctx).unwrap();
        t.advance(rotamer(), res).unwrap();
        assert!(t.current_step().pareto_ids.len() <= 16);
        assert!(!t.current_step().pareto_ids.is_empty());
    }
    t.revert_to(3).unwrap();
    let ctx = RunContext { seed: 3, step: 5, workers: 2 };
    let res = run_ensemble(&b, &d, &t.pool(), 16, &ctx).unwrap();
    t.advance(rotamer(), res).unwrap();
    let allowed = &t.steps[3].pareto_ids;
    for r in &t.current_step().ensemble.records {
        assert!(allowed.contains(r.parent_id.as_ref().unwrap()));
    }
    assert!(t.state_text(5).unwrap().starts_with("- Number of designs: 16 ("));
}
