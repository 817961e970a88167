//! Tabular summary of the actions taken so far.

use super::Trajectory;

fn mean_metric(t: &Trajectory, index: usize, key: &str) -> Option<f64> {
    let recs = &t.steps[index].ensemble.records;
    let v: Vec<f64> = recs.iter().filter_map(|r| r.metric(key)).filter(|x| x.is_finite()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}").replace("-0.00", "0.00")).unwrap_or_else(|| "n/a".into())
}

fn delta(now: Option<f64>, before: Option<f64>) -> String {
    match (now, before) {
        (Some(a), Some(b)) => format!("{:+.2}", a - b).replace("-0.00", "+0.00"),
        _ => "n/a".into(),
    }
}

/// One row per step after the initial state.
pub fn history_table(t: &Trajectory) -> String {
    let key = t.objectives.progress_key().unwrap_or("total_energy");
    let mut lines = vec![
        format!("| Step | Parent | Action | Designs | Pareto | Avg total energy | Δ energy | Avg {key} | Δ {key} | Note |"),
        "|---|---|---|---|---|---|---|---|---|---|".to_string(),
    ];
    let live = t.live_path();
    for s in t.steps.iter().skip(1) {
        let parent = s.parent.unwrap_or(0);
        let e = mean_metric(t, s.index, "total_energy");
        let p = mean_metric(t, s.index, key);
        let mut notes = Vec::new();
        if let Some(from) = s.reverted_from {
            notes.push(format!("after go_back_to_step from {from} to {parent}"));
        }
        if !live.contains(&s.index) {
            notes.push("stale".to_string());
        }
        lines.push(format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            s.index,
            parent,
            s.action_name(),
            s.ensemble.succeeded,
            s.pareto_ids.len(),
            cell(e),
            delta(e, mean_metric(t, parent, "total_energy")),
            cell(p),
            delta(p, mean_metric(t, parent, key)),
            notes.join("; ")
        ));
    }
    lines.join("\n")
}

/// The history table followed by the current step.
pub fn history_summary(t: &Trajectory) -> String {
    format!("{}\n\nCurrent step: {}", history_table(t), t.current)
}
