//! Non-dominated selection over record metrics.

use serde::{Deserialize, Serialize};

use super::TrajectoryError;
use crate::backend::DesignRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub key: String,
    pub direction: Direction,
}

impl Objective {
    pub fn min(key: &str) -> Self {
        Self { key: key.into(), direction: Direction::Minimize }
    }

    pub fn max(key: &str) -> Self {
        Self { key: key.into(), direction: Direction::Maximize }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveSpec {
    objectives: Vec<Objective>,
}

impl ObjectiveSpec {
    pub fn new(objectives: Vec<Objective>) -> Result<Self, TrajectoryError> {
        if objectives.is_empty() {
            return Err(TrajectoryError::InvalidObjectives("at least one objective is required".into()));
        }
        Ok(Self { objectives })
    }

    /// Fold recovery: predicted-fold RMSD, confidence, and energy.
    pub fn canonical() -> Self {
        Self { objectives: vec![Objective::min("fold_rmsd"), Objective::max("plddt"), Objective::min("total_energy")] }
    }

    /// Single noncanonical residue in the core.
    pub fn ncaa() -> Self {
        Self {
            objectives: vec![
                Objective::max("exactly_one_trf_in_core"),
                Objective::min("total_energy"),
                Objective::min("cavity_volume"),
                Objective::min("radius_of_gyration"),
                Objective::min("rmsd_to_reference"),
            ],
        }
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    /// First objective other than total energy, used for history deltas.
    pub fn progress_key(&self) -> Option<&str> {
        self.objectives.iter().map(|o| o.key.as_str()).find(|k| *k != "total_energy")
    }

    /// Metric vector oriented for minimisation, or `None` if a key is missing.
    pub fn point(&self, r: &DesignRecord) -> Option<Vec<f64>> {
        self.objectives
            .iter()
            .map(|o| {
                let v = r.metric(&o.key).filter(|v| !v.is_nan())?;
                Some(match o.direction {
                    Direction::Minimize => v,
                    Direction::Maximize => -v,
                })
            })
            .collect()
    }
}

/// Indices of the non-dominated points, all coordinates minimised, in
/// ascending order. Identical points never dominate each other. Coordinates
/// must not be NaN.
///
/// Points are visited in lexicographic order; a dominator always sorts
/// before what it dominates, so each point is only tested against the front
/// kept so far.
pub fn pareto_indices(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let p = &points[i];
        let dominated = front.iter().any(|&j| {
            let q = &points[j];
            q.iter().zip(p).all(|(a, b)| a <= b) && q.iter().zip(p).any(|(a, b)| a < b)
        });
        if !dominated {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Indices into the input slice.
    pub indices: Vec<usize>,
    pub ids: Vec<String>,
    /// Ids of records lacking an objective metric.
    pub excluded: Vec<String>,
}

pub fn pareto_front(records: &[DesignRecord], spec: &ObjectiveSpec) -> Result<ParetoFront, TrajectoryError> {
    if records.is_empty() {
        return Err(TrajectoryError::EmptyInput);
    }
    let mut kept = Vec::new();
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match spec.point(r) {
            Some(p) => {
                kept.push(i);
                points.push(p);
            }
            None => excluded.push(r.id.clone()),
        }
    }
    if kept.is_empty() {
        return Err(TrajectoryError::NoScorableRecords(excluded));
    }
    let indices: Vec<usize> = pareto_indices(&points).into_iter().map(|k| kept[k]).collect();
    let ids = indices.iter().map(|&i| records[i].id.clone()).collect();
    Ok(ParetoFront { indices, ids, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_basics() {
        assert_eq!(pareto_indices(&[vec![1.0, 1.0]]), vec![0]);
        assert_eq!(pareto_indices(&[vec![2.0, 2.0], vec![1.0, 1.0]]), vec![1]);
        assert_eq!(pareto_indices(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![1.0, 2.0]]), vec![0, 1, 2]);
        assert_eq!(pareto_indices(&[vec![1.0, 2.0], vec![1.0, 3.0]]), vec![0]);
        assert!(pareto_indices(&[]).is_empty());
    }

    #[test]
    fn empty_spec_is_rejected() {
        assert!(ObjectiveSpec::new(vec![]).is_err());
        assert_eq!(ObjectiveSpec::canonical().progress_key(), Some("fold_rmsd"));
    }
}
