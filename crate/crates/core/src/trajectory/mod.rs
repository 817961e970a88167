//! Step history, Pareto selection, and the text the agent sees.

mod history;
mod pareto;
mod summary;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::action::ActionArgs;
use crate::backend::{DesignRecord, EnsembleResult};

pub use history::{history_summary, history_table};
pub use pareto::{pareto_front, pareto_indices, Direction, Objective, ObjectiveSpec, ParetoFront};
pub use summary::{
    outlier_positions, quantile90, render_summary, summarize, EnsembleSummary, MeanStd, MetricLine, OutlierEntry,
    OutlierTable, TaskKind, TrfSummary, PREDICTOR_LABEL,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("no records to select from")]
    EmptyInput,
    #[error("no record carries every objective metric ({} excluded)", .0.len())]
    NoScorableRecords(Vec<String>),
    #[error("step {step} is out of range; the current step is {current}")]
    StepOutOfRange { step: usize, current: usize },
    #[error("invalid objectives: {0}")]
    InvalidObjectives(String),
    #[error("trajectory log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub index: usize,
    /// `None` for the initial state.
    pub action: Option<ActionArgs>,
    pub ensemble: EnsembleResult,
    pub pareto_ids: Vec<String>,
    /// Step whose Pareto set seeded this one.
    pub parent: Option<usize>,
    /// Set when this step followed a revert; holds the step reverted from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverted_from: Option<usize>,
}

impl TrajectoryStep {
    pub fn pool(&self) -> Vec<DesignRecord> {
        let keep: BTreeSet<&str> = self.pareto_ids.iter().map(String::as_str).collect();
        self.ensemble.records.iter().filter(|r| keep.contains(r.id.as_str())).cloned().collect()
    }

    pub fn action_name(&self) -> &'static str {
        self.action.as_ref().map(|a| a.name().as_str()).unwrap_or("initial")
    }
}

/// One line of the append-only trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Start { seed: u64, task: TaskKind, objectives: ObjectiveSpec },
    Step(TrajectoryStep),
    Revert { from: usize, to: usize },
    Queries { used: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub current: usize,
    pub seed: u64,
    pub task: TaskKind,
    pub objectives: ObjectiveSpec,
    pub query_budget_used: usize,
    pending_revert: Option<usize>,
    events: Vec<LogEvent>,
}

impl Trajectory {
    /// Starts at step 0 whose pool is every initial structure.
    pub fn new(initial: Vec<DesignRecord>, seed: u64, task: TaskKind, objectives: ObjectiveSpec) -> Result<Self, TrajectoryError> {
        if initial.is_empty() {
            return Err(TrajectoryError::EmptyInput);
        }
        let step = TrajectoryStep {
            index: 0,
            action: None,
            pareto_ids: initial.iter().map(|r| r.id.clone()).collect(),
            ensemble: EnsembleResult { attempted: initial.len(), succeeded: initial.len(), records: initial, failures: vec![] },
            parent: None,
            reverted_from: None,
        };
        Ok(Self {
            events: vec![LogEvent::Start { seed, task, objectives: objectives.clone() }, LogEvent::Step(step.clone())],
            steps: vec![step],
            current: 0,
            seed,
            task,
            objectives,
            query_budget_used: 0,
            pending_revert: None,
        })
    }

    pub fn current_step(&self) -> &TrajectoryStep {
        &self.steps[self.current]
    }

    /// Inputs for the next action.
    pub fn pool(&self) -> Vec<DesignRecord> {
        self.current_step().pool()
    }

    /// Steps on the path from the initial state to the current step.
    pub fn live_path(&self) -> BTreeSet<usize> {
        let mut live = BTreeSet::new();
        let mut at = Some(self.current);
        while let Some(i) = at {
            live.insert(i);
            at = self.steps[i].parent;
        }
        live
    }

    pub fn is_stale(&self, index: usize) -> bool {
        !self.live_path().contains(&index)
    }

    /// Appends a step built from `ensemble` and makes it current.
    pub fn advance(&mut self, action: ActionArgs, ensemble: EnsembleResult) -> Result<usize, TrajectoryError> {
        let front = pareto_front(&ensemble.records, &self.objectives)?;
        let index = self.steps.len();
        let step = TrajectoryStep {
            index,
            action: Some(action),
            ensemble,
            pareto_ids: front.ids,
            parent: Some(self.current),
            reverted_from: self.pending_revert.take(),
        };
        self.events.push(LogEvent::Step(step.clone()));
        self.steps.push(step);
        self.current = index;
        Ok(index)
    }

    /// Makes step `k` current again. Later steps stay in the history.
    pub fn revert_to(&mut self, k: usize) -> Result<(), TrajectoryError> {
        if k >= self.current {
            return Err(TrajectoryError::StepOutOfRange { step: k, current: self.current });
        }
        self.events.push(LogEvent::Revert { from: self.current, to: k });
        self.pending_revert = Some(self.current);
        self.current = k;
        Ok(())
    }

    pub fn record_queries(&mut self, used: usize) {
        self.query_budget_used = used;
        self.events.push(LogEvent::Queries { used });
    }

    pub fn summary(&self, index: usize) -> Option<EnsembleSummary> {
        let s = self.steps.get(index)?;
        summarize(&s.ensemble.records, s.pareto_ids.len(), self.task)
    }

    /// Rendered state text of step `index`.
    pub fn state_text(&self, index: usize) -> Option<String> {
        self.summary(index).map(|s| render_summary(&s, self.task))
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    /// The log as JSON lines, one event per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log events serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a trajectory by replaying a log.
    pub fn from_jsonl(text: &str) -> Result<Self, TrajectoryError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).enumerate();
        let parse = |(i, l): (usize, &str)| {
            serde_json::from_str::<LogEvent>(l).map_err(|e| TrajectoryError::Log(format!("line {}: {e}", i + 1)))
        };
        let (seed, task, objectives) = match lines.next().map(parse).transpose()? {
            Some(LogEvent::Start { seed, task, objectives }) => (seed, task, objectives),
            _ => return Err(TrajectoryError::Log("log must begin with a start event".into())),
        };
        let first = match lines.next().map(parse).transpose()? {
            Some(LogEvent::Step(s)) if s.index == 0 => s,
            _ => return Err(TrajectoryError::Log("missing initial step".into())),
        };
        let mut t = Self::new(first.ensemble.records, seed, task, objectives)?;
        for line in lines {
            match parse(line)? {
                LogEvent::Step(s) => {
                    let action = s.action.clone().ok_or_else(|| TrajectoryError::Log(format!("step {} has no action", s.index)))?;
                    let index = t.advance(action, s.ensemble.clone())?;
                    if t.steps[index] != s {
                        return Err(TrajectoryError::Log(format!("step {} does not replay identically", s.index)));
                    }
                }
                LogEvent::Revert { to, .. } => t.revert_to(to)?,
                LogEvent::Queries { used } => t.record_queries(used),
                LogEvent::Start { .. } => return Err(TrajectoryError::Log("repeated start event".into())),
            }
        }
        Ok(t)
    }
}

/// First line of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Header {
    Success,
    Failure { attempts: usize },
    Reverted { step: usize },
}

impl Header {
    pub fn text(&self) -> String {
        match self {
            Header::Success => "The RosettaScripts environment successfully executed your action:".into(),
            Header::Failure { attempts } => format!(
                "The RosettaScripts environment failed to execute your action after {attempts} correction attempts. The state is unchanged:"
            ),
            Header::Reverted { step } => format!("The RosettaScripts environment reverted the state to step {step}:"),
        }
    }
}

/// The environment's report on the last action, ending with the history.
pub fn render_observation(header: Header, step: usize, action_name: &str, state: &str, summary: &str) -> String {
    format!(
        "{}\n\n**Step Number:** {step}\n**Action Name:** {action_name}\n**Results:**\n\n{state}\n\n---\n\n**History Summary:**\n\n{summary}",
        header.text()
    )
}
