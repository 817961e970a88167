//! Turn protocol: choose, read the docs, run, repair on error.

use serde::{Deserialize, Serialize};

use super::prompts::{build_prompt, MissingContextField, PromptContext, PromptKind};
use super::{ChatTurn, LlmClient, LlmError, ModelProfile, Role};
use crate::action::{extract_first_action_with, validate_action, ActionArgs, ActionName, ActionTag};
use crate::backend::{probe_progress_metrics, run_ensemble, Backend, BackendError, DesignRecord, PluginError, ProgressPlugin, RunContext};
use crate::script::{instantiate_script, EnvConfig, ScriptDocument};
use crate::trajectory::{history_summary, render_observation, Header, ObjectiveSpec, TaskKind, Trajectory, TrajectoryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub max_queries: usize,
    pub max_repairs_per_action: usize,
    pub repairs_count_toward_budget: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_queries: 30, max_repairs_per_action: 3, repairs_count_toward_budget: true }
    }
}

/// Everything the environment needs to execute actions for one design task.
pub struct Task<'a> {
    pub kind: TaskKind,
    pub brief: String,
    pub objectives: ObjectiveSpec,
    pub env: EnvConfig,
    pub backend: &'a dyn Backend,
    pub plugin: Option<&'a dyn ProgressPlugin>,
    pub replicas: usize,
    pub workers: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] MissingContextField),
    #[error(transparent)]
    Backend(BackendError),
    #[error(transparent)]
    Plugin(#[from] PluginError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TurnOutcome {
    Advanced { step: usize, repairs: usize },
    Reverted { to: usize, repairs: usize },
    /// The action kept failing; the state is unchanged.
    RepairLimitExceeded { action: Option<ActionName>, last_error: String },
    /// The query budget ran out before the turn completed.
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionVerdict {
    Succeeded,
    Exhausted,
    CutOff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub turn: usize,
    pub action: Option<ActionName>,
    pub repairs: usize,
    pub verdict: ActionVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub queries: usize,
    pub budget_used: usize,
    pub turns: usize,
    pub repairs: usize,
    /// Share of judged actions that ran without any repair.
    pub first_try_success_rate: Option<f64>,
    /// Share of judged actions that ran, possibly after repairs.
    pub eventual_success_rate: Option<f64>,
    pub cost: f64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub reasoning_tokens: u64,
    pub reasoning_fraction: Option<f64>,
    pub final_step: usize,
    pub final_pareto_ids: Vec<String>,
}

enum Stage {
    Choose,
    Run,
}

enum Attempt {
    Chosen(ActionName),
    Done(TurnOutcome),
    Retry(String),
}

/// One conversation driving one trajectory.
pub struct Session<'a> {
    task: &'a Task<'a>,
    client: &'a dyn LlmClient,
    profile: &'a ModelProfile,
    budget: Budget,
    pub trajectory: Trajectory,
    system: ChatTurn,
    brief: Option<ChatTurn>,
    previous: Vec<ChatTurn>,
    pending: Option<String>,
    /// Every message in order, including ones that left the window.
    pub transcript: Vec<ChatTurn>,
    /// Observations shown to the agent, one per finished turn.
    pub observations: Vec<String>,
    /// Protocols executed, with the step they produced.
    pub scripts: Vec<(usize, ScriptDocument)>,
    pub actions: Vec<ActionRecord>,
    pub turns: usize,
    queries: usize,
    budget_used: usize,
    cost: f64,
}

impl<'a> Session<'a> {
    pub fn new(
        task: &'a Task<'a>,
        mut initial: Vec<DesignRecord>,
        client: &'a dyn LlmClient,
        profile: &'a ModelProfile,
        budget: Budget,
        seed: u64,
    ) -> Result<Self, AgentError> {
        profile.reasoning.validate().map_err(AgentError::Config)?;
        if budget.max_queries == 0 || task.replicas == 0 {
            return Err(AgentError::Config("max_queries and replicas must be at least 1".into()));
        }
        if let Some(plugin) = task.plugin {
            probe_progress_metrics(&mut initial, plugin)?;
        }
        let trajectory = Trajectory::new(initial, seed, task.kind, task.objectives.clone())?;
        let system = ChatTurn::new(Role::System, build_prompt(PromptKind::System, &PromptContext::new(profile.reasoning.clone()))?);
        Ok(Self {
            task,
            client,
            profile,
            budget,
            trajectory,
            system,
            brief: None,
            previous: Vec::new(),
            pending: None,
            transcript: Vec::new(),
            observations: Vec::new(),
            scripts: Vec::new(),
            actions: Vec::new(),
            turns: 0,
            queries: 0,
            budget_used: 0,
            cost: 0.0,
        })
    }

    fn ctx(&self) -> PromptContext {
        PromptContext::new(self.profile.reasoning.clone())
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn budget_exhausted(&self) -> bool {
        self.budget_used >= self.budget.max_queries
    }

    /// Messages sent with the next request: system prompt, design brief,
    /// the previous interaction step, and the current one.
    pub fn context_window(&self, current: &[ChatTurn]) -> Vec<ChatTurn> {
        let mut msgs = vec![self.system.clone()];
        msgs.extend(self.brief.iter().cloned());
        msgs.extend(self.previous.iter().cloned());
        msgs.extend(current.iter().cloned());
        msgs
    }

    fn ask(&mut self, current: &mut Vec<ChatTurn>, prompt: String, repair: bool) -> Result<Option<ChatTurn>, AgentError> {
        if self.budget_exhausted() {
            return Ok(None);
        }
        let user = ChatTurn::new(Role::User, prompt);
        self.transcript.push(user.clone());
        if self.brief.is_none() {
            self.brief = Some(user);
        } else {
            current.push(user);
        }
        let reply = self.client.complete(&self.context_window(current), self.profile)?;
        self.queries += 1;
        if !repair || self.budget.repairs_count_toward_budget {
            self.budget_used += 1;
        }
        self.cost += reply.cost;
        self.transcript.push(reply.clone());
        current.push(reply.clone());
        Ok(Some(reply))
    }

    fn opening_prompt(&self) -> Result<String, AgentError> {
        match &self.pending {
            Some(p) => Ok(p.clone()),
            None => {
                let state = self.trajectory.state_text(0).unwrap_or_default();
                Ok(build_prompt(
                    PromptKind::Brief,
                    &self.ctx().with("prompt", self.task.brief.clone()).with("state", state).tag(ActionTag::Choose),
                )?)
            }
        }
    }

    fn observe(&mut self, header: Header, step: usize, act_name: &str) -> Result<(), AgentError> {
        let state = self.trajectory.state_text(step).unwrap_or_default();
        let summary = history_summary(&self.trajectory);
        self.observations.push(render_observation(header, step, act_name, &state, &summary));
        let header_text = header.text();
        let prompt = build_prompt(
            PromptKind::Revision,
            &self
                .ctx()
                .with("header", header_text)
                .with("step", step.to_string())
                .with("act_name", act_name)
                .with("state", state)
                .with("summary", summary)
                .tag(ActionTag::Choose),
        )?;
        self.pending = Some(prompt);
        Ok(())
    }

    fn execute(&mut self, args: ActionArgs, repairs: usize) -> Result<Attempt, AgentError> {
        if let ActionArgs::GoBackToStep(g) = &args {
            return Ok(match self.trajectory.revert_to(g.step) {
                Ok(()) => Attempt::Done(TurnOutcome::Reverted { to: g.step, repairs }),
                Err(e) => Attempt::Retry(e.to_string()),
            });
        }
        let step = self.trajectory.steps.len();
        let doc = match instantiate_script(&args, &self.task.env, step) {
            Ok(d) => d,
            Err(e) => return Ok(Attempt::Retry(e.to_string())),
        };
        let ctx = RunContext { seed: self.trajectory.seed, step, workers: self.task.workers };
        let mut ensemble = match run_ensemble(self.task.backend, &doc, &self.trajectory.pool(), self.task.replicas, &ctx) {
            Ok(r) => r,
            Err(BackendError::Exec(e)) => return Ok(Attempt::Retry(e.message)),
            Err(e) => return Err(AgentError::Backend(e)),
        };
        if let Some(plugin) = self.task.plugin {
            let report = probe_progress_metrics(&mut ensemble.records, plugin)?;
            for (id, err) in &report.failed {
                tracing::warn!(%id, %err, "progress probe failed");
            }
        }
        let index = self.trajectory.advance(args, ensemble)?;
        self.scripts.push((index, doc));
        Ok(Attempt::Done(TurnOutcome::Advanced { step: index, repairs }))
    }

    fn attempt(&mut self, stage: &Stage, reply: &ChatTurn, repairs: usize) -> Result<Attempt, AgentError> {
        let env = match extract_first_action_with(&reply.text, &self.profile.delimiter_pairs()) {
            Ok(env) => env,
            Err(e) => return Ok(Attempt::Retry(e.to_string())),
        };
        let current = self.trajectory.current;
        match stage {
            Stage::Choose => Ok(match env.tag {
                ActionTag::Choose => Attempt::Chosen(env.name),
                ActionTag::Run => Attempt::Retry(format!(
                    "expected <action tag=\"choose\"> to choose an action, found <action tag=\"run\"> for {}",
                    env.name
                )),
            }),
            Stage::Run => match validate_action(&env, current, &self.task.env.palette()) {
                Ok(args) => self.execute(args, repairs),
                Err(e) => Ok(Attempt::Retry(e.to_string())),
            },
        }
    }

    /// Sends `prompt` and repairs until the stage succeeds.
    fn stage(&mut self, current: &mut Vec<ChatTurn>, stage: Stage, mut prompt: String, repairs: &mut usize) -> Result<Option<Attempt>, AgentError> {
        let mut is_repair = false;
        loop {
            let Some(reply) = self.ask(current, prompt, is_repair)? else { return Ok(None) };
            match self.attempt(&stage, &reply, *repairs)? {
                Attempt::Retry(err) => {
                    if *repairs >= self.budget.max_repairs_per_action {
                        return Ok(Some(Attempt::Retry(err)));
                    }
                    *repairs += 1;
                    is_repair = true;
                    let tag = match stage {
                        Stage::Choose => ActionTag::Choose,
                        Stage::Run => ActionTag::Run,
                    };
                    prompt = build_prompt(PromptKind::Repair, &self.ctx().with("error", format!("```\n{}\n```", err.trim_end())).tag(tag))?;
                }
                done => return Ok(Some(done)),
            }
        }
    }

    /// Runs one full interaction step.
    pub fn run_turn(&mut self) -> Result<TurnOutcome, AgentError> {
        if self.budget_exhausted() {
            return Ok(TurnOutcome::BudgetExhausted);
        }
        self.turns += 1;
        let turn = self.turns;
        let mut current = Vec::new();
        let mut repairs = 0;
        let opening = self.opening_prompt()?;
        let outcome = self.drive(&mut current, opening, &mut repairs);
        let (outcome, action) = match outcome? {
            Some((o, a)) => (o, a),
            None => (TurnOutcome::BudgetExhausted, None),
        };
        let verdict = match &outcome {
            TurnOutcome::Advanced { .. } | TurnOutcome::Reverted { .. } => ActionVerdict::Succeeded,
            TurnOutcome::RepairLimitExceeded { .. } => ActionVerdict::Exhausted,
            TurnOutcome::BudgetExhausted => ActionVerdict::CutOff,
        };
        self.actions.push(ActionRecord { turn, action, repairs, verdict });
        match &outcome {
            TurnOutcome::Advanced { step, .. } => {
                let name = self.trajectory.steps[*step].action_name();
                self.observe(Header::Success, *step, name)?;
            }
            TurnOutcome::Reverted { to, .. } => self.observe(Header::Reverted { step: *to }, *to, ActionName::GoBackToStep.as_str())?,
            TurnOutcome::RepairLimitExceeded { action, .. } => {
                let name = action.map(|a| a.as_str()).unwrap_or("none");
                let header = Header::Failure { attempts: self.budget.max_repairs_per_action };
                self.observe(header, self.trajectory.current, name)?;
            }
            TurnOutcome::BudgetExhausted => {}
        }
        self.previous = current;
        self.trajectory.record_queries(self.queries);
        Ok(outcome)
    }

    fn drive(
        &mut self,
        current: &mut Vec<ChatTurn>,
        opening: String,
        repairs: &mut usize,
    ) -> Result<Option<(TurnOutcome, Option<ActionName>)>, AgentError> {
        let name = match self.stage(current, Stage::Choose, opening, repairs)? {
            None => return Ok(None),
            Some(Attempt::Retry(last_error)) => {
                return Ok(Some((TurnOutcome::RepairLimitExceeded { action: None, last_error }, None)));
            }
            Some(Attempt::Chosen(name)) => name,
            Some(Attempt::Done(_)) => unreachable!("the choose stage only reports the chosen name"),
        };
        let docs = build_prompt(PromptKind::ActionDocs, &self.ctx().with("act_name", name.as_str()).tag(ActionTag::Run))?;
        Ok(match self.stage(current, Stage::Run, docs, repairs)? {
            None => None,
            Some(Attempt::Done(o)) => Some((o, Some(name))),
            Some(Attempt::Chosen(_)) => unreachable!("the run stage never chooses"),
            Some(Attempt::Retry(last_error)) => Some((TurnOutcome::RepairLimitExceeded { action: Some(name), last_error }, Some(name))),
        })
    }

    pub fn report(&self) -> RunReport {
        let judged: Vec<&ActionRecord> = self.actions.iter().filter(|a| a.verdict != ActionVerdict::CutOff).collect();
        let rate = |f: &dyn Fn(&ActionRecord) -> bool| {
            (!judged.is_empty()).then(|| judged.iter().filter(|a| f(a)).count() as f64 / judged.len() as f64)
        };
        let replies = self.transcript.iter().filter(|t| t.role == Role::Assistant);
        let (mut tin, mut tout, mut reasoning) = (0, 0, 0);
        for t in replies {
            tin += t.tokens_in;
            tout += t.tokens_out;
            reasoning += t.reasoning_tokens;
        }
        RunReport {
            queries: self.queries,
            budget_used: self.budget_used,
            turns: self.turns,
            repairs: self.actions.iter().map(|a| a.repairs).sum(),
            first_try_success_rate: rate(&|a| a.verdict == ActionVerdict::Succeeded && a.repairs == 0),
            eventual_success_rate: rate(&|a| a.verdict == ActionVerdict::Succeeded),
            cost: self.cost,
            tokens_in: tin,
            tokens_out: tout,
            reasoning_tokens: reasoning,
            reasoning_fraction: (tout > 0).then(|| reasoning as f64 / tout as f64),
            final_step: self.trajectory.current,
            final_pareto_ids: self.trajectory.current_step().pareto_ids.clone(),
        }
    }
}

/// Runs turns until the query budget is spent.
pub fn run_trajectory<'a>(
    task: &'a Task<'a>,
    initial: Vec<DesignRecord>,
    client: &'a dyn LlmClient,
    profile: &'a ModelProfile,
    budget: Budget,
    seed: u64,
) -> Result<Session<'a>, AgentError> {
    let mut s = Session::new(task, initial, client, profile, budget, seed)?;
    while !matches!(s.run_turn()?, TurnOutcome::BudgetExhausted) {}
    Ok(s)
}
