//! Run configuration: one TOML document describing a whole trajectory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{Budget, ModelProfile, Task};
use crate::backend::{
    Backend, CommandPlugin, DesignRecord, ExternalBackend, ExternalConfig, MockBackend, MockConfig, MockFoldPlugin,
    ProgressPlugin, TablePlugin,
};
use crate::residue::Sequence;
use crate::script::EnvConfig;
use crate::trajectory::{ObjectiveSpec, TaskKind};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskChoice {
    Canonical,
    Ncaa,
    /// Canonical layout with user-supplied objectives.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskChoice,
    #[serde(default)]
    pub brief: Option<String>,
    #[serde(default)]
    pub brief_path: Option<PathBuf>,
    #[serde(default)]
    pub objectives: Option<ObjectiveSpec>,
}

/// Starting designs: sequences scored by the mock backend, or a JSON list
/// of records produced elsewhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub sequences: Vec<String>,
    #[serde(default)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    External,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "external" => Ok(BackendKind::External),
            other => Err(format!("unknown backend `{other}` (expected mock or external)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub mock: Option<MockConfig>,
    #[serde(default)]
    pub external: Option<ExternalConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PluginConfig {
    /// Burial-pattern predictor on the mock fold.
    Mock,
    Command { command: Vec<String> },
    /// JSON map from record id to `{fold_rmsd, plddt}`.
    Table { path: PathBuf },
}

fn default_replicas() -> usize {
    128
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub budget: Budget,
    pub task: TaskConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub env: EnvConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub plugin: Option<PluginConfig>,
    #[serde(default)]
    pub model: Option<ModelProfile>,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::parse(&read(path)?, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.task.brief_path.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.initial.records.as_mut() {
            fix(p);
        }
        if let Some(PluginConfig::Table { path }) = cfg.plugin.as_mut() {
            fix(path);
        }
        if let Some(ext) = cfg.backend.external.as_mut() {
            fix(&mut ext.workdir);
        }
        if let Some(p) = cfg.output_dir.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicas == 0 {
            return Err(invalid("replicas must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers must be at least 1"));
        }
        if self.budget.max_queries == 0 {
            return Err(invalid("budget.max_queries must be at least 1"));
        }
        if self.task.brief.is_some() == self.task.brief_path.is_some() {
            return Err(invalid("task needs exactly one of brief and brief_path"));
        }
        if self.task.kind == TaskChoice::Custom && self.task.objectives.is_none() {
            return Err(invalid("custom tasks must list objectives"));
        }
        match self.backend.kind {
            BackendKind::Mock if self.backend.mock.is_none() => return Err(invalid("backend.mock section is missing")),
            BackendKind::External if self.backend.external.is_none() => {
                return Err(invalid("backend.external section is missing"))
            }
            _ => {}
        }
        if self.initial.sequences.is_empty() == self.initial.records.is_none() {
            return Err(invalid("initial needs exactly one of sequences and records"));
        }
        if self.backend.kind == BackendKind::External && !self.initial.sequences.is_empty() {
            return Err(invalid("the external backend starts from initial.records"));
        }
        if let Some(m) = &self.model {
            m.reasoning.validate().map_err(ConfigError::Invalid)?;
        }
        Ok(())
    }

    pub fn task_kind(&self) -> TaskKind {
        match self.task.kind {
            TaskChoice::Ncaa => TaskKind::Ncaa,
            TaskChoice::Canonical | TaskChoice::Custom => TaskKind::Canonical,
        }
    }

    pub fn objectives(&self) -> ObjectiveSpec {
        match (&self.task.objectives, self.task.kind) {
            (Some(o), _) => o.clone(),
            (None, TaskChoice::Ncaa) => ObjectiveSpec::ncaa(),
            (None, _) => ObjectiveSpec::canonical(),
        }
    }

    /// Builds the backend, plugin, and starting designs.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        self.validate()?;
        let brief = match (&self.task.brief, &self.task.brief_path) {
            (Some(b), _) => b.clone(),
            (None, Some(p)) => read(p)?.trim_end().to_string(),
            (None, None) => unreachable!("validated"),
        };
        let mut mock = None;
        let backend: Box<dyn Backend> = match self.backend.kind {
            BackendKind::Mock => {
                let b = MockBackend::new(self.backend.mock.clone().expect("validated")).map_err(ConfigError::Invalid)?;
                mock = Some(b.clone());
                Box::new(b)
            }
            BackendKind::External => Box::new(ExternalBackend::new(self.backend.external.clone().expect("validated"))),
        };
        let initial = match (&self.initial.records, &mock) {
            (Some(path), _) => serde_json::from_str::<Vec<DesignRecord>>(&read(path)?)
                .map_err(|e| ConfigError::Parse { path: path.clone(), message: e.to_string() })?,
            (None, Some(m)) => {
                let single = self.initial.sequences.len() == 1;
                self.initial
                    .sequences
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let seq: Sequence = s.parse().map_err(|e| invalid(format!("initial sequence {i}: {e}")))?;
                        let id = if single { "init".to_string() } else { format!("init{i}") };
                        m.initial_record(&id, seq).map_err(|e| invalid(e.message))
                    })
                    .collect::<Result<_, _>>()?
            }
            (None, None) => unreachable!("validated"),
        };
        if initial.is_empty() {
            return Err(invalid("no initial designs"));
        }
        let plugin: Option<Box<dyn ProgressPlugin>> = match &self.plugin {
            None => None,
            Some(PluginConfig::Mock) => {
                let m = mock.as_ref().ok_or_else(|| invalid("the mock plugin needs the mock backend"))?;
                Some(Box::new(MockFoldPlugin { fold: m.fold().clone() }))
            }
            Some(PluginConfig::Command { command }) => Some(Box::new(CommandPlugin { command: command.clone() })),
            Some(PluginConfig::Table { path }) => {
                let table = serde_json::from_str(&read(path)?)
                    .map_err(|e| ConfigError::Parse { path: path.clone(), message: e.to_string() })?;
                Some(Box::new(TablePlugin { table }))
            }
        };
        Ok(Prepared {
            kind: self.task_kind(),
            brief,
            objectives: self.objectives(),
            env: self.env.clone(),
            backend,
            plugin,
            initial,
            replicas: self.replicas,
            workers: self.workers,
        })
    }
}

/// A config resolved into live components.
pub struct Prepared {
    pub kind: TaskKind,
    pub brief: String,
    pub objectives: ObjectiveSpec,
    pub env: EnvConfig,
    pub backend: Box<dyn Backend>,
    pub plugin: Option<Box<dyn ProgressPlugin>>,
    pub initial: Vec<DesignRecord>,
    pub replicas: usize,
    pub workers: usize,
}

impl Prepared {
    pub fn task(&self) -> Task<'_> {
        Task {
            kind: self.kind,
            brief: self.brief.clone(),
            objectives: self.objectives.clone(),
            env: self.env.clone(),
            backend: self.backend.as_ref(),
            plugin: self.plugin.as_deref(),
            replicas: self.replicas,
            workers: self.workers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[task]
kind = "canonical"
brief = "Stabilize."
[initial]
sequences = ["AAAAAA"]
[backend]
kind = "mock"
[backend.mock]
fold = { layers = "SBCCBS", secondary_structure = "LHHHHL" }
[plugin]
kind = "mock"
"#;

    #[test]
    fn minimal_config_prepares() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.replicas, 128);
        assert_eq!(cfg.budget, Budget::default());
        let p = cfg.prepare().unwrap();
        assert_eq!(p.initial.len(), 1);
        assert_eq!(p.initial[0].id, "init");
        assert!(p.plugin.is_some());
        assert_eq!(p.task().objectives, ObjectiveSpec::canonical());
    }

    #[test]
    fn invalid_configs() {
        let cfg = RunConfig::parse(&MINIMAL.replace("seed = 3", "replicas = 0"), Path::new("x.toml")).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("replicas"));
        let cfg = RunConfig::parse(&MINIMAL.replace("kind = \"canonical\"", "kind = \"custom\""), Path::new("x.toml")).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("objectives"));
        let err = RunConfig::parse(&MINIMAL.replace("seed = 3", "sed = 3"), Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("sed"));
    }
}
