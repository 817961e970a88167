//! Prompt templates and their filling.

use std::collections::BTreeMap;

use super::ReasoningMode;
use crate::action::{action_formatting_instructions, reasoning_formatting, render_action_docs, ActionTag, DocsTarget};

const SYSTEM: &str = include_str!("../../prompts/system.txt");
const BRIEF: &str = include_str!("../../prompts/brief.txt");
const REVISION: &str = include_str!("../../prompts/revision.txt");
const PARAMETERS: &str = include_str!("../../prompts/parameters.txt");
const REPAIR: &str = include_str!("../../prompts/repair.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    System,
    Brief,
    Revision,
    ActionDocs,
    Repair,
}

impl PromptKind {
    fn template(self) -> &'static str {
        match self {
            PromptKind::System => SYSTEM,
            PromptKind::Brief => BRIEF,
            PromptKind::Revision => REVISION,
            PromptKind::ActionDocs => PARAMETERS,
            PromptKind::Repair => REPAIR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("prompt field `{0}` is missing")]
pub struct MissingContextField(pub String);

/// Runtime values for template slots. The formatting slots are derived from
/// `mode` and `tag`.
#[derive(Debug, Clone, Default)]
pub struct PromptContext {
    pub mode: ReasoningMode,
    pub tag: Option<ActionTag>,
    pub fields: BTreeMap<String, String>,
}

impl PromptContext {
    pub fn new(mode: ReasoningMode) -> Self {
        Self { mode, tag: None, fields: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.fields.insert(key.into(), value.into());
        self
    }

    pub fn tag(mut self, tag: ActionTag) -> Self {
        self.tag = Some(tag);
        self
    }

    fn lookup(&self, key: &str) -> Option<String> {
        let delims = self.mode.delimiters();
        match key {
            "reasoning_formatting" => Some(reasoning_formatting(delims)),
            "action_formatting_instructions" => self.tag.map(|t| action_formatting_instructions(delims, t)),
            "docs" if !self.fields.contains_key("docs") && self.fields.contains_key("act_name") => {
                DocsTarget::parse(&self.fields["act_name"]).ok().map(render_action_docs)
            }
            _ => self.fields.get(key).cloned(),
        }
    }
}

/// Replaces every `{name}` slot of `template` with its value. Values are
/// inserted verbatim and never rescanned.
pub fn fill_template(template: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, MissingContextField> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find('}');
        let name = close.map(|c| &after[..c]).filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        match name {
            Some(name) => {
                out.push_str(&rest[..open]);
                out.push_str(&lookup(name).ok_or_else(|| MissingContextField(name.into()))?);
                rest = &after[name.len() + 1..];
            }
            None => {
                out.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Fills the template for `kind`. The system prompt defaults its `docs`
/// slot to the short docstrings of every action.
pub fn build_prompt(kind: PromptKind, ctx: &PromptContext) -> Result<String, MissingContextField> {
    let text = fill_template(kind.template(), |k| match (kind, k) {
        (PromptKind::System, "docs") => Some(ctx.fields.get("docs").cloned().unwrap_or_else(|| render_action_docs(DocsTarget::All))),
        _ => ctx.lookup(k),
    })?;
    Ok(text.trim_end().to_string())
}
