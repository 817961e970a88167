//! Agent actions: extraction of `<action>` envelopes from free-form
//! responses, typed argument decoding, and the documentation shown to the agent.

mod args;
mod docs;
mod markup;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use args::{
    validate_action, ActionArgs, BackboneChangeArgs, BackboneMover, GoBackArgs, PenaltyItem, ResidueRestriction,
    RestrictionKind, RotamerChangeArgs,
};
pub use docs::{action_formatting_instructions, reasoning_formatting, render_action_docs, DocsTarget};
pub use markup::{parse_children, strip_reasoning, Child};

use crate::penalty::PenaltyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionTag {
    Choose,
    Run,
}

impl ActionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionTag::Choose => "choose",
            ActionTag::Run => "run",
        }
    }
}

impl fmt::Display for ActionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionName {
    RotamerChange,
    BackboneChange,
    GoBackToStep,
}

impl ActionName {
    pub const ALL: [ActionName; 3] = [ActionName::RotamerChange, ActionName::BackboneChange, ActionName::GoBackToStep];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionName::RotamerChange => "rotamer_change",
            ActionName::BackboneChange => "backbone_change",
            ActionName::GoBackToStep => "go_back_to_step",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ActionError> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s.trim())
            .ok_or_else(|| ActionError::UnknownAction { name: s.trim().to_string() })
    }
}

impl fmt::Display for ActionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parsed `<action>` block: its tag, action name, and raw argument texts in source order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEnvelope {
    pub tag: ActionTag,
    pub name: ActionName,
    pub args: Vec<(String, String)>,
}

impl ActionEnvelope {
    pub fn choose(name: ActionName) -> Self {
        Self { tag: ActionTag::Choose, name, args: Vec::new() }
    }

    pub fn arg(&self, key: &str) -> Option<&str> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Renders the envelope in the response grammar.
    pub fn render(&self) -> String {
        let mut out = format!("<action tag=\"{}\">\n<name>{}</name>\n", self.tag, self.name);
        for (k, v) in &self.args {
            if v.contains('\n') {
                out.push_str(&format!("<{k}>\n{}\n</{k}>\n", v.trim_matches('\n')));
            } else {
                out.push_str(&format!("<{k}>{v}</{k}>\n"));
            }
        }
        out.push_str("</action>");
        out
    }
}

/// Errors from extracting or validating an action. Messages quote the
/// offending fragment so they can be fed back to the agent verbatim.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActionError {
    #[error("no <action></action> block was found in the response")]
    MissingAction,
    #[error("malformed action block: {detail} (near '{fragment}')")]
    MalformedAction { detail: String, fragment: String },
    #[error("unknown action '{name}' (expected rotamer_change, backbone_change, or go_back_to_step)")]
    UnknownAction { name: String },
    #[error("expected an action with tag=\"{expected}\", got tag=\"{got}\"")]
    UnexpectedTag { expected: ActionTag, got: ActionTag },
    #[error("you chose action '{expected}' but wrote a call to '{got}'")]
    ActionMismatch { expected: ActionName, got: ActionName },
    #[error("unknown argument '{name}' for action {action}")]
    UnknownArgument { action: ActionName, name: String },
    #[error("missing required argument '{name}'")]
    MissingArgument { name: String },
    #[error("argument '{name}' is given more than once")]
    DuplicateArgument { name: String },
    #[error("invalid value for '{name}': {detail} (got '{fragment}')")]
    InvalidArgument { name: String, detail: String, fragment: String },
    #[error("in {location}: {source}")]
    NestedParseError { location: String, source: PenaltyError },
    #[error("cannot go back to step {step}: the current step is {current}")]
    StepOutOfRange { step: i64, current: usize },
}

fn snippet(s: &str) -> String {
    let flat: String = s.chars().take(60).collect();
    flat.replace('\n', " ")
}

/// Finds and parses the first `<action ...>...</action>` block in a response.
///
/// Content inside reasoning delimiters (`<think>`, `<reasoning>`, or the
/// given extra tag pairs) is removed before scanning, and everything after
/// the first closing `</action>` is ignored.
pub fn extract_first_action(response: &str) -> Result<ActionEnvelope, ActionError> {
    extract_first_action_with(response, &[])
}

/// Like [`extract_first_action`] with additional reasoning delimiter pairs.
pub fn extract_first_action_with(response: &str, delimiters: &[(String, String)]) -> Result<ActionEnvelope, ActionError> {
    let text = strip_reasoning(response, delimiters);
    let start = find_action_open(&text).ok_or(ActionError::MissingAction)?;
    let rest = &text[start..];
    let open_end = rest.find('>').ok_or_else(|| ActionError::MalformedAction {
        detail: "unterminated <action> tag".into(),
        fragment: snippet(rest),
    })?;
    let open_tag = &rest[..=open_end];
    let tag = parse_tag_attr(open_tag)?;
    let body_and_rest = &rest[open_end + 1..];
    let close = body_and_rest.find("</action>").ok_or_else(|| ActionError::MalformedAction {
        detail: "missing closing </action> tag".into(),
        fragment: snippet(open_tag),
    })?;
    let body = &body_and_rest[..close];
    let children = parse_children(body).map_err(|(detail, fragment)| ActionError::MalformedAction { detail, fragment })?;

    let mut name: Option<ActionName> = None;
    let mut args: Vec<(String, String)> = Vec::new();
    for child in children {
        if child.name == "name" || child.name == "action_name" {
            if name.is_some() {
                return Err(ActionError::DuplicateArgument { name: child.name });
            }
            name = Some(ActionName::parse(&child.text)?);
            continue;
        }
        if args.iter().any(|(k, _)| *k == child.name) {
            return Err(ActionError::DuplicateArgument { name: child.name });
        }
        args.push((child.name, child.text));
    }
    let name = name.ok_or_else(|| ActionError::MalformedAction {
        detail: "the action block has no <name> element".into(),
        fragment: snippet(body.trim()),
    })?;
    if tag == ActionTag::Choose && !args.is_empty() {
        return Err(ActionError::MalformedAction {
            detail: "a choose action carries only the action name".into(),
            fragment: format!("<{}>", args[0].0),
        });
    }
    Ok(ActionEnvelope { tag, name, args })
}

fn find_action_open(text: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(pos) = text[from..].find("<action") {
        let at = from + pos;
        let next = text[at + 7..].chars().next();
        if matches!(next, Some(c) if c.is_whitespace() || c == '>') {
            return Some(at);
        }
        from = at + 7;
    }
    None
}

fn parse_tag_attr(open_tag: &str) -> Result<ActionTag, ActionError> {
    let malformed = |detail: &str| ActionError::MalformedAction { detail: detail.into(), fragment: open_tag.to_string() };
    let pos = open_tag.find("tag").ok_or_else(|| malformed("the <action> tag needs a tag=\"choose\" or tag=\"run\" attribute"))?;
    let after = open_tag[pos + 3..].trim_start();
    let after = after.strip_prefix('=').ok_or_else(|| malformed("expected '=' after tag"))?.trim_start();
    let quote = after.chars().next().filter(|c| *c == '"' || *c == '\'').ok_or_else(|| malformed("the tag value must be quoted"))?;
    let inner = &after[1..];
    let end = inner.find(quote).ok_or_else(|| malformed("unterminated tag value"))?;
    match inner[..end].trim() {
        "choose" => Ok(ActionTag::Choose),
        "run" => Ok(ActionTag::Run),
        _ => Err(malformed("tag must be \"choose\" or \"run\"")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_block_inside_prose() {
        let r = "I think we should design.\n<action tag=\"choose\">\n<name>rotamer_change</name>\n</action>\nThanks";
        let env = extract_first_action(r).unwrap();
        assert_eq!(env, ActionEnvelope::choose(ActionName::RotamerChange));
    }

    #[test]
    fn only_first_block_counts() {
        let r = "<action tag=\"run\"><name>go_back_to_step</name><step>1</step></action>\n<action tag=\"run\"><name>go_back_to_step</name><step>2</step></action>";
        let env = extract_first_action(r).unwrap();
        assert_eq!(env.arg("step"), Some("1"));
    }

    #[test]
    fn prose_only_is_missing() {
        assert_eq!(extract_first_action("I would pick a rotamer change."), Err(ActionError::MissingAction));
        assert_eq!(extract_first_action("<actions>none</actions>"), Err(ActionError::MissingAction));
    }

    #[test]
    fn reasoning_is_ignored() {
        let r = "<reasoning>maybe <action tag=\"choose\"><name>backbone_change</name></action></reasoning>\n<action tag='choose'><action_name>rotamer_change</action_name></action>";
        assert_eq!(extract_first_action(r).unwrap().name, ActionName::RotamerChange);
    }

    #[test]
    fn malformed_cases_quote_fragment() {
        let e = extract_first_action("<action tag=\"choose\"><name>rotamer_change</name>").unwrap_err();
        assert!(e.to_string().contains("tag=\"choose\""), "{e}");
        let e = extract_first_action("<action tag=\"walk\"><name>x</name></action>").unwrap_err();
        assert!(e.to_string().contains("walk"), "{e}");
        let e = extract_first_action("<action tag=\"run\"><step>1</step></action>").unwrap_err();
        assert!(matches!(e, ActionError::MalformedAction { .. }));
        let e = extract_first_action("<action tag=\"run\"><name>dance</name></action>").unwrap_err();
        assert!(e.to_string().contains("dance"));
        let e = extract_first_action("<action tag=\"choose\"><name>go_back_to_step</name><step>1</step></action>").unwrap_err();
        assert!(e.to_string().contains("<step>"));
        let e = extract_first_action("<action tag=\"run\"><name>go_back_to_step</name><step>1</step><step>2</step></action>").unwrap_err();
        assert!(e.to_string().contains("'step'"));
    }

    #[test]
    fn render_parses_back() {
        let env = ActionEnvelope {
            tag: ActionTag::Run,
            name: ActionName::BackboneChange,
            args: vec![
                ("mover_name".into(), "small".into()),
                ("residue_selectors".into(), "<Index name=\"a\" resnums=\"1-3\"/>\n<Index name=\"b\" resnums=\"4\"/>".into()),
            ],
        };
        assert_eq!(extract_first_action(&env.render()).unwrap(), env);
    }
}
