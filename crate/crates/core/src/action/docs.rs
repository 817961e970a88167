//! Action documentation and formatting instructions shown to the agent.

use super::{ActionError, ActionName, ActionTag};

const DOCSTRINGS: &str = include_str!("../../prompts/action_docstrings.txt");
const ROTAMER_CHANGE_DOCS: &str = include_str!("../../prompts/rotamer_change_docs.txt");
const BACKBONE_CHANGE_DOCS: &str = include_str!("../../prompts/backbone_change_docs.txt");
const GO_BACK_DOCS: &str = include_str!("../../prompts/go_back_to_step_docs.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocsTarget {
    All,
    Action(ActionName),
}

impl DocsTarget {
    /// Accepts `all` or an action name.
    pub fn parse(s: &str) -> Result<Self, ActionError> {
        if s.trim() == "all" {
            Ok(DocsTarget::All)
        } else {
            ActionName::parse(s).map(DocsTarget::Action)
        }
    }
}

/// `All` gives the short docstrings embedded in the system prompt; a single
/// action gives the full documentation shown after it is chosen.
pub fn render_action_docs(target: DocsTarget) -> String {
    let text = match target {
        DocsTarget::All => DOCSTRINGS,
        DocsTarget::Action(ActionName::RotamerChange) => ROTAMER_CHANGE_DOCS,
        DocsTarget::Action(ActionName::BackboneChange) => BACKBONE_CHANGE_DOCS,
        DocsTarget::Action(ActionName::GoBackToStep) => GO_BACK_DOCS,
    };
    text.trim_end().to_string()
}

fn action_skeleton(tag: ActionTag) -> String {
    match tag {
        ActionTag::Choose => "<action tag=\"choose\">\n<name>action_name</name>\n</action>".into(),
        ActionTag::Run => {
            "<action tag=\"run\">\n<name>action_name</name>\n<arg_name1>arg_value1</arg_name1>\n<arg_name2>arg_value2</arg_name2>\n...\n</action>"
                .into()
        }
    }
}

/// The reasoning paragraph of the system prompt. Empty for models that reason natively.
pub fn reasoning_formatting(delimiters: Option<(&str, &str)>) -> String {
    match delimiters {
        Some((open, close)) => format!("- First, you must write your step-by-step reasoning inside {open}{close} tags."),
        None => String::new(),
    }
}

/// Formatting reminder appended to revision and repair prompts.
pub fn action_formatting_instructions(delimiters: Option<(&str, &str)>, tag: ActionTag) -> String {
    match delimiters {
        Some(_) => format!(
            "{}\n- Then, write your action in the following format:\n\n{}",
            reasoning_formatting(delimiters),
            action_skeleton(tag)
        ),
        None => format!("- Write your action in the following format:\n\n{}", action_skeleton(tag)),
    }
}
