//! Typed arguments for the three actions and their validation.

use serde::{Deserialize, Serialize};

use super::markup::parse_children;
use super::{ActionEnvelope, ActionError, ActionName, ActionTag};
use crate::penalty::{emit_simplified, parse_simplified, SimplifiedPenalty};
use crate::residue::{Palette, ResidueTypeSet, TypeSetError};

/// One entry of the `penalties` argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyItem {
    pub comp: Vec<SimplifiedPenalty>,
    pub selector_name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RestrictionKind {
    Restrict,
    Prohibit,
}

impl RestrictionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RestrictionKind::Restrict => "restrict",
            RestrictionKind::Prohibit => "prohibit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueRestriction {
    pub kind: RestrictionKind,
    pub residues: ResidueTypeSet,
    pub selector_name: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RotamerChangeArgs {
    pub residue_selectors: Option<String>,
    pub penalties: Vec<PenaltyItem>,
    pub residue_restrictions: Vec<ResidueRestriction>,
    pub packing_restrictions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneMover {
    Small,
    Shear,
    Backrub,
}

impl BackboneMover {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Some(Self::Small),
            "shear" => Some(Self::Shear),
            "backrub" => Some(Self::Backrub),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Small => "small",
            Self::Shear => "shear",
            Self::Backrub => "backrub",
        }
    }

    /// RosettaScripts element name of the mover.
    pub fn element(&self) -> &'static str {
        match self {
            Self::Small => "Small",
            Self::Shear => "Shear",
            Self::Backrub => "Backrub",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneChangeArgs {
    pub mover: BackboneMover,
    pub mover_params: Option<String>,
    pub residue_selectors: Option<String>,
    pub mover_selector_name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoBackArgs {
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ActionArgs {
    RotamerChange(RotamerChangeArgs),
    BackboneChange(BackboneChangeArgs),
    GoBackToStep(GoBackArgs),
}

impl ActionArgs {
    pub fn name(&self) -> ActionName {
        match self {
            ActionArgs::RotamerChange(_) => ActionName::RotamerChange,
            ActionArgs::BackboneChange(_) => ActionName::BackboneChange,
            ActionArgs::GoBackToStep(_) => ActionName::GoBackToStep,
        }
    }

    /// Prints the arguments back into a run envelope.
    pub fn to_envelope(&self) -> ActionEnvelope {
        let mut args: Vec<(String, String)> = Vec::new();
        match self {
            ActionArgs::RotamerChange(a) => {
                if let Some(sel) = &a.residue_selectors {
                    args.push(("residue_selectors".into(), sel.clone()));
                }
                if !a.penalties.is_empty() {
                    let mut text = String::new();
                    for item in &a.penalties {
                        let comp: Vec<String> = item.comp.iter().map(emit_simplified).collect();
                        text.push_str(&format!("<item>\n<comp>\n{}</comp>\n", comp.join("\n")));
                        if let Some(s) = &item.selector_name {
                            text.push_str(&format!("<comp_selector_name>{s}</comp_selector_name>\n"));
                        }
                        text.push_str("</item>\n");
                    }
                    args.push(("penalties".into(), text));
                }
                if !a.residue_restrictions.is_empty() {
                    let mut text = String::new();
                    for r in &a.residue_restrictions {
                        text.push_str(&format!(
                            "<item>\n<type>{}</type>\n<residues>{}</residues>\n<selector_name>{}</selector_name>\n</item>\n",
                            r.kind.as_str(),
                            r.residues.to_comma_list(),
                            r.selector_name
                        ));
                    }
                    args.push(("residue_restrictions".into(), text));
                }
                if !a.packing_restrictions.is_empty() {
                    args.push(("packing_restrictions".into(), a.packing_restrictions.join(",")));
                }
            }
            ActionArgs::BackboneChange(a) => {
                args.push(("mover_name".into(), a.mover.as_str().into()));
                if let Some(p) = &a.mover_params {
                    args.push(("mover_params".into(), p.clone()));
                }
                if let Some(s) = &a.residue_selectors {
                    args.push(("residue_selectors".into(), s.clone()));
                }
                if let Some(s) = &a.mover_selector_name {
                    args.push(("mover_selector_name".into(), s.clone()));
                }
            }
            ActionArgs::GoBackToStep(a) => args.push(("step".into(), a.step.to_string())),
        }
        ActionEnvelope { tag: ActionTag::Run, name: self.name(), args }
    }
}

fn optional_text(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn check_known(action: ActionName, env: &ActionEnvelope, allowed: &[&str]) -> Result<(), ActionError> {
    match env.args.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(ActionError::UnknownArgument { action, name: k.clone() }),
        None => Ok(()),
    }
}

fn children_of(arg: &str, text: &str) -> Result<Vec<super::Child>, ActionError> {
    parse_children(text).map_err(|(detail, fragment)| ActionError::InvalidArgument { name: arg.into(), detail, fragment })
}

fn residue_set(name: &str, text: &str, palette: &Palette) -> Result<ResidueTypeSet, ActionError> {
    let set = ResidueTypeSet::parse(text).map_err(|e| {
        let detail = match &e {
            TypeSetError::Empty => "expected at least one residue code".to_string(),
            TypeSetError::Unknown(c) => format!("unknown residue code '{c}'"),
            TypeSetError::Duplicate(c) => format!("residue code '{c}' is listed twice"),
        };
        ActionError::InvalidArgument { name: name.into(), detail, fragment: text.trim().to_string() }
    })?;
    check_palette(name, &set, palette)?;
    Ok(set)
}

fn check_palette(name: &str, set: &ResidueTypeSet, palette: &Palette) -> Result<(), ActionError> {
    match set.codes().iter().find(|c| !palette.contains(**c)) {
        Some(c) => Err(ActionError::InvalidArgument {
            name: name.into(),
            detail: format!("residue type {c} is not in the design palette"),
            fragment: c.to_string(),
        }),
        None => Ok(()),
    }
}

fn rotamer_args(env: &ActionEnvelope, palette: &Palette) -> Result<RotamerChangeArgs, ActionError> {
    let action = ActionName::RotamerChange;
    check_known(action, env, &["residue_selectors", "penalties", "residue_restrictions", "packing_restrictions"])?;
    let mut out = RotamerChangeArgs { residue_selectors: env.arg("residue_selectors").and_then(optional_text), ..Default::default() };

    if let Some(text) = env.arg("penalties") {
        for (i, item) in children_of("penalties", text)?.into_iter().enumerate() {
            if item.name != "item" {
                return Err(ActionError::UnknownArgument { action, name: format!("penalties.{}", item.name) });
            }
            let mut comp: Option<Vec<SimplifiedPenalty>> = None;
            let mut selector_name: Option<String> = None;
            for field in children_of("penalties", &item.text)? {
                match field.name.as_str() {
                    "comp" => {
                        if comp.is_some() {
                            return Err(ActionError::DuplicateArgument { name: format!("penalties.item[{i}].comp") });
                        }
                        let blocks = parse_simplified(&field.text).map_err(|source| ActionError::NestedParseError {
                            location: format!("penalties item {} comp", i + 1),
                            source,
                        })?;
                        for b in &blocks {
                            check_palette("penalties", &b.types, palette)?;
                        }
                        comp = Some(blocks);
                    }
                    "comp_selector_name" | "selector_name" => {
                        if selector_name.is_some() {
                            return Err(ActionError::DuplicateArgument { name: format!("penalties.item[{i}].{}", field.name) });
                        }
                        selector_name = optional_text(&field.text);
                    }
                    other => return Err(ActionError::UnknownArgument { action, name: format!("penalties.item.{other}") }),
                }
            }
            let comp = comp.ok_or_else(|| ActionError::MissingArgument { name: format!("penalties.item[{i}].comp") })?;
            out.penalties.push(PenaltyItem { comp, selector_name });
        }
    }

    if let Some(text) = env.arg("residue_restrictions") {
        for (i, item) in children_of("residue_restrictions", text)?.into_iter().enumerate() {
            if item.name != "item" {
                return Err(ActionError::UnknownArgument { action, name: format!("residue_restrictions.{}", item.name) });
            }
            let (mut kind, mut residues, mut selector) = (None, None, None);
            for field in children_of("residue_restrictions", &item.text)? {
                let slot = match field.name.as_str() {
                    "type" => &mut kind,
                    "residues" => &mut residues,
                    "selector_name" => &mut selector,
                    other => {
                        return Err(ActionError::UnknownArgument { action, name: format!("residue_restrictions.item.{other}") })
                    }
                };
                if slot.is_some() {
                    return Err(ActionError::DuplicateArgument { name: format!("residue_restrictions.item[{i}].{}", field.name) });
                }
                *slot = Some(field.text);
            }
            let missing = |f: &str| ActionError::MissingArgument { name: format!("residue_restrictions.item[{i}].{f}") };
            let kind_text = kind.ok_or_else(|| missing("type"))?;
            let kind = match kind_text.trim().to_ascii_lowercase().as_str() {
                "restrict" => RestrictionKind::Restrict,
                "prohibit" => RestrictionKind::Prohibit,
                _ => {
                    return Err(ActionError::InvalidArgument {
                        name: "residue_restrictions.type".into(),
                        detail: "expected 'restrict' or 'prohibit'".into(),
                        fragment: kind_text.trim().to_string(),
                    })
                }
            };
            let residues = residue_set("residue_restrictions.residues", &residues.ok_or_else(|| missing("residues"))?, palette)?;
            let selector_name = selector.as_deref().and_then(optional_text).ok_or_else(|| missing("selector_name"))?;
            out.residue_restrictions.push(ResidueRestriction { kind, residues, selector_name });
        }
    }

    if let Some(text) = env.arg("packing_restrictions") {
        for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
                return Err(ActionError::InvalidArgument {
                    name: "packing_restrictions".into(),
                    detail: "expected residue selector names separated by commas".into(),
                    fragment: name.to_string(),
                });
            }
            out.packing_restrictions.push(name.to_string());
        }
    }
    Ok(out)
}

fn backbone_args(env: &ActionEnvelope) -> Result<BackboneChangeArgs, ActionError> {
    check_known(ActionName::BackboneChange, env, &["mover_name", "mover_params", "residue_selectors", "mover_selector_name"])?;
    let raw = env.arg("mover_name").ok_or_else(|| ActionError::MissingArgument { name: "mover_name".into() })?;
    let mover = BackboneMover::parse(raw).ok_or_else(|| ActionError::InvalidArgument {
        name: "mover_name".into(),
        detail: "expected small, shear, or backrub".into(),
        fragment: raw.trim().to_string(),
    })?;
    Ok(BackboneChangeArgs {
        mover,
        mover_params: env.arg("mover_params").and_then(optional_text),
        residue_selectors: env.arg("residue_selectors").and_then(optional_text),
        mover_selector_name: env.arg("mover_selector_name").and_then(optional_text),
    })
}

fn go_back_args(env: &ActionEnvelope, current: usize) -> Result<GoBackArgs, ActionError> {
    check_known(ActionName::GoBackToStep, env, &["step"])?;
    let raw = env.arg("step").ok_or_else(|| ActionError::MissingArgument { name: "step".into() })?;
    let step: i64 = raw.trim().parse().map_err(|_| ActionError::InvalidArgument {
        name: "step".into(),
        detail: "expected a non-negative integer".into(),
        fragment: raw.trim().to_string(),
    })?;
    if step < 0 || step as usize >= current {
        return Err(ActionError::StepOutOfRange { step, current });
    }
    Ok(GoBackArgs { step: step as usize })
}

/// Decodes a run envelope into typed arguments.
///
/// `current_step` is the index of the environment's current step; residue
/// codes must belong to `palette`.
pub fn validate_action(env: &ActionEnvelope, current_step: usize, palette: &Palette) -> Result<ActionArgs, ActionError> {
    if env.tag != ActionTag::Run {
        return Err(ActionError::UnexpectedTag { expected: ActionTag::Run, got: env.tag });
    }
    Ok(match env.name {
        ActionName::RotamerChange => ActionArgs::RotamerChange(rotamer_args(env, palette)?),
        ActionName::BackboneChange => ActionArgs::BackboneChange(backbone_args(env)?),
        ActionName::GoBackToStep => ActionArgs::GoBackToStep(go_back_args(env, current_step)?),
    })
}
