//! Structural checks on an instantiated protocol.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ScriptDocument, CORE_SELECTOR};

const SLOTS: [&str; 12] = [
    "{residue_selectors}",
    "{task_operations}",
    "{aa_comp_mover}",
    "{mover}",
    "[guidance_weights]",
    "[scoring_weights]",
    "[additional_residue_types]",
    "[simple_metrics]",
    "[filters]",
    "[protocol]",
    "[operations_names]",
    "[movemap_factory]",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedXml,
    UnfilledSlot,
    UnresolvedReference,
    CoreSelectorCount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    fn new(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Space {
    ScoreFunction,
    Palette,
    Selector,
    TaskOperation,
    Metric,
    Filter,
    Mover,
}

impl Space {
    fn label(self) -> &'static str {
        match self {
            Space::ScoreFunction => "score function",
            Space::Palette => "packer palette",
            Space::Selector => "residue selector",
            Space::TaskOperation => "task operation",
            Space::Metric => "simple metric",
            Space::Filter => "filter",
            Space::Mover => "mover",
        }
    }

    fn of_section(tag: &str) -> Option<Space> {
        Some(match tag {
            "SCOREFXNS" => Space::ScoreFunction,
            "PACKER_PALETTES" => Space::Palette,
            "RESIDUE_SELECTORS" => Space::Selector,
            "TASKOPERATIONS" => Space::TaskOperation,
            "SIMPLE_METRICS" => Space::Metric,
            "FILTERS" => Space::Filter,
            "MOVERS" => Space::Mover,
            _ => return None,
        })
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Returns every structural problem found; an empty list means the document passed.
pub fn check_script(doc: &ScriptDocument) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for slot in SLOTS {
        if doc.text.contains(slot) {
            out.push(Diagnostic::new(DiagnosticKind::UnfilledSlot, format!("slot {slot} was not filled")));
        }
    }
    let xml = match roxmltree::Document::parse(&doc.text) {
        Ok(x) => x,
        Err(e) => {
            out.push(Diagnostic::new(DiagnosticKind::MalformedXml, e.to_string()));
            return out;
        }
    };

    let mut defined: BTreeMap<Space, BTreeSet<String>> = BTreeMap::new();
    let mut core_count = 0;
    for section in xml.root_element().children().filter(|n| n.is_element()) {
        let Some(space) = Space::of_section(section.tag_name().name()) else { continue };
        for node in section.descendants().skip(1).filter(|n| n.is_element()) {
            if let Some(name) = node.attribute("name") {
                if space == Space::Selector && name == CORE_SELECTOR {
                    core_count += 1;
                }
                defined.entry(space).or_default().insert(name.to_string());
            }
        }
    }
    if core_count != 1 {
        out.push(Diagnostic::new(
            DiagnosticKind::CoreSelectorCount,
            format!("selector {CORE_SELECTOR} is defined {core_count} times, expected once"),
        ));
    }

    let mut check = |space: Space, name: &str, line: u32| {
        let known = defined.get(&space).is_some_and(|s| s.contains(name));
        if !known {
            out.push(Diagnostic::new(
                DiagnosticKind::UnresolvedReference,
                format!("line {line}: {} '{name}' is not defined", space.label()),
            ));
        }
    };
    for node in xml.descendants().filter(|n| n.is_element()) {
        let line = xml.text_pos_at(node.range().start).row;
        let in_protocols = node.parent_element().is_some_and(|p| p.tag_name().name() == "PROTOCOLS");
        for attr in node.attributes() {
            let v = attr.value();
            match attr.name() {
                "selector" | "residue_selector" => check(Space::Selector, v.trim(), line),
                "selectors" => split_list(v).for_each(|s| check(Space::Selector, s, line)),
                "task_operations" => split_list(v).for_each(|s| check(Space::TaskOperation, s, line)),
                "scorefxn" => check(Space::ScoreFunction, v.trim(), line),
                "packer_palette" => check(Space::Palette, v.trim(), line),
                "mover" if in_protocols => check(Space::Mover, v.trim(), line),
                "filter" if in_protocols => check(Space::Filter, v.trim(), line),
                "metrics" if in_protocols => split_list(v).for_each(|s| check(Space::Metric, s, line)),
                _ => {}
            }
        }
    }
    out
}
