//! A small subset of the RosettaScripts schema, enough to reproduce the
//! validation failures agents run into with selectors and backbone movers.

use super::{ExecError, Phase};
use crate::script::{check_script, ScriptDocument};

const HEADER: &str = include_str!("../../assets/validation_header.txt");
const FOOTER: &str = "------------------------------------------------------------\nWarning messages were:\n------------------------------------------------------------";

const SELECTORS: &[(&str, &[&str])] = &[
    (
        "Layer",
        &[
            "name",
            "select_core",
            "select_boundary",
            "select_surface",
            "use_sidechain_neighbors",
            "core_cutoff",
            "surface_cutoff",
            "ball_radius",
            "sc_neighbor_dist_midpoint",
            "sc_neighbor_dist_exponent",
            "cache_selection",
        ],
    ),
    ("Index", &["name", "resnums", "error_on_out_of_bounds_index", "reverse"]),
    ("ResidueName", &["name", "residue_names", "residue_name3"]),
    ("And", &["name", "selectors"]),
    ("Or", &["name", "selectors"]),
    ("Not", &["name", "selector"]),
    ("Neighborhood", &["name", "resnums", "selector", "distance", "include_focus_in_subset"]),
    ("SecondaryStructure", &["name", "ss", "overlap", "minH", "minE", "include_terminal_loops", "use_dssp", "pose_secstruct"]),
    ("Chain", &["name", "chains"]),
    ("True", &["name"]),
    ("Bonded", &["name", "resnums", "selector"]),
    ("Slice", &["name", "policy", "from", "to", "indices", "selector"]),
];

const MOVERS: &[(&str, &[&str])] = &[
    ("Small", &["name", "nmoves", "temperature", "angle_max", "scorefxn", "residue_selector", "preserve_detailed_balance"]),
    ("Shear", &["name", "nmoves", "temperature", "angle_max", "scorefxn", "residue_selector", "preserve_detailed_balance"]),
    (
        "Backrub",
        &[
            "name",
            "pivot_residues",
            "pivot_atoms",
            "min_atoms",
            "max_atoms",
            "max_angle_disp_4",
            "max_angle_disp_7",
            "max_angle_disp_slope",
            "preserve_detailed_balance",
            "require_mm_bend",
            "residue_selector",
        ],
    ),
];

fn lookup(table: &'static [(&'static str, &'static [&'static str])], tag: &str) -> Option<&'static [&'static str]> {
    table.iter().find(|(t, _)| *t == tag).map(|(_, a)| *a)
}

/// Rosetta-style validation report for `(line, error)` pairs over `text`.
pub fn validation_message(text: &str, errors: &[(u32, String)]) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = HEADER.trim_end().to_string();
    out.push_str("\nError messages were:\n");
    for (line, err) in errors {
        out.push_str(&format!("From line {line}:\nError: {err}\n"));
        let lo = line.saturating_sub(5).max(1);
        let hi = (*line + 5).min(lines.len() as u32);
        for i in lo..=hi {
            let l = format!("{i}: {}", lines[(i - 1) as usize]);
            out.push_str(l.trim_end());
            out.push('\n');
        }
    }
    out.push_str(FOOTER);
    out
}

fn check_element(node: roxmltree::Node, allowed: &[&str], xml: &roxmltree::Document, errors: &mut Vec<(u32, String)>) {
    let line = xml.text_pos_at(node.range().start).row;
    let tag = node.tag_name().name();
    for attr in node.attributes() {
        if !allowed.contains(&attr.name()) {
            errors.push((
                line,
                format!("Element '{tag}', attribute '{0}': The attribute '{0}' is not allowed.", attr.name()),
            ));
        }
    }
}

/// Schema and reference checks on a full protocol. Errors are reported in
/// the format of the RosettaScripts parser.
pub fn validate_document(doc: &ScriptDocument) -> Result<(), ExecError> {
    let fail = |message: String| Err(ExecError { phase: Phase::Validation, message });
    let xml = match roxmltree::Document::parse(&doc.text) {
        Ok(x) => x,
        Err(e) => {
            let line = e.pos().row;
            return fail(validation_message(&doc.text, &[(line, format!("{e}"))]));
        }
    };
    let mut errors = Vec::new();
    for section in xml.root_element().children().filter(|n| n.is_element()) {
        match section.tag_name().name() {
            "RESIDUE_SELECTORS" => {
                for node in section.descendants().skip(1).filter(|n| n.is_element()) {
                    match lookup(SELECTORS, node.tag_name().name()) {
                        Some(allowed) => check_element(node, allowed, &xml, &mut errors),
                        None => errors.push((
                            xml.text_pos_at(node.range().start).row,
                            format!("Element '{}': This element is not expected.", node.tag_name().name()),
                        )),
                    }
                }
            }
            "MOVERS" => {
                for node in section.children().filter(|n| n.is_element()) {
                    if let Some(allowed) = lookup(MOVERS, node.tag_name().name()) {
                        check_element(node, allowed, &xml, &mut errors);
                    }
                }
            }
            _ => {}
        }
    }
    if !errors.is_empty() {
        return fail(validation_message(&doc.text, &errors));
    }
    let diagnostics = check_script(doc);
    if let Some(d) = diagnostics.first() {
        return fail(format!("[ ERROR ]: Caught exception:\nFile: src/protocols/rosetta_scripts/RosettaScriptsParser.cc\n{}", d.message));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{ActionArgs, BackboneChangeArgs, BackboneMover};
    use crate::script::{instantiate_script, EnvConfig};

    fn backrub(params: &str) -> ScriptDocument {
        let args = ActionArgs::BackboneChange(BackboneChangeArgs {
            mover: BackboneMover::Backrub,
            mover_params: Some(params.into()),
            residue_selectors: None,
            mover_selector_name: None,
        });
        instantiate_script(&args, &EnvConfig::default(), 1).unwrap()
    }

    #[test]
    fn disallowed_mover_attributes() {
        let err = validate_document(&backrub("nmoves=\"100\" temperature=\"0.6\"")).unwrap_err();
        assert_eq!(err.phase, Phase::Validation);
        assert!(err.message.contains("Error: Element 'Backrub', attribute 'nmoves': The attribute 'nmoves' is not allowed."));
        assert!(err.message.contains("attribute 'temperature'"));
        assert_eq!(err.message.matches("From line").count(), 2);
        assert!(err.message.ends_with("Warning messages were:\n------------------------------------------------------------"));
        assert!(validate_document(&backrub("pivot_atoms=\"CA\"")).is_ok());
    }

    #[test]
    fn context_lines_are_numbered() {
        let text = (1..=20).map(|i| format!("l{i}")).collect::<Vec<_>>().join("\n");
        let msg = validation_message(&text, &[(3, "x".into())]);
        assert!(msg.contains("From line 3:\nError: x\n1: l1\n2: l2\n3: l3\n4: l4\n5: l5\n6: l6\n7: l7\n8: l8\n---"));
    }
}
