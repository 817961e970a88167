//! Instantiation of the two RosettaScripts protocol templates.
//!
//! `{slot}` fields are filled from the agent's action, `[slot]` fields from
//! the environment configuration. Substitution is plain text replacement so
//! agent-written XML appears verbatim in the document.

mod check;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::action::{ActionArgs, BackboneChangeArgs, PenaltyItem, ResidueRestriction, RestrictionKind, RotamerChangeArgs};
use crate::penalty::{compile_penalty, emit_original_all, PenaltyError};
use crate::residue::{Palette, ResidueCode};

pub use check::{check_script, Diagnostic, DiagnosticKind};

pub const ROTAMER_TEMPLATE: &str = include_str!("../../prompts/rotamer_change_template.xml");
pub const BACKBONE_TEMPLATE: &str = include_str!("../../prompts/backbone_change_template.xml");

/// Selector defined by both templates; agents may not redeclare it.
pub const CORE_SELECTOR: &str = "_core_residues";

/// Task-defined parts of a protocol.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub guidance_weights: Vec<Reweight>,
    pub scoring_weights: Vec<Reweight>,
    pub additional_residue_types: Vec<ResidueCode>,
    pub simple_metrics: String,
    pub filters: String,
    pub protocol: String,
    pub movemap_factory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reweight {
    pub scoretype: String,
    pub weight: f64,
}

impl EnvConfig {
    pub fn palette(&self) -> Palette {
        Palette::with_extensions(&self.additional_residue_types)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Agent,
    Environment,
}

/// A penalty file written next to the protocol before execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptDocument {
    pub text: String,
    pub provenance: BTreeMap<String, Provenance>,
    pub files: Vec<GeneratedFile>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScriptError {
    #[error("residue selector '{0}' is referenced but never defined in residue_selectors")]
    UnresolvedReference(String),
    #[error("residue_selectors is not well-formed XML: {0}")]
    MalformedSelectorXml(String),
    #[error("the selector name '{CORE_SELECTOR}' is reserved by the environment")]
    ReservedName,
    #[error("restriction on '{selector}' allows every residue type in the palette and has no effect")]
    EmptyComplement { selector: String },
    #[error("residue type {0} is not in the design palette")]
    UnknownResidueCode(String),
    #[error("penalty item {index}: {source}")]
    Penalty { index: usize, source: PenaltyError },
    #[error("go_back_to_step does not run a protocol")]
    NoScript,
}

/// One compiled task operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskOperation {
    pub name: String,
    pub xml: String,
}

/// Result of compiling residue restrictions. Restrictions that allow the whole
/// palette produce no operation and are reported in `skipped`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompiledRestrictions {
    pub operations: Vec<TaskOperation>,
    pub skipped: Vec<ScriptError>,
}

/// Compiles restrictions into `ProhibitSpecifiedBaseResidueTypes` operations.
///
/// `restrict` prohibits the palette complement of the allowed set. Base types
/// are listed in palette order so complementary restrict and prohibit items
/// produce identical lists.
pub fn compile_restrictions(restrictions: &[ResidueRestriction], palette: &Palette) -> Result<CompiledRestrictions, ScriptError> {
    let mut out = CompiledRestrictions::default();
    for (i, r) in restrictions.iter().enumerate() {
        if let Some(c) = r.residues.codes().iter().find(|c| !palette.contains(**c)) {
            return Err(ScriptError::UnknownResidueCode(c.to_string()));
        }
        let prohibited: Vec<&str> = palette
            .codes()
            .iter()
            .filter(|c| match r.kind {
                RestrictionKind::Prohibit => r.residues.contains(**c),
                RestrictionKind::Restrict => !r.residues.contains(**c),
            })
            .map(|c| c.as_str())
            .collect();
        if prohibited.is_empty() {
            out.skipped.push(ScriptError::EmptyComplement { selector: r.selector_name.clone() });
            continue;
        }
        let name = format!("restriction_{i}");
        let xml = format!(
            "<ProhibitSpecifiedBaseResidueTypes name=\"{name}\" base_types=\"{}\" selector=\"{}\" />",
            prohibited.join(","),
            r.selector_name
        );
        out.operations.push(TaskOperation { name, xml });
    }
    Ok(out)
}

fn packing_operations(names: &[String]) -> Vec<TaskOperation> {
    names
        .iter()
        .enumerate()
        .map(|(i, sel)| {
            let name = format!("packing_{i}");
            let xml = format!(
                "<OperateOnResidueSubset name=\"{name}\" selector=\"{sel}\">\n        <RestrictToRepackingRLT />\n    </OperateOnResidueSubset>"
            );
            TaskOperation { name, xml }
        })
        .collect()
}

/// Composition movers and their penalty files, one per item.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompositionMovers {
    pub names: Vec<String>,
    pub xml: Vec<String>,
    pub files: Vec<GeneratedFile>,
}

/// One `AddCompositionConstraintMover` per item, referencing `comp_<step>_<index>.comp`.
/// Items without a selector apply to the whole sequence.
pub fn build_composition_movers(items: &[PenaltyItem], step: usize) -> Result<CompositionMovers, ScriptError> {
    let mut out = CompositionMovers::default();
    for (i, item) in items.iter().enumerate() {
        let compiled = item
            .comp
            .iter()
            .map(compile_penalty)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| ScriptError::Penalty { index: i, source })?;
        let name = format!("comp_{i}");
        let filename = format!("comp_{step}_{i}.comp");
        let selector = item.selector_name.as_ref().map(|s| format!(" selector=\"{s}\"")).unwrap_or_default();
        out.xml.push(format!("<AddCompositionConstraintMover name=\"{name}\" filename=\"{filename}\"{selector} />"));
        out.files.push(GeneratedFile { name: filename, contents: emit_original_all(&compiled) });
        out.names.push(name);
    }
    Ok(out)
}

/// Names carried by `name="..."` attributes anywhere in the selector XML.
fn declared_selectors(xml: &str) -> Result<BTreeSet<String>, ScriptError> {
    let wrapped = format!("<root>{xml}</root>");
    let doc = roxmltree::Document::parse(&wrapped).map_err(|e| ScriptError::MalformedSelectorXml(e.to_string()))?;
    let mut names = BTreeSet::new();
    for node in doc.descendants().filter(|n| n.is_element()) {
        if let Some(name) = node.attribute("name") {
            if name == CORE_SELECTOR {
                return Err(ScriptError::ReservedName);
            }
            names.insert(name.to_string());
        }
    }
    names.insert(CORE_SELECTOR.to_string());
    Ok(names)
}

fn resolve<'a>(declared: &BTreeSet<String>, names: impl IntoIterator<Item = &'a String>) -> Result<(), ScriptError> {
    match names.into_iter().find(|n| !declared.contains(*n)) {
        Some(n) => Err(ScriptError::UnresolvedReference(n.clone())),
        None => Ok(()),
    }
}

fn reweights(ws: &[Reweight]) -> String {
    ws.iter()
        .map(|w| format!("<Reweight scoretype=\"{}\" weight=\"{}\" />", w.scoretype, w.weight))
        .collect::<Vec<_>>()
        .join("\n        ")
}

struct Filler {
    text: String,
    provenance: BTreeMap<String, Provenance>,
}

impl Filler {
    fn new(template: &str) -> Self {
        Self { text: template.trim_end().to_string() + "\n", provenance: BTreeMap::new() }
    }

    fn agent(&mut self, slot: &str, value: &str) {
        self.text = self.text.replace(&format!("{{{slot}}}"), value);
        self.provenance.insert(slot.to_string(), Provenance::Agent);
    }

    fn env(&mut self, slot: &str, value: &str) {
        self.text = self.text.replace(&format!("[{slot}]"), value);
        self.provenance.insert(slot.to_string(), Provenance::Environment);
    }

    fn palette(&mut self, extra: &[ResidueCode]) {
        if extra.is_empty() {
            self.text = self.text.replace(" [additional_residue_types]", "");
            self.provenance.insert("additional_residue_types".into(), Provenance::Environment);
        } else {
            let list: Vec<&str> = extra.iter().map(|c| c.as_str()).collect();
            self.env("additional_residue_types", &format!("additional_residue_types=\"{}\"", list.join(",")));
        }
    }

    fn common(&mut self, cfg: &EnvConfig) {
        self.env("scoring_weights", &reweights(&cfg.scoring_weights));
        self.palette(&cfg.additional_residue_types);
        self.env("simple_metrics", cfg.simple_metrics.trim());
        self.env("filters", cfg.filters.trim());
    }

    fn finish(self, files: Vec<GeneratedFile>) -> ScriptDocument {
        ScriptDocument { text: self.text, provenance: self.provenance, files }
    }
}

fn rotamer_script(args: &RotamerChangeArgs, cfg: &EnvConfig, step: usize) -> Result<ScriptDocument, ScriptError> {
    let selectors = args.residue_selectors.clone().unwrap_or_default();
    let declared = declared_selectors(&selectors)?;
    resolve(&declared, args.penalties.iter().filter_map(|p| p.selector_name.as_ref()))?;
    resolve(&declared, args.residue_restrictions.iter().map(|r| &r.selector_name))?;
    resolve(&declared, &args.packing_restrictions)?;

    let restrictions = compile_restrictions(&args.residue_restrictions, &cfg.palette())?;
    let mut ops = restrictions.operations;
    ops.extend(packing_operations(&args.packing_restrictions));
    let movers = build_composition_movers(&args.penalties, step)?;

    let mut protocol = vec!["<Add mover=\"geom_constraint\" />".to_string()];
    protocol.extend(movers.names.iter().map(|n| format!("<Add mover=\"{n}\" />")));
    protocol.push("<Add mover=\"design\" />".into());
    if !cfg.protocol.trim().is_empty() {
        protocol.push(cfg.protocol.trim().to_string());
    }

    let mut f = Filler::new(ROTAMER_TEMPLATE);
    f.agent("residue_selectors", &selectors);
    f.agent("task_operations", &ops.iter().map(|o| o.xml.as_str()).collect::<Vec<_>>().join("\n    "));
    f.agent("aa_comp_mover", &movers.xml.join("\n    "));
    f.env("guidance_weights", &reweights(&cfg.guidance_weights));
    f.common(cfg);
    f.env("operations_names", &ops.iter().map(|o| format!(",{}", o.name)).collect::<String>());
    f.env("protocol", &protocol.join("\n    "));
    Ok(f.finish(movers.files))
}

fn backbone_script(args: &BackboneChangeArgs, cfg: &EnvConfig) -> Result<ScriptDocument, ScriptError> {
    let selectors = args.residue_selectors.clone().unwrap_or_default();
    let declared = declared_selectors(&selectors)?;
    resolve(&declared, &args.mover_selector_name)?;

    let mut mover = format!("<{} name=\"backbone_change\"", args.mover.element());
    if let Some(p) = &args.mover_params {
        mover.push(' ');
        mover.push_str(p.trim());
    }
    if let Some(s) = &args.mover_selector_name {
        mover.push_str(&format!(" residue_selector=\"{s}\""));
    }
    mover.push_str(" />");

    let mut f = Filler::new(BACKBONE_TEMPLATE);
    f.agent("residue_selectors", &selectors);
    f.agent("mover", &mover);
    f.common(cfg);
    f.env("movemap_factory", cfg.movemap_factory.trim());
    f.env("protocol", cfg.protocol.trim());
    Ok(f.finish(Vec::new()))
}

/// Builds the protocol for a design action at trajectory step `step`.
pub fn instantiate_script(args: &ActionArgs, cfg: &EnvConfig, step: usize) -> Result<ScriptDocument, ScriptError> {
    match args {
        ActionArgs::RotamerChange(a) => rotamer_script(a, cfg, step),
        ActionArgs::BackboneChange(a) => backbone_script(a, cfg),
        ActionArgs::GoBackToStep(_) => Err(ScriptError::NoScript),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{BackboneMover, RestrictionKind};
    use crate::residue::{code, ResidueTypeSet};

    fn restriction(kind: RestrictionKind, list: &str, sel: &str) -> ResidueRestriction {
        ResidueRestriction { kind, residues: ResidueTypeSet::parse(list).unwrap(), selector_name: sel.into() }
    }

    #[test]
    fn prohibit_lists_given_types() {
        let c = compile_restrictions(&[restriction(RestrictionKind::Prohibit, "P", "all_res")], &Palette::canonical()).unwrap();
        assert_eq!(
            c.operations[0].xml,
            "<ProhibitSpecifiedBaseResidueTypes name=\"restriction_0\" base_types=\"PRO\" selector=\"all_res\" />"
        );
    }

    #[test]
    fn full_palette_restrict_is_skipped() {
        let all: Vec<String> = Palette::canonical().codes().iter().map(|c| c.to_string()).collect();
        let c = compile_restrictions(&[restriction(RestrictionKind::Restrict, &all.join(","), "core")], &Palette::canonical()).unwrap();
        assert!(c.operations.is_empty());
        assert_eq!(c.skipped, vec![ScriptError::EmptyComplement { selector: "core".into() }]);
    }

    #[test]
    fn ncaa_outside_palette() {
        let err = compile_restrictions(&[restriction(RestrictionKind::Restrict, "TRF", "core")], &Palette::canonical());
        assert_eq!(err, Err(ScriptError::UnknownResidueCode("TRF".into())));
    }

    #[test]
    fn backbone_mover_element() {
        let args = ActionArgs::BackboneChange(BackboneChangeArgs {
            mover: BackboneMover::Backrub,
            mover_params: Some("nmoves=\"100\" temperature=\"0.6\"".into()),
            residue_selectors: Some("<Index name=\"trf_site\" resnums=\"107-111\"/>".into()),
            mover_selector_name: Some("trf_site".into()),
        });
        let cfg = EnvConfig { additional_residue_types: vec![code("TRF")], ..Default::default() };
        let doc = instantiate_script(&args, &cfg, 1).unwrap();
        assert!(doc.text.contains(
            "<Backrub name=\"backbone_change\" nmoves=\"100\" temperature=\"0.6\" residue_selector=\"trf_site\" />"
        ));
        assert!(doc.text.contains("name=\"palette\" additional_residue_types=\"TRF\" />"));
        assert_eq!(doc.provenance["mover"], Provenance::Agent);
        assert_eq!(doc.provenance["filters"], Provenance::Environment);
    }

    #[test]
    fn unresolved_and_reserved() {
        let mut a = RotamerChangeArgs {
            residue_selectors: Some("<Layer name=\"core\" select_core=\"true\"/>".into()),
            packing_restrictions: vec!["coreX".into()],
            ..Default::default()
        };
        let cfg = EnvConfig::default();
        assert_eq!(rotamer_script(&a, &cfg, 0), Err(ScriptError::UnresolvedReference("coreX".into())));
        a.packing_restrictions = vec!["_core_residues".into()];
        assert!(rotamer_script(&a, &cfg, 0).is_ok());
        a.residue_selectors = Some("<Layer name=\"_core_residues\"/>".into());
        assert_eq!(rotamer_script(&a, &cfg, 0), Err(ScriptError::ReservedName));
        a.residue_selectors = Some("<Layer name=\"core\">".into());
        assert!(matches!(rotamer_script(&a, &cfg, 0), Err(ScriptError::MalformedSelectorXml(_))));
    }

    #[test]
    fn empty_rotamer_call() {
        let doc = rotamer_script(&RotamerChangeArgs::default(), &EnvConfig::default(), 0).unwrap();
        assert!(doc.text.contains("task_operations=\"include_current\""));
        assert!(!doc.text.contains("AddCompositionConstraintMover"));
        assert!(doc.files.is_empty());
        assert!(check_script(&doc).is_empty(), "{:?}", check_script(&doc));
    }
}
