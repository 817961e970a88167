//! Deterministic stand-in for Rosetta.
//!
//! The mock interprets the protocol document: it evaluates residue selectors
//! over a synthetic fold, applies task operations and composition penalties,
//! and designs sequences by simulated annealing over a one-body energy model.
//! Every number is a pure function of the document, input record, and seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::schema::validate_document;
use super::{replica_seed, Backend, BackendError, DesignRecord, ExecError, Phase, RunContext, StructureMetrics};
use super::{COMPOSITION_POST, COMPOSITION_PRE, RAMA, REPULSION, TOTAL};
use crate::penalty::{eval_penalty, parse_original, Anchor, Occupancy, OriginalPenalty, Selector};
use crate::residue::{Palette, ResidueCode, Sequence};
use crate::script::ScriptDocument;

const BACKRUB_SEGMENTS: &str = include_str!("../../assets/backrub_segments_error.txt");
const PACKER_FAILURE: &str = "ERROR: The packer failed to find a valid rotamer assignment.\nERROR:: Exit from: src/core/pack/pack_rotamers.cc";

/// Synthetic fold: per-position burial layer (`C`, `B`, `S`) and secondary
/// structure (`H`, `E`, `L`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockFold {
    pub layers: String,
    pub secondary_structure: String,
}

impl MockFold {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.layers.len() != self.secondary_structure.len() {
            return Err("layers and secondary_structure differ in length".into());
        }
        if !self.layers.chars().all(|c| "CBS".contains(c)) || !self.secondary_structure.chars().all(|c| "HEL".contains(c)) {
            return Err("layers use C/B/S and secondary_structure uses H/E/L".into());
        }
        Ok(())
    }

    /// 1-based core positions.
    pub fn core_positions(&self) -> Vec<usize> {
        self.layers.char_indices().filter(|(_, c)| *c == 'C').map(|(i, _)| i + 1).collect()
    }

    fn layer(&self, i: usize) -> u8 {
        self.layers.as_bytes()[i]
    }

    fn ss(&self, i: usize) -> u8 {
        self.secondary_structure.as_bytes()[i]
    }
}

fn default_sweeps() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub fold: MockFold,
    /// Probability that a replica fails at runtime.
    #[serde(default)]
    pub failure_rate: f64,
    /// Annealing moves per designable position.
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    config: MockConfig,
}

impl MockBackend {
    pub fn new(config: MockConfig) -> Result<Self, String> {
        config.fold.validate()?;
        Ok(Self { config })
    }

    pub fn fold(&self) -> &MockFold {
        &self.config.fold
    }

    /// A starting record for `sequence` on the unperturbed fold.
    pub fn initial_record(&self, id: &str, sequence: Sequence) -> Result<DesignRecord, ExecError> {
        let fold = &self.config.fold;
        if sequence.len() != fold.len() {
            return Err(runtime(format!("sequence length {} does not match fold length {}", sequence.len(), fold.len())));
        }
        let structure = Structure { drift: 0.0, tag: "init".into() };
        let allowed = vec![1usize; fold.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed_from(&[id.as_bytes()]));
        Ok(self.score(id.into(), None, &structure, sequence, &allowed, 0.0, 0.0, &mut rng))
    }

    #[allow(clippy::too_many_arguments)]
    fn score(
        &self,
        id: String,
        parent_id: Option<String>,
        structure: &Structure,
        sequence: Sequence,
        allowed_sizes: &[usize],
        comp_pre: f64,
        comp_post: f64,
        rng: &mut ChaCha8Rng,
    ) -> DesignRecord {
        let fold = &self.config.fold;
        let land = Landscape::new(fold, structure);
        let n = fold.len();
        let unit = Normal::new(0.0, 1.0).expect("valid");
        let mut rep = Vec::with_capacity(n);
        let mut rama = Vec::with_capacity(n);
        let mut one_body = 0.0;
        let mut cavity = 0.0;
        let mut unsat = 0.0;
        for (i, aa) in sequence.0.iter().enumerate() {
            let p = props(*aa);
            one_body += land.energy(i, *aa);
            let scale = match fold.layer(i) {
                b'C' => 1.2,
                b'B' => 0.6,
                _ => 0.3,
            };
            rep.push(round4((0.2 + 0.01 * (p.volume - 120.0) * scale + 0.25 * unit.sample(rng)).max(0.0)));
            let base = match aa.as_str() {
                "GLY" => 0.6,
                "PRO" | "HYP" => 0.5,
                _ => 0.15,
            };
            rama.push(round4((base + land.rama[i] + 0.2 * unit.sample(rng).abs()).max(0.0)));
            match fold.layer(i) {
                b'C' => {
                    cavity += 0.15 * (150.0 - p.volume).max(0.0);
                    if p.hydropathy < -1.0 {
                        unsat += 60.0;
                    }
                }
                b'B' if p.hydropathy < -1.0 => unsat += 8.0,
                _ => {}
            }
        }
        let alphabet: f64 = allowed_sizes.iter().map(|&k| (k.max(1) as f64).ln()).sum();
        let total = one_body + 0.3 * rep.iter().sum::<f64>() + 0.2 * rama.iter().sum::<f64>() + 0.05 * alphabet;
        let metrics = StructureMetrics {
            cavity_volume: round4((cavity + 3.0 * unit.sample(rng)).max(0.0)),
            radius_of_gyration: round4(2.2 * (n as f64).powf(0.38) + 0.01 * unit.sample(rng).abs() + 0.05 * structure.drift),
            buried_unsat_penalty: round4(unsat + 20.0 * unit.sample(rng).abs()),
            rmsd_to_reference: round4(structure.drift),
        };
        let mut scores = BTreeMap::new();
        scores.insert(TOTAL.to_string(), round4(total));
        scores.insert(COMPOSITION_PRE.to_string(), round4(comp_pre));
        scores.insert(COMPOSITION_POST.to_string(), round4(comp_post));
        let mut per_residue = BTreeMap::new();
        per_residue.insert(REPULSION.to_string(), rep);
        per_residue.insert(RAMA.to_string(), rama);
        DesignRecord {
            id,
            parent_id,
            structure_ref: structure.encode(),
            sequence,
            scores,
            per_residue,
            structure_metrics: metrics,
            progress_metrics: None,
            core_positions: fold.core_positions(),
        }
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn runtime(message: impl Into<String>) -> ExecError {
    ExecError { phase: Phase::Runtime, message: message.into() }
}

fn seed_from(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Clone, Copy)]
struct Props {
    hydropathy: f64,
    volume: f64,
}

fn props(aa: ResidueCode) -> Props {
    let (hydropathy, volume) = match aa.as_str() {
        "ALA" => (1.8, 88.6),
        "ARG" => (-4.5, 173.4),
        "ASN" => (-3.5, 114.1),
        "ASP" => (-3.5, 111.1),
        "CYS" => (2.5, 108.5),
        "GLN" => (-3.5, 143.8),
        "GLU" => (-3.5, 138.4),
        "GLY" => (-0.4, 60.1),
        "HIS" => (-3.2, 153.2),
        "ILE" => (4.5, 166.7),
        "LEU" => (3.8, 166.7),
        "LYS" => (-3.9, 168.6),
        "MET" => (1.9, 162.9),
        "PHE" => (2.8, 189.9),
        "PRO" => (-1.6, 112.7),
        "SER" => (-0.8, 89.0),
        "THR" => (-0.7, 116.1),
        "TRP" => (-0.9, 227.8),
        "TYR" => (-1.3, 193.6),
        "VAL" => (4.2, 140.0),
        "TRF" => (3.4, 230.0),
        "NLE" => (3.9, 166.7),
        "NVL" => (3.5, 140.0),
        "ORN" => (-4.0, 150.0),
        "DAB" => (-3.8, 130.0),
        "AIB" => (2.0, 100.0),
        "HYP" => (-1.8, 120.0),
        "DPP" => (-4.0, 120.0),
        _ => (0.0, 120.0),
    };
    Props { hydropathy, volume }
}

/// Backbone state carried in `structure_ref` as `mock:<drift>:<tag>`.
#[derive(Debug, Clone, PartialEq)]
struct Structure {
    drift: f64,
    tag: String,
}

impl Structure {
    fn parse(s: &str) -> Result<Self, ExecError> {
        let mut parts = s.splitn(3, ':');
        match (parts.next(), parts.next(), parts.next()) {
            (Some("mock"), Some(d), Some(tag)) => {
                let drift = d.parse().map_err(|_| runtime(format!("bad structure reference {s}")))?;
                Ok(Self { drift, tag: tag.to_string() })
            }
            _ => Err(runtime(format!("bad structure reference {s}"))),
        }
    }

    fn encode(&self) -> String {
        format!("mock:{}:{}", round4(self.drift), self.tag)
    }
}

/// Position-specific energy terms that depend on the backbone.
struct Landscape<'a> {
    fold: &'a MockFold,
    noise_seed: u64,
    rama: Vec<f64>,
}

impl<'a> Landscape<'a> {
    fn new(fold: &'a MockFold, s: &Structure) -> Self {
        let noise_seed = seed_from(&[b"backbone", s.tag.as_bytes()]);
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed ^ 0x5eed);
        let rama = (0..fold.len()).map(|_| 0.1 * rng.gen::<f64>()).collect();
        Self { fold, noise_seed, rama }
    }

    fn noise(&self, i: usize, aa: ResidueCode) -> f64 {
        let v = seed_from(&[&self.noise_seed.to_le_bytes(), &(i as u64).to_le_bytes(), aa.as_str().as_bytes()]);
        // uniform in [-0.5, 0.5)
        (v >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    fn energy(&self, i: usize, aa: ResidueCode) -> f64 {
        let p = props(aa);
        let layer = match self.fold.layer(i) {
            b'C' => -0.55 * p.hydropathy + 0.012 * (150.0 - p.volume).max(0.0) + 0.01 * (p.volume - 200.0).max(0.0),
            b'B' => -0.1 * p.hydropathy,
            _ => 0.3 * p.hydropathy,
        };
        let ss = match (self.fold.ss(i), aa.as_str()) {
            (b'H' | b'E', "PRO" | "HYP") => 1.5,
            (b'H', "GLY") => 0.6,
            (b'H', "AIB") => -0.3,
            (b'L', "GLY") => -0.3,
            (b'L', "PRO") => -0.2,
            _ => 0.0,
        };
        -2.6 + layer + ss + 0.7 * self.noise(i, aa)
    }
}

fn parse_bool(v: &str) -> bool {
    matches!(v.trim().to_ascii_lowercase().as_str(), "true" | "1" | "yes")
}

fn parse_resnums(v: &str, n: usize) -> Result<Vec<usize>, ExecError> {
    let mut out = Vec::new();
    for tok in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let tok = tok.trim_end_matches(|c: char| c.is_ascii_alphabetic());
        let (a, b) = match tok.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim().trim_end_matches(|c: char| c.is_ascii_alphabetic())),
            None => (tok, tok),
        };
        let bad = || runtime(format!("ERROR: could not parse residue number '{tok}' in resnums=\"{v}\""));
        let a: usize = a.parse().map_err(|_| bad())?;
        let b: usize = b.parse().map_err(|_| bad())?;
        for r in a.min(b)..=a.max(b) {
            if r == 0 || r > n {
                return Err(runtime(format!("ERROR: residue {r} in resnums=\"{v}\" is outside the pose (1-{n})")));
            }
            out.push(r - 1);
        }
    }
    Ok(out)
}

/// Evaluates named residue selectors over the fold and a sequence.
struct SelectorEnv<'d, 'i> {
    defs: BTreeMap<String, roxmltree::Node<'d, 'i>>,
    fold: &'d MockFold,
    sequence: &'d Sequence,
}

impl<'d, 'i> SelectorEnv<'d, 'i> {
    fn named(&self, name: &str, depth: usize) -> Result<Vec<bool>, ExecError> {
        let node = self
            .defs
            .get(name)
            .ok_or_else(|| runtime(format!("ERROR: ResidueSelector with name \"{name}\" not found in the data map")))?;
        self.eval(*node, depth + 1)
    }

    fn focus(&self, node: roxmltree::Node, depth: usize) -> Result<Vec<bool>, ExecError> {
        let n = self.fold.len();
        if let Some(r) = node.attribute("resnums") {
            let mut m = vec![false; n];
            for i in parse_resnums(r, n)? {
                m[i] = true;
            }
            Ok(m)
        } else if let Some(s) = node.attribute("selector") {
            self.named(s.trim(), depth)
        } else if let Some(child) = node.children().find(|c| c.is_element()) {
            self.eval(child, depth + 1)
        } else {
            Err(runtime(format!("ERROR: {} selector needs resnums or a selector", node.tag_name().name())))
        }
    }

    fn eval(&self, node: roxmltree::Node, depth: usize) -> Result<Vec<bool>, ExecError> {
        if depth > 64 {
            return Err(runtime("ERROR: residue selector definitions are circular"));
        }
        let n = self.fold.len();
        let tag = node.tag_name().name();
        let children = || -> Result<Vec<Vec<bool>>, ExecError> {
            let mut v = Vec::new();
            if let Some(list) = node.attribute("selectors") {
                for s in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    v.push(self.named(s, depth)?);
                }
            }
            for c in node.children().filter(|c| c.is_element()) {
                v.push(self.eval(c, depth + 1)?);
            }
            Ok(v)
        };
        Ok(match tag {
            "Layer" => {
                let want = |attr: &str| node.attribute(attr).is_some_and(parse_bool);
                let (c, b, s) = (want("select_core"), want("select_boundary"), want("select_surface"));
                (0..n)
                    .map(|i| match self.fold.layer(i) {
                        b'C' => c,
                        b'B' => b,
                        _ => s,
                    })
                    .collect()
            }
            "Index" => {
                let mut m = vec![false; n];
                for i in parse_resnums(node.attribute("resnums").unwrap_or(""), n)? {
                    m[i] = true;
                }
                m
            }
            "ResidueName" => {
                let list = node.attribute("residue_names").or(node.attribute("residue_name3")).unwrap_or("");
                let names: Vec<&str> = list.split(',').map(str::trim).collect();
                self.sequence.0.iter().map(|c| names.contains(&c.as_str())).collect()
            }
            "And" => children()?.into_iter().fold(vec![true; n], |acc, m| acc.iter().zip(m).map(|(a, b)| *a && b).collect()),
            "Or" => children()?.into_iter().fold(vec![false; n], |acc, m| acc.iter().zip(m).map(|(a, b)| *a || b).collect()),
            "Not" => self.focus(node, depth)?.into_iter().map(|b| !b).collect(),
            "Neighborhood" => {
                let f = self.focus(node, depth)?;
                let dist: f64 = node.attribute("distance").and_then(|d| d.parse().ok()).unwrap_or(10.0);
                let reach = (dist / 3.8).round() as usize;
                let include = node.attribute("include_focus_in_subset").map_or(true, parse_bool);
                (0..n)
                    .map(|i| {
                        let near = (i.saturating_sub(reach)..=(i + reach).min(n - 1)).any(|j| j != i && f[j]);
                        near || (include && f[i])
                    })
                    .collect()
            }
            "Bonded" => {
                let f = self.focus(node, depth)?;
                (0..n).map(|i| (i > 0 && f[i - 1]) || (i + 1 < n && f[i + 1])).collect()
            }
            "SecondaryStructure" => {
                let ss = node
                    .attribute("ss")
                    .ok_or_else(|| runtime("ERROR: SecondaryStructure selector requires the ss option"))?
                    .to_ascii_uppercase();
                (0..n).map(|i| ss.as_bytes().contains(&self.fold.ss(i))).collect()
            }
            "Slice" => {
                let base = if node.attribute("selector").is_some() { self.focus(node, depth)? } else { vec![true; n] };
                let idx: Vec<usize> = (0..n).filter(|&i| base[i]).collect();
                let pick = |k: i64| -> Option<usize> {
                    let len = idx.len() as i64;
                    let j = if k < 0 { len + k } else { k - 1 };
                    (0..len).contains(&j).then(|| idx[j as usize])
                };
                let mut m = vec![false; n];
                if let Some(list) = node.attribute("indices") {
                    for k in list.split(',').filter_map(|t| t.trim().parse::<i64>().ok()) {
                        if let Some(i) = pick(k) {
                            m[i] = true;
                        }
                    }
                } else {
                    let from = node.attribute("from").and_then(|v| v.parse().ok()).unwrap_or(1);
                    let to = node.attribute("to").and_then(|v| v.parse().ok()).unwrap_or(-1);
                    if let (Some(a), Some(b)) = (pick(from), pick(to)) {
                        for i in idx.iter().filter(|&&i| i >= a && i <= b) {
                            m[*i] = true;
                        }
                    }
                }
                m
            }
            "Chain" | "True" => vec![true; n],
            other => return Err(runtime(format!("ERROR: unknown residue selector type {other}"))),
        })
    }
}

struct CompositionTerm {
    blocks: Vec<OriginalPenalty>,
    mask: Vec<bool>,
}

impl CompositionTerm {
    fn energy(&self, seq: &[ResidueCode]) -> Result<f64, ExecError> {
        let size = self.mask.iter().filter(|b| **b).count();
        let mut total = 0.0;
        for b in &self.blocks {
            let Selector::Types(types) = &b.selector else {
                return Err(runtime("ERROR: PROPERTIES selection is not supported by this backend"));
            };
            let count = seq.iter().zip(&self.mask).filter(|(aa, m)| **m && types.contains(**aa)).count();
            let occ = match b.anchor {
                Anchor::Absolute { .. } => Occupancy::Count(count as u64),
                Anchor::Fraction { .. } if size == 0 => continue,
                Anchor::Fraction { .. } => Occupancy::Fraction(count as f64 / size as f64),
            };
            total += eval_penalty(b, occ).map_err(|e| runtime(format!("ERROR: {e}")))?;
        }
        Ok(total)
    }
}

/// What a protocol document asks the mock to do.
enum Plan {
    Design { allowed: Vec<Vec<ResidueCode>>, terms: Vec<CompositionTerm> },
    Backbone { mover: String, mask: Vec<bool>, nmoves: f64 },
}

fn children_named<'a, 'i>(root: roxmltree::Node<'a, 'i>, section: &str) -> Vec<roxmltree::Node<'a, 'i>> {
    root.children()
        .filter(|n| n.is_element() && n.tag_name().name() == section)
        .flat_map(|s| s.children().filter(|c| c.is_element()))
        .collect()
}

impl MockBackend {
    fn plan(&self, doc: &ScriptDocument, input: &DesignRecord) -> Result<Plan, ExecError> {
        let fold = &self.config.fold;
        let n = fold.len();
        let xml = roxmltree::Document::parse(&doc.text).map_err(|e| runtime(e.to_string()))?;
        let root = xml.root_element();

        let mut defs = BTreeMap::new();
        for node in children_named(root, "RESIDUE_SELECTORS") {
            if let Some(name) = node.attribute("name") {
                defs.insert(name.to_string(), node);
            }
        }
        let env = SelectorEnv { defs, fold, sequence: &input.sequence };
        let mask_of = |node: roxmltree::Node, attr: &str| -> Result<Vec<bool>, ExecError> {
            match node.attribute(attr) {
                Some(s) => env.named(s.trim(), 0),
                None => Ok(vec![true; n]),
            }
        };

        let movers: BTreeMap<&str, roxmltree::Node> =
            children_named(root, "MOVERS").into_iter().filter_map(|m| m.attribute("name").map(|k| (k, m))).collect();
        let protocol: Vec<&str> = children_named(root, "PROTOCOLS").iter().filter_map(|a| a.attribute("mover")).collect();

        if let Some(bb) = movers.get("backbone_change") {
            let mask = mask_of(*bb, "residue_selector")?;
            let nmoves = bb.attribute("nmoves").and_then(|v| v.parse().ok()).unwrap_or(1.0);
            return Ok(Plan::Backbone { mover: bb.tag_name().name().to_string(), mask, nmoves });
        }

        let mut palette_extra = Vec::new();
        for p in children_named(root, "PACKER_PALETTES") {
            if let Some(list) = p.attribute("additional_residue_types") {
                for c in list.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                    palette_extra.push(
                        ResidueCode::from_three(c).ok_or_else(|| runtime(format!("ERROR: unknown residue type {c} in packer palette")))?,
                    );
                }
            }
        }
        let palette = Palette::with_extensions(&palette_extra);

        let ops: BTreeMap<&str, roxmltree::Node> =
            children_named(root, "TASKOPERATIONS").into_iter().filter_map(|m| m.attribute("name").map(|k| (k, m))).collect();
        let design = movers
            .values()
            .find(|m| m.tag_name().name() == "FastDesign")
            .ok_or_else(|| runtime("ERROR: the protocol has no design mover"))?;
        let mut allowed: Vec<Vec<ResidueCode>> = vec![palette.codes().to_vec(); n];
        let mut repack_only = vec![false; n];
        for name in design.attribute("task_operations").unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let op = ops.get(name).ok_or_else(|| runtime(format!("ERROR: TaskOperation \"{name}\" not found")))?;
            match op.tag_name().name() {
                "ProhibitSpecifiedBaseResidueTypes" => {
                    let mask = mask_of(*op, "selector")?;
                    let banned: Vec<&str> = op.attribute("base_types").unwrap_or("").split(',').map(str::trim).collect();
                    for (i, m) in mask.iter().enumerate() {
                        if *m {
                            allowed[i].retain(|c| !banned.contains(&c.as_str()));
                        }
                    }
                }
                "OperateOnResidueSubset" => {
                    let mask = mask_of(*op, "selector")?;
                    for (i, m) in mask.iter().enumerate() {
                        repack_only[i] |= *m;
                    }
                }
                _ => {}
            }
        }
        for i in 0..n {
            if repack_only[i] {
                allowed[i] = vec![input.sequence.0[i]];
            } else if allowed[i].is_empty() {
                return Err(runtime(format!(
                    "ERROR: task operations leave no allowed residue types at position {}\nERROR:: Exit from: src/core/pack/task/PackerTask_.cc",
                    i + 1
                )));
            }
        }

        let mut terms = Vec::new();
        for name in &protocol {
            let Some(m) = movers.get(name) else { continue };
            if m.tag_name().name() != "AddCompositionConstraintMover" {
                continue;
            }
            let file = m.attribute("filename").unwrap_or("");
            let contents = doc
                .files
                .iter()
                .find(|f| f.name == file)
                .ok_or_else(|| runtime(format!("ERROR: Unable to open file: {file}")))?;
            let blocks = parse_original(&contents.contents).map_err(|e| runtime(format!("ERROR: in {file}: {e}")))?;
            terms.push(CompositionTerm { blocks, mask: mask_of(*m, "selector")? });
        }
        Ok(Plan::Design { allowed, terms })
    }

    fn composition(terms: &[CompositionTerm], seq: &[ResidueCode]) -> Result<f64, ExecError> {
        terms.iter().map(|t| t.energy(seq)).sum()
    }

    fn anneal(
        &self,
        land: &Landscape,
        allowed: &[Vec<ResidueCode>],
        terms: &[CompositionTerm],
        start: &[ResidueCode],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<ResidueCode>, ExecError> {
        let mut seq: Vec<ResidueCode> = start
            .iter()
            .enumerate()
            .map(|(i, aa)| if allowed[i].contains(aa) { *aa } else { allowed[i][rng.gen_range(0..allowed[i].len())] })
            .collect();
        let designable: Vec<usize> = (0..seq.len()).filter(|&i| allowed[i].len() > 1).collect();
        if designable.is_empty() {
            return Ok(seq);
        }
        let moves = self.config.sweeps * designable.len();
        let (t0, t1) = (2.5f64, 0.02f64);
        let mut comp = Self::composition(terms, &seq)?;
        for k in 0..moves {
            let t = t0 * (t1 / t0).powf(k as f64 / moves as f64);
            let i = designable[rng.gen_range(0..designable.len())];
            let old = seq[i];
            let new = allowed[i][rng.gen_range(0..allowed[i].len())];
            if new == old {
                continue;
            }
            seq[i] = new;
            let new_comp = if terms.is_empty() { 0.0 } else { Self::composition(terms, &seq)? };
            let delta = land.energy(i, new) - land.energy(i, old) + new_comp - comp;
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / t).exp() {
                comp = new_comp;
            } else {
                seq[i] = old;
            }
        }
        Ok(seq)
    }
}

fn longest_run(mask: &[bool]) -> usize {
    let (mut best, mut cur) = (0, 0);
    for &b in mask {
        cur = if b { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

impl Backend for MockBackend {
    fn validate(&self, doc: &ScriptDocument) -> Result<(), BackendError> {
        Ok(validate_document(doc)?)
    }

    fn run_replica(&self, doc: &ScriptDocument, input: &DesignRecord, replica: usize, ctx: &RunContext) -> Result<DesignRecord, ExecError> {
        let seed = replica_seed(ctx.seed, ctx.step, replica);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = format!("s{}-r{:03}", ctx.step, replica);
        let structure = Structure::parse(&input.structure_ref)?;
        let plan = self.plan(doc, input)?;
        if rng.gen::<f64>() < self.config.failure_rate {
            return Err(runtime(PACKER_FAILURE));
        }
        match plan {
            Plan::Design { allowed, terms } => {
                let land = Landscape::new(&self.config.fold, &structure);
                let pre = Self::composition(&terms, &input.sequence.0)?;
                let seq = self.anneal(&land, &allowed, &terms, &input.sequence.0, &mut rng)?;
                let post = Self::composition(&terms, &seq)?;
                let sizes: Vec<usize> = allowed.iter().map(Vec::len).collect();
                Ok(self.score(id, Some(input.id.clone()), &structure, Sequence(seq), &sizes, pre, post, &mut rng))
            }
            Plan::Backbone { mover, mask, nmoves } => {
                if mover == "Backrub" && longest_run(&mask) < 3 {
                    return Err(runtime(BACKRUB_SEGMENTS.trim_end()));
                }
                let moved = mask.iter().filter(|b| **b).count() as f64;
                let step = match mover.as_str() {
                    "Small" => 0.5,
                    "Shear" => 0.4,
                    _ => 0.3,
                };
                let n = self.config.fold.len() as f64;
                let drift = structure.drift + step * (moved / n).sqrt() * nmoves.max(1.0).ln_1p() * (0.5 + rng.gen::<f64>());
                let moved_structure = Structure { drift, tag: format!("{:016x}", rng.gen::<u64>()) };
                let sizes = vec![1usize; self.config.fold.len()];
                let mut probe = rng.clone();
                let before = self.score(id.clone(), None, &structure, input.sequence.clone(), &sizes, 0.0, 0.0, &mut probe);
                let after = self.score(id, Some(input.id.clone()), &moved_structure, input.sequence.clone(), &sizes, 0.0, 0.0, &mut rng);
                if after.total_energy() <= before.total_energy() + 2.0 {
                    Ok(after)
                } else {
                    let mut kept = self.score(after.id.clone(), Some(input.id.clone()), &structure, input.sequence.clone(), &sizes, 0.0, 0.0, &mut rng);
                    kept.structure_ref = structure.encode();
                    Ok(kept)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{extract_first_action, validate_action};
    use crate::residue::code;
    use crate::script::{instantiate_script, EnvConfig};

    fn fold() -> MockFold {
        MockFold { layers: "SSBCCCBSSBCCBSS".into(), secondary_structure: "LHHHHHHLLEEEELL".into() }
    }

    fn backend() -> MockBackend {
        MockBackend::new(MockConfig { fold: fold(), failure_rate: 0.0, sweeps: 25 }).unwrap()
    }

    fn ctx() -> RunContext {
        RunContext { seed: 7, step: 1, workers: 1 }
    }

    fn doc(call: &str, cfg: &EnvConfig) -> ScriptDocument {
        let env = extract_first_action(call).unwrap();
        let args = validate_action(&env, 1, &cfg.palette()).unwrap();
        instantiate_script(&args, cfg, 1).unwrap()
    }

    fn input(b: &MockBackend) -> DesignRecord {
        b.initial_record("init", Sequence::uniform(code("ALA"), 15)).unwrap()
    }

    #[test]
    fn replicas_are_deterministic() {
        let b = backend();
        let d = doc("<action tag=\"run\"><name>rotamer_change</name></action>", &EnvConfig::default());
        let x = b.run_replica(&d, &input(&b), 3, &ctx()).unwrap();
        let y = b.run_replica(&d, &input(&b), 3, &ctx()).unwrap();
        assert_eq!(x, y);
        assert!(x.check().is_ok());
        assert_eq!(x.parent_id.as_deref(), Some("init"));
    }

    #[test]
    fn restrictions_are_respected() {
        let b = backend();
        let call = "<action tag=\"run\"><name>rotamer_change</name><residue_selectors><Layer name=\"core\" select_core=\"true\"/></residue_selectors><residue_restrictions><item><type>restrict</type><residues>V</residues><selector_name>core</selector_name></item><item><type>prohibit</type><residues>ILE,LEU</residues><selector_name>_core_residues</selector_name></item></residue_restrictions></action>";
        let d = doc(call, &EnvConfig::default());
        let r = b.run_replica(&d, &input(&b), 0, &ctx()).unwrap();
        for p in fold().core_positions() {
            assert_eq!(r.sequence.0[p - 1], code("VAL"));
        }
    }

    #[test]
    fn composition_energy_matches_penalty() {
        let b = backend();
        let call = "<action tag=\"run\"><name>rotamer_change</name><penalties><item><comp>PENALTY_DEFINITION\nTYPE P\nSHAPE ABOVE\nTARGET 5\nRADIUS 0\nBOUNDARY LINEAR\nSTRENGTH 10\nEND_PENALTY_DEFINITION</comp></item></penalties><residue_restrictions><item><type>restrict</type><residues>P</residues><selector_name>_core_residues</selector_name></item></residue_restrictions></action>";
        let d = doc(call, &EnvConfig::default());
        let mut seq = Sequence::uniform(code("ALA"), 15);
        for i in 0..7 {
            seq.0[i] = code("PRO");
        }
        let start = b.initial_record("init", seq).unwrap();
        let r = b.run_replica(&d, &start, 0, &ctx()).unwrap();
        assert_eq!(r.score(COMPOSITION_PRE), Some(20.0));
        let pro = r.sequence.0.iter().filter(|c| **c == code("PRO")).count() as f64;
        assert_eq!(r.score(COMPOSITION_POST), Some(10.0 * (pro - 5.0).max(0.0)));
    }

    #[test]
    fn short_backrub_segment_fails() {
        let b = backend();
        let call = "<action tag=\"run\"><name>backbone_change</name><mover_name>backrub</mover_name><residue_selectors><Index name=\"site\" resnums=\"9\"/></residue_selectors><mover_selector_name>site</mover_selector_name></action>";
        let err = b.run_replica(&doc(call, &EnvConfig::default()), &input(&b), 0, &ctx()).unwrap_err();
        assert_eq!(err.phase, Phase::Runtime);
        assert!(err.message.contains("ERROR: Assertion `segments_.size()` failed."));
        let ok = call.replace("resnums=\"9\"", "resnums=\"7-11\"");
        let r = b.run_replica(&doc(&ok, &EnvConfig::default()), &input(&b), 0, &ctx()).unwrap();
        assert_eq!(r.sequence, input(&b).sequence);
    }

    #[test]
    fn selector_evaluation() {
        let f = fold();
        let seq = Sequence::uniform(code("ALA"), 15);
        let xml = roxmltree::Document::parse(
            "<R><Index name=\"a\" resnums=\"2-4,10\"/><SecondaryStructure name=\"h\" ss=\"H\"/><And name=\"x\" selectors=\"a,h\"/><Not name=\"n\" selector=\"x\"/><Neighborhood name=\"nb\" resnums=\"8\" distance=\"4\"/></R>",
        )
        .unwrap();
        let defs = xml.root_element().children().filter(|c| c.is_element()).map(|c| (c.attribute("name").unwrap().to_string(), c)).collect();
        let env = SelectorEnv { defs, fold: &f, sequence: &seq };
        let on = |m: Vec<bool>| m.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i + 1).collect::<Vec<_>>();
        assert_eq!(on(env.named("x", 0).unwrap()), vec![2, 3, 4]);
        assert_eq!(on(env.named("n", 0).unwrap()).len(), 12);
        assert_eq!(on(env.named("nb", 0).unwrap()), vec![7, 8, 9]);
        assert!(env.named("missing", 0).is_err());
    }
}
