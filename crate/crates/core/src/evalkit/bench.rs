//! Penalty-generation benchmark: prompts, reference functions, and grading.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::action::{reasoning_formatting, strip_reasoning};
use crate::agent::{fill_template, ChatTurn, LlmClient, LlmError, ModelProfile, Role};
use crate::penalty::{
    parse_original, parse_simplified, verify_equivalence, Curve, Domain, Occupancy, OccupancyKind, PenaltyError,
    PenaltyFunction, Selector,
};
use crate::residue::{ResidueCode, ResidueTypeSet};

const PROMPTS: &str = include_str!("../../data/penalty_bench_prompts.json");
const SYSTEM_SIMPLIFIED: &str = include_str!("../../prompts/bench_system_simplified.txt");
const SYSTEM_ORIGINAL: &str = include_str!("../../prompts/bench_system_original.txt");

/// Largest count compared when grading.
pub const GRADE_MAX_COUNT: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptShape {
    MoreThan,
    LessThan,
    OutsideRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Syntax {
    Simplified,
    Original,
}

impl Syntax {
    pub fn as_str(&self) -> &'static str {
        match self {
            Syntax::Simplified => "simplified",
            Syntax::Original => "original",
        }
    }
}

impl std::str::FromStr for Syntax {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simplified" => Ok(Syntax::Simplified),
            "original" => Ok(Syntax::Original),
            other => Err(format!("unknown syntax `{other}` (expected simplified or original)")),
        }
    }
}

/// One benchmark prompt with its parsed ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBenchPrompt {
    pub id: String,
    pub text: String,
    /// Three-letter code of the counted residue.
    pub residue: String,
    pub shape: PromptShape,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub boundary: Curve,
    pub slope: f64,
}

/// The nine shipped prompts, three per shape family.
pub fn bench_prompts() -> Vec<PenaltyBenchPrompt> {
    serde_json::from_str(PROMPTS).expect("shipped prompt file parses")
}

/// Penalty implied by a prompt: `slope` per residue outside `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePenalty {
    pub types: ResidueTypeSet,
    pub lower: f64,
    pub upper: f64,
    pub slope: f64,
}

impl PenaltyFunction for ReferencePenalty {
    fn occupancy_kind(&self) -> OccupancyKind {
        OccupancyKind::Count
    }

    fn energy(&self, occupancy: Occupancy) -> Result<f64, PenaltyError> {
        match occupancy {
            Occupancy::Count(c) => {
                let c = c as f64;
                Ok(self.slope * ((self.lower - c).max(0.0) + (c - self.upper).max(0.0)))
            }
            other => Err(PenaltyError::KindMismatch { expected: OccupancyKind::Count, got: other.kind() }),
        }
    }
}

pub fn reference_penalty_for_prompt(p: &PenaltyBenchPrompt) -> Result<ReferencePenalty, EvalError> {
    let unsupported = |why: &str| EvalError::UnsupportedPromptShape(format!("{}: {why}", p.id));
    if p.boundary != Curve::Linear {
        return Err(unsupported("only linear boundaries are graded"));
    }
    if !(p.slope > 0.0 && p.slope.is_finite()) {
        return Err(unsupported("slope must be positive"));
    }
    let code = ResidueCode::resolve(&p.residue).ok_or_else(|| unsupported("unknown residue"))?;
    let (lower, upper) = match (p.shape, p.lower, p.upper) {
        (PromptShape::MoreThan, None, Some(u)) => (f64::NEG_INFINITY, u),
        (PromptShape::LessThan, Some(l), None) => (l, f64::INFINITY),
        (PromptShape::OutsideRange, Some(l), Some(u)) if l <= u => (l, u),
        _ => return Err(unsupported("bounds do not match the shape")),
    };
    Ok(ReferencePenalty { types: ResidueTypeSet::single(code), lower, upper, slope: p.slope })
}

fn residue_from_word(word: &str) -> Option<&'static str> {
    let w = word.trim_end_matches('s');
    Some(match w {
        "proline" => "PRO",
        "lysine" => "LYS",
        "glycine" => "GLY",
        "alanine" => "ALA",
        "leucine" => "LEU",
        "serine" => "SER",
        "glutamate" => "GLU",
        "aspartate" => "ASP",
        _ => return None,
    })
}

fn number(s: &str) -> Option<f64> {
    s.trim_end_matches(['.', ',']).parse().ok()
}

/// Recovers the ground truth from a prompt written in the benchmark's style.
pub fn parse_prompt(id: &str, text: &str) -> Result<PenaltyBenchPrompt, EvalError> {
    let bad = || EvalError::UnsupportedPromptShape(format!("{id}: cannot read `{text}`"));
    let words: Vec<&str> = text.split_whitespace().collect();
    let at = |needle: &[&str]| words.windows(needle.len()).position(|w| w == needle);
    let (shape, lower, upper, residue) = if let Some(i) = at(&["penalizes", "more", "than"]) {
        let n = words.get(i + 3).and_then(|w| number(w)).ok_or_else(bad)?;
        let r = words.get(i + 4).and_then(|w| residue_from_word(w.trim_end_matches('.'))).ok_or_else(bad)?;
        (PromptShape::MoreThan, None, Some(n), r)
    } else if let Some(i) = at(&["penalizes", "less", "than"]) {
        let n = words.get(i + 3).and_then(|w| number(w)).ok_or_else(bad)?;
        let r = words.get(i + 4).and_then(|w| residue_from_word(w.trim_end_matches('.'))).ok_or_else(bad)?;
        (PromptShape::LessThan, Some(n), None, r)
    } else if let Some(i) = at(&["content", "outside", "the", "range", "of"]) {
        let r = i.checked_sub(1).and_then(|j| residue_from_word(words[j])).ok_or_else(bad)?;
        let lo = words.get(i + 5).and_then(|w| number(w)).ok_or_else(bad)?;
        if words.get(i + 6) != Some(&"to") {
            return Err(bad());
        }
        let hi = words.get(i + 7).and_then(|w| number(w)).ok_or_else(bad)?;
        (PromptShape::OutsideRange, Some(lo), Some(hi), r)
    } else {
        return Err(bad());
    };
    let b = at(&["boundary", "with", "slope", "of"]).ok_or_else(bad)?;
    let boundary = b
        .checked_sub(1)
        .and_then(|j| Curve::from_keyword(&words[j].to_ascii_uppercase()))
        .ok_or_else(bad)?;
    let slope = words.get(b + 4).and_then(|w| number(w)).ok_or_else(bad)?;
    Ok(PenaltyBenchPrompt {
        id: id.into(),
        text: text.into(),
        residue: residue.into(),
        shape,
        lower,
        upper,
        boundary,
        slope,
    })
}

/// Outcome of grading one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    /// Parsed under the requested syntax into exactly one block.
    pub syntactic: bool,
    /// Same residues and same energy at every graded count.
    pub semantic: bool,
    pub detail: Option<String>,
}

impl Grade {
    pub fn success(&self) -> bool {
        self.syntactic && self.semantic
    }

    fn syntax_error(msg: String) -> Self {
        Grade { syntactic: false, semantic: false, detail: Some(msg) }
    }

    fn wrong(msg: String) -> Self {
        Grade { syntactic: true, semantic: false, detail: Some(msg) }
    }
}

/// The text inside `<response></response>`, or the whole reply without it.
pub fn extract_response(text: &str, delimiters: &[(String, String)]) -> String {
    let visible = strip_reasoning(text, delimiters);
    match (visible.find("<response>"), visible.rfind("</response>")) {
        (Some(a), Some(b)) if a + "<response>".len() <= b => visible[a + "<response>".len()..b].trim().to_string(),
        _ => visible.trim().to_string(),
    }
}

fn same_residues(a: &ResidueTypeSet, b: &ResidueTypeSet) -> bool {
    a.codes().iter().collect::<BTreeSet<_>>() == b.codes().iter().collect::<BTreeSet<_>>()
}

fn compare(reference: &ReferencePenalty, types: &ResidueTypeSet, block: &dyn PenaltyFunction) -> Grade {
    if !same_residues(&reference.types, types) {
        return Grade::wrong(format!("counts {} instead of {}", types.to_three_letter(), reference.types.to_three_letter()));
    }
    match verify_equivalence(reference, block, &Domain::counts(GRADE_MAX_COUNT)) {
        Ok(r) if r.equivalent => Grade { syntactic: true, semantic: true, detail: None },
        Ok(r) => {
            let d = r.first_divergence.expect("inequivalent reports carry a divergence");
            Grade::wrong(format!("at {} expected {} got {}", d.occupancy.value(), d.expected, d.got))
        }
        Err(e) => Grade::wrong(e.to_string()),
    }
}

/// Grades a model reply against the prompt's reference function.
pub fn grade_generation(prompt: &PenaltyBenchPrompt, reply: &str, syntax: Syntax, delimiters: &[(String, String)]) -> Result<Grade, EvalError> {
    let reference = reference_penalty_for_prompt(prompt)?;
    let body = extract_response(reply, delimiters);
    let one = |n: usize| format!("expected exactly one penalty block, found {n}");
    Ok(match syntax {
        Syntax::Simplified => match parse_simplified(&body) {
            Err(e) => Grade::syntax_error(e.to_string()),
            Ok(blocks) if blocks.len() != 1 => Grade::syntax_error(one(blocks.len())),
            Ok(blocks) => compare(&reference, &blocks[0].types, &blocks[0]),
        },
        Syntax::Original => match parse_original(&body) {
            Err(e) => Grade::syntax_error(e.to_string()),
            Ok(blocks) if blocks.len() != 1 => Grade::syntax_error(one(blocks.len())),
            Ok(blocks) => match &blocks[0].selector {
                Selector::Types(t) => compare(&reference, t, &blocks[0]),
                Selector::Properties(_) => Grade::wrong("selects residues by property".into()),
            },
        },
    })
}

/// System prompt for generating blocks in `syntax`.
pub fn bench_system_prompt(syntax: Syntax, profile: &ModelProfile) -> String {
    let template = match syntax {
        Syntax::Simplified => SYSTEM_SIMPLIFIED,
        Syntax::Original => SYSTEM_ORIGINAL,
    };
    // Only the reasoning slot is filled; other braces are left as written.
    let text = fill_template(template, |k| match k {
        "reasoning_formatting" => Some(reasoning_formatting(profile.reasoning.delimiters())),
        _ => Some(format!("{{{k}}}")),
    })
    .expect("every slot resolves");
    text.trim_end().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub prompt_id: String,
    pub index: usize,
    pub grade: Grade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRow {
    pub prompt_id: String,
    pub generations: usize,
    pub syntactic: usize,
    pub successes: usize,
}

impl PromptRow {
    pub fn rate(&self) -> f64 {
        if self.generations == 0 {
            0.0
        } else {
            self.successes as f64 / self.generations as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub model: String,
    pub syntax: Syntax,
    pub rows: Vec<PromptRow>,
    pub generations: Vec<GenerationResult>,
}

impl BenchTable {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.generations).sum()
    }

    pub fn successes(&self) -> usize {
        self.rows.iter().map(|r| r.successes).sum()
    }

    pub fn success_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.successes() as f64 / self.total() as f64
        }
    }
}

/// Asks the model `n_per_prompt` times per prompt and grades every reply.
/// Replies are requested prompt by prompt, in order.
pub fn run_penalty_bench(
    prompts: &[PenaltyBenchPrompt],
    client: &dyn LlmClient,
    profile: &ModelProfile,
    syntax: Syntax,
    n_per_prompt: usize,
) -> Result<BenchTable, BenchError> {
    let system = ChatTurn::new(Role::System, bench_system_prompt(syntax, profile));
    let delims = profile.delimiter_pairs();
    let mut rows = Vec::new();
    let mut generations = Vec::new();
    for p in prompts {
        reference_penalty_for_prompt(p)?;
        let messages = [system.clone(), ChatTurn::new(Role::User, p.text.clone())];
        let mut row = PromptRow { prompt_id: p.id.clone(), generations: 0, syntactic: 0, successes: 0 };
        for index in 0..n_per_prompt {
            let reply = client.complete(&messages, profile)?;
            let grade = grade_generation(p, &reply.text, syntax, &delims)?;
            row.generations += 1;
            row.syntactic += grade.syntactic as usize;
            row.successes += grade.success() as usize;
            generations.push(GenerationResult { prompt_id: p.id.clone(), index, grade });
        }
        rows.push(row);
    }
    Ok(BenchTable { model: profile.model.clone(), syntax, rows, generations })
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ReasoningMode;

    fn prompt(id: &str) -> PenaltyBenchPrompt {
        bench_prompts().into_iter().find(|p| p.id == id).unwrap()
    }

    #[test]
    fn reference_values() {
        let more = reference_penalty_for_prompt(&prompt("above_pro_5")).unwrap();
        assert_eq!(more.energy(Occupancy::Count(5)).unwrap(), 0.0);
        assert_eq!(more.energy(Occupancy::Count(8)).unwrap(), 30.0);
        let less = reference_penalty_for_prompt(&prompt("below_gly_20")).unwrap();
        assert_eq!(less.energy(Occupancy::Count(18)).unwrap(), 60.0);
        let range = reference_penalty_for_prompt(&prompt("outside_pro_4_10")).unwrap();
        assert_eq!(range.energy(Occupancy::Count(10)).unwrap(), 0.0);
        assert_eq!(range.energy(Occupancy::Count(2)).unwrap(), 20.0);
    }

    #[test]
    fn shipped_fields_match_the_prompt_text() {
        let prompts = bench_prompts();
        assert_eq!(prompts.len(), 9);
        for p in prompts {
            assert_eq!(parse_prompt(&p.id, &p.text).unwrap(), p);
        }
    }

    #[test]
    fn unsupported_shapes() {
        let mut p = prompt("above_pro_5");
        p.boundary = Curve::Quadratic;
        assert!(matches!(reference_penalty_for_prompt(&p), Err(EvalError::UnsupportedPromptShape(_))));
        let mut p = prompt("above_pro_5");
        p.lower = Some(1.0);
        assert!(reference_penalty_for_prompt(&p).is_err());
        assert!(parse_prompt("x", "Write a haiku about prolines.").is_err());
    }

    #[test]
    fn response_tags_and_reasoning_are_removed() {
        let d = vec![("<think>".to_string(), "</think>".to_string())];
        let reply = "<think>maybe <response>no</response></think>Sure.\n<response>\nBODY\n</response>";
        assert_eq!(extract_response(reply, &d), "BODY");
        assert_eq!(extract_response("  BODY \n", &[]), "BODY");
    }

    #[test]
    fn system_prompt_keeps_sample_braces() {
        let p = bench_system_prompt(Syntax::Original, &ModelProfile::replay(ReasoningMode::delimited("<think>", "</think>")));
        assert!(p.contains("inside <think></think> tags"));
        assert!(!p.contains("{reasoning_formatting}"));
        assert!(p.ends_with("Do not include any extra text or comments in your final response."));
    }
}
