use std::process::ExitCode;

use anyhow::{bail, Context};
use rsgym::penalty::{
    compile_penalty, emit_original_all, parse_original, parse_simplified, verify_equivalence, Domain, EquivalenceReport,
    Occupancy, OriginalPenalty, PenaltyFunction, SimplifiedPenalty,
};
use serde::Serialize;

use crate::io::{print_json, read_input, source_name};
use crate::{usage, Format, SyntaxArg};

enum Blocks {
    Simplified(Vec<SimplifiedPenalty>),
    Original(Vec<OriginalPenalty>),
}

impl Blocks {
    fn functions(&self) -> Vec<&dyn PenaltyFunction> {
        match self {
            Blocks::Simplified(v) => v.iter().map(|b| b as &dyn PenaltyFunction).collect(),
            Blocks::Original(v) => v.iter().map(|b| b as &dyn PenaltyFunction).collect(),
        }
    }

    fn syntax(&self) -> &'static str {
        match self {
            Blocks::Simplified(_) => "simplified",
            Blocks::Original(_) => "original",
        }
    }
}

/// Parses `text` in the requested syntax. `Auto` tries simplified first.
fn parse(text: &str, syntax: SyntaxArg, input: &str) -> anyhow::Result<Blocks> {
    let source = source_name(input);
    let blocks = match syntax {
        SyntaxArg::Simplified => Blocks::Simplified(parse_simplified(text).with_context(|| source.clone())?),
        SyntaxArg::Original => Blocks::Original(parse_original(text).with_context(|| source.clone())?),
        SyntaxArg::Auto => match parse_simplified(text) {
            Ok(v) => Blocks::Simplified(v),
            Err(simplified) => match parse_original(text) {
                Ok(v) => Blocks::Original(v),
                Err(original) => {
                    bail!("{source}: not valid in either syntax\n  simplified: {simplified}\n  original: {original}")
                }
            },
        },
    };
    if blocks.functions().is_empty() {
        bail!("{source}: no penalty blocks");
    }
    Ok(blocks)
}

pub fn compile(input: &str, format: Format) -> anyhow::Result<ExitCode> {
    let blocks = parse_simplified(&read_input(input)?).with_context(|| source_name(input))?;
    let compiled = blocks.iter().map(compile_penalty).collect::<Result<Vec<_>, _>>()?;
    let text = emit_original_all(&compiled);
    match format {
        Format::Text => print!("{text}"),
        Format::Json => print_json(&serde_json::json!({ "blocks": compiled, "text": text })),
    }
    Ok(ExitCode::SUCCESS)
}

fn occupancy(s: &str) -> anyhow::Result<Occupancy> {
    let s = s.trim();
    if s.contains(['.', 'e', 'E']) {
        s.parse::<f64>().map(Occupancy::Fraction).map_err(|_| usage("--at", format!("`{s}` is not a number")))
    } else {
        s.parse::<u64>().map(Occupancy::Count).map_err(|_| usage("--at", format!("`{s}` is not a count")))
    }
}

#[derive(Serialize)]
struct EvalRow {
    block: usize,
    occupancy: Occupancy,
    energy: f64,
}

pub fn eval(input: &str, at: &[String], syntax: SyntaxArg, format: Format) -> anyhow::Result<ExitCode> {
    let points = at.iter().map(|s| occupancy(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let blocks = parse(&read_input(input)?, syntax, input)?;
    let mut rows = Vec::new();
    for (i, f) in blocks.functions().into_iter().enumerate() {
        for &x in &points {
            let energy = f.energy(x).with_context(|| format!("block {} at {x}", i + 1))?;
            rows.push(EvalRow { block: i + 1, occupancy: x, energy });
        }
    }
    match format {
        Format::Text => {
            println!("block\toccupancy\tenergy");
            for r in &rows {
                println!("{}\t{}\t{}", r.block, r.occupancy, r.energy);
            }
        }
        Format::Json => print_json(&rows),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct VerifyRecord {
    expected_syntax: &'static str,
    actual_syntax: &'static str,
    equivalent: bool,
    blocks: Vec<EquivalenceReport>,
}

pub fn verify(expected: &str, actual: Option<&str>, syntax: SyntaxArg, format: Format) -> anyhow::Result<ExitCode> {
    let exp = parse(&read_input(expected)?, syntax, expected)?;
    let act = match actual {
        Some(path) => parse(&read_input(path)?, SyntaxArg::Auto, path)?,
        None => match &exp {
            Blocks::Simplified(v) => Blocks::Original(v.iter().map(compile_penalty).collect::<Result<_, _>>()?),
            Blocks::Original(_) => return Err(usage("ACTUAL", "required when EXPECTED is in the original syntax")),
        },
    };
    let (ef, af) = (exp.functions(), act.functions());
    if ef.len() != af.len() {
        bail!("EXPECTED has {} blocks but ACTUAL has {}", ef.len(), af.len());
    }
    let mut reports = Vec::new();
    for (e, a) in ef.iter().zip(&af) {
        reports.push(verify_equivalence(*e, *a, &Domain::default_for(e.occupancy_kind()))?);
    }
    let equivalent = reports.iter().all(|r| r.equivalent);
    match format {
        Format::Text => {
            for (i, r) in reports.iter().enumerate() {
                match &r.first_divergence {
                    None => println!("block {}: equivalent on {} points", i + 1, r.points_checked),
                    Some(d) => println!(
                        "block {}: NOT equivalent; first divergence at occupancy {}: expected {}, got {}",
                        i + 1,
                        d.occupancy,
                        d.expected,
                        d.got
                    ),
                }
            }
        }
        Format::Json => print_json(&VerifyRecord {
            expected_syntax: exp.syntax(),
            actual_syntax: act.syntax(),
            equivalent,
            blocks: reports,
        }),
    }
    Ok(if equivalent { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
