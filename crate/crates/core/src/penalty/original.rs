//! The native RosettaScripts penalty syntax and its piecewise evaluation.

use serde::{Deserialize, Serialize};

use super::block::{split_blocks, RawBlock};
use super::{check_kind, fmt_num, Curve, Occupancy, OccupancyKind, PenaltyError, PenaltyFunction, TOLERANCE};
use crate::residue::ResidueTypeSet;

/// Which residues a block counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Types(ResidueTypeSet),
    Properties(Vec<String>),
}

/// Where the tabulated penalty range sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Absolute { absolute: i64, delta_start: i64, delta_end: i64 },
    Fraction { fraction: f64, fract_delta_start: f64, fract_delta_end: f64 },
}

impl Anchor {
    pub fn kind(&self) -> OccupancyKind {
        match self {
            Anchor::Absolute { .. } => OccupancyKind::Count,
            Anchor::Fraction { .. } => OccupancyKind::Fraction,
        }
    }

    /// Occupancy range covered by the PENALTIES table.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Anchor::Absolute { absolute, delta_start, delta_end } => {
                ((absolute + delta_start) as f64, (absolute + delta_end) as f64)
            }
            Anchor::Fraction { fraction, fract_delta_start, fract_delta_end } => {
                (fraction + fract_delta_start, fraction + fract_delta_end)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalPenalty {
    pub selector: Selector,
    pub anchor: Anchor,
    pub penalties: Vec<f64>,
    pub before_fn: Curve,
    pub after_fn: Curve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

const KEYS: [&str; 11] = [
    "TYPE",
    "PROPERTIES",
    "ABSOLUTE",
    "DELTA_START",
    "DELTA_END",
    "FRACTION",
    "FRACT_DELTA_START",
    "FRACT_DELTA_END",
    "PENALTIES",
    "BEFORE_FUNCTION",
    "AFTER_FUNCTION",
];

impl OriginalPenalty {
    /// Knot positions for the PENALTIES table.
    pub fn knots(&self) -> Vec<f64> {
        let n = self.penalties.len();
        let (lo, hi) = self.anchor.range();
        match self.anchor {
            Anchor::Absolute { .. } => (0..n).map(|i| lo + i as f64).collect(),
            Anchor::Fraction { .. } if n == 1 => vec![lo],
            Anchor::Fraction { .. } => {
                let h = (hi - lo) / (n - 1) as f64;
                (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * h }).collect()
            }
        }
    }

    fn eval_at(&self, x: f64) -> f64 {
        let p = &self.penalties;
        let n = p.len();
        let (lo, hi) = self.anchor.range();
        let eps = match self.anchor.kind() {
            OccupancyKind::Count => 0.0,
            OccupancyKind::Fraction => TOLERANCE,
        };
        if n == 1 {
            return p[0];
        }
        let xs = self.knots();
        let h = xs[1] - xs[0];
        if x < lo - eps {
            return match self.before_fn {
                Curve::Constant => p[0],
                Curve::Linear => p[0] + (p[1] - p[0]) / h * (x - xs[0]),
                Curve::Quadratic => p[1] + (p[0] - p[1]) / (h * h) * (x - xs[1]).powi(2),
            };
        }
        if x > hi + eps {
            let (a, b) = (n - 2, n - 1);
            return match self.after_fn {
                Curve::Constant => p[b],
                Curve::Linear => p[b] + (p[b] - p[a]) / h * (x - xs[b]),
                Curve::Quadratic => p[a] + (p[b] - p[a]) / (h * h) * (x - xs[a]).powi(2),
            };
        }
        let t = ((x - lo) / h).max(0.0);
        let i = (t.floor() as usize).min(n - 2);
        let frac = ((x - xs[i]) / h).clamp(0.0, 1.0);
        if frac == 0.0 {
            p[i]
        } else if frac == 1.0 {
            p[i + 1]
        } else {
            p[i] + (p[i + 1] - p[i]) * frac
        }
    }

    fn check_shape(&self, line: usize) -> Result<(), PenaltyError> {
        let (lo, hi) = self.anchor.range();
        if lo > hi {
            return Err(PenaltyError::InvalidRange { line, start: lo, end: hi });
        }
        let got = self.penalties.len();
        if let Anchor::Absolute { delta_start, delta_end, .. } = self.anchor {
            let expected = (delta_end - delta_start + 1) as usize;
            if got != expected {
                return Err(PenaltyError::PenaltiesLengthMismatch { line, expected, got });
            }
        }
        if got == 0 {
            return Err(PenaltyError::PenaltiesLengthMismatch { line, expected: 1, got });
        }
        if got == 1 && (self.before_fn != Curve::Constant || self.after_fn != Curve::Constant) {
            return Err(PenaltyError::PenaltiesLengthMismatch { line, expected: 2, got });
        }
        if let Anchor::Fraction { .. } = self.anchor {
            if got > 1 && (hi - lo) <= 0.0 {
                return Err(PenaltyError::InvalidRange { line, start: lo, end: hi });
            }
        }
        Ok(())
    }

    /// Checks the range and PENALTIES-length invariants.
    pub fn validate(&self) -> Result<(), PenaltyError> {
        self.check_shape(0)
    }
}

impl PenaltyFunction for OriginalPenalty {
    fn occupancy_kind(&self) -> OccupancyKind {
        self.anchor.kind()
    }

    fn energy(&self, occupancy: Occupancy) -> Result<f64, PenaltyError> {
        check_kind(self.anchor.kind(), occupancy)?;
        if let Selector::Properties(_) = self.selector {
            return Err(PenaltyError::UnsupportedSelector);
        }
        Ok(self.eval_at(occupancy.value()))
    }
}

fn from_block(block: &RawBlock) -> Result<OriginalPenalty, PenaltyError> {
    block.check_keys(&KEYS)?;
    let selector = match (block.take("TYPE")?, block.take("PROPERTIES")?) {
        (Some(t), None) => Selector::Types(t.residue_types()?),
        (None, Some(p)) => Selector::Properties(p.words()?),
        (Some(_), Some(p)) => return Err(p.invalid("TYPE and PROPERTIES cannot both be given")),
        (None, None) => return Err(PenaltyError::MissingField { line: block.line, field: "TYPE".into() }),
    };

    let has = |k: &str| block.fields.iter().any(|f| f.key == k);
    let absolute_family = ["ABSOLUTE", "DELTA_START", "DELTA_END"].iter().any(|k| has(k));
    let fraction_family = ["FRACTION", "FRACT_DELTA_START", "FRACT_DELTA_END"].iter().any(|k| has(k));
    let anchor = match (absolute_family, fraction_family) {
        (true, true) => return Err(PenaltyError::MixedAnchor { line: block.line }),
        (false, false) => return Err(PenaltyError::MissingField { line: block.line, field: "ABSOLUTE".into() }),
        (true, false) => {
            let abs_field = block.require("ABSOLUTE")?;
            let absolute = abs_field.integer()?;
            if absolute < 0 {
                return Err(abs_field.invalid("must be non-negative"));
            }
            Anchor::Absolute {
                absolute,
                delta_start: block.require("DELTA_START")?.integer()?,
                delta_end: block.require("DELTA_END")?.integer()?,
            }
        }
        (false, true) => {
            let frac_field = block.require("FRACTION")?;
            let fraction = frac_field.number()?;
            if !(0.0..=1.0).contains(&fraction) {
                return Err(frac_field.invalid("must lie in [0, 1]"));
            }
            Anchor::Fraction {
                fraction,
                fract_delta_start: block.require("FRACT_DELTA_START")?.number()?,
                fract_delta_end: block.require("FRACT_DELTA_END")?.number()?,
            }
        }
    };

    let penalties = block.require("PENALTIES")?.numbers()?;
    let before_fn = match block.take("BEFORE_FUNCTION")? {
        Some(f) => f.curve()?,
        None => Curve::Quadratic,
    };
    let after_fn = match block.take("AFTER_FUNCTION")? {
        Some(f) => f.curve()?,
        None => Curve::Quadratic,
    };
    let p = OriginalPenalty { selector, anchor, penalties, before_fn, after_fn, comment: block.comment.clone() };
    let line = block.take("PENALTIES")?.map_or(block.line, |f| f.line);
    p.check_shape(line)?;
    Ok(p)
}

/// Parses zero or more native blocks in source order.
pub fn parse_original(text: &str) -> Result<Vec<OriginalPenalty>, PenaltyError> {
    split_blocks(text)?.iter().map(from_block).collect()
}

/// Canonical text for one native block.
pub fn emit_original(p: &OriginalPenalty) -> String {
    let mut out = String::new();
    if let Some(c) = &p.comment {
        for line in c.lines() {
            out.push_str(&format!("# {line}\n"));
        }
    }
    out.push_str("PENALTY_DEFINITION\n");
    match &p.selector {
        Selector::Types(t) => out.push_str(&format!("TYPE {}\n", t.to_three_letter())),
        Selector::Properties(ps) => out.push_str(&format!("PROPERTIES {}\n", ps.join(" "))),
    }
    match p.anchor {
        Anchor::Absolute { absolute, delta_start, delta_end } => {
            out.push_str(&format!("ABSOLUTE {absolute}\nDELTA_START {delta_start}\nDELTA_END {delta_end}\n"));
        }
        Anchor::Fraction { fraction, fract_delta_start, fract_delta_end } => {
            out.push_str(&format!(
                "FRACTION {}\nFRACT_DELTA_START {}\nFRACT_DELTA_END {}\n",
                fmt_num(fraction),
                fmt_num(fract_delta_start),
                fmt_num(fract_delta_end)
            ));
        }
    }
    out.push_str(&format!("BEFORE_FUNCTION {}\n", p.before_fn.keyword()));
    out.push_str(&format!("AFTER_FUNCTION {}\n", p.after_fn.keyword()));
    let pens: Vec<String> = p.penalties.iter().map(|&x| fmt_num(x)).collect();
    out.push_str(&format!("PENALTIES {}\n", pens.join(" ")));
    out.push_str("END_PENALTY_DEFINITION\n");
    out
}

/// Emits several blocks separated by blank lines, as in a `.comp` file.
pub fn emit_original_all(blocks: &[OriginalPenalty]) -> String {
    blocks.iter().map(emit_original).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MET_BLOCK: &str = "PENALTY_DEFINITION
TYPE MET
ABSOLUTE 1
DELTA_START -1
DELTA_END 1
BEFORE_FUNCTION CONSTANT
AFTER_FUNCTION QUADRATIC
PENALTIES 0 0 25
END_PENALTY_DEFINITION
";

    const ALA_FRACTION: &str = "PENALTY_DEFINITION
TYPE ALA
FRACTION 0.10
FRACT_DELTA_START -0.05
FRACT_DELTA_END 0.05
BEFORE_FUNCTION CONSTANT
AFTER_FUNCTION QUADRATIC
PENALTIES 0 0 25
END_PENALTY_DEFINITION
";

    fn count(c: u64) -> Occupancy {
        Occupancy::Count(c)
    }

    #[test]
    fn met_block_parses_and_evaluates() {
        let p = parse_original(MET_BLOCK).unwrap().remove(0);
        assert_eq!(p.penalties, vec![0.0, 0.0, 25.0]);
        assert_eq!(p.anchor, Anchor::Absolute { absolute: 1, delta_start: -1, delta_end: 1 });
        assert_eq!(p.energy(count(0)).unwrap(), 0.0);
        assert_eq!(p.energy(count(1)).unwrap(), 0.0);
        assert_eq!(p.energy(count(2)).unwrap(), 25.0);
        assert_eq!(p.energy(count(3)).unwrap(), 100.0);
    }

    #[test]
    fn met_block_emits_verbatim() {
        let p = parse_original(MET_BLOCK).unwrap().remove(0);
        assert_eq!(emit_original(&p), MET_BLOCK);
    }

    #[test]
    fn fraction_block_has_three_knots() {
        let p = parse_original(ALA_FRACTION).unwrap().remove(0);
        let knots = p.knots();
        assert_eq!(knots.len(), 3);
        assert!((knots[0] - 0.05).abs() < 1e-12 && (knots[2] - 0.15).abs() < 1e-12);
        assert!(p.energy(Occupancy::Fraction(0.10)).unwrap().abs() < 1e-9);
        assert!((p.energy(Occupancy::Fraction(0.125)).unwrap() - 12.5).abs() < 1e-9);
        assert!((p.energy(Occupancy::Fraction(0.20)).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(emit_original(&p), ALA_FRACTION.replace("0.10", "0.1"));
    }

    #[test]
    fn length_and_anchor_errors() {
        let short = MET_BLOCK.replace("PENALTIES 0 0 25", "PENALTIES 0 25");
        assert_eq!(
            parse_original(&short),
            Err(PenaltyError::PenaltiesLengthMismatch { line: 8, expected: 3, got: 2 })
        );
        let mixed = MET_BLOCK.replace("ABSOLUTE 1", "ABSOLUTE 1\nFRACTION 0.1");
        assert_eq!(parse_original(&mixed), Err(PenaltyError::MixedAnchor { line: 1 }));
        let missing = MET_BLOCK.replace("PENALTIES 0 0 25\n", "");
        assert_eq!(
            parse_original(&missing),
            Err(PenaltyError::MissingField { line: 1, field: "PENALTIES".into() })
        );
        let unknown = MET_BLOCK.replace("TYPE MET", "NOT_TYPE MET");
        assert!(matches!(parse_original(&unknown), Err(PenaltyError::UnknownKeyword { line: 2, .. })));
        let reversed = MET_BLOCK.replace("DELTA_START -1", "DELTA_START 2");
        assert!(matches!(parse_original(&reversed), Err(PenaltyError::InvalidRange { .. })));
        let single = "PENALTY_DEFINITION\nTYPE A\nABSOLUTE 2\nDELTA_START 0\nDELTA_END 0\nPENALTIES 3\nAFTER_FUNCTION LINEAR\nBEFORE_FUNCTION CONSTANT\nEND_PENALTY_DEFINITION";
        assert!(matches!(parse_original(single), Err(PenaltyError::PenaltiesLengthMismatch { expected: 2, got: 1, .. })));
        let single_ok = single.replace("AFTER_FUNCTION LINEAR", "AFTER_FUNCTION CONSTANT");
        let p = parse_original(&single_ok).unwrap().remove(0);
        assert_eq!(p.energy(count(9)).unwrap(), 3.0);
    }

    #[test]
    fn properties_parse_but_do_not_evaluate() {
        let text = ALA_FRACTION.replace("TYPE ALA", "PROPERTIES AROMATIC");
        let p = parse_original(&text).unwrap().remove(0);
        assert_eq!(p.selector, Selector::Properties(vec!["AROMATIC".into()]));
        assert_eq!(p.energy(Occupancy::Fraction(0.1)), Err(PenaltyError::UnsupportedSelector));
        assert_eq!(parse_original(&emit_original(&p)).unwrap(), vec![p]);
    }

    #[test]
    fn defaults_are_quadratic() {
        let text = "PENALTY_DEFINITION\nTYPE P\nABSOLUTE 5\nDELTA_START 0\nDELTA_END 1\nPENALTIES 0 10\nAFTER_FUNCTION LINEAR\nEND_PENALTY_DEFINITION";
        let p = parse_original(text).unwrap().remove(0);
        assert_eq!(p.before_fn, Curve::Quadratic);
        // Vertex at the edge-adjacent knot (count 6, value 10) opening downward.
        assert_eq!(p.energy(count(4)).unwrap(), 10.0 - 10.0 * 4.0);
        assert_eq!(p.energy(count(7)).unwrap(), 20.0);
    }

    #[test]
    fn linear_extrapolation_both_sides() {
        let text = "PENALTY_DEFINITION\nTYPE P\nABSOLUTE 5\nDELTA_START -1\nDELTA_END 1\nPENALTIES 4 0 2\nBEFORE_FUNCTION LINEAR\nAFTER_FUNCTION LINEAR\nEND_PENALTY_DEFINITION";
        let p = parse_original(text).unwrap().remove(0);
        assert_eq!(p.energy(count(2)).unwrap(), 12.0);
        assert_eq!(p.energy(count(8)).unwrap(), 6.0);
    }
}
