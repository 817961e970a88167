//! The simplified penalty syntax: a residue set, a shape, a target, and a boundary law.

use serde::{Deserialize, Serialize};

use super::block::{split_blocks, RawBlock};
use super::{check_kind, fmt_num, Curve, Occupancy, OccupancyKind, PenaltyError, PenaltyFunction, Shape, TOLERANCE};
use crate::residue::ResidueTypeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedPenalty {
    pub types: ResidueTypeSet,
    pub shape: Shape,
    pub target: Occupancy,
    pub radius: Occupancy,
    pub boundary: Curve,
    pub strength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

const KEYS: [&str; 6] = ["TYPE", "SHAPE", "TARGET", "RADIUS", "BOUNDARY", "STRENGTH"];

impl SimplifiedPenalty {
    /// Checks the kind, sign, and range invariants.
    pub fn validate(&self) -> Result<(), PenaltyError> {
        if self.target.kind() != self.radius.kind() {
            return Err(PenaltyError::KindMismatch { expected: self.target.kind(), got: self.radius.kind() });
        }
        if !(self.strength > 0.0 && self.strength.is_finite()) {
            return Err(PenaltyError::InvalidValue {
                line: 0,
                column: 0,
                field: "STRENGTH".into(),
                reason: "must be positive".into(),
            });
        }
        let (t, r) = (self.target.value(), self.radius.value());
        if !(t >= 0.0 && r >= 0.0) {
            return Err(PenaltyError::InvalidValue {
                line: 0,
                column: 0,
                field: "TARGET".into(),
                reason: "target and radius must be non-negative".into(),
            });
        }
        if self.target.kind() == OccupancyKind::Fraction && t > 1.0 {
            return Err(PenaltyError::InvalidValue {
                line: 0,
                column: 0,
                field: "TARGET".into(),
                reason: "fraction must lie in [0, 1]".into(),
            });
        }
        if self.shape == Shape::Outside && t - r < -TOLERANCE {
            return Err(PenaltyError::NegativeRange { target: t, radius: r });
        }
        Ok(())
    }

    /// Acceptable range `[lo, hi]`; unbounded sides are infinite.
    pub fn range(&self) -> (f64, f64) {
        let (t, r) = (self.target.value(), self.radius.value());
        match self.shape {
            Shape::Outside => (t - r, t + r),
            Shape::Above => (f64::NEG_INFINITY, t),
            Shape::Below => (t, f64::INFINITY),
        }
    }

    /// Distance past the nearest range edge, zero when inside.
    pub fn distance_outside(&self, x: f64) -> f64 {
        let eps = match self.target.kind() {
            OccupancyKind::Count => 0.0,
            OccupancyKind::Fraction => TOLERANCE,
        };
        let (lo, hi) = self.range();
        if x < lo - eps {
            lo - x
        } else if x > hi + eps {
            x - hi
        } else {
            0.0
        }
    }
}

impl PenaltyFunction for SimplifiedPenalty {
    fn occupancy_kind(&self) -> OccupancyKind {
        self.target.kind()
    }

    fn energy(&self, occupancy: Occupancy) -> Result<f64, PenaltyError> {
        check_kind(self.target.kind(), occupancy)?;
        let d = self.distance_outside(occupancy.value());
        Ok(if d > 0.0 { self.boundary.grow(self.strength, d) } else { 0.0 })
    }
}

fn from_block(block: &RawBlock) -> Result<SimplifiedPenalty, PenaltyError> {
    block.check_keys(&KEYS)?;
    let type_field = block.require("TYPE")?;
    let shape_field = block.require("SHAPE")?;
    let target_field = block.require("TARGET")?;
    let radius_field = block.take("RADIUS")?;
    let boundary_field = block.require("BOUNDARY")?;
    let strength_field = block.require("STRENGTH")?;

    let types = type_field.residue_types()?;
    let shape_tok = shape_field.value.trim();
    let shape = Shape::from_keyword(shape_tok).ok_or_else(|| PenaltyError::InvalidShape {
        line: shape_field.line,
        column: shape_field.value_column,
        value: shape_tok.to_string(),
    })?;
    let boundary = boundary_field.curve()?;

    let target = target_field.number()?;
    let radius = match radius_field {
        Some(f) => f.number()?,
        None if shape == Shape::Outside => {
            return Err(PenaltyError::MissingField { line: block.line, field: "RADIUS".into() })
        }
        None => 0.0,
    };
    if target < 0.0 {
        return Err(target_field.invalid("must be non-negative"));
    }
    if radius < 0.0 {
        return Err(radius_field.expect("radius present when negative").invalid("must be non-negative"));
    }

    let fractional = !target_field.is_integer_literal() || radius_field.is_some_and(|f| !f.is_integer_literal());
    let (target, radius) = if fractional {
        if target > 1.0 {
            return Err(target_field.invalid("a fractional target must lie in [0, 1]"));
        }
        (Occupancy::Fraction(target), Occupancy::Fraction(radius))
    } else {
        (Occupancy::Count(target as u64), Occupancy::Count(radius as u64))
    };

    let strength = strength_field.number()?;
    if strength <= 0.0 {
        return Err(strength_field.invalid("must be positive"));
    }

    let p = SimplifiedPenalty { types, shape, target, radius, boundary, strength, comment: block.comment.clone() };
    if shape == Shape::Outside && p.range().0 < -TOLERANCE {
        return Err(PenaltyError::NegativeRange { target: p.target.value(), radius: p.radius.value() });
    }
    Ok(p)
}

/// Parses zero or more simplified blocks in source order.
pub fn parse_simplified(text: &str) -> Result<Vec<SimplifiedPenalty>, PenaltyError> {
    split_blocks(text)?.iter().map(from_block).collect()
}

fn fmt_occ(o: Occupancy) -> String {
    match o {
        Occupancy::Count(c) => c.to_string(),
        Occupancy::Fraction(f) if f.fract() == 0.0 => format!("{f:.1}"),
        Occupancy::Fraction(f) => fmt_num(f),
    }
}

/// Canonical text for a simplified block.
pub fn emit_simplified(p: &SimplifiedPenalty) -> String {
    let mut out = String::new();
    if let Some(c) = &p.comment {
        for line in c.lines() {
            out.push_str(&format!("# {line}\n"));
        }
    }
    out.push_str("PENALTY_DEFINITION\n");
    out.push_str(&format!("TYPE {}\n", p.types.to_three_letter()));
    out.push_str(&format!("SHAPE {}\n", p.shape.keyword()));
    out.push_str(&format!("TARGET {}\n", fmt_occ(p.target)));
    out.push_str(&format!("RADIUS {}\n", fmt_occ(p.radius)));
    out.push_str(&format!("BOUNDARY {}\n", p.boundary.keyword()));
    out.push_str(&format!("STRENGTH {}\n", fmt_num(p.strength)));
    out.push_str("END_PENALTY_DEFINITION\n");
    out
}
