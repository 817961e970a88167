//! Amino-acid composition penalty blocks.
//!
//! Two surface syntaxes share one evaluation model: the simplified
//! `SHAPE`/`TARGET`/`BOUNDARY` form written by agents, and the native
//! `PENALTIES`/`BEFORE_FUNCTION`/`AFTER_FUNCTION` form consumed by Rosetta.
//! [`compile_penalty`] lowers the first into the second and
//! [`verify_equivalence`] checks the result pointwise.

mod block;
mod compile;
mod original;
mod simplified;
mod verify;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use block::{split_blocks, RawBlock, RawField};
pub use compile::{compile_penalty, FRACTION_STEP};
pub use original::{emit_original, emit_original_all, parse_original, Anchor, OriginalPenalty, Selector};
pub use simplified::{emit_simplified, parse_simplified, SimplifiedPenalty};
pub use verify::{verify_equivalence, Divergence, Domain, EquivalenceReport};

/// Absolute tolerance for equivalence checks and fractional range tests.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupancyKind {
    Count,
    Fraction,
}

impl fmt::Display for OccupancyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OccupancyKind::Count => "count",
            OccupancyKind::Fraction => "fraction",
        })
    }
}

/// How many residues of a type a sequence contains, as a count or a ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupancy {
    Count(u64),
    Fraction(f64),
}

impl Occupancy {
    pub fn kind(&self) -> OccupancyKind {
        match self {
            Occupancy::Count(_) => OccupancyKind::Count,
            Occupancy::Fraction(_) => OccupancyKind::Fraction,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Occupancy::Count(c) => c as f64,
            Occupancy::Fraction(f) => f,
        }
    }
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Occupancy::Count(c) => write!(f, "{c}"),
            Occupancy::Fraction(x) => write!(f, "{x}"),
        }
    }
}

/// Which side(s) of the target are penalized in the simplified syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Shape {
    Outside,
    Above,
    Below,
}

impl Shape {
    pub fn keyword(&self) -> &'static str {
        match self {
            Shape::Outside => "OUTSIDE",
            Shape::Above => "ABOVE",
            Shape::Below => "BELOW",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "OUTSIDE" => Some(Shape::Outside),
            "ABOVE" => Some(Shape::Above),
            "BELOW" => Some(Shape::Below),
            _ => None,
        }
    }
}

/// Growth law of a penalty outside its acceptable range. Serves both as the
/// simplified `BOUNDARY` and the native `BEFORE_FUNCTION`/`AFTER_FUNCTION`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Curve {
    Constant,
    Linear,
    Quadratic,
}

impl Curve {
    pub const ALL: [Curve; 3] = [Curve::Constant, Curve::Linear, Curve::Quadratic];

    pub fn keyword(&self) -> &'static str {
        match self {
            Curve::Constant => "CONSTANT",
            Curve::Linear => "LINEAR",
            Curve::Quadratic => "QUADRATIC",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "CONSTANT" => Some(Curve::Constant),
            "LINEAR" => Some(Curve::Linear),
            "QUADRATIC" => Some(Curve::Quadratic),
            _ => None,
        }
    }

    /// Penalty at distance `d > 0` past a range edge for a block of strength `s`.
    pub fn grow(&self, s: f64, d: f64) -> f64 {
        match self {
            Curve::Constant => s,
            Curve::Linear => s * d,
            Curve::Quadratic => s * d * d,
        }
    }
}

/// Errors from parsing, evaluating, or compiling penalty blocks.
///
/// Parse errors carry 1-based line and column positions so they can be
/// quoted back to the author.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PenaltyError {
    #[error("line {line}, column {column}: unknown keyword '{keyword}'")]
    UnknownKeyword { line: usize, column: usize, keyword: String },
    #[error("line {line}: block is missing the {field} field")]
    MissingField { line: usize, field: String },
    #[error("line {line}, column {column}: invalid SHAPE '{value}' (expected OUTSIDE, ABOVE, or BELOW)")]
    InvalidShape { line: usize, column: usize, value: String },
    #[error("line {line}, column {column}: invalid function '{value}' (expected CONSTANT, LINEAR, or QUADRATIC)")]
    InvalidBoundary { line: usize, column: usize, value: String },
    #[error("line {line}, column {column}: {field} expects a number, found '{value}'")]
    NonNumericValue { line: usize, column: usize, field: String, value: String },
    #[error("line {line}, column {column}: unknown residue code '{code}'")]
    UnknownResidueCode { line: usize, column: usize, code: String },
    #[error("line {line}, column {column}: {field} appears more than once")]
    DuplicateField { line: usize, column: usize, field: String },
    #[error("line {line}, column {column}: invalid {field}: {reason}")]
    InvalidValue { line: usize, column: usize, field: String, reason: String },
    #[error("line {line}: block mixes ABSOLUTE/DELTA and FRACTION/FRACT_DELTA fields")]
    MixedAnchor { line: usize },
    #[error("line {line}: PENALTIES has {got} values, expected {expected}")]
    PenaltiesLengthMismatch { line: usize, expected: usize, got: usize },
    #[error("line {line}: range start {start} is greater than range end {end}")]
    InvalidRange { line: usize, start: f64, end: f64 },
    #[error("line {line}: PENALTY_DEFINITION without matching END_PENALTY_DEFINITION")]
    UnterminatedBlock { line: usize },
    #[error("line {line}, column {column}: unexpected content '{text}'")]
    UnexpectedContent { line: usize, column: usize, text: String },
    #[error("occupancy kind mismatch: block uses {expected}, got {got}")]
    KindMismatch { expected: OccupancyKind, got: OccupancyKind },
    #[error("target {target} minus radius {radius} is negative")]
    NegativeRange { target: f64, radius: f64 },
    #[error("PROPERTIES selectors cannot be evaluated without a residue database")]
    UnsupportedSelector,
}

/// Anything that maps an occupancy to a penalty energy.
pub trait PenaltyFunction {
    fn occupancy_kind(&self) -> OccupancyKind;
    fn energy(&self, occupancy: Occupancy) -> Result<f64, PenaltyError>;
}

/// Evaluates any block at an occupancy.
pub fn eval_penalty<P: PenaltyFunction + ?Sized>(block: &P, occupancy: Occupancy) -> Result<f64, PenaltyError> {
    block.energy(occupancy)
}

fn check_kind(expected: OccupancyKind, occ: Occupancy) -> Result<(), PenaltyError> {
    if occ.kind() == expected {
        Ok(())
    } else {
        Err(PenaltyError::KindMismatch { expected, got: occ.kind() })
    }
}

/// Formats a number with the shortest text that parses back to the same value.
pub(crate) fn fmt_num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_growth_laws() {
        assert_eq!(Curve::Constant.grow(10.0, 3.0), 10.0);
        assert_eq!(Curve::Linear.grow(10.0, 3.0), 30.0);
        assert_eq!(Curve::Quadratic.grow(10.0, 3.0), 90.0);
    }

    #[test]
    fn number_printing_is_minimal() {
        assert_eq!(fmt_num(10.0), "10");
        assert_eq!(fmt_num(10.5), "10.5");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(-0.05), "-0.05");
    }
}
