//! Splits penalty text into raw `PENALTY_DEFINITION` blocks of key/value lines.

use super::{Curve, PenaltyError};
use crate::residue::{ResidueCode, ResidueTypeSet};

const START: &str = "PENALTY_DEFINITION";
const END: &str = "END_PENALTY_DEFINITION";

#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub key: String,
    pub value: String,
    pub line: usize,
    pub column: usize,
    pub value_column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBlock {
    /// Line of the opening `PENALTY_DEFINITION`.
    pub line: usize,
    /// `#` lines directly above the block, markers stripped.
    pub comment: Option<String>,
    pub fields: Vec<RawField>,
}

impl RawBlock {
    /// Returns the unique field with `key`, rejecting repeats.
    pub fn take(&self, key: &str) -> Result<Option<&RawField>, PenaltyError> {
        let mut found = None;
        for f in self.fields.iter().filter(|f| f.key == key) {
            if found.is_some() {
                return Err(PenaltyError::DuplicateField {
                    line: f.line,
                    column: f.column,
                    field: key.to_string(),
                });
            }
            found = Some(f);
        }
        Ok(found)
    }

    pub fn require(&self, key: &str) -> Result<&RawField, PenaltyError> {
        self.take(key)?.ok_or_else(|| PenaltyError::MissingField {
            line: self.line,
            field: key.to_string(),
        })
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), PenaltyError> {
        match self.fields.iter().find(|f| !allowed.contains(&f.key.as_str())) {
            Some(f) => Err(PenaltyError::UnknownKeyword {
                line: f.line,
                column: f.column,
                keyword: f.key.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn column_of(line: &str) -> usize {
    line.len() - line.trim_start().len() + 1
}

/// Splits `text` into blocks; `#` lines and blank lines are allowed between blocks.
pub fn split_blocks(text: &str) -> Result<Vec<RawBlock>, PenaltyError> {
    let mut blocks = Vec::new();
    let mut pending_comment: Vec<String> = Vec::new();
    let mut current: Option<RawBlock> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        match current.as_mut() {
            None => {
                if trimmed.is_empty() {
                    pending_comment.clear();
                } else if let Some(rest) = trimmed.strip_prefix('#') {
                    pending_comment.push(rest.trim().to_string());
                } else if trimmed == START {
                    let comment = if pending_comment.is_empty() {
                        None
                    } else {
                        Some(pending_comment.join("\n"))
                    };
                    pending_comment.clear();
                    current = Some(RawBlock { line: line_no, comment, fields: Vec::new() });
                } else {
                    return Err(PenaltyError::UnexpectedContent {
                        line: line_no,
                        column: column_of(raw),
                        text: trimmed.to_string(),
                    });
                }
            }
            Some(block) => {
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                if trimmed == END {
                    blocks.push(current.take().expect("open block"));
                    continue;
                }
                if trimmed == START {
                    return Err(PenaltyError::UnterminatedBlock { line: block.line });
                }
                let content = match raw.find('#') {
                    Some(pos) => &raw[..pos],
                    None => raw,
                };
                let column = column_of(content);
                let body = content.trim();
                let (key, value) = match body.find(char::is_whitespace) {
                    Some(pos) => (&body[..pos], body[pos..].trim()),
                    None => (body, ""),
                };
                let value_column = if value.is_empty() {
                    column + key.len()
                } else {
                    column + body.find(value).unwrap_or(0)
                };
                block.fields.push(RawField {
                    key: key.to_string(),
                    value: value.to_string(),
                    line: line_no,
                    column,
                    value_column,
                });
            }
        }
    }
    if let Some(block) = current {
        return Err(PenaltyError::UnterminatedBlock { line: block.line });
    }
    Ok(blocks)
}

impl RawField {
    pub fn invalid(&self, reason: impl Into<String>) -> PenaltyError {
        PenaltyError::InvalidValue {
            line: self.line,
            column: self.value_column,
            field: self.key.clone(),
            reason: reason.into(),
        }
    }

    fn single_token(&self) -> Result<&str, PenaltyError> {
        let mut toks = self.value.split_whitespace();
        match (toks.next(), toks.next()) {
            (Some(t), None) => Ok(t),
            (None, _) => Err(self.invalid("missing value")),
            (Some(_), Some(_)) => Err(self.invalid("expected a single value")),
        }
    }

    fn non_numeric(&self, value: &str) -> PenaltyError {
        PenaltyError::NonNumericValue {
            line: self.line,
            column: self.value_column,
            field: self.key.clone(),
            value: value.to_string(),
        }
    }

    /// A single finite real.
    pub fn number(&self) -> Result<f64, PenaltyError> {
        let tok = self.single_token()?;
        match tok.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.non_numeric(tok)),
        }
    }

    /// A single integer literal.
    pub fn integer(&self) -> Result<i64, PenaltyError> {
        let tok = self.single_token()?;
        tok.parse::<i64>().map_err(|_| self.non_numeric(tok))
    }

    /// Whether the literal is written as an integer (no decimal point or exponent).
    pub fn is_integer_literal(&self) -> bool {
        self.value.trim().parse::<i64>().is_ok()
    }

    /// Whitespace-separated finite reals.
    pub fn numbers(&self) -> Result<Vec<f64>, PenaltyError> {
        let vals: Result<Vec<f64>, _> = self
            .value
            .split_whitespace()
            .map(|t| match t.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(self.non_numeric(t)),
            })
            .collect();
        let vals = vals?;
        if vals.is_empty() {
            return Err(self.invalid("expected at least one number"));
        }
        Ok(vals)
    }

    pub fn curve(&self) -> Result<Curve, PenaltyError> {
        let tok = self.value.trim();
        Curve::from_keyword(tok).ok_or_else(|| PenaltyError::InvalidBoundary {
            line: self.line,
            column: self.value_column,
            value: tok.to_string(),
        })
    }

    /// A comma/whitespace-separated list of 1- or 3-letter residue codes.
    pub fn residue_types(&self) -> Result<ResidueTypeSet, PenaltyError> {
        let mut codes = Vec::new();
        let mut offset = 0;
        for piece in self.value.split(|c: char| c == ',' || c.is_whitespace()) {
            let col = self.value_column + offset;
            offset += piece.len() + 1;
            if piece.is_empty() {
                continue;
            }
            let code = ResidueCode::resolve(piece).ok_or_else(|| PenaltyError::UnknownResidueCode {
                line: self.line,
                column: col,
                code: piece.to_string(),
            })?;
            if codes.contains(&code) {
                return Err(self.invalid(format!("residue type {code} listed twice")));
            }
            codes.push(code);
        }
        ResidueTypeSet::new(codes).map_err(|_| self.invalid("expected at least one residue code"))
    }

    /// A comma/whitespace-separated list of property names.
    pub fn words(&self) -> Result<Vec<String>, PenaltyError> {
        let words: Vec<String> = self
            .value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect();
        if words.is_empty() {
            return Err(self.invalid("expected at least one name"));
        }
        if let Some(bad) = words.iter().find(|w| !w.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')) {
            return Err(self.invalid(format!("bad name '{bad}'")));
        }
        Ok(words)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_with_comments() {
        let text = "# favor few prolines\nPENALTY_DEFINITION\nTYPE P  # proline\n  SHAPE ABOVE\nEND_PENALTY_DEFINITION\n";
        let blocks = split_blocks(text).unwrap();
        assert_eq!(blocks.len(), 1);
        let b = &blocks[0];
        assert_eq!(b.line, 2);
        assert_eq!(b.comment.as_deref(), Some("favor few prolines"));
        assert_eq!(b.fields[0].value, "P");
        assert_eq!((b.fields[1].line, b.fields[1].column, b.fields[1].value_column), (4, 3, 9));
    }

    #[test]
    fn blank_line_detaches_comment() {
        let blocks = split_blocks("# note\n\nPENALTY_DEFINITION\nEND_PENALTY_DEFINITION").unwrap();
        assert_eq!(blocks[0].comment, None);
    }

    #[test]
    fn unterminated_and_stray_text() {
        assert_eq!(
            split_blocks("PENALTY_DEFINITION\nTYPE A\n"),
            Err(PenaltyError::UnterminatedBlock { line: 1 })
        );
        assert!(matches!(
            split_blocks("hello\n"),
            Err(PenaltyError::UnexpectedContent { line: 1, .. })
        ));
    }
}
