//! Residue codes, the 1↔3 letter table, palettes, and residue type sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Canonical amino acids as (one-letter, three-letter) pairs.
pub const CANONICAL: [(char, &str); 20] = [
    ('A', "ALA"),
    ('R', "ARG"),
    ('N', "ASN"),
    ('D', "ASP"),
    ('C', "CYS"),
    ('Q', "GLN"),
    ('E', "GLU"),
    ('G', "GLY"),
    ('H', "HIS"),
    ('I', "ILE"),
    ('L', "LEU"),
    ('K', "LYS"),
    ('M', "MET"),
    ('F', "PHE"),
    ('P', "PRO"),
    ('S', "SER"),
    ('T', "THR"),
    ('W', "TRP"),
    ('Y', "TYR"),
    ('V', "VAL"),
];

/// Non-canonical residue types known to the environment. These have no
/// one-letter form.
pub const REGISTERED_NONCANONICAL: [&str; 8] =
    ["TRF", "NLE", "NVL", "ORN", "DAB", "AIB", "HYP", "DPP"];

/// A three-letter residue type code, always uppercase.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResidueCode([u8; 3]);

impl ResidueCode {
    /// Builds a code from three ASCII alphanumerics without checking registration.
    pub fn from_three(s: &str) -> Option<Self> {
        let b = s.as_bytes();
        if b.len() != 3 || !b.iter().all(|c| c.is_ascii_alphanumeric()) {
            return None;
        }
        Some(Self([
            b[0].to_ascii_uppercase(),
            b[1].to_ascii_uppercase(),
            b[2].to_ascii_uppercase(),
        ]))
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ascii")
    }

    pub fn one_letter(&self) -> Option<char> {
        CANONICAL
            .iter()
            .find(|(_, three)| *three == self.as_str())
            .map(|(one, _)| *one)
    }

    pub fn from_one_letter(c: char) -> Option<Self> {
        let up = c.to_ascii_uppercase();
        CANONICAL
            .iter()
            .find(|(one, _)| *one == up)
            .and_then(|(_, three)| Self::from_three(three))
    }

    pub fn is_canonical(&self) -> bool {
        self.one_letter().is_some()
    }

    /// Whether the code is canonical or a registered non-canonical type.
    pub fn is_known(&self) -> bool {
        self.is_canonical() || REGISTERED_NONCANONICAL.contains(&self.as_str())
    }

    /// Resolves a 1- or 3-letter token against the known-code registry.
    pub fn resolve(token: &str) -> Option<Self> {
        let t = token.trim();
        let mut chars = t.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_one_letter(c),
            _ => Self::from_three(t).filter(|code| code.is_known()),
        }
    }
}

impl fmt::Debug for ResidueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for ResidueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResidueCode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::resolve(s).ok_or_else(|| format!("unknown residue code '{s}'"))
    }
}

impl Serialize for ResidueCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ResidueCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_three(&s).ok_or_else(|| serde::de::Error::custom(format!("bad residue code {s}")))
    }
}

/// The legal base types for a design task: the canonical 20 plus extensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    codes: Vec<ResidueCode>,
}

impl Palette {
    pub fn canonical() -> Self {
        Self {
            codes: CANONICAL
                .iter()
                .map(|(_, t)| ResidueCode::from_three(t).expect("valid"))
                .collect(),
        }
    }

    /// Canonical palette extended with extra (deduplicated) codes.
    pub fn with_extensions(extra: &[ResidueCode]) -> Self {
        let mut p = Self::canonical();
        for code in extra {
            if !p.codes.contains(code) {
                p.codes.push(*code);
            }
        }
        p
    }

    pub fn codes(&self) -> &[ResidueCode] {
        &self.codes
    }

    pub fn contains(&self, code: ResidueCode) -> bool {
        self.codes.contains(&code)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

impl Default for Palette {
    fn default() -> Self {
        Self::canonical()
    }
}

/// A non-empty, duplicate-free set of residue types, kept in source order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueTypeSet {
    codes: Vec<ResidueCode>,
}

/// Why a residue list failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeSetError {
    Empty,
    Unknown(String),
    Duplicate(String),
}

impl ResidueTypeSet {
    /// Parses comma- and/or whitespace-separated 1- or 3-letter codes.
    pub fn parse(list: &str) -> Result<Self, TypeSetError> {
        let mut codes = Vec::new();
        for tok in list
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let code = ResidueCode::resolve(tok).ok_or_else(|| TypeSetError::Unknown(tok.to_string()))?;
            if codes.contains(&code) {
                return Err(TypeSetError::Duplicate(tok.to_string()));
            }
            codes.push(code);
        }
        Self::new(codes)
    }

    pub fn new(codes: Vec<ResidueCode>) -> Result<Self, TypeSetError> {
        if codes.is_empty() {
            return Err(TypeSetError::Empty);
        }
        for (i, c) in codes.iter().enumerate() {
            if codes[..i].contains(c) {
                return Err(TypeSetError::Duplicate(c.to_string()));
            }
        }
        Ok(Self { codes })
    }

    pub fn single(code: ResidueCode) -> Self {
        Self { codes: vec![code] }
    }

    pub fn codes(&self) -> &[ResidueCode] {
        &self.codes
    }

    pub fn contains(&self, code: ResidueCode) -> bool {
        self.codes.contains(&code)
    }

    /// Space-separated three-letter form used by native penalty files.
    pub fn to_three_letter(&self) -> String {
        self.codes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" ")
    }

    /// Comma-separated three-letter form used in XML attributes.
    pub fn to_comma_list(&self) -> String {
        self.codes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",")
    }
}

/// A designed sequence, one residue code per position.
///
/// Displayed as one-letter codes with non-canonical types in brackets,
/// e.g. `MK[TRF]L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sequence(pub Vec<ResidueCode>);

impl Sequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn uniform(code: ResidueCode, len: usize) -> Self {
        Self(vec![code; len])
    }

    pub fn count(&self, set: &ResidueTypeSet) -> usize {
        self.0.iter().filter(|c| set.contains(**c)).count()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for code in &self.0 {
            match code.one_letter() {
                Some(c) => write!(f, "{c}")?,
                None => write!(f, "[{code}]")?,
            }
        }
        Ok(())
    }
}

impl FromStr for Sequence {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        let mut chars = s.chars();
        while let Some(c) = chars.next() {
            if c == '[' {
                let name: String = chars.by_ref().take_while(|&c| c != ']').collect();
                out.push(ResidueCode::from_three(&name).ok_or_else(|| format!("bad residue [{name}]"))?);
            } else if !c.is_whitespace() {
                out.push(ResidueCode::from_one_letter(c).ok_or_else(|| format!("bad residue '{c}'"))?);
            }
        }
        Ok(Self(out))
    }
}

impl Serialize for Sequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for building a code in tests and fixtures; panics on bad input.
pub fn code(s: &str) -> ResidueCode {
    ResidueCode::resolve(s).unwrap_or_else(|| panic!("unknown residue code {s}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_and_three_letter_agree() {
        for (one, three) in CANONICAL {
            let a = ResidueCode::resolve(&one.to_string()).unwrap();
            let b = ResidueCode::resolve(three).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.one_letter(), Some(one));
        }
    }

    #[test]
    fn lowercase_and_ncaa() {
        assert_eq!(code("pro"), code("P"));
        assert_eq!(code("TRF").one_letter(), None);
        assert!(ResidueCode::resolve("XYZ").is_none());
        assert!(ResidueCode::resolve("B").is_none());
    }

    #[test]
    fn type_set_separators() {
        let s = ResidueTypeSet::parse("A, G ,PRO TRF").unwrap();
        assert_eq!(s.to_three_letter(), "ALA GLY PRO TRF");
        assert_eq!(ResidueTypeSet::parse("A,ALA"), Err(TypeSetError::Duplicate("ALA".into())));
        assert_eq!(ResidueTypeSet::parse(" , "), Err(TypeSetError::Empty));
    }

    #[test]
    fn sequence_round_trip() {
        let s: Sequence = "MK[TRF]LG".parse().unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.to_string(), "MK[TRF]LG");
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Sequence>(&json).unwrap(), s);
    }

    #[test]
    fn palette_extension_dedups() {
        let p = Palette::with_extensions(&[code("TRF"), code("ALA")]);
        assert_eq!(p.len(), 21);
        assert!(p.contains(code("TRF")));
    }
}
