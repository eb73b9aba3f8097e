//! Unit-level text representation.
//!
//! Every position in the toolkit (alignment indices, edit spans, M2 offsets)
//! counts Unicode scalar values of the *normalized* text. Normalization is
//! applied once at ingestion so that all modules agree on those positions.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnicodeForm {
    /// NFC.
    ComposedCanonical,
    None,
}

/// How raw text is brought into canonical form before it is split into units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizePolicy {
    pub unicode_form: UnicodeForm,
    /// Fold half-width ASCII punctuation to its full-width counterpart.
    pub width_fold: bool,
    pub strip_outer_whitespace: bool,
}

impl Default for NormalizePolicy {
    fn default() -> Self {
        Self {
            unicode_form: UnicodeForm::ComposedCanonical,
            width_fold: false,
            strip_outer_whitespace: true,
        }
    }
}

impl NormalizePolicy {
    /// The identity policy: `normalize` returns its input unchanged.
    pub const fn none() -> Self {
        Self {
            unicode_form: UnicodeForm::None,
            width_fold: false,
            strip_outer_whitespace: false,
        }
    }

    /// Default policy plus width folding.
    pub fn width_fold() -> Self {
        Self {
            width_fold: true,
            ..Self::default()
        }
    }

    /// Looks up one of the named presets `default`, `none`, `widthfold`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "none" => Ok(Self::none()),
            "widthfold" => Ok(Self::width_fold()),
            other => Err(Error::Argument(format!(
                "unknown normalization preset {other:?} (expected default, none or widthfold)"
            ))),
        }
    }
}

/// Maps a half-width ASCII punctuation mark to the matching full-width form
/// (U+FF01..U+FF5E). Letters, digits and the space are left alone.
fn fold_width(c: char) -> char {
    if c.is_ascii_punctuation() {
        char::from_u32(c as u32 + 0xFEE0).unwrap_or(c)
    } else {
        c
    }
}

pub fn normalize(text: &str, policy: &NormalizePolicy) -> String {
    let mut out: String = match policy.unicode_form {
        UnicodeForm::ComposedCanonical => text.nfc().collect(),
        UnicodeForm::None => text.to_owned(),
    };
    if policy.width_fold {
        out = out.chars().map(fold_width).collect();
    }
    if policy.strip_outer_whitespace {
        let trimmed = out.trim();
        if trimmed.len() != out.len() {
            out = trimmed.to_owned();
        }
    }
    out
}

/// Decodes `bytes` as UTF-8 and normalizes the result.
///
/// Invalid input is reported with the byte offset of the first bad sequence.
pub fn normalize_bytes(bytes: &[u8], policy: &NormalizePolicy) -> Result<String> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize(text, policy))
}

/// A sequence of Unicode scalar values together with the text it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct UnitSeq {
    units: Vec<char>,
    original: String,
}

/// Splits already-normalized text into units.
pub fn to_units(text: &str) -> UnitSeq {
    UnitSeq {
        units: text.chars().collect(),
        original: text.to_owned(),
    }
}

impl UnitSeq {
    pub fn from_units(units: Vec<char>) -> Self {
        let original = units.iter().collect();
        Self { units, original }
    }

    /// Normalizes `raw` under `policy` and splits it.
    pub fn normalized(raw: &str, policy: &NormalizePolicy) -> Self {
        to_units(&normalize(raw, policy))
    }

    pub fn units(&self) -> &[char] {
        &self.units
    }

    pub fn as_str(&self) -> &str {
        &self.original
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<char> {
        self.units.get(index).copied()
    }

    /// Sub-sequence over a unit range. Panics if the range is out of bounds.
    pub fn slice(&self, range: Range<usize>) -> UnitSeq {
        UnitSeq::from_units(self.units[range].to_vec())
    }

    pub fn into_units(self) -> Vec<char> {
        self.units
    }
}

impl fmt::Display for UnitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.original)
    }
}

impl From<&str> for UnitSeq {
    fn from(text: &str) -> Self {
        to_units(text)
    }
}

impl Serialize for UnitSeq {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.original)
    }
}

impl<'de> Deserialize<'de> for UnitSeq {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Ok(to_units(&text))
    }
}
