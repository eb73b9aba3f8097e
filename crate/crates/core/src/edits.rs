//! Span edits derived from alignments, and the M2-style gold edit format.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::align::{AlignmentPath, OpKind};
use crate::error::{Error, Result};
use crate::text::{to_units, UnitSeq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Substitute,
    Insert,
    Delete,
    Complex,
}

impl EditKind {
    pub fn m2_tag(self) -> &'static str {
        match self {
            EditKind::Substitute => "sub",
            EditKind::Insert => "ins",
            EditKind::Delete => "del",
            EditKind::Complex => "complex",
        }
    }

    fn classify(start: usize, end: usize, replacement_len: usize, all_subs: bool) -> Self {
        if start == end {
            EditKind::Insert
        } else if replacement_len == 0 {
            EditKind::Delete
        } else if all_subs {
            EditKind::Substitute
        } else {
            EditKind::Complex
        }
    }
}

/// Replace source units `[start, end)` with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: UnitSeq,
    pub kind: EditKind,
}

impl Edit {
    /// Builds an edit and infers its kind from the span shape. A non-empty
    /// span replaced by the same number of units counts as a substitution.
    pub fn new(start: usize, end: usize, replacement: UnitSeq) -> Result<Self> {
        if end < start {
            return Err(Error::Structural(format!(
                "edit span [{start}, {end}) is reversed"
            )));
        }
        if start == end && replacement.is_empty() {
            return Err(Error::Structural(format!("empty edit at {start}")));
        }
        let same_len = end - start == replacement.len();
        let kind = EditKind::classify(start, end, replacement.len(), same_len);
        Ok(Self {
            start,
            end,
            replacement,
            kind,
        })
    }

    /// The fields that decide whether two edits are the same correction.
    pub fn key(&self) -> (usize, usize, &str) {
        (self.start, self.end, self.replacement.as_str())
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}) -> {:?}",
            self.start,
            self.end,
            self.replacement.as_str()
        )
    }
}

/// The edits one reference (or hypothesis) makes to a source sentence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditSet {
    pub source_id: String,
    pub ref_id: usize,
    pub edits: Vec<Edit>,
}

impl EditSet {
    pub fn new(source_id: impl Into<String>, ref_id: usize, edits: Vec<Edit>) -> Result<Self> {
        let set = Self {
            source_id: source_id.into(),
            ref_id,
            edits,
        };
        set.check_structure(None)?;
        Ok(set)
    }

    pub fn with_ids(mut self, source_id: impl Into<String>, ref_id: usize) -> Self {
        self.source_id = source_id.into();
        self.ref_id = ref_id;
        self
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Sorted, non-overlapping, at most one insertion per point, and (when
    /// `source_len` is given) every span inside the source.
    pub fn check_structure(&self, source_len: Option<usize>) -> Result<()> {
        for pair in self.edits.windows(2) {
            let (e, f) = (&pair[0], &pair[1]);
            if e.end > f.start || (e.start == e.end && f.start == f.end && e.start == f.start) {
                return Err(Error::Structural(format!(
                    "edits {e} and {f} overlap or are unsorted"
                )));
            }
        }
        if let Some(n) = source_len {
            if let Some(e) = self.edits.iter().find(|e| e.end > n) {
                return Err(Error::Structural(format!(
                    "edit {e} reaches past the source length {n}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergePolicy {
    /// Each maximal run of adjacent non-match operations becomes one edit.
    #[default]
    MaximalRuns,
    /// One edit per operation; consecutive insertions at one point still
    /// form a single edit.
    None,
}

impl std::str::FromStr for MergePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximal-runs" => Ok(Self::MaximalRuns),
            "none" => Ok(Self::None),
            _ => Err(Error::Argument(format!(
                "unknown merge policy {s:?} (expected maximal-runs or none)"
            ))),
        }
    }
}

/// Turns the non-match operations of `path` into edits on the source.
///
/// `tgt` is the sequence the path aligns onto; replacements are read from it.
/// The returned set has an empty `source_id` and `ref_id` 0.
pub fn extract_edits(path: &AlignmentPath, tgt: &UnitSeq, merge: MergePolicy) -> EditSet {
    let mut edits = Vec::new();
    let mut run: Vec<OpKind> = Vec::new();
    let (mut start, mut tgt_start) = (0, 0);

    let mut flush = |run: &mut Vec<OpKind>, start: usize, tgt_start: usize| {
        if run.is_empty() {
            return;
        }
        let consumed_src = run
            .iter()
            .filter(|k| matches!(k, OpKind::Sub | OpKind::Del))
            .count();
        let consumed_tgt = run
            .iter()
            .filter(|k| matches!(k, OpKind::Sub | OpKind::Ins))
            .count();
        let end = start + consumed_src;
        let replacement = tgt.slice(tgt_start..tgt_start + consumed_tgt);
        let all_subs = run.iter().all(|k| *k == OpKind::Sub);
        edits.push(Edit {
            start,
            end,
            kind: EditKind::classify(start, end, replacement.len(), all_subs),
            replacement,
        });
        run.clear();
    };

    for op in &path.ops {
        if op.kind == OpKind::Match {
            flush(&mut run, start, tgt_start);
            continue;
        }
        let split_here = match merge {
            MergePolicy::MaximalRuns => false,
            MergePolicy::None => !(op.kind == OpKind::Ins && run.last() == Some(&OpKind::Ins)),
        };
        if split_here {
            flush(&mut run, start, tgt_start);
        }
        if run.is_empty() {
            start = op.src_index;
            tgt_start = op.tgt_index;
        }
        run.push(op.kind);
    }
    flush(&mut run, start, tgt_start);

    EditSet {
        source_id: String::new(),
        ref_id: 0,
        edits,
    }
}

/// Applies a sorted, non-overlapping edit set to `src`, right to left.
pub fn apply_edits(src: &UnitSeq, edits: &EditSet) -> Result<UnitSeq> {
    edits.check_structure(Some(src.len()))?;
    let mut units = src.units().to_vec();
    for e in edits.edits.iter().rev() {
        units.splice(e.start..e.end, e.replacement.units().iter().copied());
    }
    Ok(UnitSeq::from_units(units))
}

/// True/false positive and false negative edit counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl MatchCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }
}

impl Add for MatchCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sum for MatchCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Counts exact (span and replacement) agreement between two edit sets.
pub fn match_edits(hyp: &EditSet, gold: &EditSet) -> Result<MatchCounts> {
    if hyp.source_id != gold.source_id {
        return Err(Error::Usage(format!(
            "hypothesis edits for {:?} compared with gold edits for {:?}",
            hyp.source_id, gold.source_id
        )));
    }
    let gold_keys: HashSet<_> = gold.edits.iter().map(Edit::key).collect();
    let hyp_keys: HashSet<_> = hyp.edits.iter().map(Edit::key).collect();
    let tp = hyp_keys.intersection(&gold_keys).count() as u64;
    Ok(MatchCounts {
        tp,
        fp: hyp_keys.len() as u64 - tp,
        fn_: gold_keys.len() as u64 - tp,
    })
}

/// One source sentence with the edit sets of all its references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldRecord {
    pub id: String,
    pub source: UnitSeq,
    /// Ordered by `ref_id`; never empty.
    pub references: Vec<EditSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoldEditCorpus {
    pub records: Vec<GoldRecord>,
}

const NONE_MARK: &str = "-NONE-";
const NOOP_TAG: &str = "noop";

impl GoldEditCorpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&GoldRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Writes the M2-like format:
    ///
    /// ```text
    /// S <source>
    /// A <start> <end>|||<type>|||<replacement>|||<ref_id>
    ///
    /// ```
    ///
    /// A reference without edits in a multi-reference record is written as
    /// `A -1 -1|||noop|||-NONE-|||<ref_id>` so it survives a round trip.
    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        for record in &self.records {
            writeln!(out, "S {}", record.source)?;
            let multi = record.references.len() > 1;
            for set in &record.references {
                if set.edits.is_empty() && multi {
                    writeln!(out, "A -1 -1|||{NOOP_TAG}|||{NONE_MARK}|||{}", set.ref_id)?;
                }
                for e in &set.edits {
                    let replacement = if e.replacement.is_empty() {
                        NONE_MARK
                    } else {
                        e.replacement.as_str()
                    };
                    writeln!(
                        out,
                        "A {} {}|||{}|||{}|||{}",
                        e.start,
                        e.end,
                        e.kind.m2_tag(),
                        replacement,
                        set.ref_id
                    )?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parses the M2-like format. Record ids are zero-based ordinals.
    pub fn parse<R: BufRead>(stream: R) -> Result<Self> {
        let mut records = Vec::new();
        let mut current: Option<(UnitSeq, BTreeMap<usize, Vec<Edit>>, usize)> = None;

        fn finish(
            records: &mut Vec<GoldRecord>,
            current: Option<(UnitSeq, BTreeMap<usize, Vec<Edit>>, usize)>,
        ) -> Result<()> {
            let Some((source, mut refs, s_line)) = current else {
                return Ok(());
            };
            let id = records.len().to_string();
            if refs.is_empty() {
                refs.insert(0, Vec::new());
            }
            let mut references = Vec::with_capacity(refs.len());
            for (ref_id, mut edits) in refs {
                edits.sort_by_key(|a| (a.start, a.end));
                let set = EditSet {
                    source_id: id.clone(),
                    ref_id,
                    edits,
                };
                set.check_structure(Some(source.len()))
                    .map_err(|e| Error::Parse {
                        line: s_line,
                        message: format!("reference {ref_id}: {e}"),
                    })?;
                references.push(set);
            }
            records.push(GoldRecord {
                id,
                source,
                references,
            });
            Ok(())
        }

        for (index, line) in stream.lines().enumerate() {
            let line_no = index + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                finish(&mut records, current.take())?;
                continue;
            }
            if let Some(source) =
                line.strip_prefix("S ")
                    .or(if line == "S" { Some("") } else { None })
            {
                if current.is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "new S line before the previous record was terminated".into(),
                    });
                }
                current = Some((to_units(source), BTreeMap::new(), line_no));
                continue;
            }
            let Some(body) = line.strip_prefix("A ") else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected an S or A line".into(),
                });
            };
            let Some((_, refs, _)) = current.as_mut() else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "A line outside a record".into(),
                });
            };
            let (ref_id, edit) = parse_a_line(body).map_err(|message| Error::Parse {
                line: line_no,
                message,
            })?;
            let entry = refs.entry(ref_id).or_default();
            if let Some(edit) = edit {
                entry.push(edit);
            }
        }
        finish(&mut records, current.take())?;
        Ok(Self { records })
    }
}

fn parse_a_line(body: &str) -> std::result::Result<(usize, Option<Edit>), String> {
    let fields: Vec<&str> = body.split("|||").collect();
    if fields.len() != 4 {
        return Err(format!(
            "expected 4 '|||'-separated fields, found {}",
            fields.len()
        ));
    }
    let ref_id: usize = fields[3]
        .trim()
        .parse()
        .map_err(|_| format!("bad reference id {:?}", fields[3]))?;
    let mut span = fields[0].split(' ');
    let (Some(a), Some(b), None) = (span.next(), span.next(), span.next()) else {
        return Err(format!("bad span {:?}", fields[0]));
    };
    if a == "-1" && b == "-1" {
        return Ok((ref_id, None));
    }
    let start: usize = a.parse().map_err(|_| format!("bad start index {a:?}"))?;
    let end: usize = b.parse().map_err(|_| format!("bad end index {b:?}"))?;
    let replacement = if fields[2] == NONE_MARK {
        UnitSeq::default()
    } else {
        to_units(fields[2])
    };
    let mut edit = Edit::new(start, end, replacement).map_err(|e| e.to_string())?;
    edit.kind = match fields[1] {
        "sub" => EditKind::Substitute,
        "ins" => EditKind::Insert,
        "del" => EditKind::Delete,
        "complex" => EditKind::Complex,
        // Foreign type labels keep the inferred kind.
        _ => edit.kind,
    };
    Ok((ref_id, Some(edit)))
}
