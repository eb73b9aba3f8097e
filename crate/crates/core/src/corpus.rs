//! Parallel correction corpora: ingestion, unification and splitting.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize, normalize_bytes, to_units, NormalizePolicy, UnitSeq};

/// A source sentence with one or more corrected references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub id: String,
    pub source: UnitSeq,
    pub references: Vec<UnitSeq>,
}

impl ParallelPair {
    pub fn new(id: impl Into<String>, source: UnitSeq, references: Vec<UnitSeq>) -> Result<Self> {
        let id = id.into();
        if references.is_empty() {
            return Err(Error::Argument(format!("pair {id:?} has no reference")));
        }
        Ok(Self {
            id,
            source,
            references,
        })
    }

    /// The first reference; every pair has one.
    pub fn reference(&self) -> &UnitSeq {
        &self.references[0]
    }

    pub fn is_changed(&self) -> bool {
        self.source != self.references[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusTag {
    /// Spelling correction data.
    Csc,
    /// Grammatical correction data.
    Cgc,
    /// Stage-1 alignment data.
    Align,
    /// Union of several corpora.
    Joint,
    Other,
}

impl std::str::FromStr for CorpusTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csc" => Ok(Self::Csc),
            "cgc" => Ok(Self::Cgc),
            "align" => Ok(Self::Align),
            "joint" => Ok(Self::Joint),
            "other" => Ok(Self::Other),
            _ => Err(Error::Argument(format!("unknown corpus tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "jsonl" => Ok(Self::Jsonl),
            _ => Err(Error::Argument(format!(
                "unknown format {s:?} (expected tsv or jsonl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub tag: CorpusTag,
    /// Policy every sequence in `pairs` was normalized with.
    pub policy: NormalizePolicy,
    pub pairs: Vec<ParallelPair>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, tag: CorpusTag, policy: NormalizePolicy) -> Self {
        Self {
            name: name.into(),
            tag,
            policy,
            pairs: Vec::new(),
        }
    }

    /// Builds a corpus from pairs, rejecting duplicate ids.
    pub fn from_pairs(
        name: impl Into<String>,
        tag: CorpusTag,
        policy: NormalizePolicy,
        pairs: Vec<ParallelPair>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for pair in &pairs {
            if !seen.insert(pair.id.as_str()) {
                return Err(Error::Argument(format!("duplicate pair id {:?}", pair.id)));
            }
        }
        Ok(Self {
            name: name.into(),
            tag,
            policy,
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of pairs whose (source, references) content repeats an earlier pair.
    pub fn duplicate_count(&self) -> usize {
        let mut seen: HashSet<(&str, Vec<&str>)> = HashSet::new();
        self.pairs
            .iter()
            .filter(|p| {
                let key = (
                    p.source.as_str(),
                    p.references.iter().map(UnitSeq::as_str).collect(),
                );
                !seen.insert(key)
            })
            .count()
    }

    pub fn write<W: Write>(&self, out: &mut W, format: Format) -> Result<()> {
        match format {
            Format::Tsv => {
                for pair in &self.pairs {
                    write!(out, "{}", pair.source)?;
                    for r in &pair.references {
                        write!(out, "\t{r}")?;
                    }
                    writeln!(out)?;
                }
            }
            Format::Jsonl => {
                for pair in &self.pairs {
                    let record = JsonRecord {
                        id: pair.id.clone(),
                        source: pair.source.as_str().to_owned(),
                        references: pair
                            .references
                            .iter()
                            .map(|r| r.as_str().to_owned())
                            .collect(),
                    };
                    serde_json::to_writer(&mut *out, &record)?;
                    writeln!(out)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    source: String,
    references: Vec<String>,
}

/// Reads a parallel corpus.
///
/// TSV: column 1 is the source, columns 2.. the references; lines starting
/// with `#` are comments and empty lines are skipped. TSV ids are the
/// zero-based record ordinal. JSONL records carry their own ids.
pub fn parse_parallel<R: BufRead>(
    stream: R,
    format: Format,
    policy: &NormalizePolicy,
    name: &str,
    tag: CorpusTag,
) -> Result<Corpus> {
    let mut pairs = Vec::new();
    let mut seen_ids = HashSet::new();
    for (index, line) in stream.split(b'\n').enumerate() {
        let line_no = index + 1;
        let mut bytes = line?;
        if bytes.last() == Some(&b'\r') {
            bytes.pop();
        }
        if bytes.is_empty() || bytes[0] == b'#' {
            continue;
        }
        let raw = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("invalid UTF-8 at byte offset {}", e.valid_up_to()),
        })?;
        let pair = match format {
            Format::Tsv => {
                let mut cols = raw.split('\t');
                let source = cols.next().unwrap_or_default();
                let references: Vec<UnitSeq> =
                    cols.map(|c| to_units(&normalize(c, policy))).collect();
                if references.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "record has a source but no reference column".into(),
                    });
                }
                ParallelPair {
                    id: pairs.len().to_string(),
                    source: to_units(&normalize(source, policy)),
                    references,
                }
            }
            Format::Jsonl => {
                let record: JsonRecord = serde_json::from_str(raw).map_err(|e| Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
                if record.references.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "record has an empty references list".into(),
                    });
                }
                ParallelPair {
                    id: record.id,
                    source: to_units(&normalize(&record.source, policy)),
                    references: record
                        .references
                        .iter()
                        .map(|r| to_units(&normalize(r, policy)))
                        .collect(),
                }
            }
        };
        if !seen_ids.insert(pair.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate id {:?}", pair.id),
            });
        }
        pairs.push(pair);
    }
    Ok(Corpus {
        name: name.to_owned(),
        tag,
        policy: *policy,
        pairs,
    })
}

/// Reads a plain sentence-per-line file (hypotheses, decoder input).
///
/// Every line is one sentence, including empty ones; a trailing newline does
/// not start an extra sentence.
pub fn read_lines<R: BufRead>(stream: R, policy: &NormalizePolicy) -> Result<Vec<UnitSeq>> {
    let mut out = Vec::new();
    for (index, line) in stream.split(b'\n').enumerate() {
        let mut bytes = line?;
        if bytes.last() == Some(&b'\r') {
            bytes.pop();
        }
        let text = normalize_bytes(&bytes, policy).map_err(|e| Error::Parse {
            line: index + 1,
            message: e.to_string(),
        })?;
        out.push(to_units(&text));
    }
    Ok(out)
}

/// Concatenates corpora into one joint corpus.
///
/// Pairs are kept as a multiset: duplicates across parts survive. Ids are
/// prefixed with the originating corpus name (`name/id`).
pub fn unify(parts: &[Corpus], name: &str) -> Result<Corpus> {
    let policy = match parts.first() {
        Some(first) => first.policy,
        None => NormalizePolicy::default(),
    };
    if let Some(bad) = parts.iter().find(|c| c.policy != policy) {
        return Err(Error::Config(format!(
            "corpus {:?} was normalized with a different policy than {:?}",
            bad.name, parts[0].name
        )));
    }
    let mut names: HashMap<&str, usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(parts.iter().map(Corpus::len).sum());
    for part in parts {
        // Two parts with the same name would collide after namespacing.
        let n = names.entry(part.name.as_str()).or_insert(0);
        let prefix = if *n == 0 {
            part.name.clone()
        } else {
            format!("{}#{}", part.name, n)
        };
        *n += 1;
        pairs.extend(part.pairs.iter().map(|p| ParallelPair {
            id: format!("{prefix}/{}", p.id),
            ..p.clone()
        }));
    }
    Ok(Corpus {
        name: name.to_owned(),
        tag: CorpusTag::Joint,
        policy,
        pairs,
    })
}

/// Deterministic train/held-out partition.
///
/// The held-out part has `round(fraction * N)` pairs. Both parts keep the
/// corpus order of their members.
pub fn split(corpus: &Corpus, heldout_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(heldout_fraction > 0.0 && heldout_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "held-out fraction must lie in (0, 1), got {heldout_fraction}"
        )));
    }
    if corpus.is_empty() {
        return Err(Error::Usage("cannot split an empty corpus".into()));
    }
    let n = corpus.len();
    let heldout_n = (heldout_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_heldout = vec![false; n];
    for &i in &order[..heldout_n] {
        in_heldout[i] = true;
    }
    let mut train = Corpus::new(format!("{}.train", corpus.name), corpus.tag, corpus.policy);
    let mut heldout = Corpus::new(
        format!("{}.heldout", corpus.name),
        corpus.tag,
        corpus.policy,
    );
    for (pair, held) in corpus.pairs.iter().zip(in_heldout) {
        if held {
            heldout.pairs.push(pair.clone());
        } else {
            train.pairs.push(pair.clone());
        }
    }
    Ok((train, heldout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tsv(text: &str) -> Result<Corpus> {
        parse_parallel(
            text.as_bytes(),
            Format::Tsv,
            &NormalizePolicy::default(),
            "t",
            CorpusTag::Other,
        )
    }

    fn toy(name: &str, n: usize) -> Corpus {
        let pairs = (0..n)
            .map(|i| {
                ParallelPair::new(
                    i.to_string(),
                    to_units(&format!("源{i}")),
                    vec![to_units("参")],
                )
                .unwrap()
            })
            .collect();
        Corpus::from_pairs(name, CorpusTag::Csc, NormalizePolicy::default(), pairs).unwrap()
    }

    #[test]
    fn single_record() {
        let c = tsv("他是学生生\t他是学生\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.pairs[0].references.len(), 1);
        assert_eq!(c.pairs[0].reference().as_str(), "他是学生");
    }

    #[test]
    fn multi_reference() {
        let c = tsv("源\t参1\t参2").unwrap();
        assert_eq!(c.pairs[0].references.len(), 2);
    }

    #[test]
    fn missing_reference_is_a_line_error() {
        match tsv("# header comment\n甲\t乙\n只有源\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(tsv("").unwrap().is_empty());
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let text = "{\"id\":\"a\",\"source\":\"甲\",\"references\":[\"乙\"]}\n{\"id\":\"b\",\"source\":\"x\",\"references\":[]}\n";
        let r = parse_parallel(
            text.as_bytes(),
            Format::Jsonl,
            &NormalizePolicy::default(),
            "j",
            CorpusTag::Cgc,
        );
        assert!(matches!(r, Err(Error::Parse { line: 2, .. })));
        let dup = "{\"id\":\"a\",\"source\":\"甲\",\"references\":[\"乙\"]}\n{\"id\":\"a\",\"source\":\"甲\",\"references\":[\"乙\"]}\n";
        let r = parse_parallel(
            dup.as_bytes(),
            Format::Jsonl,
            &NormalizePolicy::default(),
            "j",
            CorpusTag::Cgc,
        );
        assert!(matches!(r, Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn unify_sizes_and_tag() {
        let j = unify(&[toy("a", 3), toy("b", 2)], "joint").unwrap();
        assert_eq!(j.len(), 5);
        assert_eq!(j.tag, CorpusTag::Joint);
        assert_eq!(j.pairs[3].id, "b/0");

        let one = unify(&[toy("a", 3)], "joint").unwrap();
        assert_eq!(one.len(), 3);
        for (p, q) in one.pairs.iter().zip(&toy("a", 3).pairs) {
            assert_eq!(p.id, format!("a/{}", q.id));
            assert_eq!((&p.source, &p.references), (&q.source, &q.references));
        }
    }

    #[test]
    fn unify_at_thousandth_scale() {
        let j = unify(&[toy("csc", 380), toy("cgc", 68)], "joint").unwrap();
        assert_eq!(j.len(), 448);
        assert_eq!(j.tag, CorpusTag::Joint);
    }

    #[test]
    fn unify_keeps_duplicates_and_reports_them() {
        let j = unify(&[toy("a", 2), toy("a", 2)], "joint").unwrap();
        assert_eq!(j.len(), 4);
        assert_eq!(j.duplicate_count(), 2);
        let ids: HashSet<_> = j.pairs.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn unify_rejects_mixed_policies() {
        let mut b = toy("b", 1);
        b.policy = NormalizePolicy::none();
        assert!(matches!(
            unify(&[toy("a", 1), b], "j"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let c = toy("c", 10);
        let (train, held) = split(&c, 0.2, 7).unwrap();
        assert_eq!((train.len(), held.len()), (8, 2));
        let (train2, held2) = split(&c, 0.2, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(held, held2);
        let (train8, held8) = split(&c, 0.2, 8).unwrap();
        assert_eq!((train8.len(), held8.len()), (8, 2));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let c = toy("c", 10);
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(split(&c, f, 0), Err(Error::Argument(_))));
        }
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..60, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let c = toy("c", n);
            let (train, held) = split(&c, frac, seed).unwrap();
            prop_assert_eq!(held.len(), (frac * n as f64).round() as usize);
            let mut ids: Vec<_> = train.pairs.iter().chain(&held.pairs).map(|p| p.id.clone()).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }

        #[test]
        fn serialization_roundtrips(
            rows in proptest::collection::vec(
                ("[a-z\u{4e00}-\u{4e40}，]{0,8}", proptest::collection::vec("[a-z\u{4e00}-\u{4e40}]{0,8}", 1..3)),
                0..8,
            )
        ) {
            let pairs = rows
                .iter()
                .enumerate()
                .map(|(i, (s, refs))| ParallelPair::new(
                    i.to_string(),
                    to_units(s),
                    refs.iter().map(|r| to_units(r)).collect(),
                ).unwrap())
                .collect();
            // Leading '#' would read back as a comment; sources here never start with it.
            let c = Corpus::from_pairs("c", CorpusTag::Other, NormalizePolicy::default(), pairs).unwrap();
            for format in [Format::Tsv, Format::Jsonl] {
                let mut buf = Vec::new();
                c.write(&mut buf, format).unwrap();
                let back = parse_parallel(&buf[..], format, &c.policy, "c", CorpusTag::Other).unwrap();
                prop_assert_eq!(&back, &c);
            }
        }
    }
}
