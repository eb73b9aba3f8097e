//! Sentence-level CSC scoring and edit-level CGC scoring.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::align::{align, CostScheme};
use crate::edits::{extract_edits, match_edits, GoldEditCorpus, MatchCounts, MergePolicy};
use crate::error::{Error, Result};
use crate::text::UnitSeq;

/// Weighted harmonic mean of precision and recall.
///
/// `beta < 1` weights precision more heavily. Returns 0 when both inputs are
/// 0.
pub fn f_beta(p: f64, r: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&r) {
        return Err(Error::Argument(format!(
            "precision and recall must lie in [0, 1], got {p} and {r}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Argument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + b2) * p * r / denom)
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Csc,
    Cgc,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Csc => "csc",
            Task::Cgc => "cgc",
        })
    }
}

/// Precision, recall and F-beta for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub task: Task,
    pub dataset: String,
    pub beta: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    #[serde(flatten)]
    pub counts: MatchCounts,
    pub n_sentences: usize,
}

impl ScoreReport {
    pub fn from_counts(
        task: Task,
        dataset: impl Into<String>,
        beta: f64,
        counts: MatchCounts,
        n_sentences: usize,
    ) -> Result<Self> {
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        Ok(Self {
            task,
            dataset: dataset.into(),
            beta,
            precision,
            recall,
            f_beta: f_beta(precision, recall, beta)?,
            counts,
            n_sentences,
        })
    }

    /// Column label for the F score, e.g. `F0.5`.
    pub fn f_label(&self) -> String {
        format!("F{}", self.beta)
    }
}

/// Arithmetic mean of per-dataset scores.
pub fn macro_average(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Usage("macro average of an empty list".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Argument(format!("score {bad} outside [0, 1]")));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// What happened to one sentence under sentence-level correction scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CscSentenceOutcome {
    pub gold_changed: bool,
    pub hyp_changed: bool,
    /// The hypothesis equals the reference.
    pub exact_correct: bool,
}

impl CscSentenceOutcome {
    pub fn classify(source: &UnitSeq, reference: &UnitSeq, hypothesis: &UnitSeq) -> Self {
        Self {
            gold_changed: source != reference,
            hyp_changed: source != hypothesis,
            exact_correct: hypothesis == reference,
        }
    }

    /// Contribution of this sentence to (TP, FP, FN).
    pub fn counts(&self) -> MatchCounts {
        match (self.gold_changed, self.hyp_changed, self.exact_correct) {
            (true, _, true) => MatchCounts::new(1, 0, 0),
            (true, true, false) => MatchCounts::new(0, 1, 1),
            (true, false, false) => MatchCounts::new(0, 0, 1),
            (false, true, _) => MatchCounts::new(0, 1, 0),
            (false, false, _) => MatchCounts::default(),
        }
    }
}

/// A (source, reference, hypothesis) triple for CSC scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CscItem {
    pub source: UnitSeq,
    pub reference: UnitSeq,
    pub hypothesis: UnitSeq,
}

/// Sentence-level correction F1.
///
/// A changed sentence is a true positive only when the hypothesis equals the
/// reference. False positives are edits to clean sentences plus wrong
/// corrections of dirty ones.
pub fn score_csc(items: &[CscItem], dataset: &str) -> Result<ScoreReport> {
    if items.is_empty() {
        return Err(Error::Usage("no sentences to score".into()));
    }
    let counts = items
        .iter()
        .map(|it| CscSentenceOutcome::classify(&it.source, &it.reference, &it.hypothesis).counts())
        .sum();
    ScoreReport::from_counts(Task::Csc, dataset, 1.0, counts, items.len())
}

/// Settings for edit-level scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgcConfig {
    pub beta: f64,
    pub merge: MergePolicy,
    pub costs: CostScheme,
}

impl Default for CgcConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            merge: MergePolicy::MaximalRuns,
            costs: CostScheme::unit(),
        }
    }
}

/// Per-sentence result of edit-level scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceMatch {
    pub counts: MatchCounts,
    /// `ref_id` of the reference chosen for this sentence.
    pub ref_id: usize,
}

/// Extracts the hypothesis edits for one gold record and picks the reference
/// with the highest sentence-level F-beta (lowest `ref_id` on ties).
pub fn score_cgc_sentence(
    hypothesis: &UnitSeq,
    record: &crate::edits::GoldRecord,
    config: &CgcConfig,
) -> Result<SentenceMatch> {
    let path = align(&record.source, hypothesis, &config.costs);
    let hyp = extract_edits(&path, hypothesis, config.merge).with_ids(record.id.clone(), 0);
    let mut best: Option<(f64, SentenceMatch)> = None;
    for reference in &record.references {
        let counts = match_edits(&hyp, reference)?;
        let local = ScoreReport::from_counts(Task::Cgc, "", config.beta, counts, 1)?.f_beta;
        if best.is_none_or(|(f, _)| local > f) {
            best = Some((
                local,
                SentenceMatch {
                    counts,
                    ref_id: reference.ref_id,
                },
            ));
        }
    }
    best.map(|(_, m)| m)
        .ok_or_else(|| Error::Usage(format!("gold record {} has no reference", record.id)))
}

/// Edit-level P/R/F-beta over a corpus of hypotheses keyed by gold record id.
///
/// Counts of the selected references are summed across sentences before
/// precision and recall are computed.
pub fn score_cgc(
    hypotheses: &[(String, UnitSeq)],
    gold: &GoldEditCorpus,
    config: &CgcConfig,
    dataset: &str,
) -> Result<ScoreReport> {
    if hypotheses.is_empty() {
        return Err(Error::Usage("no sentences to score".into()));
    }
    let mut total = MatchCounts::default();
    for (id, hypothesis) in hypotheses {
        let record = gold
            .get(id)
            .ok_or_else(|| Error::Usage(format!("hypothesis {id:?} has no gold entry")))?;
        total += score_cgc_sentence(hypothesis, record, config)?.counts;
    }
    ScoreReport::from_counts(Task::Cgc, dataset, config.beta, total, hypotheses.len())
}

/// Renders reports as an aligned text table with four decimals.
pub fn format_table(reports: &[ScoreReport]) -> String {
    let name_w = reports
        .iter()
        .map(|r| r.dataset.chars().count())
        .chain(std::iter::once("Dataset".len()))
        .max()
        .unwrap_or(7);
    let f_label = reports
        .first()
        .map(ScoreReport::f_label)
        .unwrap_or_else(|| "F".into());
    let mut out = format!(
        "{:<name_w$}  {:>9}  {:>9}  {:>9}  {:>6}  {:>6}  {:>6}\n",
        "Dataset", "Precision", "Recall", f_label, "TP", "FP", "FN"
    );
    for r in reports {
        let pad = name_w - r.dataset.chars().count() + r.dataset.len();
        out.push_str(&format!(
            "{:<pad$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>6}  {:>6}  {:>6}\n",
            r.dataset, r.precision, r.recall, r.f_beta, r.counts.tp, r.counts.fp, r.counts.fn_
        ));
    }
    out
}
