//! Confusion-channel + n-gram corrector.
//!
//! The model scores a target token given the preceding target tokens and the
//! source unit aligned to it:
//!
//! ```text
//! P(y_t | y_<t, x) = λ · P_lm(y_t | y_{t-n+1..t-1}) + (1 − λ) · P_ch(y_t | x_a(t))
//! ```
//!
//! Both components are add-k smoothed count models over the same vocabulary
//! (plus a reserved UNK), so the mixture is a proper distribution. Training
//! is count accumulation; λ is chosen by grid search on held-out NLL.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::align::{align, CostScheme, OpKind};
use crate::corpus::{split, Corpus, CorpusTag, ParallelPair};
use crate::error::{Error, Result};
use crate::text::UnitSeq;

/// Padding for contexts shorter than the LM order.
pub const BOUNDARY: char = '\u{E000}';
/// Stand-in for units outside the vocabulary.
pub const UNK: char = '\u{E001}';

fn is_reserved(c: char) -> bool {
    c == BOUNDARY || c == UNK
}

/// Known units. The distribution support is these units plus [`UNK`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Vocab {
    units: BTreeSet<char>,
}

impl Vocab {
    pub fn new(units: impl IntoIterator<Item = char>) -> Self {
        let mut v = Self::default();
        v.extend(units);
        v
    }

    pub fn extend(&mut self, units: impl IntoIterator<Item = char>) {
        self.units
            .extend(units.into_iter().filter(|c| !is_reserved(*c)));
    }

    /// Size of the support, UNK included.
    pub fn size(&self) -> usize {
        self.units.len() + 1
    }

    pub fn contains(&self, c: char) -> bool {
        self.units.contains(&c)
    }

    pub fn map(&self, c: char) -> char {
        if self.units.contains(&c) {
            c
        } else {
            UNK
        }
    }

    /// Every token of the support in code-point order, UNK included.
    pub fn support(&self) -> impl Iterator<Item = char> + '_ {
        self.units.iter().copied().chain(std::iter::once(UNK))
    }
}

/// Add-k smoothed n-gram language model over units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramLM {
    order: usize,
    smoothing_k: f64,
    vocab: Vocab,
    /// Context (last `order - 1` mapped units) → next unit → count.
    counts: BTreeMap<String, BTreeMap<char, u64>>,
    totals: BTreeMap<String, u64>,
}

impl NgramLM {
    pub fn new(order: usize, smoothing_k: f64, vocab: Vocab) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        check_k(smoothing_k)?;
        Ok(Self {
            order,
            smoothing_k,
            vocab,
            counts: BTreeMap::new(),
            totals: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn context_key(&self, prev: &[char]) -> String {
        let need = self.order - 1;
        let tail = &prev[prev.len().saturating_sub(need)..];
        std::iter::repeat_n(BOUNDARY, need - tail.len())
            .chain(tail.iter().map(|&c| self.vocab.map(c)))
            .collect()
    }

    pub fn prob(&self, prev: &[char], token: char) -> f64 {
        let key = self.context_key(prev);
        let token = self.vocab.map(token);
        let count = self
            .counts
            .get(&key)
            .and_then(|m| m.get(&token))
            .copied()
            .unwrap_or(0);
        let total = self.totals.get(&key).copied().unwrap_or(0);
        (count as f64 + self.smoothing_k)
            / (total as f64 + self.smoothing_k * self.vocab.size() as f64)
    }

    /// Adds the n-grams of one target sentence. The sentence's units must
    /// already be in the vocabulary.
    pub fn observe(&mut self, sentence: &[char]) {
        for t in 0..sentence.len() {
            let key = self.context_key(&sentence[..t]);
            let token = self.vocab.map(sentence[t]);
            *self
                .counts
                .entry(key.clone())
                .or_default()
                .entry(token)
                .or_insert(0) += 1;
            *self.totals.entry(key).or_insert(0) += 1;
        }
    }

    fn extend_vocab(&mut self, units: &[char]) {
        self.vocab.extend(units.iter().copied());
    }
}

/// Add-k smoothed distribution of emitted target units given a source unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionChannel {
    smoothing_k: f64,
    vocab: Vocab,
    counts: BTreeMap<char, BTreeMap<char, u64>>,
    totals: BTreeMap<char, u64>,
}

impl ConfusionChannel {
    pub fn new(smoothing_k: f64, vocab: Vocab) -> Result<Self> {
        check_k(smoothing_k)?;
        Ok(Self {
            smoothing_k,
            vocab,
            counts: BTreeMap::new(),
            totals: BTreeMap::new(),
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn prob(&self, emitted: char, source: char) -> f64 {
        let (emitted, source) = (self.vocab.map(emitted), self.vocab.map(source));
        let count = self
            .counts
            .get(&source)
            .and_then(|m| m.get(&emitted))
            .copied()
            .unwrap_or(0);
        let total = self.totals.get(&source).copied().unwrap_or(0);
        (count as f64 + self.smoothing_k)
            / (total as f64 + self.smoothing_k * self.vocab.size() as f64)
    }

    pub fn count(&self, source: char, emitted: char) -> u64 {
        self.counts
            .get(&source)
            .and_then(|m| m.get(&emitted))
            .copied()
            .unwrap_or(0)
    }

    pub fn add(&mut self, source: char, emitted: char, n: u64) {
        self.vocab.extend([source, emitted]);
        let (source, emitted) = (self.vocab.map(source), self.vocab.map(emitted));
        *self
            .counts
            .entry(source)
            .or_default()
            .entry(emitted)
            .or_insert(0) += n;
        *self.totals.entry(source).or_insert(0) += n;
    }

    /// Decoding candidates for `source`: the unit itself plus every unit it
    /// has been observed to emit, in code-point order.
    pub fn candidates(&self, source: char) -> Vec<char> {
        let mut out: BTreeSet<char> = BTreeSet::from([source]);
        if let Some(m) = self.counts.get(&source) {
            out.extend(
                m.iter()
                    .filter(|(c, n)| **n > 0 && !is_reserved(**c))
                    .map(|(c, _)| *c),
            );
        }
        out.into_iter().collect()
    }

    fn extend_vocab(&mut self, units: &[char]) {
        self.vocab.extend(units.iter().copied());
    }
}

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "smoothing k must be positive, got {k}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Initial parameters, before any fitting.
    Theta0,
    /// After the alignment stage.
    Theta1,
    /// After joint fitting.
    Theta2,
}

impl Stage {
    pub fn next(self) -> Option<Stage> {
        match self {
            Stage::Theta0 => Some(Stage::Theta1),
            Stage::Theta1 => Some(Stage::Theta2),
            Stage::Theta2 => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureCorrectorModel {
    pub lm: NgramLM,
    pub channel: ConfusionChannel,
    pub lambda: f64,
    pub stage: Stage,
}

pub const MODEL_FORMAT: &str = "zhcorrect-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    model: MixtureCorrectorModel,
}

/// Per-target-token probabilities of a pair under both components.
struct TokenTerms {
    lm: f64,
    channel: Option<f64>,
}

impl MixtureCorrectorModel {
    /// An untrained model over `vocab`.
    pub fn new(order: usize, smoothing_k: f64, lambda: f64, vocab: Vocab) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lm: NgramLM::new(order, smoothing_k, vocab.clone())?,
            channel: ConfusionChannel::new(smoothing_k, vocab)?,
            lambda,
            stage: Stage::Theta0,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        self.lm.vocab()
    }

    pub fn order(&self) -> usize {
        self.lm.order
    }

    pub fn smoothing_k(&self) -> f64 {
        self.lm.smoothing_k
    }

    /// P(y | previous target units, aligned source unit).
    ///
    /// Without an aligned source unit (an inserted target token) the channel
    /// has nothing to condition on and the LM distribution is used alone.
    pub fn conditional(&self, prev: &[char], aligned: Option<char>, y: char) -> f64 {
        let lm = self.lm.prob(prev, y);
        match aligned {
            Some(src) => self.lambda * lm + (1.0 - self.lambda) * self.channel.prob(y, src),
            None => lm,
        }
    }

    fn terms(&self, pair: &ParallelPair) -> Vec<TokenTerms> {
        let (src, tgt) = (pair.source.units(), pair.reference().units());
        let path = align(&pair.source, pair.reference(), &CostScheme::unit());
        path.ops
            .iter()
            .filter(|op| op.kind != OpKind::Del)
            .map(|op| {
                let (prev, y) = (&tgt[..op.tgt_index], tgt[op.tgt_index]);
                let channel = match op.kind {
                    OpKind::Match | OpKind::Sub => Some(self.channel.prob(y, src[op.src_index])),
                    _ => None,
                };
                TokenTerms {
                    lm: self.lm.prob(prev, y),
                    channel,
                }
            })
            .collect()
    }

    /// Negative log-likelihood (natural log) of the pair's first reference.
    pub fn nll(&self, pair: &ParallelPair) -> f64 {
        nll_at(&self.terms(pair), self.lambda)
    }

    /// Mean NLL over the corpus.
    pub fn dataset_objective(&self, corpus: &Corpus) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::Usage(format!("corpus {:?} is empty", corpus.name)));
        }
        Ok(corpus.pairs.iter().map(|p| self.nll(p)).sum::<f64>() / corpus.len() as f64)
    }

    /// Accumulates LM counts from every reference and channel counts from
    /// the aligned source/reference units of every pair.
    pub fn observe(&mut self, pair: &ParallelPair) {
        let mut units: Vec<char> = pair.source.units().to_vec();
        for r in &pair.references {
            units.extend_from_slice(r.units());
        }
        self.lm.extend_vocab(&units);
        self.channel.extend_vocab(&units);
        for reference in &pair.references {
            self.lm.observe(reference.units());
            let path = align(&pair.source, reference, &CostScheme::unit());
            for op in &path.ops {
                if matches!(op.kind, OpKind::Match | OpKind::Sub) {
                    self.channel.add(
                        pair.source.units()[op.src_index],
                        reference.units()[op.tgt_index],
                        1,
                    );
                }
            }
        }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let container = Container {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(out, &container)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(input)?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
        let version = value.get("version").and_then(|v| v.as_u64());
        if format != MODEL_FORMAT || version != Some(u64::from(MODEL_VERSION)) {
            return Err(Error::Version(format!(
                "expected {MODEL_FORMAT} version {MODEL_VERSION}, found {format:?} version {version:?}"
            )));
        }
        let container: Container = serde_json::from_value(value)?;
        let model = container.model;
        if model.lm.vocab != model.channel.vocab
            || model.lm.smoothing_k != model.channel.smoothing_k
        {
            return Err(Error::Version(
                "LM and channel disagree on vocabulary or smoothing".into(),
            ));
        }
        check_lambda(model.lambda)?;
        Ok(model)
    }
}

fn nll_at(terms: &[TokenTerms], lambda: f64) -> f64 {
    -terms
        .iter()
        .map(|t| match t.channel {
            Some(ch) => (lambda * t.lm + (1.0 - lambda) * ch).ln(),
            None => t.lm.ln(),
        })
        .sum::<f64>()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainStage {
    /// Fit on alignment data, producing θ₁ from θ₀.
    Stage1,
    /// Fit on the joint corpus, producing θ₂ from θ₁.
    Stage2,
}

/// Optimizer settings of the large-model recipe. Stored with the stage
/// configuration for provenance; nothing here is used by the count model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmProvenance {
    pub optimizer: String,
    pub learning_rate: f64,
    pub scheduler: String,
    pub warmup_steps: u32,
    pub batch_size: u32,
    pub epochs: u32,
}

impl Default for LlmProvenance {
    fn default() -> Self {
        Self {
            optimizer: "AdamW".into(),
            learning_rate: 2e-5,
            scheduler: "cosine".into(),
            warmup_steps: 500,
            batch_size: 128,
            epochs: 3,
        }
    }
}

/// `{0.0, 0.05, ..., 1.0}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: TrainStage,
    pub expected_tag: CorpusTag,
    pub lm_order: usize,
    pub smoothing_k: f64,
    pub lambda_grid: Vec<f64>,
    pub heldout_fraction: f64,
    pub seed: u64,
    pub provenance: LlmProvenance,
}

impl StageConfig {
    pub fn stage1() -> Self {
        Self {
            stage: TrainStage::Stage1,
            expected_tag: CorpusTag::Align,
            lm_order: 3,
            smoothing_k: 0.01,
            lambda_grid: default_lambda_grid(),
            heldout_fraction: 0.1,
            seed: 0,
            provenance: LlmProvenance::default(),
        }
    }

    pub fn stage2() -> Self {
        Self {
            stage: TrainStage::Stage2,
            expected_tag: CorpusTag::Joint,
            ..Self::stage1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        for &l in &self.lambda_grid {
            check_lambda(l)?;
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "held-out fraction must lie in (0, 1), got {}",
                self.heldout_fraction
            )));
        }
        check_k(self.smoothing_k)?;
        if self.lm_order == 0 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        Ok(())
    }

    /// The untrained θ₀ this configuration starts from.
    pub fn initial_model(&self) -> Result<MixtureCorrectorModel> {
        self.validate()?;
        MixtureCorrectorModel::new(self.lm_order, self.smoothing_k, 0.5, Vocab::default())
    }
}

/// Result of one fitting stage.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: MixtureCorrectorModel,
    /// Pairs whose counts were accumulated.
    pub train: Corpus,
    /// Pairs used to choose λ; disjoint from `train` unless the corpus was
    /// too small to split.
    pub heldout: Corpus,
    /// Mean NLL of `model` on `heldout`; `None` for an empty corpus.
    pub heldout_objective: Option<f64>,
}

/// Runs one stage and returns the fitted model.
pub fn fit_stage(
    init: &MixtureCorrectorModel,
    corpus: &Corpus,
    config: &StageConfig,
) -> Result<MixtureCorrectorModel> {
    fit_stage_with_report(init, corpus, config).map(|r| r.model)
}

/// Runs one stage: keeps the counts of `init`, adds the counts of the
/// training slice of `corpus`, then picks λ from the grid (plus `init`'s λ)
/// by held-out NLL.
pub fn fit_stage_with_report(
    init: &MixtureCorrectorModel,
    corpus: &Corpus,
    config: &StageConfig,
) -> Result<FitReport> {
    config.validate()?;
    if corpus.tag != config.expected_tag {
        return Err(Error::Config(format!(
            "{:?} expects a {:?} corpus, got {:?} ({:?})",
            config.stage, config.expected_tag, corpus.tag, corpus.name
        )));
    }
    let required = match config.stage {
        TrainStage::Stage1 => Stage::Theta0,
        TrainStage::Stage2 => Stage::Theta1,
    };
    if init.stage != required {
        return Err(Error::Config(format!(
            "{:?} must start from {:?}, got {:?}",
            config.stage, required, init.stage
        )));
    }
    if init.order() != config.lm_order || init.smoothing_k() != config.smoothing_k {
        return Err(Error::Config(format!(
            "initial model has order {} and k {}, configuration asks for order {} and k {}",
            init.order(),
            init.smoothing_k(),
            config.lm_order,
            config.smoothing_k
        )));
    }

    let mut model = init.clone();
    model.stage = required
        .next()
        .expect("stage 1 and 2 both have a successor");
    if corpus.is_empty() {
        return Ok(FitReport {
            model,
            train: corpus.clone(),
            heldout: corpus.clone(),
            heldout_objective: None,
        });
    }

    let (train, heldout) = match split(corpus, config.heldout_fraction, config.seed)? {
        (t, h) if !t.is_empty() && !h.is_empty() => (t, h),
        _ => (corpus.clone(), corpus.clone()),
    };
    for pair in &train.pairs {
        model.observe(pair);
    }

    let terms: Vec<Vec<TokenTerms>> = heldout.pairs.iter().map(|p| model.terms(p)).collect();
    let objective =
        |lambda: f64| terms.iter().map(|t| nll_at(t, lambda)).sum::<f64>() / terms.len() as f64;
    let mut best = (init.lambda, objective(init.lambda));
    for &lambda in &config.lambda_grid {
        let value = objective(lambda);
        if value < best.1 {
            best = (lambda, value);
        }
    }
    model.lambda = best.0;
    let heldout_objective = Some(model.dataset_objective(&heldout)?);

    Ok(FitReport {
        model,
        train,
        heldout,
        heldout_objective,
    })
}

/// Substitution-only beam search over the candidate lattice of `src`.
///
/// At position i the candidates are `src[i]` plus every unit `candidates`
/// has seen `src[i]` turn into. Hypotheses are ranked by summed log
/// conditional probability; equal scores fall back to code-point order.
pub fn decode(
    model: &MixtureCorrectorModel,
    src: &UnitSeq,
    beam_width: usize,
    candidates: &ConfusionChannel,
) -> Result<UnitSeq> {
    if beam_width < 1 {
        return Err(Error::Argument("beam width must be at least 1".into()));
    }
    let mut beam: Vec<(f64, Vec<char>)> = vec![(0.0, Vec::with_capacity(src.len()))];
    for &unit in src.units() {
        let options = candidates.candidates(unit);
        let mut next = Vec::with_capacity(beam.len() * options.len());
        for (score, prefix) in &beam {
            for &y in &options {
                let p = model.conditional(prefix, Some(unit), y);
                let mut seq = prefix.clone();
                seq.push(y);
                next.push((score + p.ln(), seq));
            }
        }
        next.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        next.truncate(beam_width);
        beam = next;
    }
    Ok(UnitSeq::from_units(beam.swap_remove(0).1))
}
