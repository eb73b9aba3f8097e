//! Deterministic synthetic correction corpora.
//!
//! Clean sentences come from a small template grammar. Spelling-style pairs
//! swap characters through a fixed confusion table (same length); grammar-
//! style pairs duplicate, drop, insert or transpose characters.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusTag, ParallelPair};
use crate::text::{NormalizePolicy, UnitSeq};

const SUBJECTS: &[&str] = &[
    "我",
    "你",
    "他",
    "她",
    "我们",
    "他们",
    "老师",
    "学生",
    "妈妈",
    "小明",
    "同学们",
    "爸爸",
];
const TIMES: &[&str] = &["今天", "明天", "昨天", "晚上", "周末", "早上", "下午"];
const PLACES: &[&str] = &["家里", "学校", "图书馆", "公园", "教室", "食堂", "操场"];
const ACTIVITIES: &[&str] = &[
    "做作业",
    "看书",
    "学习汉语",
    "打篮球",
    "吃午饭",
    "写作文",
    "复习功课",
    "做运动",
    "讨论问题",
    "准备考试",
    "画图画",
    "读课文",
];
const MANNERS: &[&str] = &["认真地", "高兴地", "努力地", "安静地", "慢慢地"];

/// (correct, typo) pairs used for spelling-style corruption. Errors run in
/// one direction, and no typo character occurs anywhere in clean text.
pub const CONFUSIONS: &[(char, char)] = &[
    ('在', '载'),
    ('的', '底'),
    ('做', '坐'),
    ('已', '己'),
    ('题', '提'),
    ('篮', '蓝'),
    ('图', '团'),
    ('课', '果'),
    ('午', '牛'),
    ('校', '较'),
    ('习', '刁'),
    ('书', '节'),
];

const FUNCTION_CHARS: &[char] = &['了', '的', '在', '地'];

/// Uniform index in `lo..hi`, drawn through `u32` so the stream is the same
/// on 32- and 64-bit targets.
fn index(rng: &mut impl Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo as u32..hi as u32) as usize
}

fn pick<'a>(rng: &mut impl Rng, options: &[&'a str]) -> &'a str {
    options.choose(rng).copied().unwrap_or_default()
}

/// One grammatical sentence from the template grammar.
pub fn clean_sentence(rng: &mut impl Rng) -> String {
    let (s, t, p, a, m) = (
        pick(rng, SUBJECTS),
        pick(rng, TIMES),
        pick(rng, PLACES),
        pick(rng, ACTIVITIES),
        pick(rng, MANNERS),
    );
    match rng.gen_range(0..8u32) {
        0 => format!("{s}{t}在{p}{a}。"),
        1 => format!("{s}{m}{a}。"),
        2 => format!("{s}已经{a}了。"),
        3 => format!("{s}想再{a}一次。"),
        4 => format!("{s}的作业做得很好。"),
        5 => format!("{t}{s}在{p}{a}。"),
        6 => format!("{s}以后要在{p}{a}。"),
        _ => format!("这是{s}的书。"),
    }
}

fn typo_for(c: char) -> Option<char> {
    CONFUSIONS
        .iter()
        .find(|(good, _)| *good == c)
        .map(|(_, bad)| *bad)
}

/// Replaces one or two confusable characters with their typo. Returns the
/// input unchanged when nothing in it is confusable.
pub fn corrupt_spelling(rng: &mut impl Rng, clean: &[char]) -> Vec<char> {
    let mut slots: Vec<usize> = (0..clean.len())
        .filter(|&i| typo_for(clean[i]).is_some())
        .collect();
    slots.shuffle(rng);
    let hits = if rng.gen_bool(0.3) { 2 } else { 1 };
    let mut out = clean.to_vec();
    for &i in slots.iter().take(hits) {
        out[i] = typo_for(clean[i]).unwrap_or(clean[i]);
    }
    out
}

/// Applies one structural error: duplication, deletion, redundant function
/// character, or an adjacent transposition.
pub fn corrupt_grammar(rng: &mut impl Rng, clean: &[char]) -> Vec<char> {
    let mut out = clean.to_vec();
    // Keep the final punctuation in place.
    let body = clean.len().saturating_sub(1);
    if body < 2 {
        return out;
    }
    match rng.gen_range(0..4u32) {
        0 => {
            let i = index(rng, 0, body);
            out.insert(i, clean[i]);
        }
        1 => {
            let functional: Vec<usize> = (0..body)
                .filter(|&i| FUNCTION_CHARS.contains(&clean[i]))
                .collect();
            let i = functional
                .choose(rng)
                .copied()
                .unwrap_or_else(|| index(rng, 0, body));
            out.remove(i);
        }
        2 => {
            let i = index(rng, 1, body);
            out.insert(i, *FUNCTION_CHARS.choose(rng).unwrap_or(&'了'));
        }
        _ => {
            let i = index(rng, 0, body - 1);
            out.swap(i, i + 1);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorStyle {
    Spelling,
    Grammar,
    /// Each pair picks spelling or grammar with equal probability.
    Mixed,
}

/// Generates `n` pairs. `clean_rate` of them keep source = target.
pub fn generate(
    name: &str,
    tag: CorpusTag,
    style: ErrorStyle,
    n: usize,
    clean_rate: f64,
    rng: &mut impl Rng,
) -> Corpus {
    let pairs = (0..n)
        .map(|i| {
            let target: Vec<char> = clean_sentence(rng).chars().collect();
            let source = if rng.gen_bool(clean_rate) {
                target.clone()
            } else {
                let spelling = match style {
                    ErrorStyle::Spelling => true,
                    ErrorStyle::Grammar => false,
                    ErrorStyle::Mixed => rng.gen_bool(0.5),
                };
                if spelling {
                    corrupt_spelling(rng, &target)
                } else {
                    corrupt_grammar(rng, &target)
                }
            };
            ParallelPair {
                id: i.to_string(),
                source: UnitSeq::from_units(source),
                references: vec![UnitSeq::from_units(target)],
            }
        })
        .collect();
    Corpus {
        name: name.to_owned(),
        tag,
        policy: NormalizePolicy::default(),
        pairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub stage1: usize,
    pub csc: usize,
    pub cgc: usize,
    pub test: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            stage1: 2000,
            csc: 1000,
            cgc: 1000,
            test: 500,
        }
    }
}

/// The corpora of a two-stage run plus a spelling-style test set.
#[derive(Debug, Clone)]
pub struct SynthSuite {
    /// Mixed-error alignment corpus for stage 1.
    pub stage1: Corpus,
    pub csc: Corpus,
    pub cgc: Corpus,
    /// Spelling-style pairs for decoding and scoring.
    pub test: Corpus,
}

impl SynthSuite {
    pub fn generate(sizes: SuiteSizes, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            stage1: generate(
                "stage1",
                CorpusTag::Align,
                ErrorStyle::Mixed,
                sizes.stage1,
                0.2,
                &mut rng,
            ),
            csc: generate(
                "csc",
                CorpusTag::Csc,
                ErrorStyle::Spelling,
                sizes.csc,
                0.25,
                &mut rng,
            ),
            cgc: generate(
                "cgc",
                CorpusTag::Cgc,
                ErrorStyle::Grammar,
                sizes.cgc,
                0.15,
                &mut rng,
            ),
            test: generate(
                "test",
                CorpusTag::Csc,
                ErrorStyle::Spelling,
                sizes.test,
                0.25,
                &mut rng,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_deterministic() {
        let sizes = SuiteSizes {
            stage1: 50,
            csc: 20,
            cgc: 20,
            test: 10,
        };
        let a = SynthSuite::generate(sizes, 0);
        let b = SynthSuite::generate(sizes, 0);
        assert_eq!(a.stage1, b.stage1);
        assert_eq!(a.test, b.test);
        assert_eq!(a.stage1.len(), 50);
        assert_ne!(SynthSuite::generate(sizes, 1).stage1, a.stage1);
    }

    /// Guards the random stream: 32-bit targets must produce the same suite.
    #[test]
    fn suite_is_pinned() {
        let suite = SynthSuite::generate(SuiteSizes::default(), 0);
        let first = suite.test.pairs.iter().find(|p| p.is_changed()).unwrap();
        assert_eq!(first.source.as_str(), "小明努力地坐作业。");
        assert_eq!(first.reference().as_str(), "小明努力地做作业。");
    }

    #[test]
    fn spelling_pairs_keep_length() {
        let suite = SynthSuite::generate(SuiteSizes::default(), 3);
        for p in suite.csc.pairs.iter().chain(&suite.test.pairs) {
            assert_eq!(p.source.len(), p.reference().len());
        }
        let changed = suite.csc.pairs.iter().filter(|p| p.is_changed()).count();
        assert!(changed > 500, "{changed}");
    }

    #[test]
    fn typos_never_occur_in_clean_text() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let clean = clean_sentence(&mut rng);
            assert!(
                CONFUSIONS.iter().all(|(_, typo)| !clean.contains(*typo)),
                "{clean}"
            );
        }
    }

    #[test]
    fn grammar_pairs_mostly_change_something() {
        let suite = SynthSuite::generate(SuiteSizes::default(), 3);
        let changed = suite.cgc.pairs.iter().filter(|p| p.is_changed()).count();
        assert!(changed > 700, "{changed}");
        let resized = suite
            .cgc
            .pairs
            .iter()
            .filter(|p| p.source.len() != p.reference().len())
            .count();
        assert!(resized > 300, "{resized}");
    }
}
