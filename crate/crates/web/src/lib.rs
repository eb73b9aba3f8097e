//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: an alignment and edit viewer, an F-beta
//! explorer, and a small corrector trained on the synthetic suite. The
//! logic lives in plain functions so it can be tested natively; the
//! `#[wasm_bindgen]` items only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use zhcorrect::align::{align, AlignmentPath, CostScheme};
use zhcorrect::corpus::{unify, ParallelPair};
use zhcorrect::edits::{extract_edits, Edit, GoldEditCorpus, GoldRecord, MergePolicy};
use zhcorrect::metrics::f_beta;
use zhcorrect::model::{decode, fit_stage_with_report, MixtureCorrectorModel, StageConfig};
use zhcorrect::synth::{SuiteSizes, SynthSuite};
use zhcorrect::text::{NormalizePolicy, UnitSeq};

fn js_err(e: zhcorrect::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
pub struct AlignmentView {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub path: AlignmentPath,
    pub edits: Vec<Edit>,
    /// The pair as it would appear in a gold edit file.
    pub m2: String,
}

pub fn alignment_view(source: &str, target: &str, merge: &str) -> zhcorrect::Result<AlignmentView> {
    let policy = NormalizePolicy::default();
    let merge: MergePolicy = merge.parse()?;
    let src = UnitSeq::normalized(source, &policy);
    let tgt = UnitSeq::normalized(target, &policy);
    let path = align(&src, &tgt, &CostScheme::unit());
    let set = extract_edits(&path, &tgt, merge);
    let mut m2 = Vec::new();
    GoldEditCorpus {
        records: vec![GoldRecord {
            id: "0".into(),
            source: src.clone(),
            references: vec![set.clone()],
        }],
    }
    .write(&mut m2)?;
    let units = |s: &UnitSeq| s.units().iter().map(char::to_string).collect();
    Ok(AlignmentView {
        source: units(&src),
        target: units(&tgt),
        path,
        edits: set.edits,
        m2: String::from_utf8_lossy(&m2).into_owned(),
    })
}

/// JSON for the alignment of `source` to `target` and the extracted edits.
#[wasm_bindgen(js_name = alignPair)]
pub fn align_pair(source: &str, target: &str, merge: &str) -> Result<String, JsError> {
    let view = alignment_view(source, target, merge).map_err(js_err)?;
    serde_json::to_string(&view).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = fBeta)]
pub fn f_beta_js(p: f64, r: f64, beta: f64) -> Result<f64, JsError> {
    f_beta(p, r, beta).map_err(js_err)
}

/// F-beta for `steps` values of beta spaced evenly on a log scale between
/// `lo` and `hi`.
pub fn beta_curve(p: f64, r: f64, lo: f64, hi: f64, steps: usize) -> zhcorrect::Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || steps < 2 {
        return Err(zhcorrect::Error::Argument(
            "need 0 < lo < hi and at least 2 steps".into(),
        ));
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..steps)
        .map(|i| {
            let beta = (a + (b - a) * i as f64 / (steps - 1) as f64).exp();
            f_beta(p, r, beta)
        })
        .collect()
}

#[wasm_bindgen(js_name = fBetaCurve)]
pub fn f_beta_curve(p: f64, r: f64, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    beta_curve(p, r, lo, hi, steps).map_err(js_err)
}

/// A corrector trained in the browser on the synthetic suite.
#[wasm_bindgen]
pub struct ToyCorrector {
    model: MixtureCorrectorModel,
    examples: Vec<ParallelPair>,
    summary: String,
}

#[derive(Serialize)]
struct Summary {
    seed: u32,
    stage1_pairs: usize,
    stage2_pairs: usize,
    stage1_objective: Option<f64>,
    stage2_objective: Option<f64>,
    lambda: f64,
    vocab_size: usize,
}

impl ToyCorrector {
    pub fn train(seed: u32) -> zhcorrect::Result<Self> {
        let suite = SynthSuite::generate(SuiteSizes::default(), u64::from(seed));
        let mut cfg1 = StageConfig::stage1();
        let mut cfg2 = StageConfig::stage2();
        cfg1.seed = u64::from(seed);
        cfg2.seed = u64::from(seed);
        let joint = unify(&[suite.csc, suite.cgc], "joint")?;
        let r1 = fit_stage_with_report(&cfg1.initial_model()?, &suite.stage1, &cfg1)?;
        let r2 = fit_stage_with_report(&r1.model, &joint, &cfg2)?;
        let summary = Summary {
            seed,
            stage1_pairs: suite.stage1.len(),
            stage2_pairs: joint.len(),
            stage1_objective: Some(r1.model.dataset_objective(&r2.heldout)?),
            stage2_objective: r2.heldout_objective,
            lambda: r2.model.lambda,
            vocab_size: r2.model.vocab().size(),
        };
        Ok(Self {
            model: r2.model,
            examples: suite
                .test
                .pairs
                .into_iter()
                .filter(ParallelPair::is_changed)
                .collect(),
            summary: serde_json::to_string(&summary)?,
        })
    }

    pub fn correct_text(&self, text: &str, beam: usize) -> zhcorrect::Result<String> {
        let policy = NormalizePolicy::default();
        text.lines()
            .map(|line| {
                let out = decode(
                    &self.model,
                    &UnitSeq::normalized(line, &policy),
                    beam,
                    &self.model.channel,
                )?;
                Ok(out.as_str().to_owned())
            })
            .collect::<zhcorrect::Result<Vec<_>>>()
            .map(|lines| lines.join("\n"))
    }
}

#[wasm_bindgen]
impl ToyCorrector {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<ToyCorrector, JsError> {
        Self::train(seed).map_err(js_err)
    }

    /// Training statistics as JSON.
    pub fn summary(&self) -> String {
        self.summary.clone()
    }

    /// Corrects each line of `text`.
    pub fn correct(&self, text: &str, beam: usize) -> Result<String, JsError> {
        self.correct_text(text, beam).map_err(js_err)
    }

    #[wasm_bindgen(js_name = exampleCount)]
    pub fn example_count(&self) -> usize {
        self.examples.len()
    }

    /// Corrupted source of held-out example `i` (wrapping).
    #[wasm_bindgen(js_name = exampleSource)]
    pub fn example_source(&self, i: usize) -> String {
        self.example(i)
            .map(|p| p.source.as_str().to_owned())
            .unwrap_or_default()
    }

    #[wasm_bindgen(js_name = exampleReference)]
    pub fn example_reference(&self, i: usize) -> String {
        self.example(i)
            .map(|p| p.reference().as_str().to_owned())
            .unwrap_or_default()
    }
}

impl ToyCorrector {
    fn example(&self, i: usize) -> Option<&ParallelPair> {
        if self.examples.is_empty() {
            None
        } else {
            self.examples.get(i % self.examples.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_of_a_deletion() {
        let v = alignment_view("他是学生生", "他是学生", "maximal-runs").unwrap();
        assert_eq!(v.source.len(), 5);
        assert_eq!(v.path.total_cost, 1);
        assert_eq!((v.edits[0].start, v.edits[0].end), (4, 5));
        assert_eq!(v.m2, "S 他是学生生\nA 4 5|||del|||-NONE-|||0\n\n");
        assert!(alignment_view("a", "b", "greedy").is_err());
    }

    #[test]
    fn curve_endpoints() {
        let c = beta_curve(0.5, 0.25, 0.25, 4.0, 5).unwrap();
        assert_eq!(c.len(), 5);
        assert!((c[2] - f_beta(0.5, 0.25, 1.0).unwrap()).abs() < 1e-12);
        // Small beta tends to precision, large beta to recall.
        assert!(c[0] > c[2] && c[2] > c[4]);
        assert!(beta_curve(0.5, 0.5, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn toy_corrector_fixes_examples() {
        let toy = ToyCorrector::train(0).unwrap();
        assert!(toy.example_count() > 0);
        let fixed = (0..20)
            .filter(|&i| {
                toy.correct_text(&toy.example_source(i), 8).unwrap() == toy.example_reference(i)
            })
            .count();
        assert!(fixed >= 15, "{fixed}/20");
        let summary: serde_json::Value = serde_json::from_str(&toy.summary()).unwrap();
        assert!(
            summary["stage2_objective"].as_f64().unwrap()
                <= summary["stage1_objective"].as_f64().unwrap()
        );
    }
}
