//! `zhcorrect`: scoring, training and decoding from the command line.
//!
//! Exit codes: 0 success, 2 bad usage or bad input data, 1 internal error.

mod manifest;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use zhcorrect::align::{align, CostScheme};
use zhcorrect::corpus::{parse_parallel, read_lines, unify, Corpus, CorpusTag, Format};
use zhcorrect::edits::{apply_edits, extract_edits, GoldEditCorpus, GoldRecord, MergePolicy};
use zhcorrect::metrics::{
    format_table, macro_average, score_cgc_sentence, score_csc, CgcConfig, CscItem, ScoreReport,
    Task,
};
use zhcorrect::model::{decode, fit_stage_with_report, MixtureCorrectorModel, StageConfig};
use zhcorrect::synth::{SuiteSizes, SynthSuite};
use zhcorrect::text::{NormalizePolicy, UnitSeq};

use manifest::{digest_file, manifest_path, sha256_hex, RunManifest};

#[derive(Parser)]
#[command(name = "zhcorrect", version, about = "Chinese text correction toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Parallel corpus format.
    #[arg(long, global = true, default_value = "tsv", value_parser = parse_format)]
    format: Format,
    /// Normalization preset: default, none or widthfold.
    #[arg(long, global = true, default_value = "default")]
    normalize: String,
    /// Worker threads for per-sentence work; 0 picks the number of CPUs.
    #[arg(long, global = true, env = "ZHCORRECT_JOBS", default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sentence-level correction F1 of a hypothesis file against a parallel
    /// gold file, or the macro average of saved reports with --macro.
    ScoreCsc {
        /// HYP GOLD, or report files with --macro.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long = "macro")]
        macro_avg: bool,
        /// Dataset name in the report; defaults to the gold file stem.
        #[arg(long)]
        dataset: Option<String>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edit-level P/R/F-beta of a hypothesis file against M2 gold edits.
    ScoreCgc {
        hyp: PathBuf,
        gold: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value = "maximal-runs", value_parser = parse_merge)]
        merge_policy: MergePolicy,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-stage training: stage 1 on an alignment corpus, stage 2 on the
    /// union of the given corpora.
    Train {
        #[arg(long)]
        stage1: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        stage2: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        lm_order: usize,
        #[arg(long, default_value_t = 0.01)]
        smoothing_k: f64,
    },
    /// Decodes one sentence per line with a saved model.
    Correct {
        model: PathBuf,
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        beam: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds an M2 gold edit file from a parallel corpus.
    ExtractEdits {
        parallel: PathBuf,
        #[arg(long, default_value = "maximal-runs", value_parser = parse_merge)]
        merge_policy: MergePolicy,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints the minimum-cost alignment of two strings as JSON.
    Align {
        source: String,
        target: String,
        /// `unit` or `SUB,INS,DEL`.
        #[arg(long, default_value = "unit", value_parser = parse_costs)]
        costs: CostScheme,
    },
    /// Writes the synthetic training and test corpora as TSV files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: zhcorrect::Error| e.to_string())
}

fn parse_merge(s: &str) -> Result<MergePolicy, String> {
    s.parse().map_err(|e: zhcorrect::Error| e.to_string())
}

fn parse_costs(s: &str) -> Result<CostScheme, String> {
    if s == "unit" {
        return Ok(CostScheme::unit());
    }
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [sub, ins, del] => CostScheme::new(sub, ins, del).map_err(|e| e.to_string()),
        _ => Err("expected `unit` or three comma-separated costs".into()),
    }
}

/// A broken internal invariant rather than bad input.
#[derive(Debug)]
struct Internal(String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

struct Ctx {
    format: Format,
    policy: NormalizePolicy,
    pool: rayon::ThreadPool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("zhcorrect: {err:#}");
            if err.chain().any(|c| c.is::<Internal>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        format: cli.common.format,
        policy: NormalizePolicy::from_name(&cli.common.normalize)?,
        pool: rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.jobs)
            .build()
            .map_err(|e| Internal(e.to_string()))?,
    };
    match cli.command {
        Command::ScoreCsc {
            files,
            macro_avg,
            dataset,
            out,
        } => {
            if macro_avg {
                cmd_macro(&files, out.as_deref())
            } else {
                let [hyp, gold] = &files[..] else {
                    bail!(
                        "score-csc takes HYP GOLD (got {} files); use --macro for reports",
                        files.len()
                    );
                };
                cmd_score_csc(&ctx, hyp, gold, dataset, out.as_deref())
            }
        }
        Command::ScoreCgc {
            hyp,
            gold,
            beta,
            merge_policy,
            dataset,
            out,
        } => {
            let config = CgcConfig {
                beta,
                merge: merge_policy,
                ..CgcConfig::default()
            };
            cmd_score_cgc(&ctx, &hyp, &gold, &config, dataset, out.as_deref())
        }
        Command::Train {
            stage1,
            stage2,
            out,
            seed,
            lm_order,
            smoothing_k,
        } => cmd_train(&ctx, &stage1, &stage2, &out, seed, lm_order, smoothing_k),
        Command::Correct {
            model,
            input,
            beam,
            out,
        } => cmd_correct(&ctx, &model, &input, beam, out.as_deref()),
        Command::ExtractEdits {
            parallel,
            merge_policy,
            out,
        } => cmd_extract_edits(&ctx, &parallel, merge_policy, out.as_deref()),
        Command::Align {
            source,
            target,
            costs,
        } => {
            let src = UnitSeq::normalized(&source, &ctx.policy);
            let tgt = UnitSeq::normalized(&target, &ctx.policy);
            println!("{}", serde_json::to_string(&align(&src, &tgt, &costs))?);
            Ok(())
        }
        Command::Synth { out, seed } => cmd_synth(&out, seed),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_parallel(ctx: &Ctx, path: &Path, tag: CorpusTag) -> Result<Corpus> {
    parse_parallel(open(path)?, ctx.format, &ctx.policy, &stem(path), tag)
        .with_context(|| format!("parsing {}", path.display()))
}

fn read_sentences(ctx: &Ctx, path: &Path) -> Result<Vec<UnitSeq>> {
    read_lines(open(path)?, &ctx.policy).with_context(|| format!("parsing {}", path.display()))
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn print_report<T: Serialize>(table: &str, report: &T, out: Option<&Path>) -> Result<()> {
    print!("{table}");
    println!("{}", serde_json::to_string(report)?);
    if let Some(path) = out {
        let mut json = serde_json::to_vec_pretty(report)?;
        json.push(b'\n');
        emit(Some(path), &json)?;
    }
    Ok(())
}

fn cmd_score_csc(
    ctx: &Ctx,
    hyp: &Path,
    gold: &Path,
    dataset: Option<String>,
    out: Option<&Path>,
) -> Result<()> {
    let hypotheses = read_sentences(ctx, hyp)?;
    let gold_corpus = read_parallel(ctx, gold, CorpusTag::Csc)?;
    if hypotheses.len() != gold_corpus.len() {
        bail!(
            "{} has {} sentences but {} has {} records",
            hyp.display(),
            hypotheses.len(),
            gold.display(),
            gold_corpus.len()
        );
    }
    let items: Vec<CscItem> = gold_corpus
        .pairs
        .into_iter()
        .zip(hypotheses)
        .map(|(pair, hypothesis)| CscItem {
            reference: pair.references[0].clone(),
            source: pair.source,
            hypothesis,
        })
        .collect();
    let report = score_csc(&items, &dataset.unwrap_or_else(|| stem(gold)))?;
    print_report(&format_table(std::slice::from_ref(&report)), &report, out)
}

#[derive(Serialize)]
struct MacroReport {
    task: Task,
    macro_f: f64,
    datasets: Vec<ScoreReport>,
}

fn cmd_macro(files: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let reports = files
        .iter()
        .map(|path| {
            serde_json::from_reader::<_, ScoreReport>(open(path)?)
                .with_context(|| format!("reading report {}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let task = reports[0].task;
    if reports.iter().any(|r| r.task != task) {
        bail!("--macro needs reports of a single task");
    }
    let scores: Vec<f64> = reports.iter().map(|r| r.f_beta).collect();
    let avg = macro_average(&scores)?;
    let table = format!(
        "{}Avg. {}  {avg:.4}\n",
        format_table(&reports),
        reports[0].f_label()
    );
    let report = MacroReport {
        task,
        macro_f: avg,
        datasets: reports,
    };
    print_report(&table, &report, out)
}

fn cmd_score_cgc(
    ctx: &Ctx,
    hyp: &Path,
    gold: &Path,
    config: &CgcConfig,
    dataset: Option<String>,
    out: Option<&Path>,
) -> Result<()> {
    // Validates beta before any work.
    zhcorrect::metrics::f_beta(0.0, 0.0, config.beta)?;
    let hypotheses = read_sentences(ctx, hyp)?;
    let gold_edits = GoldEditCorpus::parse(open(gold)?)
        .with_context(|| format!("parsing {}", gold.display()))?;
    if hypotheses.len() > gold_edits.len() {
        let id = gold_edits.len();
        bail!("hypothesis id {id} (line {}) has no gold record", id + 1);
    }
    if hypotheses.is_empty() {
        bail!("{} is empty", hyp.display());
    }
    let records: Vec<&GoldRecord> = gold_edits.records.iter().take(hypotheses.len()).collect();
    let matches = ctx.pool.install(|| {
        records
            .par_iter()
            .zip(&hypotheses)
            .map(|(record, h)| score_cgc_sentence(h, record, config))
            .collect::<zhcorrect::Result<Vec<_>>>()
    })?;
    let counts = matches.iter().map(|m| m.counts).sum();
    let report = ScoreReport::from_counts(
        Task::Cgc,
        dataset.unwrap_or_else(|| stem(gold)),
        config.beta,
        counts,
        hypotheses.len(),
    )?;
    print_report(&format_table(std::slice::from_ref(&report)), &report, out)
}

#[derive(Serialize)]
struct TrainConfig<'a> {
    format: &'a str,
    normalize: NormalizePolicy,
    stage1: &'a StageConfig,
    stage2: &'a StageConfig,
}

fn cmd_train(
    ctx: &Ctx,
    stage1: &Path,
    stage2: &[PathBuf],
    out: &Path,
    seed: u64,
    lm_order: usize,
    smoothing_k: f64,
) -> Result<()> {
    let started = Instant::now();
    let mut cfg1 = StageConfig::stage1();
    let mut cfg2 = StageConfig::stage2();
    for cfg in [&mut cfg1, &mut cfg2] {
        cfg.seed = seed;
        cfg.lm_order = lm_order;
        cfg.smoothing_k = smoothing_k;
        cfg.validate()?;
    }

    let align_corpus = read_parallel(ctx, stage1, CorpusTag::Align)?;
    let parts = stage2
        .iter()
        .map(|p| read_parallel(ctx, p, CorpusTag::Other))
        .collect::<Result<Vec<_>>>()?;
    let joint = unify(&parts, "joint")?;
    eprintln!(
        "stage 1: {} pairs; stage 2: {} pairs from {} corpora",
        align_corpus.len(),
        joint.len(),
        parts.len()
    );

    let r1 = fit_stage_with_report(&cfg1.initial_model()?, &align_corpus, &cfg1)?;
    let r2 = fit_stage_with_report(&r1.model, &joint, &cfg2)?;
    // Both stages are reported on the stage-2 held-out slice so the two
    // numbers are comparable.
    let theta1_on_joint = if r2.heldout.is_empty() {
        None
    } else {
        Some(r1.model.dataset_objective(&r2.heldout)?)
    };
    let show =
        |v: Option<f64>| v.map_or_else(|| "n/a (empty corpus)".to_owned(), |x| format!("{x:.6}"));
    println!(
        "stage-1 held-out objective: {} (lambda {}; {} on the stage-1 held-out slice)",
        show(theta1_on_joint),
        r1.model.lambda,
        show(r1.heldout_objective)
    );
    println!(
        "stage-2 held-out objective: {} (lambda {})",
        show(r2.heldout_objective),
        r2.model.lambda
    );

    let mut model_bytes = Vec::new();
    r2.model.save(&mut model_bytes)?;
    let format_name = match ctx.format {
        Format::Tsv => "tsv",
        Format::Jsonl => "jsonl",
    };
    let config = TrainConfig {
        format: format_name,
        normalize: ctx.policy,
        stage1: &cfg1,
        stage2: &cfg2,
    };
    let mut inputs = vec![digest_file(stage1)?];
    for p in stage2 {
        inputs.push(digest_file(p)?);
    }
    let manifest = RunManifest {
        command: std::env::args().collect(),
        config_sha256: sha256_hex(&serde_json::to_vec(&config)?),
        inputs,
        seed,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');

    emit(Some(out), &model_bytes)?;
    emit(Some(&manifest_path(out)), &manifest_bytes)?;
    Ok(())
}

fn cmd_correct(
    ctx: &Ctx,
    model: &Path,
    input: &Path,
    beam: usize,
    out: Option<&Path>,
) -> Result<()> {
    let model = MixtureCorrectorModel::load(open(model)?)
        .with_context(|| format!("loading {}", model.display()))?;
    let sentences = read_sentences(ctx, input)?;
    let corrected = ctx.pool.install(|| {
        sentences
            .par_iter()
            .map(|s| decode(&model, s, beam, &model.channel))
            .collect::<zhcorrect::Result<Vec<_>>>()
    })?;
    let mut text = String::new();
    for line in &corrected {
        text.push_str(line.as_str());
        text.push('\n');
    }
    emit(out, text.as_bytes())
}

fn cmd_extract_edits(
    ctx: &Ctx,
    parallel: &Path,
    merge: MergePolicy,
    out: Option<&Path>,
) -> Result<()> {
    let corpus = read_parallel(ctx, parallel, CorpusTag::Other)?;
    let costs = CostScheme::unit();
    let records = ctx.pool.install(|| {
        corpus
            .pairs
            .par_iter()
            .map(|pair| {
                let references = pair
                    .references
                    .iter()
                    .enumerate()
                    .map(|(k, reference)| {
                        let path = align(&pair.source, reference, &costs);
                        let set =
                            extract_edits(&path, reference, merge).with_ids(pair.id.clone(), k);
                        match apply_edits(&pair.source, &set) {
                            Ok(rebuilt) if rebuilt == *reference => Ok(set),
                            _ => Err(anyhow!(Internal(format!(
                                "edits of record {} reference {k} do not rebuild the reference",
                                pair.id
                            )))),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(GoldRecord {
                    id: pair.id.clone(),
                    source: pair.source.clone(),
                    references,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut buf = Vec::new();
    GoldEditCorpus { records }.write(&mut buf)?;
    emit(out, &buf)
}

fn cmd_synth(out: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let suite = SynthSuite::generate(SuiteSizes::default(), seed);
    for (name, corpus) in [
        ("stage1", &suite.stage1),
        ("csc", &suite.csc),
        ("cgc", &suite.cgc),
        ("test", &suite.test),
    ] {
        let mut buf = Vec::new();
        corpus.write(&mut buf, Format::Tsv)?;
        emit(Some(&out.join(format!("{name}.tsv"))), &buf)?;
    }
    // Decoder input for the test corpus: sources only.
    let mut sources = String::new();
    for pair in &suite.test.pairs {
        sources.push_str(pair.source.as_str());
        sources.push('\n');
    }
    emit(Some(&out.join("test.src.txt")), sources.as_bytes())?;
    eprintln!("wrote synthetic suite (seed {seed}) to {}", out.display());
    Ok(())
}
