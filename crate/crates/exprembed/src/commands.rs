//! The pipeline steps behind each subcommand. Every step writes its
//! artifacts and a run manifest into the output directory and returns what
//! it computed.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use exprembed_core::dataset::{
    corpus_stats, explode_class_pairs, make_identity_pairs, merge_pairs, pairs_for_source, split_dataset, stream_seed,
    ClassSplit, CorpusStats, PairDataset, PairMetadata, SplitSpec,
};
use exprembed_core::embed::{
    distance_report, AnalogyQuery, ComparisonReport, Embedder, EmbeddingIndex, IndexEntry, MeanScore,
};
use exprembed_core::expr::random::{random_expr, RandomExprConfig};
use exprembed_core::expr::Expr;
use exprembed_core::neural::{
    encoder_input, evaluate_one, train, Example, GenMode, GenerationResult, SeqModel, TrainError, TrainReport,
    Vocabulary,
};
use exprembed_core::rewrite::{GenConfig, OracleConfig};
use exprembed_core::treedist::Normalization;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint;
use crate::config::{GenOpts, ModelOpts, TrainOpts};
use crate::error::{Error, Result};
use crate::formats::{
    parse_analogies, read_classes, read_exprs, read_index, read_pairs, write_exprs, write_index, write_pairs,
};
use crate::io::{read_to_string, write_atomic};
use crate::manifest::RunManifest;
use crate::scatter::{emit_scatter, ScatterPoint};

/// Settings shared by every command.
#[derive(Clone, Debug)]
pub struct Context {
    pub seed: u64,
    /// Worker threads for data generation, embedding and evaluation; 0 means
    /// one per core. Training always runs on the calling thread.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn oracle(&self) -> OracleConfig {
        OracleConfig { seed: self.seed, ..Default::default() }
    }

    /// Runs `f` on a pool of the requested size.
    pub fn parallel<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {} threads: {e}", self.threads)))?;
        Ok(pool.install(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Pairs of distinct equivalent expressions.
    Sememb,
    /// Every expression paired with itself.
    Structemb,
}

impl From<Mode> for GenMode {
    fn from(m: Mode) -> GenMode {
        match m {
            Mode::Sememb => GenMode::SemEmb,
            Mode::Structemb => GenMode::StructEmb,
        }
    }
}

fn stats_row(out: &mut String, name: &str, pairs: Option<usize>, s: &CorpusStats) {
    let pairs = pairs.map_or_else(|| "-".to_string(), |p| p.to_string());
    let _ = writeln!(
        out,
        "{name}\t{}\t{pairs}\t{:.2} ± {:.2}\t{:.2} ± {:.2}",
        s.count, s.operators_mean, s.operators_sd, s.length_mean, s.length_sd
    );
}

#[derive(Clone, Debug)]
pub struct GenDataOutput {
    pub split: exprembed_core::dataset::Split,
    pub val_pairs: PairDataset,
    pub files: Vec<PathBuf>,
}

/// Generates equivalent pairs from source expressions, holds out validation
/// and test expressions, and writes `train.tsv`, `val-pairs.tsv`,
/// `val.txt`, `test.txt` and `stats.tsv`.
pub fn gen_data(ctx: &Context, sources_file: Option<&Path>, opts: GenOpts) -> Result<GenDataOutput> {
    let (settings, rules) = opts.resolve()?;
    let mut sources = match sources_file {
        Some(p) => read_exprs(p)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(ctx.seed, u64::MAX));
            let cfg = RandomExprConfig::with_ops(settings.source_min_ops, settings.source_max_ops);
            (0..settings.random_sources).map(|_| random_expr(&mut rng, &cfg)).collect()
        }
    };
    let mut seen = BTreeSet::new();
    sources.retain(|e| e.count_operators() <= settings.max_ops && seen.insert(e.clone()));
    let cfg =
        GenConfig { rules: rules.clone(), max_ops: settings.max_ops, depth: settings.depth, oracle: ctx.oracle() };
    let per_source: Vec<Vec<(Expr, Expr)>> = ctx.parallel(|| {
        sources
            .par_iter()
            .enumerate()
            .map(|(i, s)| pairs_for_source(s, i, &cfg, settings.max_per_source, ctx.seed))
            .collect()
    })?;
    let data = PairDataset {
        examples: merge_pairs(per_source),
        meta: PairMetadata { seed: Some(ctx.seed), rules, max_ops: Some(settings.max_ops), sources: sources.len() },
    };
    let spec = SplitSpec { val_size: settings.val_size, test_size: settings.test_size, seed: ctx.seed };
    let split = split_dataset(&data, &spec).map_err(|e| Error::Data(e.to_string()))?;
    let (val_set, test_set): (BTreeSet<&Expr>, BTreeSet<&Expr>) =
        (split.val.iter().collect(), split.test.iter().collect());
    let val_pairs = PairDataset {
        examples: data.examples.iter().filter(|(a, b)| val_set.contains(a) && !test_set.contains(b)).cloned().collect(),
        meta: data.meta.clone(),
    };

    let mut stats = String::from("split\texpressions\tpairs\toperators\tlength\n");
    stats_row(&mut stats, "train", Some(split.train.len()), &corpus_stats(&split.train.expressions()));
    stats_row(&mut stats, "val", Some(val_pairs.len()), &corpus_stats(&split.val));
    stats_row(&mut stats, "test", None, &corpus_stats(&split.test));

    let files = vec![
        ctx.path("train.tsv"),
        ctx.path("val-pairs.tsv"),
        ctx.path("val.txt"),
        ctx.path("test.txt"),
        ctx.path("stats.tsv"),
    ];
    write_pairs(&files[0], &split.train)?;
    write_pairs(&files[1], &val_pairs)?;
    write_exprs(&files[2], &split.val)?;
    write_exprs(&files[3], &split.test)?;
    write_atomic(&files[4], stats.as_bytes())?;
    let inputs: Vec<&Path> = sources_file.into_iter().collect();
    RunManifest::new("gen-data", ctx.seed, ctx.threads, &settings).write(&ctx.out_dir, &inputs, &files)?;
    Ok(GenDataOutput { split, val_pairs, files })
}

fn examples(vocab: &Vocabulary, data: &PairDataset, max_len: usize) -> (Vec<Example>, usize) {
    let mut dropped = 0;
    let out = data
        .examples
        .iter()
        .filter_map(|(a, b)| {
            let ex = Example { src: vocab.encode(a).ok()?, tgt: vocab.encode(b).ok()? };
            if ex.src.len() > max_len || ex.tgt.len() > max_len {
                dropped += 1;
                return None;
            }
            Some(ex)
        })
        .collect();
    (out, dropped)
}

#[derive(Serialize)]
struct TrainSettings<'a> {
    mode: Mode,
    model: ModelOpts,
    train: TrainOpts,
    checkpoint: &'a str,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: SeqModel,
    pub report: TrainReport,
    pub files: Vec<PathBuf>,
}

/// Trains a model on a pair file and writes the checkpoint and a loss log
/// (`train-log.tsv`). In StructEmb mode every expression is paired with
/// itself instead.
pub fn train_model(
    ctx: &Context,
    pairs_file: &Path,
    val_file: Option<&Path>,
    mode: Mode,
    model_opts: ModelOpts,
    train_opts: TrainOpts,
    checkpoint_name: &str,
) -> Result<TrainOutput> {
    let config = model_opts.resolve(ctx.seed)?;
    let train_cfg = train_opts.resolve();
    let mut train_pairs = read_pairs(pairs_file)?;
    let mut val_pairs = val_file.map(read_pairs).transpose()?.unwrap_or_default();
    if mode == Mode::Structemb {
        train_pairs = make_identity_pairs(&train_pairs);
        val_pairs = make_identity_pairs(&val_pairs);
    }
    let mut all = train_pairs.clone();
    all.examples.extend(val_pairs.examples.iter().cloned());
    let vocab = Vocabulary::from_dataset(&all).map_err(|e| Error::Data(format!("{}: {e}", pairs_file.display())))?;
    let (train_ex, dropped) = examples(&vocab, &train_pairs, config.max_len);
    let (val_ex, _) = examples(&vocab, &val_pairs, config.max_len);
    if dropped > 0 {
        eprintln!("skipped {dropped} training pairs longer than {} tokens", config.max_len);
    }
    let mut model = SeqModel::new(config, vocab).map_err(|e| Error::Usage(e.to_string()))?;
    eprintln!(
        "training {} parameters on {} pairs ({} validation)",
        model.parameter_count(),
        train_ex.len(),
        val_ex.len()
    );
    let mut log = String::from("step\ttrain_loss\tval_loss\n");
    let report = train(&mut model, &train_ex, &val_ex, &train_cfg, &mut |ev| {
        let val = ev.val_loss.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(log, "{}\t{:.6}\t{val}", ev.step, ev.train_loss);
        eprintln!("step {:>6}  train {:.4}  val {val}", ev.step, ev.train_loss);
    })
    .map_err(|e| match e {
        TrainError::NonFiniteLoss { .. } => Error::Divergence(e.to_string()),
        other => Error::Data(other.to_string()),
    })?;
    let files = vec![ctx.path(checkpoint_name), ctx.path("train-log.tsv")];
    checkpoint::save(&files[0], &model)?;
    write_atomic(&files[1], log.as_bytes())?;
    let settings = TrainSettings {
        mode,
        model: ModelOpts::from(&model.config),
        train: TrainOpts::from(&train_cfg),
        checkpoint: checkpoint_name,
    };
    let mut inputs = vec![pairs_file];
    inputs.extend(val_file);
    RunManifest::new("train", ctx.seed, ctx.threads, &settings).write(&ctx.out_dir, &inputs, &files)?;
    Ok(TrainOutput { model, report, files })
}

/// Embeddings of `exprs` in input order.
pub fn embed_all(ctx: &Context, model: &SeqModel, exprs: &[Expr]) -> Result<Vec<Vec<f64>>> {
    let vectors: Vec<Result<Vec<f64>>> = ctx.parallel(|| {
        exprs
            .par_iter()
            .map(|e| {
                let ids = model.vocab.encode(e).map_err(|err| Error::Data(format!("cannot embed `{e}`: {err}")))?;
                model.embed(&encoder_input(&ids)).map_err(|err| Error::Data(format!("cannot embed `{e}`: {err}")))
            })
            .collect()
    })?;
    vectors.into_iter().collect()
}

/// What to embed: a plain expression list or a class file.
#[derive(Clone, Copy, Debug)]
pub enum EmbedSource<'a> {
    Exprs(&'a Path),
    Classes(&'a Path),
}

/// Writes an index file with one entry per input expression, numbered in
/// input order.
pub fn embed(
    ctx: &Context,
    checkpoint_file: &Path,
    source: EmbedSource<'_>,
    index_name: &str,
) -> Result<EmbeddingIndex> {
    let model = checkpoint::load(checkpoint_file)?;
    type Labeled = Vec<(Option<String>, Expr)>;
    let (labeled, split, input): (Labeled, Option<ClassSplit>, &Path) = match source {
        EmbedSource::Exprs(p) => (read_exprs(p)?.into_iter().map(|e| (None, e)).collect(), None, p),
        EmbedSource::Classes(p) => {
            let c = read_classes(p)?;
            let members = c.members().map(|(id, e)| (Some(id.to_string()), e.clone())).collect();
            (members, Some(c.split), p)
        }
    };
    let exprs: Vec<Expr> = labeled.iter().map(|(_, e)| e.clone()).collect();
    let vectors = embed_all(ctx, &model, &exprs)?;
    let entries = labeled
        .into_iter()
        .zip(vectors)
        .enumerate()
        .map(|(id, ((class, expr), vector))| IndexEntry { id, class, expr, vector })
        .collect();
    let index = EmbeddingIndex::new(entries).map_err(|e| Error::Data(e.to_string()))?;
    let out = ctx.path(index_name);
    write_index(&out, &index, split)?;
    #[derive(Serialize)]
    struct S<'a> {
        index: &'a str,
    }
    RunManifest::new("embed", ctx.seed, ctx.threads, S { index: index_name }).write(
        &ctx.out_dir,
        &[checkpoint_file, input],
        &[out],
    )?;
    Ok(index)
}

/// Mean `score_k` over every labeled entry, with a per-class breakdown.
pub fn eval_scorek(
    ctx: &Context,
    index_file: &Path,
    k: usize,
    split: Option<ClassSplit>,
) -> Result<(MeanScore, String)> {
    if k == 0 {
        return Err(Error::Usage("k must be at least 1".into()));
    }
    let (index, recorded) = read_index(index_file)?;
    if let (Some(want), Some(have)) = (split, recorded) {
        if want != have {
            return Err(Error::Data(format!("{} holds the {have} split, not {want}", index_file.display())));
        }
    }
    let queries: Vec<usize> = index.entries().iter().filter(|e| e.class.is_some()).map(|e| e.id).collect();
    let score = index.mean_score_k(k, &queries).map_err(|e| Error::Data(e.to_string()))?;
    let mut text = String::new();
    if let Some(s) = split.or(recorded) {
        let _ = writeln!(text, "split\t{s}");
    }
    let _ =
        writeln!(text, "k\t{k}\nscore_{k}\t{:.4}\nscored\t{}\nskipped\t{}\n", score.mean, score.scored, score.skipped);
    let _ = writeln!(text, "class\tscore_{k}\tqueries");
    for (class, (mean, n)) in &score.per_class {
        let _ = writeln!(text, "{class}\t{mean:.4}\t{n}");
    }
    let out = ctx.path(&format!("scorek-k{k}.tsv"));
    write_atomic(&out, text.as_bytes())?;
    #[derive(Serialize)]
    struct S {
        k: usize,
        split: Option<String>,
    }
    RunManifest::new("eval scorek", ctx.seed, ctx.threads, S { k, split: split.map(|s| s.to_string()) }).write(
        &ctx.out_dir,
        &[index_file],
        &[out],
    )?;
    Ok((score, text))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyRow {
    pub query: [Expr; 3],
    pub expected: Option<Expr>,
    /// Predicted expression and its cosine similarity to the query vector,
    /// or `None` when a query expression is not in the index.
    pub predicted: Option<(Expr, f64)>,
    pub correct: Option<bool>,
}

/// Answers `x1 - y1 + y2 = ?` for every query by the nearest entry to the
/// combined vector, excluding the three query expressions.
pub fn eval_algebra(ctx: &Context, index_file: &Path, queries_file: &Path) -> Result<Vec<AnalogyRow>> {
    let (index, _) = read_index(index_file)?;
    let queries = parse_analogies(queries_file, &read_to_string(queries_file)?)?;
    let mut rows = Vec::new();
    let mut text = String::from("x1\ty1\ty2\texpected\tpredicted\tsimilarity\tcorrect\n");
    for (q, expected) in queries {
        let ids: Option<Vec<usize>> = q.iter().map(|e| index.find_expr(e)).collect();
        let (predicted, correct) = match ids {
            None => (None, None),
            Some(ids) => {
                let r = index
                    .embedding_algebra(&AnalogyQuery { x1: ids[0], y1: ids[1], y2: ids[2], expected: expected.clone() })
                    .map_err(|e| Error::Data(e.to_string()))?;
                let e = index.get(r.predicted).expect("prediction is indexed").expr.clone();
                (Some((e, r.similarity)), r.correct)
            }
        };
        let show = |e: &Option<Expr>| e.as_ref().map_or_else(|| "-".to_string(), |e| e.to_string());
        let (pred, sim) = predicted
            .as_ref()
            .map_or(("missing".to_string(), "-".to_string()), |(e, s)| (e.to_string(), format!("{s:.4}")));
        let ok = correct.map_or("-", |c| if c { "yes" } else { "no" });
        let _ = writeln!(text, "{}\t{}\t{}\t{}\t{pred}\t{sim}\t{ok}", q[0], q[1], q[2], show(&expected));
        rows.push(AnalogyRow { query: q, expected, predicted, correct });
    }
    let judged: Vec<bool> = rows.iter().filter_map(|r| r.correct).collect();
    if !judged.is_empty() {
        let hits = judged.iter().filter(|c| **c).count();
        let _ = writeln!(text, "# accuracy {hits}/{}", judged.len());
    }
    let out = ctx.path("algebra.tsv");
    write_atomic(&out, text.as_bytes())?;
    print!("{text}");
    RunManifest::new("eval algebra", ctx.seed, ctx.threads, ()).write(
        &ctx.out_dir,
        &[index_file, queries_file],
        &[out],
    )?;
    Ok(rows)
}

/// Compares, per query and rank, the tree edit distance from the query to
/// each embedder's neighbor, raw and with constants normalized away.
pub fn eval_distance(
    ctx: &Context,
    embedders: &[(String, PathBuf)],
    queries_file: &Path,
    top_n: usize,
    normalization: Normalization,
) -> Result<ComparisonReport> {
    if embedders.is_empty() || top_n == 0 {
        return Err(Error::Usage("need at least one embedder and top-n ≥ 1".into()));
    }
    let indices: Vec<EmbeddingIndex> =
        embedders.iter().map(|(_, p)| read_index(p).map(|(i, _)| i)).collect::<Result<_>>()?;
    let queries = read_exprs(queries_file)?;
    let named: Vec<Embedder<'_>> =
        embedders.iter().zip(&indices).map(|((name, _), index)| Embedder { name, index }).collect();
    let report = distance_report(&queries, &named, top_n, normalization).map_err(|e| Error::Data(e.to_string()))?;

    let mut text = String::from("query\trank");
    for (name, _) in embedders {
        let _ = write!(text, "\t{name}\t{name}_raw\t{name}_normalized");
    }
    text.push_str("\traw_winner\tnormalized_winner\n");
    let winner =
        |w: &exprembed_core::treedist::Winner| w.strict().map_or("tie".to_string(), |i| embedders[i].0.clone());
    for row in &report.rows {
        let _ = write!(text, "{}\t{}", queries[row.query], row.rank);
        for ((id, c), index) in row.neighbors.iter().zip(&row.distances.candidates).zip(&indices) {
            let _ = write!(text, "\t{}\t{}\t{}", index.get(*id).expect("indexed").expr, c.raw, c.normalized);
        }
        let _ = writeln!(text, "\t{}\t{}", winner(&row.distances.raw_winner), winner(&row.distances.normalized_winner));
    }
    let _ = writeln!(text, "# cases {}", report.cases());
    for (i, (name, _)) in embedders.iter().enumerate() {
        let _ = writeln!(text, "# {name} closer: raw {} normalized {}", report.raw_wins[i], report.normalized_wins[i]);
    }
    let _ = writeln!(text, "# ties: raw {} normalized {}", report.raw_ties, report.normalized_ties);
    let out = ctx.path("distance.tsv");
    write_atomic(&out, text.as_bytes())?;
    #[derive(Serialize)]
    struct S<'a> {
        embedders: Vec<&'a str>,
        top_n: usize,
        normalization: String,
    }
    let settings = S {
        embedders: embedders.iter().map(|(n, _)| n.as_str()).collect(),
        top_n,
        normalization: format!("{normalization:?}").to_lowercase(),
    };
    let mut inputs: Vec<&Path> = embedders.iter().map(|(_, p)| p.as_path()).collect();
    inputs.push(queries_file);
    RunManifest::new("eval distance", ctx.seed, ctx.threads, settings).write(&ctx.out_dir, &inputs, &[out])?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamAccuracy {
    pub beam: usize,
    pub accuracy: f64,
    pub results: Vec<GenerationResult>,
}

/// Generation accuracy at each beam size, with each beam checked by the
/// equivalence oracle.
pub fn generation_accuracy(
    ctx: &Context,
    model: &SeqModel,
    inputs: &[Expr],
    beams: &[usize],
    max_len: usize,
    mode: Mode,
) -> Result<Vec<BeamAccuracy>> {
    let oracle = ctx.oracle();
    beams
        .iter()
        .map(|&beam| {
            if beam == 0 {
                return Err(Error::Usage("beam size must be at least 1".into()));
            }
            let results: Vec<GenerationResult> = ctx.parallel(|| {
                inputs.par_iter().map(|e| evaluate_one(model, e, beam, max_len, &oracle, mode.into())).collect()
            })?;
            let hits = results.iter().filter(|r| r.success).count();
            let accuracy = if inputs.is_empty() { 0.0 } else { hits as f64 / inputs.len() as f64 };
            Ok(BeamAccuracy { beam, accuracy, results })
        })
        .collect()
}

pub fn eval_generation(
    ctx: &Context,
    checkpoint_file: &Path,
    exprs_file: &Path,
    beams: &[usize],
    max_decode_len: Option<usize>,
    mode: Mode,
) -> Result<Vec<BeamAccuracy>> {
    let model = checkpoint::load(checkpoint_file)?;
    let inputs = read_exprs(exprs_file)?;
    let max_len = max_decode_len.unwrap_or(model.config.max_len);
    let table = generation_accuracy(ctx, &model, &inputs, beams, max_len, mode)?;
    let mut summary = String::from("beam\taccuracy\tsuccesses\tinputs\n");
    let mut files = Vec::new();
    for row in &table {
        let hits = row.results.iter().filter(|r| r.success).count();
        let _ = writeln!(summary, "{}\t{:.4}\t{hits}\t{}", row.beam, row.accuracy, inputs.len());
        let mut detail = String::from("input\tsuccess\tbest\toutcome\n");
        for r in &row.results {
            let (best, outcome) = r.beams.first().map_or(("-".to_string(), "-".to_string()), |(e, _, o)| {
                (e.as_ref().map_or_else(|| "-".to_string(), |e| e.to_string()), format!("{o:?}"))
            });
            let _ = writeln!(detail, "{}\t{}\t{best}\t{outcome}", r.input, r.success);
        }
        let path = ctx.path(&format!("generation-beam{}.tsv", row.beam));
        write_atomic(&path, detail.as_bytes())?;
        files.push(path);
    }
    let path = ctx.path("generation.tsv");
    write_atomic(&path, summary.as_bytes())?;
    files.push(path);
    print!("{summary}");
    #[derive(Serialize)]
    struct S<'a> {
        beams: &'a [usize],
        max_decode_len: usize,
        mode: Mode,
    }
    RunManifest::new("eval generation", ctx.seed, ctx.threads, S { beams, max_decode_len: max_len, mode }).write(
        &ctx.out_dir,
        &[checkpoint_file, exprs_file],
        &files,
    )?;
    Ok(table)
}

/// Projects an index onto its first two principal components and writes
/// `<stem>.csv` and `<stem>.svg`.
pub fn eval_pca(ctx: &Context, index_file: &Path, stem: &str) -> Result<Vec<ScatterPoint>> {
    let (index, _) = read_index(index_file)?;
    let coords = index.pca_2d().map_err(|e| Error::Data(e.to_string()))?;
    let points: Vec<ScatterPoint> = coords
        .into_iter()
        .map(|(id, u, v)| ScatterPoint { id, label: index.get(id).and_then(|e| e.class.clone()), u, v })
        .collect();
    let title =
        format!("PCA of {}", index_file.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()));
    let (csv, svg) = emit_scatter(&points, &ctx.path(stem), &title)?;
    RunManifest::new("eval pca", ctx.seed, ctx.threads, ()).write(&ctx.out_dir, &[index_file], &[csv, svg])?;
    Ok(points)
}

/// Ranked candidates for one expression, each judged by the oracle.
pub fn infer(ctx: &Context, checkpoint_file: &Path, expr: &Expr, beam: usize, mode: Mode) -> Result<GenerationResult> {
    if beam == 0 {
        return Err(Error::Usage("beam size must be at least 1".into()));
    }
    let model = checkpoint::load(checkpoint_file)?;
    model.vocab.encode(expr).map_err(|e| Error::Data(format!("cannot encode `{expr}`: {e}")))?;
    let result = evaluate_one(&model, expr, beam, model.config.max_len, &ctx.oracle(), mode.into());
    #[derive(Serialize)]
    struct S {
        expr: String,
        beam: usize,
        mode: Mode,
    }
    RunManifest::new("infer", ctx.seed, ctx.threads, S { expr: expr.to_string(), beam, mode }).write(
        &ctx.out_dir,
        &[checkpoint_file],
        &[],
    )?;
    Ok(result)
}

/// Pairs of distinct members within each class, capped per class.
pub fn class_pairs(ctx: &Context, classes_file: &Path, cap: usize, name: &str) -> Result<PairDataset> {
    let classes = read_classes(classes_file)?;
    let pairs = explode_class_pairs(&classes, cap, ctx.seed);
    let out = ctx.path(name);
    write_pairs(&out, &pairs)?;
    #[derive(Serialize)]
    struct S {
        cap: usize,
    }
    RunManifest::new("class-pairs", ctx.seed, ctx.threads, S { cap }).write(&ctx.out_dir, &[classes_file], &[out])?;
    Ok(pairs)
}
