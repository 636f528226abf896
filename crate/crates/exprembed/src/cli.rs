//! Command-line interface.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use exprembed_core::dataset::{ClassSplit, CLASS_PAIR_CAP};
use exprembed_core::expr::Expr;
use exprembed_core::treedist::Normalization;

use crate::commands::{self, Context, EmbedSource, Mode};
use crate::config::{ConfigFile, EvalOpts, GenOpts, ModelOpts, TrainOpts, DEFAULT_SEED};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "exprembed", version, about = "Learn and evaluate embeddings of mathematical expressions")]
pub struct Cli {
    /// Seed for every random choice [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for generation, embedding and evaluation; 0 uses one
    /// per core. Training is always single-threaded [default: 0].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for outputs and run manifests.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// TOML file of settings; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate equivalent-expression pairs and held-out expression lists.
    GenData {
        /// Source expressions, one prefix expression per line. Random
        /// sources are drawn when omitted.
        #[arg(long)]
        sources: Option<PathBuf>,
        #[command(flatten)]
        gen: GenOpts,
    },
    /// Train a model on a pair file.
    Train {
        #[arg(long)]
        pairs: PathBuf,
        /// Pairs for the validation loss used by early stopping.
        #[arg(long)]
        val_pairs: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sememb")]
        mode: Mode,
        /// Checkpoint file name inside the output directory.
        #[arg(long, default_value = "model.ckpt")]
        checkpoint: String,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        train: TrainOpts,
    },
    /// Embed expressions into an index file.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Expression list to embed.
        #[arg(long, required_unless_present = "classes", conflicts_with = "classes")]
        exprs: Option<PathBuf>,
        /// Class file to embed; entries are labeled with their class.
        #[arg(long)]
        classes: Option<PathBuf>,
        /// Index file name inside the output directory.
        #[arg(long, default_value = "index.tsv")]
        index: String,
    },
    /// Evaluate embeddings or generation.
    Eval {
        #[command(subcommand)]
        kind: EvalCommand,
    },
    /// Decode equivalent candidates for one expression.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Prefix expression, e.g. `div sin x cos x`.
        #[arg(long)]
        expr: String,
        #[arg(long, default_value_t = 10)]
        beam: usize,
        #[arg(long, value_enum, default_value = "sememb")]
        mode: Mode,
    },
    /// Turn a class file into pairs of distinct members.
    ClassPairs {
        #[arg(long)]
        classes: PathBuf,
        /// Most pairs drawn per class.
        #[arg(long, default_value_t = CLASS_PAIR_CAP)]
        cap: usize,
        /// Pair file name inside the output directory.
        #[arg(long, default_value = "class-pairs.tsv")]
        out: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NormalizationArg {
    Recursive,
    TopLevel,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Normalization {
        match n {
            NormalizationArg::Recursive => Normalization::Recursive,
            NormalizationArg::TopLevel => Normalization::TopLevel,
        }
    }
}

fn named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Mean score_k of a labeled index.
    Scorek {
        #[arg(long)]
        index: PathBuf,
        /// Neighbors considered [default: 5].
        #[arg(long)]
        k: Option<usize>,
        /// Split the index must hold: train, validation, seen or unseen.
        #[arg(long)]
        split: Option<ClassSplit>,
    },
    /// Embedding algebra: nearest entry to v(x1) - v(y1) + v(y2).
    Algebra {
        #[arg(long)]
        index: PathBuf,
        /// Lines of `x1<TAB>y1<TAB>y2[<TAB>x2]`.
        #[arg(long)]
        queries: PathBuf,
    },
    /// Tree edit distance from queries to the neighbors each embedder finds.
    Distance {
        /// An embedder as NAME=INDEX; repeat to compare several.
        #[arg(long = "embedder", value_parser = named_path, required = true)]
        embedders: Vec<(String, PathBuf)>,
        /// Query expressions, each present in every index.
        #[arg(long)]
        queries: PathBuf,
        /// Neighbors compared per query [default: 5].
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long, value_enum, default_value = "recursive")]
        normalization: NormalizationArg,
    },
    /// Generation accuracy at several beam sizes.
    Generation {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        exprs: PathBuf,
        /// Beam sizes, comma separated [default: 1,10,50].
        #[arg(long, value_delimiter = ',')]
        beam: Option<Vec<usize>>,
        /// Longest generated expression in tokens [default: the model's].
        #[arg(long)]
        max_decode_len: Option<usize>,
        #[arg(long, value_enum, default_value = "sememb")]
        mode: Mode,
    },
    /// 2-D PCA scatter of an index as CSV and SVG.
    Pca {
        #[arg(long)]
        index: PathBuf,
        /// Output name without extension.
        #[arg(long, default_value = "pca")]
        stem: String,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref().map(ConfigFile::load).transpose()?.unwrap_or_default();
    let ctx = Context {
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        threads: cli.threads.or(config.threads).unwrap_or(0),
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::GenData { sources, gen } => {
            let out = commands::gen_data(&ctx, sources.as_deref(), gen.or(config.gen))?;
            println!(
                "{} training pairs, {} validation pairs, {} validation and {} test expressions",
                out.split.train.len(),
                out.val_pairs.len(),
                out.split.val.len(),
                out.split.test.len()
            );
        }
        Command::Train { pairs, val_pairs, mode, checkpoint, model, train } => {
            let out = commands::train_model(
                &ctx,
                &pairs,
                val_pairs.as_deref(),
                mode,
                model.or(config.model),
                train.or(config.train),
                &checkpoint,
            )?;
            let best = out.report.best_val_loss.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            println!("{} steps, best validation loss {best}, wrote {}", out.report.steps, out.files[0].display());
        }
        Command::Embed { checkpoint, exprs, classes, index } => {
            let source = match (&exprs, &classes) {
                (Some(p), None) => EmbedSource::Exprs(p),
                (None, Some(p)) => EmbedSource::Classes(p),
                _ => return Err(Error::Usage("give exactly one of --exprs and --classes".into())),
            };
            let idx = commands::embed(&ctx, &checkpoint, source, &index)?;
            println!("{} entries of dimension {}", idx.len(), idx.dim());
        }
        Command::Eval { kind } => run_eval(&ctx, kind, config.eval)?,
        Command::Infer { checkpoint, expr, beam, mode } => {
            let e: Expr = expr.parse().map_err(|err| Error::Usage(format!("bad expression `{expr}`: {err}")))?;
            let r = commands::infer(&ctx, &checkpoint, &e, beam, mode)?;
            println!("rank\tlog_prob\toutcome\texpression\tinfix");
            for (i, (e, lp, outcome)) in r.beams.iter().enumerate() {
                let (prefix, infix) =
                    e.as_ref().map_or(("-".to_string(), "-".to_string()), |e| (e.to_string(), e.infix().to_string()));
                println!("{}\t{lp:.4}\t{outcome:?}\t{prefix}\t{infix}", i + 1);
            }
        }
        Command::ClassPairs { classes, cap, out } => {
            let pairs = commands::class_pairs(&ctx, &classes, cap, &out)?;
            println!("{} pairs", pairs.len());
        }
    }
    Ok(())
}

fn run_eval(ctx: &Context, kind: EvalCommand, defaults: EvalOpts) -> Result<()> {
    match kind {
        EvalCommand::Scorek { index, k, split } => {
            let k = k.or(defaults.k).unwrap_or(5);
            let (_, text) = commands::eval_scorek(ctx, &index, k, split)?;
            print!("{text}");
        }
        EvalCommand::Algebra { index, queries } => {
            commands::eval_algebra(ctx, &index, &queries)?;
        }
        EvalCommand::Distance { embedders, queries, top_n, normalization } => {
            let top_n = top_n.or(defaults.top_n).unwrap_or(5);
            let r = commands::eval_distance(ctx, &embedders, &queries, top_n, normalization.into())?;
            println!("cases\t{}", r.cases());
            for (i, name) in r.embedders.iter().enumerate() {
                println!("{name}\traw {}\tnormalized {}", r.raw_wins[i], r.normalized_wins[i]);
            }
            println!("ties\traw {}\tnormalized {}", r.raw_ties, r.normalized_ties);
        }
        EvalCommand::Generation { checkpoint, exprs, beam, max_decode_len, mode } => {
            let beams = beam.or(defaults.beam).unwrap_or_else(|| vec![1, 10, 50]);
            commands::eval_generation(
                ctx,
                &checkpoint,
                &exprs,
                &beams,
                max_decode_len.or(defaults.max_decode_len),
                mode,
            )?;
        }
        EvalCommand::Pca { index, stem } => {
            let points = commands::eval_pca(ctx, &index, &stem)?;
            println!("{} points written to {}.csv and {}.svg", points.len(), stem, stem);
        }
    }
    Ok(())
}
