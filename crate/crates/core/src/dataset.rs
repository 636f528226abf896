//! Pair datasets of equivalent expressions, class datasets, splits and
//! pair explosion.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{validate, Expr, ValidateOptions, Violation};
use crate::rewrite::{generate_equivalents, is_nan_producing, GenConfig, Rule};

/// How a pair dataset was produced.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairMetadata {
    pub seed: Option<u64>,
    pub rules: Vec<Rule>,
    pub max_ops: Option<usize>,
    pub sources: usize,
}

/// Input/output examples. Expressions are stored as trees; their canonical
/// prefix form is the on-disk and model-facing encoding.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairDataset {
    pub examples: Vec<(Expr, Expr)>,
    pub meta: PairMetadata,
}

impl PairDataset {
    pub fn new(examples: Vec<(Expr, Expr)>) -> Self {
        PairDataset { examples, meta: PairMetadata::default() }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Distinct expressions on either side, in order of first occurrence.
    pub fn expressions(&self) -> Vec<Expr> {
        let mut seen = BTreeSet::new();
        self.examples.iter().flat_map(|(a, b)| [a, b]).filter(|e| seen.insert(*e)).cloned().collect()
    }

    /// `true` when every `(a, b)` has a matching `(b, a)`, counting
    /// multiplicity.
    pub fn is_swap_closed(&self) -> bool {
        let mut counts: BTreeMap<(&Expr, &Expr), isize> = BTreeMap::new();
        for (a, b) in &self.examples {
            *counts.entry((a, b)).or_default() += 1;
            *counts.entry((b, a)).or_default() -= 1;
        }
        counts.values().all(|&c| c == 0)
    }

    /// Indices of examples that fail validation, with the violations of
    /// input and output.
    pub fn invalid_examples(&self, opts: &ValidateOptions) -> Vec<(usize, Vec<Violation>)> {
        self.examples
            .iter()
            .enumerate()
            .filter_map(|(i, (a, b))| {
                let mut v = validate(a, opts).err().unwrap_or_default();
                v.extend(validate(b, opts).err().unwrap_or_default());
                (!v.is_empty()).then_some((i, v))
            })
            .collect()
    }
}

/// Derives an independent stream seed for item `index`.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Both orientations of every pair between `source` and up to
/// `max_per_source` of its generated equivalents. When more are available a
/// seeded subset is kept, so the result depends only on the arguments.
pub fn pairs_for_source(
    source: &Expr,
    index: usize,
    cfg: &GenConfig,
    max_per_source: usize,
    seed: u64,
) -> Vec<(Expr, Expr)> {
    let opts = ValidateOptions::training();
    if validate(source, &opts).is_err() || is_nan_producing(source, &cfg.oracle) {
        return Vec::new();
    }
    let mut equivalents: Vec<Expr> = generate_equivalents(source, cfg).into_iter().collect();
    if equivalents.len() > max_per_source {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, index as u64));
        equivalents.shuffle(&mut rng);
        equivalents.truncate(max_per_source);
        equivalents.sort();
    }
    equivalents.into_iter().flat_map(|e| [(source.clone(), e.clone()), (e, source.clone())]).collect()
}

/// Concatenates per-source pair lists, dropping repeated pairs.
pub fn merge_pairs(per_source: impl IntoIterator<Item = Vec<(Expr, Expr)>>) -> Vec<(Expr, Expr)> {
    let mut seen = BTreeSet::new();
    per_source.into_iter().flatten().filter(|p| seen.insert(p.clone())).collect()
}

/// Builds a swap-closed pair dataset from source expressions.
pub fn build_pair_dataset(sources: &[Expr], cfg: &GenConfig, max_per_source: usize, seed: u64) -> PairDataset {
    let per_source = sources.iter().enumerate().map(|(i, s)| pairs_for_source(s, i, cfg, max_per_source, seed));
    PairDataset {
        examples: merge_pairs(per_source),
        meta: PairMetadata {
            seed: Some(seed),
            rules: cfg.rules.clone(),
            max_ops: Some(cfg.max_ops),
            sources: sources.len(),
        },
    }
}

/// Autoencoder pairs `(e, e)` for every distinct expression of `pairs`.
pub fn make_identity_pairs(pairs: &PairDataset) -> PairDataset {
    PairDataset {
        examples: pairs.expressions().into_iter().map(|e| (e.clone(), e)).collect(),
        meta: pairs.meta.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub val_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: PairDataset,
    pub val: Vec<Expr>,
    pub test: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("corpus has {available} distinct expressions, the split needs more than {needed}")]
    InsufficientCorpus { needed: usize, available: usize },
}

/// Holds out single expressions for validation and test. Training pairs
/// that mention a held-out expression are dropped, so no expression
/// appears in more than one part.
pub fn split_dataset(pairs: &PairDataset, spec: &SplitSpec) -> Result<Split, DatasetError> {
    let mut all = pairs.expressions();
    let needed = spec.val_size + spec.test_size;
    if all.len() <= needed {
        return Err(DatasetError::InsufficientCorpus { needed, available: all.len() });
    }
    all.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    all.shuffle(&mut rng);
    let test = all[spec.val_size..needed].to_vec();
    let val = all[..spec.val_size].to_vec();
    let held: BTreeSet<&Expr> = all[..needed].iter().collect();
    let examples = pairs.examples.iter().filter(|(a, b)| !held.contains(a) && !held.contains(b)).cloned().collect();
    Ok(Split { train: PairDataset { examples, meta: pairs.meta.clone() }, val, test })
}

/// Role of a class dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ClassSplit {
    #[default]
    Train,
    Validation,
    SeenEqClass,
    UnseenEqClass,
}

impl fmt::Display for ClassSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassSplit::Train => "train",
            ClassSplit::Validation => "validation",
            ClassSplit::SeenEqClass => "seen",
            ClassSplit::UnseenEqClass => "unseen",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown class split `{0}` (expected train, validation, seen or unseen)")]
pub struct UnknownSplit(pub String);

impl FromStr for ClassSplit {
    type Err = UnknownSplit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "train" => ClassSplit::Train,
            "validation" | "val" => ClassSplit::Validation,
            "seen" | "seeneqclass" => ClassSplit::SeenEqClass,
            "unseen" | "unseeneqclass" => ClassSplit::UnseenEqClass,
            _ => return Err(UnknownSplit(s.to_string())),
        })
    }
}

/// Expressions partitioned into classes of mutually equivalent members.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EqClassDataset {
    pub classes: BTreeMap<String, Vec<Expr>>,
    pub split: ClassSplit,
}

impl EqClassDataset {
    /// `(class id, member)` for every member, in class then member order.
    pub fn members(&self) -> impl Iterator<Item = (&str, &Expr)> {
        self.classes.iter().flat_map(|(id, members)| members.iter().map(move |m| (id.as_str(), m)))
    }
}

/// Default cap on pairs taken from one class.
pub const CLASS_PAIR_CAP: usize = 100_000;

/// All ordered pairs of distinct members within each class, or a seeded
/// uniform sample of `cap` of them when a class has more.
pub fn explode_class_pairs(classes: &EqClassDataset, cap: usize, seed: u64) -> PairDataset {
    let mut examples = Vec::new();
    for (ci, members) in classes.classes.values().enumerate() {
        let n = members.len();
        if n < 2 {
            continue;
        }
        let total = n * (n - 1);
        let pick = |k: usize| {
            let i = k / (n - 1);
            let j = k % (n - 1);
            let j = if j >= i { j + 1 } else { j };
            (members[i].clone(), members[j].clone())
        };
        if total <= cap {
            examples.extend((0..total).map(pick).filter(|(a, b)| a != b));
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, ci as u64));
            let mut chosen = index::sample(&mut rng, total, cap).into_vec();
            chosen.sort_unstable();
            examples.extend(chosen.into_iter().map(pick).filter(|(a, b)| a != b));
        }
    }
    PairDataset { examples, meta: PairMetadata { seed: Some(seed), ..Default::default() } }
}

/// Mean and standard deviation of operator counts and token lengths, in the
/// style of a corpus statistics table.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorpusStats {
    pub count: usize,
    pub operators_mean: f64,
    pub operators_sd: f64,
    pub length_mean: f64,
    pub length_sd: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

pub fn corpus_stats<'a>(exprs: impl IntoIterator<Item = &'a Expr>) -> CorpusStats {
    let (ops, lens): (Vec<f64>, Vec<f64>) =
        exprs.into_iter().map(|e| (e.count_operators() as f64, e.to_prefix().len() as f64)).unzip();
    let (operators_mean, operators_sd) = mean_sd(&ops);
    let (length_mean, length_sd) = mean_sd(&lens);
    CorpusStats { count: ops.len(), operators_mean, operators_sd, length_mean, length_sd }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    #[test]
    fn tan_source_is_bidirectional() {
        let cfg = GenConfig { rules: vec![Rule::TrigSimp], ..Default::default() };
        let d = build_pair_dataset(&[p("div sin x cos x")], &cfg, 8, 1);
        assert_eq!(d.examples, vec![(p("div sin x cos x"), p("tan x")), (p("tan x"), p("div sin x cos x"))]);
        assert!(d.is_swap_closed());
    }

    #[test]
    fn unproductive_source_and_duplicates() {
        let cfg = GenConfig { rules: vec![Rule::TrigSimp], ..Default::default() };
        assert!(build_pair_dataset(&[p("x")], &cfg, 8, 1).is_empty());
        let d = build_pair_dataset(&[p("div sin x cos x"), p("div sin x cos x")], &cfg, 8, 1);
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn max_per_source() {
        let cfg = GenConfig { rules: Rule::all(), max_ops: 10, ..Default::default() };
        let src = p("add pow sin x INT+ 2 mul INT+ 2 sinh x");
        let all = build_pair_dataset(core::slice::from_ref(&src), &cfg, 100, 3);
        let some = build_pair_dataset(core::slice::from_ref(&src), &cfg, 2, 3);
        assert!(all.len() > 4, "{}", all.len());
        assert_eq!(some.len(), 4);
        assert_eq!(some, build_pair_dataset(&[src], &cfg, 2, 3));
    }

    #[test]
    fn identity_pairs() {
        let (a, b, c) = (p("x"), p("sin x"), p("cos x"));
        let d = PairDataset::new(vec![(a.clone(), b.clone()), (a.clone(), c.clone())]);
        let id = make_identity_pairs(&d);
        assert_eq!(id.examples, vec![(a.clone(), a), (b.clone(), b), (c.clone(), c)]);
        assert!(make_identity_pairs(&PairDataset::default()).is_empty());
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let exprs: Vec<Expr> = (1..=10).map(|k| Expr::mul(Expr::int(k), Expr::x())).collect();
        let pairs: Vec<(Expr, Expr)> = exprs.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        let d = PairDataset::new(pairs);
        let spec = SplitSpec { val_size: 2, test_size: 3, seed: 9 };
        let s = split_dataset(&d, &spec).unwrap();
        assert_eq!((s.val.len(), s.test.len()), (2, 3));
        let train: BTreeSet<Expr> = s.train.expressions().into_iter().collect();
        assert!(s.val.iter().chain(&s.test).all(|e| !train.contains(e)));
        assert!(s.val.iter().all(|e| !s.test.contains(e)));
        assert_eq!(split_dataset(&d, &spec).unwrap(), s);
        let too_big = SplitSpec { val_size: 5, test_size: 5, seed: 0 };
        assert_eq!(split_dataset(&d, &too_big), Err(DatasetError::InsufficientCorpus { needed: 10, available: 10 }));
    }

    fn class_of(n: usize) -> EqClassDataset {
        let members = (0..n).map(|k| Expr::add(Expr::x(), Expr::int(k as i64))).collect();
        EqClassDataset { classes: BTreeMap::from([("c".to_string(), members)]), split: ClassSplit::Train }
    }

    #[test]
    fn explode() {
        assert_eq!(explode_class_pairs(&class_of(3), CLASS_PAIR_CAP, 0).len(), 6);
        assert_eq!(explode_class_pairs(&class_of(1), CLASS_PAIR_CAP, 0).len(), 0);
        let big = explode_class_pairs(&class_of(400), CLASS_PAIR_CAP, 0);
        assert_eq!(big.len(), 100_000);
        assert!(big.examples.iter().all(|(a, b)| a != b));
        let distinct: BTreeSet<_> = big.examples.iter().collect();
        assert_eq!(distinct.len(), 100_000);
    }

    #[test]
    fn split_names() {
        for s in [ClassSplit::Train, ClassSplit::Validation, ClassSplit::SeenEqClass, ClassSplit::UnseenEqClass] {
            assert_eq!(s.to_string().parse::<ClassSplit>(), Ok(s));
        }
        assert!("nope".parse::<ClassSplit>().is_err());
    }

    #[test]
    fn stats() {
        let s = corpus_stats(&[p("sin x"), p("div sin x cos x")]);
        assert_eq!(s.count, 2);
        assert_eq!(s.operators_mean, 2.0);
        assert_eq!(s.operators_sd, 1.0);
        assert_eq!(s.length_mean, 3.5);
    }
}
