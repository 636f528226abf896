//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use exprembed::commands::{self, Context, Mode};
use exprembed::config::{GenOpts, ModelOpts, TrainOpts};
use exprembed::formats::write_index;
use exprembed_core::embed::{pca_2d, symmetric_eigen, AnalogyQuery, EmbeddingIndex, IndexEntry};
use exprembed_core::expr::random::{random_expr, RandomExprConfig};
use exprembed_core::expr::{eval_numeric, parse_prefix, Expr, Operator};
use exprembed_core::neural::{
    encoder_input, evaluate_generation, grad_check, train, BeamOutcome, Example, GenMode, ModelConfig, SeqModel,
    TrainConfig, Vocabulary,
};
use exprembed_core::rewrite::{
    apply_rule, check_equivalence, generate_equivalents, rule_outputs, simplify_basic, GenConfig, OracleConfig, Rule,
    Verdict,
};
use exprembed_core::treedist::{distance_scenarios, tree_edit_distance, EditCosts, Normalization};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn p(s: &str) -> Expr {
    s.parse().unwrap_or_else(|e| panic!("`{s}`: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn golden_rewrites() -> Outcome {
    let start = Instant::now();
    let rows = [
        (Rule::SimplifyBasic, "add pow sin x INT+ 2 pow cos x INT+ 2", "INT+ 1"),
        (Rule::Expand, "pow add x INT+ 1 INT+ 2", "add add pow x INT+ 2 mul INT+ 2 x INT+ 1"),
        (Rule::Factor, "add add pow x INT+ 2 mul INT+ 5 x INT+ 6", "mul add x INT+ 2 add x INT+ 3"),
        (Rule::Cancel, "div add pow x INT+ 3 mul INT+ 2 x x", "add pow x INT+ 2 INT+ 2"),
        (Rule::TrigSimp, "mul sin x cot x", "cos x"),
        (Rule::ExpandLog, "ln pow x INT+ 2", "mul INT+ 2 ln x"),
        (Rule::LogCombine, "add ln x ln INT+ 2", "ln mul INT+ 2 x"),
        (Rule::RewriteTrig(Operator::Cos), "sin x", "cos add x neg div pi INT+ 2"),
        (
            Rule::RewriteHyp(Operator::Tanh),
            "sinh x",
            "mul mul INT+ 2 tanh div x INT+ 2 pow add INT+ 1 neg pow tanh div x INT+ 2 INT+ 2 INT- 1",
        ),
    ];
    for (rule, input, expected) in rows {
        let got = apply_rule(&p(input), rule).map(|e| simplify_basic(&e));
        let want = simplify_basic(&p(expected));
        ensure(got.as_ref() == Some(&want), || format!("{rule} on `{input}`: got {got:?}, want `{want}`"))?;
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("{} rows", rows.len()))
}

fn rewrite_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let cfg = RandomExprConfig::default();
    // Checked with a different seed and more samples than generation uses.
    let checker = OracleConfig { seed: 0xc0ffee, sample_count: 64, ..Default::default() };
    let gen = GenConfig { depth: 2, ..Default::default() };
    let (mut generated, mut raw, mut inconclusive) = (0, 0, 0);
    for _ in 0..1000 {
        let e = random_expr(&mut rng, &cfg);
        let mut outputs: Vec<Expr> = generate_equivalents(&e, &gen).into_iter().collect();
        generated += outputs.len();
        for rule in Rule::all() {
            let o = rule_outputs(&e, rule);
            raw += o.len();
            outputs.extend(o);
        }
        for out in outputs {
            match check_equivalence(&e, &out, &checker).verdict {
                Verdict::NotEquivalent => return Err(format!("`{e}` => `{out}` is not equivalent")),
                Verdict::Inconclusive => inconclusive += 1,
                Verdict::Equivalent => {}
            }
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("{generated} generated and {raw} raw rule outputs, 0 not equivalent, {inconclusive} inconclusive"))
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = RandomExprConfig { min_ops: 0, max_ops: 12, require_var: false, ..Default::default() };
    for _ in 0..10_000 {
        let e = random_expr(&mut rng, &cfg);
        let tokens = e.to_prefix();
        ensure(parse_prefix(&tokens).as_ref() == Ok(&e), || format!("`{e}` does not round trip"))?;
        ensure(tokens.to_string().parse::<Expr>().as_ref() == Ok(&e), || format!("`{e}` text does not round trip"))?;
    }
    within(start, Duration::from_secs(5))?;
    Ok("10000 expressions".into())
}

/// Ordered forest edit distance by the textbook recursion on rightmost
/// roots, memoized on the forests themselves.
struct ForestDistance<'a> {
    memo: HashMap<(Vec<*const Expr>, Vec<*const Expr>), usize>,
    _trees: std::marker::PhantomData<&'a Expr>,
}

fn label(e: &Expr) -> String {
    match e {
        Expr::Op(op, _) => format!("op:{op}"),
        leaf => format!("leaf:{leaf}"),
    }
}

fn children(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Op(_, c) => c.iter().collect(),
        _ => Vec::new(),
    }
}

impl<'a> ForestDistance<'a> {
    fn size(f: &[&Expr]) -> usize {
        f.iter().map(|t| t.node_count()).sum()
    }

    fn dist(&mut self, f: &[&'a Expr], g: &[&'a Expr]) -> usize {
        if f.is_empty() || g.is_empty() {
            return Self::size(f) + Self::size(g);
        }
        let key = (f.iter().map(|t| *t as *const Expr).collect(), g.iter().map(|t| *t as *const Expr).collect());
        if let Some(&d) = self.memo.get(&key) {
            return d;
        }
        let (v, f_rest) = f.split_last().expect("non-empty");
        let (w, g_rest) = g.split_last().expect("non-empty");
        let mut f_minus_v = f_rest.to_vec();
        f_minus_v.extend(children(v));
        let mut g_minus_w = g_rest.to_vec();
        g_minus_w.extend(children(w));
        let delete = self.dist(&f_minus_v, g) + 1;
        let insert = self.dist(f, &g_minus_w) + 1;
        let relabel =
            self.dist(&children(v), &children(w)) + self.dist(f_rest, g_rest) + usize::from(label(v) != label(w));
        let d = delete.min(insert).min(relabel);
        self.memo.insert(key, d);
        d
    }
}

fn ted_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = RandomExprConfig { min_ops: 0, max_ops: 5, require_var: false, ..Default::default() };
    let mut trees = BTreeSet::new();
    while trees.len() < 64 {
        let e = random_expr(&mut rng, &cfg);
        if e.node_count() <= 6 {
            trees.insert(e);
        }
    }
    let trees: Vec<Expr> = trees.into_iter().collect();
    let costs = EditCosts::default();
    let mut pairs = 0;
    for (i, a) in trees.iter().enumerate() {
        for b in &trees[i + 1..] {
            let mut reference = ForestDistance { memo: HashMap::new(), _trees: std::marker::PhantomData };
            let want = reference.dist(&[a], &[b]) as f64;
            let got = tree_edit_distance(a, b, &costs);
            ensure(got == want, || format!("d(`{a}`, `{b}`) = {got}, reference {want}"))?;
            pairs += 1;
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("{pairs} pairs of trees with at most 6 nodes"))
}

fn random_constant(rng: &mut ChaCha8Rng) -> Expr {
    let cfg = RandomExprConfig { min_ops: 0, max_ops: 2, var_prob: 0.0, require_var: false, ..Default::default() };
    loop {
        let c = random_expr(rng, &cfg);
        if c.is_constant() {
            return c;
        }
    }
}

fn constant_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = RandomExprConfig::with_ops(1, 4);
    let mut recursive_zero = 0;
    for _ in 0..500 {
        let f = random_expr(&mut rng, &cfg);
        let a = loop {
            let a = random_constant(&mut rng);
            if eval_numeric(&a, 1.0).is_some_and(|v| v.is_finite() && v != 0.0) {
                break a;
            }
        };
        let b = random_constant(&mut rng);
        let g = Expr::add(Expr::mul(a, f.clone()), b);
        let top =
            distance_scenarios(&g, &[("f".into(), f.clone())], Normalization::TopLevel).map_err(|e| e.to_string())?;
        let d = top.candidates[0].normalized;
        ensure(d == 0.0, || format!("normalized distance between `{g}` and `{f}` is {d}"))?;
        let rec = distance_scenarios(&g, &[("f".into(), f)], Normalization::Recursive).map_err(|e| e.to_string())?;
        recursive_zero += usize::from(rec.candidates[0].normalized == 0.0);
    }
    Ok(format!("500 triples at distance 0 (top-level); recursive mode also 0 on {recursive_zero}/500"))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig {
        d_model: 16,
        n_heads: 2,
        n_encoder_layers: 1,
        n_decoder_layers: 1,
        d_ff: 32,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    // A step of 1e-4 straddles a ReLU kink in seed 1's feed-forward layer.
    for seed in [1, 2, 3] {
        let r = grad_check(&cfg, seed, 1e-5);
        ensure(r.max_relative_error < 1e-3, || format!("seed {seed}: {:?}", r.tensors))?;
        worst = worst.max(r.max_relative_error);
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("max relative error {worst:.2e} over seeds 1, 2, 3"))
}

static OVERFIT_MODEL: OnceLock<SeqModel> = OnceLock::new();

fn trainability() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exprs = BTreeSet::new();
    while exprs.len() < 32 {
        exprs.insert(random_expr(&mut rng, &RandomExprConfig::with_ops(1, 3)));
    }
    let exprs: Vec<Expr> = exprs.into_iter().collect();
    let vocab = Vocabulary::new(exprs.iter().flat_map(|e| e.to_prefix().into_inner()));
    let cfg = ModelConfig { learning_rate: 1e-3, dropout: 0.0, seed: 7, ..Default::default() };
    ensure(cfg.d_model == 32 && cfg.n_encoder_layers == 2 && cfg.n_decoder_layers == 2, || {
        "unexpected defaults".into()
    })?;
    let mut model = SeqModel::new(cfg, vocab).map_err(|e| e.to_string())?;
    let examples: Vec<Example> = exprs
        .iter()
        .map(|e| {
            let ids = model.vocab.encode(e).expect("in vocabulary");
            Example { src: ids.clone(), tgt: ids }
        })
        .collect();
    let tc = TrainConfig { max_steps: 2000, eval_every: 500, token_budget: 256, ..Default::default() };
    let report = train(&mut model, &examples, &[], &tc, &mut |_| {}).map_err(|e| e.to_string())?;
    let oracle = OracleConfig::default();
    let structural = evaluate_generation(&model, &exprs, 1, 64, &oracle, GenMode::StructEmb);
    ensure(structural.accuracy >= 0.95, || {
        format!("StructEmb accuracy {} after {} steps", structural.accuracy, report.steps)
    })?;

    // The model now echoes its input, which SemEmb must not count.
    let sem1 = evaluate_generation(&model, &exprs, 1, 64, &oracle, GenMode::SemEmb);
    let echoed =
        sem1.results.iter().filter(|r| r.beams.first().is_some_and(|b| b.2 == BeamOutcome::SameAsInput)).count();
    ensure(echoed > 0, || "no echoed beam to exclude".into())?;
    for r in &sem1.results {
        let top = r.beams.first().map(|b| b.2);
        ensure(!(top == Some(BeamOutcome::SameAsInput) && r.success), || format!("echo of `{}` counted", r.input))?;
    }
    // A success may come from any beam, not only the first.
    let sem5 = evaluate_generation(&model, &exprs, 5, 64, &oracle, GenMode::SemEmb);
    let mut deeper = 0;
    for r in &sem5.results {
        let any = r.beams.iter().any(|b| b.2 == BeamOutcome::Equivalent);
        ensure(r.success == any, || format!("`{}`: success {} but beams {:?}", r.input, r.success, r.beams))?;
        deeper += usize::from(r.success && r.beams[0].2 != BeamOutcome::Equivalent);
    }
    within(start, Duration::from_secs(300))?;
    let _ = OVERFIT_MODEL.set(model);
    Ok(format!(
        "StructEmb accuracy {:.3} in {} steps; SemEmb beam 1 {:.3} ({echoed} echoes excluded), beam 5 {:.3} ({deeper} found below the top beam)",
        structural.accuracy, report.steps, sem1.accuracy, sem5.accuracy
    ))
}

fn beam_contracts() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let untrained = {
        let exprs: Vec<Expr> = (0..20).map(|_| random_expr(&mut rng, &RandomExprConfig::default())).collect();
        let vocab = Vocabulary::new(exprs.iter().flat_map(|e| e.to_prefix().into_inner()));
        SeqModel::new(ModelConfig { d_model: 16, n_heads: 2, d_ff: 32, seed: 8, ..Default::default() }, vocab)
            .map_err(|e| e.to_string())?
    };
    let mut models = vec![("untrained", &untrained)];
    if let Some(m) = OVERFIT_MODEL.get() {
        models.push(("overfit", m));
    }
    let max_len = 24;
    for (name, model) in &models {
        let n = model.vocab.len();
        for case in 0..100 {
            let src: Vec<usize> = (0..rng.gen_range(1..=10)).map(|_| rng.gen_range(3..n)).collect();
            let greedy = model.greedy_decode(&src, max_len).map_err(|e| e.to_string())?;
            let mut tops = Vec::new();
            for b in [1, 5, 10] {
                let hyps = model.beam_search(&src, b, max_len).map_err(|e| e.to_string())?;
                ensure(!hyps.is_empty() && hyps.len() <= b, || {
                    format!("{name} #{case}: {} beams for B={b}", hyps.len())
                })?;
                ensure(hyps.windows(2).all(|w| w[0].log_prob >= w[1].log_prob), || {
                    format!("{name} #{case}: B={b} unsorted")
                })?;
                if b == 1 {
                    ensure(hyps == vec![greedy.clone()], || format!("{name} #{case}: beam 1 differs from greedy"))?;
                }
                tops.push(hyps[0].log_prob);
            }
            ensure(tops[0] <= tops[1] && tops[1] <= tops[2], || format!("{name} #{case}: top-1 log-probs {tops:?}"))?;
        }
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("100 inputs on each of {} models", models.len()))
}

/// One-hot or two-hot integer vector.
fn hot(dim: usize, on: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for &i in on {
        v[i] = 1.0;
    }
    v
}

/// `score_k` by exhaustive ranking, comparing cosines exactly through
/// `sign(dot) * dot² / |v|²` on integer vectors.
fn brute_score(entries: &[(Option<String>, Vec<i64>)], q: usize, k: usize) -> Option<f64> {
    let class = entries[q].0.as_ref()?;
    let members: Vec<usize> = (0..entries.len()).filter(|&i| i != q && entries[i].0.as_ref() == Some(class)).collect();
    if members.is_empty() {
        return None;
    }
    let key = |i: usize| -> (i128, i128) {
        let dot: i64 = entries[i].1.iter().zip(&entries[q].1).map(|(a, b)| a * b).sum();
        let n2: i64 = entries[i].1.iter().map(|a| a * a).sum();
        (i128::from(dot.signum()) * i128::from(dot) * i128::from(dot), i128::from(n2))
    };
    let mut others: Vec<usize> = (0..entries.len()).filter(|&i| i != q).collect();
    others.sort_by(|&a, &b| {
        let ((na, da), (nb, db)) = (key(a), key(b));
        (nb * da).cmp(&(na * db)).then(a.cmp(&b))
    });
    let hits = others.iter().take(k).filter(|i| members.contains(i)).count();
    Some(hits as f64 / k.min(members.len()) as f64)
}

fn scorek_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let k = 5;
    let (mut indices, mut queries, mut skipped, mut small) = (0, 0, 0, 0);
    for round in 0..300 {
        let classes = rng.gen_range(2..6);
        let dim = classes + 2;
        let mut entries: Vec<(Option<String>, Vec<i64>)> = Vec::new();
        for c in 0..classes {
            // Sizes 1 and 2..5 exercise the skip rule and |c| < k.
            for _ in 0..rng.gen_range(1..9) {
                let roll: f64 = rng.gen();
                let on: Vec<usize> = if roll < 0.6 {
                    vec![c]
                } else if roll < 0.8 {
                    vec![rng.gen_range(0..dim)]
                } else {
                    let o = (c + rng.gen_range(1..dim)) % dim;
                    vec![c, o]
                };
                let mut v = vec![0; dim];
                on.iter().for_each(|&i| v[i] = 1);
                entries.push((Some(format!("c{c}")), v));
            }
        }
        for _ in 0..rng.gen_range(0..4) {
            let mut v = vec![0; dim];
            v[rng.gen_range(0..dim)] = 1;
            entries.push((None, v));
        }
        entries.shuffle(&mut rng);
        let index = EmbeddingIndex::new(
            entries
                .iter()
                .enumerate()
                .map(|(id, (class, v))| IndexEntry {
                    id,
                    class: class.clone(),
                    expr: Expr::int(id as i64),
                    vector: v.iter().map(|&x| x as f64).collect(),
                })
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let labeled: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].0.is_some()).collect();
        let (mut total, mut scored) = (0.0, 0);
        for &q in &labeled {
            let want = brute_score(&entries, q, k);
            let got = index.score_k(q, k).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("round {round}, query {q}: score {got:?}, brute force {want:?}"))?;
            match want {
                Some(s) => {
                    total += s;
                    scored += 1;
                    let class = entries[q].0.as_ref();
                    small += usize::from(entries.iter().filter(|e| e.0.as_ref() == class).count() - 1 < k);
                }
                None => skipped += 1,
            }
        }
        queries += labeled.len();
        match index.mean_score_k(k, &labeled) {
            Ok(m) => {
                let want = total / scored as f64;
                ensure(m.mean == want && m.scored == scored, || format!("round {round}: mean {} vs {want}", m.mean))?;
            }
            Err(_) => ensure(scored == 0, || format!("round {round}: mean failed with {scored} scored"))?,
        }
        indices += 1;
    }

    // Hand case: class a has 3 members (|c| = 2 < k), b is a singleton.
    let hand = [
        (Some("a"), hot(3, &[0])),
        (Some("a"), hot(3, &[0])),
        (Some("a"), hot(3, &[1])),
        (Some("b"), hot(3, &[0])),
        (None, hot(3, &[0, 1])),
    ];
    let index = EmbeddingIndex::new(
        hand.iter()
            .enumerate()
            .map(|(id, (c, v))| IndexEntry {
                id,
                class: c.map(String::from),
                expr: Expr::int(id as i64),
                vector: v.clone(),
            })
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let m = index.mean_score_k(5, &[0, 1, 2, 3]).map_err(|e| e.to_string())?;
    ensure(m.skipped == 1 && m.scored == 3 && m.mean == 1.0, || format!("hand case: {m:?}"))?;
    // With k = 1 the first query's nearest is the other a at cosine 1.
    ensure(index.score_k(0, 1) == Ok(Some(1.0)), || "hand case k=1".into())?;
    ensure(index.score_k(2, 1) == Ok(Some(0.0)), || "hand case k=1, id 2".into())?;
    Ok(format!("{indices} planted indices, {queries} queries ({skipped} skipped, {small} with |c| < k) match exactly"))
}

fn algebra_index(rng: &mut ChaCha8Rng) -> (Vec<IndexEntry>, Vec<(usize, usize)>) {
    let bases = ["x", "sin x", "exp x", "ln x", "cosh x"];
    let transforms: [fn(Expr) -> Expr; 4] =
        [|f| f, |f| Expr::mul(Expr::int(2), f), |f| Expr::add(f, Expr::int(1)), |f| Expr::pow(f, Expr::int(2))];
    // Two spare dimensions for the near duplicates added later.
    let dim = bases.len() + transforms.len() + 2;
    let mut entries = Vec::new();
    let mut cells = Vec::new();
    for (i, b) in bases.iter().enumerate() {
        for (t, tf) in transforms.iter().enumerate() {
            let mut v = hot(dim, &[i, bases.len() + t]);
            v.iter_mut().for_each(|x| *x += rng.gen_range(-0.05..0.05));
            entries.push(IndexEntry { id: entries.len(), class: None, expr: tf(p(b)), vector: v });
            cells.push((i, t));
        }
    }
    (entries, cells)
}

fn embedding_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut entries, cells) = algebra_index(&mut rng);
    let at = |i: usize, t: usize| cells.iter().position(|&c| c == (i, t)).expect("cell");
    let mut cases = Vec::new();
    while cases.len() < 20 {
        let (i, j) = (rng.gen_range(0..5), rng.gen_range(0..5));
        let (a, b) = (rng.gen_range(0..4), rng.gen_range(0..4));
        if i != j && a != b {
            cases.push((at(i, a), at(j, a), at(j, b), at(i, b)));
        }
    }
    let index = EmbeddingIndex::new(entries.clone()).map_err(|e| e.to_string())?;
    for &(x1, y1, y2, x2) in &cases {
        let expected = Some(index.get(x2).expect("id").expr.clone());
        let r = index.embedding_algebra(&AnalogyQuery { x1, y1, y2, expected }).map_err(|e| e.to_string())?;
        ensure(r.correct == Some(true), || format!("case ({x1},{y1},{y2}) predicted {} not {x2}", r.predicted))?;
    }

    // Traps where an input is the nearest entry unless excluded: each has
    // a near duplicate that should be returned instead.
    let twin = |entries: &mut Vec<IndexEntry>, of: usize, spare: usize, expr: &str| {
        let mut v = entries[of].vector.clone();
        let d = v.len();
        v[d - 1 - spare] = 0.3;
        entries.push(IndexEntry { id: entries.len(), class: None, expr: p(expr), vector: v });
        entries.len() - 1
    };
    let (s, t) = (at(1, 0), at(3, 2));
    let s_twin = twin(&mut entries, s, 0, "cos add x neg div pi INT+ 2");
    let t_twin = twin(&mut entries, t, 1, "add INT+ 1 ln x");
    let traps = [(at(0, 0), at(0, 0), s, s_twin), (t, at(2, 1), at(2, 1), t_twin)];
    let index = EmbeddingIndex::new(entries).map_err(|e| e.to_string())?;
    for &(x1, y1, y2, _) in &traps {
        let z: Vec<f64> = (0..index.dim())
            .map(|d| {
                index.get(x1).unwrap().vector[d] - index.get(y1).unwrap().vector[d] + index.get(y2).unwrap().vector[d]
            })
            .collect();
        let nearest = index.knn(&z, 1, &[]).map_err(|e| e.to_string())?[0].0;
        ensure([x1, y1, y2].contains(&nearest), || "trap is not live".into())?;
    }

    // The same queries through the command line.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_index(&dir.path().join("index.tsv"), &index, None).map_err(|e| e.to_string())?;
    let expr = |id: usize| index.get(id).expect("id").expr.to_string();
    let all: Vec<(usize, usize, usize, usize)> = cases.iter().chain(&traps).copied().collect();
    let queries: String =
        all.iter().map(|&(a, b, c, d)| format!("{}\t{}\t{}\t{}\n", expr(a), expr(b), expr(c), expr(d))).collect();
    fs::write(dir.path().join("queries.tsv"), queries).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_exprembed"))
        .current_dir(dir.path())
        .args(["eval", "algebra", "--index", "index.tsv", "--queries", "queries.tsv"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let table = fs::read_to_string(dir.path().join("algebra.tsv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> =
        table.lines().skip(1).filter(|l| !l.starts_with('#')).map(|l| l.split('\t').collect()).collect();
    ensure(rows.len() == all.len(), || format!("{} rows for {} queries", rows.len(), all.len()))?;
    for (row, &(a, b, c, d)) in rows.iter().zip(&all) {
        let predicted = row[4];
        ensure(![expr(a), expr(b), expr(c)].iter().any(|e| e == predicted), || {
            format!("query returned an input: {row:?}")
        })?;
        ensure(predicted == expr(d) && row[6] == "yes", || format!("CLI row {row:?}, expected {}", expr(d)))?;
    }
    let summary = format!("# accuracy {}/{}", all.len(), all.len());
    ensure(table.contains(&summary), || format!("missing `{summary}`"))?;
    Ok(format!("20 planted analogies correct; CLI answers all {} queries with x1, y1, y2 excluded", all.len()))
}

fn pca() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Rank-2 data: an affine plane in 6 dimensions.
    let (d, n) = (6, 40);
    let basis: Vec<[f64; 2]> = (0..d).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
    let offset: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            (0..d).map(|j| offset[j] + basis[j][0] * z[0] + basis[j][1] * z[1]).collect()
        })
        .collect();
    let coords = pca_2d(&points).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let full = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let flat = ((coords[i].0 - coords[j].0).powi(2) + (coords[i].1 - coords[j].1).powi(2)).sqrt();
            worst = worst.max((full - flat).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("rank-2 distance error {worst:e}"))?;

    let mut eig_err: f64 = 0.0;
    let mut proj_err: f64 = 0.0;
    for case in 0..50 {
        let m = rng.gen_range(2..7);
        let a = nalgebra::DMatrix::<f64>::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
        let sym = &a + a.transpose();
        let row_major: Vec<f64> = (0..m * m).map(|k| sym[(k / m, k % m)]).collect();
        let (values, vectors) = symmetric_eigen(&row_major, m);
        let oracle = nalgebra::SymmetricEigen::new(sym.clone());
        for (c, &lambda) in values.iter().enumerate() {
            let o = (0..m)
                .min_by(|&x, &y| {
                    (oracle.eigenvalues[x] - lambda).abs().total_cmp(&(oracle.eigenvalues[y] - lambda).abs())
                })
                .expect("m > 0");
            eig_err = eig_err.max((oracle.eigenvalues[o] - lambda).abs());
            let ours: Vec<f64> = (0..m).map(|r| vectors[r * m + c]).collect();
            let theirs: Vec<f64> = (0..m).map(|r| oracle.eigenvectors[(r, o)]).collect();
            let same = ours.iter().zip(&theirs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let flip = ours.iter().zip(&theirs).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            eig_err = eig_err.max(same.min(flip));
        }
        ensure(eig_err < 1e-8, || format!("matrix {case}: eigen error {eig_err:e}"))?;

        // PCA of random data against the oracle's leading eigenvectors.
        let (rows, cols) = (rng.gen_range(5..13), rng.gen_range(2..6));
        let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let x = nalgebra::DMatrix::from_fn(rows, cols, |r, c| data[r][c]);
        let mean = x.row_mean();
        let centered = nalgebra::DMatrix::from_fn(rows, cols, |r, c| x[(r, c)] - mean[c]);
        let cov = centered.transpose() * &centered / (rows as f64 - 1.0);
        let e = nalgebra::SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
        let ours = pca_2d(&data).map_err(|e| e.to_string())?;
        for (k, &o) in order.iter().take(2).enumerate() {
            let proj = &centered * e.eigenvectors.column(o);
            let mine: Vec<f64> = ours.iter().map(|c| if k == 0 { c.0 } else { c.1 }).collect();
            let same = mine.iter().zip(proj.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let flip = mine.iter().zip(proj.iter()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            proj_err = proj_err.max(same.min(flip));
        }
        ensure(proj_err < 1e-8, || format!("data {case}: projection error {proj_err:e}"))?;
    }
    Ok(format!(
        "rank-2 distance error {worst:.1e}; 50 matrices, eigen error {eig_err:.1e}, projection error {proj_err:.1e}"
    ))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_exprembed"))
        .current_dir(dir)
        .args(["--seed", "42", "--threads", "1"])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            fs::read(entry.path()).map_err(|e| e.to_string())?,
        );
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_cli(
            dir.path(),
            &["gen-data", "--random-sources", "200", "--max-ops", "3", "--val-size", "10", "--test-size", "10"],
        )?;
        run_cli(
            dir.path(),
            &[
                "train",
                "--pairs",
                "train.tsv",
                "--val-pairs",
                "val-pairs.tsv",
                "--max-steps",
                "100",
                "--eval-every",
                "25",
            ],
        )?;
        runs.push(snapshot(dir.path())?);
    }
    let names: Vec<&String> = runs[0].keys().collect();
    ensure(runs[0].keys().eq(runs[1].keys()), || "different file sets".into())?;
    for name in &names {
        ensure(runs[0][*name] == runs[1][*name], || format!("{name} differs between runs"))?;
    }
    ensure(names.iter().any(|n| *n == "model.ckpt"), || "no checkpoint".into())?;
    let ckpt = exprembed::io::sha256_hex(&runs[0]["model.ckpt"]);
    Ok(format!("{} artifacts identical, checkpoint sha256 {}", names.len(), &ckpt[..16]))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ctx = Context { seed: 42, threads: 0, out_dir: dir.path().to_path_buf() };
    let gen = GenOpts {
        random_sources: Some(800),
        max_ops: Some(3),
        source_max_ops: Some(3),
        val_size: Some(50),
        test_size: Some(50),
        ..Default::default()
    };
    let data = commands::gen_data(&ctx, None, gen).map_err(|e| e.to_string())?;
    let pairs = data.split.train.len();
    ensure((400..=700).contains(&pairs), || format!("{pairs} training pairs"))?;
    let all_small = data.split.train.examples.iter().all(|(a, b)| a.count_operators() <= 3 && b.count_operators() <= 3);
    ensure(all_small, || "pair over 3 operators".into())?;

    let model_opts = ModelOpts { learning_rate: Some(5e-4), ..Default::default() };
    let train_opts = TrainOpts { max_steps: Some(10_000), eval_every: Some(500), ..Default::default() };
    let out = commands::train_model(
        &ctx,
        &dir.path().join("train.tsv"),
        Some(&dir.path().join("val-pairs.tsv")),
        Mode::Sememb,
        model_opts,
        train_opts,
        "model.ckpt",
    )
    .map_err(|e| e.to_string())?;
    let model = out.model;

    let held_out = &data.split.test;
    let table =
        commands::generation_accuracy(&ctx, &model, held_out, &[1, 10], 64, Mode::Sememb).map_err(|e| e.to_string())?;
    let (b1, b10) = (table[0].accuracy, table[1].accuracy);
    ensure(b10 > b1 || b10 == 1.0, || format!("held-out accuracy beam 1 {b1:.3}, beam 10 {b10:.3}"))?;

    // Embedding geometry on held-out validation pairs.
    let checker = OracleConfig { seed: 0xe2e, ..Default::default() };
    let embed = |e: &Expr| -> Option<Vec<f64>> { model.embed(&encoder_input(&model.vocab.encode(e).ok()?)).ok() };
    let cos = |a: &[f64], b: &[f64]| exprembed_core::embed::cosine(a, b);
    let mut equivalent = Vec::new();
    for (a, b) in &data.val_pairs.examples {
        if check_equivalence(a, b, &checker).verdict == Verdict::Equivalent {
            if let (Some(u), Some(v)) = (embed(a), embed(b)) {
                equivalent.extend(cos(&u, &v));
            }
        }
    }
    let pool: Vec<Expr> = data.val_pairs.expressions().into_iter().chain(held_out.iter().cloned()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut unrelated = Vec::new();
    let mut tries = 0;
    while unrelated.len() < 200 && tries < 10_000 {
        tries += 1;
        let (a, b) = (pool.choose(&mut rng).expect("pool"), pool.choose(&mut rng).expect("pool"));
        if a != b && check_equivalence(a, b, &checker).verdict == Verdict::NotEquivalent {
            if let (Some(u), Some(v)) = (embed(a), embed(b)) {
                unrelated.extend(cos(&u, &v));
            }
        }
    }
    ensure(equivalent.len() >= 20 && unrelated.len() >= 100, || {
        format!("{} / {} pairs", equivalent.len(), unrelated.len())
    })?;
    let (me, mu) = (mean(&equivalent), mean(&unrelated));
    ensure(me - mu >= 0.05, || format!("cosine equivalent {me:.4} vs non-equivalent {mu:.4}"))?;
    within(start, Duration::from_secs(20 * 60))?;
    Ok(format!(
        "{pairs} pairs, {} steps; held-out accuracy beam 1 {b1:.3}, beam 10 {b10:.3}; cosine {me:.3} ({} equivalent) vs {mu:.3} ({} non-equivalent)",
        out.report.steps,
        equivalent.len(),
        unrelated.len()
    ))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("golden rewrites", golden_rewrites),
        ("rewrite soundness", rewrite_soundness),
        ("prefix round trip", round_trip),
        ("tree edit distance oracle", ted_oracle),
        ("constant invariance", constant_invariance),
        ("gradient check", gradient_check),
        ("trainability", trainability),
        ("beam contracts", beam_contracts),
        ("score_k oracle", scorek_oracle),
        ("embedding algebra", embedding_algebra),
        ("PCA", pca),
        ("determinism", determinism),
        ("end-to-end smoke", end_to_end),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let id = (n + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name} ({secs:.1} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({secs:.1} s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
