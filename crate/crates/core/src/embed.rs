//! Embedding indices and the metrics computed on them: cosine k-NN,
//! `score_k`, embedding algebra, PCA projection and the tree-distance
//! comparison of retrieved neighbors.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::expr::Expr;
use crate::treedist::{distance_scenarios, DistanceReport, Normalization, Winner};

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub id: usize,
    pub class: Option<String>,
    pub expr: Expr,
    pub vector: Vec<f64>,
}

/// Immutable set of embedded expressions with a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
    norms: Vec<f64>,
    by_id: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("an index needs at least one entry")]
    Empty,
    #[error("entry {id} has dimension {got}, expected {expected}")]
    DimensionMismatch { id: usize, expected: usize, got: usize },
    #[error("duplicate id {0}")]
    DuplicateId(usize),
    #[error("entry {0} has a zero or non-finite vector")]
    BadVector(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum KnnError {
    #[error("query vector is zero")]
    ZeroVector,
    #[error("query has dimension {got}, index has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("id {0} is not in the index")]
    UnknownId(usize),
    #[error("query {0} has no class label")]
    UnlabeledQuery(usize),
    #[error("no query had another member of its class")]
    EmptyEvaluation,
    #[error(transparent)]
    Knn(#[from] KnnError),
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Cosine similarity, `None` when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let d = norm(a) * norm(b);
    (d > 0.0).then(|| (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / d).clamp(-1.0, 1.0))
}

impl EmbeddingIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Result<EmbeddingIndex, IndexError> {
        let dim = entries.first().ok_or(IndexError::Empty)?.vector.len();
        let mut by_id = BTreeMap::new();
        let mut norms = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.vector.len() != dim {
                return Err(IndexError::DimensionMismatch { id: e.id, expected: dim, got: e.vector.len() });
            }
            let n = norm(&e.vector);
            if !(n > 0.0 && n.is_finite()) {
                return Err(IndexError::BadVector(e.id));
            }
            if by_id.insert(e.id, i).is_some() {
                return Err(IndexError::DuplicateId(e.id));
            }
            norms.push(n);
        }
        Ok(EmbeddingIndex { dim, entries, norms, by_id })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> Option<&IndexEntry> {
        self.by_id.get(&id).map(|&i| &self.entries[i])
    }

    /// Id of the first entry whose expression equals `e`.
    pub fn find_expr(&self, e: &Expr) -> Option<usize> {
        self.entries.iter().find(|x| x.expr == *e).map(|x| x.id)
    }

    /// The `k` entries most cosine-similar to `query`, leaving out
    /// `exclude`. Equal similarities are ordered by ascending id.
    pub fn knn(&self, query: &[f64], k: usize, exclude: &[usize]) -> Result<Vec<(usize, f64)>, KnnError> {
        if k == 0 {
            return Err(KnnError::ZeroK);
        }
        if query.len() != self.dim {
            return Err(KnnError::DimensionMismatch { expected: self.dim, got: query.len() });
        }
        let qn = norm(query);
        if qn.partial_cmp(&0.0) != Some(Ordering::Greater) {
            return Err(KnnError::ZeroVector);
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .zip(&self.norms)
            .filter(|(e, _)| !exclude.contains(&e.id))
            .map(|(e, n)| {
                let dot: f64 = e.vector.iter().zip(query).map(|(a, b)| a * b).sum();
                (e.id, (dot / (n * qn)).clamp(-1.0, 1.0))
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Neighbors of an indexed entry, itself excluded.
    pub fn neighbors(&self, id: usize, k: usize) -> Result<Vec<(usize, f64)>, ScoreError> {
        let e = self.get(id).ok_or(ScoreError::UnknownId(id))?;
        Ok(self.knn(&e.vector, k, &[id])?)
    }

    /// `|N_k(q) ∩ c| / min(k, |c|)`, where `N_k(q)` are the `k` nearest
    /// other entries and `c` the other entries of q's class. `None` when q
    /// is the only member of its class.
    pub fn score_k(&self, id: usize, k: usize) -> Result<Option<f64>, ScoreError> {
        let e = self.get(id).ok_or(ScoreError::UnknownId(id))?;
        let class = e.class.as_ref().ok_or(ScoreError::UnlabeledQuery(id))?;
        let members: BTreeSet<usize> =
            self.entries.iter().filter(|x| x.id != id && x.class.as_ref() == Some(class)).map(|x| x.id).collect();
        if members.is_empty() {
            return Ok(None);
        }
        let hits = self.neighbors(id, k)?.iter().filter(|(n, _)| members.contains(n)).count();
        Ok(Some(hits as f64 / k.min(members.len()) as f64))
    }

    /// Mean of the defined `score_k` values over `queries`.
    pub fn mean_score_k(&self, k: usize, queries: &[usize]) -> Result<MeanScore, ScoreError> {
        let mut out = MeanScore { mean: 0.0, scored: 0, skipped: 0, per_class: BTreeMap::new() };
        let mut total = 0.0;
        for &q in queries {
            match self.score_k(q, k)? {
                None => out.skipped += 1,
                Some(s) => {
                    total += s;
                    out.scored += 1;
                    let class = self.get(q).and_then(|e| e.class.clone()).unwrap_or_default();
                    let slot = out.per_class.entry(class).or_insert((0.0, 0));
                    slot.0 += s;
                    slot.1 += 1;
                }
            }
        }
        if out.scored == 0 {
            return Err(ScoreError::EmptyEvaluation);
        }
        out.mean = total / out.scored as f64;
        for v in out.per_class.values_mut() {
            v.0 /= v.1 as f64;
        }
        Ok(out)
    }

    /// Predicts `x2` in `x1 - y1 + y2 ≈ x2` as the entry nearest to
    /// `v(x1) - v(y1) + v(y2)`, excluding the three inputs.
    pub fn embedding_algebra(&self, q: &AnalogyQuery) -> Result<AnalogyResult, ScoreError> {
        let get = |id| self.get(id).ok_or(ScoreError::UnknownId(id));
        let (x1, y1, y2) = (get(q.x1)?, get(q.y1)?, get(q.y2)?);
        let z: Vec<f64> = (0..self.dim).map(|i| x1.vector[i] - y1.vector[i] + y2.vector[i]).collect();
        let best = self.knn(&z, 1, &[q.x1, q.y1, q.y2])?;
        let (predicted, similarity) = *best.first().ok_or(ScoreError::EmptyEvaluation)?;
        let correct = q.expected.as_ref().map(|x2| self.get(predicted).is_some_and(|e| e.expr == *x2));
        Ok(AnalogyResult { predicted, similarity, correct })
    }

    /// Principal-component coordinates `(id, u, v)` of every entry.
    pub fn pca_2d(&self) -> Result<Vec<(usize, f64, f64)>, PcaError> {
        let points: Vec<Vec<f64>> = self.entries.iter().map(|e| e.vector.clone()).collect();
        let coords = pca_2d(&points)?;
        Ok(self.entries.iter().zip(coords).map(|(e, (u, v))| (e.id, u, v)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanScore {
    pub mean: f64,
    pub scored: usize,
    /// Queries whose class had no other member.
    pub skipped: usize,
    /// Mean score and scored-query count per class.
    pub per_class: BTreeMap<String, (f64, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyQuery {
    pub x1: usize,
    pub y1: usize,
    pub y2: usize,
    pub expected: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyResult {
    pub predicted: usize,
    pub similarity: f64,
    pub correct: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PcaError {
    #[error("PCA needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("PCA needs dimension at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("points have inconsistent dimensions")]
    Ragged,
    #[error("all points are identical")]
    DegenerateCovariance,
}

/// Eigen-decomposition of a symmetric `n × n` row-major matrix by cyclic
/// Jacobi rotations. Returns eigenvalues and the matching eigenvectors as
/// columns of a row-major matrix.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| a[p * n + q].powi(2)).sum();
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Mean-centered projection onto the two leading principal components of
/// the sample covariance. Each component's sign makes its largest-magnitude
/// loading positive.
pub fn pca_2d(points: &[Vec<f64>]) -> Result<Vec<(f64, f64)>, PcaError> {
    if points.len() < 3 {
        return Err(PcaError::TooFewPoints(points.len()));
    }
    let d = points[0].len();
    if d < 2 {
        return Err(PcaError::DimensionTooSmall(d));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(PcaError::Ragged);
    }
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for c in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= n - 1.0;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    if cov.iter().all(|&x| x == 0.0) {
        return Err(PcaError::DegenerateCovariance);
    }
    let (values, vectors) = symmetric_eigen(&cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let component = |k: usize| -> Vec<f64> {
        let col: Vec<f64> = (0..d).map(|i| vectors[i * d + order[k]]).collect();
        let lead = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            col.iter().map(|x| -x).collect()
        } else {
            col
        }
    };
    let (pc1, pc2) = (component(0), component(1));
    let proj = |c: &[f64], pc: &[f64]| c.iter().zip(pc).map(|(a, b)| a * b).sum::<f64>();
    Ok(centered.iter().map(|c| (proj(c, &pc1), proj(c, &pc2))).collect())
}

/// One embedder's index, named for reports.
pub struct Embedder<'a> {
    pub name: &'a str,
    pub index: &'a EmbeddingIndex,
}

/// Tree distances between a query and the neighbors each embedder ranks at
/// one position.
#[derive(Clone, Debug, PartialEq)]
pub struct RankComparison {
    pub query: usize,
    pub rank: usize,
    pub neighbors: Vec<usize>,
    pub distances: DistanceReport,
}

/// Strictly-closer counts per embedder, under raw and constant-normalized
/// tree edit distance.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub embedders: Vec<String>,
    pub rows: Vec<RankComparison>,
    pub raw_wins: Vec<usize>,
    pub raw_ties: usize,
    pub normalized_wins: Vec<usize>,
    pub normalized_ties: usize,
}

impl ComparisonReport {
    pub fn cases(&self) -> usize {
        self.rows.len()
    }
}

fn tally(w: &Winner, wins: &mut [usize], ties: &mut usize) {
    match w {
        Winner::Strict(i) => wins[*i] += 1,
        Winner::Tie(_) => *ties += 1,
    }
}

/// For each query and each rank up to `top_n`, compares the neighbors the
/// embedders retrieve at that rank by tree edit distance to the query.
/// Queries are looked up by expression in every index; ranks where some
/// embedder has no neighbor are skipped.
pub fn distance_report(
    queries: &[Expr],
    embedders: &[Embedder<'_>],
    top_n: usize,
    mode: Normalization,
) -> Result<ComparisonReport, ScoreError> {
    let m = embedders.len();
    let mut report = ComparisonReport {
        embedders: embedders.iter().map(|e| String::from(e.name)).collect(),
        rows: Vec::new(),
        raw_wins: vec![0; m],
        raw_ties: 0,
        normalized_wins: vec![0; m],
        normalized_ties: 0,
    };
    for (qi, q) in queries.iter().enumerate() {
        let mut lists = Vec::with_capacity(m);
        for e in embedders {
            let Some(id) = e.index.find_expr(q) else { continue };
            lists.push(e.index.neighbors(id, top_n)?);
        }
        if lists.len() != m || m == 0 {
            continue;
        }
        for rank in 0..top_n {
            let Some(picked) = lists.iter().map(|l| l.get(rank).map(|(id, _)| *id)).collect::<Option<Vec<_>>>() else {
                break;
            };
            let candidates: Vec<(String, Expr)> = embedders
                .iter()
                .zip(&picked)
                .map(|(e, id)| (String::from(e.name), e.index.get(*id).expect("neighbor is indexed").expr.clone()))
                .collect();
            let distances = distance_scenarios(q, &candidates, mode).expect("at least one embedder");
            tally(&distances.raw_winner, &mut report.raw_wins, &mut report.raw_ties);
            tally(&distances.normalized_winner, &mut report.normalized_wins, &mut report.normalized_ties);
            report.rows.push(RankComparison { query: qi, rank: rank + 1, neighbors: picked, distances });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn entry(id: usize, class: Option<&str>, v: &[f64]) -> IndexEntry {
        IndexEntry { id, class: class.map(|c| c.to_string()), expr: Expr::int(id as i64), vector: v.to_vec() }
    }

    #[test]
    fn knn_examples() {
        let s = 1.0 / libm::sqrt(2.0);
        let idx = EmbeddingIndex::new(vec![
            entry(0, None, &[1.0, 0.0]),
            entry(1, None, &[0.0, 1.0]),
            entry(2, None, &[s, s]),
        ])
        .unwrap();
        let r = idx.knn(&[1.0, 0.0], 2, &[]).unwrap();
        assert_eq!(r[0], (0, 1.0));
        assert_eq!(r[1].0, 2);
        assert!((r[1].1 - s).abs() < 1e-12);
        assert!(idx.knn(&[1.0, 0.0], 3, &[0]).unwrap().iter().all(|(id, _)| *id != 0));
        assert_eq!(idx.knn(&[0.0, 0.0], 1, &[]), Err(KnnError::ZeroVector));
        assert!(matches!(idx.knn(&[1.0], 1, &[]), Err(KnnError::DimensionMismatch { .. })));

        let twins = EmbeddingIndex::new(vec![entry(5, None, &[1.0, 1.0]), entry(3, None, &[2.0, 2.0])]).unwrap();
        assert_eq!(twins.knn(&[1.0, 1.0], 2, &[]).unwrap()[0].0, 3);
    }

    #[test]
    fn index_rejects_bad_input() {
        assert_eq!(EmbeddingIndex::new(vec![]), Err(IndexError::Empty));
        let dup = vec![entry(1, None, &[1.0]), entry(1, None, &[2.0])];
        assert_eq!(EmbeddingIndex::new(dup), Err(IndexError::DuplicateId(1)));
        assert_eq!(EmbeddingIndex::new(vec![entry(0, None, &[0.0])]), Err(IndexError::BadVector(0)));
    }

    #[test]
    fn score_k_examples() {
        // class a: ids 0..3 near (1,0); class b far away.
        let mut entries = vec![
            entry(0, Some("a"), &[1.0, 0.0]),
            entry(1, Some("a"), &[1.0, 0.01]),
            entry(2, Some("a"), &[1.0, 0.02]),
        ];
        for i in 0..5 {
            entries.push(entry(10 + i, Some("b"), &[0.0, 1.0 + i as f64]));
        }
        entries.push(entry(20, Some("lonely"), &[-1.0, -1.0]));
        entries.push(entry(21, None, &[-1.0, 1.0]));
        let idx = EmbeddingIndex::new(entries).unwrap();
        assert_eq!(idx.score_k(0, 5).unwrap(), Some(1.0));
        assert_eq!(idx.score_k(20, 5).unwrap(), None);
        assert_eq!(idx.score_k(21, 5), Err(ScoreError::UnlabeledQuery(21)));
        let m = idx.mean_score_k(5, &[0, 1, 20]).unwrap();
        assert_eq!((m.mean, m.scored, m.skipped), (1.0, 2, 1));
        assert_eq!(idx.mean_score_k(5, &[20]), Err(ScoreError::EmptyEvaluation));
    }

    #[test]
    fn algebra_examples() {
        let idx = EmbeddingIndex::new(vec![
            entry(0, None, &[1.0, 0.0, 0.0]),
            entry(1, None, &[0.0, 1.0, 0.0]),
            entry(2, None, &[0.0, 1.0, 1.0]),
            entry(3, None, &[1.0, 0.0, 1.0]),
            entry(4, None, &[0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let q = AnalogyQuery { x1: 0, y1: 1, y2: 2, expected: Some(Expr::int(3)) };
        let r = idx.embedding_algebra(&q).unwrap();
        assert_eq!((r.predicted, r.correct), (3, Some(true)));
        assert!((r.similarity - 1.0).abs() < 1e-12);
        let degenerate = AnalogyQuery { x1: 1, y1: 1, y2: 2, expected: None };
        assert_eq!(idx.embedding_algebra(&degenerate).unwrap().predicted, 4);
    }

    #[test]
    fn pca_rank_one_and_centering() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| (0..5).map(|j| i as f64 * (j as f64 + 1.0) + 3.0).collect()).collect();
        let c = pca_2d(&pts).unwrap();
        assert!(c.iter().all(|(_, v)| v.abs() < 1e-9));
        let mean_u: f64 = c.iter().map(|(u, _)| u).sum::<f64>() / 6.0;
        assert!(mean_u.abs() < 1e-9);
        assert_eq!(pca_2d(&vec![vec![1.0, 2.0]; 4]), Err(PcaError::DegenerateCovariance));
        assert_eq!(pca_2d(&vec![vec![1.0, 2.0]; 2]), Err(PcaError::TooFewPoints(2)));
    }

    #[test]
    fn duplicate_retrieval_always_wins() {
        let p = |s: &str| s.parse::<Expr>().unwrap();
        let mk = |vectors: &[(&str, [f64; 2])]| {
            EmbeddingIndex::new(
                vectors
                    .iter()
                    .enumerate()
                    .map(|(i, (s, v))| IndexEntry { id: i, class: None, expr: p(s), vector: v.to_vec() })
                    .collect(),
            )
            .unwrap()
        };
        let pool = ["sin x", "sin x", "add cos x INT+ 5", "exp x"];
        // A places each duplicate next to its twin; B next to the cosine sum.
        let a = mk(&[(pool[0], [1.0, 0.0]), (pool[1], [1.0, 0.01]), (pool[2], [0.0, 1.0]), (pool[3], [-1.0, 0.0])]);
        let b = mk(&[(pool[0], [1.0, 0.0]), (pool[1], [-1.0, 0.0]), (pool[2], [1.0, 0.01]), (pool[3], [0.0, 1.0])]);
        let r = distance_report(
            &[p("sin x")],
            &[Embedder { name: "A", index: &a }, Embedder { name: "B", index: &b }],
            1,
            Normalization::Recursive,
        )
        .unwrap();
        assert_eq!(r.cases(), 1);
        assert_eq!((r.raw_wins.clone(), r.normalized_wins.clone()), (vec![1, 0], vec![1, 0]));

        let single =
            distance_report(&[p("exp x")], &[Embedder { name: "A", index: &a }], 10, Normalization::Recursive).unwrap();
        assert_eq!(single.cases(), 3);
    }
}
