//! Zhang–Shasha tree edit distance over operator trees and the
//! constant-invariant normalization used in the retrieval analysis.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{Expr, Operator};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EditCosts {
    pub insert: f64,
    pub delete: f64,
    pub update: f64,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts { insert: 1.0, delete: 1.0, update: 1.0 }
    }
}

/// Node labels match when the operators match, or when two leaves are
/// identical (the full constant value counts).
fn same_label(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Op(x, _), Expr::Op(y, _)) => x == y,
        (Expr::Op(..), _) | (_, Expr::Op(..)) => false,
        _ => a == b,
    }
}

fn children(e: &Expr) -> &[Expr] {
    match e {
        Expr::Op(_, c) => c,
        _ => &[],
    }
}

/// Postorder node list with the postorder index of each node's leftmost
/// leaf.
struct Indexed<'a> {
    nodes: Vec<&'a Expr>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Indexed<'a> {
    fn new(root: &'a Expr) -> Self {
        let mut nodes = Vec::new();
        let mut leftmost = Vec::new();
        // Iterative postorder: (node, next child to visit, leftmost leaf).
        let mut stack: Vec<(&Expr, usize, Option<usize>)> = vec![(root, 0, None)];
        while let Some(top) = stack.last_mut() {
            let (node, next, _) = *top;
            let kids = children(node);
            if next < kids.len() {
                top.1 += 1;
                stack.push((&kids[next], 0, None));
            } else {
                let (_, _, lm) = stack.pop().expect("non-empty");
                let index = nodes.len();
                let lm = lm.unwrap_or(index);
                nodes.push(node);
                leftmost.push(lm);
                if let Some(parent) = stack.last_mut() {
                    // the first finished child supplies the parent's leftmost leaf
                    if parent.2.is_none() {
                        parent.2 = Some(lm);
                    }
                }
            }
        }
        // Keyroots: the highest node for each distinct leftmost leaf.
        let n = nodes.len();
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[leftmost[i]] {
                seen[leftmost[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.sort_unstable();
        Indexed { nodes, leftmost, keyroots }
    }
}

/// Minimal cost of transforming `a` into `b` by node insertions, deletions
/// and relabelings, on ordered trees.
pub fn tree_edit_distance(a: &Expr, b: &Expr, costs: &EditCosts) -> f64 {
    let ta = Indexed::new(a);
    let tb = Indexed::new(b);
    let (n, m) = (ta.nodes.len(), tb.nodes.len());
    let mut td = vec![vec![0.0f64; m]; n];
    let mut fd = vec![vec![0.0f64; m + 1]; n + 1];
    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let (li, lj) = (ta.leftmost[i], tb.leftmost[j]);
            // fd[x][y] is the forest distance for ta[li..li+x] vs tb[lj..lj+y]
            fd[0][0] = 0.0;
            for x in 1..=i - li + 1 {
                fd[x][0] = fd[x - 1][0] + costs.delete;
            }
            for y in 1..=j - lj + 1 {
                fd[0][y] = fd[0][y - 1] + costs.insert;
            }
            for x in 1..=i - li + 1 {
                let i1 = li + x - 1;
                for y in 1..=j - lj + 1 {
                    let j1 = lj + y - 1;
                    let del = fd[x - 1][y] + costs.delete;
                    let ins = fd[x][y - 1] + costs.insert;
                    if ta.leftmost[i1] == li && tb.leftmost[j1] == lj {
                        let upd = if same_label(ta.nodes[i1], tb.nodes[j1]) { 0.0 } else { costs.update };
                        let v = del.min(ins).min(fd[x - 1][y - 1] + upd);
                        fd[x][y] = v;
                        td[i1][j1] = v;
                    } else {
                        let px = ta.leftmost[i1] - li;
                        let py = tb.leftmost[j1] - lj;
                        fd[x][y] = del.min(ins).min(fd[px][py] + td[i1][j1]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Which constants [`normalize_constants`] strips.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// Constant operands of every sum and product, at every depth.
    #[default]
    Recursive,
    /// Only the outermost sum and the products directly under it.
    TopLevel,
}

/// Leaf that every constant subtree collapses to.
pub fn canonical_constant() -> Expr {
    Expr::int(1)
}

fn flatten<'a>(e: &'a Expr, op: Operator, out: &mut Vec<&'a Expr>) {
    match e.binary_args(op) {
        Some((a, b)) => {
            flatten(a, op, out);
            flatten(b, op, out);
        }
        None => out.push(e),
    }
}

/// Removes constant operands of `op` chains, keeping the non-constant ones
/// in order, each passed through `inner`. Results of `inner` that are
/// themselves `op` chains are spliced in, so the output is left-associated.
fn strip_chain(e: &Expr, op: Operator, inner: &mut impl FnMut(&Expr) -> Expr) -> Expr {
    let mut operands = Vec::new();
    flatten(e, op, &mut operands);
    let mut kept: Vec<Expr> = Vec::new();
    for o in operands.into_iter().filter(|o| !o.is_constant()) {
        let r = inner(o);
        let mut pieces = Vec::new();
        flatten(&r, op, &mut pieces);
        kept.extend(pieces.into_iter().cloned());
    }
    kept.into_iter().reduce(|l, r| Expr::binary(op, l, r)).unwrap_or_else(canonical_constant)
}

/// Strips constant addends and multipliers so that `a*f(x) + b` and `f(x)`
/// normalize to the same tree. A sign (`neg`) counts as a constant
/// multiplier and a constant denominator as a constant factor. A wholly
/// constant subtree becomes [`canonical_constant`].
pub fn normalize_constants(e: &Expr, mode: Normalization) -> Expr {
    match mode {
        Normalization::Recursive => normalize_rec(e),
        Normalization::TopLevel => {
            // Stripping a sign or factor can expose another top-level sum.
            let mut cur = e.clone();
            loop {
                let next = strip_chain(&cur, Operator::Add, &mut |t| strip_term(t, &mut |f| f.clone()));
                if next == cur {
                    return cur;
                }
                cur = next;
            }
        }
    }
}

/// A term without constant factors, sign or constant denominator.
fn strip_term(e: &Expr, rest: &mut impl FnMut(&Expr) -> Expr) -> Expr {
    use Operator::*;
    if e.is_constant() {
        return canonical_constant();
    }
    match e {
        Expr::Op(Neg, c) if c.len() == 1 => strip_term(&c[0], rest),
        Expr::Op(Mul, _) => strip_chain(e, Mul, &mut |f| strip_term(f, rest)),
        Expr::Op(Div, c) if c.len() == 2 && c[1].is_constant() => strip_term(&c[0], rest),
        Expr::Op(Div, c) if c.len() == 2 => {
            let num = if c[0].is_constant() { canonical_constant() } else { strip_term(&c[0], rest) };
            Expr::div(num, strip_term(&c[1], rest))
        }
        _ => rest(e),
    }
}

fn normalize_rec(e: &Expr) -> Expr {
    use Operator::*;
    if e.is_constant() {
        return canonical_constant();
    }
    match e {
        Expr::Var => Expr::Var,
        Expr::Op(Add, _) => strip_chain(e, Add, &mut normalize_rec),
        Expr::Op(Neg | Mul | Div, _) => strip_term(e, &mut normalize_rec),
        Expr::Op(op, c) => Expr::Op(*op, c.iter().map(normalize_rec).collect()),
        leaf => leaf.clone(),
    }
}

/// Outcome of comparing candidates under one scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Winner {
    /// Index of the unique closest candidate.
    Strict(usize),
    /// Indices sharing the smallest distance.
    Tie(Vec<usize>),
}

impl Winner {
    fn of(distances: &[f64]) -> Option<Winner> {
        let best = distances.iter().copied().reduce(f64::min)?;
        let at: Vec<usize> = (0..distances.len()).filter(|&i| distances[i] == best).collect();
        Some(if at.len() == 1 { Winner::Strict(at[0]) } else { Winner::Tie(at) })
    }

    pub fn strict(&self) -> Option<usize> {
        match self {
            Winner::Strict(i) => Some(*i),
            Winner::Tie(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateDistance {
    pub label: String,
    /// Distance between the trees as given.
    pub raw: f64,
    /// Distance after [`normalize_constants`].
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceReport {
    pub query: String,
    pub candidates: Vec<CandidateDistance>,
    pub raw_winner: Winner,
    pub normalized_winner: Winner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("distance report needs at least one candidate")]
pub struct NoCandidates;

/// Distances from `query` to each candidate, as given and after constant
/// normalization, with the closest candidate under each.
pub fn distance_scenarios(
    query: &Expr,
    candidates: &[(String, Expr)],
    mode: Normalization,
) -> Result<DistanceReport, NoCandidates> {
    let costs = EditCosts::default();
    let nq = normalize_constants(query, mode);
    let rows: Vec<CandidateDistance> = candidates
        .iter()
        .map(|(label, c)| CandidateDistance {
            label: label.clone(),
            raw: tree_edit_distance(query, c, &costs),
            normalized: tree_edit_distance(&nq, &normalize_constants(c, mode), &costs),
        })
        .collect();
    let raw: Vec<f64> = rows.iter().map(|r| r.raw).collect();
    let norm: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    Ok(DistanceReport {
        query: alloc::format!("{query}"),
        raw_winner: Winner::of(&raw).ok_or(NoCandidates)?,
        normalized_winner: Winner::of(&norm).ok_or(NoCandidates)?,
        candidates: rows,
    })
}
