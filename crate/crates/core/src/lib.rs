//! Core algorithms for learning and evaluating embeddings of mathematical
//! expressions.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. It provides:
//!
//! * [`expr`]: univariate operator trees, prefix (Polish) tokenization,
//!   numeric evaluation and random expression sampling.
//! * [`rewrite`]: equivalence-preserving rewrite rules, a bounded
//!   simplifier, equivalent-set generation and a numeric equivalence oracle.
//! * [`treedist`]: Zhang–Shasha tree edit distance and constant-invariant
//!   normalization.
//! * [`dataset`]: pair and class datasets, splits and pair explosion.
//! * [`neural`]: a small pre-LN transformer encoder–decoder with manual
//!   backpropagation, Adam, max-pooled embeddings and beam search.
//! * [`embed`]: cosine k-NN, `score_k`, embedding algebra, PCA and the
//!   tree-distance retrieval analysis.
//!
//! File formats, checkpoints and the CLI live in the `exprembed` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod embed;
pub mod expr;
pub mod neural;
pub mod rewrite;
pub mod treedist;

pub use expr::{Expr, NamedConst, Operator, Token, TokenSeq};
