//! Incremental decoding, beam search and generation accuracy.

use alloc::vec::Vec;
use core::cmp::Ordering;

use super::layers::{attend, Mask};
use super::model::SeqModel;
use super::tensor::{log_softmax, Mat};
use super::{encoder_input, ForwardError, EOE, PAD, SOE};
use crate::expr::{parse_prefix, Expr};
use crate::rewrite::{check_equivalence, OracleConfig, Verdict};

/// Encoder output with per-layer cross-attention keys and values.
pub(crate) struct Memory {
    keep: Vec<bool>,
    keys: Vec<Mat>,
    values: Vec<Mat>,
}

/// Self-attention keys and values of the decoded prefix, per layer.
#[derive(Clone)]
pub(crate) struct DecoderState {
    keys: Vec<Mat>,
    values: Vec<Mat>,
    pos: usize,
}

fn push_row(m: &mut Mat, row: &[f64]) {
    m.data.extend_from_slice(row);
    m.rows += 1;
}

impl SeqModel {
    pub(crate) fn memory(&self, src: &[usize]) -> Result<Memory, ForwardError> {
        let memory = self.encode(src)?;
        let p = &self.params;
        let (keys, values) = self
            .layout
            .decoder
            .iter()
            .map(|l| (l.cross_attn.k.forward(p, &memory), l.cross_attn.v.forward(p, &memory)))
            .unzip();
        Ok(Memory { keep: src.iter().map(|&t| t != PAD).collect(), keys, values })
    }

    pub(crate) fn start_state(&self) -> DecoderState {
        let d = self.config.d_model;
        let empty = || (0..self.layout.decoder.len()).map(|_| Mat::zeros(0, d)).collect();
        DecoderState { keys: empty(), values: empty(), pos: 0 }
    }

    /// Feeds one target token and returns next-token log-probabilities.
    /// Row for row this computes the same values as the full forward pass.
    pub(crate) fn step(&self, memory: &Memory, state: &mut DecoderState, token: usize) -> Vec<f64> {
        let p = &self.params;
        let heads = self.config.n_heads;
        let mut y = self.embed_tokens(self.layout.tgt_embed, &[token], state.pos);
        let cross_mask = Mask::Keys(&memory.keep);
        for (l, layer) in self.layout.decoder.iter().enumerate() {
            let (n1, _) = layer.ln1.forward(p, &y);
            let q = layer.self_attn.q.forward(p, &n1);
            push_row(&mut state.keys[l], layer.self_attn.k.forward(p, &n1).row(0));
            push_row(&mut state.values[l], layer.self_attn.v.forward(p, &n1).row(0));
            let keep = alloc::vec![true; state.keys[l].rows];
            let mask = Mask::Causal { keep: &keep, offset: state.pos };
            let (ctx, _) = attend(&q, &state.keys[l], &state.values[l], heads, &mask);
            y.add_assign(&layer.self_attn.o.forward(p, &ctx));
            let (n2, _) = layer.ln2.forward(p, &y);
            let q = layer.cross_attn.q.forward(p, &n2);
            let (ctx, _) = attend(&q, &memory.keys[l], &memory.values[l], heads, &cross_mask);
            y.add_assign(&layer.cross_attn.o.forward(p, &ctx));
            let (n3, _) = layer.ln3.forward(p, &y);
            y.add_assign(&layer.ff.forward(p, &n3).0);
        }
        state.pos += 1;
        let (out, _) = self.layout.decoder_ln.forward(p, &y);
        log_softmax(self.layout.out.forward(p, &out).row(0))
    }

    /// Argmax decoding from content ids; ties go to the lowest id.
    pub fn greedy_decode(&self, src: &[usize], max_len: usize) -> Result<Hypothesis, ForwardError> {
        let memory = self.memory(&encoder_input(src))?;
        let mut state = self.start_state();
        let mut hyp = Hypothesis { tokens: Vec::new(), log_prob: 0.0, complete: false };
        let mut last = SOE;
        while hyp.tokens.len() < max_len {
            let lp = self.step(&memory, &mut state, last);
            let (best, score) =
                lp.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            hyp.log_prob += score;
            if best == EOE {
                hyp.complete = true;
                break;
            }
            hyp.tokens.push(best);
            last = best;
        }
        Ok(hyp)
    }

    /// Beam search without length penalty, with ranked slots. At every step
    /// slot `k` takes the best expansion, not already taken by a lower
    /// slot, of the open hypotheses in slots `0..=k`. An expansion ending in
    /// `EOE`, or reaching `max_len` content tokens, finishes and leaves its
    /// slot empty for the next step.
    ///
    /// The first `b` slots evolve exactly as a search of width `b` would, so
    /// the finished hypotheses of a narrower search are among those of a
    /// wider one: width 1 is greedy decoding and the best score never drops
    /// as the width grows. The search ends when no slot is open, or once
    /// `beam` hypotheses have finished and no open one scores above the
    /// worst of the best `beam` (extensions only lower a score). Returns up
    /// to `beam` finished hypotheses, best first.
    pub fn beam_search(&self, src: &[usize], beam: usize, max_len: usize) -> Result<Vec<Hypothesis>, ForwardError> {
        assert!(beam >= 1, "beam size must be at least 1");
        let memory = self.memory(&encoder_input(src))?;
        let by_score = |a: &Hypothesis, b: &Hypothesis| {
            b.log_prob.partial_cmp(&a.log_prob).unwrap_or(Ordering::Equal).then_with(|| a.tokens.cmp(&b.tokens))
        };
        let empty = Hypothesis { tokens: Vec::new(), log_prob: 0.0, complete: false };
        let mut slots: Vec<Option<(Hypothesis, DecoderState, usize)>> = (0..beam).map(|_| None).collect();
        slots[0] = Some((empty, self.start_state(), SOE));
        let mut finished: Vec<Hypothesis> = Vec::new();
        while slots.iter().any(Option::is_some) {
            // Best `beam` expansions of each open slot, best first.
            let mut expansions: Vec<Vec<(usize, Hypothesis)>> = Vec::with_capacity(beam);
            let mut states: Vec<Option<DecoderState>> = Vec::with_capacity(beam);
            for slot in &slots {
                let Some((hyp, state, last)) = slot else {
                    expansions.push(Vec::new());
                    states.push(None);
                    continue;
                };
                let mut state = state.clone();
                let lp = self.step(&memory, &mut state, *last);
                let mut order: Vec<usize> = (0..lp.len()).collect();
                order.sort_by(|&x, &y| lp[y].partial_cmp(&lp[x]).unwrap_or(Ordering::Equal).then(x.cmp(&y)));
                let best = order.iter().take(beam).map(|&t| {
                    let mut tokens = hyp.tokens.clone();
                    if t != EOE {
                        tokens.push(t);
                    }
                    (t, Hypothesis { tokens, log_prob: hyp.log_prob + lp[t], complete: t == EOE })
                });
                expansions.push(best.collect());
                states.push(Some(state));
            }
            // cursor[j]: first expansion of slot j not yet taken
            let mut cursor = alloc::vec![0usize; beam];
            let mut next: Vec<Option<(Hypothesis, DecoderState, usize)>> = Vec::with_capacity(beam);
            for k in 0..beam {
                let pick = (0..=k).filter(|&j| cursor[j] < expansions[j].len()).min_by(|&a, &b| {
                    let (ta, ha) = &expansions[a][cursor[a]];
                    let (tb, hb) = &expansions[b][cursor[b]];
                    by_score(ha, hb).then(ta.cmp(tb)).then(a.cmp(&b))
                });
                let Some(j) = pick else {
                    next.push(None);
                    continue;
                };
                let (t, hyp) = expansions[j][cursor[j]].clone();
                cursor[j] += 1;
                if hyp.complete || hyp.tokens.len() >= max_len {
                    finished.push(hyp);
                    next.push(None);
                } else {
                    let state = states[j].clone().expect("open slot has a state");
                    next.push(Some((hyp, state, t)));
                }
            }
            slots = next;
            finished.sort_by(by_score);
            if finished.len() >= beam {
                let bar = finished[beam - 1].log_prob;
                if slots.iter().flatten().all(|(h, _, _)| h.log_prob <= bar) {
                    break;
                }
            }
        }
        finished.truncate(beam);
        Ok(finished)
    }
}

/// A decoded sequence of content ids. `complete` is false when decoding
/// stopped at the length limit rather than at `EOE`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub complete: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GenMode {
    /// Success when a beam is equivalent to the input and differs from it.
    SemEmb,
    /// Success when a beam reproduces the input exactly.
    StructEmb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BeamOutcome {
    Unparseable,
    SameAsInput,
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationResult {
    pub input: Expr,
    pub beams: Vec<(Option<Expr>, f64, BeamOutcome)>,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationReport {
    pub accuracy: f64,
    pub results: Vec<GenerationResult>,
}

/// Decodes `beam` hypotheses for one input and judges each. Inconclusive
/// oracle verdicts are not successes. An input the vocabulary cannot encode
/// is a failure with no beams.
pub fn evaluate_one(
    model: &SeqModel,
    input: &Expr,
    beam: usize,
    max_len: usize,
    oracle: &OracleConfig,
    mode: GenMode,
) -> GenerationResult {
    let Ok(Ok(hyps)) = model.vocab.encode(input).map(|ids| model.beam_search(&ids, beam, max_len)) else {
        return GenerationResult { input: input.clone(), beams: Vec::new(), success: false };
    };
    let beams: Vec<(Option<Expr>, f64, BeamOutcome)> = hyps
        .into_iter()
        .map(|h| {
            let parsed = if h.complete { parse_prefix(&model.vocab.decode(&h.tokens)).ok() } else { None };
            let outcome = match &parsed {
                None => BeamOutcome::Unparseable,
                Some(e) if e == input => BeamOutcome::SameAsInput,
                Some(e) => match check_equivalence(input, e, oracle).verdict {
                    Verdict::Equivalent => BeamOutcome::Equivalent,
                    Verdict::NotEquivalent => BeamOutcome::NotEquivalent,
                    Verdict::Inconclusive => BeamOutcome::Inconclusive,
                },
            };
            (parsed, h.log_prob, outcome)
        })
        .collect();
    let success = beams.iter().any(|(_, _, o)| match mode {
        GenMode::StructEmb => *o == BeamOutcome::SameAsInput,
        GenMode::SemEmb => *o == BeamOutcome::Equivalent,
    });
    GenerationResult { input: input.clone(), beams, success }
}

/// Fraction of inputs with a successful beam.
pub fn evaluate_generation(
    model: &SeqModel,
    inputs: &[Expr],
    beam: usize,
    max_len: usize,
    oracle: &OracleConfig,
    mode: GenMode,
) -> GenerationReport {
    let results: Vec<GenerationResult> =
        inputs.iter().map(|e| evaluate_one(model, e, beam, max_len, oracle, mode)).collect();
    let hits = results.iter().filter(|r| r.success).count();
    let accuracy = if results.is_empty() { 0.0 } else { hits as f64 / results.len() as f64 };
    GenerationReport { accuracy, results }
}
