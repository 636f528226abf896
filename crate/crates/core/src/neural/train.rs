//! Label-smoothed loss, Adam and the training loop.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{to_f32_precision, SeqModel};
use super::tensor::{log_softmax, Mat};
use super::{decoder_io, encoder_input, ForwardError, PAD};
use crate::dataset::stream_seed;

/// One training pair as content ids, without specials.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Example {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

impl Example {
    /// Tokens the example occupies in a batch, specials included.
    pub fn cost(&self) -> usize {
        self.src.len() + self.tgt.len() + 3
    }
}

/// Cross-entropy against targets that put `1 - eps` on the gold id and
/// spread `eps` evenly over the other ids, averaged over non-PAD targets.
pub fn smoothed_cross_entropy(logits: &Mat, targets: &[usize], eps: f64) -> f64 {
    let (sum, count) = loss_sum(logits, targets, eps, None);
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Summed loss over non-PAD positions and their count. With `grad`, adds
/// `scale` times the loss gradient with respect to the logits.
fn loss_sum(logits: &Mat, targets: &[usize], eps: f64, mut grad: Option<(&mut Mat, f64)>) -> (f64, usize) {
    assert_eq!(logits.rows, targets.len(), "one target per logit row");
    let v = logits.cols;
    let off = if v > 1 { eps / (v - 1) as f64 } else { 0.0 };
    let mut sum = 0.0;
    let mut count = 0;
    for (i, &gold) in targets.iter().enumerate() {
        if gold == PAD {
            continue;
        }
        count += 1;
        let lp = log_softmax(logits.row(i));
        let total: f64 = lp.iter().sum();
        sum -= (1.0 - eps) * lp[gold] + off * (total - lp[gold]);
        if let Some((g, scale)) = grad.as_mut() {
            for (j, d) in g.row_mut(i).iter_mut().enumerate() {
                let q = if j == gold { 1.0 - eps } else { off };
                *d += *scale * (libm::exp(lp[j]) - q);
            }
        }
    }
    (sum, count)
}

/// Mean batch loss and its gradient. Each example runs at its own length,
/// which is the same as padding the batch and masking the padding.
pub(crate) fn loss_and_grads(
    model: &SeqModel,
    batch: &[Example],
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<Mat>), ForwardError> {
    let positions: usize = batch.iter().map(|e| e.tgt.len() + 1).sum();
    let scale = 1.0 / positions.max(1) as f64;
    let mut grads = model.zero_grads();
    let mut total = 0.0;
    for ex in batch {
        let src = encoder_input(&ex.src);
        let (input, target) = decoder_io(&ex.tgt);
        let (logits, cache) = model.forward_cached(&src, &input, rng.as_deref_mut())?;
        let mut dlogits = Mat::zeros(logits.rows, logits.cols);
        let (sum, _) = loss_sum(&logits, &target, model.config.label_smoothing, Some((&mut dlogits, scale)));
        total += sum;
        model.backward(&cache, &dlogits, &mut grads);
    }
    Ok((total * scale, grads))
}

/// Mean loss over `data` with dropout off.
pub(crate) fn evaluate_loss(model: &SeqModel, data: &[Example]) -> Result<f64, ForwardError> {
    let mut sum = 0.0;
    let mut count = 0;
    for ex in data {
        let (input, target) = decoder_io(&ex.tgt);
        let logits = model.forward(&encoder_input(&ex.src), &input, None)?;
        let (s, c) = loss_sum(&logits, &target, model.config.label_smoothing, None);
        sum += s;
        count += c;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Adam moments for every parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step: u64,
}

impl Adam {
    pub fn new(model: &SeqModel) -> Adam {
        let zeros = || model.params.iter().map(|p| alloc::vec![0.0; p.data.len()]).collect();
        Adam { m: zeros(), v: zeros(), step: 0 }
    }

    /// One bias-corrected update. Parameters are kept at `f32` precision so
    /// a saved checkpoint reloads to the same model.
    pub fn update(&mut self, model: &mut SeqModel, grads: &[Mat]) {
        let cfg = &model.config;
        let (lr, b1, b2, eps) = (cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(b1, t as f64);
        let c2 = 1.0 - libm::pow(b2, t as f64);
        for (((p, g), m), v) in model.params_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *pi = to_f32_precision(*pi - lr * mhat / (libm::sqrt(vhat) + eps));
            }
        }
    }
}

/// Groups a shuffled order of `examples` into batches whose summed
/// [`Example::cost`] stays within `token_budget`. An example costlier than
/// the budget gets a batch of its own.
pub fn make_batches(examples: &[Example], token_budget: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut used = 0;
    for i in order {
        let c = examples[i].cost();
        if !current.is_empty() && used + c > token_budget {
            batches.push(core::mem::take(&mut current));
            used = 0;
        }
        current.push(i);
        used += c;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub max_steps: usize,
    /// Early stopping is not considered before this step.
    pub min_steps: usize,
    /// Validation evaluations without improvement that end training.
    pub patience: usize,
    pub eval_every: usize,
    pub token_budget: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { max_steps: 10_000, min_steps: 1_000, patience: 5, eval_every: 100, token_budget: 512 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainEvent {
    pub step: usize,
    /// Mean training loss since the previous event.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub steps: usize,
    pub stopped_early: bool,
    pub best_step: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub history: Vec<TrainEvent>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("no training examples")]
    Empty,
    #[error(transparent)]
    Forward(#[from] ForwardError),
}

/// One optimizer step on `batch`; returns the batch loss before the update.
pub fn train_step(
    model: &mut SeqModel,
    batch: &[Example],
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> Result<f64, TrainError> {
    let (loss, grads) = loss_and_grads(model, batch, Some(rng))?;
    if !loss.is_finite() || grads.iter().any(|g| g.data.iter().any(|v| !v.is_finite())) {
        return Err(TrainError::NonFiniteLoss { step: adam.step as usize + 1 });
    }
    adam.update(model, grads.as_slice());
    Ok(loss)
}

/// Trains on `train` for up to `cfg.max_steps` steps. With a non-empty
/// `val`, the validation loss is measured every `cfg.eval_every` steps,
/// training stops after `cfg.patience` measurements without improvement
/// (once past `cfg.min_steps`), and the best parameters are restored.
/// Single-threaded and deterministic for a given model seed.
pub fn train(
    model: &mut SeqModel,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    on_event: &mut dyn FnMut(&TrainEvent),
) -> Result<TrainReport, TrainError> {
    if train.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(model.config.seed, 1));
    let mut adam = Adam::new(model);
    let mut report =
        TrainReport { steps: 0, stopped_early: false, best_step: None, best_val_loss: None, history: Vec::new() };
    let mut best_params: Option<Vec<Mat>> = None;
    let mut stale = 0;
    let mut running = (0.0, 0usize);
    let every = cfg.eval_every.max(1);
    let mut batches = Vec::new().into_iter();
    while report.steps < cfg.max_steps {
        let batch: Vec<Example> = loop {
            match batches.next() {
                Some(b) => break b,
                None => batches = make_batches(train, cfg.token_budget, &mut rng).into_iter(),
            }
        }
        .into_iter()
        .map(|i: usize| train[i].clone())
        .collect();
        let loss = train_step(model, &batch, &mut adam, &mut rng)?;
        report.steps += 1;
        running.0 += loss;
        running.1 += 1;
        if report.steps.is_multiple_of(every) || report.steps == cfg.max_steps {
            let val_loss = if val.is_empty() { None } else { Some(evaluate_loss(model, val)?) };
            let event = TrainEvent { step: report.steps, train_loss: running.0 / running.1 as f64, val_loss };
            running = (0.0, 0);
            on_event(&event);
            report.history.push(event);
            if let Some(vl) = val_loss {
                if report.best_val_loss.is_none_or(|b| vl < b) {
                    report.best_val_loss = Some(vl);
                    report.best_step = Some(report.steps);
                    best_params = Some(model.params.clone());
                    stale = 0;
                } else if report.steps >= cfg.min_steps {
                    stale += 1;
                    if stale >= cfg.patience {
                        report.stopped_early = true;
                        break;
                    }
                }
            }
        }
    }
    if let Some(best) = best_params {
        model.params = best;
    }
    Ok(report)
}
