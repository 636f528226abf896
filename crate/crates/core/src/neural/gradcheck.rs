//! Finite-difference check of the hand-written backward pass.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::SeqModel;
use super::train::{loss_and_grads, Example};
use super::{ModelConfig, Vocabulary};
use crate::expr::{Operator, Token};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Worst per-tensor relative error.
    pub max_relative_error: f64,
    /// `(tensor name, ‖analytic − numeric‖ / max(‖analytic‖ + ‖numeric‖, 1e-6))`.
    /// The floor keeps tensors whose true gradient is zero, such as attention
    /// key biases, from reporting rounding noise as error.
    pub tensors: Vec<(String, f64)>,
}

const GRAD_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient of the batch loss with central
/// differences of step `eps`, for every entry of every parameter tensor.
/// The model is built from `config` with dropout off, over a small fixed
/// vocabulary, and fed a random batch drawn from `seed`.
pub fn grad_check(config: &ModelConfig, seed: u64, eps: f64) -> GradCheckReport {
    let vocab = Vocabulary::new([
        Token::Var,
        Token::Pi,
        Token::IntPos,
        Token::Digit(2),
        Token::Op(Operator::Sin),
        Token::Op(Operator::Add),
    ]);
    let cfg = ModelConfig { dropout: 0.0, seed, ..config.clone() };
    let mut model = SeqModel::new(cfg, vocab).expect("valid config");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = model.vocab.len();
    // Leave the last token out of every batch.
    let seq =
        |rng: &mut ChaCha8Rng| -> Vec<usize> { (0..rng.gen_range(1..5)).map(|_| rng.gen_range(3..n - 1)).collect() };
    let batch: Vec<Example> = (0..3).map(|_| Example { src: seq(&mut rng), tgt: seq(&mut rng) }).collect();

    let (_, analytic) = loss_and_grads(&model, &batch, None).expect("valid batch");
    let names: Vec<String> = model.tensors().map(|(name, _)| name.to_string()).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (t, name) in names.into_iter().enumerate() {
        let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
        for k in 0..model.params[t].data.len() {
            let orig = model.params[t].data[k];
            model.params[t].data[k] = orig + eps;
            let plus = loss_and_grads(&model, &batch, None).expect("valid batch").0;
            model.params[t].data[k] = orig - eps;
            let minus = loss_and_grads(&model, &batch, None).expect("valid batch").0;
            model.params[t].data[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[t].data[k];
            diff += (a - numeric) * (a - numeric);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
        let denom = libm::sqrt(norm_a) + libm::sqrt(norm_n);
        let rel = libm::sqrt(diff) / denom.max(GRAD_FLOOR);
        tensors.push((name, rel));
    }
    let max_relative_error = tensors.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    GradCheckReport { max_relative_error, tensors }
}

#[cfg(test)]
pub(crate) fn tiny_model(seed: u64) -> SeqModel {
    let vocab = Vocabulary::new([Token::Var, Token::Pi, Token::IntPos, Token::Digit(2), Token::Op(Operator::Sin)]);
    let cfg = ModelConfig {
        d_model: 8,
        n_heads: 2,
        n_encoder_layers: 1,
        n_decoder_layers: 1,
        d_ff: 16,
        dropout: 0.0,
        seed,
        ..Default::default()
    };
    SeqModel::new(cfg, vocab).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny() -> ModelConfig {
        ModelConfig { d_model: 8, n_heads: 2, n_encoder_layers: 1, n_decoder_layers: 1, d_ff: 16, ..Default::default() }
    }

    #[test]
    fn gradients_match() {
        let r = grad_check(&tiny(), 3, 1e-4);
        assert!(r.max_relative_error < 1e-3, "{:?}", r.tensors);
        let r2 = grad_check(&tiny(), 3, 2e-4);
        assert!(r2.max_relative_error.is_finite());
    }

    #[test]
    fn absent_token_row_has_zero_gradient() {
        let model = tiny_model(1);
        let batch = vec![Example { src: vec![3, 4], tgt: vec![5] }];
        let (_, g) = loss_and_grads(&model, &batch, None).unwrap();
        let src_embed = model.layout.src_embed;
        assert!(g[src_embed].row(6).iter().all(|v| *v == 0.0));
        assert!(g[src_embed].row(3).iter().any(|v| *v != 0.0));
    }
}
