//! A small pre-LN transformer encoder–decoder trained with hand-written
//! backpropagation and Adam.
//!
//! Model inputs are token ids from a [`Vocabulary`]. The encoder reads
//! `SOE e EOE`; the decoder reads `SOE t` and predicts `t EOE`. The
//! embedding of an expression is the elementwise maximum of the final
//! encoder states over its content positions.

mod decode;
mod gradcheck;
mod layers;
mod model;
pub mod tensor;
mod train;

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::dataset::PairDataset;
use crate::expr::{Expr, Token, UnknownToken};

pub use decode::{
    evaluate_generation, evaluate_one, BeamOutcome, GenMode, GenerationReport, GenerationResult, Hypothesis,
};
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::SeqModel;
pub use tensor::Mat;
pub use train::{
    make_batches, smoothed_cross_entropy, train, train_step, Adam, Example, TrainConfig, TrainError, TrainEvent,
    TrainReport,
};

pub const PAD: usize = 0;
pub const SOE: usize = 1;
pub const EOE: usize = 2;

/// Token ids. The specials hold ids 0 to 2; every other token follows in
/// order of its text form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("cannot build a vocabulary from an empty dataset")]
pub struct EmptyDataset;

impl Vocabulary {
    pub fn new(tokens: impl IntoIterator<Item = Token>) -> Vocabulary {
        let mut content: Vec<Token> = tokens.into_iter().filter(|t| !t.is_special()).collect();
        content.sort_by_key(|t| t.as_str());
        content.dedup();
        let mut all = alloc::vec![Token::Pad, Token::Soe, Token::Eoe];
        all.extend(content);
        Vocabulary { tokens: all }
    }

    /// Every token that occurs in the dataset, plus the specials.
    pub fn from_dataset(data: &PairDataset) -> Result<Vocabulary, EmptyDataset> {
        if data.is_empty() {
            return Err(EmptyDataset);
        }
        Ok(Vocabulary::new(data.examples.iter().flat_map(|(a, b)| {
            let mut t = a.to_prefix().into_inner();
            t.extend(b.to_prefix().into_inner());
            t
        })))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn id(&self, token: Token) -> Option<usize> {
        match token {
            Token::Pad => Some(PAD),
            Token::Soe => Some(SOE),
            Token::Eoe => Some(EOE),
            _ => self.tokens[3..].binary_search_by(|t| t.as_str().cmp(token.as_str())).ok().map(|i| i + 3),
        }
    }

    pub fn token(&self, id: usize) -> Option<Token> {
        self.tokens.get(id).copied()
    }

    pub fn encode_tokens(&self, tokens: &[Token]) -> Result<Vec<usize>, UnknownToken> {
        tokens.iter().map(|&t| self.id(t).ok_or_else(|| UnknownToken(t.as_str().to_string()))).collect()
    }

    /// Content ids of an expression's prefix form, without specials.
    pub fn encode(&self, e: &Expr) -> Result<Vec<usize>, UnknownToken> {
        self.encode_tokens(&e.to_prefix())
    }

    /// Tokens for ids; out-of-range ids are dropped.
    pub fn decode(&self, ids: &[usize]) -> Vec<Token> {
        ids.iter().filter_map(|&i| self.token(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub d_ff: usize,
    pub dropout: f64,
    /// Longest expression, in tokens, the model accepts. Specials are not
    /// counted.
    pub max_len: usize,
    pub label_smoothing: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 32,
            n_heads: 4,
            n_encoder_layers: 2,
            n_decoder_layers: 2,
            d_ff: 128,
            dropout: 0.1,
            max_len: crate::expr::MAX_TOKENS,
            label_smoothing: 0.1,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("d_model {d_model} is not divisible by n_heads {n_heads}")]
    HeadsDoNotDivide { d_model: usize, n_heads: usize },
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("dropout {0} is outside [0, 1)")]
    Dropout(f64),
    #[error("label smoothing {0} is outside [0, 1)")]
    LabelSmoothing(f64),
    #[error("adam betas must lie in [0, 1)")]
    Betas,
}

impl ModelConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_encoder_layers", self.n_encoder_layers),
            ("n_decoder_layers", self.n_decoder_layers),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ConfigError::HeadsDoNotDivide { d_model: self.d_model, n_heads: self.n_heads });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ConfigError::Dropout(self.dropout));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(ConfigError::LabelSmoothing(self.label_smoothing));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(ConfigError::Betas);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ForwardError {
    #[error("sequence of {len} tokens exceeds the limit of {max}")]
    LengthExceeded { len: usize, max: usize },
    #[error("token id {0} is outside the vocabulary")]
    InvalidId(usize),
    #[error("empty sequence")]
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error("input has no content tokens to pool")]
    NoContentTokens,
}

/// `SOE ids EOE`.
pub fn encoder_input(content: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(content.len() + 2);
    v.push(SOE);
    v.extend_from_slice(content);
    v.push(EOE);
    v
}

/// Decoder input `SOE ids` and target `ids EOE`.
pub fn decoder_io(content: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut input = Vec::with_capacity(content.len() + 1);
    input.push(SOE);
    input.extend_from_slice(content);
    let mut target = content.to_vec();
    target.push(EOE);
    (input, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Operator;

    #[test]
    fn vocab_order() {
        let v = Vocabulary::new([Token::Var, Token::Op(Operator::Sin), Token::Var]);
        assert_eq!(v.tokens(), &[Token::Pad, Token::Soe, Token::Eoe, Token::Op(Operator::Sin), Token::Var]);
        assert_eq!(v.id(Token::Var), Some(4));
        assert_eq!(v.id(Token::Pi), None);
        assert!(v.encode_tokens(&[Token::Pi]).is_err());
        assert_eq!(v.decode(&[3, 4]), alloc::vec![Token::Op(Operator::Sin), Token::Var]);
    }

    #[test]
    fn vocab_from_dataset() {
        let e: Expr = "sin x".parse().unwrap();
        let d = PairDataset::new(alloc::vec![(e.clone(), e)]);
        assert_eq!(Vocabulary::from_dataset(&d).unwrap().len(), 5);
        assert_eq!(Vocabulary::from_dataset(&d), Vocabulary::from_dataset(&d));
        assert_eq!(Vocabulary::from_dataset(&PairDataset::default()), Err(EmptyDataset));
    }

    #[test]
    fn config_checks() {
        assert!(ModelConfig::default().check().is_ok());
        let bad = ModelConfig { n_heads: 5, ..Default::default() };
        assert!(matches!(bad.check(), Err(ConfigError::HeadsDoNotDivide { .. })));
        let bad = ModelConfig { dropout: 1.0, ..Default::default() };
        assert!(matches!(bad.check(), Err(ConfigError::Dropout(_))));
    }
}
