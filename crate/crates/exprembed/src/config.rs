//! Options that can come from flags, a TOML config file or defaults, in
//! that order of precedence.
//!
//! ```toml
//! seed = 42
//! threads = 4
//!
//! [gen]
//! max_ops = 5
//! rules = ["expand", "factor"]
//!
//! [model]
//! d_model = 64
//!
//! [train]
//! max_steps = 20000
//!
//! [eval]
//! k = 5
//! ```

use std::path::Path;

use exprembed_core::neural::{ModelConfig, TrainConfig};
use exprembed_core::rewrite::Rule;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_to_string;

/// Declares a struct of optional settings usable as clap flags and as a
/// config-file table, with `or` to fill unset fields from another source.
macro_rules! options {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Debug, Default, PartialEq, clap::Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $($(#[$fm])* #[arg(long)] pub $field: Option<$ty>,)*
        }

        impl $name {
            /// Fields set here, else those set in `other`.
            pub fn or(self, other: Self) -> Self {
                $name { $($field: self.$field.or(other.$field),)* }
            }
        }
    };
}

options!(GenOpts {
    /// Random source expressions to draw when no source file is given.
    random_sources: usize,
    /// Fewest operators in a random source expression.
    source_min_ops: usize,
    /// Most operators in a random source expression.
    source_max_ops: usize,
    /// Rewrite rules to apply, comma separated (default: all).
    #[arg(value_delimiter = ',')]
    rules: Vec<String>,
    /// Most operators in any kept expression.
    max_ops: usize,
    /// Equivalents kept per source expression.
    max_per_source: usize,
    /// Rule applications composed per equivalent.
    depth: usize,
    /// Held-out validation expressions.
    val_size: usize,
    /// Held-out test expressions.
    test_size: usize,
});

options!(ModelOpts {
    d_model: usize,
    n_heads: usize,
    n_encoder_layers: usize,
    n_decoder_layers: usize,
    d_ff: usize,
    dropout: f64,
    /// Longest expression, in tokens, the model accepts.
    max_len: usize,
    label_smoothing: f64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    adam_eps: f64,
});

options!(TrainOpts {
    max_steps: usize,
    /// Steps before early stopping may trigger.
    min_steps: usize,
    /// Validation checks without improvement that stop training.
    patience: usize,
    /// Steps between validation checks.
    eval_every: usize,
    /// Tokens per batch.
    token_budget: usize,
});

options!(EvalOpts {
    /// Neighbors considered by score_k.
    k: usize,
    /// Neighbors compared per query in the distance analysis.
    top_n: usize,
    /// Beam sizes, comma separated.
    #[arg(value_delimiter = ',')]
    beam: Vec<usize>,
    /// Longest generated expression, in tokens.
    max_decode_len: usize,
});

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub gen: GenOpts,
    #[serde(default)]
    pub model: ModelOpts,
    #[serde(default)]
    pub train: TrainOpts,
    #[serde(default)]
    pub eval: EvalOpts,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        toml::from_str(&read_to_string(path)?).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }
}

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenSettings {
    pub random_sources: usize,
    pub source_min_ops: usize,
    pub source_max_ops: usize,
    pub rules: Vec<String>,
    pub max_ops: usize,
    pub max_per_source: usize,
    pub depth: usize,
    pub val_size: usize,
    pub test_size: usize,
}

impl GenOpts {
    pub fn resolve(self) -> Result<(GenSettings, Vec<Rule>)> {
        let rules: Vec<Rule> = match self.rules {
            Some(names) if !names.is_empty() => names
                .iter()
                .map(|n| n.trim().parse::<Rule>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::Usage(e.to_string()))?,
            _ => Rule::all(),
        };
        let s = GenSettings {
            random_sources: self.random_sources.unwrap_or(300),
            source_min_ops: self.source_min_ops.unwrap_or(1),
            source_max_ops: self.source_max_ops.unwrap_or(3),
            rules: rules.iter().map(|r| r.to_string()).collect(),
            max_ops: self.max_ops.unwrap_or(5),
            max_per_source: self.max_per_source.unwrap_or(8),
            depth: self.depth.unwrap_or(1),
            val_size: self.val_size.unwrap_or(20),
            test_size: self.test_size.unwrap_or(20),
        };
        if s.source_min_ops > s.source_max_ops {
            return Err(Error::Usage("source-min-ops exceeds source-max-ops".into()));
        }
        Ok((s, rules))
    }
}

impl ModelOpts {
    pub fn resolve(self, seed: u64) -> Result<ModelConfig> {
        let d = ModelConfig::default();
        let c = ModelConfig {
            d_model: self.d_model.unwrap_or(d.d_model),
            n_heads: self.n_heads.unwrap_or(d.n_heads),
            n_encoder_layers: self.n_encoder_layers.unwrap_or(d.n_encoder_layers),
            n_decoder_layers: self.n_decoder_layers.unwrap_or(d.n_decoder_layers),
            d_ff: self.d_ff.unwrap_or(d.d_ff),
            dropout: self.dropout.unwrap_or(d.dropout),
            max_len: self.max_len.unwrap_or(d.max_len),
            label_smoothing: self.label_smoothing.unwrap_or(d.label_smoothing),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            adam_eps: self.adam_eps.unwrap_or(d.adam_eps),
            seed,
        };
        c.check().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(c)
    }
}

impl TrainOpts {
    pub fn resolve(self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            min_steps: self.min_steps.unwrap_or(d.min_steps),
            patience: self.patience.unwrap_or(d.patience),
            eval_every: self.eval_every.unwrap_or(d.eval_every),
            token_budget: self.token_budget.unwrap_or(d.token_budget),
        }
    }
}

impl From<&ModelConfig> for ModelOpts {
    fn from(c: &ModelConfig) -> ModelOpts {
        ModelOpts {
            d_model: Some(c.d_model),
            n_heads: Some(c.n_heads),
            n_encoder_layers: Some(c.n_encoder_layers),
            n_decoder_layers: Some(c.n_decoder_layers),
            d_ff: Some(c.d_ff),
            dropout: Some(c.dropout),
            max_len: Some(c.max_len),
            label_smoothing: Some(c.label_smoothing),
            learning_rate: Some(c.learning_rate),
            beta1: Some(c.beta1),
            beta2: Some(c.beta2),
            adam_eps: Some(c.adam_eps),
        }
    }
}

impl From<&TrainConfig> for TrainOpts {
    fn from(c: &TrainConfig) -> TrainOpts {
        TrainOpts {
            max_steps: Some(c.max_steps),
            min_steps: Some(c.min_steps),
            patience: Some(c.patience),
            eval_every: Some(c.eval_every),
            token_budget: Some(c.token_budget),
        }
    }
}
