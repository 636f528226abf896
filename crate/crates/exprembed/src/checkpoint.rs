//! Model checkpoints: a plain-text header, then the tensors as raw
//! little-endian `f32` in manifest order.
//!
//! ```text
//! exprembed-checkpoint 1
//! d_model=32
//! ...
//! vocab=PAD SOE EOE INT+ ...
//! tensor=encoder.embed 20 32 0
//! ...
//! data_bytes=123456
//! end
//! <data>
//! ```
//!
//! Tensor lines give name, rows, cols and the byte offset into the data.
//! Parameters are kept at `f32` precision during training, so a save and
//! load reproduces them bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use exprembed_core::expr::Token;
use exprembed_core::neural::{Mat, ModelConfig, SeqModel, Vocabulary};

use crate::error::{Error, Result};
use crate::io::{read_bytes, write_atomic};

const MAGIC: &str = "exprembed-checkpoint 1";

pub fn to_bytes(model: &SeqModel) -> Vec<u8> {
    let c = &model.config;
    let mut h = format!("{MAGIC}\n");
    for (k, v) in [
        ("d_model", c.d_model.to_string()),
        ("n_heads", c.n_heads.to_string()),
        ("n_encoder_layers", c.n_encoder_layers.to_string()),
        ("n_decoder_layers", c.n_decoder_layers.to_string()),
        ("d_ff", c.d_ff.to_string()),
        ("dropout", c.dropout.to_string()),
        ("max_len", c.max_len.to_string()),
        ("label_smoothing", c.label_smoothing.to_string()),
        ("learning_rate", c.learning_rate.to_string()),
        ("beta1", c.beta1.to_string()),
        ("beta2", c.beta2.to_string()),
        ("adam_eps", c.adam_eps.to_string()),
        ("seed", c.seed.to_string()),
    ] {
        let _ = writeln!(h, "{k}={v}");
    }
    let tokens: Vec<&str> = model.vocab.tokens().iter().map(|t| t.as_str()).collect();
    let _ = writeln!(h, "vocab={}", tokens.join(" "));
    let mut data = Vec::new();
    for (name, t) in model.tensors() {
        let _ = writeln!(h, "tensor={name} {} {} {}", t.rows, t.cols, data.len());
        for &v in &t.data {
            data.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let _ = writeln!(h, "data_bytes={}\nend", data.len());
    let mut out = h.into_bytes();
    out.extend(data);
    out
}

pub fn save(path: &Path, model: &SeqModel) -> Result<()> {
    write_atomic(path, &to_bytes(model))
}

pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<SeqModel> {
    const END: &[u8] = b"\nend\n";
    let split = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::parse(path, 1, "checkpoint header has no `end` line"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|e| Error::parse(path, 1, e))?;
    let data = &bytes[split + END.len()..];

    let mut lines = header.lines().enumerate().map(|(i, l)| (i + 1, l));
    if lines.next().map(|(_, l)| l) != Some(MAGIC) {
        return Err(Error::parse(path, 1, "not an exprembed checkpoint"));
    }
    let mut fields = BTreeMap::new();
    let mut tensors = Vec::new();
    for (n, line) in lines {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(path, n, "expected `key=value`"))?;
        if k == "tensor" {
            let parts: Vec<&str> = v.split(' ').collect();
            let [name, rows, cols, offset] = parts[..] else {
                return Err(Error::parse(path, n, "expected `tensor=<name> <rows> <cols> <offset>`"));
            };
            let num = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(path, n, e));
            tensors.push((n, name.to_string(), num(rows)?, num(cols)?, num(offset)?));
        } else if fields.insert(k.to_string(), (n, v.to_string())).is_some() {
            return Err(Error::parse(path, n, format!("duplicate key `{k}`")));
        }
    }
    fn get<T: std::str::FromStr>(path: &Path, f: &BTreeMap<String, (usize, String)>, k: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (n, v) = f.get(k).ok_or_else(|| Error::parse(path, 1, format!("missing `{k}`")))?;
        v.parse().map_err(|e| Error::parse(path, *n, format!("{k}: {e}")))
    }
    let config = ModelConfig {
        d_model: get(path, &fields, "d_model")?,
        n_heads: get(path, &fields, "n_heads")?,
        n_encoder_layers: get(path, &fields, "n_encoder_layers")?,
        n_decoder_layers: get(path, &fields, "n_decoder_layers")?,
        d_ff: get(path, &fields, "d_ff")?,
        dropout: get(path, &fields, "dropout")?,
        max_len: get(path, &fields, "max_len")?,
        label_smoothing: get(path, &fields, "label_smoothing")?,
        learning_rate: get(path, &fields, "learning_rate")?,
        beta1: get(path, &fields, "beta1")?,
        beta2: get(path, &fields, "beta2")?,
        adam_eps: get(path, &fields, "adam_eps")?,
        seed: get(path, &fields, "seed")?,
    };
    let (vocab_line, vocab_text) = fields.get("vocab").ok_or_else(|| Error::parse(path, 1, "missing `vocab`"))?;
    let tokens: Vec<Token> = vocab_text
        .split(' ')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| Error::parse(path, *vocab_line, e))?;
    let vocab = Vocabulary::new(tokens.iter().copied());
    if vocab.tokens() != tokens.as_slice() {
        return Err(Error::parse(path, *vocab_line, "vocabulary is not in canonical order"));
    }
    let data_bytes: usize = get(path, &fields, "data_bytes")?;
    if data.len() != data_bytes {
        return Err(Error::Data(format!("{}: expected {data_bytes} data bytes, found {}", path.display(), data.len())));
    }
    let mut mats = Vec::with_capacity(tensors.len());
    for (n, _, rows, cols, offset) in &tensors {
        let len = rows * cols * 4;
        let chunk =
            data.get(*offset..offset + len).ok_or_else(|| Error::parse(path, *n, "tensor extends past the data"))?;
        let values = chunk.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
        mats.push(Mat::from_vec(*rows, *cols, values));
    }
    let model =
        SeqModel::from_tensors(config, vocab, mats).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for ((n, name, ..), (expected, _)) in tensors.iter().zip(model.tensors()) {
        if name != expected {
            return Err(Error::parse(path, *n, format!("tensor `{name}` where `{expected}` was expected")));
        }
    }
    Ok(model)
}

pub fn load(path: &Path) -> Result<SeqModel> {
    from_bytes(path, &read_bytes(path)?)
}
