use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    dropout_back, Attention, AttnCache, Dropout, FeedForward, FfCache, LayerNorm, Linear, LnCache, Mask,
};
use super::tensor::{log_softmax, Mat};
use super::{ConfigError, EmbedError, ForwardError, ModelConfig, Vocabulary, PAD};

#[derive(Clone, Copy, Debug)]
pub(crate) struct EncoderLayer {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub ff: FeedForward,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct DecoderLayer {
    pub ln1: LayerNorm,
    pub self_attn: Attention,
    pub ln2: LayerNorm,
    pub cross_attn: Attention,
    pub ln3: LayerNorm,
    pub ff: FeedForward,
}

/// Positions of every parameter tensor in the flat parameter list.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub src_embed: usize,
    pub tgt_embed: usize,
    pub encoder: Vec<EncoderLayer>,
    pub encoder_ln: LayerNorm,
    pub decoder: Vec<DecoderLayer>,
    pub decoder_ln: LayerNorm,
    pub out: Linear,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Init {
    Uniform,
    Zeros,
    Ones,
}

struct Builder {
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
    inits: Vec<Init>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        self.names.push(name);
        self.shapes.push((rows, cols));
        self.inits.push(init);
        self.names.len() - 1
    }

    fn linear(&mut self, name: &str, din: usize, dout: usize) -> Linear {
        Linear {
            w: self.add(format!("{name}.weight"), din, dout, Init::Uniform),
            b: self.add(format!("{name}.bias"), 1, dout, Init::Zeros),
        }
    }

    fn norm(&mut self, name: &str, d: usize) -> LayerNorm {
        LayerNorm {
            gain: self.add(format!("{name}.gain"), 1, d, Init::Ones),
            bias: self.add(format!("{name}.bias"), 1, d, Init::Zeros),
        }
    }

    fn attention(&mut self, name: &str, d: usize) -> Attention {
        Attention {
            q: self.linear(&format!("{name}.q"), d, d),
            k: self.linear(&format!("{name}.k"), d, d),
            v: self.linear(&format!("{name}.v"), d, d),
            o: self.linear(&format!("{name}.o"), d, d),
        }
    }

    fn feed_forward(&mut self, name: &str, d: usize, dff: usize) -> FeedForward {
        FeedForward { l1: self.linear(&format!("{name}.1"), d, dff), l2: self.linear(&format!("{name}.2"), dff, d) }
    }
}

fn build_layout(cfg: &ModelConfig, vocab: usize) -> (Layout, Builder) {
    let d = cfg.d_model;
    let mut b = Builder { names: Vec::new(), shapes: Vec::new(), inits: Vec::new() };
    let src_embed = b.add("encoder.embed".into(), vocab, d, Init::Uniform);
    let tgt_embed = b.add("decoder.embed".into(), vocab, d, Init::Uniform);
    let encoder = (0..cfg.n_encoder_layers)
        .map(|l| EncoderLayer {
            ln1: b.norm(&format!("encoder.{l}.ln1"), d),
            attn: b.attention(&format!("encoder.{l}.attn"), d),
            ln2: b.norm(&format!("encoder.{l}.ln2"), d),
            ff: b.feed_forward(&format!("encoder.{l}.ff"), d, cfg.d_ff),
        })
        .collect();
    let encoder_ln = b.norm("encoder.ln", d);
    let decoder = (0..cfg.n_decoder_layers)
        .map(|l| DecoderLayer {
            ln1: b.norm(&format!("decoder.{l}.ln1"), d),
            self_attn: b.attention(&format!("decoder.{l}.self_attn"), d),
            ln2: b.norm(&format!("decoder.{l}.ln2"), d),
            cross_attn: b.attention(&format!("decoder.{l}.cross_attn"), d),
            ln3: b.norm(&format!("decoder.{l}.ln3"), d),
            ff: b.feed_forward(&format!("decoder.{l}.ff"), d, cfg.d_ff),
        })
        .collect();
    let decoder_ln = b.norm("decoder.ln", d);
    let out = b.linear("out", d, vocab);
    (Layout { src_embed, tgt_embed, encoder, encoder_ln, decoder, decoder_ln, out }, b)
}

/// Sinusoidal position table with `rows` positions.
fn positional_table(rows: usize, d: usize) -> Mat {
    let mut pe = Mat::zeros(rows, d);
    for pos in 0..rows {
        for i in (0..d).step_by(2) {
            let angle = pos as f64 / libm::pow(10000.0, i as f64 / d as f64);
            pe.data[pos * d + i] = libm::sin(angle);
            if i + 1 < d {
                pe.data[pos * d + i + 1] = libm::cos(angle);
            }
        }
    }
    pe
}

/// Rounds to the nearest `f32`, the precision parameters are stored at.
#[inline]
pub(crate) fn to_f32_precision(v: f64) -> f64 {
    v as f32 as f64
}

/// Encoder–decoder transformer with untied source embedding, target
/// embedding and output projection.
#[derive(Clone, Debug)]
pub struct SeqModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub(crate) params: Vec<Mat>,
    names: Vec<String>,
    pub(crate) layout: Layout,
    pe: Mat,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ShapeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expected {expected} tensors, got {got}")]
    Count { expected: usize, got: usize },
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    Shape { name: String, expected: (usize, usize), got: (usize, usize) },
    #[error("tensor {0} has a non-finite entry")]
    NonFinite(String),
}

pub(crate) struct EncoderLayerCache {
    ln1: LnCache,
    attn: AttnCache,
    drop1: Option<Vec<f64>>,
    ln2: LnCache,
    ff: FfCache,
    drop2: Option<Vec<f64>>,
}

pub(crate) struct DecoderLayerCache {
    ln1: LnCache,
    self_attn: AttnCache,
    drop1: Option<Vec<f64>>,
    ln2: LnCache,
    cross_attn: AttnCache,
    drop2: Option<Vec<f64>>,
    ln3: LnCache,
    ff: FfCache,
    drop3: Option<Vec<f64>>,
}

/// Everything the backward pass reads.
pub(crate) struct ForwardCache {
    src: Vec<usize>,
    tgt: Vec<usize>,
    src_drop: Option<Vec<f64>>,
    encoder: Vec<EncoderLayerCache>,
    encoder_ln: LnCache,
    tgt_drop: Option<Vec<f64>>,
    decoder: Vec<DecoderLayerCache>,
    decoder_ln: LnCache,
    decoder_out: Mat,
}

impl SeqModel {
    /// A freshly initialized model; matrices are uniform in
    /// `±1/sqrt(d_model)`, biases zero and layer-norm gains one.
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> Result<SeqModel, ConfigError> {
        config.check()?;
        let (layout, b) = build_layout(&config, vocab.len());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 1.0 / libm::sqrt(config.d_model as f64);
        let params = b
            .shapes
            .iter()
            .zip(&b.inits)
            .map(|(&(r, c), init)| {
                let data = (0..r * c)
                    .map(|_| match init {
                        Init::Uniform => to_f32_precision(rng.gen_range(-bound..bound)),
                        Init::Zeros => 0.0,
                        Init::Ones => 1.0,
                    })
                    .collect();
                Mat::from_vec(r, c, data)
            })
            .collect();
        let pe = positional_table(config.max_len + 2, config.d_model);
        Ok(SeqModel { config, vocab, params, names: b.names, layout, pe })
    }

    /// Rebuilds a model from tensors listed in [`SeqModel::tensors`] order.
    pub fn from_tensors(config: ModelConfig, vocab: Vocabulary, tensors: Vec<Mat>) -> Result<SeqModel, ShapeError> {
        config.check()?;
        let (layout, b) = build_layout(&config, vocab.len());
        if tensors.len() != b.shapes.len() {
            return Err(ShapeError::Count { expected: b.shapes.len(), got: tensors.len() });
        }
        for ((t, &shape), name) in tensors.iter().zip(&b.shapes).zip(&b.names) {
            if (t.rows, t.cols) != shape {
                return Err(ShapeError::Shape { name: name.clone(), expected: shape, got: (t.rows, t.cols) });
            }
            if !t.data.iter().all(|v| v.is_finite()) {
                return Err(ShapeError::NonFinite(name.clone()));
            }
        }
        let pe = positional_table(config.max_len + 2, config.d_model);
        Ok(SeqModel { config, vocab, params: tensors, names: b.names, layout, pe })
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|m| m.data.len()).sum()
    }

    pub(crate) fn zero_grads(&self) -> Vec<Mat> {
        self.params.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect()
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), ForwardError> {
        if ids.is_empty() {
            return Err(ForwardError::Empty);
        }
        let max = self.config.max_len + 2;
        if ids.len() > max {
            return Err(ForwardError::LengthExceeded { len: ids.len(), max });
        }
        match ids.iter().find(|&&i| i >= self.vocab.len()) {
            Some(&bad) => Err(ForwardError::InvalidId(bad)),
            None => Ok(()),
        }
    }

    /// Scaled token embedding plus position encoding.
    pub(crate) fn embed_tokens(&self, table: usize, ids: &[usize], start: usize) -> Mat {
        let d = self.config.d_model;
        let scale = libm::sqrt(d as f64);
        let emb = &self.params[table];
        let mut x = Mat::zeros(ids.len(), d);
        for (i, &t) in ids.iter().enumerate() {
            let pe = self.pe.row(start + i);
            for ((o, e), p) in x.row_mut(i).iter_mut().zip(emb.row(t)).zip(pe) {
                *o = e * scale + p;
            }
        }
        x
    }

    fn embed_back(&self, table: usize, ids: &[usize], dx: &Mat, grads: &mut [Mat]) {
        let scale = libm::sqrt(self.config.d_model as f64);
        for (i, &t) in ids.iter().enumerate() {
            for (g, d) in grads[table].row_mut(t).iter_mut().zip(dx.row(i)) {
                *g += d * scale;
            }
        }
    }

    fn run_encoder(
        &self,
        src: &[usize],
        drop: &mut Dropout<'_>,
    ) -> (Mat, Vec<EncoderLayerCache>, LnCache, Option<Vec<f64>>) {
        let p = &self.params;
        let heads = self.config.n_heads;
        let keep: Vec<bool> = src.iter().map(|&t| t != PAD).collect();
        let mask = Mask::Keys(&keep);
        let mut x = self.embed_tokens(self.layout.src_embed, src, 0);
        let src_drop = drop.apply(&mut x);
        let mut caches = Vec::with_capacity(self.layout.encoder.len());
        for layer in &self.layout.encoder {
            let (n1, ln1) = layer.ln1.forward(p, &x);
            let (mut a, attn) = layer.attn.forward(p, &n1, &n1, heads, &mask);
            let drop1 = drop.apply(&mut a);
            x.add_assign(&a);
            let (n2, ln2) = layer.ln2.forward(p, &x);
            let (mut f, ff) = layer.ff.forward(p, &n2);
            let drop2 = drop.apply(&mut f);
            x.add_assign(&f);
            caches.push(EncoderLayerCache { ln1, attn, drop1, ln2, ff, drop2 });
        }
        let (memory, ln) = self.layout.encoder_ln.forward(p, &x);
        (memory, caches, ln, src_drop)
    }

    pub(crate) fn forward_cached(
        &self,
        src: &[usize],
        tgt: &[usize],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Mat, ForwardCache), ForwardError> {
        self.check_ids(src)?;
        self.check_ids(tgt)?;
        let p = &self.params;
        let heads = self.config.n_heads;
        let mut drop = Dropout { rng, rate: self.config.dropout };
        let (memory, encoder, encoder_ln, src_drop) = self.run_encoder(src, &mut drop);

        let src_keep: Vec<bool> = src.iter().map(|&t| t != PAD).collect();
        let tgt_keep: Vec<bool> = tgt.iter().map(|&t| t != PAD).collect();
        let self_mask = Mask::Causal { keep: &tgt_keep, offset: 0 };
        let cross_mask = Mask::Keys(&src_keep);
        let mut y = self.embed_tokens(self.layout.tgt_embed, tgt, 0);
        let tgt_drop = drop.apply(&mut y);
        let mut decoder = Vec::with_capacity(self.layout.decoder.len());
        for layer in &self.layout.decoder {
            let (n1, ln1) = layer.ln1.forward(p, &y);
            let (mut a, self_attn) = layer.self_attn.forward(p, &n1, &n1, heads, &self_mask);
            let drop1 = drop.apply(&mut a);
            y.add_assign(&a);
            let (n2, ln2) = layer.ln2.forward(p, &y);
            let (mut c, cross_attn) = layer.cross_attn.forward(p, &n2, &memory, heads, &cross_mask);
            let drop2 = drop.apply(&mut c);
            y.add_assign(&c);
            let (n3, ln3) = layer.ln3.forward(p, &y);
            let (mut f, ff) = layer.ff.forward(p, &n3);
            let drop3 = drop.apply(&mut f);
            y.add_assign(&f);
            decoder.push(DecoderLayerCache { ln1, self_attn, drop1, ln2, cross_attn, drop2, ln3, ff, drop3 });
        }
        let (decoder_out, decoder_ln) = self.layout.decoder_ln.forward(p, &y);
        let logits = self.layout.out.forward(p, &decoder_out);
        let cache = ForwardCache {
            src: src.to_vec(),
            tgt: tgt.to_vec(),
            src_drop,
            encoder,
            encoder_ln,
            tgt_drop,
            decoder,
            decoder_ln,
            decoder_out,
        };
        Ok((logits, cache))
    }

    /// Accumulates into `grads` the gradient of a scalar whose derivative
    /// with respect to the logits is `dlogits`.
    pub(crate) fn backward(&self, c: &ForwardCache, dlogits: &Mat, grads: &mut [Mat]) {
        let p = &self.params;
        let heads = self.config.n_heads;
        let l = &self.layout;
        let dout = l.out.backward(p, grads, &c.decoder_out, dlogits);
        let mut dy = l.decoder_ln.backward(p, grads, &c.decoder_ln, &dout);
        let mut dmemory = Mat::zeros(c.src.len(), self.config.d_model);
        for (layer, lc) in l.decoder.iter().zip(&c.decoder).rev() {
            let df = dropout_back(&dy, &lc.drop3);
            let dn3 = layer.ff.backward(p, grads, &lc.ff, &df);
            dy.add_assign(&layer.ln3.backward(p, grads, &lc.ln3, &dn3));
            let dc = dropout_back(&dy, &lc.drop2);
            let (dn2, dmem) = layer.cross_attn.backward(p, grads, &lc.cross_attn, &dc, heads);
            dmemory.add_assign(&dmem);
            dy.add_assign(&layer.ln2.backward(p, grads, &lc.ln2, &dn2));
            let da = dropout_back(&dy, &lc.drop1);
            let (mut dn1, dkv) = layer.self_attn.backward(p, grads, &lc.self_attn, &da, heads);
            dn1.add_assign(&dkv);
            dy.add_assign(&layer.ln1.backward(p, grads, &lc.ln1, &dn1));
        }
        let dy = dropout_back(&dy, &c.tgt_drop);
        self.embed_back(l.tgt_embed, &c.tgt, &dy, grads);

        let mut dx = l.encoder_ln.backward(p, grads, &c.encoder_ln, &dmemory);
        for (layer, lc) in l.encoder.iter().zip(&c.encoder).rev() {
            let df = dropout_back(&dx, &lc.drop2);
            let dn2 = layer.ff.backward(p, grads, &lc.ff, &df);
            dx.add_assign(&layer.ln2.backward(p, grads, &lc.ln2, &dn2));
            let da = dropout_back(&dx, &lc.drop1);
            let (mut dn1, dkv) = layer.attn.backward(p, grads, &lc.attn, &da, heads);
            dn1.add_assign(&dkv);
            dx.add_assign(&layer.ln1.backward(p, grads, &lc.ln1, &dn1));
        }
        let dx = dropout_back(&dx, &c.src_drop);
        self.embed_back(l.src_embed, &c.src, &dx, grads);
    }

    /// Logits of shape `tgt.len() × vocab`. Dropout is active only when a
    /// generator is supplied.
    pub fn forward(&self, src: &[usize], tgt: &[usize], rng: Option<&mut ChaCha8Rng>) -> Result<Mat, ForwardError> {
        self.forward_cached(src, tgt, rng).map(|(logits, _)| logits)
    }

    /// Final encoder states, one row per source position.
    pub fn encode(&self, src: &[usize]) -> Result<Mat, ForwardError> {
        self.check_ids(src)?;
        Ok(self.run_encoder(src, &mut Dropout { rng: None, rate: 0.0 }).0)
    }

    /// Max-pooled final encoder states over non-special positions.
    pub fn embed(&self, src: &[usize]) -> Result<Vec<f64>, EmbedError> {
        let states = self.encode(src)?;
        let mut pooled: Option<Vec<f64>> = None;
        for (i, &t) in src.iter().enumerate() {
            if t < 3 {
                continue;
            }
            let row = states.row(i);
            match &mut pooled {
                None => pooled = Some(row.to_vec()),
                Some(acc) => acc.iter_mut().zip(row).for_each(|(a, v)| *a = a.max(*v)),
            }
        }
        pooled.ok_or(EmbedError::NoContentTokens)
    }

    /// Next-token log-probabilities after each target prefix.
    pub fn log_probs(&self, src: &[usize], tgt: &[usize]) -> Result<Vec<Vec<f64>>, ForwardError> {
        let logits = self.forward(src, tgt, None)?;
        Ok((0..logits.rows).map(|i| log_softmax(logits.row(i))).collect())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Mat] {
        &mut self.params
    }
}
