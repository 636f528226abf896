//! Sublayers with forward passes that record what their backward passes
//! need. Parameters live in one flat `[Mat]` and layers hold indices into
//! it; gradients use the same indexing.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{dot, matmul, matmul_nt, matmul_tn_acc, Mat};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn forward(&self, p: &[Mat], x: &Mat) -> Mat {
        let mut y = matmul(x, &p[self.w]);
        let bias = &p[self.b].data;
        for i in 0..y.rows {
            for (v, b) in y.row_mut(i).iter_mut().zip(bias) {
                *v += b;
            }
        }
        y
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, p: &[Mat], g: &mut [Mat], x: &Mat, dy: &Mat) -> Mat {
        matmul_tn_acc(x, dy, &mut g[self.w]);
        let gb = &mut g[self.b].data;
        for i in 0..dy.rows {
            for (a, d) in gb.iter_mut().zip(dy.row(i)) {
                *a += d;
            }
        }
        matmul_nt(dy, &p[self.w])
    }
}

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerNorm {
    pub gain: usize,
    pub bias: usize,
}

pub(crate) struct LnCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn forward(&self, p: &[Mat], x: &Mat) -> (Mat, LnCache) {
        let n = x.cols as f64;
        let (gain, bias) = (&p[self.gain].data, &p[self.bias].data);
        let mut xhat = Mat::zeros(x.rows, x.cols);
        let mut y = Mat::zeros(x.rows, x.cols);
        let mut inv_std = Vec::with_capacity(x.rows);
        for i in 0..x.rows {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / libm::sqrt(var + LN_EPS);
            inv_std.push(inv);
            for j in 0..x.cols {
                let h = (row[j] - mean) * inv;
                xhat.data[i * x.cols + j] = h;
                y.data[i * x.cols + j] = gain[j] * h + bias[j];
            }
        }
        (y, LnCache { xhat, inv_std })
    }

    pub fn backward(&self, p: &[Mat], g: &mut [Mat], c: &LnCache, dy: &Mat) -> Mat {
        let n = dy.cols as f64;
        let mut dx = Mat::zeros(dy.rows, dy.cols);
        for i in 0..dy.rows {
            let (d, h) = (dy.row(i), c.xhat.row(i));
            for j in 0..dy.cols {
                g[self.gain].data[j] += d[j] * h[j];
                g[self.bias].data[j] += d[j];
            }
            let gain = &p[self.gain].data;
            let dh: Vec<f64> = d.iter().zip(gain).map(|(a, b)| a * b).collect();
            let mean_dh = dh.iter().sum::<f64>() / n;
            let mean_dhh = dot(&dh, h) / n;
            for (j, out) in dx.row_mut(i).iter_mut().enumerate() {
                *out = c.inv_std[i] * (dh[j] - mean_dh - h[j] * mean_dhh);
            }
        }
        dx
    }
}

/// Which key positions query `i` may attend to.
pub(crate) enum Mask<'a> {
    /// Keys whose flag is `true`.
    Keys(&'a [bool]),
    /// Keys whose flag is `true` and whose position is at most the query's,
    /// with queries numbered from `offset`.
    Causal { keep: &'a [bool], offset: usize },
}

impl Mask<'_> {
    #[inline]
    fn allows(&self, i: usize, j: usize) -> bool {
        match *self {
            Mask::Keys(keep) => keep[j],
            Mask::Causal { keep, offset } => keep[j] && j <= i + offset,
        }
    }
}

/// Scaled dot-product attention over `heads` column blocks. Returns the
/// concatenated context and the per-head probability matrices.
pub(crate) fn attend(q: &Mat, k: &Mat, v: &Mat, heads: usize, mask: &Mask<'_>) -> (Mat, Vec<Mat>) {
    let dh = q.cols / heads;
    let scale = 1.0 / libm::sqrt(dh as f64);
    let mut ctx = Mat::zeros(q.rows, v.cols);
    let mut probs = Vec::with_capacity(heads);
    let mut scores = vec![0.0; k.rows];
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        let mut p = Mat::zeros(q.rows, k.rows);
        for i in 0..q.rows {
            let qi = &q.row(i)[cols.clone()];
            let mut max = f64::NEG_INFINITY;
            for (j, s) in scores.iter_mut().enumerate() {
                if mask.allows(i, j) {
                    *s = dot(qi, &k.row(j)[cols.clone()]) * scale;
                    max = max.max(*s);
                }
            }
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for (j, s) in scores.iter().enumerate() {
                if mask.allows(i, j) {
                    let e = libm::exp(s - max);
                    p.data[i * k.rows + j] = e;
                    total += e;
                }
            }
            let out = &mut ctx.data[i * v.cols..(i + 1) * v.cols][cols.clone()];
            for j in 0..k.rows {
                if mask.allows(i, j) {
                    let w = p.data[i * k.rows + j] / total;
                    p.data[i * k.rows + j] = w;
                    for (o, vv) in out.iter_mut().zip(&v.row(j)[cols.clone()]) {
                        *o += w * vv;
                    }
                }
            }
        }
        probs.push(p);
    }
    (ctx, probs)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

pub(crate) struct AttnCache {
    xq: Mat,
    xkv: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    probs: Vec<Mat>,
    ctx: Mat,
}

impl Attention {
    pub fn forward(&self, p: &[Mat], xq: &Mat, xkv: &Mat, heads: usize, mask: &Mask<'_>) -> (Mat, AttnCache) {
        let q = self.q.forward(p, xq);
        let k = self.k.forward(p, xkv);
        let v = self.v.forward(p, xkv);
        let (ctx, probs) = attend(&q, &k, &v, heads, mask);
        let out = self.o.forward(p, &ctx);
        (out, AttnCache { xq: xq.clone(), xkv: xkv.clone(), q, k, v, probs, ctx })
    }

    /// Returns the gradients with respect to the query input and the
    /// key/value input.
    pub fn backward(&self, p: &[Mat], g: &mut [Mat], c: &AttnCache, dy: &Mat, heads: usize) -> (Mat, Mat) {
        let dctx = self.o.backward(p, g, &c.ctx, dy);
        let dh = c.q.cols / heads;
        let scale = 1.0 / libm::sqrt(dh as f64);
        let (nq, nk) = (c.q.rows, c.k.rows);
        let mut dq = Mat::zeros(nq, c.q.cols);
        let mut dk = Mat::zeros(nk, c.k.cols);
        let mut dv = Mat::zeros(nk, c.v.cols);
        let mut dp = vec![0.0; nk];
        for (h, probs) in c.probs.iter().enumerate() {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..nq {
                let pi = probs.row(i);
                let dci = &dctx.row(i)[cols.clone()];
                let mut weighted = 0.0;
                for j in 0..nk {
                    if pi[j] != 0.0 {
                        dp[j] = dot(dci, &c.v.row(j)[cols.clone()]);
                        weighted += pi[j] * dp[j];
                        for (a, b) in dv.row_mut(j)[cols.clone()].iter_mut().zip(dci) {
                            *a += pi[j] * b;
                        }
                    }
                }
                for j in 0..nk {
                    if pi[j] != 0.0 {
                        let ds = pi[j] * (dp[j] - weighted) * scale;
                        for (a, b) in dq.row_mut(i)[cols.clone()].iter_mut().zip(&c.k.row(j)[cols.clone()]) {
                            *a += ds * b;
                        }
                        for (a, b) in dk.row_mut(j)[cols.clone()].iter_mut().zip(&c.q.row(i)[cols.clone()]) {
                            *a += ds * b;
                        }
                    }
                }
            }
        }
        let dxq = self.q.backward(p, g, &c.xq, &dq);
        let mut dxkv = self.k.backward(p, g, &c.xkv, &dk);
        dxkv.add_assign(&self.v.backward(p, g, &c.xkv, &dv));
        (dxq, dxkv)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct FeedForward {
    pub l1: Linear,
    pub l2: Linear,
}

pub(crate) struct FfCache {
    x: Mat,
    h: Mat,
}

impl FeedForward {
    pub fn forward(&self, p: &[Mat], x: &Mat) -> (Mat, FfCache) {
        let mut h = self.l1.forward(p, x);
        for v in &mut h.data {
            *v = v.max(0.0);
        }
        let y = self.l2.forward(p, &h);
        (y, FfCache { x: x.clone(), h })
    }

    pub fn backward(&self, p: &[Mat], g: &mut [Mat], c: &FfCache, dy: &Mat) -> Mat {
        let mut dh = self.l2.backward(p, g, &c.h, dy);
        for (d, h) in dh.data.iter_mut().zip(&c.h.data) {
            if *h <= 0.0 {
                *d = 0.0;
            }
        }
        self.l1.backward(p, g, &c.x, &dh)
    }
}

/// Inverted dropout. Without a generator, or at rate zero, it is the
/// identity and records nothing.
pub(crate) struct Dropout<'a> {
    pub rng: Option<&'a mut ChaCha8Rng>,
    pub rate: f64,
}

impl Dropout<'_> {
    pub fn apply(&mut self, x: &mut Mat) -> Option<Vec<f64>> {
        let rng = self.rng.as_mut().filter(|_| self.rate > 0.0)?;
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..x.data.len()).map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { keep }).collect();
        for (v, m) in x.data.iter_mut().zip(&mask) {
            *v *= m;
        }
        Some(mask)
    }
}

/// Multiplies a gradient by a recorded dropout mask.
pub(crate) fn dropout_back(dy: &Mat, mask: &Option<Vec<f64>>) -> Mat {
    match mask {
        None => dy.clone(),
        Some(m) => Mat::from_vec(dy.rows, dy.cols, dy.data.iter().zip(m).map(|(a, b)| a * b).collect()),
    }
}
