//! Forward/backward kernels for the building blocks. Activations are
//! row-major `positions x features` matrices, one sequence at a time.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::params::{Attention, FeedForward, LayerNorm, Linear};

pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;

pub(crate) fn linear(l: &Linear, x: &ArrayView2<f64>) -> Array2<f64> {
    let mut y = x.dot(&l.weight);
    y += &l.bias;
    y
}

/// Accumulates weight/bias gradients and returns the input gradient.
pub(crate) fn linear_backward(
    l: &Linear,
    x: &ArrayView2<f64>,
    dy: &Array2<f64>,
    grad: &mut Linear,
) -> Array2<f64> {
    grad.weight += &x.t().dot(dy);
    grad.bias += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    dy.dot(&l.weight.t())
}

pub(crate) struct NormCache {
    normalized: Array2<f64>,
    inv_std: Vec<f64>,
}

pub(crate) fn layer_norm(n: &LayerNorm, x: &Array2<f64>) -> (Array2<f64>, NormCache) {
    let dim = x.ncols() as f64;
    let mut normalized = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in normalized.rows_mut() {
        let mean = row.sum() / dim;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dim;
        let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * r);
        inv_std.push(r);
    }
    let mut y = &normalized * &n.gain;
    y += &n.bias;
    (
        y,
        NormCache {
            normalized,
            inv_std,
        },
    )
}

pub(crate) fn layer_norm_backward(
    n: &LayerNorm,
    cache: &NormCache,
    dy: &Array2<f64>,
    grad: &mut LayerNorm,
) -> Array2<f64> {
    grad.gain += &(dy * &cache.normalized)
        .sum_axis(Axis(0))
        .insert_axis(Axis(0));
    grad.bias += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dnorm = dy * &n.gain;
    let dim = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for (i, (mut out, (dn, xh))) in dx
        .rows_mut()
        .into_iter()
        .zip(dnorm.rows().into_iter().zip(cache.normalized.rows()))
        .enumerate()
    {
        let mean_dn = dn.sum() / dim;
        let mean_dn_xh = dn.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / dim;
        let r = cache.inv_std[i];
        Zip::from(&mut out)
            .and(&dn)
            .and(&xh)
            .for_each(|o, &d, &h| *o = r * (d - mean_dn - h * mean_dn_xh));
    }
    dx
}

/// Inverted dropout. Returns the kept-and-rescaled mask, or `None` when
/// inactive so that eval mode stays deterministic.
pub(crate) fn dropout(
    x: &mut Array2<f64>,
    p: f64,
    rng: Option<&mut (dyn rand::RngCore + 'static)>,
) -> Option<Array2<f64>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    });
    *x *= &mask;
    Some(mask)
}

pub(crate) fn dropout_backward(dy: &mut Array2<f64>, mask: &Option<Array2<f64>>) {
    if let Some(m) = mask {
        *dy *= m;
    }
}

/// Which key positions a query may attend to.
#[derive(Clone, Copy)]
pub(crate) struct AttnMask<'a> {
    /// `false` marks padding keys.
    pub key_valid: Option<&'a [bool]>,
    /// Query `i` sees keys `0..=i` only.
    pub causal: bool,
}

impl AttnMask<'_> {
    fn allows(&self, query: usize, key: usize) -> bool {
        if self.causal && key > query {
            return false;
        }
        self.key_valid.is_none_or(|v| v[key])
    }
}

pub(crate) struct AttnCache {
    query_in: Array2<f64>,
    kv_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Per head, `queries x keys`, rows sum to one (or are all zero when
    /// every key is masked).
    pub probs: Vec<Array2<f64>>,
    context: Array2<f64>,
}

pub(crate) fn attention(
    a: &Attention,
    heads: usize,
    query_in: &Array2<f64>,
    kv_in: &Array2<f64>,
    mask: AttnMask<'_>,
) -> (Array2<f64>, AttnCache) {
    let q = linear(&a.query, &query_in.view());
    let k = linear(&a.key, &kv_in.view());
    let v = linear(&a.value, &kv_in.view());
    let dim = q.ncols();
    let hd = dim / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut context = Array2::zeros((q.nrows(), dim));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * hd..(h + 1) * hd];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);
        let mut scores = qh.dot(&kh.t());
        for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
            let mut max = f64::NEG_INFINITY;
            for (j, s) in row.iter_mut().enumerate() {
                if mask.allows(i, j) {
                    *s *= scale;
                    max = max.max(*s);
                } else {
                    *s = f64::NEG_INFINITY;
                }
            }
            if max == f64::NEG_INFINITY {
                row.fill(0.0);
                continue;
            }
            let mut total = 0.0;
            for s in row.iter_mut() {
                *s = if *s == f64::NEG_INFINITY {
                    0.0
                } else {
                    (*s - max).exp()
                };
                total += *s;
            }
            row.mapv_inplace(|e| e / total);
        }
        context.slice_mut(cols).assign(&scores.dot(&vh));
        probs.push(scores);
    }
    let out = linear(&a.output, &context.view());
    let cache = AttnCache {
        query_in: query_in.clone(),
        kv_in: kv_in.clone(),
        q,
        k,
        v,
        probs,
        context,
    };
    (out, cache)
}

/// Returns `(d query_in, d kv_in)`.
pub(crate) fn attention_backward(
    a: &Attention,
    cache: &AttnCache,
    dout: &Array2<f64>,
    grad: &mut Attention,
) -> (Array2<f64>, Array2<f64>) {
    let heads = cache.probs.len();
    let dcontext = linear_backward(&a.output, &cache.context.view(), dout, &mut grad.output);
    let dim = cache.q.ncols();
    let hd = dim / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let mut dq = Array2::zeros(cache.q.raw_dim());
    let mut dk = Array2::zeros(cache.k.raw_dim());
    let mut dv = Array2::zeros(cache.v.raw_dim());
    for (h, p) in cache.probs.iter().enumerate() {
        let cols = s![.., h * hd..(h + 1) * hd];
        let dctx = dcontext.slice(cols);
        let dp = dctx.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&dctx));
        // Softmax Jacobian, rowwise: dS = P * (dP - <dP, P>).
        let mut ds = p * &dp;
        for (mut ds_row, p_row) in ds.rows_mut().into_iter().zip(p.rows()) {
            let dot = ds_row.sum();
            Zip::from(&mut ds_row)
                .and(&p_row)
                .for_each(|d, &pv| *d -= pv * dot);
        }
        ds *= scale;
        dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
    }
    let dquery_in = linear_backward(&a.query, &cache.query_in.view(), &dq, &mut grad.query);
    let mut dkv_in = linear_backward(&a.key, &cache.kv_in.view(), &dk, &mut grad.key);
    dkv_in += &linear_backward(&a.value, &cache.kv_in.view(), &dv, &mut grad.value);
    (dquery_in, dkv_in)
}

pub(crate) struct FfCache {
    input: Array2<f64>,
    hidden: Array2<f64>,
}

pub(crate) fn feed_forward(ff: &FeedForward, x: &Array2<f64>) -> (Array2<f64>, FfCache) {
    let mut hidden = linear(&ff.inner, &x.view());
    hidden.mapv_inplace(|v| v.max(0.0));
    let out = linear(&ff.outer, &hidden.view());
    (
        out,
        FfCache {
            input: x.clone(),
            hidden,
        },
    )
}

pub(crate) fn feed_forward_backward(
    ff: &FeedForward,
    cache: &FfCache,
    dy: &Array2<f64>,
    grad: &mut FeedForward,
) -> Array2<f64> {
    let mut dhidden = linear_backward(&ff.outer, &cache.hidden.view(), dy, &mut grad.outer);
    Zip::from(&mut dhidden)
        .and(&cache.hidden)
        .for_each(|d, &h| {
            if h <= 0.0 {
                *d = 0.0
            }
        });
    linear_backward(&ff.inner, &cache.input.view(), &dhidden, &mut grad.inner)
}
