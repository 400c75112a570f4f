use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{ModelConfig, ModelError};

/// Affine map `y = x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl Linear {
    fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Self {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng)),
            bias: Array2::zeros((1, fan_out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array2<f64>,
    pub bias: Array2<f64>,
}

impl LayerNorm {
    fn init(dim: usize) -> Self {
        Self {
            gain: Array2::ones((1, dim)),
            bias: Array2::zeros((1, dim)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl Attention {
    fn init(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        Self {
            query: Linear::init(rng, dim, dim),
            key: Linear::init(rng, dim, dim),
            value: Linear::init(rng, dim, dim),
            output: Linear::init(rng, dim, dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub self_norm: LayerNorm,
    pub self_attn: Attention,
    pub ff_norm: LayerNorm,
    pub ff: FeedForward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub self_norm: LayerNorm,
    pub self_attn: Attention,
    pub cross_norm: LayerNorm,
    pub cross_attn: Attention,
    pub ff_norm: LayerNorm,
    pub ff: FeedForward,
}

/// All trainable tensors of the encoder-decoder plus the fixed sinusoidal
/// position table. The same type doubles as a gradient / optimizer-moment
/// container (see [`ModelParams::zeros_like`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub src_embed: Array2<f64>,
    pub tgt_embed: Array2<f64>,
    pub encoder: Vec<EncoderLayer>,
    pub encoder_norm: LayerNorm,
    pub decoder: Vec<DecoderLayer>,
    pub decoder_norm: LayerNorm,
    pub output: Linear,
    pub(crate) positions: Array2<f64>,
}

/// Standard deviation of the token-embedding initialization: `model_dim^-1/2`.
pub fn embedding_init_std(model_dim: usize) -> f64 {
    (model_dim as f64).powf(-0.5)
}

pub fn sinusoidal_positions(max_len: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((max_len, dim), |(pos, i)| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * pair / dim as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

impl ModelParams {
    /// Deterministic in `config.seed`: Xavier-uniform linear maps, zero
    /// biases, unit layer-norm gains, `N(0, 1/model_dim)` embeddings.
    pub fn init(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.model_dim;
        let normal = Normal::new(0.0, embedding_init_std(d)).expect("positive std");
        let embed = |rng: &mut ChaCha8Rng| {
            Array2::from_shape_simple_fn((config.vocab_size, d), || normal.sample(rng))
        };
        let src_embed = embed(&mut rng);
        let tgt_embed = embed(&mut rng);
        let ff = |rng: &mut ChaCha8Rng| FeedForward {
            inner: Linear::init(rng, d, config.ff_dim),
            outer: Linear::init(rng, config.ff_dim, d),
        };
        let encoder = (0..config.enc_layers)
            .map(|_| EncoderLayer {
                self_norm: LayerNorm::init(d),
                self_attn: Attention::init(&mut rng, d),
                ff_norm: LayerNorm::init(d),
                ff: ff(&mut rng),
            })
            .collect();
        let decoder = (0..config.dec_layers)
            .map(|_| DecoderLayer {
                self_norm: LayerNorm::init(d),
                self_attn: Attention::init(&mut rng, d),
                cross_norm: LayerNorm::init(d),
                cross_attn: Attention::init(&mut rng, d),
                ff_norm: LayerNorm::init(d),
                ff: ff(&mut rng),
            })
            .collect();
        let output = Linear::init(&mut rng, d, config.vocab_size);
        Ok(Self {
            config: config.clone(),
            src_embed,
            tgt_embed,
            encoder,
            encoder_norm: LayerNorm::init(d),
            decoder,
            decoder_norm: LayerNorm::init(d),
            output,
            positions: sinusoidal_positions(config.max_len, d),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|_, t| t.fill(0.0));
        z
    }

    /// Visits every trainable tensor in a fixed order with a stable name.
    pub fn for_each_tensor<'a>(&'a self, mut f: impl FnMut(&str, &'a Array2<f64>)) {
        fn lin<'a>(f: &mut dyn FnMut(&str, &'a Array2<f64>), name: &str, l: &'a Linear) {
            f(&format!("{name}.weight"), &l.weight);
            f(&format!("{name}.bias"), &l.bias);
        }
        fn norm<'a>(f: &mut dyn FnMut(&str, &'a Array2<f64>), name: &str, n: &'a LayerNorm) {
            f(&format!("{name}.gain"), &n.gain);
            f(&format!("{name}.bias"), &n.bias);
        }
        fn attn<'a>(f: &mut dyn FnMut(&str, &'a Array2<f64>), name: &str, a: &'a Attention) {
            lin(f, &format!("{name}.query"), &a.query);
            lin(f, &format!("{name}.key"), &a.key);
            lin(f, &format!("{name}.value"), &a.value);
            lin(f, &format!("{name}.output"), &a.output);
        }
        f("src_embed", &self.src_embed);
        f("tgt_embed", &self.tgt_embed);
        for (i, layer) in self.encoder.iter().enumerate() {
            let p = format!("encoder.{i}");
            norm(&mut f, &format!("{p}.self_norm"), &layer.self_norm);
            attn(&mut f, &format!("{p}.self_attn"), &layer.self_attn);
            norm(&mut f, &format!("{p}.ff_norm"), &layer.ff_norm);
            lin(&mut f, &format!("{p}.ff.inner"), &layer.ff.inner);
            lin(&mut f, &format!("{p}.ff.outer"), &layer.ff.outer);
        }
        norm(&mut f, "encoder_norm", &self.encoder_norm);
        for (i, layer) in self.decoder.iter().enumerate() {
            let p = format!("decoder.{i}");
            norm(&mut f, &format!("{p}.self_norm"), &layer.self_norm);
            attn(&mut f, &format!("{p}.self_attn"), &layer.self_attn);
            norm(&mut f, &format!("{p}.cross_norm"), &layer.cross_norm);
            attn(&mut f, &format!("{p}.cross_attn"), &layer.cross_attn);
            norm(&mut f, &format!("{p}.ff_norm"), &layer.ff_norm);
            lin(&mut f, &format!("{p}.ff.inner"), &layer.ff.inner);
            lin(&mut f, &format!("{p}.ff.outer"), &layer.ff.outer);
        }
        norm(&mut f, "decoder_norm", &self.decoder_norm);
        lin(&mut f, "output", &self.output);
    }

    /// Mutable counterpart of [`Self::for_each_tensor`], same order and names.
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&str, &mut Array2<f64>)) {
        fn lin(f: &mut dyn FnMut(&str, &mut Array2<f64>), name: &str, l: &mut Linear) {
            f(&format!("{name}.weight"), &mut l.weight);
            f(&format!("{name}.bias"), &mut l.bias);
        }
        fn norm(f: &mut dyn FnMut(&str, &mut Array2<f64>), name: &str, n: &mut LayerNorm) {
            f(&format!("{name}.gain"), &mut n.gain);
            f(&format!("{name}.bias"), &mut n.bias);
        }
        fn attn(f: &mut dyn FnMut(&str, &mut Array2<f64>), name: &str, a: &mut Attention) {
            lin(f, &format!("{name}.query"), &mut a.query);
            lin(f, &format!("{name}.key"), &mut a.key);
            lin(f, &format!("{name}.value"), &mut a.value);
            lin(f, &format!("{name}.output"), &mut a.output);
        }
        f("src_embed", &mut self.src_embed);
        f("tgt_embed", &mut self.tgt_embed);
        for (i, layer) in self.encoder.iter_mut().enumerate() {
            let p = format!("encoder.{i}");
            norm(&mut f, &format!("{p}.self_norm"), &mut layer.self_norm);
            attn(&mut f, &format!("{p}.self_attn"), &mut layer.self_attn);
            norm(&mut f, &format!("{p}.ff_norm"), &mut layer.ff_norm);
            lin(&mut f, &format!("{p}.ff.inner"), &mut layer.ff.inner);
            lin(&mut f, &format!("{p}.ff.outer"), &mut layer.ff.outer);
        }
        norm(&mut f, "encoder_norm", &mut self.encoder_norm);
        for (i, layer) in self.decoder.iter_mut().enumerate() {
            let p = format!("decoder.{i}");
            norm(&mut f, &format!("{p}.self_norm"), &mut layer.self_norm);
            attn(&mut f, &format!("{p}.self_attn"), &mut layer.self_attn);
            norm(&mut f, &format!("{p}.cross_norm"), &mut layer.cross_norm);
            attn(&mut f, &format!("{p}.cross_attn"), &mut layer.cross_attn);
            norm(&mut f, &format!("{p}.ff_norm"), &mut layer.ff_norm);
            lin(&mut f, &format!("{p}.ff.inner"), &mut layer.ff.inner);
            lin(&mut f, &format!("{p}.ff.outer"), &mut layer.ff.outer);
        }
        norm(&mut f, "decoder_norm", &mut self.decoder_norm);
        lin(&mut f, "output", &mut self.output);
    }

    /// Applies `f(self_tensor, other_tensor)` pairwise over two structurally
    /// identical parameter sets.
    pub fn zip_mut(
        &mut self,
        other: &ModelParams,
        mut f: impl FnMut(&mut Array2<f64>, &Array2<f64>),
    ) {
        let mut others: Vec<&Array2<f64>> = Vec::new();
        other.for_each_tensor(|_, t| others.push(t));
        let mut it = others.into_iter();
        self.for_each_tensor_mut(|_, t| f(t, it.next().expect("matching structure")));
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.for_each_tensor(|n, _| names.push(n.to_string()));
        names
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|_, t| n += t.len());
        n
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_tensor(|_, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }

    pub fn sq_norm(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_tensor(|_, t| s += t.iter().map(|v| v * v).sum::<f64>());
        s
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_tensor_mut(|_, t| t.mapv_inplace(|v| v * factor));
    }

    /// Adds small uniform noise to every tensor; used to move tests away from
    /// the symmetric initialization (zero biases, unit gains).
    pub fn jitter(&mut self, rng: &mut impl Rng, amplitude: f64) {
        self.for_each_tensor_mut(|_, t| {
            t.mapv_inplace(|v| v + rng.random_range(-amplitude..=amplitude))
        });
    }
}
