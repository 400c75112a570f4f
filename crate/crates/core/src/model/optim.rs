use super::ModelParams;

/// Rescales `grad` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grad: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grad.sq_norm().sqrt();
    if norm > max_norm && norm > 0.0 {
        grad.scale(max_norm / norm);
    }
    norm
}

/// Adam with bias correction (beta1 0.9, beta2 0.98, eps 1e-9).
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: ModelParams,
    second: ModelParams,
    steps: u32,
}

impl Adam {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            first: params.zeros_like(),
            second: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64) {
        self.steps += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        self.first.zip_mut(grad, |m, g| {
            m.zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
        });
        self.second.zip_mut(grad, |v, g| {
            v.zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
        });
        let c1 = 1.0 - b1.powi(self.steps as i32);
        let c2 = 1.0 - b2.powi(self.steps as i32);
        let mut firsts = Vec::new();
        self.first.for_each_tensor(|_, t| firsts.push(t));
        let mut firsts = firsts.into_iter();
        params.zip_mut(&self.second, |p, v| {
            let m = firsts.next().expect("matching structure");
            ndarray::Zip::from(p).and(m).and(v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn params() -> ModelParams {
        ModelParams::init(&ModelConfig {
            enc_layers: 1,
            dec_layers: 1,
            heads: 1,
            model_dim: 4,
            ff_dim: 4,
            dropout: 0.0,
            max_len: 4,
            vocab_size: 5,
            seed: 1,
        })
        .unwrap()
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.output.bias[[0, 2]] = 3.0;
        g.output.bias[[0, 3]] = -0.5;
        let mut adam = Adam::new(&p);
        adam.step(&mut p, &g, 0.01);
        assert!((p.output.bias[[0, 2]] - before.output.bias[[0, 2]] + 0.01).abs() < 1e-9);
        assert!((p.output.bias[[0, 3]] - before.output.bias[[0, 3]] - 0.01).abs() < 1e-9);
        assert_eq!(p.src_embed, before.src_embed);
    }

    #[test]
    fn clipping() {
        let p = params();
        let mut g = p.zeros_like();
        g.output.bias[[0, 0]] = 3.0;
        g.output.bias[[0, 1]] = 4.0;
        assert_eq!(clip_global_norm(&mut g, 10.0), 5.0);
        assert_eq!(g.output.bias[[0, 1]], 4.0);
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g.sq_norm().sqrt() - 1.0).abs() < 1e-12);
    }
}
