use ndarray::Array2;

use crate::tokenizer::{TokenId, PAD};

/// Rowwise log-softmax.
pub fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_z = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - log_z);
    }
    out
}

#[derive(Debug, Clone)]
pub struct TokenLoss {
    /// Summed over scored positions (not averaged).
    pub total: f64,
    /// Positions whose gold token is not `<pad>`.
    pub tokens: usize,
    /// `d total / d logits`; zero rows at padded positions.
    pub grad: Array2<f64>,
}

impl TokenLoss {
    pub fn mean(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.total / self.tokens as f64
        }
    }
}

/// Cross-entropy against the smoothed target that puts `1 - epsilon` on the
/// gold token and spreads `epsilon` uniformly over the other `V - 1` tokens.
/// With `epsilon = 0` this is plain negative log-likelihood.
pub fn label_smoothed_loss(logits: &Array2<f64>, gold: &[TokenId], epsilon: f64) -> TokenLoss {
    assert_eq!(logits.nrows(), gold.len(), "one gold token per logit row");
    let vocab = logits.ncols();
    let off = if vocab > 1 {
        epsilon / (vocab - 1) as f64
    } else {
        0.0
    };
    let on = 1.0 - epsilon;
    let logp = log_softmax(logits);
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    let mut tokens = 0;
    for (i, &g) in gold.iter().enumerate() {
        if g == PAD {
            continue;
        }
        tokens += 1;
        let g = g as usize;
        let row = logp.row(i);
        let mut grow = grad.row_mut(i);
        for (j, (&lp, d)) in row.iter().zip(grow.iter_mut()).enumerate() {
            let q = if j == g { on } else { off };
            if q > 0.0 {
                total -= q * lp;
            }
            *d = lp.exp() - q;
        }
    }
    TokenLoss {
        total,
        tokens,
        grad,
    }
}
