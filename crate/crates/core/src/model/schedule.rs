/// Inverse-square-root schedule with linear warmup:
/// `scale * d^-1/2 * min(step^-1/2, step * warmup^-3/2)`.
///
/// Steps are 1-based; step 0 is treated as step 1. The rate peaks at
/// `step == warmup`.
pub fn noam_lr(step: usize, model_dim: usize, warmup: usize, scale: f64) -> f64 {
    let step = step.max(1) as f64;
    let warmup = warmup.max(1) as f64;
    scale * (model_dim as f64).powf(-0.5) * step.powf(-0.5).min(step * warmup.powf(-1.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_value() {
        // 64^-1/2 * 100^-1/2 = 1/8 * 1/10.
        assert!((noam_lr(100, 64, 100, 1.0) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn shape() {
        let lr = |s| noam_lr(s, 64, 100, 1.0);
        for s in 1..100 {
            assert!(lr(s) < lr(s + 1));
        }
        for s in 100..1000 {
            assert!(lr(s) > lr(s + 1));
        }
        assert!((lr(400) - 0.0125 / 2.0).abs() < 1e-15);
        assert_eq!(noam_lr(0, 64, 100, 1.0), lr(1));
        assert!((noam_lr(100, 64, 100, 2.0) - 0.025).abs() < 1e-15);
    }
}
