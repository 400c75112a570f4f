use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CccError {
    #[error("length mismatch: {pred} predictions vs {gold} gold values")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("need at least two values, got {0}")]
    TooShort(usize),
    #[error("degenerate input: both series constant and equal in mean")]
    Degenerate,
}

/// Lin's concordance correlation coefficient with population (1/N) moments:
/// `2 cov(x, y) / (var(x) + var(y) + (mean(x) - mean(y))^2)`.
pub fn ccc(pred: &[f64], gold: &[f64]) -> Result<f64, CccError> {
    if pred.len() != gold.len() {
        return Err(CccError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.len() < 2 {
        return Err(CccError::TooShort(pred.len()));
    }
    let n = pred.len() as f64;
    let mean_p = pred.iter().sum::<f64>() / n;
    let mean_g = gold.iter().sum::<f64>() / n;
    let (mut var_p, mut var_g, mut cov) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred.iter().zip(gold) {
        let dp = p - mean_p;
        let dg = g - mean_g;
        var_p += dp * dp;
        var_g += dg * dg;
        cov += dp * dg;
    }
    var_p /= n;
    var_g /= n;
    cov /= n;
    // A constant series has zero covariance; do not let mean rounding say otherwise.
    let constant = |xs: &[f64]| xs.iter().all(|&x| x == xs[0]);
    if constant(pred) || constant(gold) {
        cov = 0.0;
    }
    let denom = var_p + var_g + (mean_p - mean_g).powi(2);
    if denom == 0.0 {
        return Err(CccError::Degenerate);
    }
    Ok((2.0 * cov / denom).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Textbook one-pass raw-moment form, kept separate from the centered
    // two-pass evaluation above.
    fn ccc_raw_moments(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let syy: f64 = y.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let (mx, my) = (sx / n, sy / n);
        let vx = sxx / n - mx * mx;
        let vy = syy / n - my * my;
        let c = sxy / n - mx * my;
        2.0 * c / (vx + vy + (mx - my).powi(2))
    }

    #[test]
    fn closed_form_fixture() {
        // var = 1/150 each, cov = 1/150, mean gap 0.1: (2/150) / (2/150 + 1/100) = 4/7.
        let value = ccc(&[0.1, 0.2, 0.3], &[0.2, 0.3, 0.4]).unwrap();
        assert!((value - 4.0 / 7.0).abs() < 1e-9, "{value}");
        let oracle = ccc_raw_moments(&[0.1, 0.2, 0.3], &[0.2, 0.3, 0.4]);
        assert!((value - oracle).abs() < 1e-9);
    }

    #[test]
    fn perfect_and_constant() {
        let x = [0.1, 0.7, 0.3, 0.9];
        assert!((ccc(&x, &x).unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(ccc(&[0.4; 4], &x).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            ccc(&[0.1, 0.2], &[0.1]),
            Err(CccError::LengthMismatch { pred: 2, gold: 1 })
        );
        assert_eq!(ccc(&[0.1], &[0.1]), Err(CccError::TooShort(1)));
        assert_eq!(ccc(&[0.3, 0.3], &[0.3, 0.3]), Err(CccError::Degenerate));
        // Constant but different means is well defined.
        assert_eq!(ccc(&[0.3, 0.3], &[0.5, 0.5]), Ok(0.0));
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_shift_sensitive(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..40),
            shift in prop_oneof![-1.0f64..-1e-3, 1e-3f64..1.0],
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let spread = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-6);
            let xy = ccc(&x, &y).unwrap();
            let yx = ccc(&y, &x).unwrap();
            prop_assert!((xy - yx).abs() < 1e-12);
            prop_assert!(xy.abs() <= 1.0);
            let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
            prop_assert!(ccc(&x, &shifted).unwrap() < 1.0);
        }
    }
}
