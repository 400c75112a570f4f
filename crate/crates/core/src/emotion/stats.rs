use std::fmt::Write;

use super::{Dimension, EmotionError};

/// Five-number summary plus mean of one dimension over one split.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionStats {
    pub dimension: Dimension,
    pub split: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quantile of sorted data, interpolating linearly between the two closest
/// ranks at position `p * (n - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn distribution_stats(
    values: &[f64],
    dimension: Dimension,
    split: &str,
) -> Result<DistributionStats, EmotionError> {
    if values.is_empty() {
        return Err(EmotionError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DistributionStats {
        dimension,
        split: split.to_string(),
        count: sorted.len(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
    })
}

const COLUMNS: [&str; 9] = [
    "split",
    "dimension",
    "count",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "mean",
];

fn cells(s: &DistributionStats) -> [String; 9] {
    [
        s.split.clone(),
        s.dimension.to_string(),
        s.count.to_string(),
        format!("{:.4}", s.min),
        format!("{:.4}", s.q1),
        format!("{:.4}", s.median),
        format!("{:.4}", s.q3),
        format!("{:.4}", s.max),
        format!("{:.4}", s.mean),
    ]
}

pub fn render_stats_csv(rows: &[DistributionStats]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&cells(row).join(","));
        out.push('\n');
    }
    out
}

pub fn render_stats_table(rows: &[DistributionStats]) -> String {
    let body: Vec<[String; 9]> = rows.iter().map(cells).collect();
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let parts: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &COLUMNS);
    for r in &body {
        let refs: Vec<&str> = r.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_data() {
        let s = distribution_stats(&[0.5, 0.5, 0.5], Dimension::Arousal, "train").unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (0.5, 0.5, 0.5, 0.5, 0.5)
        );
    }

    #[test]
    fn odd_length() {
        let s = distribution_stats(&[0.9, 0.1, 0.5], Dimension::Valence, "dev").unwrap();
        assert_eq!((s.min, s.median, s.max), (0.1, 0.5, 0.9));
        assert_eq!(s.count, 3);
    }

    #[test]
    fn even_length_quartiles() {
        // numpy.percentile([0.2, 0.4, 0.6, 0.8], [25, 75]) -> [0.35, 0.65]
        let s = distribution_stats(&[0.2, 0.4, 0.6, 0.8], Dimension::Dominance, "test").unwrap();
        assert!((s.q1 - 0.35).abs() < 1e-12);
        assert!((s.q3 - 0.65).abs() < 1e-12);
        assert!((s.median - 0.5).abs() < 1e-12);
        assert!((s.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            distribution_stats(&[], Dimension::Arousal, "x"),
            Err(EmotionError::EmptyInput)
        ));
    }

    #[test]
    fn renders() {
        let s = distribution_stats(&[0.1, 0.9], Dimension::Arousal, "train").unwrap();
        let csv = render_stats_csv(std::slice::from_ref(&s));
        assert_eq!(
            csv,
            "split,dimension,count,min,q1,median,q3,max,mean\ntrain,arousal,2,0.1000,0.3000,0.5000,0.7000,0.9000,0.5000\n"
        );
        let table = render_stats_table(&[s]);
        assert!(table.lines().next().unwrap().starts_with("split"));
        assert_eq!(table.lines().count(), 2);
    }

    proptest! {
        #[test]
        fn ordering_chain(values in prop::collection::vec(0.0f64..=1.0, 1..60)) {
            let s = distribution_stats(&values, Dimension::Arousal, "x").unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.min <= s.mean && s.mean <= s.max + 1e-12);
        }
    }
}
