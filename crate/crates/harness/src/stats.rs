//! Batch-means error bars and goodness-of-fit statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Sample mean with a batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean of `values` and the standard error from `batches` contiguous batches
/// (`sd(batch means)/√batches`). Uses one batch per value when there are
/// fewer values than batches.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    assert!(n >= 2, "batch means need at least two values");
    let b = batches.clamp(2, n);
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let chunk = &values[i * n / b..(i + 1) * n / b];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate { mean, stderr: (var / b as f64).sqrt() }
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// `N(0, 1)`, exact for samples with ties.
pub fn ks_distance_normal(samples: &[f64]) -> f64 {
    let std_normal = Normal::standard();
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let cdf = std_normal.cdf(xs[i]);
        d = d.max((cdf - i as f64 / n).abs()).max((j as f64 / n - cdf).abs());
        i = j;
    }
    d
}

/// Pearson chi-square of `counts` against cell probabilities `probs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Cells with zero probability must have zero counts (otherwise the
/// statistic is infinite); they do not count towards the degrees of freedom.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = p * n as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else if c > 0 {
            stat = f64::INFINITY;
        }
    }
    let dof = cells.saturating_sub(1).max(1);
    let p_value = if stat.is_finite() { 1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(stat) } else { 0.0 };
    ChiSquare { statistic: stat, dof, p_value }
}

pub fn normal_density(x: f64, sd: f64) -> f64 {
    (-0.5 * (x / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}
