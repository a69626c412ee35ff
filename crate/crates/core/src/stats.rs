//! Goodness-of-fit and covariance statistics for sampled counts.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson statistic for observed bin counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2, "need at least two bins");
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    combine(&[(statistic, observed.len() - 1)])
}

/// Sums independent chi-square statistics.
pub fn combine(parts: &[(f64, usize)]) -> ChiSquare {
    let statistic: f64 = parts.iter().map(|(s, _)| s).sum();
    let dof: usize = parts.iter().map(|(_, d)| d).sum();
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    }
}

/// Goodness of fit of sampled counts to `Poisson(lambda)`. Bins `0, 1, ...`
/// are used while their expected count is at least 5; the rest is pooled
/// into a tail bin.
pub fn poisson_fit(counts: &[u64], lambda: f64) -> ChiSquare {
    let n = counts.len() as f64;
    let law = Poisson::new(lambda).expect("positive rate");
    let mut edges = Vec::new();
    let mut used = 0.0;
    let mut k = 0u64;
    loop {
        let e = n * law.pmf(k);
        let rest = n * (1.0 - used) - e;
        if e < 5.0 || rest < 5.0 {
            break;
        }
        edges.push(k);
        used += law.pmf(k);
        k += 1;
    }
    let bins = edges.len() + 1;
    let mut observed = vec![0u64; bins];
    for &c in counts {
        let i = (c as usize).min(bins - 1);
        observed[i] += 1;
    }
    let mut expected: Vec<f64> = edges.iter().map(|&k| n * law.pmf(k)).collect();
    expected.push(n * (1.0 - used).max(0.0));
    chi_square(&observed, &expected)
}

/// Sample covariance of two series divided by its standard error.
pub fn covariance_z(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let products: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let cov = products.iter().sum::<f64>() / n;
    let var = products.iter().map(|v| (v - cov).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return 0.0;
    }
    cov / (var / n).sqrt()
}
