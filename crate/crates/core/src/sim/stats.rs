//! Two-sample chi-square test and batch-means estimates.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Cells with fewer pooled expected counts than this are merged.
pub const MIN_CELL: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub cells: usize,
    /// Set when sparse cells had to be pooled.
    pub warning: Option<String>,
}

/// Two-sample chi-square homogeneity test on count histograms.
///
/// Cells whose combined count is below [`MIN_CELL`] are pooled into one
/// cell (merged further with the smallest regular cell if still sparse).
pub fn chi_square_two_sample<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> ChiSquare {
    let keys: Vec<&K> = a.keys().chain(b.keys()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut cells: Vec<(f64, f64)> = keys
        .iter()
        .map(|k| (a.get(*k).copied().unwrap_or(0) as f64, b.get(*k).copied().unwrap_or(0) as f64))
        .collect();
    let (na, nb): (f64, f64) = cells.iter().fold((0.0, 0.0), |(x, y), (u, v)| (x + u, y + v));
    let mut warning = None;
    // expected count of a cell in the smaller sample
    let scale = na.min(nb) / (na + nb).max(1.0);
    let sparse = |c: &(f64, f64)| (c.0 + c.1) * scale < MIN_CELL;
    if cells.iter().any(sparse) {
        let (small, mut regular): (Vec<_>, Vec<_>) = cells.into_iter().partition(sparse);
        let mut pooled = small.iter().fold((0.0, 0.0), |(x, y), (u, v)| (x + u, y + v));
        if sparse(&pooled) && !regular.is_empty() {
            regular.sort_by(|p, q| (p.0 + p.1).total_cmp(&(q.0 + q.1)));
            let first = regular.remove(0);
            pooled = (pooled.0 + first.0, pooled.1 + first.1);
        }
        warning = Some(format!("pooled {} sparse cells", small.len()));
        regular.push(pooled);
        cells = regular;
    }
    cells.retain(|c| c.0 + c.1 > 0.0);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = cells.iter().map(|(u, v)| (ka * u - kb * v).powi(2) / (u + v)).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive dof").sf(statistic)
    };
    ChiSquare { statistic, dof, p_value, cells: cells.len(), warning }
}

/// Mean with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean and standard error of the mean of `samples`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Self { mean, se: f64::INFINITY };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, se: (var / n).sqrt() }
    }

    /// Whether `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }
}
