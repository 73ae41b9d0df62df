//! Instantaneous thermalization of an edge: the pair `(η_i, η_j)` is
//! resampled from the equilibrium product measure conditioned on the
//! edge total.

use crate::config::binomial;
use crate::error::{Error, Result};
use crate::rates::{cap_for_theta, RateFamily};

/// Unnormalized single-site weight `w_θ(n)` with the density dependence
/// removed: `1/n!`, `θ^n (1/θ)^{(n)}/n!` or `C(1/|θ|, n)`.
pub fn single_site_weight(theta: f64, n: u32) -> f64 {
    if theta == 0.0 {
        (1..=n).fold(1.0, |acc, k| acc / k as f64)
    } else if theta > 0.0 {
        // θ^n (1/θ)(1/θ+1)…(1/θ+n−1) / n! = Π (1 + θk)/(k+1)
        (0..n).fold(1.0, |acc, k| acc * (1.0 + theta * k as f64) / (k + 1) as f64)
    } else {
        let inv = (-1.0 / theta).round() as u32;
        binomial(inv, n) as f64
    }
}

/// `ν̄_θ(m | M)` for `m = 0..=M`.
pub fn thermalized_edge_distribution(theta: f64, total: u32, cap: Option<u32>) -> Result<Vec<f64>> {
    let cap = match (cap, cap_for_theta(theta)?) {
        (Some(c), _) => Some(c),
        (None, implied) => implied,
    };
    if let Some(c) = cap {
        if total > 2 * c {
            return Err(Error::Infeasible(format!("edge total {total} exceeds capacity {}", 2 * c)));
        }
    }
    let fits = |k: u32| cap.is_none_or(|c| k <= c);
    let mut w: Vec<f64> = (0..=total)
        .map(|m| {
            if fits(m) && fits(total - m) {
                single_site_weight(theta, m) * single_site_weight(theta, total - m)
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = w.iter().sum();
    if z <= 0.0 {
        return Err(Error::Infeasible(format!("no admissible split of {total} particles")));
    }
    w.iter_mut().for_each(|v| *v /= z);
    Ok(w)
}

/// Thermalized dynamics built on a canonical θ-family: each edge
/// `{i, j}` resamples its pair at rate `p(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Thermalized {
    family: RateFamily,
    theta: f64,
}

impl Thermalized {
    pub fn new(family: RateFamily) -> Result<Self> {
        let theta = family
            .theta()
            .ok_or_else(|| Error::InvalidParameter("thermalization needs a canonical θ-family".into()))?;
        Ok(Self { family, theta })
    }

    pub fn family(&self) -> &RateFamily {
        &self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn distribution(&self, total: u32) -> Result<Vec<f64>> {
        thermalized_edge_distribution(self.theta, total, self.family.cap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn independent_walkers_split_binomially() {
        let d = thermalized_edge_distribution(0.0, 2, None).unwrap();
        assert_abs_diff_eq!(d.as_slice(), [0.25, 0.5, 0.25].as_slice(), epsilon = 1e-15);
    }

    #[test]
    fn exclusion_splits() {
        assert_eq!(thermalized_edge_distribution(-1.0, 2, Some(1)).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(thermalized_edge_distribution(-1.0, 1, Some(1)).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(thermalized_edge_distribution(-1.0, 3, Some(1)), Err(Error::Infeasible(_))));
        assert!(thermalized_edge_distribution(-0.5, 5, None).is_err());
    }

    #[test]
    fn symmetric_under_reflection() {
        for theta in [-0.5, 0.0, 0.5, 1.0, 2.0] {
            for total in 0..=4 {
                let d = thermalized_edge_distribution(theta, total, None).unwrap();
                let sum: f64 = d.iter().sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
                for m in 0..=total as usize {
                    assert_abs_diff_eq!(d[m], d[total as usize - m], epsilon = 1e-15);
                }
            }
        }
    }

    /// Conditioning the normalized marginals at two densities must give
    /// the same split law.
    #[test]
    fn conditional_law_is_density_free() {
        fn marginal(theta: f64, rho: f64, n: u32) -> f64 {
            if theta == 0.0 {
                (-rho).exp() * rho.powi(n as i32) / (1..=n).map(f64::from).product::<f64>()
            } else if theta > 0.0 {
                let r = 1.0 / theta;
                let p = theta * rho / (1.0 + theta * rho);
                let rising: f64 = (0..n).map(|k| r + k as f64).product();
                rising / (1..=n).map(f64::from).product::<f64>() * p.powi(n as i32) * (1.0 - p).powf(r)
            } else {
                let k = (-1.0 / theta).round() as u32;
                if n > k {
                    return 0.0;
                }
                let p = -theta * rho;
                binomial(k, n) as f64 * p.powi(n as i32) * (1.0 - p).powi((k - n) as i32)
            }
        }
        for theta in [-0.5, 0.0, 1.0, 2.0] {
            let total = 3;
            let cond = |rho: f64| {
                let w: Vec<f64> = (0..=total).map(|m| marginal(theta, rho, m) * marginal(theta, rho, total - m)).collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|v| v / z).collect::<Vec<_>>()
            };
            let (a, b) = (cond(0.3), cond(1.7));
            let d = thermalized_edge_distribution(theta, total, None).unwrap();
            for m in 0..=total as usize {
                assert_abs_diff_eq!(a[m], b[m], epsilon = 1e-12);
                assert_abs_diff_eq!(a[m], d[m], epsilon = 1e-12);
            }
        }
    }
}
