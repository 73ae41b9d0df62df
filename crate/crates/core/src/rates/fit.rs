//! Recovering `(θ, α)` from a tabulated hop rate, or locating the first
//! violated consistency condition.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::rates::{EdgeRates, RateFamily};

/// Largest probe window used by default.
pub const DEFAULT_WINDOW: u32 = 4;

/// Rates of one edge in both directions over a `(κ, m)` window.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTable {
    pub i: usize,
    pub j: usize,
    /// `forward[κ][m] = c_{i,j}(κ, m)`: κ particles at `i`, m at `j`.
    pub forward: Vec<Vec<f64>>,
    /// `backward[κ][m] = c_{j,i}(κ, m)`: κ particles at `j`, m at `i`.
    pub backward: Vec<Vec<f64>>,
}

/// Tabulated hop rates `c_{i,j}(κ, m)` for `κ, m ∈ {0, …, window}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HopTable {
    lattice: Arc<Lattice>,
    window: u32,
    cap: Option<u32>,
    edges: Vec<EdgeTable>,
}

impl HopTable {
    /// Tabulates `rate(from, to, κ, m)` on every lattice edge.
    pub fn from_fn(
        lattice: Arc<Lattice>,
        window: u32,
        cap: Option<u32>,
        rate: impl Fn(usize, usize, u32, u32) -> f64,
    ) -> Result<Self> {
        if window < 1 {
            return Err(Error::Input("rate table window must be at least 1".into()));
        }
        if let Some(cap) = cap {
            if window > cap {
                return Err(Error::Input(format!("window {window} exceeds cap {cap}")));
            }
        }
        let tab = |from: usize, to: usize| -> Vec<Vec<f64>> {
            (0..=window).map(|k| (0..=window).map(|m| rate(from, to, k, m)).collect()).collect()
        };
        let edges = lattice
            .edges()
            .iter()
            .map(|&(i, j, _)| EdgeTable { i, j, forward: tab(i, j), backward: tab(j, i) })
            .collect();
        Ok(Self { lattice, window, cap, edges })
    }

    /// The default window: `min(cap, 4)`.
    pub fn default_window(cap: Option<u32>) -> u32 {
        cap.map_or(DEFAULT_WINDOW, |c| c.min(DEFAULT_WINDOW))
    }

    /// Tabulates a family's own rates.
    pub fn from_family(family: &RateFamily, window: u32) -> Result<Self> {
        let lattice = family.lattice().clone();
        let edges = family.edges().to_vec();
        Self::from_fn(lattice, window, family.cap(), move |from, to, k, m| {
            edges
                .iter()
                .find(|e| (e.i == from && e.j == to) || (e.i == to && e.j == from))
                .map_or(0.0, |e| e.rate(from, k, m))
        })
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn edges(&self) -> &[EdgeTable] {
        &self.edges
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// `c(κ,m)(κ−1) = c(κ−1,m)κ`: rates are `κ·b(m)`.
    Homogeneity,
    /// `b(m) − b(m−1)` is the same for every `m`.
    ConstantIncrement,
    /// The increments agree between the two hop directions.
    DirectionMismatch,
    /// A tabulated or fitted rate is negative.
    NegativeRate,
    /// A capped family lets a particle hop onto a full site.
    FullSiteEntry,
}

/// Why a table is not of the consistent form, with the first witness.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub condition: Condition,
    pub edge: (usize, usize),
    pub from: usize,
    pub to: usize,
    pub kappa: u32,
    pub m: u32,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} violated on edge ({},{}) for hops {}→{} at κ={}, m={}: {} ≠ {}",
            self.condition, self.edge.0, self.edge.1, self.from, self.to, self.kappa, self.m, self.lhs, self.rhs
        )
    }
}

/// Checks the consistency conditions on every edge and, on success,
/// returns the fitted family with `α(i,j) = c_{i,j}(1,0)` and
/// `θ = c(1,1) − c(1,0)`.
pub fn fit_consistent_form(table: &HopTable) -> std::result::Result<RateFamily, Rejection> {
    let scale = table
        .edges
        .iter()
        .flat_map(|e| e.forward.iter().chain(&e.backward).flatten())
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * scale;
    let window = table.window;
    let mut fitted = Vec::with_capacity(table.edges.len());

    for e in &table.edges {
        let dirs = [(e.i, e.j, &e.forward), (e.j, e.i, &e.backward)];
        let mut increments = [0.0f64; 2];
        let mut alphas = [0.0f64; 2];
        for (d, &(from, to, c)) in dirs.iter().enumerate() {
            let reject = |condition, kappa, m, lhs, rhs| Rejection {
                condition,
                edge: (e.i, e.j),
                from,
                to,
                kappa,
                m,
                lhs,
                rhs,
            };
            for k in 0..=window {
                for m in 0..=window {
                    let v = c[k as usize][m as usize];
                    if v < -tol {
                        return Err(reject(Condition::NegativeRate, k, m, v, 0.0));
                    }
                }
            }
            for k in 1..=window {
                for m in 0..=window {
                    let lhs = c[k as usize][m as usize] * (k as f64 - 1.0);
                    let rhs = c[k as usize - 1][m as usize] * k as f64;
                    if (lhs - rhs).abs() > tol {
                        return Err(reject(Condition::Homogeneity, k, m, lhs, rhs));
                    }
                }
            }
            let b = |m: u32| c[1][m as usize];
            let first = b(1) - b(0);
            for m in 2..=window {
                let inc = b(m) - b(m - 1);
                if (inc - first).abs() > tol {
                    return Err(reject(Condition::ConstantIncrement, 1, m, inc, first));
                }
            }
            increments[d] = first;
            alphas[d] = b(0);
        }
        if (increments[0] - increments[1]).abs() > tol {
            return Err(Rejection {
                condition: Condition::DirectionMismatch,
                edge: (e.i, e.j),
                from: e.i,
                to: e.j,
                kappa: 1,
                m: 1,
                lhs: increments[0],
                rhs: increments[1],
            });
        }
        let rates = EdgeRates { i: e.i, j: e.j, theta: increments[0], alpha_ij: alphas[0], alpha_ji: alphas[1] };
        let probe = table.cap.unwrap_or(crate::rates::UNCAPPED_PROBE);
        for (from, to) in [(e.i, e.j), (e.j, e.i)] {
            let witness = |condition, kappa, m, lhs| Rejection {
                condition,
                edge: (e.i, e.j),
                from,
                to,
                kappa,
                m,
                lhs,
                rhs: 0.0,
            };
            for k in 1..=probe {
                for m in 0..=probe {
                    let v = rates.rate(from, k, m);
                    if v < -tol {
                        return Err(witness(Condition::NegativeRate, k, m, v));
                    }
                }
            }
            if let Some(cap) = table.cap {
                let v = rates.rate(from, 1, cap);
                if v.abs() > tol {
                    return Err(witness(Condition::FullSiteEntry, 1, cap, v));
                }
            }
        }
        fitted.push(rates);
    }
    Ok(RateFamily::new(table.lattice.clone(), fitted, table.cap)
        .expect("fitted rates were validated on the family's probe window"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Arc<Lattice> {
        Arc::new(Lattice::chain(2).unwrap())
    }

    #[test]
    fn accepts_inclusion_form() {
        let t = HopTable::from_fn(pair(), 4, None, |_, _, k, m| (k * (1 + m)) as f64).unwrap();
        let f = fit_consistent_form(&t).unwrap();
        let e = &f.edges()[0];
        assert_eq!((e.theta, e.alpha_ij, e.alpha_ji), (1.0, 1.0, 1.0));
    }

    #[test]
    fn rejects_kappa_squared_m() {
        let t = HopTable::from_fn(pair(), 4, None, |_, _, k, m| (k * k * m) as f64).unwrap();
        let r = fit_consistent_form(&t).unwrap_err();
        assert_eq!(r.condition, Condition::Homogeneity);
        // c(2,1)·1 = 4 against c(1,1)·2 = 2
        assert_eq!((r.kappa, r.m), (2, 1));
        assert_eq!((r.lhs, r.rhs), (4.0, 2.0));
    }

    #[test]
    fn accepts_asymmetric_alpha() {
        let t = HopTable::from_fn(pair(), 4, None, |from, _, k, m| {
            let alpha = if from == 0 { 2.0 } else { 5.0 };
            k as f64 * (m as f64 + alpha)
        })
        .unwrap();
        let f = fit_consistent_form(&t).unwrap();
        let e = &f.edges()[0];
        assert_eq!((e.theta, e.alpha_ij, e.alpha_ji), (1.0, 2.0, 5.0));
    }

    #[test]
    fn detects_direction_mismatch_in_exclusion() {
        // SEP(1) with c_{0,1}(1,0) raised to 1.1; hopping onto a full site stays 0
        let t = HopTable::from_fn(pair(), 1, Some(1), |from, _, k, m| {
            let base = k as f64 * (1.0 - m as f64);
            if from == 0 && k == 1 && m == 0 {
                base + 0.1
            } else {
                base
            }
        })
        .unwrap();
        let r = fit_consistent_form(&t).unwrap_err();
        assert_eq!(r.condition, Condition::DirectionMismatch);
        assert_eq!(r.edge, (0, 1));
    }

    #[test]
    fn detects_nonconstant_increment() {
        let t = HopTable::from_fn(pair(), 4, None, |_, _, k, m| k as f64 * (1.0 + (m * m) as f64)).unwrap();
        assert_eq!(fit_consistent_form(&t).unwrap_err().condition, Condition::ConstantIncrement);
    }

    #[test]
    fn detects_negative_rates() {
        let t = HopTable::from_fn(pair(), 4, None, |_, _, k, m| k as f64 * (1.0 - m as f64)).unwrap();
        assert_eq!(fit_consistent_form(&t).unwrap_err().condition, Condition::NegativeRate);
    }

    #[test]
    fn canonical_families_round_trip() {
        let l = Arc::new(Lattice::complete(4, |i, j| 0.5 + (i + 2 * j) as f64 * 0.25).unwrap());
        for theta in [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let fam = RateFamily::canonical(l.clone(), theta).unwrap();
            let window = HopTable::default_window(fam.cap());
            let fitted = fit_consistent_form(&HopTable::from_family(&fam, window).unwrap()).unwrap();
            for (a, b) in fam.edges().iter().zip(fitted.edges()) {
                assert!((a.theta - b.theta).abs() < 1e-12);
                assert!((a.alpha_ij - b.alpha_ij).abs() < 1e-12);
                assert!((a.alpha_ji - b.alpha_ji).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_validation() {
        assert!(HopTable::from_fn(pair(), 0, None, |_, _, _, _| 0.0).is_err());
        assert!(HopTable::from_fn(pair(), 2, Some(1), |_, _, _, _| 0.0).is_err());
        assert_eq!(HopTable::default_window(Some(1)), 1);
        assert_eq!(HopTable::default_window(None), 4);
    }
}
