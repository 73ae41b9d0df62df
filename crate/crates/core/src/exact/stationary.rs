//! Stationary distributions, including truncated solves for reservoir
//! systems with unbounded occupations.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::exact::{assemble, assemble_truncated, SparseGenerator};
use crate::rates::GeneratorSpec;
use crate::sector::Sector;

/// Chains up to this size are solved by dense LU.
pub const DENSE_LIMIT: usize = 2500;

const MAX_SWEEPS: usize = 1_000_000;

fn reaches_all(n: usize, adj: &crate::sparse::CsrMatrix) -> Option<usize> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(k) = queue.pop_front() {
        for (c, v) in adj.row(k) {
            if v > 0.0 && !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    seen.iter().position(|s| !s)
}

/// `π` with `πQ = 0`, `Σπ = 1`.
///
/// `tol` bounds `‖πQ‖_∞ / Λ` with `Λ` the largest exit rate.
pub fn stationary_distribution(q: &SparseGenerator, tol: f64) -> Result<Vec<f64>> {
    let n = q.len();
    if n == 0 {
        return Err(Error::Input("empty state space".into()));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let fwd = q.off();
    let bwd = q.off().transpose();
    for (adj, dir) in [(fwd, "reach"), (&bwd, "be reached from")] {
        if let Some(k) = reaches_all(n, adj) {
            return Err(Error::Reducible(format!(
                "state {} does not {dir} state {}",
                q.sector().state(k),
                q.sector().state(0)
            )));
        }
    }
    let pi = if n <= DENSE_LIMIT { dense(q)? } else { gauss_seidel(q, &bwd, tol)? };
    Ok(pi)
}

fn dense(q: &SparseGenerator) -> Result<Vec<f64>> {
    let n = q.len();
    let mut a: DMatrix<f64> = q.full().to_dense().transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or_else(|| Error::NonConvergence("singular stationary system".into()))?;
    Ok(x.iter().map(|v| v.max(0.0)).collect())
}

fn gauss_seidel(q: &SparseGenerator, incoming: &crate::sparse::CsrMatrix, tol: f64) -> Result<Vec<f64>> {
    let n = q.len();
    let lambda = q.lambda_max().max(f64::MIN_POSITIVE);
    let mut pi = vec![1.0 / n as f64; n];
    for sweep in 0..MAX_SWEEPS {
        for j in 0..n {
            let inflow: f64 = incoming.row(j).map(|(i, v)| pi[i] * v).sum();
            pi[j] = inflow / -q.diag()[j];
        }
        let z: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= z);
        if sweep % 16 == 15 {
            let res = q.apply_left(&pi).iter().fold(0.0f64, |m, v| m.max(v.abs())) / lambda;
            if res <= tol {
                return Ok(pi);
            }
        }
    }
    Err(Error::NonConvergence(format!("stationary Gauss–Seidel after {MAX_SWEEPS} sweeps")))
}

/// Stationary expectations on per-site truncations `K` and `2K`, with
/// `|m_K − m_{2K}|` as the certificate for the `2K` values.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedNess {
    pub k: u32,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub certificate: Vec<f64>,
    pub states_fine: usize,
}

impl TruncatedNess {
    /// Whether every certificate is below `tol`.
    pub fn certified(&self, tol: f64) -> bool {
        self.certificate.iter().all(|c| *c <= tol)
    }
}

/// Default truncation `⌈4·max ρ⌉ + 8`.
pub fn default_truncation(spec: &GeneratorSpec) -> u32 {
    let rho = spec.reservoirs().iter().map(|r| r.rho).fold(0.0, f64::max);
    (4.0 * rho).ceil() as u32 + 8
}

/// Stationary expectations of `observables` for a reservoir system,
/// solved on the boxes `η_x ≤ K` and `η_x ≤ 2K` (or on the exact
/// capped space when the cap is below `K`).
pub fn truncated_ness(
    spec: &GeneratorSpec,
    k: u32,
    observables: &[&(dyn Fn(&Configuration) -> f64 + Sync)],
    tol: f64,
) -> Result<TruncatedNess> {
    let solve = |level: u32| -> Result<(Vec<f64>, usize)> {
        let sector = Arc::new(Sector::truncated_box(spec.lattice().clone(), level, spec.cap())?);
        let exact = spec.cap().is_some_and(|c| c <= level);
        let q = if exact { assemble(spec, sector.clone())? } else { assemble_truncated(spec, sector.clone())? };
        let pi = stationary_distribution(&q, tol)?;
        let values = observables
            .iter()
            .map(|f| sector.states().iter().zip(&pi).map(|(s, p)| p * f(s)).sum())
            .collect();
        Ok((values, sector.len()))
    };
    let (coarse, _) = solve(k)?;
    let (fine, states_fine) = solve(2 * k)?;
    let certificate = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).collect();
    Ok(TruncatedNess { k, coarse, fine, certificate, states_fine })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::rates::{ChainModel, RateFamily, ReservoirSpec};

    #[test]
    fn single_site_birth_death_is_poisson() {
        let l = Arc::new(Lattice::chain(1).unwrap());
        let spec = GeneratorSpec::reservoir_generator(
            RateFamily::canonical(l.clone(), 0.0).unwrap(),
            vec![ReservoirSpec { site: 0, c: 1.0, rho: 2.0 }],
        )
        .unwrap();
        let s = Arc::new(Sector::truncated_box(l, 30, None).unwrap());
        let q = assemble_truncated(&spec, s.clone()).unwrap();
        let pi = stationary_distribution(&q, 1e-13).unwrap();
        for (state, p) in s.states().iter().zip(&pi) {
            let k = state.occupation(0);
            let pois = (-2.0f64).exp() * 2f64.powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
            assert!((p - pois).abs() < 1e-12, "k={k}: {p} vs {pois}");
        }
    }

    #[test]
    fn irw_profile_is_linear() {
        let m = ChainModel::unit(3, 0.0, 1.0, 5.0).unwrap();
        let spec = m.reservoir_spec().unwrap();
        let obs: Vec<Box<dyn Fn(&Configuration) -> f64 + Sync>> =
            (0..3).map(|x| Box::new(move |c: &Configuration| c.occupation(x) as f64) as _).collect();
        let refs: Vec<&(dyn Fn(&Configuration) -> f64 + Sync)> = obs.iter().map(|b| b.as_ref()).collect();
        let r = truncated_ness(&spec, default_truncation(&spec), &refs, 1e-13).unwrap();
        for (x, expect) in [2.0, 3.0, 4.0].iter().enumerate() {
            assert!((r.fine[x] - expect).abs() < 1e-7, "{:?}", r.fine);
        }
        assert!(r.certified(1e-8));
    }

    #[test]
    fn exclusion_is_solved_exactly() {
        let m = ChainModel::unit(3, -1.0, 0.2, 0.8).unwrap();
        let spec = m.reservoir_spec().unwrap();
        let f = |c: &Configuration| c.occupation(1) as f64;
        let r = truncated_ness(&spec, 4, &[&f], 1e-13).unwrap();
        assert!((r.fine[0] - 0.5).abs() < 1e-12);
        assert_eq!(r.certificate[0], 0.0);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let l = Arc::new(Lattice::new(vec![crate::lattice::SiteKind::Bulk; 2], []).unwrap());
        let spec = GeneratorSpec::closed(RateFamily::canonical(l.clone(), 0.0).unwrap());
        let q = assemble(&spec, Arc::new(Sector::enumerate(l, 1, None).unwrap())).unwrap();
        assert!(matches!(stationary_distribution(&q, 1e-12), Err(Error::Reducible(_))));
    }
}
