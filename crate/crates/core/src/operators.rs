//! Annihilation and creation operators acting on functions over sectors.
//!
//! A function on a sector is a dense `Vec<f64>` indexed like the sector's
//! states. The total annihilation operator maps functions on `Ω_{n-1}` to
//! functions on `Ω_n`: `(𝒜f)(η) = Σ_x η_x f(η − δ_x)`.

use crate::error::{Error, Result};
use crate::sector::Sector;
use crate::sparse::CsrMatrix;

fn check_pair(upper: &Sector, lower: &Sector) -> Result<()> {
    if !upper.compatible(lower) {
        return Err(Error::LatticeMismatch("sectors differ in lattice or cap".into()));
    }
    match (upper.particles(), lower.particles()) {
        (Some(n), Some(m)) if n == m + 1 => Ok(()),
        (n, m) => Err(Error::Input(format!("expected sectors n and n-1, got {n:?} and {m:?}"))),
    }
}

/// Matrix of `𝒜`: rows index `sector_n`, columns index `sector_nm1`;
/// row `η` has entry `η_x` at column `η − δ_x`.
pub fn annihilation_matrix(sector_n: &Sector, sector_nm1: &Sector) -> Result<CsrMatrix> {
    check_pair(sector_n, sector_nm1)?;
    let mut trip = Vec::new();
    for (r, eta) in sector_n.states().iter().enumerate() {
        for x in eta.support() {
            let lower = eta.removed(x).expect("occupied site");
            let c = sector_nm1.require(&lower)?;
            trip.push((r, c, eta.occupation(x) as f64));
        }
    }
    Ok(CsrMatrix::from_triplets(sector_n.len(), sector_nm1.len(), trip))
}

/// Single-site annihilation `a_x`: `(a_x f)(η) = η_x f(η − δ_x)`, mapping
/// `f` on `lower` (`n-1` particles) to a function on `upper`.
pub fn site_annihilation_apply(f: &[f64], lower: &Sector, upper: &Sector, site: usize) -> Result<Vec<f64>> {
    check_pair(upper, lower)?;
    upper.lattice().check_site(site)?;
    if f.len() != lower.len() {
        return Err(Error::Input("function length does not match sector".into()));
    }
    upper
        .states()
        .iter()
        .map(|eta| match eta.removed(site) {
            None => Ok(0.0),
            Some(prev) => Ok(eta.occupation(site) as f64 * f[lower.require(&prev)?]),
        })
        .collect()
}

/// Creation `a†_j`: `(a†_j f)(η) = f(η + δ_j)`, mapping `f` on `upper`
/// (`n+1` particles) to a function on `lower`. States where `η + δ_j`
/// exceeds the cap map to zero.
pub fn creation_apply(f: &[f64], upper: &Sector, lower: &Sector, site: usize) -> Result<Vec<f64>> {
    check_pair(upper, lower)?;
    upper.lattice().check_site(site)?;
    if f.len() != upper.len() {
        return Err(Error::Input("function length does not match sector".into()));
    }
    Ok(lower
        .states()
        .iter()
        .map(|eta| upper.index_of(&eta.added(site)).map_or(0.0, |k| f[k]))
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::config::{binomial_f, Configuration};
    use crate::lattice::Lattice;

    fn sectors(l: &Arc<Lattice>, max: u32, cap: Option<u32>) -> Vec<Sector> {
        (0..=max).map(|n| Sector::enumerate(l.clone(), n, cap).unwrap()).collect()
    }

    #[test]
    fn constant_function_maps_to_particle_number() {
        let l = Arc::new(Lattice::chain(3).unwrap());
        let s = sectors(&l, 3, None);
        let a = annihilation_matrix(&s[3], &s[2]).unwrap();
        let out = a.matvec(&vec![1.0; s[2].len()]);
        assert!(out.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn indicator_picks_single_term() {
        let l = Arc::new(Lattice::chain(3).unwrap());
        let s = sectors(&l, 2, None);
        let xi = Configuration::from_occupations(vec![1, 0, 0]);
        let mut f = vec![0.0; s[1].len()];
        f[s[1].index_of(&xi).unwrap()] = 1.0;
        let out = annihilation_matrix(&s[2], &s[1]).unwrap().matvec(&f);
        for (k, eta) in s[2].states().iter().enumerate() {
            let expected = (0..3)
                .filter(|&x| xi.added(x) == *eta)
                .map(|x| eta.occupation(x) as f64)
                .sum::<f64>();
            assert_eq!(out[k], expected);
        }
    }

    #[test]
    fn mismatched_sectors_rejected() {
        let l = Arc::new(Lattice::chain(3).unwrap());
        let other = Arc::new(Lattice::chain(4).unwrap());
        let a = Sector::enumerate(l.clone(), 2, None).unwrap();
        let b = Sector::enumerate(other, 1, None).unwrap();
        assert!(annihilation_matrix(&a, &b).is_err());
        let c = Sector::enumerate(l, 0, None).unwrap();
        assert!(annihilation_matrix(&a, &c).is_err());
    }

    #[test]
    fn creation_examples() {
        let l = Arc::new(Lattice::chain(2).unwrap());
        let s = sectors(&l, 3, None);
        let ones = vec![1.0; s[2].len()];
        assert!(creation_apply(&ones, &s[2], &s[1], 0).unwrap().iter().all(|&v| v == 1.0));

        let xi = Configuration::from_occupations(vec![1, 1]);
        let mut ind = vec![0.0; s[2].len()];
        ind[s[2].index_of(&xi).unwrap()] = 1.0;
        let out = creation_apply(&ind, &s[2], &s[1], 0).unwrap();
        for (k, eta) in s[1].states().iter().enumerate() {
            let expected = if Some(eta.clone()) == xi.removed(0) { 1.0 } else { 0.0 };
            assert_eq!(out[k], expected);
        }
        assert!(creation_apply(&ind, &s[2], &s[1], 7).is_err());
    }

    #[test]
    fn creation_at_capped_site_is_zero() {
        let l = Arc::new(Lattice::chain(2).unwrap());
        let s = sectors(&l, 2, Some(1));
        let out = creation_apply(&[5.0], &s[2], &s[1], 0).unwrap();
        // (1,0)+δ_0 exceeds the cap, (0,1)+δ_0 = (1,1)
        let k10 = s[1].index_of(&Configuration::from_occupations(vec![1, 0])).unwrap();
        let k01 = s[1].index_of(&Configuration::from_occupations(vec![0, 1])).unwrap();
        assert_eq!(out[k10], 0.0);
        assert_eq!(out[k01], 5.0);
    }

    #[test]
    fn canonical_commutation_relation() {
        // (a_j a†_j − a†_j a_j) f = f on an uncapped sector
        let l = Arc::new(Lattice::chain(3).unwrap());
        let s = sectors(&l, 4, None);
        let n = 2;
        let f: Vec<f64> = (0..s[n].len()).map(|k| (k as f64 * 0.37).sin() + 2.0).collect();
        for j in 0..3 {
            let created = creation_apply(&f, &s[n], &s[n - 1], j).unwrap();
            let left = site_annihilation_apply(&created, &s[n - 1], &s[n], j).unwrap();
            let annihilated = site_annihilation_apply(&f, &s[n], &s[n + 1], j).unwrap();
            let right = creation_apply(&annihilated, &s[n + 1], &s[n], j).unwrap();
            for k in 0..f.len() {
                assert!((right[k] - left[k] - f[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exponential_of_annihilation_gives_binomial_kernel() {
        // Σ_k 𝒜^k/k! δ_ξ restricted to Ω_{|ξ|+k} equals F(ξ, ·)
        let l = Arc::new(Lattice::chain(3).unwrap());
        for cap in [None, Some(2)] {
            let s = sectors(&l, 5, cap);
            for xi in s[2].states() {
                let mut f = vec![0.0; s[2].len()];
                f[s[2].index_of(xi).unwrap()] = 1.0;
                let mut factorial = 1.0;
                for k in 1..=3usize {
                    let n = 2 + k;
                    f = annihilation_matrix(&s[n], &s[n - 1]).unwrap().matvec(&f);
                    factorial *= k as f64;
                    for (idx, eta) in s[n].states().iter().enumerate() {
                        let expect = binomial_f(xi, eta).unwrap() as f64;
                        assert!((f[idx] / factorial - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn annihilation_row_sums_equal_n() {
        let l = Arc::new(Lattice::absorbing_chain(2).unwrap());
        let s = sectors(&l, 3, Some(1));
        let a = annihilation_matrix(&s[3], &s[2]).unwrap();
        for r in 0..a.n_rows() {
            assert_eq!(a.row(r).map(|(_, v)| v).sum::<f64>(), 3.0);
        }
    }
}
