//! Occupation-number configurations, labelled coordinates and the
//! combinatorial kernels built on them.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Occupation numbers over all sites of a lattice (bulk and absorbing).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<u32>);

impl Configuration {
    pub fn zero(n_sites: usize) -> Self {
        Self(vec![0; n_sites])
    }

    pub fn from_occupations(occ: Vec<u32>) -> Self {
        Self(occ)
    }

    /// Single particle at `x`.
    pub fn delta(n_sites: usize, x: usize) -> Self {
        let mut c = Self::zero(n_sites);
        c.0[x] = 1;
        c
    }

    pub fn n_sites(&self) -> usize {
        self.0.len()
    }

    pub fn occupation(&self, x: usize) -> u32 {
        self.0[x]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [u32] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }

    /// Total particle number `‖η‖`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `η − δ_x`, or `None` when site `x` is empty.
    pub fn removed(&self, x: usize) -> Option<Self> {
        if self.0[x] == 0 {
            return None;
        }
        let mut c = self.clone();
        c.0[x] -= 1;
        Some(c)
    }

    /// `η + δ_x`.
    pub fn added(&self, x: usize) -> Self {
        let mut c = self.clone();
        c.0[x] += 1;
        c
    }

    /// True when every bulk site is empty.
    pub fn is_absorbed(&self, lattice: &Lattice) -> bool {
        lattice.bulk_sites().all(|x| self.0[x] == 0)
    }

    /// Sorted coordinate vector with one entry per particle.
    pub fn to_coords(&self) -> CoordinateVector {
        CoordinateVector(
            self.0
                .iter()
                .enumerate()
                .flat_map(|(x, &k)| std::iter::repeat_n(x, k as usize))
                .collect(),
        )
    }

    /// Sites with nonzero occupation.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &k)| k > 0).map(|(x, _)| x)
    }

    pub fn check_same_lattice(&self, other: &Self) -> Result<()> {
        if self.0.len() == other.0.len() {
            Ok(())
        } else {
            Err(Error::LatticeMismatch(format!(
                "configurations over {} and {} sites",
                self.0.len(),
                other.0.len()
            )))
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// Labelled particle positions `(x_1, …, x_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoordinateVector(pub Vec<usize>);

impl CoordinateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The coordinate vector with the `k`-th entry removed.
    pub fn without(&self, k: usize) -> Self {
        let mut v = self.0.clone();
        v.remove(k);
        Self(v)
    }
}

impl From<Vec<usize>> for CoordinateVector {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// `φ(x) = Σ_i δ_{x_i}`: forgets labels.
pub fn phi(lattice: &Lattice, coords: &CoordinateVector) -> Result<Configuration> {
    let mut c = Configuration::zero(lattice.n_sites());
    for &x in &coords.0 {
        lattice.check_site(x)?;
        c.0[x] += 1;
    }
    Ok(c)
}

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `F(ξ, η) = Π_j C(η_j, ξ_j)`.
pub fn binomial_f(xi: &Configuration, eta: &Configuration) -> Result<u64> {
    xi.check_same_lattice(eta)?;
    Ok(xi.0.iter().zip(&eta.0).map(|(&k, &n)| binomial(n, k)).product())
}

/// All `C(n, m)` index-ordered subselections `(x_{i1}, …, x_{im})`,
/// `i1 < … < im`. Repeated positions give repeated members.
pub fn combinations(coords: &CoordinateVector, m: usize) -> Result<Vec<CoordinateVector>> {
    let n = coords.len();
    if m == 0 || m > n {
        return Err(Error::Input(format!("combination size {m} out of range 1..={n}")));
    }
    Ok((0..n)
        .combinations(m)
        .map(|idx| CoordinateVector(idx.into_iter().map(|i| coords.0[i]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_sites() -> Lattice {
        Lattice::chain(2).unwrap()
    }

    #[test]
    fn phi_examples() {
        let l = two_sites();
        assert_eq!(phi(&l, &vec![0, 0].into()).unwrap().as_slice(), &[2, 0]);
        assert_eq!(phi(&l, &vec![0, 1].into()).unwrap(), phi(&l, &vec![1, 0].into()).unwrap());
        let empty = phi(&l, &vec![].into()).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(matches!(phi(&l, &vec![2].into()), Err(Error::UnknownSite(2))));
    }

    #[test]
    fn binomial_f_examples() {
        let eta = Configuration::from_occupations(vec![3, 1, 2]);
        let zero = Configuration::zero(3);
        assert_eq!(binomial_f(&zero, &eta).unwrap(), 1);
        for x in 0..3 {
            assert_eq!(binomial_f(&Configuration::delta(3, x), &eta).unwrap(), eta.occupation(x) as u64);
        }
        assert_eq!(binomial_f(&eta, &eta).unwrap(), 1);
        let other = Configuration::from_occupations(vec![2, 2, 2]);
        assert_eq!(binomial_f(&other, &eta).unwrap(), 0);
        let xi = Configuration::from_occupations(vec![2, 0, 1]);
        assert_eq!(binomial_f(&xi, &eta).unwrap(), 3 * 2);
        assert!(binomial_f(&Configuration::zero(2), &eta).is_err());
    }

    #[test]
    fn combinations_examples() {
        let full: CoordinateVector = vec![4, 5, 6].into();
        assert_eq!(combinations(&full, 3).unwrap(), vec![full.clone()]);
        let pairs = combinations(&full, 2).unwrap();
        assert_eq!(pairs, vec![vec![4, 5].into(), vec![4, 6].into(), vec![5, 6].into()]);
        let dup: CoordinateVector = vec![1, 1].into();
        assert_eq!(combinations(&dup, 1).unwrap(), vec![vec![1].into(), vec![1].into()]);
        assert!(combinations(&full, 0).is_err());
        assert!(combinations(&full, 4).is_err());
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(2, 3), 0);
        assert_eq!(binomial(10, 7), 120);
    }

    proptest! {
        #[test]
        fn phi_is_permutation_invariant(coords in proptest::collection::vec(0usize..5, 0..8), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let l = Lattice::chain(5).unwrap();
            let mut shuffled = coords.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = phi(&l, &coords.clone().into()).unwrap();
            let b = phi(&l, &shuffled.into()).unwrap();
            prop_assert_eq!(a.total() as usize, coords.len());
            prop_assert_eq!(a.clone(), b);
            prop_assert_eq!(phi(&l, &a.to_coords()).unwrap(), a);
        }
    }
}
