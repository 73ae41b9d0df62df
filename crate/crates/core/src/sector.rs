//! Enumerated state spaces: fixed-particle sectors `Ω_n` and truncated
//! boxes for reservoir systems.

use std::collections::HashMap;
use std::sync::Arc;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// An explicitly enumerated set of configurations with a reverse index.
///
/// States are listed in descending lexicographic order of the occupation
/// vector. The per-site cap applies to bulk sites only; absorbing sites
/// are never capped.
#[derive(Clone, Debug)]
pub struct Sector {
    lattice: Arc<Lattice>,
    particles: Option<u32>,
    cap: Option<u32>,
    caps: Vec<Option<u32>>,
    states: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
}

impl Sector {
    /// All configurations with exactly `n` particles respecting `cap`.
    pub fn enumerate(lattice: Arc<Lattice>, n: u32, cap: Option<u32>) -> Result<Self> {
        let caps = site_caps(&lattice, cap);
        let capacity: Option<u64> = caps.iter().try_fold(0u64, |acc, c| c.map(|c| acc + c as u64));
        if let Some(capacity) = capacity {
            if n as u64 > capacity {
                return Err(Error::EmptySector { particles: n, capacity });
            }
        }
        let mut states = Vec::new();
        let mut current = vec![0u32; lattice.n_sites()];
        fill_fixed(&caps, 0, n, &mut current, &mut states);
        Ok(Self::from_states(lattice, Some(n), cap, caps, states))
    }

    /// All configurations with `η_x ≤ min(max_per_site, cap)` at every site,
    /// with any particle number.
    pub fn truncated_box(lattice: Arc<Lattice>, max_per_site: u32, cap: Option<u32>) -> Result<Self> {
        let caps: Vec<Option<u32>> = site_caps(&lattice, cap)
            .into_iter()
            .map(|c| Some(c.map_or(max_per_site, |c| c.min(max_per_site))))
            .collect();
        let size: f64 = caps.iter().map(|c| c.unwrap() as f64 + 1.0).product();
        if size > 5.0e7 {
            return Err(Error::Infeasible(format!("truncated box with {size:.3e} states")));
        }
        let mut states = Vec::new();
        let mut current = vec![0u32; lattice.n_sites()];
        fill_box(&caps, 0, &mut current, &mut states);
        Ok(Self::from_states(lattice, None, cap, caps, states))
    }

    fn from_states(
        lattice: Arc<Lattice>,
        particles: Option<u32>,
        cap: Option<u32>,
        caps: Vec<Option<u32>>,
        states: Vec<Configuration>,
    ) -> Self {
        let index = states.iter().enumerate().map(|(k, s)| (s.clone(), k)).collect();
        Self { lattice, particles, cap, caps, states, index }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    /// Particle number, or `None` for a truncated box.
    pub fn particles(&self) -> Option<u32> {
        self.particles
    }

    pub fn cap(&self) -> Option<u32> {
        self.cap
    }

    /// Effective per-site bound (cap or truncation level); `None` = unbounded.
    pub fn site_bound(&self, x: usize) -> Option<u32> {
        self.caps[x]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &Configuration {
        &self.states[k]
    }

    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Index lookup that reports a missing state as an error.
    pub fn require(&self, c: &Configuration) -> Result<usize> {
        self.index_of(c)
            .ok_or_else(|| Error::Input(format!("configuration {c} is not in the sector")))
    }

    /// Whether two sectors live on the same lattice with the same cap.
    pub fn compatible(&self, other: &Sector) -> bool {
        (Arc::ptr_eq(&self.lattice, &other.lattice) || *self.lattice == *other.lattice) && self.cap == other.cap
    }
}

fn site_caps(lattice: &Lattice, cap: Option<u32>) -> Vec<Option<u32>> {
    (0..lattice.n_sites())
        .map(|x| if lattice.is_absorbing(x) { None } else { cap })
        .collect()
}

fn fill_fixed(caps: &[Option<u32>], site: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<Configuration>) {
    if site == caps.len() - 1 {
        if caps[site].is_none_or(|c| remaining <= c) {
            current[site] = remaining;
            out.push(Configuration::from_occupations(current.clone()));
            current[site] = 0;
        }
        return;
    }
    let rest_capacity: Option<u64> = caps[site + 1..].iter().try_fold(0u64, |acc, c| c.map(|c| acc + c as u64));
    let hi = caps[site].map_or(remaining, |c| c.min(remaining));
    let lo = rest_capacity.map_or(0, |rc| (remaining as u64).saturating_sub(rc) as u32);
    for k in (lo..=hi).rev() {
        current[site] = k;
        fill_fixed(caps, site + 1, remaining - k, current, out);
    }
    current[site] = 0;
}

fn fill_box(caps: &[Option<u32>], site: usize, current: &mut Vec<u32>, out: &mut Vec<Configuration>) {
    if site == caps.len() {
        out.push(Configuration::from_occupations(current.clone()));
        return;
    }
    for k in (0..=caps[site].unwrap()).rev() {
        current[site] = k;
        fill_box(caps, site + 1, current, out);
    }
    current[site] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SiteKind;

    fn bulk(n: usize) -> Arc<Lattice> {
        Arc::new(Lattice::new(vec![SiteKind::Bulk; n], []).unwrap())
    }

    #[test]
    fn stars_and_bars() {
        let s = Sector::enumerate(bulk(2), 2, None).unwrap();
        let v: Vec<_> = s.states().iter().map(|c| c.as_slice().to_vec()).collect();
        assert_eq!(v, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(Sector::enumerate(bulk(3), 2, None).unwrap().len(), 6);
    }

    #[test]
    fn capped_sector() {
        let s = Sector::enumerate(bulk(2), 2, Some(1)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.state(0).as_slice(), &[1, 1]);
        assert!(matches!(Sector::enumerate(bulk(2), 3, Some(1)), Err(Error::EmptySector { .. })));
    }

    #[test]
    fn absorbing_sites_are_uncapped() {
        let l = Arc::new(Lattice::absorbing_chain(1).unwrap());
        let s = Sector::enumerate(l, 3, Some(1)).unwrap();
        // one bulk site with cap 1, two absorbing sites: k_bulk ∈ {0,1}
        assert_eq!(s.len(), 4 + 3);
        assert!(s.states().iter().all(|c| c.occupation(1) <= 1));
    }

    #[test]
    fn zero_particles() {
        let s = Sector::enumerate(bulk(4), 0, None).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.state(0).total(), 0);
    }

    #[test]
    fn round_trip_index() {
        let s = Sector::enumerate(bulk(4), 3, Some(2)).unwrap();
        for (k, c) in s.states().iter().enumerate() {
            assert_eq!(s.index_of(c), Some(k));
            assert_eq!(c.total(), 3);
        }
        let mut sorted = s.states().to_vec();
        sorted.sort_by(|a, b| b.cmp(a));
        assert_eq!(sorted, s.states());
    }

    #[test]
    fn truncated_box_counts() {
        let s = Sector::truncated_box(bulk(3), 2, None).unwrap();
        assert_eq!(s.len(), 27);
        assert_eq!(s.particles(), None);
        let capped = Sector::truncated_box(bulk(3), 5, Some(1)).unwrap();
        assert_eq!(capped.len(), 8);
    }
}
