//! Finite lattices: bulk sites, absorbing sites and symmetric edge weights.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SiteKind {
    Bulk,
    Absorbing,
}

/// A finite site set `V ∪ V_abs` with symmetric hopping weights `p` on
/// unordered pairs of bulk sites.
///
/// Sites are addressed by dense indices `0..n_sites()`. Every site also
/// carries an integer label used for display and for model files; on the
/// absorbing chain the label equals the index.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    kinds: Vec<SiteKind>,
    labels: Vec<i64>,
    edges: Vec<(usize, usize, f64)>,
    weights: BTreeMap<(usize, usize), f64>,
}

impl Lattice {
    /// Builds a lattice from site kinds and `(i, j, p)` edges.
    ///
    /// Edges are unordered; `p` must be finite and nonnegative, both ends
    /// must be bulk sites and a pair may appear only once. Zero-weight edges
    /// are dropped.
    pub fn new(kinds: Vec<SiteKind>, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if !kinds.contains(&SiteKind::Bulk) {
            return Err(Error::Input("lattice needs at least one bulk site".into()));
        }
        let mut weights = BTreeMap::new();
        for (i, j, p) in edges {
            let n = kinds.len();
            if i >= n {
                return Err(Error::UnknownSite(i));
            }
            if j >= n {
                return Err(Error::UnknownSite(j));
            }
            if i == j {
                return Err(Error::Input(format!("self-loop at site {i}")));
            }
            if kinds[i] != SiteKind::Bulk || kinds[j] != SiteKind::Bulk {
                return Err(Error::Input(format!("edge ({i},{j}) touches an absorbing site")));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidParameter(format!("edge weight p({i},{j}) = {p}")));
            }
            let key = (i.min(j), i.max(j));
            if weights.insert(key, p).is_some() {
                return Err(Error::Input(format!("duplicate edge ({i},{j})")));
            }
        }
        weights.retain(|_, p| *p > 0.0);
        let edges = weights.iter().map(|(&(i, j), &p)| (i, j, p)).collect();
        let labels = (0..kinds.len() as i64).collect();
        Ok(Self { kinds, labels, edges, weights })
    }

    /// Nearest-neighbour chain of `n` bulk sites with unit weights,
    /// labelled `1..=n` (indices `0..n`).
    pub fn chain(n: usize) -> Result<Self> {
        let kinds = vec![SiteKind::Bulk; n];
        let edges = (1..n).map(|i| (i - 1, i, 1.0));
        let mut lattice = Self::new(kinds, edges)?;
        lattice.labels = (1..=n as i64).collect();
        Ok(lattice)
    }

    /// Chain `0, 1, …, n+1` whose end sites are absorbing and whose bulk
    /// `1..=n` carries unit nearest-neighbour weights. Labels equal indices.
    pub fn absorbing_chain(n: usize) -> Result<Self> {
        Self::absorbing_chain_with(n, (1..n).map(|i| (i, i + 1, 1.0)))
    }

    /// Absorbing chain with explicit bulk edges given in site labels `1..=n`.
    pub fn absorbing_chain_with(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut kinds = vec![SiteKind::Bulk; n + 2];
        kinds[0] = SiteKind::Absorbing;
        kinds[n + 1] = SiteKind::Absorbing;
        Self::new(kinds, edges)
    }

    /// Complete graph on `n` bulk sites with weights from `p(i, j)`.
    pub fn complete(n: usize, p: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let kinds = vec![SiteKind::Bulk; n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, p(i, j)));
            }
        }
        Self::new(kinds, edges)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.kinds.len() {
            return Err(Error::Input("label count does not match site count".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, x: usize) -> SiteKind {
        self.kinds[x]
    }

    pub fn kinds(&self) -> &[SiteKind] {
        &self.kinds
    }

    pub fn is_absorbing(&self, x: usize) -> bool {
        self.kinds[x] == SiteKind::Absorbing
    }

    pub fn bulk_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.kinds.len()).filter(|&x| self.kinds[x] == SiteKind::Bulk)
    }

    pub fn absorbing_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.kinds.len()).filter(|&x| self.kinds[x] == SiteKind::Absorbing)
    }

    pub fn n_bulk(&self) -> usize {
        self.bulk_sites().count()
    }

    /// Edges `(i, j, p)` with `i < j` and `p > 0`, in sorted order.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Symmetric weight `p(i, j)`; zero for non-edges.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.weights.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    pub fn label(&self, x: usize) -> i64 {
        self.labels[x]
    }

    pub fn site_of_label(&self, label: i64) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::Input(format!("no site labelled {label}")))
    }

    pub fn check_site(&self, x: usize) -> Result<()> {
        if x < self.kinds.len() {
            Ok(())
        } else {
            Err(Error::UnknownSite(x))
        }
    }
}
