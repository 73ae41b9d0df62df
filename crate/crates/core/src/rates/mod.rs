//! Rate families and generator specifications.
//!
//! A consistent hop rate has the form `c_{i,j}(κ, m) = κ(θ({i,j})·m + α(i,j))`
//! where `κ` is the occupation of the departure site and `m` that of the
//! arrival site. [`RateFamily`] stores exactly that data per edge;
//! [`fit::fit_consistent_form`] recovers it from a raw rate table, and
//! [`spec::GeneratorSpec`] decorates a family with absorption, reservoirs or
//! thermalization.

pub mod fit;
pub mod model;
pub mod spec;
pub mod thermal;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

pub use fit::{fit_consistent_form, HopTable, Rejection};
pub use model::{Boundary, ChainModel, ModelFile, SpecKind};
pub use spec::{AbsorptionSpec, Bulk, GeneratorSpec, Move, RawRates, ReservoirSpec};
pub use thermal::{thermalized_edge_distribution, Thermalized};

/// Occupation window probed when validating uncapped families.
pub const UNCAPPED_PROBE: u32 = 8;

/// `θ({i,j})` and the two free-hopping parts `α(i,j)`, `α(j,i)` on one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRates {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    pub alpha_ij: f64,
    pub alpha_ji: f64,
}

impl EdgeRates {
    /// Rate for one of `kappa` particles at `from` to hop across the edge
    /// onto a site holding `m`, summed over the `kappa` particles.
    pub fn rate(&self, from: usize, kappa: u32, m: u32) -> f64 {
        kappa as f64 * self.per_particle(from, m)
    }

    /// Rate for one labelled particle at `from` to cross: `θ·m + α`.
    pub fn per_particle(&self, from: usize, m: u32) -> f64 {
        let alpha = if from == self.i { self.alpha_ij } else { self.alpha_ji };
        self.theta * m as f64 + alpha
    }

    pub fn other(&self, x: usize) -> usize {
        if x == self.i {
            self.j
        } else {
            self.i
        }
    }
}

/// A consistent rate family on a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFamily {
    lattice: Arc<Lattice>,
    edges: Vec<EdgeRates>,
    cap: Option<u32>,
    theta: Option<f64>,
}

impl RateFamily {
    /// Validates and builds a family.
    ///
    /// Every rate `κ(θm+α)` with `κ, m` in the probe window (`0..=cap`, or
    /// `0..=UNCAPPED_PROBE` without a cap) must be finite and nonnegative.
    /// With a cap, hopping onto a full site must have rate zero.
    pub fn new(lattice: Arc<Lattice>, edges: Vec<EdgeRates>, cap: Option<u32>) -> Result<Self> {
        let window = cap.unwrap_or(UNCAPPED_PROBE);
        for e in &edges {
            lattice.check_site(e.i)?;
            lattice.check_site(e.j)?;
            if lattice.is_absorbing(e.i) || lattice.is_absorbing(e.j) {
                return Err(Error::Input(format!("edge ({},{}) touches an absorbing site", e.i, e.j)));
            }
            for from in [e.i, e.j] {
                for kappa in 1..=window {
                    for m in 0..=window {
                        let c = e.rate(from, kappa, m);
                        if !c.is_finite() || c < -1e-12 {
                            return Err(Error::InvalidParameter(format!(
                                "negative rate {c} on edge ({},{}) from {from} at κ={kappa}, m={m}",
                                e.i, e.j
                            )));
                        }
                    }
                }
                if let Some(cap) = cap {
                    let full = e.per_particle(from, cap);
                    if full.abs() > 1e-12 {
                        return Err(Error::InvalidParameter(format!(
                            "edge ({},{}) allows hopping onto a full site (θ·cap + α = {full})",
                            e.i, e.j
                        )));
                    }
                }
            }
        }
        Ok(Self { lattice, edges, cap, theta: None })
    }

    /// The canonical θ-family `c(κ,m) = p(i,j)·κ(1 + θm)`.
    ///
    /// `θ = 0` gives independent walkers, `θ > 0` inclusion and `θ < 0`
    /// partial exclusion with cap `1/|θ|`, which must be an integer.
    pub fn canonical(lattice: Arc<Lattice>, theta: f64) -> Result<Self> {
        let cap = cap_for_theta(theta)?;
        let edges = lattice
            .edges()
            .iter()
            .map(|&(i, j, p)| EdgeRates { i, j, theta: theta * p, alpha_ij: p, alpha_ji: p })
            .collect();
        let mut family = Self::new(lattice, edges, cap)?;
        family.theta = Some(theta);
        Ok(family)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn edges(&self) -> &[EdgeRates] {
        &self.edges
    }

    pub fn cap(&self) -> Option<u32> {
        self.cap
    }

    /// The scalar interaction parameter of a canonical family.
    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Same rates on another lattice with identical bulk indices (used to
    /// move a family onto a lattice with added absorbing sites).
    pub fn on_lattice(&self, lattice: Arc<Lattice>) -> Result<Self> {
        let mut f = Self::new(lattice, self.edges.clone(), self.cap)?;
        f.theta = self.theta;
        Ok(f)
    }
}

/// Cap implied by `θ`: `1/|θ|` for negative `θ`, none otherwise.
pub fn cap_for_theta(theta: f64) -> Result<Option<u32>> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("theta = {theta}")));
    }
    if theta >= 0.0 {
        return Ok(None);
    }
    let inv = -1.0 / theta;
    let rounded = inv.round();
    if (inv - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(Error::InvalidParameter(format!("1/|theta| = {inv} is not a positive integer")));
    }
    Ok(Some(rounded as u32))
}

/// `canonical_theta_family`: free-function form of [`RateFamily::canonical`].
pub fn canonical_theta_family(lattice: Arc<Lattice>, theta: f64) -> Result<RateFamily> {
    RateFamily::canonical(lattice, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Arc<Lattice> {
        Arc::new(Lattice::chain(n).unwrap())
    }

    #[test]
    fn independent_walkers() {
        let f = RateFamily::canonical(chain(3), 0.0).unwrap();
        assert_eq!(f.cap(), None);
        let e = &f.edges()[0];
        assert_eq!(e.rate(e.i, 1, 5), 1.0);
        assert_eq!(e.rate(e.i, 3, 0), 3.0);
    }

    #[test]
    fn exclusion_and_inclusion() {
        let sep = RateFamily::canonical(chain(3), -1.0).unwrap();
        assert_eq!(sep.cap(), Some(1));
        let e = &sep.edges()[0];
        assert_eq!(e.rate(e.i, 1, 0), 1.0);
        assert_eq!(e.rate(e.i, 1, 1), 0.0);

        let sip = RateFamily::canonical(chain(3), 1.0).unwrap();
        let e = &sip.edges()[0];
        for k in 0..4 {
            for m in 0..4 {
                assert_eq!(e.rate(e.j, k, m), (k * (1 + m)) as f64);
            }
        }
        assert_eq!(RateFamily::canonical(chain(2), -0.5).unwrap().cap(), Some(2));
    }

    #[test]
    fn rejects_non_integer_reciprocal() {
        assert!(matches!(RateFamily::canonical(chain(3), -0.4), Err(Error::InvalidParameter(_))));
        assert!(RateFamily::canonical(chain(3), -2.0).is_err());
        assert!(RateFamily::canonical(chain(3), f64::NAN).is_err());
    }

    #[test]
    fn rejects_negative_rates() {
        let e = EdgeRates { i: 0, j: 1, theta: -1.0, alpha_ij: 1.0, alpha_ji: 1.0 };
        assert!(RateFamily::new(chain(2), vec![e], None).is_err());
    }
}
