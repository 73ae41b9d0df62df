//! Generator specifications: a bulk mechanism plus optional absorption
//! and reservoir decorations. A spec only lists moves and rates; matrix
//! assembly and simulation live elsewhere.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::rates::fit::HopTable;
use crate::rates::thermal::Thermalized;
use crate::rates::RateFamily;

/// A rate function `c(from, to, κ, m)` that need not be of consistent
/// form.
#[derive(Clone)]
pub struct RawRates {
    pub cap: Option<u32>,
    pub rate: Arc<dyn Fn(usize, usize, u32, u32) -> f64 + Send + Sync>,
    pub label: String,
}

impl RawRates {
    pub fn new(
        label: impl Into<String>,
        cap: Option<u32>,
        rate: impl Fn(usize, usize, u32, u32) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { cap, rate: Arc::new(rate), label: label.into() }
    }
}

impl fmt::Debug for RawRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RawRates").field("label", &self.label).field("cap", &self.cap).finish()
    }
}

#[derive(Clone, Debug)]
pub enum Bulk {
    Family(RateFamily),
    Raw(RawRates),
    Thermalized(Thermalized),
}

/// `η → η − δ_i + δ_j` at rate `r·η_i` for bulk `i`, absorbing `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbsorptionSpec {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Birth–death reservoir at one bulk site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReservoirSpec {
    pub site: usize,
    pub c: f64,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Move {
    Hop { from: usize, to: usize },
    Birth { site: usize },
    Death { site: usize },
    /// Resample the edge so that site `i` holds `left` particles.
    Redistribute { i: usize, j: usize, left: u32 },
}

impl Move {
    pub fn apply(self, eta: &mut [u32]) {
        match self {
            Move::Hop { from, to } => {
                eta[from] -= 1;
                eta[to] += 1;
            }
            Move::Birth { site } => eta[site] += 1,
            Move::Death { site } => eta[site] -= 1,
            Move::Redistribute { i, j, left } => {
                let total = eta[i] + eta[j];
                eta[i] = left;
                eta[j] = total - left;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    lattice: Arc<Lattice>,
    bulk: Bulk,
    absorption: Vec<AbsorptionSpec>,
    reservoirs: Vec<ReservoirSpec>,
    reservoir_theta: f64,
}

fn bulk_lattice(bulk: &Bulk) -> Option<&Arc<Lattice>> {
    match bulk {
        Bulk::Family(f) => Some(f.lattice()),
        Bulk::Thermalized(t) => Some(t.family().lattice()),
        Bulk::Raw(_) => None,
    }
}

impl GeneratorSpec {
    /// General constructor. `reservoir_theta` is the interaction parameter
    /// entering the reservoir rates; it is ignored without reservoirs.
    pub fn new(
        lattice: Arc<Lattice>,
        bulk: Bulk,
        absorption: Vec<AbsorptionSpec>,
        reservoirs: Vec<ReservoirSpec>,
        reservoir_theta: f64,
    ) -> Result<Self> {
        if let Some(l) = bulk_lattice(&bulk) {
            if **l != *lattice {
                return Err(Error::LatticeMismatch("bulk rates live on a different lattice".into()));
            }
        }
        for a in &absorption {
            lattice.check_site(a.from)?;
            lattice.check_site(a.to)?;
            if lattice.is_absorbing(a.from) {
                return Err(Error::Input(format!("absorption source {} is not a bulk site", a.from)));
            }
            if !lattice.is_absorbing(a.to) {
                return Err(Error::Input(format!("absorption target {} is not an absorbing site", a.to)));
            }
            if !a.rate.is_finite() || a.rate < 0.0 {
                return Err(Error::InvalidParameter(format!("absorption rate {}", a.rate)));
            }
        }
        for r in &reservoirs {
            lattice.check_site(r.site)?;
            if lattice.is_absorbing(r.site) {
                return Err(Error::Input(format!("reservoir at absorbing site {}", r.site)));
            }
            if !(r.c.is_finite() && r.c >= 0.0 && r.rho.is_finite() && r.rho >= 0.0) {
                return Err(Error::InvalidParameter(format!("reservoir c = {}, rho = {}", r.c, r.rho)));
            }
            if reservoir_theta < 0.0 && -reservoir_theta * r.rho > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!("density {} exceeds 1/|θ|", r.rho)));
            }
        }
        Ok(Self { lattice, bulk, absorption, reservoirs, reservoir_theta })
    }

    /// Bulk hopping only.
    pub fn closed(family: RateFamily) -> Self {
        let lattice = family.lattice().clone();
        Self { lattice, bulk: Bulk::Family(family), absorption: vec![], reservoirs: vec![], reservoir_theta: 0.0 }
    }

    /// Bulk hopping plus absorption `r(i, j)·η_i`. The family must already
    /// live on a lattice containing the absorbing sites.
    pub fn absorbing_extension(base: RateFamily, abs: Vec<AbsorptionSpec>) -> Result<Self> {
        let lattice = base.lattice().clone();
        Self::new(lattice, Bulk::Family(base), abs, vec![], 0.0)
    }

    /// Bulk hopping plus reservoirs with birth `cρ(1+θη)` and death
    /// `c(1+θρ)η`, `θ` being the family's scalar parameter.
    pub fn reservoir_generator(base: RateFamily, res: Vec<ReservoirSpec>) -> Result<Self> {
        let theta = base
            .theta()
            .ok_or_else(|| Error::InvalidParameter("reservoirs need a canonical θ-family".into()))?;
        let lattice = base.lattice().clone();
        Self::new(lattice, Bulk::Family(base), vec![], res, theta)
    }

    /// Each edge resampled from the conditioned product measure at rate
    /// `p(i, j)`.
    pub fn thermalized_generator(base: RateFamily) -> Result<Self> {
        let lattice = base.lattice().clone();
        Self::new(lattice, Bulk::Thermalized(Thermalized::new(base)?), vec![], vec![], 0.0)
    }

    /// Same spec with absorption added.
    pub fn with_absorption(self, abs: Vec<AbsorptionSpec>) -> Result<Self> {
        Self::new(self.lattice, self.bulk, abs, self.reservoirs, self.reservoir_theta)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn bulk(&self) -> &Bulk {
        &self.bulk
    }

    pub fn absorption(&self) -> &[AbsorptionSpec] {
        &self.absorption
    }

    pub fn reservoirs(&self) -> &[ReservoirSpec] {
        &self.reservoirs
    }

    pub fn reservoir_theta(&self) -> f64 {
        self.reservoir_theta
    }

    /// Per-site cap on bulk sites.
    pub fn cap(&self) -> Option<u32> {
        match &self.bulk {
            Bulk::Family(f) => f.cap(),
            Bulk::Thermalized(t) => t.family().cap(),
            Bulk::Raw(r) => r.cap,
        }
    }

    /// Whether the dynamics conserve the particle number.
    pub fn conserves_particles(&self) -> bool {
        self.reservoirs.is_empty()
    }

    /// The consistent family behind the bulk moves, if any.
    pub fn family(&self) -> Option<&RateFamily> {
        match &self.bulk {
            Bulk::Family(f) => Some(f),
            _ => None,
        }
    }

    /// Hop-rate table of the bulk mechanism (not defined for thermalized
    /// dynamics).
    pub fn hop_table(&self, window: u32) -> Result<Option<HopTable>> {
        match &self.bulk {
            Bulk::Family(f) => HopTable::from_family(f, window).map(Some),
            Bulk::Raw(r) => {
                let rate = r.rate.clone();
                HopTable::from_fn(self.lattice.clone(), window, r.cap, move |a, b, k, m| rate(a, b, k, m)).map(Some)
            }
            Bulk::Thermalized(_) => Ok(None),
        }
    }

    /// Calls `f(move, rate)` for every move with positive rate out of `eta`.
    pub fn for_each_move(&self, eta: &[u32], mut f: impl FnMut(Move, f64)) {
        match &self.bulk {
            Bulk::Family(fam) => {
                for e in fam.edges() {
                    for (from, to) in [(e.i, e.j), (e.j, e.i)] {
                        let k = eta[from];
                        if k > 0 {
                            let r = e.rate(from, k, eta[to]);
                            if r > 0.0 {
                                f(Move::Hop { from, to }, r);
                            }
                        }
                    }
                }
            }
            Bulk::Raw(raw) => {
                for &(i, j, _) in self.lattice.edges() {
                    for (from, to) in [(i, j), (j, i)] {
                        let k = eta[from];
                        if k > 0 {
                            let r = (raw.rate)(from, to, k, eta[to]);
                            if r > 0.0 {
                                f(Move::Hop { from, to }, r);
                            }
                        }
                    }
                }
            }
            Bulk::Thermalized(t) => {
                for &(i, j, p) in self.lattice.edges() {
                    let total = eta[i] + eta[j];
                    if total == 0 {
                        continue;
                    }
                    let dist = t.distribution(total).expect("edge total within capacity");
                    for (left, &w) in dist.iter().enumerate() {
                        let left = left as u32;
                        if left != eta[i] && w > 0.0 {
                            f(Move::Redistribute { i, j, left }, p * w);
                        }
                    }
                }
            }
        }
        for a in &self.absorption {
            let k = eta[a.from];
            if k > 0 && a.rate > 0.0 {
                f(Move::Hop { from: a.from, to: a.to }, a.rate * k as f64);
            }
        }
        let theta = self.reservoir_theta;
        for r in &self.reservoirs {
            let k = eta[r.site] as f64;
            let birth = r.c * r.rho * (1.0 + theta * k);
            if birth > 1e-12 * r.c * r.rho {
                f(Move::Birth { site: r.site }, birth);
            }
            let death = r.c * (1.0 + theta * r.rho) * k;
            if death > 0.0 {
                f(Move::Death { site: r.site }, death);
            }
        }
    }

    /// All `(move, rate)` pairs out of `eta`.
    pub fn transitions(&self, eta: &[u32]) -> Vec<(Move, f64)> {
        let mut out = Vec::new();
        self.for_each_move(eta, |m, r| out.push((m, r)));
        out
    }

    pub fn exit_rate(&self, eta: &[u32]) -> f64 {
        let mut total = 0.0;
        self.for_each_move(eta, |_, r| total += r);
        total
    }
}
