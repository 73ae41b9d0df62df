//! Boundary-driven chains and the JSON model-file schema.
//!
//! Chains use site labels `1..=N` for the bulk and `0`, `N+1` for the two
//! absorbing sites of the dual system. On the closed or reservoir lattice
//! the bulk index is `label − 1`; on the absorbing lattice index = label.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, SiteKind};
use crate::rates::spec::{AbsorptionSpec, Bulk, GeneratorSpec, RawRates, ReservoirSpec};
use crate::rates::thermal::Thermalized;
use crate::rates::{cap_for_theta, RateFamily};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub c: f64,
    pub rho: f64,
}

/// Nearest-neighbour θ-chain of `n` sites driven by reservoirs at both
/// ends; also describes its absorbing dual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainModel {
    pub n: usize,
    pub theta: f64,
    pub p: f64,
    pub left: Boundary,
    pub right: Boundary,
}

impl ChainModel {
    pub fn new(n: usize, theta: f64, left: Boundary, right: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("chain needs at least one site".into()));
        }
        cap_for_theta(theta)?;
        Ok(Self { n, theta, p: 1.0, left, right })
    }

    /// Unit boundary rates and densities `(ρ_ℓ, ρ_r)`.
    pub fn unit(n: usize, theta: f64, rho_l: f64, rho_r: f64) -> Result<Self> {
        Self::new(n, theta, Boundary { c: 1.0, rho: rho_l }, Boundary { c: 1.0, rho: rho_r })
    }

    pub fn cap(&self) -> Option<u32> {
        cap_for_theta(self.theta).expect("validated")
    }

    pub fn bulk_lattice(&self) -> Result<Arc<Lattice>> {
        let kinds = vec![SiteKind::Bulk; self.n];
        let edges = (1..self.n).map(|i| (i - 1, i, self.p));
        Ok(Arc::new(Lattice::new(kinds, edges)?.with_labels((1..=self.n as i64).collect())?))
    }

    pub fn family(&self) -> Result<RateFamily> {
        RateFamily::canonical(self.bulk_lattice()?, self.theta)
    }

    pub fn reservoir_spec(&self) -> Result<GeneratorSpec> {
        let res = vec![
            ReservoirSpec { site: 0, c: self.left.c, rho: self.left.rho },
            ReservoirSpec { site: self.n - 1, c: self.right.c, rho: self.right.rho },
        ];
        GeneratorSpec::reservoir_generator(self.family()?, res)
    }

    pub fn dual_lattice(&self) -> Result<Arc<Lattice>> {
        Ok(Arc::new(Lattice::absorbing_chain_with(self.n, (1..self.n).map(|i| (i, i + 1, self.p)))?))
    }

    /// Absorbing dual with `r(1,0) = c_ℓ`, `r(N,N+1) = c_r`.
    pub fn dual_spec(&self) -> Result<GeneratorSpec> {
        self.dual_spec_with_theta(self.theta)
    }

    /// The independent-walker dual with the same single-particle walk.
    pub fn irw_dual_spec(&self) -> Result<GeneratorSpec> {
        self.dual_spec_with_theta(0.0)
    }

    fn dual_spec_with_theta(&self, theta: f64) -> Result<GeneratorSpec> {
        let fam = RateFamily::canonical(self.dual_lattice()?, theta)?;
        GeneratorSpec::absorbing_extension(
            fam,
            vec![
                AbsorptionSpec { from: 1, to: 0, rate: self.left.c },
                AbsorptionSpec { from: self.n, to: self.n + 1, rate: self.right.c },
            ],
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedHopping {
    #[serde(rename = "nearest-neighbor")]
    NearestNeighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hopping {
    Named(NamedHopping),
    /// `[i, j, p]` in site labels `1..=N`.
    Table(Vec<(i64, i64, f64)>),
}

impl Default for Hopping {
    fn default() -> Self {
        Hopping::Named(NamedHopping::NearestNeighbor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedAbsorption {
    /// `r(1,0) = c_ℓ`, `r(N,N+1) = c_r` (unit rates without reservoirs).
    #[serde(rename = "boundary-copy")]
    BoundaryCopy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Absorbing {
    Named(NamedAbsorption),
    /// `[i, j, r]`: bulk label `i` to absorbing label `j ∈ {0, N+1}`.
    Table(Vec<(i64, i64, f64)>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reservoirs {
    pub left: Boundary,
    pub right: Boundary,
}

/// Adds `delta` to the canonical rate `c_{from,to}(κ, m)` at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub from: i64,
    pub to: i64,
    pub kappa: u32,
    pub m: u32,
    pub delta: f64,
}

/// Which generator to build from a model file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecKind {
    Closed,
    Absorbing,
    Reservoir,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "N")]
    pub n: usize,
    pub theta: f64,
    #[serde(default)]
    pub p: Hopping,
    #[serde(default)]
    pub cap: Option<u32>,
    #[serde(default)]
    pub reservoirs: Option<Reservoirs>,
    #[serde(default)]
    pub absorbing: Option<Absorbing>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturb: Vec<Perturbation>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub thermalized: bool,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Input(format!("model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Input("N must be at least 1".into()));
        }
        let implied = cap_for_theta(self.theta)?;
        if self.cap.is_some() && self.cap != implied {
            return Err(Error::InvalidParameter(format!(
                "cap {:?} does not match theta {} (expected {:?})",
                self.cap, self.theta, implied
            )));
        }
        if self.thermalized && !self.perturb.is_empty() {
            return Err(Error::Input("perturbations apply to hopping rates, not thermalized models".into()));
        }
        self.bulk_edges()?;
        Ok(())
    }

    pub fn cap(&self) -> Option<u32> {
        cap_for_theta(self.theta).expect("validated")
    }

    /// Bulk edges in labels.
    pub fn bulk_edges(&self) -> Result<Vec<(usize, usize, f64)>> {
        match &self.p {
            Hopping::Named(NamedHopping::NearestNeighbor) => Ok((1..self.n).map(|i| (i, i + 1, 1.0)).collect()),
            Hopping::Table(t) => t
                .iter()
                .map(|&(i, j, p)| {
                    let ok = |x: i64| x >= 1 && x <= self.n as i64;
                    if ok(i) && ok(j) {
                        Ok((i as usize, j as usize, p))
                    } else {
                        Err(Error::Input(format!("edge ({i},{j}) outside sites 1..={}", self.n)))
                    }
                })
                .collect(),
        }
    }

    pub fn closed_lattice(&self) -> Result<Arc<Lattice>> {
        let edges: Vec<_> = self.bulk_edges()?.into_iter().map(|(i, j, p)| (i - 1, j - 1, p)).collect();
        let l = Lattice::new(vec![SiteKind::Bulk; self.n], edges)?;
        Ok(Arc::new(l.with_labels((1..=self.n as i64).collect())?))
    }

    pub fn absorbing_lattice(&self) -> Result<Arc<Lattice>> {
        Ok(Arc::new(Lattice::absorbing_chain_with(self.n, self.bulk_edges()?)?))
    }

    fn bulk_on(&self, lattice: &Arc<Lattice>) -> Result<Bulk> {
        let family = RateFamily::canonical(lattice.clone(), self.theta)?;
        if self.thermalized {
            return Ok(Bulk::Thermalized(Thermalized::new(family)?));
        }
        if self.perturb.is_empty() {
            return Ok(Bulk::Family(family));
        }
        let mut points = Vec::new();
        for pt in &self.perturb {
            let from = lattice.site_of_label(pt.from)?;
            let to = lattice.site_of_label(pt.to)?;
            if lattice.p(from, to) == 0.0 {
                return Err(Error::Input(format!("perturbation on non-edge ({},{})", pt.from, pt.to)));
            }
            points.push((from, to, pt.kappa, pt.m, pt.delta));
        }
        let edges = family.edges().to_vec();
        Ok(Bulk::Raw(RawRates::new("perturbed", family.cap(), move |from, to, k, m| {
            let base = edges
                .iter()
                .find(|e| (e.i, e.j) == (from, to) || (e.j, e.i) == (from, to))
                .map_or(0.0, |e| e.rate(from, k, m));
            let bump: f64 = points
                .iter()
                .filter(|&&(f, t, pk, pm, _)| (f, t, pk, pm) == (from, to, k, m))
                .map(|p| p.4)
                .sum();
            base + bump
        })))
    }

    fn absorption_on(&self, lattice: &Lattice) -> Result<Vec<AbsorptionSpec>> {
        match &self.absorbing {
            None => Ok(vec![]),
            Some(Absorbing::Named(NamedAbsorption::BoundaryCopy)) => {
                let (cl, cr) = self.reservoirs.map_or((1.0, 1.0), |r| (r.left.c, r.right.c));
                Ok(vec![
                    AbsorptionSpec { from: 1, to: 0, rate: cl },
                    AbsorptionSpec { from: self.n, to: self.n + 1, rate: cr },
                ])
            }
            Some(Absorbing::Table(t)) => t
                .iter()
                .map(|&(i, j, r)| {
                    Ok(AbsorptionSpec { from: lattice.site_of_label(i)?, to: lattice.site_of_label(j)?, rate: r })
                })
                .collect(),
        }
    }

    /// The generator the file describes by default: absorbing when an
    /// absorption table is given, otherwise reservoir-driven when
    /// reservoirs are given, otherwise closed.
    pub fn default_kind(&self) -> SpecKind {
        if self.absorbing.is_some() {
            SpecKind::Absorbing
        } else if self.reservoirs.is_some() {
            SpecKind::Reservoir
        } else {
            SpecKind::Closed
        }
    }

    pub fn spec(&self, kind: SpecKind) -> Result<GeneratorSpec> {
        match kind {
            SpecKind::Closed => {
                let l = self.closed_lattice()?;
                let bulk = self.bulk_on(&l)?;
                GeneratorSpec::new(l, bulk, vec![], vec![], 0.0)
            }
            SpecKind::Absorbing => {
                let l = self.absorbing_lattice()?;
                let bulk = self.bulk_on(&l)?;
                let abs = self.absorption_on(&l)?;
                GeneratorSpec::new(l, bulk, abs, vec![], 0.0)
            }
            SpecKind::Reservoir => {
                let r = self
                    .reservoirs
                    .ok_or_else(|| Error::Input("model has no reservoirs".into()))?;
                let l = self.closed_lattice()?;
                let bulk = self.bulk_on(&l)?;
                let res = vec![
                    ReservoirSpec { site: 0, c: r.left.c, rho: r.left.rho },
                    ReservoirSpec { site: self.n - 1, c: r.right.c, rho: r.right.rho },
                ];
                GeneratorSpec::new(l, bulk, vec![], res, self.theta)
            }
        }
    }

    /// The boundary-driven chain, when the file describes one with
    /// uniform nearest-neighbour hopping and unperturbed rates.
    pub fn chain_model(&self) -> Result<ChainModel> {
        let r = self
            .reservoirs
            .ok_or_else(|| Error::Input("model has no reservoirs".into()))?;
        if !self.perturb.is_empty() || self.thermalized {
            return Err(Error::Input("duality formulas need unperturbed hopping rates".into()));
        }
        let edges = self.bulk_edges()?;
        let nn = edges.len() == self.n - 1
            && edges.iter().all(|&(i, j, _)| i.abs_diff(j) == 1)
            && edges.windows(2).all(|w| w[0].2 == w[1].2);
        if !nn {
            return Err(Error::Input("duality formulas need a uniform nearest-neighbour chain".into()));
        }
        let mut m = ChainModel::new(self.n, self.theta, r.left, r.right)?;
        m.p = edges.first().map_or(1.0, |e| e.2);
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_schema() {
        let m = ModelFile::from_json(
            r#"{"N": 3, "theta": -1, "p": "nearest-neighbor", "cap": 1,
                "reservoirs": {"left": {"c": 1, "rho": 0.2}, "right": {"c": 2, "rho": 0.9}},
                "absorbing": "boundary-copy"}"#,
        )
        .unwrap();
        assert_eq!(m.cap(), Some(1));
        let spec = m.spec(SpecKind::Absorbing).unwrap();
        assert_eq!(spec.absorption()[1], AbsorptionSpec { from: 3, to: 4, rate: 2.0 });
        let chain = m.chain_model().unwrap();
        assert_eq!(chain.right, Boundary { c: 2.0, rho: 0.9 });
        assert_eq!(m.spec(SpecKind::Reservoir).unwrap().reservoirs().len(), 2);
    }

    #[test]
    fn explicit_tables() {
        let m = ModelFile::from_json(
            r#"{"N": 2, "theta": 0, "p": [[1, 2, 0.5]], "absorbing": [[1, 0, 1.5], [2, 3, 0.5]]}"#,
        )
        .unwrap();
        let spec = m.spec(m.default_kind()).unwrap();
        assert_eq!(spec.lattice().p(1, 2), 0.5);
        assert_eq!(spec.absorption()[0].rate, 1.5);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ModelFile::from_json(r#"{"N": 3}"#).is_err());
        assert!(ModelFile::from_json(r#"{"N": 3, "theta": -1, "cap": 2}"#).is_err());
        assert!(ModelFile::from_json(r#"{"N": 3, "theta": 0, "p": [[1, 7, 1.0]]}"#).is_err());
        assert!(ModelFile::from_json(r#"{"N": 3, "theta": 0, "bogus": 1}"#).is_err());
        assert!(ModelFile::from_json("not json").is_err());
    }

    #[test]
    fn perturbation_changes_one_rate() {
        let m = ModelFile::from_json(
            r#"{"N": 3, "theta": -1, "perturb": [{"from": 1, "to": 2, "kappa": 1, "m": 0, "delta": 0.1}]}"#,
        )
        .unwrap();
        let spec = m.spec(SpecKind::Closed).unwrap();
        let Bulk::Raw(raw) = spec.bulk() else { panic!("expected raw rates") };
        assert!(((raw.rate)(0, 1, 1, 0) - 1.1).abs() < 1e-15);
        assert_eq!((raw.rate)(1, 0, 1, 0), 1.0);
        assert_eq!((raw.rate)(0, 1, 1, 1), 0.0);
    }

    #[test]
    fn dual_uses_boundary_rates() {
        let c = ChainModel::new(3, 1.0, Boundary { c: 0.5, rho: 1.0 }, Boundary { c: 2.0, rho: 3.0 }).unwrap();
        let d = c.dual_spec().unwrap();
        assert_eq!(d.absorption()[0], AbsorptionSpec { from: 1, to: 0, rate: 0.5 });
        assert_eq!(d.lattice().n_sites(), 5);
        assert_eq!(c.irw_dual_spec().unwrap().family().unwrap().theta(), Some(0.0));
    }
}
