//! Stationary correlations of the reservoir chain through its absorbing
//! dual: `E_ν[D̂(ξ, η)] = Σ_k ρ_ℓ^k ρ_r^{|ξ|−k} q_ξ(k)`, where `q_ξ(k)` is
//! the probability that `k` dual particles end up at the left boundary.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_rational::BigRational;
use serde::Serialize;

use crate::config::{phi, Configuration, CoordinateVector};
use crate::error::{Error, Result};
use crate::exact::{absorption_table, assemble, AbsorptionResult, AbsorptionTable};
use crate::genfun::{boundary_sites, gee_expansion, genfun_from_absorption, GenPoly};
use crate::lattice::Lattice;
use crate::rates::{ChainModel, GeneratorSpec};
use crate::sector::Sector;

/// Absorption solves of the dual chain, cached per particle number.
#[derive(Debug)]
pub struct DualSolver {
    model: ChainModel,
    dual: GeneratorSpec,
    irw: GeneratorSpec,
    tol: f64,
    tables: Mutex<HashMap<u32, Arc<AbsorptionTable>>>,
    irw_single: Arc<AbsorptionTable>,
}

impl DualSolver {
    pub fn new(model: ChainModel, tol: f64) -> Result<Self> {
        let dual = model.dual_spec()?;
        let irw = model.irw_dual_spec()?;
        let s1 = Arc::new(Sector::enumerate(irw.lattice().clone(), 1, None)?);
        let irw_single = Arc::new(absorption_table(&assemble(&irw, s1)?, tol)?);
        Ok(Self { model, dual, irw, tol, tables: Mutex::new(HashMap::new()), irw_single })
    }

    pub fn model(&self) -> &ChainModel {
        &self.model
    }

    pub fn dual_spec(&self) -> &GeneratorSpec {
        &self.dual
    }

    pub fn irw_spec(&self) -> &GeneratorSpec {
        &self.irw
    }

    /// Dual lattice: index `x` is site label `x`, absorbing at `0` and `N+1`.
    pub fn lattice(&self) -> &Arc<Lattice> {
        self.dual.lattice()
    }

    pub fn table(&self, m: u32) -> Result<Arc<AbsorptionTable>> {
        if let Some(t) = self.tables.lock().expect("poisoned").get(&m) {
            return Ok(t.clone());
        }
        let s = Arc::new(Sector::enumerate(self.lattice().clone(), m, self.dual.cap())?);
        let t = Arc::new(absorption_table(&assemble(&self.dual, s)?, self.tol)?);
        self.tables.lock().expect("poisoned").insert(m, t.clone());
        Ok(t)
    }

    pub fn absorption(&self, xi: &Configuration) -> Result<AbsorptionResult> {
        self.table(xi.total())?.distribution(xi)
    }

    /// `G(ξ, ·)` of the interacting dual.
    pub fn genpoly(&self, xi: &Configuration) -> Result<GenPoly> {
        genfun_from_absorption(&self.absorption(xi)?, self.lattice())
    }

    pub fn genpoly_coords(&self, coords: &CoordinateVector) -> Result<GenPoly> {
        self.genpoly(&phi(self.lattice(), coords)?)
    }

    /// `G^irw(ξ, ·)`: product of single-walker generating functions.
    pub fn irw_genpoly(&self, xi: &Configuration) -> Result<GenPoly> {
        let lattice = self.lattice();
        let (left, _) = boundary_sites(lattice)?;
        let mut g = GenPoly::constant(1.0);
        for x in xi.support() {
            let to_left = if lattice.is_absorbing(x) {
                f64::from(x == left)
            } else {
                let s = self.irw_single.sector();
                let start = s.require(&Configuration::delta(lattice.n_sites(), x))?;
                let col = self
                    .irw_single
                    .absorbed()
                    .iter()
                    .position(|&a| s.state(a).occupation(left) == 1)
                    .expect("left absorbed state");
                self.irw_single.probability(start, col)
            };
            g = &g * &GenPoly::linear(1.0 - to_left, to_left).pow(xi.occupation(x) as usize);
        }
        Ok(g.resized(xi.total() as usize + 1))
    }

    /// `𝒢(ξ, 0) = P_ξ(ξ_0(∞) = 0) − P^irw_ξ(ξ_0(∞) = 0)`.
    pub fn difference_at_zero(&self, coords: &CoordinateVector) -> Result<f64> {
        let xi = phi(self.lattice(), coords)?;
        Ok(self.genpoly(&xi)?.coeff(0) - self.irw_genpoly(&xi)?.coeff(0))
    }

    fn check_bulk(&self, xi: &Configuration) -> Result<()> {
        xi.check_same_lattice(&Configuration::zero(self.lattice().n_sites()))?;
        if xi.total() == 0 {
            return Err(Error::Input("dual configuration is empty".into()));
        }
        if xi.support().any(|x| self.lattice().is_absorbing(x)) {
            return Err(Error::Input(format!("dual configuration {xi} is not supported on the bulk")));
        }
        Ok(())
    }

    /// `E_ν[D̂(ξ, η)]` for `ξ` on the bulk of the dual lattice.
    pub fn ness_expectation(&self, xi: &Configuration) -> Result<f64> {
        self.check_bulk(xi)?;
        let g = self.genpoly(xi)?;
        Ok(boundary_polynomial(&g, self.model.left.rho, self.model.right.rho))
    }

    /// `E_ν[η_x]` for `x = 1..=N`.
    pub fn profile(&self) -> Result<Vec<f64>> {
        let n = self.lattice().n_sites();
        (1..=self.model.n).map(|x| self.ness_expectation(&Configuration::delta(n, x))).collect()
    }

    /// `Cov_ν(η_x, η_y)` for distinct labels `x ≠ y`.
    pub fn covariance(&self, x: usize, y: usize) -> Result<f64> {
        if x == y {
            return Err(Error::Input("covariance through the dual needs distinct sites".into()));
        }
        let n = self.lattice().n_sites();
        let two = phi(self.lattice(), &vec![x, y].into())?;
        Ok(self.ness_expectation(&two)?
            - self.ness_expectation(&Configuration::delta(n, x))? * self.ness_expectation(&Configuration::delta(n, y))?)
    }
}

/// `Σ_k ρ_ℓ^k ρ_r^{n−k} q(k)`; well defined at `ρ_r = 0`.
fn boundary_polynomial(g: &GenPoly, rho_l: f64, rho_r: f64) -> f64 {
    let n = g.len() - 1;
    g.coeffs()
        .iter()
        .enumerate()
        .map(|(k, q)| q * rho_l.powi(k as i32) * rho_r.powi((n - k) as i32))
        .sum()
}

/// One-shot `E_ν[D̂(ξ, η)]` for the reservoir chain `model`.
pub fn ness_expectation_via_dual(xi: &Configuration, model: &ChainModel, tol: f64) -> Result<f64> {
    DualSolver::new(*model, tol)?.ness_expectation(xi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationDifference {
    /// `Σ_κ γ_κ (ρ_r − ρ_ℓ)^κ ρ_ℓ^{n−κ}`.
    pub value: f64,
    /// `γ_κ` for `κ = 2..=n`.
    pub gammas: Vec<f64>,
}

/// Interaction part of `E_ν[D̂(φ(x), η)]`: the dual expectation minus the
/// one with independent dual walkers.
pub fn ness_correlation_difference(coords: &CoordinateVector, solver: &DualSolver) -> Result<CorrelationDifference> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::Input("correlation differences need at least two particles".into()));
    }
    solver.check_bulk(&phi(solver.lattice(), coords)?)?;
    let gee = gee_expansion(coords, |y| solver.difference_at_zero(y))?;
    let (rl, rr) = (solver.model.left.rho, solver.model.right.rho);
    let value = if rl == rr {
        0.0
    } else {
        gee.gammas
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let kappa = i + 2;
                g * (rr - rl).powi(kappa as i32) * rl.powi((n - kappa) as i32)
            })
            .sum()
    };
    Ok(CorrelationDifference { value, gammas: gee.gammas })
}

fn check_pair(n: usize, x: usize, y: usize) -> Result<()> {
    if !(1 <= x && x < y && y <= n) {
        return Err(Error::Input(format!("need 1 ≤ x < y ≤ N, got x = {x}, y = {y}, N = {n}")));
    }
    Ok(())
}

/// `(q0, q1, q2)` for two inclusion walkers (`θ = 2`, unit boundary rates)
/// started at `x < y` on `1..N`.
pub fn sip2_two_point_oracle(n: usize, x: usize, y: usize) -> Result<[f64; 3]> {
    check_pair(n, x, y)?;
    let (n, x, y) = (n as f64, x as f64, y as f64);
    let q0 = x * (2.0 + y) / ((n + 1.0) * (n + 3.0));
    let q1 = 1.0 - (1.0 - x / (n + 3.0)) * (1.0 - y / (n + 1.0)) - q0;
    Ok([q0, q1, 1.0 - q0 - q1])
}

/// Exact-rational [`sip2_two_point_oracle`].
pub fn sip2_two_point_oracle_exact(n: usize, x: usize, y: usize) -> Result<[BigRational; 3]> {
    check_pair(n, x, y)?;
    let r = |a: usize, b: usize| BigRational::new(a.into(), b.into());
    let one = r(1, 1);
    let q0 = r(x * (2 + y), (n + 1) * (n + 3));
    let q1 = &one - (&one - r(x, n + 3)) * (&one - r(y, n + 1)) - &q0;
    let q2 = &one - &q0 - &q1;
    Ok([q0, q1, q2])
}

/// Closed forms for independent walkers on `1..N` with unit boundary rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IrwOracle {
    pub n: usize,
}

impl IrwOracle {
    /// Probability that a walker from `x ∈ 0..=N+1` is absorbed at `N+1`.
    pub fn q_plus(&self, x: usize) -> f64 {
        x as f64 / (self.n + 1) as f64
    }

    pub fn ness_mean(&self, x: usize, rho_l: f64, rho_r: f64) -> f64 {
        rho_l + (rho_r - rho_l) * self.q_plus(x)
    }

    /// `Π_i (z(1 − q⁺_i) + q⁺_i)^{ξ_i}` for `ξ` on `0..=N+1`.
    pub fn product_genfun(&self, xi: &Configuration) -> Result<GenPoly> {
        if xi.n_sites() != self.n + 2 {
            return Err(Error::LatticeMismatch(format!("expected {} sites, got {}", self.n + 2, xi.n_sites())));
        }
        let mut g = GenPoly::constant(1.0);
        for x in xi.support() {
            let q = self.q_plus(x);
            g = &g * &GenPoly::linear(q, 1.0 - q).pow(xi.occupation(x) as usize);
        }
        Ok(g.resized(xi.total() as usize + 1))
    }
}
