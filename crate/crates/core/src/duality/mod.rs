//! Reversible product measures and duality functions.
//!
//! The single-site duality polynomial used here is
//! `d_θ(k, n) = n!/(n−k)! / Π_{j<k}(1 + θj)`, so that one dual particle
//! always reads off the occupation, `d_θ(1, n) = n`, for every `θ`.

pub mod ness;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::rates::cap_for_theta;
use crate::sector::Sector;

pub use ness::{
    ness_correlation_difference, ness_expectation_via_dual, sip2_two_point_oracle, sip2_two_point_oracle_exact,
    CorrelationDifference, DualSolver, IrwOracle,
};

/// `(a)^{(k)} = a(a+1)⋯(a+k−1)`.
pub fn rising(a: f64, k: u32) -> f64 {
    (0..k).map(|j| a + j as f64).product()
}

/// `(a)_k = a(a−1)⋯(a−k+1)`.
pub fn falling(a: f64, k: u32) -> f64 {
    (0..k).map(|j| a - j as f64).product()
}

/// `Π_{j<k}(1 + θj)`: equals `|θ|^k (1/|θ|)^{(k)}` for `θ > 0` and
/// `|θ|^k (1/|θ|)_k` for `θ < 0`.
fn theta_factorial(theta: f64, k: u32) -> f64 {
    (0..k).map(|j| 1.0 + theta * j as f64).product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MarginalKind {
    Poisson,
    NegativeBinomial,
    Binomial,
}

/// Single-site marginal `ν_{ρ,θ}` of the reversible product measure with
/// density `ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarginalLaw {
    theta: f64,
    rho: f64,
    cap: Option<u32>,
}

impl MarginalLaw {
    pub fn new(theta: f64, rho: f64) -> Result<Self> {
        let cap = cap_for_theta(theta)?;
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("density {rho} must be finite and nonnegative")));
        }
        if theta < 0.0 && -theta * rho > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("density {rho} exceeds 1/|θ| = {}", -1.0 / theta)));
        }
        Ok(Self { theta, rho, cap })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn cap(&self) -> Option<u32> {
        self.cap
    }

    pub fn kind(&self) -> MarginalKind {
        if self.theta == 0.0 {
            MarginalKind::Poisson
        } else if self.theta > 0.0 {
            MarginalKind::NegativeBinomial
        } else {
            MarginalKind::Binomial
        }
    }

    /// `ν(η_x = n)`.
    pub fn weight(&self, n: u32) -> f64 {
        if self.cap.is_some_and(|c| n > c) {
            return 0.0;
        }
        let (t, rho) = (self.theta, self.rho);
        let body: f64 = (0..n).map(|j| rho * (1.0 + t * j as f64) / (j + 1) as f64).product();
        if t == 0.0 {
            body * (-rho).exp()
        } else {
            body * (1.0 + t * rho).powf(-(n as f64) - 1.0 / t)
        }
    }

    /// `Π_x ν(η_x)` over the bulk sites of `lattice`.
    pub fn product_weight(&self, lattice: &Lattice, eta: &Configuration) -> f64 {
        lattice.bulk_sites().map(|x| self.weight(eta.occupation(x))).product()
    }
}

/// `ν_{ρ,θ}(n)`.
pub fn marginal_weight(theta: f64, rho: f64, n: u32) -> Result<f64> {
    let law = MarginalLaw::new(theta, rho)?;
    if law.cap.is_some_and(|c| n > c) {
        return Err(Error::Input(format!("occupation {n} exceeds the cap {}", law.cap.unwrap())));
    }
    Ok(law.weight(n))
}

/// `d_θ(k, n)`; zero for `k > n`.
pub fn d_theta(theta: f64, k: u32, n: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    falling(n as f64, k) / theta_factorial(theta, k)
}

/// `D_θ(ξ, η) = Π_i d_θ(ξ_i, η_i)`.
pub fn selfduality_d(theta: f64, xi: &Configuration, eta: &Configuration) -> Result<f64> {
    xi.check_same_lattice(eta)?;
    if let Some(cap) = cap_for_theta(theta)? {
        if xi.as_slice().iter().chain(eta.as_slice()).any(|&v| v > cap) {
            return Err(Error::Input(format!("occupation above the cap {cap}")));
        }
    }
    Ok(xi.as_slice().iter().zip(eta.as_slice()).map(|(&k, &n)| d_theta(theta, k, n)).product())
}

/// A duality function `D(ξ, η)` with `ξ` a dual and `η` an original state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DualityKernel {
    /// `D_θ` between two copies of the same lattice.
    SelfDual { theta: f64 },
    /// `D̂_θ(ξ, η) = ρ_ℓ^{ξ_0} D_θ(ξ|_V, η) ρ_r^{ξ_{N+1}}` between a chain
    /// with absorbing ends `0, N+1` and the reservoir chain on `1..N`.
    Reservoir { theta: f64, rho_left: f64, rho_right: f64 },
}

impl DualityKernel {
    pub fn eval(&self, xi: &Configuration, eta: &Configuration) -> Result<f64> {
        match *self {
            Self::SelfDual { theta } => selfduality_d(theta, xi, eta),
            Self::Reservoir { theta, rho_left, rho_right } => {
                let n = eta.n_sites();
                if xi.n_sites() != n + 2 {
                    return Err(Error::LatticeMismatch(format!(
                        "dual configuration over {} sites, original over {n}",
                        xi.n_sites()
                    )));
                }
                let bulk: f64 = (0..n).map(|x| d_theta(theta, xi.occupation(x + 1), eta.occupation(x))).product();
                Ok(rho_left.powi(xi.occupation(0) as i32) * bulk * rho_right.powi(xi.occupation(n + 1) as i32))
            }
        }
    }

    /// `D(ξ, η)` for all `ξ ∈ dual`, `η ∈ orig`.
    pub fn matrix(&self, dual: &Sector, orig: &Sector) -> Result<DMatrix<f64>> {
        let mut d = DMatrix::zeros(dual.len(), orig.len());
        for (i, xi) in dual.states().iter().enumerate() {
            for (j, eta) in orig.states().iter().enumerate() {
                d[(i, j)] = self.eval(xi, eta)?;
            }
        }
        Ok(d)
    }
}
