//! Closed first-moment equations for reservoir-driven consistent systems.
//!
//! For rates `κ(θm + α)` the `θ` parts of the two hop directions across an
//! edge cancel in the mean flux, and reservoir birth minus death is
//! `c(ρ − η)`. The stationary means therefore solve a linear system on
//! the bulk sites, with no truncation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rates::GeneratorSpec;

/// Stationary means `E[η_x]` for every site (zero on absorbing sites).
pub fn stationary_first_moments(spec: &GeneratorSpec) -> Result<Vec<f64>> {
    let fam = spec
        .family()
        .ok_or_else(|| Error::Input("first-moment closure needs a consistent rate family".into()))?;
    if !spec.absorption().is_empty() {
        return Err(Error::Input("first-moment closure is for reservoir systems".into()));
    }
    if spec.reservoirs().is_empty() {
        return Err(Error::Input("no reservoirs: stationary means are not determined".into()));
    }
    let n = spec.lattice().n_sites();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for e in fam.edges() {
        // d/dt E[η_j] gets + α_ij m_i − α_ji m_j
        a[(e.j, e.i)] += e.alpha_ij;
        a[(e.j, e.j)] -= e.alpha_ji;
        a[(e.i, e.j)] += e.alpha_ji;
        a[(e.i, e.i)] -= e.alpha_ij;
    }
    for r in spec.reservoirs() {
        a[(r.site, r.site)] -= r.c;
        b[r.site] -= r.c * r.rho;
    }
    for x in spec.lattice().absorbing_sites() {
        a[(x, x)] = 1.0;
    }
    let m = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Reducible("some bulk sites are not connected to a reservoir".into()))?;
    Ok(m.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::ChainModel;

    #[test]
    fn linear_profile_for_every_theta() {
        for theta in [-1.0, 0.0, 1.0, 2.0] {
            let (rl, rr) = if theta < 0.0 { (0.1, 0.9) } else { (1.0, 5.0) };
            let m = ChainModel::unit(6, theta, rl, rr).unwrap();
            let means = stationary_first_moments(&m.reservoir_spec().unwrap()).unwrap();
            for (i, v) in means.iter().enumerate() {
                let x = (i + 1) as f64;
                assert!((v - (rl + (rr - rl) * x / 7.0)).abs() < 1e-12);
            }
        }
    }
}
