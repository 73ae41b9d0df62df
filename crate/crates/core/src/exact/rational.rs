//! Exact-rational absorption solves for small sectors.
//!
//! Rates are converted from `f64` exactly (every finite double is a
//! dyadic rational), so results are exact whenever the model's rates are
//! representable, as they are for the integer and half-integer parameters
//! used in the acceptance runs.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::rates::GeneratorSpec;
use crate::sector::Sector;

/// Largest transient block handled in exact arithmetic.
pub const RATIONAL_LIMIT: usize = 400;

pub fn to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("non-finite rate {x}")))
}

#[derive(Clone, Debug)]
pub struct RationalAbsorptionTable {
    sector: Arc<Sector>,
    row_of: Vec<Option<usize>>,
    absorbed: Vec<usize>,
    h: Vec<Vec<BigRational>>,
}

impl RationalAbsorptionTable {
    pub fn sector(&self) -> &Arc<Sector> {
        &self.sector
    }

    pub fn absorbed(&self) -> &[usize] {
        &self.absorbed
    }

    pub fn probability(&self, start: usize, col: usize) -> BigRational {
        match self.row_of[start] {
            Some(r) => self.h[r][col].clone(),
            None if self.absorbed[col] == start => BigRational::one(),
            None => BigRational::zero(),
        }
    }

    /// `(ζ, P(η(∞) = ζ))` from `start`.
    pub fn distribution(&self, start: &Configuration) -> Result<Vec<(Configuration, BigRational)>> {
        let s = self.sector.require(start)?;
        Ok((0..self.absorbed.len())
            .map(|c| (self.sector.state(self.absorbed[c]).clone(), self.probability(s, c)))
            .collect())
    }
}

/// Exact absorption table on `sector`.
pub fn rational_absorption_table(spec: &GeneratorSpec, sector: Arc<Sector>) -> Result<RationalAbsorptionTable> {
    let lattice = sector.lattice().clone();
    let n = sector.len();
    let mut row_of = vec![None; n];
    let mut col_of = vec![None; n];
    let mut transient = Vec::new();
    let mut absorbed = Vec::new();
    for (k, eta) in sector.states().iter().enumerate() {
        if eta.is_absorbed(&lattice) {
            col_of[k] = Some(absorbed.len());
            absorbed.push(k);
        } else {
            row_of[k] = Some(transient.len());
            transient.push(k);
        }
    }
    let (nt, na) = (transient.len(), absorbed.len());
    if nt > RATIONAL_LIMIT {
        return Err(Error::Infeasible(format!("{nt} transient states exceed the exact-arithmetic limit")));
    }
    // augmented system [Q_TT | −Q_TA]
    let mut m = vec![vec![BigRational::zero(); nt + na]; nt];
    for (r, &k) in transient.iter().enumerate() {
        let eta = sector.state(k);
        let mut failure = None;
        let mut work = Vec::new();
        spec.for_each_move(eta.as_slice(), |mv, rate| {
            work.clear();
            work.extend_from_slice(eta.as_slice());
            mv.apply(&mut work);
            let target = Configuration::from_occupations(work.clone());
            let rate = match to_rational(rate) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let Some(c) = sector.index_of(&target) else {
                failure = Some(Error::Assembly { state: format!("{eta} → {target}") });
                return;
            };
            m[r][r] -= &rate;
            match (row_of[c], col_of[c]) {
                (Some(cc), _) => m[r][cc] += rate,
                (_, Some(a)) => m[r][nt + a] -= rate,
                _ => unreachable!(),
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
    }
    // Gauss–Jordan elimination
    for col in 0..nt {
        let pivot = (col..nt)
            .find(|&r| !m[r][col].is_zero())
            .ok_or_else(|| Error::Unreachable { state: sector.state(transient[col]).to_string() })?;
        m.swap(col, pivot);
        let inv = m[col][col].recip();
        for v in m[col].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                if !p.is_zero() {
                    *v -= &factor * p;
                }
            }
        }
    }
    let h = m.into_iter().map(|row| row[nt..].to_vec()).collect();
    Ok(RationalAbsorptionTable { sector, row_of, absorbed, h })
}
