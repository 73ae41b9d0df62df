//! Exact numerics for the generator on an enumerated state space.
//!
//! [`assemble`] turns a [`GeneratorSpec`] into a sparse rate matrix on a
//! [`Sector`]; the submodules act with it: uniformization for `e^{tQ}f`,
//! absorption and stationary solves, and defect checks.

pub mod absorption;
pub mod defects;
pub mod moments;
pub mod rational;
pub mod semigroup;
pub mod stationary;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par::{try_map_range, Exec};
use crate::rates::GeneratorSpec;
use crate::sector::Sector;
use crate::sparse::CsrMatrix;

pub use absorption::{absorption_distribution, absorption_table, AbsorptionResult, AbsorptionTable};
pub use defects::{commutator_defect, detailed_balance_defect, duality_defect, duality_defect_on};
pub use moments::stationary_first_moments;
pub use semigroup::semigroup_apply;
pub use stationary::{stationary_distribution, truncated_ness, TruncatedNess};

/// Rate matrix `Q` on one sector: off-diagonal rates plus the diagonal
/// `−Σ_j Q(i, j)`.
#[derive(Clone, Debug)]
pub struct SparseGenerator {
    sector: Arc<Sector>,
    off: CsrMatrix,
    diag: Vec<f64>,
    lambda_max: f64,
}

impl SparseGenerator {
    pub fn sector(&self) -> &Arc<Sector> {
        &self.sector
    }

    /// Off-diagonal part.
    pub fn off(&self) -> &CsrMatrix {
        &self.off
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Largest total exit rate.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Full matrix including the diagonal.
    pub fn full(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.off.nnz() + self.len());
        for r in 0..self.len() {
            t.extend(self.off.row(r).map(|(c, v)| (r, c, v)));
            if self.diag[r] != 0.0 {
                t.push((r, r, self.diag[r]));
            }
        }
        CsrMatrix::from_triplets(self.len(), self.len(), t)
    }

    /// `Q f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.off.matvec(f);
        for (o, (d, x)) in out.iter_mut().zip(self.diag.iter().zip(f)) {
            *o += d * x;
        }
        out
    }

    /// `π Q`.
    pub fn apply_left(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = self.off.vecmat(pi);
        for (o, (d, x)) in out.iter_mut().zip(self.diag.iter().zip(pi)) {
            *o += d * x;
        }
        out
    }

    /// Largest `|Σ_j Q(i, j)|` over rows; zero up to rounding.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.len())
            .map(|r| (self.off.row(r).map(|(_, v)| v).sum::<f64>() + self.diag[r]).abs())
            .fold(0.0, f64::max)
    }
}

/// Assembles `Q`; every move must stay inside the sector.
pub fn assemble(spec: &GeneratorSpec, sector: Arc<Sector>) -> Result<SparseGenerator> {
    build(spec, sector, true, Exec::default())
}

/// [`assemble`] with an explicit execution mode.
pub fn assemble_with(spec: &GeneratorSpec, sector: Arc<Sector>, exec: Exec) -> Result<SparseGenerator> {
    build(spec, sector, true, exec)
}

/// Assembles `Q` on a truncated state space, dropping moves that leave
/// it (reflecting truncation).
pub fn assemble_truncated(spec: &GeneratorSpec, sector: Arc<Sector>) -> Result<SparseGenerator> {
    build(spec, sector, false, Exec::default())
}

fn build(spec: &GeneratorSpec, sector: Arc<Sector>, strict: bool, exec: Exec) -> Result<SparseGenerator> {
    if **sector.lattice() != **spec.lattice() {
        return Err(Error::LatticeMismatch("sector and generator use different lattices".into()));
    }
    let n = sector.len();
    let rows = try_map_range(exec, n, |r| {
        let eta = &sector.states()[r];
        let mut row = Vec::new();
        let mut failed = None;
        let mut scratch: Vec<u32> = Vec::with_capacity(eta.n_sites());
        spec.for_each_move(eta.as_slice(), |mv, rate| {
            scratch.clear();
            scratch.extend_from_slice(eta.as_slice());
            mv.apply(&mut scratch);
            let target = crate::config::Configuration::from_occupations(scratch.clone());
            match sector.index_of(&target) {
                Some(c) => row.push((c, rate)),
                None if strict => failed = Some(target),
                None => {}
            }
        });
        match failed {
            Some(target) => Err(Error::Assembly { state: format!("{eta} → {target}") }),
            None => Ok(row),
        }
    })?;
    let mut trip = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    let mut diag = vec![0.0; n];
    for (r, row) in rows.into_iter().enumerate() {
        diag[r] = -row.iter().map(|(_, rate)| rate).sum::<f64>();
        trip.extend(row.into_iter().map(|(c, rate)| (r, c, rate)));
    }
    let lambda_max = diag.iter().fold(0.0f64, |m, d| m.max(-d));
    Ok(SparseGenerator { sector, off: CsrMatrix::from_triplets(n, n, trip), diag, lambda_max })
}
