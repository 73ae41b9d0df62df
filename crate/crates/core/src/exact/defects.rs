//! Defects of the algebraic identities: commutation with annihilation,
//! duality relations and detailed balance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exact::SparseGenerator;
use crate::sparse::CsrMatrix;

/// Largest entry of `L_n A − A L_{n−1}`, where `A` maps functions on
/// `Ω_{n−1}` to functions on `Ω_n`.
pub fn commutator_defect(l_n: &SparseGenerator, l_nm1: &SparseGenerator, a: &CsrMatrix) -> Result<f64> {
    if a.n_rows() != l_n.len() || a.n_cols() != l_nm1.len() {
        return Err(Error::Input(format!(
            "annihilation matrix is {}x{}, generators have {} and {} states",
            a.n_rows(),
            a.n_cols(),
            l_n.len(),
            l_nm1.len()
        )));
    }
    let left = l_n.full().mul(a)?;
    let right = a.mul(&l_nm1.full())?;
    left.max_abs_diff(&right)
}

/// `max_{ξ,η} |(L_dual D)(ξ, η) − (D L_origᵀ)(ξ, η)|` with `D` indexed by
/// (dual state, original state).
pub fn duality_defect(l_dual: &SparseGenerator, l_orig: &SparseGenerator, d: &DMatrix<f64>) -> Result<f64> {
    duality_defect_on(l_dual, l_orig, d, None)
}

/// As [`duality_defect`], restricted to the original states in `columns`
/// (used on truncated spaces, where rows near the cut are incomplete).
pub fn duality_defect_on(
    l_dual: &SparseGenerator,
    l_orig: &SparseGenerator,
    d: &DMatrix<f64>,
    columns: Option<&[usize]>,
) -> Result<f64> {
    if d.nrows() != l_dual.len() || d.ncols() != l_orig.len() {
        return Err(Error::Input(format!(
            "kernel is {}x{}, expected {}x{}",
            d.nrows(),
            d.ncols(),
            l_dual.len(),
            l_orig.len()
        )));
    }
    let all: Vec<usize>;
    let cols = match columns {
        Some(c) => c,
        None => {
            all = (0..l_orig.len()).collect();
            &all
        }
    };
    let mut worst = 0.0f64;
    for &eta in cols {
        // (D L_origᵀ)(·, η) = Σ_{η'} L_orig(η, η') D(·, η')
        let mut rhs: Vec<f64> = d.column(eta).iter().map(|v| v * l_orig.diag()[eta]).collect();
        for (e2, rate) in l_orig.off().row(eta) {
            for (r, v) in rhs.iter_mut().enumerate() {
                *v += rate * d[(r, e2)];
            }
        }
        let col: Vec<f64> = d.column(eta).iter().copied().collect();
        let lhs = l_dual.apply(&col);
        for (a, b) in lhs.iter().zip(&rhs) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// `max |ν(η)Q(η, η') − ν(η')Q(η', η)|` over pairs.
pub fn detailed_balance_defect(q: &SparseGenerator, nu: &[f64]) -> Result<f64> {
    if nu.len() != q.len() {
        return Err(Error::Input("weight vector length does not match sector".into()));
    }
    let t = q.off().transpose();
    let mut worst = 0.0f64;
    for r in 0..q.len() {
        for (c, v) in q.off().row(r) {
            let back = t.get(r, c);
            worst = worst.max((nu[r] * v - nu[c] * back).abs());
        }
    }
    Ok(worst)
}
