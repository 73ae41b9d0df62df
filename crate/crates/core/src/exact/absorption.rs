//! Absorption probabilities `P_η(η(∞) = ζ)`.
//!
//! States with every bulk site empty are absorbed; all others are
//! transient. With `Q_TT` and `Q_TA` the transient–transient and
//! transient–absorbed blocks, the table `H` solves `Q_TT H = −Q_TA`.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::exact::SparseGenerator;
use crate::sector::Sector;

/// Transient blocks up to this size are solved by dense LU.
pub const DENSE_LIMIT: usize = 3000;

const MAX_SWEEPS: usize = 200_000;

/// Distribution of the absorbed configuration from one start.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptionResult {
    pub start: Configuration,
    /// `(ζ, P(η(∞) = ζ))` in sector order.
    pub table: Vec<(Configuration, f64)>,
    /// `1 − Σ` of the table.
    pub residual: f64,
}

impl AbsorptionResult {
    pub fn probability(&self, zeta: &Configuration) -> f64 {
        self.table.iter().find(|(z, _)| z == zeta).map_or(0.0, |(_, p)| *p)
    }
}

/// Absorption probabilities from every transient state at once.
#[derive(Clone, Debug)]
pub struct AbsorptionTable {
    sector: Arc<Sector>,
    /// Sector index → row of `h`, for transient states.
    row_of: Vec<Option<usize>>,
    absorbed: Vec<usize>,
    h: DMatrix<f64>,
    residual: f64,
}

impl AbsorptionTable {
    pub fn sector(&self) -> &Arc<Sector> {
        &self.sector
    }

    /// Sector indices of the absorbed states (the columns).
    pub fn absorbed(&self) -> &[usize] {
        &self.absorbed
    }

    /// Largest `|Q_TT H + Q_TA|` entry of the solve.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `P(η(∞) = absorbed[col])` from sector state `start`.
    pub fn probability(&self, start: usize, col: usize) -> f64 {
        match self.row_of[start] {
            Some(r) => self.h[(r, col)],
            None => f64::from(self.absorbed[col] == start),
        }
    }

    pub fn distribution(&self, start: &Configuration) -> Result<AbsorptionResult> {
        let s = self.sector.require(start)?;
        let table: Vec<_> = (0..self.absorbed.len())
            .map(|c| (self.sector.state(self.absorbed[c]).clone(), self.probability(s, c)))
            .collect();
        let residual = 1.0 - table.iter().map(|(_, p)| p).sum::<f64>();
        Ok(AbsorptionResult { start: start.clone(), table, residual })
    }
}

struct Split {
    row_of: Vec<Option<usize>>,
    transient: Vec<usize>,
    absorbed: Vec<usize>,
    col_of: Vec<Option<usize>>,
}

fn split(q: &SparseGenerator) -> Result<Split> {
    let sector = q.sector();
    let lattice = sector.lattice();
    let n = q.len();
    let mut row_of = vec![None; n];
    let mut col_of = vec![None; n];
    let mut transient = Vec::new();
    let mut absorbed = Vec::new();
    for (k, eta) in sector.states().iter().enumerate() {
        if eta.is_absorbed(lattice) {
            if q.off().row(k).next().is_some() {
                return Err(Error::Input(format!("absorbed state {eta} has outgoing moves")));
            }
            col_of[k] = Some(absorbed.len());
            absorbed.push(k);
        } else {
            row_of[k] = Some(transient.len());
            transient.push(k);
        }
    }
    // every transient state must reach an absorbed one
    let incoming = q.off().transpose();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = absorbed.iter().copied().collect();
    for &a in &absorbed {
        seen[a] = true;
    }
    while let Some(k) = queue.pop_front() {
        for (src, rate) in incoming.row(k) {
            if rate > 0.0 && !seen[src] {
                seen[src] = true;
                queue.push_back(src);
            }
        }
    }
    if let Some(k) = (0..n).find(|&k| !seen[k]) {
        return Err(Error::Unreachable { state: sector.state(k).to_string() });
    }
    Ok(Split { row_of, transient, absorbed, col_of })
}

/// Solves for the full absorption table.
pub fn absorption_table(q: &SparseGenerator, tol: f64) -> Result<AbsorptionTable> {
    let sp = split(q)?;
    let (nt, na) = (sp.transient.len(), sp.absorbed.len());
    let mut qtt = Vec::new();
    let mut rhs = DMatrix::zeros(nt, na);
    for (r, &k) in sp.transient.iter().enumerate() {
        for (c, v) in q.off().row(k) {
            match (sp.row_of[c], sp.col_of[c]) {
                (Some(cc), _) => qtt.push((r, cc, v)),
                (_, Some(a)) => rhs[(r, a)] -= v,
                _ => unreachable!(),
            }
        }
    }
    let diag: Vec<f64> = sp.transient.iter().map(|&k| q.diag()[k]).collect();
    let h = if nt == 0 {
        DMatrix::zeros(0, na)
    } else if nt <= DENSE_LIMIT {
        let mut a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
        for &(r, c, v) in &qtt {
            a[(r, c)] += v;
        }
        a.lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NonConvergence("singular transient block".into()))?
    } else {
        gauss_seidel(nt, &qtt, &diag, &rhs, tol)?
    };
    // residual of Q_TT H + Q_TA
    let mut res = -rhs.clone();
    for (r, d) in diag.iter().enumerate() {
        for c in 0..na {
            res[(r, c)] += d * h[(r, c)];
        }
    }
    for &(r, cc, v) in &qtt {
        for c in 0..na {
            res[(r, c)] += v * h[(cc, c)];
        }
    }
    let residual = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(AbsorptionTable { sector: q.sector().clone(), row_of: sp.row_of, absorbed: sp.absorbed, h, residual })
}

fn gauss_seidel(
    nt: usize,
    qtt: &[(usize, usize, f64)],
    diag: &[f64],
    rhs: &DMatrix<f64>,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let na = rhs.ncols();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nt];
    for &(r, c, v) in qtt {
        rows[r].push((c, v));
    }
    let mut h: DMatrix<f64> = DMatrix::zeros(nt, na);
    let mut acc = vec![0.0; na];
    for sweep in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for r in 0..nt {
            for (c, a) in acc.iter_mut().enumerate() {
                *a = rhs[(r, c)];
            }
            for &(k, v) in &rows[r] {
                for (c, a) in acc.iter_mut().enumerate() {
                    *a -= v * h[(k, c)];
                }
            }
            for (c, a) in acc.iter().enumerate() {
                let new: f64 = a / diag[r];
                change = change.max((new - h[(r, c)]).abs());
                h[(r, c)] = new;
            }
        }
        if change < tol * 1e-3 && sweep > 0 {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence(format!("Gauss–Seidel absorption solve after {MAX_SWEEPS} sweeps")))
}

/// Absorption distribution from `start`.
pub fn absorption_distribution(q: &SparseGenerator, start: &Configuration, tol: f64) -> Result<AbsorptionResult> {
    let s = q.sector().require(start)?;
    let lattice = q.sector().lattice();
    if start.is_absorbed(lattice) {
        let table = q
            .sector()
            .states()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.is_absorbed(lattice))
            .map(|(k, z)| (z.clone(), f64::from(k == s)))
            .collect();
        return Ok(AbsorptionResult { start: start.clone(), table, residual: 0.0 });
    }
    absorption_table(q, tol)?.distribution(start)
}

/// Forward (transposed) route: expected occupation times `x` with
/// `x (−Q_TT) = e_start`, then `P(ζ) = x Q_TA`. Used to cross-check
/// [`absorption_table`].
pub fn absorption_distribution_forward(q: &SparseGenerator, start: &Configuration) -> Result<AbsorptionResult> {
    let s = q.sector().require(start)?;
    if start.is_absorbed(q.sector().lattice()) {
        return absorption_distribution(q, start, 1e-12);
    }
    let sp = split(q)?;
    let nt = sp.transient.len();
    if nt > DENSE_LIMIT {
        return Err(Error::Infeasible(format!("forward route limited to {DENSE_LIMIT} transient states")));
    }
    let mut a = DMatrix::zeros(nt, nt);
    for (r, &k) in sp.transient.iter().enumerate() {
        a[(r, r)] = -q.diag()[k];
        for (c, v) in q.off().row(k) {
            if let Some(cc) = sp.row_of[c] {
                a[(r, cc)] -= v;
            }
        }
    }
    let mut e = nalgebra::DVector::zeros(nt);
    e[sp.row_of[s].expect("transient start")] = 1.0;
    let x = a
        .transpose()
        .lu()
        .solve(&e)
        .ok_or_else(|| Error::NonConvergence("singular transient block".into()))?;
    let mut probs = vec![0.0; sp.absorbed.len()];
    for (r, &k) in sp.transient.iter().enumerate() {
        for (c, v) in q.off().row(k) {
            if let Some(col) = sp.col_of[c] {
                probs[col] += x[r] * v;
            }
        }
    }
    let table: Vec<_> = sp.absorbed.iter().zip(probs).map(|(&k, p)| (q.sector().state(k).clone(), p)).collect();
    let residual = 1.0 - table.iter().map(|(_, p)| p).sum::<f64>();
    Ok(AbsorptionResult { start: start.clone(), table, residual })
}
