//! Generating functions of the number of particles absorbed at the left
//! boundary, `G(η, z) = E_η[z^{η_0(∞)}]`, and the identities they obey.

pub mod poly;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed};
use serde::Serialize;

use crate::config::{binomial, binomial_f, combinations, phi, Configuration, CoordinateVector};
use crate::error::{Error, Result};
use crate::exact::{absorption_table, assemble, semigroup_apply, AbsorptionResult};
use crate::lattice::Lattice;
use crate::rates::GeneratorSpec;
use crate::sector::Sector;

pub use poly::{GenPoly, Poly};

/// Left and right absorbing sites of a two-boundary lattice.
pub fn boundary_sites(lattice: &Lattice) -> Result<(usize, usize)> {
    let abs: Vec<usize> = lattice.absorbing_sites().collect();
    match abs.as_slice() {
        [l, r] => Ok((*l, *r)),
        _ => Err(Error::Input(format!("expected two absorbing sites, found {}", abs.len()))),
    }
}

/// `q(k) = P(η_0(∞) = k)` collected from an absorption distribution.
pub fn genfun_from_absorption(res: &AbsorptionResult, lattice: &Lattice) -> Result<GenPoly> {
    let (left, _) = boundary_sites(lattice)?;
    let n = res.start.total() as usize;
    let mut q = vec![0.0; n + 1];
    for (zeta, p) in &res.table {
        q[zeta.occupation(left) as usize] += p;
    }
    Ok(GenPoly::from_coeffs(q))
}

/// Exact counterpart of [`genfun_from_absorption`].
pub fn genfun_from_rational(
    dist: &[(Configuration, BigRational)],
    n: u32,
    lattice: &Lattice,
) -> Result<Poly<BigRational>> {
    let (left, _) = boundary_sites(lattice)?;
    let mut q = Poly::zero(n as usize + 1);
    for (zeta, p) in dist {
        let k = zeta.occupation(left) as usize;
        q = &q + &Poly::monomial(p.clone(), k);
    }
    Ok(q.resized(n as usize + 1))
}

/// `(1−z)G′ + nG − Σ_i η_i G(η−δ_i)`, with `subs` the pairs `(η_i, G(η−δ_i))`.
pub fn recursion_residual<T: Clone + Num + FromPrimitive>(g: &Poly<T>, n: u32, subs: &[(u32, Poly<T>)]) -> Poly<T> {
    let one_minus_z = Poly::linear(T::one(), T::zero() - T::one());
    let mut r = &(&one_minus_z * &g.derivative()) + &g.scale(T::from_u32(n).unwrap());
    for (mult, sub) in subs {
        r = &r - &sub.scale(T::from_u32(*mult).unwrap());
    }
    r
}

fn check_degrees<T: Clone + Num + FromPrimitive>(g: Option<&Poly<T>>, n: u32, subs: &[(u32, Poly<T>)]) -> Result<()> {
    if let Some(g) = g {
        if g.degree().is_some_and(|d| d > n as usize) {
            return Err(Error::Input(format!("generating function has degree above n = {n}")));
        }
    }
    if n == 0 {
        return Err(Error::Input("recursion needs at least one particle".into()));
    }
    if subs.iter().any(|(_, s)| s.degree().is_some_and(|d| d + 1 > n as usize)) {
        return Err(Error::Input(format!("sub-configuration polynomial has degree ≥ n = {n}")));
    }
    if subs.iter().map(|(m, _)| m).sum::<u32>() != n {
        return Err(Error::Input("multiplicities of the removed particles do not add up to n".into()));
    }
    Ok(())
}

/// Largest coefficient of [`recursion_residual`].
pub fn ode_recursion_defect<T>(g: &Poly<T>, n: u32, subs: &[(u32, Poly<T>)]) -> Result<T>
where
    T: Clone + Num + FromPrimitive + Signed + PartialOrd,
{
    check_degrees(Some(g), n, subs)?;
    Ok(recursion_residual(g, n, subs).max_abs())
}

/// Writes `p` (degree ≤ d) as `Σ_m b_m u^m (1−u)^{d−m}` and returns `b`.
fn to_bernstein_like<T: Clone + Num + FromPrimitive>(p: &Poly<T>, d: usize) -> Poly<T> {
    // with s = u/(1−u): p(u)/(1−u)^d = Σ_k a_k s^k (1+s)^{d−k}
    let one_plus_s = Poly::linear(T::one(), T::one());
    let mut b = Poly::zero(d + 1);
    for (k, a) in p.coeffs().iter().enumerate().take(d + 1) {
        if a.is_zero() {
            continue;
        }
        let term = &Poly::monomial(a.clone(), k) * &one_plus_s.pow(d - k);
        b = &b + &term;
    }
    b
}

/// Solves the recursion for `G(η, ·)` given `G(η, 0)` and the
/// sub-configuration polynomials `(η_i, G(η−δ_i, ·))`:
///
/// `G(z) = (1−z)^n G(0) + (1−z)^n Σ_i η_i ∫_0^z (1−u)^{−n−1} G(η−δ_i, u) du`,
///
/// integrated term by term via `∫_0^z u^m (1−u)^{−m−2} du = (z/(1−z))^{m+1}/(m+1)`.
pub fn integrate_recursion<T: Clone + Num + FromPrimitive>(g0: T, n: u32, subs: &[(u32, Poly<T>)]) -> Result<Poly<T>> {
    check_degrees::<T>(None, n, subs)?;
    let n = n as usize;
    let mut g = Poly::<T>::one_minus_z_pow(n).scale(g0);
    for (mult, sub) in subs {
        let b = to_bernstein_like(sub, n - 1);
        for (m, bm) in b.coeffs().iter().enumerate() {
            if bm.is_zero() {
                continue;
            }
            // (1−z)^n · (z/(1−z))^{m+1}/(m+1) = z^{m+1}(1−z)^{n−m−1}/(m+1)
            let c = bm.clone() * T::from_u32(*mult).unwrap() / T::from_usize(m + 1).unwrap();
            let term = &Poly::monomial(c, m + 1) * &Poly::one_minus_z_pow(n - m - 1);
            g = &g + &term;
        }
    }
    Ok(g.resized(n + 1))
}

/// The difference function `𝒢 = G − G^irw` expanded over sub-configurations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gee {
    /// `γ_κ` for `κ = 2..=n` (index `κ − 2`).
    pub gammas: Vec<f64>,
    pub poly: Vec<f64>,
}

impl Gee {
    pub fn gamma(&self, kappa: usize) -> f64 {
        self.gammas[kappa - 2]
    }

    pub fn genpoly(&self) -> GenPoly {
        GenPoly::from_coeffs(self.poly.clone())
    }
}

/// `𝒢(φ(x), z) = Σ_{κ=2}^n z^{n−κ}(1−z)^κ γ_κ`, `γ_κ = Σ_{y∈C_κ(x)} 𝒢(φ(y), 0)`.
pub fn gee_expansion(
    coords: &CoordinateVector,
    mut g_zero: impl FnMut(&CoordinateVector) -> Result<f64>,
) -> Result<Gee> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::Input("the difference expansion needs at least two particles".into()));
    }
    let mut gammas = Vec::with_capacity(n - 1);
    let mut poly = GenPoly::zero(n + 1);
    for kappa in 2..=n {
        let mut gamma = 0.0;
        for y in combinations(coords, kappa)? {
            gamma += g_zero(&y)?;
        }
        let basis = &GenPoly::monomial(1.0, n - kappa) * &GenPoly::one_minus_z_pow(kappa);
        poly = &poly + &basis.scale(gamma);
        gammas.push(gamma);
    }
    Ok(Gee { gammas, poly: poly.resized(n + 1).into_coeffs() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Time(f64),
    Infinity,
}

/// `|E_{φ(x)}[F(ξ, η(t))] − Σ_{y∈C_m(x)} P_{φ(y)}(η(t) = ξ)|`.
pub fn factorial_moment_identity_defect(
    spec: &GeneratorSpec,
    coords: &CoordinateVector,
    xi: &Configuration,
    horizon: Horizon,
    tol: f64,
) -> Result<f64> {
    let lattice = spec.lattice().clone();
    let (n, m) = (coords.len() as u32, xi.total());
    if m == 0 || m >= n {
        return Err(Error::Input(format!("need 0 < |ξ| < n, got |ξ| = {m}, n = {n}")));
    }
    let start = phi(&lattice, coords)?;
    let s_n = Arc::new(Sector::enumerate(lattice.clone(), n, spec.cap())?);
    let s_m = Arc::new(Sector::enumerate(lattice.clone(), m, spec.cap())?);
    let xi_idx = s_m.require(xi)?;
    let start_idx = s_n.require(&start)?;
    let subs: Vec<usize> = combinations(coords, m as usize)?
        .iter()
        .map(|y| s_m.require(&phi(&lattice, y)?))
        .collect::<Result<_>>()?;
    let (lhs, rhs) = match horizon {
        Horizon::Time(t) => {
            let f: Vec<f64> = s_n.states().iter().map(|eta| binomial_f(xi, eta).map(|v| v as f64)).collect::<Result<_>>()?;
            let lhs = semigroup_apply(&assemble(spec, s_n.clone())?, &f, t, tol)?[start_idx];
            let mut g = vec![0.0; s_m.len()];
            g[xi_idx] = 1.0;
            let v = semigroup_apply(&assemble(spec, s_m.clone())?, &g, t, tol)?;
            (lhs, subs.iter().map(|&k| v[k]).sum::<f64>())
        }
        Horizon::Infinity => {
            let tn = absorption_table(&assemble(spec, s_n.clone())?, tol)?;
            let tm = absorption_table(&assemble(spec, s_m.clone())?, tol)?;
            let mut lhs = 0.0;
            for (col, &a) in tn.absorbed().iter().enumerate() {
                lhs += tn.probability(start_idx, col) * binomial_f(xi, s_n.state(a))? as f64;
            }
            let rhs = match tm.absorbed().iter().position(|&a| a == xi_idx) {
                Some(col) => subs.iter().map(|&k| tm.probability(k, col)).sum(),
                None => 0.0,
            };
            (lhs, rhs)
        }
    };
    Ok((lhs - rhs).abs())
}

/// Largest defect of the factorial-moment identity over every start in
/// `Ω_n` and every `ξ ∈ Ω_m`, evaluated with one solve per `ξ`.
///
/// Uses `Σ_{y∈C_m(x)} h(φ(y)) = Σ_ζ F(ζ, φ(x)) h(ζ)`.
pub fn factorial_moment_identity_max_defect(
    spec: &GeneratorSpec,
    n: u32,
    m: u32,
    horizon: Horizon,
    tol: f64,
) -> Result<f64> {
    if m == 0 || m >= n {
        return Err(Error::Input(format!("need 0 < m < n, got m = {m}, n = {n}")));
    }
    let lattice = spec.lattice().clone();
    let s_n = Arc::new(Sector::enumerate(lattice.clone(), n, spec.cap())?);
    let s_m = Arc::new(Sector::enumerate(lattice, m, spec.cap())?);
    // F(ζ, η) for ζ ∈ Ω_m, η ∈ Ω_n
    let f = DMatrix::from_fn(s_m.len(), s_n.len(), |a, b| {
        s_m.state(a).as_slice().iter().zip(s_n.state(b).as_slice()).map(|(&k, &v)| binomial(v, k)).product::<u64>() as f64
    });
    let mut worst = 0.0f64;
    match horizon {
        Horizon::Time(t) => {
            let qn = assemble(spec, s_n.clone())?;
            let qm = assemble(spec, s_m.clone())?;
            for xi in 0..s_m.len() {
                let row: Vec<f64> = f.row(xi).iter().copied().collect();
                let lhs = semigroup_apply(&qn, &row, t, tol)?;
                let mut g = vec![0.0; s_m.len()];
                g[xi] = 1.0;
                let h = semigroup_apply(&qm, &g, t, tol)?;
                for (eta, l) in lhs.iter().enumerate() {
                    let rhs: f64 = (0..s_m.len()).map(|z| f[(z, eta)] * h[z]).sum();
                    worst = worst.max((l - rhs).abs());
                }
            }
        }
        Horizon::Infinity => {
            let tn = absorption_table(&assemble(spec, s_n.clone())?, tol)?;
            let tm = absorption_table(&assemble(spec, s_m.clone())?, tol)?;
            for (col_m, &xi) in tm.absorbed().iter().enumerate() {
                for eta in 0..s_n.len() {
                    let lhs: f64 = tn
                        .absorbed()
                        .iter()
                        .enumerate()
                        .map(|(c, &a)| tn.probability(eta, c) * f[(xi, a)])
                        .sum();
                    let rhs: f64 = (0..s_m.len()).map(|z| f[(z, eta)] * tm.probability(z, col_m)).sum();
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Generating function of exclusion walkers on `{1..N}` with unit
/// boundary rates, built by removing the rightmost particle:
///
/// `G^{(N)}(ξ, z) = (z−1)(1 − x_m/(N+1)) G^{(N−1)}(ξ−δ_{x_m}, z) + G^{(N)}(ξ−δ_{x_m}, z)`.
///
/// Coordinates are labels in `1..=N`, strictly increasing.
pub fn sep_size_recursion<T: Clone + Num + FromPrimitive>(n_sites: usize, coords: &CoordinateVector) -> Result<Poly<T>> {
    let x = &coords.0;
    if x.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("coordinates must be strictly increasing".into()));
    }
    if x.first().is_some_and(|&v| v == 0) || x.last().is_some_and(|&v| v > n_sites) {
        return Err(Error::Input(format!("coordinates must lie in 1..={n_sites}")));
    }
    Ok(sep_rec(n_sites, x).resized(x.len() + 1))
}

fn sep_rec<T: Clone + Num + FromPrimitive>(n_sites: usize, x: &[usize]) -> Poly<T> {
    let Some((&xm, rest)) = x.split_last() else {
        return Poly::constant(T::one());
    };
    let q = T::one() - T::from_usize(xm).unwrap() / T::from_usize(n_sites + 1).unwrap();
    let z_minus_1 = Poly::linear(T::zero() - T::one(), T::one());
    let smaller = sep_rec::<T>(n_sites - 1, rest);
    &(&z_minus_1 * &smaller).scale(q) + &sep_rec::<T>(n_sites, rest)
}

/// Rank and residual of the binomial-moment equations for `q(0..n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub equations: usize,
    pub unknowns: usize,
    pub rank: usize,
    /// Largest residual of `q` in the system.
    pub defect: f64,
}

impl RankReport {
    pub fn underdetermined(&self) -> bool {
        self.rank < self.unknowns
    }
}

/// The system `Σ_k C(k, m) q(k) = rhs[m−1]` for `m = 1..n−1`, plus
/// `Σ_k q(k) = 1`. `rhs[m−1]` is `Σ_{y∈C_m(x)} P_{φ(y)}(all m absorbed left)`.
pub fn binomial_moment_system(q: &GenPoly, rhs: &[f64]) -> Result<RankReport> {
    let unknowns = q.len();
    let n = unknowns.checked_sub(1).filter(|&n| n >= 1).ok_or_else(|| Error::Input("empty generating function".into()))?;
    if rhs.len() != n - 1 {
        return Err(Error::Input(format!("expected {} moment values, got {}", n - 1, rhs.len())));
    }
    let mut a = DMatrix::zeros(n, unknowns);
    let mut b = vec![0.0; n];
    for m in 1..n {
        for k in 0..unknowns {
            a[(m - 1, k)] = binomial(k as u32, m as u32) as f64;
        }
        b[m - 1] = rhs[m - 1];
    }
    a.row_mut(n - 1).fill(1.0);
    b[n - 1] = 1.0;
    let defect = (0..n)
        .map(|r| ((0..unknowns).map(|k| a[(r, k)] * q.coeff(k)).sum::<f64>() - b[r]).abs())
        .fold(0.0, f64::max);
    let rank = a.rank(1e-9);
    Ok(RankReport { equations: n, unknowns, rank, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::absorption_distribution;
    use crate::rates::ChainModel;
    use num_traits::One;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn g1(n: usize, x: usize) -> GenPoly {
        let q = x as f64 / (n + 1) as f64;
        GenPoly::linear(q, 1.0 - q)
    }

    #[test]
    fn single_walker_genfun() {
        let m = ChainModel::unit(3, 0.0, 1.0, 1.0).unwrap();
        let spec = m.dual_spec().unwrap();
        let l = spec.lattice().clone();
        for x in 1..=3 {
            let s = Arc::new(Sector::enumerate(l.clone(), 1, None).unwrap());
            let q = assemble(&spec, s).unwrap();
            let res = absorption_distribution(&q, &Configuration::delta(5, x), 1e-14).unwrap();
            let g = genfun_from_absorption(&res, &l).unwrap();
            assert!((&g - &g1(3, x)).max_abs() < 1e-14);
            assert!((g.eval(1.0) - 1.0).abs() < 1e-14);
        }
        let s = Arc::new(Sector::enumerate(l.clone(), 2, None).unwrap());
        let q = assemble(&spec, s).unwrap();
        let res = absorption_distribution(&q, &Configuration::from_occupations(vec![2, 0, 0, 0, 0]), 1e-14).unwrap();
        assert_eq!(genfun_from_absorption(&res, &l).unwrap().coeffs(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn exclusion_pair_recursion_and_integration() {
        let g2 = Poly::from_coeffs(vec![r(1, 12), r(7, 12), r(1, 3)]);
        let sub = |x: i64| Poly::linear(r(x, 4), BigRational::one() - r(x, 4));
        let subs = vec![(1, sub(2)), (1, sub(1))];
        assert_eq!(recursion_residual(&g2, 2, &subs).max_abs(), r(0, 1));
        assert_eq!(integrate_recursion(r(1, 12), 2, &subs).unwrap(), g2);
        // n = 1: G(∅) ≡ 1
        let g = g1(3, 2);
        assert!(ode_recursion_defect(&g, 1, &[(1, GenPoly::constant(1.0))]).unwrap() < 1e-15);
    }

    #[test]
    fn independent_walkers_product_satisfies_recursion() {
        // ξ = 2δ_1 + δ_3 on N = 4
        let (a, b) = (g1(4, 1), g1(4, 3));
        let g = &(&a * &a) * &b;
        let subs = vec![(2, &a * &b), (1, &a * &a)];
        assert!(ode_recursion_defect(&g, 3, &subs).unwrap() < 1e-14);
        let back = integrate_recursion(g.coeff(0), 3, &subs).unwrap();
        assert!((&back - &g).max_abs() < 1e-14);
    }

    #[test]
    fn degree_checks() {
        let g = GenPoly::from_coeffs(vec![0.0, 0.0, 0.0, 1.0]);
        assert!(ode_recursion_defect(&g, 2, &[(2, GenPoly::constant(1.0))]).is_err());
        assert!(integrate_recursion(0.5, 2, &[(1, GenPoly::constant(1.0))]).is_err());
    }

    #[test]
    fn sep_recursion_examples() {
        let g: Poly<BigRational> = sep_size_recursion(3, &vec![1, 2].into()).unwrap();
        assert_eq!(g.coeffs(), &[r(1, 12), r(7, 12), r(1, 3)]);
        let g: GenPoly = sep_size_recursion(3, &vec![2].into()).unwrap();
        assert_eq!(g, g1(3, 2));
        assert!(sep_size_recursion::<f64>(3, &vec![2, 1].into()).is_err());
        assert!(sep_size_recursion::<f64>(3, &vec![4].into()).is_err());
        // three particles satisfy the recursion with their two-particle marginals
        let x = [1usize, 2, 4];
        let g3: Poly<BigRational> = sep_size_recursion(5, &x.to_vec().into()).unwrap();
        let subs: Vec<_> = (0..3)
            .map(|k| (1, sep_size_recursion(5, &CoordinateVector(x.to_vec()).without(k)).unwrap()))
            .collect();
        assert_eq!(recursion_residual(&g3, 3, &subs).max_abs(), r(0, 1));
    }

    #[test]
    fn gee_base_case() {
        let gee = gee_expansion(&vec![1, 2].into(), |_| Ok(1.0 / 24.0)).unwrap();
        let expect = GenPoly::one_minus_z_pow(2).scale(1.0 / 24.0);
        assert!((&gee.genpoly() - &expect).max_abs() < 1e-16);
        let zero = gee_expansion(&vec![1, 2, 3].into(), |_| Ok(0.0)).unwrap();
        assert_eq!(zero.genpoly().degree(), None);
        assert!(gee_expansion(&vec![1].into(), |_| Ok(0.0)).is_err());
    }

    #[test]
    fn binomial_moments_are_rank_deficient() {
        // SEP N = 3, {1, 2}: one moment equation plus normalization
        let q = GenPoly::from_coeffs(vec![1.0 / 12.0, 7.0 / 12.0, 1.0 / 3.0]);
        // P(walker absorbed left) from 1 and 2: 3/4 + 2/4
        let rep = binomial_moment_system(&q, &[1.25]).unwrap();
        assert!(rep.defect < 1e-15);
        assert_eq!((rep.equations, rep.unknowns, rep.rank), (2, 3, 2));
        assert!(rep.underdetermined());
        assert!(binomial_moment_system(&q, &[]).is_err());
    }

    #[test]
    fn factorial_moments_at_time_zero_and_infinity() {
        let m = ChainModel::unit(3, 1.0, 1.0, 1.0).unwrap();
        let spec = m.dual_spec().unwrap();
        let coords: CoordinateVector = vec![1, 2].into();
        for v in 0..5 {
            let xi = Configuration::delta(5, v);
            for h in [Horizon::Time(0.0), Horizon::Time(0.7), Horizon::Infinity] {
                let d = factorial_moment_identity_defect(&spec, &coords, &xi, h, 1e-13).unwrap();
                assert!(d < 1e-10, "{h:?} v={v}: {d}");
            }
        }
        assert!(factorial_moment_identity_defect(&spec, &coords, &Configuration::zero(5), Horizon::Infinity, 1e-12).is_err());
        for h in [Horizon::Time(0.5), Horizon::Infinity] {
            assert!(factorial_moment_identity_max_defect(&spec, 3, 2, h, 1e-13).unwrap() < 1e-10);
        }
    }
}
