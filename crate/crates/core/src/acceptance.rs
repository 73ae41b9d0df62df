//! The acceptance suite: nine numbered criteria, each reduced to a list
//! of named checks against explicit tolerances.
//!
//! Checks record the active tolerance and the default one, so a failure
//! caused only by a tightened override is reported as tolerance-induced.

use std::sync::Arc;
use std::time::Instant;

use itertools::Itertools;
use num_rational::BigRational;
use serde::Serialize;

use crate::config::{phi, Configuration, CoordinateVector};
use crate::duality::{
    d_theta, sip2_two_point_oracle, sip2_two_point_oracle_exact, DualSolver, DualityKernel, IrwOracle,
};
use crate::error::Result;
use crate::exact::rational::rational_absorption_table;
use crate::exact::stationary::default_truncation;
use crate::exact::{
    assemble, commutator_defect, duality_defect, stationary_first_moments, truncated_ness, SparseGenerator,
};
use crate::genfun::{
    factorial_moment_identity_max_defect, gee_expansion, genfun_from_rational, integrate_recursion,
    ode_recursion_defect, sep_size_recursion, GenPoly, Horizon, Poly,
};
use crate::lattice::Lattice;
use crate::operators::annihilation_matrix;
use crate::par::Exec;
use crate::rates::{Bulk, ChainModel, GeneratorSpec, RateFamily, RawRates};
use crate::sector::Sector;
use crate::sim::{consistency_statistical_test, final_state_histogram, SimHorizon, SimPlan};

const THETAS: [f64; 6] = [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
const THETAS4: [f64; 4] = [-1.0, 0.0, 1.0, 2.0];
type BoxedObservable = Box<dyn Fn(&Configuration) -> f64 + Sync>;

/// Solver tolerance used inside the criteria (below every acceptance bound).
const SOLVE_TOL: f64 = 1e-14;

/// Tolerance classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TolKind {
    /// Algebraic identities.
    Exact,
    /// Identities through linear solves and recursions.
    Recursion,
    /// Finite-time semigroup identities.
    Semigroup,
    /// Monte Carlo, in standard errors.
    StdErr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub exact: f64,
    pub recursion: f64,
    pub semigroup: f64,
    pub std_err: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exact: 1e-12, recursion: 1e-10, semigroup: 1e-8, std_err: 4.0 }
    }
}

impl Tolerances {
    /// Same numeric tolerance for every non-statistical class.
    pub fn uniform(tol: f64) -> Self {
        Self { exact: tol, recursion: tol, semigroup: tol, ..Self::default() }
    }

    pub fn get(&self, kind: TolKind) -> f64 {
        match kind {
            TolKind::Exact => self.exact,
            TolKind::Recursion => self.recursion,
            TolKind::Semigroup => self.semigroup,
            TolKind::StdErr => self.std_err,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AcceptanceConfig {
    pub tol: Tolerances,
    pub seed: u64,
    pub replicas: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self { tol: Tolerances::default(), seed: 20_240_917, replicas: 100_000, exec: Exec::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
    pub passed: bool,
    /// Outcome under the default tolerances.
    pub passes_default: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub tags: Vec<String>,
    pub passed: bool,
    pub tolerance_induced: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl CriterionReport {
    /// One-line summary, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{status} criterion {}: {} ({:.2} s)", self.id, self.title, self.seconds);
        if let Some(e) = &self.error {
            s.push_str(&format!(" — error: {e}"));
        }
        for c in self.checks.iter().filter(|c| !c.passed) {
            let op = if c.bound == Bound::AtMost { "≤" } else { "≥" };
            s.push_str(&format!(" — {}: {:.3e} not {op} {:.1e}", c.name, c.value, c.limit));
        }
        if self.tolerance_induced {
            s.push_str(" [tolerance-induced]");
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub tags: &'static [&'static str],
}

pub const CRITERIA: [Criterion; 9] = [
    Criterion { id: 1, title: "commutation with annihilation", tags: &["commutator", "consistency", "rates"] },
    Criterion { id: 2, title: "self-duality", tags: &["duality", "self-duality"] },
    Criterion { id: 3, title: "exclusion closed forms", tags: &["sep", "genfun", "exact"] },
    Criterion { id: 4, title: "SIP(2) two-point absorption", tags: &["sip", "sip2", "duality", "exact"] },
    Criterion { id: 5, title: "independent walkers", tags: &["irw", "duality", "ness"] },
    Criterion { id: 6, title: "generating-function recursions", tags: &["recursion", "genfun", "sep", "sip", "irw"] },
    Criterion { id: 7, title: "factorial-moment identities", tags: &["factorial", "genfun", "semigroup"] },
    Criterion { id: 8, title: "NESS cross-method", tags: &["ness", "sip", "sep", "duality"] },
    Criterion { id: 9, title: "Monte Carlo", tags: &["mc", "sim", "sep", "sip"] },
];

impl Criterion {
    /// `filter` is a comma-separated list of criterion numbers and tags.
    pub fn matches(&self, filter: &str) -> bool {
        filter.split(',').map(str::trim).filter(|t| !t.is_empty()).any(|t| {
            let t = t.to_ascii_lowercase();
            t == self.id.to_string() || self.tags.contains(&t.as_str())
        })
    }
}

struct Recorder<'a> {
    cfg: &'a AcceptanceConfig,
    checks: Vec<Check>,
}

impl Recorder<'_> {
    fn push(&mut self, name: &str, value: f64, bound: Bound, limit: f64, default_limit: f64) {
        let ok = |lim: f64| match bound {
            Bound::AtMost => value <= lim,
            Bound::AtLeast => value >= lim,
        };
        self.checks.push(Check {
            name: name.to_string(),
            value,
            bound,
            limit,
            passed: ok(limit),
            passes_default: ok(default_limit),
        });
    }

    /// `value ≤` the tolerance of class `kind`.
    fn within(&mut self, name: &str, value: f64, kind: TolKind) {
        let (lim, def) = (self.cfg.tol.get(kind), Tolerances::default().get(kind));
        self.push(name, value, Bound::AtMost, lim, def);
    }

    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, Bound::AtMost, limit, limit);
    }

    fn at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, Bound::AtLeast, limit, limit);
    }
}

/// Runs the criteria selected by `filter` (all when `None`).
pub fn run_acceptance(cfg: &AcceptanceConfig, filter: Option<&str>) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .filter(|c| filter.is_none_or(|f| c.matches(f)))
        .map(|c| run_criterion(c.id, cfg))
        .collect()
}

/// Runs one criterion by number.
pub fn run_criterion(id: u8, cfg: &AcceptanceConfig) -> CriterionReport {
    let crit = CRITERIA.iter().find(|c| c.id == id).expect("criterion id in 1..=9");
    let mut rec = Recorder { cfg, checks: Vec::new() };
    let start = Instant::now();
    let outcome = match id {
        1 => commutator(&mut rec, start),
        2 => self_duality(&mut rec, start),
        3 => sep_closed_forms(&mut rec, start),
        4 => sip2_two_point(&mut rec),
        5 => independent_walkers(&mut rec),
        6 => recursions(&mut rec),
        7 => factorial_moments(&mut rec),
        8 => ness_cross_method(&mut rec),
        9 => monte_carlo(&mut rec, start),
        _ => unreachable!(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let error = outcome.err().map(|e| e.to_string());
    let passed = error.is_none() && rec.checks.iter().all(|c| c.passed);
    let tolerance_induced = !passed && error.is_none() && rec.checks.iter().all(|c| c.passes_default);
    CriterionReport {
        id,
        title: crit.title.to_string(),
        tags: crit.tags.iter().map(|t| t.to_string()).collect(),
        passed,
        tolerance_induced,
        seconds,
        checks: rec.checks,
        error,
    }
}

fn chain(n: usize) -> Result<Arc<Lattice>> {
    Ok(Arc::new(Lattice::chain(n)?))
}

fn sector(spec: &GeneratorSpec, n: u32) -> Result<Arc<Sector>> {
    Ok(Arc::new(Sector::enumerate(spec.lattice().clone(), n, spec.cap())?))
}

/// Whether `n` particles fit on the bulk of `spec` (absorbing sites take any number).
fn fits(spec: &GeneratorSpec, n: u32) -> bool {
    let l = spec.lattice();
    l.n_sites() > l.n_bulk() || spec.cap().is_none_or(|c| n <= c * l.n_bulk() as u32)
}

fn commutator_at(spec: &GeneratorSpec, n: u32) -> Result<f64> {
    let (sn, sm) = (sector(spec, n)?, sector(spec, n - 1)?);
    let a = annihilation_matrix(&sn, &sm)?;
    commutator_defect(&assemble(spec, sn)?, &assemble(spec, sm)?, &a)
}

fn commutator(rec: &mut Recorder<'_>, start: Instant) -> Result<()> {
    let mut worst = [0.0f64; 4];
    for theta in THETAS {
        for n_sites in 1..=4 {
            let l = chain(n_sites)?;
            let complete = Arc::new(Lattice::complete(n_sites, |i, j| 1.0 + 0.5 * (i + j) as f64)?);
            let specs = [
                GeneratorSpec::closed(RateFamily::canonical(l.clone(), theta)?),
                GeneratorSpec::closed(RateFamily::canonical(complete, theta)?),
                ChainModel::unit(n_sites, theta, 0.0, 0.0)?.dual_spec()?,
                GeneratorSpec::thermalized_generator(RateFamily::canonical(l, theta)?)?,
            ];
            for (k, spec) in specs.iter().enumerate() {
                for n in 1..=3 {
                    if fits(spec, n) {
                        worst[k] = worst[k].max(commutator_at(spec, n)?);
                    }
                }
            }
        }
    }
    rec.within("closed chain defect", worst[0], TolKind::Exact);
    rec.within("closed complete-graph defect", worst[1], TolKind::Exact);
    rec.within("absorbing extension defect", worst[2], TolKind::Exact);
    rec.within("thermalized defect", worst[3], TolKind::Exact);
    let raw = RawRates::new("κ²m", None, |_, _, k, m| (k * k * m) as f64);
    let bad = GeneratorSpec::new(chain(3)?, Bulk::Raw(raw), vec![], vec![], 0.0)?;
    let d = (2..=3).map(|n| commutator_at(&bad, n)).collect::<Result<Vec<_>>>()?;
    rec.at_least("κ²m perturbation defect", d.into_iter().fold(0.0, f64::max), 1e-2);
    rec.at_most("runtime (s)", start.elapsed().as_secs_f64(), 10.0);
    Ok(())
}

fn self_duality(rec: &mut Recorder<'_>, start: Instant) -> Result<()> {
    let mut worst = 0.0f64;
    for theta in THETAS {
        for n_sites in 1..=4 {
            let kernel = DualityKernel::SelfDual { theta };
            let lattices = [chain(n_sites)?, Arc::new(Lattice::complete(n_sites, |i, j| 1.0 + 0.5 * (i + j) as f64)?)];
            for l in lattices {
                let spec = GeneratorSpec::closed(RateFamily::canonical(l, theta)?);
                for (m, n) in [(1, 2), (1, 3), (2, 3)] {
                    if !fits(&spec, n) {
                        continue;
                    }
                    let (sm, sn) = (sector(&spec, m)?, sector(&spec, n)?);
                    let d = kernel.matrix(&sm, &sn)?;
                    worst = worst.max(duality_defect(&assemble(&spec, sm)?, &assemble(&spec, sn)?, &d)?);
                }
            }
        }
    }
    rec.within("max duality defect", worst, TolKind::Exact);
    rec.at_most("runtime (s)", start.elapsed().as_secs_f64(), 10.0);
    Ok(())
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn sep_closed_forms(rec: &mut Recorder<'_>, start: Instant) -> Result<()> {
    let (mut mismatches, mut worst, mut instances) = (0usize, 0.0f64, 0usize);
    let mut special = false;
    for n_sites in 1..=5 {
        let model = ChainModel::unit(n_sites, -1.0, 0.0, 0.0)?;
        let solver = DualSolver::new(model, SOLVE_TOL)?;
        let spec = solver.dual_spec();
        for m in 1..=n_sites.min(3) {
            let table = rational_absorption_table(spec, sector(spec, m as u32)?)?;
            for coords in (1..=n_sites).combinations(m) {
                let coords = CoordinateVector(coords);
                let xi = phi(solver.lattice(), &coords)?;
                let exact = genfun_from_rational(&table.distribution(&xi)?, m as u32, solver.lattice())?;
                let rec_exact: Poly<BigRational> = sep_size_recursion(n_sites, &coords)?;
                mismatches += usize::from(exact != rec_exact);
                let rec_float: GenPoly = sep_size_recursion(n_sites, &coords)?;
                worst = worst.max((&solver.genpoly(&xi)? - &rec_float).max_abs());
                instances += 1;
                if n_sites == 3 && coords.0 == [1, 2] {
                    special = exact.coeffs() == [rational(1, 12), rational(7, 12), rational(1, 3)];
                }
            }
        }
    }
    rec.at_most("exact-rational mismatches", mismatches as f64, 0.0);
    rec.within("float solver vs recursion", worst, TolKind::Recursion);
    rec.at_least("N=3 {1,2} equals (1/12, 7/12, 1/3)", f64::from(u8::from(special)), 1.0);
    rec.at_least("instances", instances as f64, 50.0);
    rec.at_most("runtime (s)", start.elapsed().as_secs_f64(), 30.0);
    Ok(())
}

fn sip2_two_point(rec: &mut Recorder<'_>) -> Result<()> {
    let (mut worst, mut identity, mut mismatches) = (0.0f64, 0.0f64, 0usize);
    for n_sites in 2..=6 {
        let solver = DualSolver::new(ChainModel::unit(n_sites, 2.0, 1.0, 1.0)?, SOLVE_TOL)?;
        let table = rational_absorption_table(solver.dual_spec(), sector(solver.dual_spec(), 2)?)?;
        for (x, y) in (1..=n_sites).tuple_combinations() {
            let g = solver.genpoly_coords(&vec![x, y].into())?;
            let q = sip2_two_point_oracle(n_sites, x, y)?;
            worst = worst.max((0..3).map(|k| (g.coeff(k) - q[k]).abs()).fold(0.0, f64::max));
            let target = (x + y) as f64 / (n_sites + 1) as f64;
            identity = identity.max((2.0 * g.coeff(0) + g.coeff(1) - target).abs());
            let xi = phi(solver.lattice(), &vec![x, y].into())?;
            let exact = genfun_from_rational(&table.distribution(&xi)?, 2, solver.lattice())?;
            mismatches += usize::from(exact.coeffs() != sip2_two_point_oracle_exact(n_sites, x, y)?);
        }
    }
    rec.within("solver vs closed form", worst, TolKind::Recursion);
    rec.within("2q0 + q1 − (x+y)/(N+1)", identity, TolKind::Exact);
    rec.at_most("exact-rational mismatches", mismatches as f64, 0.0);
    Ok(())
}

/// Configurations of `1..=max_n` particles on the bulk of `solver`'s dual lattice.
fn bulk_configurations(solver: &DualSolver, max_n: u32) -> Result<Vec<Configuration>> {
    let spec = solver.dual_spec();
    let mut out = Vec::new();
    for n in 1..=max_n {
        if !fits(spec, n) {
            continue;
        }
        let s = sector(spec, n)?;
        out.extend(
            s.states()
                .iter()
                .filter(|c| c.support().all(|x| !spec.lattice().is_absorbing(x)))
                .cloned(),
        );
    }
    Ok(out)
}

fn independent_walkers(rec: &mut Recorder<'_>) -> Result<()> {
    let (mut q_plus, mut product, mut means, mut means_trunc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n_sites in 1..=6 {
        let solver = DualSolver::new(ChainModel::unit(n_sites, 0.0, 1.0, 5.0)?, SOLVE_TOL)?;
        let oracle = IrwOracle { n: n_sites };
        for x in 1..=n_sites {
            let g = solver.genpoly(&Configuration::delta(n_sites + 2, x))?;
            q_plus = q_plus.max((g.coeff(0) - oracle.q_plus(x)).abs());
        }
        for xi in bulk_configurations(&solver, 3)? {
            product = product.max((&solver.genpoly(&xi)? - &oracle.product_genfun(&xi)?).max_abs());
        }
        for (rl, rr) in [(1.0, 5.0), (2.0, 0.5)] {
            let m = stationary_first_moments(&ChainModel::unit(n_sites, 0.0, rl, rr)?.reservoir_spec()?)?;
            for (i, v) in m.iter().enumerate() {
                means = means.max((v - oracle.ness_mean(i + 1, rl, rr)).abs());
            }
        }
        if n_sites <= 2 {
            let spec = ChainModel::unit(n_sites, 0.0, 1.0, 2.0)?.reservoir_spec()?;
            let obs: Vec<BoxedObservable> =
                (0..n_sites).map(|x| Box::new(move |c: &Configuration| c.occupation(x) as f64) as _).collect();
            let refs: Vec<&(dyn Fn(&Configuration) -> f64 + Sync)> = obs.iter().map(|b| b.as_ref()).collect();
            let t = truncated_ness(&spec, default_truncation(&spec), &refs, SOLVE_TOL)?;
            for (i, v) in t.fine.iter().enumerate() {
                means_trunc = means_trunc.max((v - oracle.ness_mean(i + 1, 1.0, 2.0)).abs());
            }
        }
    }
    rec.within("q⁺_x − x/(N+1)", q_plus, TolKind::Exact);
    rec.within("G vs product form", product, TolKind::Recursion);
    rec.within("NESS means (moment closure) vs linear profile", means, TolKind::Recursion);
    rec.within("NESS means (stationary solve, N ≤ 2) vs linear profile", means_trunc, TolKind::Recursion);
    Ok(())
}

/// Recursion, integration and difference-expansion defects over every
/// bulk configuration of up to `max_n` particles.
fn recursion_defects(solver: &DualSolver, max_n: u32) -> Result<[f64; 3]> {
    let mut worst = [0.0f64; 3];
    for xi in bulk_configurations(solver, max_n)? {
        let n = xi.total();
        let g = solver.genpoly(&xi)?;
        let subs = xi
            .support()
            .map(|x| {
                let sub = xi.removed(x).expect("occupied");
                let gs = if sub.total() == 0 { GenPoly::constant(1.0) } else { solver.genpoly(&sub)? };
                Ok((xi.occupation(x), gs))
            })
            .collect::<Result<Vec<_>>>()?;
        worst[0] = worst[0].max(ode_recursion_defect(&g, n, &subs)?);
        worst[1] = worst[1].max((&integrate_recursion(g.coeff(0), n, &subs)? - &g).max_abs());
        if n >= 2 {
            let gee = gee_expansion(&xi.to_coords(), |y| solver.difference_at_zero(y))?;
            let direct = &g - &solver.irw_genpoly(&xi)?;
            worst[2] = worst[2].max((&gee.genpoly() - &direct).max_abs());
        }
    }
    Ok(worst)
}

fn recursions(rec: &mut Recorder<'_>) -> Result<()> {
    // (θ, largest N, largest n)
    let families = [(-1.0, 5, 3), (2.0, 6, 3), (0.0, 6, 3), (1.0, 4, 3)];
    let mut worst = [0.0f64; 3];
    for (theta, max_sites, max_n) in families {
        for n_sites in 1..=max_sites {
            let solver = DualSolver::new(ChainModel::unit(n_sites, theta, 0.0, 0.0)?, SOLVE_TOL)?;
            let w = recursion_defects(&solver, max_n)?;
            for k in 0..3 {
                worst[k] = worst[k].max(w[k]);
            }
        }
    }
    rec.within("recursion defect", worst[0], TolKind::Recursion);
    rec.within("integrated recursion vs solver", worst[1], TolKind::Recursion);
    rec.within("difference expansion vs G − G^irw", worst[2], TolKind::Recursion);
    Ok(())
}

fn factorial_moments(rec: &mut Recorder<'_>) -> Result<()> {
    let (mut finite, mut infinite) = (0.0f64, 0.0f64);
    for theta in THETAS4 {
        for n_sites in 1..=4 {
            let absorbing = ChainModel::unit(n_sites, theta, 0.0, 0.0)?.dual_spec()?;
            let closed = GeneratorSpec::closed(RateFamily::canonical(chain(n_sites)?, theta)?);
            for (n, m) in [(2, 1), (3, 1), (3, 2)] {
                for spec in [&absorbing, &closed] {
                    if !fits(spec, n) {
                        continue;
                    }
                    for t in [0.5, 2.0] {
                        finite = finite.max(factorial_moment_identity_max_defect(spec, n, m, Horizon::Time(t), SOLVE_TOL)?);
                    }
                }
                infinite = infinite.max(factorial_moment_identity_max_defect(
                    &absorbing,
                    n,
                    m,
                    Horizon::Infinity,
                    SOLVE_TOL,
                )?);
            }
        }
    }
    rec.within("finite-t defect (t = 0.5, 2)", finite, TolKind::Semigroup);
    rec.within("t = ∞ defect", infinite, TolKind::Recursion);
    Ok(())
}

fn ness_cross_method(rec: &mut Recorder<'_>) -> Result<()> {
    let model = ChainModel::unit(3, 1.0, 1.0, 3.0)?;
    let solver = DualSolver::new(model, SOLVE_TOL)?;
    let spec = model.reservoir_spec()?;
    let xis: Vec<Configuration> = bulk_configurations(&solver, 2)?;
    let obs: Vec<BoxedObservable> = xis
        .iter()
        .map(|xi| {
            let xi = xi.clone();
            Box::new(move |eta: &Configuration| {
                (0..3).map(|x| d_theta(1.0, xi.occupation(x + 1), eta.occupation(x))).product::<f64>()
            }) as _
        })
        .collect();
    let refs: Vec<&(dyn Fn(&Configuration) -> f64 + Sync)> = obs.iter().map(|b| b.as_ref()).collect();
    let trunc = truncated_ness(&spec, default_truncation(&spec), &refs, 1e-13)?;
    let mut excess = f64::NEG_INFINITY;
    for (i, xi) in xis.iter().enumerate() {
        let dual = solver.ness_expectation(xi)?;
        excess = excess.max((dual - trunc.fine[i]).abs() - trunc.certificate[i]);
    }
    rec.within("max(|dual − truncated| − certificate)", excess, TolKind::Semigroup);

    let (mut sep_max, mut sip_min) = (f64::NEG_INFINITY, f64::INFINITY);
    for n_sites in 2..=6 {
        for (theta, rl, rr) in [(-1.0, 0.2, 0.9), (-1.0, 0.9, 0.1), (1.0, 1.0, 3.0), (2.0, 2.0, 0.5)] {
            let solver = DualSolver::new(ChainModel::unit(n_sites, theta, rl, rr)?, SOLVE_TOL)?;
            for (x, y) in (1..=n_sites).tuple_combinations() {
                let c = solver.covariance(x, y)?;
                if theta < 0.0 {
                    sep_max = sep_max.max(c);
                } else {
                    sip_min = sip_min.min(c);
                }
            }
        }
    }
    rec.within("largest exclusion covariance", sep_max, TolKind::Exact);
    rec.within("largest negative inclusion covariance", -sip_min, TolKind::Exact);
    Ok(())
}

fn absorption_z_scores(rec_cfg: &AcceptanceConfig, spec: &GeneratorSpec, xi: &Configuration, q: &GenPoly, seed: u64) -> Result<f64> {
    let plan = SimPlan::new(seed, rec_cfg.replicas, SimHorizon::Absorption).with_exec(rec_cfg.exec);
    let (hist, _) = final_state_histogram(spec, xi, &plan)?;
    let r = rec_cfg.replicas as f64;
    let mut counts = vec![0u64; q.len()];
    for (zeta, c) in hist {
        counts[zeta.occupation(0) as usize] += c;
    }
    let mut worst = 0.0f64;
    for (k, &c) in counts.iter().enumerate() {
        let (p, f) = (q.coeff(k).clamp(0.0, 1.0), c as f64 / r);
        let se = (p * (1.0 - p) / r).sqrt();
        let z = if se > 0.0 { (f - p).abs() / se } else if f == p { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    Ok(worst)
}

/// The inconsistent witness: rates `κ²m` on a 3-site chain, start `(2, 1, 0)`, `t = 1`.
pub fn inconsistent_witness() -> Result<(GeneratorSpec, CoordinateVector, f64)> {
    let raw = RawRates::new("κ²m", None, |_, _, k, m| (k * k * m) as f64);
    Ok((GeneratorSpec::new(chain(3)?, Bulk::Raw(raw), vec![], vec![], 0.0)?, vec![0, 0, 1].into(), 1.0))
}

fn monte_carlo(rec: &mut Recorder<'_>, start: Instant) -> Result<()> {
    let cfg = *rec.cfg;
    let mut worst = 0.0f64;
    let mut instance = 0u64;
    for n_sites in 1..=5 {
        let solver = DualSolver::new(ChainModel::unit(n_sites, -1.0, 0.0, 0.0)?, SOLVE_TOL)?;
        for m in 1..=n_sites.min(3) {
            for coords in (1..=n_sites).combinations(m) {
                let xi = phi(solver.lattice(), &CoordinateVector(coords))?;
                let q = solver.genpoly(&xi)?;
                instance += 1;
                worst = worst.max(absorption_z_scores(&cfg, solver.dual_spec(), &xi, &q, cfg.seed.wrapping_add(instance))?);
            }
        }
    }
    for n_sites in 2..=6 {
        let solver = DualSolver::new(ChainModel::unit(n_sites, 2.0, 1.0, 1.0)?, SOLVE_TOL)?;
        for (x, y) in (1..=n_sites).tuple_combinations() {
            let xi = phi(solver.lattice(), &vec![x, y].into())?;
            let q = solver.genpoly(&xi)?;
            instance += 1;
            worst = worst.max(absorption_z_scores(&cfg, solver.dual_spec(), &xi, &q, cfg.seed.wrapping_add(instance))?);
        }
    }
    rec.within("max |MC − exact| / SE over absorption histograms", worst, TolKind::StdErr);
    rec.at_least("histogram instances", instance as f64, 85.0);

    let plan = |t: f64| SimPlan::new(cfg.seed, cfg.replicas, SimHorizon::Time(t)).with_exec(cfg.exec);
    let consistent = [
        (GeneratorSpec::closed(RateFamily::canonical(chain(3)?, 1.0)?), CoordinateVector(vec![0, 1])),
        (GeneratorSpec::closed(RateFamily::canonical(chain(3)?, 0.0)?), CoordinateVector(vec![0, 0, 2])),
        (GeneratorSpec::closed(RateFamily::canonical(chain(4)?, -1.0)?), CoordinateVector(vec![0, 1, 3])),
    ];
    let mut p_min = 1.0f64;
    for (spec, coords) in &consistent {
        p_min = p_min.min(consistency_statistical_test(spec, coords, 1.0, &plan(1.0))?.test.p_value);
    }
    rec.at_least("smallest p-value, consistent models", p_min, 0.01);
    let (spec, coords, t) = inconsistent_witness()?;
    let p = consistency_statistical_test(&spec, &coords, t, &plan(t))?.test.p_value;
    rec.at_most("p-value, κ²m witness", p, 1e-6);
    rec.at_most("runtime (s)", start.elapsed().as_secs_f64(), 300.0);
    Ok(())
}

/// Convenience for callers that want the raw solver used by the criteria.
pub fn chain_generator(spec: &GeneratorSpec, n: u32) -> Result<SparseGenerator> {
    assemble(spec, sector(spec, n)?)
}
