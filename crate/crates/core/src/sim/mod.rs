//! Gillespie simulation of configuration and labelled-particle processes.
//!
//! Replica `r` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` on stream `r`, so every replica is
//! reproducible on its own and results do not depend on scheduling.

pub mod stats;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{phi, Configuration, CoordinateVector};
use crate::error::{Error, Result};
use crate::par::{map_range, Exec};
use crate::rates::{Bulk, GeneratorSpec, Move};

pub use stats::{chi_square_two_sample, ChiSquare, Estimate};

/// Events per replica before a run is declared runaway.
pub const WATCHDOG_EVENTS: u64 = 100_000_000;

/// Replicas handled per work item.
const CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SimHorizon {
    Time(f64),
    Absorption,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimPlan {
    pub seed: u64,
    pub replicas: usize,
    pub horizon: SimHorizon,
    /// Start of the averaging window (NESS runs).
    pub burn_in: f64,
    /// Batch length for batch-means errors (NESS runs); `0` means one
    /// batch per replica.
    pub thinning: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl SimPlan {
    pub fn new(seed: u64, replicas: usize, horizon: SimHorizon) -> Self {
        Self { seed, replicas, horizon, burn_in: 0.0, thinning: 0.0, exec: Exec::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Input("at least one replica is required".into()));
        }
        if let SimHorizon::Time(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) && t != 0.0 {
                return Err(Error::Input(format!("horizon {t} must be finite and nonnegative")));
            }
        }
        if !(self.burn_in >= 0.0 && self.thinning >= 0.0) {
            return Err(Error::Input("burn-in and thinning must be nonnegative".into()));
        }
        Ok(())
    }

    fn chunks(&self) -> usize {
        self.replicas.div_ceil(CHUNK)
    }

    fn chunk_range(&self, c: usize) -> std::ops::Range<usize> {
        c * CHUNK..((c + 1) * CHUNK).min(self.replicas)
    }
}

/// Random stream of one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub final_state: Configuration,
    pub time: f64,
    pub events: u64,
    /// No move was possible before the horizon (and, for absorption runs,
    /// the state was not absorbed).
    pub frozen: bool,
}

fn exp_time(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, moves: &[(T, f64)], total: f64) -> T {
    let mut u = rng.random::<f64>() * total;
    for &(m, r) in moves {
        if u < r {
            return m;
        }
        u -= r;
    }
    moves.last().expect("nonempty").0
}

/// Runs one configuration trajectory; `on_hold(η, dt)` sees every holding
/// interval in order.
fn run_configuration(
    spec: &GeneratorSpec,
    eta0: &Configuration,
    horizon: SimHorizon,
    rng: &mut ChaCha8Rng,
    buf: &mut Vec<(Move, f64)>,
    mut on_hold: impl FnMut(&Configuration, f64),
) -> Result<TrajectorySummary> {
    let lattice = spec.lattice();
    let mut eta = eta0.clone();
    let (mut time, mut events, mut frozen) = (0.0, 0u64, false);
    loop {
        if horizon == SimHorizon::Absorption && eta.is_absorbed(lattice) {
            break;
        }
        buf.clear();
        spec.for_each_move(eta.as_slice(), |m, r| buf.push((m, r)));
        let total: f64 = buf.iter().map(|(_, r)| r).sum();
        if total <= 0.0 {
            frozen = true;
            if let SimHorizon::Time(t) = horizon {
                on_hold(&eta, t - time);
                time = t;
            }
            break;
        }
        let dt = exp_time(rng, total);
        if let SimHorizon::Time(t) = horizon {
            if time + dt >= t {
                on_hold(&eta, t - time);
                time = t;
                break;
            }
        }
        on_hold(&eta, dt);
        time += dt;
        pick(rng, buf, total).apply(eta.as_mut_slice());
        events += 1;
        if events >= WATCHDOG_EVENTS {
            return Err(Error::NonConvergence(format!("replica exceeded {WATCHDOG_EVENTS} events")));
        }
    }
    Ok(TrajectorySummary { final_state: eta, time, events, frozen })
}

fn check_start(spec: &GeneratorSpec, eta0: &Configuration) -> Result<()> {
    if eta0.n_sites() != spec.lattice().n_sites() {
        return Err(Error::LatticeMismatch(format!(
            "start has {} sites, lattice {}",
            eta0.n_sites(),
            spec.lattice().n_sites()
        )));
    }
    if let Some(cap) = spec.cap() {
        if spec.lattice().bulk_sites().any(|x| eta0.occupation(x) > cap) {
            return Err(Error::Input(format!("start {eta0} exceeds the cap {cap}")));
        }
    }
    Ok(())
}

/// Independent replicas of the configuration process from `eta0`.
pub fn gillespie_configuration(
    spec: &GeneratorSpec,
    eta0: &Configuration,
    plan: &SimPlan,
) -> Result<Vec<TrajectorySummary>> {
    plan.validate()?;
    check_start(spec, eta0)?;
    let chunks = map_range(plan.exec, plan.chunks(), |c| {
        let mut buf = Vec::new();
        plan.chunk_range(c)
            .map(|r| run_configuration(spec, eta0, plan.horizon, &mut replica_rng(plan.seed, r as u64), &mut buf, |_, _| {}))
            .collect::<Result<Vec<_>>>()
    });
    Ok(chunks.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Histogram of final states over all replicas, and the number of frozen runs.
pub fn final_state_histogram(
    spec: &GeneratorSpec,
    eta0: &Configuration,
    plan: &SimPlan,
) -> Result<(BTreeMap<Configuration, u64>, u64)> {
    plan.validate()?;
    check_start(spec, eta0)?;
    let parts = map_range(plan.exec, plan.chunks(), |c| -> Result<(BTreeMap<Configuration, u64>, u64)> {
        let mut buf = Vec::new();
        let (mut hist, mut frozen) = (BTreeMap::new(), 0);
        for r in plan.chunk_range(c) {
            let mut rng = replica_rng(plan.seed, r as u64);
            let s = run_configuration(spec, eta0, plan.horizon, &mut rng, &mut buf, |_, _| {})?;
            frozen += u64::from(s.frozen);
            *hist.entry(s.final_state).or_insert(0) += 1;
        }
        Ok((hist, frozen))
    });
    merge_histograms(parts)
}

fn merge_histograms<K: Ord>(parts: Vec<Result<(BTreeMap<K, u64>, u64)>>) -> Result<(BTreeMap<K, u64>, u64)> {
    let mut out = BTreeMap::new();
    let mut frozen = 0;
    for p in parts {
        let (h, f) = p?;
        frozen += f;
        for (k, v) in h {
            *out.entry(k).or_insert(0) += v;
        }
    }
    Ok((out, frozen))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabeledSummary {
    pub final_coords: CoordinateVector,
    pub time: f64,
    pub events: u64,
    pub frozen: bool,
}

/// Labelled particles: a particle at `i` crosses edge `{i,j}` at rate
/// `θ({i,j})·η_j + α(i,j)` and is absorbed at the absorption rate. Needs
/// a consistent rate family and no reservoirs.
pub fn gillespie_coordinate(
    spec: &GeneratorSpec,
    coords0: &CoordinateVector,
    plan: &SimPlan,
) -> Result<Vec<LabeledSummary>> {
    plan.validate()?;
    let Bulk::Family(fam) = spec.bulk() else {
        return Err(Error::Input("labelled simulation needs a consistent rate family".into()));
    };
    if !spec.reservoirs().is_empty() {
        return Err(Error::Input("labelled simulation does not support reservoirs".into()));
    }
    let lattice = spec.lattice();
    let eta0 = phi(lattice, coords0)?;
    check_start(spec, &eta0)?;
    // incident edges per site
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); lattice.n_sites()];
    for (k, e) in fam.edges().iter().enumerate() {
        adj[e.i].push((k, e.j));
        adj[e.j].push((k, e.i));
    }
    let mut absorb: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lattice.n_sites()];
    for a in spec.absorption() {
        absorb[a.from].push((a.to, a.rate));
    }
    let run = |r: usize, buf: &mut Vec<((usize, usize), f64)>| -> Result<LabeledSummary> {
        let mut rng = replica_rng(plan.seed, r as u64);
        let mut x = coords0.0.clone();
        let mut eta = eta0.clone();
        let (mut time, mut events, mut frozen) = (0.0, 0u64, false);
        loop {
            if plan.horizon == SimHorizon::Absorption && eta.is_absorbed(lattice) {
                break;
            }
            buf.clear();
            for (p, &site) in x.iter().enumerate() {
                for &(k, to) in &adj[site] {
                    let rate = fam.edges()[k].per_particle(site, eta.occupation(to));
                    if rate > 0.0 {
                        buf.push(((p, to), rate));
                    }
                }
                for &(to, rate) in &absorb[site] {
                    if rate > 0.0 {
                        buf.push(((p, to), rate));
                    }
                }
            }
            let total: f64 = buf.iter().map(|(_, r)| r).sum();
            if total <= 0.0 {
                frozen = true;
                if let SimHorizon::Time(t) = plan.horizon {
                    time = t;
                }
                break;
            }
            let dt = exp_time(&mut rng, total);
            if let SimHorizon::Time(t) = plan.horizon {
                if time + dt >= t {
                    time = t;
                    break;
                }
            }
            time += dt;
            let (p, to) = pick(&mut rng, buf, total);
            eta.as_mut_slice()[x[p]] -= 1;
            eta.as_mut_slice()[to] += 1;
            x[p] = to;
            events += 1;
            if events >= WATCHDOG_EVENTS {
                return Err(Error::NonConvergence(format!("replica exceeded {WATCHDOG_EVENTS} events")));
            }
        }
        Ok(LabeledSummary { final_coords: CoordinateVector(x), time, events, frozen })
    };
    let chunks = map_range(plan.exec, plan.chunks(), |c| {
        let mut buf = Vec::new();
        plan.chunk_range(c).map(|r| run(r, &mut buf)).collect::<Result<Vec<_>>>()
    });
    Ok(chunks.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Removes one particle chosen uniformly among the `|η|` particles.
fn remove_uniform(eta: &mut Configuration, rng: &mut ChaCha8Rng) {
    let mut k = rng.random_range(0..eta.total());
    for v in eta.as_mut_slice() {
        if k < *v {
            *v -= 1;
            return;
        }
        k -= *v;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub t: f64,
    pub seed: u64,
    pub replicas: usize,
    pub test: ChiSquare,
}

/// Compares `η(t)` of `n` particles with one uniformly chosen particle
/// removed afterwards, against `n − 1` particles started from `φ(x)` with
/// one uniformly chosen particle removed. Consistency makes the two laws
/// equal.
///
/// Replica `r` uses stream `2r` for the `n`-particle run and `2r + 1` for
/// the `(n−1)`-particle run.
pub fn consistency_statistical_test(
    spec: &GeneratorSpec,
    coords0: &CoordinateVector,
    t: f64,
    plan: &SimPlan,
) -> Result<ConsistencyReport> {
    plan.validate()?;
    if coords0.len() < 2 {
        return Err(Error::Input("consistency test needs at least two particles".into()));
    }
    if !spec.conserves_particles() {
        return Err(Error::Input("consistency test needs a particle-conserving generator".into()));
    }
    let start = phi(spec.lattice(), coords0)?;
    check_start(spec, &start)?;
    let horizon = SimHorizon::Time(t);
    type Pair = (BTreeMap<Configuration, u64>, BTreeMap<Configuration, u64>);
    let parts = map_range(plan.exec, plan.chunks(), |c| -> Result<Pair> {
        let mut buf = Vec::new();
        let (mut full, mut reduced) = (BTreeMap::new(), BTreeMap::new());
        for r in plan.chunk_range(c) {
            let mut rng = replica_rng(plan.seed, 2 * r as u64);
            let mut end = run_configuration(spec, &start, horizon, &mut rng, &mut buf, |_, _| {})?.final_state;
            remove_uniform(&mut end, &mut rng);
            *full.entry(end).or_insert(0) += 1;

            let mut rng = replica_rng(plan.seed, 2 * r as u64 + 1);
            let mut from = start.clone();
            remove_uniform(&mut from, &mut rng);
            let end = run_configuration(spec, &from, horizon, &mut rng, &mut buf, |_, _| {})?.final_state;
            *reduced.entry(end).or_insert(0) += 1;
        }
        Ok((full, reduced))
    });
    let (mut full, mut reduced) = (BTreeMap::new(), BTreeMap::new());
    for p in parts {
        let (a, b) = p?;
        for (k, v) in a {
            *full.entry(k).or_insert(0) += v;
        }
        for (k, v) in b {
            *reduced.entry(k).or_insert(0) += v;
        }
    }
    Ok(ConsistencyReport {
        n: coords0.len(),
        t,
        seed: plan.seed,
        replicas: plan.replicas,
        test: chi_square_two_sample(&full, &reduced),
    })
}

pub type Observable<'a> = &'a (dyn Fn(&Configuration) -> f64 + Sync);

/// Time averages of `observables` over `[burn_in, T]` for a reservoir
/// system, with batch-means standard errors.
///
/// Each replica's window is cut into batches of length `plan.thinning`
/// (the whole window when `0`); the estimate is the mean over all batches
/// of all replicas.
pub fn ness_time_average(
    spec: &GeneratorSpec,
    eta0: &Configuration,
    observables: &[Observable<'_>],
    plan: &SimPlan,
) -> Result<Vec<Estimate>> {
    Ok(batch_means(spec, eta0, observables, plan)?.iter().map(|b| Estimate::from_samples(b)).collect())
}

/// Per-batch time averages, one vector per observable.
pub fn batch_means(
    spec: &GeneratorSpec,
    eta0: &Configuration,
    observables: &[Observable<'_>],
    plan: &SimPlan,
) -> Result<Vec<Vec<f64>>> {
    plan.validate()?;
    check_start(spec, eta0)?;
    let SimHorizon::Time(horizon) = plan.horizon else {
        return Err(Error::Input("time averages need a finite horizon".into()));
    };
    if plan.burn_in >= horizon {
        return Err(Error::Input(format!("burn-in {} is not below the horizon {horizon}", plan.burn_in)));
    }
    let window = horizon - plan.burn_in;
    let batch = if plan.thinning > 0.0 { plan.thinning.min(window) } else { window };
    let n_batches = (window / batch).floor().max(1.0) as usize;
    let k = observables.len();
    let parts = map_range(plan.exec, plan.chunks(), |c| -> Result<Vec<Vec<f64>>> {
        let mut buf = Vec::new();
        let mut out = vec![Vec::new(); k];
        for r in plan.chunk_range(c) {
            let mut rng = replica_rng(plan.seed, r as u64);
            let mut acc = vec![vec![0.0; k]; n_batches];
            let mut clock = 0.0f64;
            run_configuration(spec, eta0, plan.horizon, &mut rng, &mut buf, |eta, dt| {
                // split [clock, clock + dt] over the batches it overlaps
                let (mut a, end) = (clock.max(plan.burn_in), clock + dt);
                clock = end;
                while a < end {
                    let b = (((a - plan.burn_in) / batch).floor() as usize).min(n_batches - 1);
                    let stop = if b + 1 == n_batches { end } else { end.min(plan.burn_in + (b + 1) as f64 * batch) };
                    let w = stop - a;
                    if w > 0.0 {
                        for (o, f) in observables.iter().enumerate() {
                            acc[b][o] += w * f(eta);
                        }
                    }
                    a = stop.max(a + f64::EPSILON * a.abs().max(1.0));
                }
            })?;
            for (b, row) in acc.iter().enumerate() {
                let len = if b + 1 == n_batches { window - b as f64 * batch } else { batch };
                for o in 0..k {
                    out[o].push(row[o] / len);
                }
            }
        }
        Ok(out)
    });
    let mut all = vec![Vec::new(); k];
    for p in parts {
        for (o, v) in p?.into_iter().enumerate() {
            all[o].extend(v);
        }
    }
    Ok(all)
}

/// `Cov(η_x, η_y)` from time averages, with a delta-method standard error.
pub fn covariance_estimate(spec: &GeneratorSpec, eta0: &Configuration, x: usize, y: usize, plan: &SimPlan) -> Result<Estimate> {
    spec.lattice().check_site(x)?;
    spec.lattice().check_site(y)?;
    let fx = move |c: &Configuration| c.occupation(x) as f64;
    let fy = move |c: &Configuration| c.occupation(y) as f64;
    let fxy = move |c: &Configuration| (c.occupation(x) * c.occupation(y)) as f64;
    let b = batch_means(spec, eta0, &[&fx, &fy, &fxy], plan)?;
    let (mx, my, mxy) = (mean(&b[0]), mean(&b[1]), mean(&b[2]));
    let z: Vec<f64> = (0..b[0].len()).map(|i| b[2][i] - my * b[0][i] - mx * b[1][i]).collect();
    Ok(Estimate { mean: mxy - mx * my, se: Estimate::from_samples(&z).se })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::lattice::Lattice;
    use crate::rates::{ChainModel, RateFamily};

    fn sip2() -> GeneratorSpec {
        ChainModel::unit(3, 2.0, 1.0, 1.0).unwrap().dual_spec().unwrap()
    }

    #[test]
    fn same_seed_same_trajectories() {
        let plan = SimPlan::new(7, 20, SimHorizon::Absorption);
        let eta0 = Configuration::from_occupations(vec![0, 1, 1, 0, 0]);
        let a = gillespie_configuration(&sip2(), &eta0, &plan).unwrap();
        let b = gillespie_configuration(&sip2(), &eta0, &plan.with_exec(Exec::Sequential)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.final_state.is_absorbed(sip2().lattice()) && !s.frozen));
        let c = gillespie_configuration(&sip2(), &eta0, &SimPlan::new(8, 20, SimHorizon::Absorption)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_exclusion_sector_is_frozen() {
        let l = Arc::new(Lattice::chain(3).unwrap());
        let spec = GeneratorSpec::closed(RateFamily::canonical(l, -1.0).unwrap());
        let eta0 = Configuration::from_occupations(vec![1, 1, 1]);
        let r = gillespie_configuration(&spec, &eta0, &SimPlan::new(1, 3, SimHorizon::Time(5.0))).unwrap();
        assert!(r.iter().all(|s| s.frozen && s.events == 0 && s.final_state == eta0));
    }

    #[test]
    fn sip2_absorption_histogram() {
        let eta0 = Configuration::from_occupations(vec![0, 1, 1, 0, 0]);
        let plan = SimPlan::new(3, 20_000, SimHorizon::Absorption);
        let (hist, frozen) = final_state_histogram(&sip2(), &eta0, &plan).unwrap();
        assert_eq!(frozen, 0);
        let exact: [f64; 3] = [1.0 / 6.0, 5.0 / 12.0, 5.0 / 12.0];
        for (k, p) in exact.iter().enumerate() {
            let zeta = Configuration::from_occupations(vec![k as u32, 0, 0, 0, 2 - k as u32]);
            let f = hist.get(&zeta).copied().unwrap_or(0) as f64 / 20_000.0;
            let se = (p * (1.0 - p) / 20_000.0).sqrt();
            assert!((f - p).abs() < 4.0 * se, "k={k}: {f} vs {p}");
        }
    }

    #[test]
    fn labelled_and_configuration_processes_agree() {
        let spec = sip2();
        let coords: CoordinateVector = vec![1, 2].into();
        let plan = SimPlan::new(11, 20_000, SimHorizon::Time(0.8));
        let lab = gillespie_coordinate(&spec, &coords, &plan).unwrap();
        let mut a = BTreeMap::new();
        for s in &lab {
            *a.entry(phi(spec.lattice(), &s.final_coords).unwrap()).or_insert(0u64) += 1;
        }
        let (b, _) =
            final_state_histogram(&spec, &phi(spec.lattice(), &coords).unwrap(), &SimPlan { seed: 12, ..plan }).unwrap();
        assert!(chi_square_two_sample(&a, &b).p_value > 1e-4);
        // relabelling the start leaves the law unchanged
        let swapped = gillespie_coordinate(&spec, &vec![2, 1].into(), &SimPlan { seed: 13, ..plan }).unwrap();
        let mut c = BTreeMap::new();
        for s in &swapped {
            *c.entry(phi(spec.lattice(), &s.final_coords).unwrap()).or_insert(0u64) += 1;
        }
        assert!(chi_square_two_sample(&a, &c).p_value > 1e-4);
    }

    #[test]
    fn irw_ness_means() {
        let spec = ChainModel::unit(3, 0.0, 1.0, 5.0).unwrap().reservoir_spec().unwrap();
        let mut plan = SimPlan::new(5, 8, SimHorizon::Time(2000.0));
        plan.burn_in = 50.0;
        plan.thinning = 50.0;
        let obs: Vec<Box<dyn Fn(&Configuration) -> f64 + Sync>> =
            (0..3).map(|x| Box::new(move |c: &Configuration| c.occupation(x) as f64) as _).collect();
        let refs: Vec<Observable<'_>> = obs.iter().map(|b| b.as_ref()).collect();
        let est = ness_time_average(&spec, &Configuration::zero(3), &refs, &plan).unwrap();
        for (e, m) in est.iter().zip([2.0, 3.0, 4.0]) {
            assert!(e.covers(m, 4.0), "{e:?} vs {m}");
        }
        plan.burn_in = 3000.0;
        assert!(ness_time_average(&spec, &Configuration::zero(3), &refs, &plan).is_err());
    }

    #[test]
    fn equilibrium_covariance_vanishes() {
        let spec = ChainModel::unit(3, 1.0, 1.0, 1.0).unwrap().reservoir_spec().unwrap();
        let mut plan = SimPlan::new(9, 8, SimHorizon::Time(2000.0));
        plan.burn_in = 20.0;
        plan.thinning = 40.0;
        let e = covariance_estimate(&spec, &Configuration::zero(3), 0, 2, &plan).unwrap();
        assert!(e.covers(0.0, 4.0), "{e:?}");
    }

    #[test]
    fn plan_validation() {
        let spec = sip2();
        let eta0 = Configuration::delta(5, 1);
        assert!(gillespie_configuration(&spec, &eta0, &SimPlan::new(1, 0, SimHorizon::Absorption)).is_err());
        assert!(gillespie_configuration(&spec, &Configuration::delta(3, 1), &SimPlan::new(1, 1, SimHorizon::Absorption)).is_err());
    }
}
