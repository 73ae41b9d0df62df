use std::sync::Arc;

use consips::duality::{d_theta, DualSolver, DualityKernel, MarginalLaw};
use consips::exact::{absorption_distribution, assemble, commutator_defect, duality_defect};
use consips::genfun::{sep_size_recursion, GenPoly};
use consips::operators::annihilation_matrix;
use consips::rates::{ChainModel, GeneratorSpec, RateFamily};
use consips::{CoordinateVector, Lattice, Sector};
use proptest::prelude::*;

fn theta() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::sample::select(vec![-1.0, -0.5, -1.0 / 3.0, 0.0, 1.0, 2.0]),
        0.05f64..3.0,
    ]
}

fn closed_chain(n: usize, theta: f64) -> GeneratorSpec {
    GeneratorSpec::closed(RateFamily::canonical(Arc::new(Lattice::chain(n).unwrap()), theta).unwrap())
}

fn sector(spec: &GeneratorSpec, n: u32) -> Arc<Sector> {
    Arc::new(Sector::enumerate(spec.lattice().clone(), n, spec.cap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generators_are_conservative_and_commute(theta in theta(), n_sites in 1usize..5, n in 1u32..4) {
        let spec = closed_chain(n_sites, theta);
        prop_assume!(spec.cap().is_none_or(|c| n <= c * n_sites as u32));
        let (sn, sm) = (sector(&spec, n), sector(&spec, n - 1));
        let (qn, qm) = (assemble(&spec, sn.clone()).unwrap(), assemble(&spec, sm.clone()).unwrap());
        prop_assert!(qn.row_sum_defect() < 1e-12);
        prop_assert!(qn.diag().iter().all(|&d| d <= 0.0));
        let a = annihilation_matrix(&sn, &sm).unwrap();
        prop_assert!(commutator_defect(&qn, &qm, &a).unwrap() < 1e-11);
    }

    #[test]
    fn self_duality_holds_for_random_theta(theta in theta(), n_sites in 2usize..5) {
        let spec = closed_chain(n_sites, theta);
        prop_assume!(spec.cap().is_none_or(|c| 2 <= c * n_sites as u32));
        let (s1, s2) = (sector(&spec, 1), sector(&spec, 2));
        let d = DualityKernel::SelfDual { theta }.matrix(&s1, &s2).unwrap();
        let defect = duality_defect(&assemble(&spec, s1).unwrap(), &assemble(&spec, s2).unwrap(), &d).unwrap();
        prop_assert!(defect < 1e-11);
    }

    #[test]
    fn one_dual_particle_reads_occupation(theta in theta(), n in 0u32..12) {
        prop_assert!((d_theta(theta, 1, n) - n as f64).abs() < 1e-12);
        prop_assert_eq!(d_theta(theta, 0, n), 1.0);
    }

    #[test]
    fn marginals_are_normalized_with_mean_rho(theta in prop::sample::select(vec![-1.0, -0.5, 0.0, 0.5, 1.0]), rho in 0.05f64..0.9) {
        let law = MarginalLaw::new(theta, rho).unwrap();
        let (mass, mean) = (0..400u32).fold((0.0, 0.0), |(m, e), n| {
            let w = law.weight(n);
            (m + w, e + n as f64 * w)
        });
        prop_assert!((mass - 1.0).abs() < 1e-10);
        prop_assert!((mean - rho).abs() < 1e-9);
    }

    #[test]
    fn absorption_distributions_are_probabilities(theta in theta(), n_sites in 1usize..5, n in 1u32..4) {
        let spec = ChainModel::unit(n_sites, theta, 0.0, 0.0).unwrap().dual_spec().unwrap();
        let s = sector(&spec, n);
        let q = assemble(&spec, s.clone()).unwrap();
        let start = s.states()[s.len() / 2].clone();
        let r = absorption_distribution(&q, &start, 1e-14).unwrap();
        prop_assert!(r.table.iter().all(|(_, p)| *p >= -1e-14));
        prop_assert!(r.residual.abs() < 1e-10);
    }

    #[test]
    fn sep_recursion_is_a_distribution(n_sites in 1usize..9, seed in any::<u64>()) {
        let m = 1 + (seed as usize) % n_sites.min(4);
        let mut coords: Vec<usize> = (1..=n_sites).collect();
        let shift = (seed >> 8) as usize;
        coords.rotate_left(shift % n_sites);
        coords.truncate(m);
        coords.sort_unstable();
        let g: GenPoly = sep_size_recursion(n_sites, &CoordinateVector(coords)).unwrap();
        prop_assert!((g.eval(1.0) - 1.0).abs() < 1e-12);
        prop_assert!(g.coeffs().iter().all(|&c| c >= -1e-15));
    }
}

/// Two-point covariances are negative for exclusion, positive for
/// inclusion and zero for independent walkers, for every pair on chains
/// up to eight sites.
#[test]
fn covariance_sign_law() {
    for n_sites in 2..=8 {
        for (theta, rl, rr) in [(-1.0, 0.1, 0.8), (0.0, 1.0, 3.0), (1.0, 2.0, 0.5), (2.0, 0.5, 1.5)] {
            let solver = DualSolver::new(ChainModel::unit(n_sites, theta, rl, rr).unwrap(), 1e-14).unwrap();
            for x in 1..=n_sites {
                for y in x + 1..=n_sites {
                    let c = solver.covariance(x, y).unwrap();
                    match theta {
                        t if t < 0.0 => assert!(c < 0.0, "θ={theta} N={n_sites} ({x},{y}): {c}"),
                        t if t > 0.0 => assert!(c > 0.0, "θ={theta} N={n_sites} ({x},{y}): {c}"),
                        _ => assert!(c.abs() < 1e-12, "θ=0 N={n_sites} ({x},{y}): {c}"),
                    }
                }
            }
        }
    }
}

#[test]
fn dual_profile_is_linear() {
    for theta in [-1.0, 0.0, 1.0, 2.0] {
        let solver = DualSolver::new(ChainModel::unit(5, theta, 0.2, 0.7).unwrap(), 1e-14).unwrap();
        let profile = solver.profile().unwrap();
        for (i, v) in profile.iter().enumerate() {
            let x = (i + 1) as f64;
            assert!((v - (0.2 + (0.7 - 0.2) * x / 6.0)).abs() < 1e-12, "θ={theta}: {profile:?}");
        }
    }
}
