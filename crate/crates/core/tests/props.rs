//! Cross-module invariants checked against independent oracles: quadrature
//! for distribution functions, brute-force grids for optimality, and
//! componentwise monotonicity properties of the threshold maps.

mod common;

use proptest::prelude::*;
use qualdyn::analysis::suites::{random_shared_dist_scenario, random_transitions};
use qualdyn::policy::Policy;
use qualdyn::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn any_dist() -> impl Strategy<Value = FeatureDistribution> {
    prop_oneof![
        (-8.0..8.0f64, 0.5..6.0f64)
            .prop_map(|(m, s)| FeatureDistribution::gaussian(m, s).unwrap()),
        (0.8..6.0f64, 0.8..6.0f64)
            .prop_map(|(a, b)| FeatureDistribution::beta(a, b).unwrap()),
        (1.0..5.0f64, 0.2..3.0f64, 0.2..3.0f64).prop_map(|(w, d1, d2)| {
            FeatureDistribution::tabulated(
                vec![0.0, 0.3 * w, 0.6 * w, w],
                vec![d1, d2, d1 + d2, d2],
            )
            .unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_round_trips_through_cdf(d in any_dist(), p in 0.001..0.999f64) {
        let x = d.quantile(p).unwrap();
        prop_assert!((d.cdf(x) - p).abs() < 1e-8, "kind {d:?}: cdf(quantile({p})) = {}", d.cdf(x));
    }

    #[test]
    fn cdf_is_monotone(d in any_dist(), x1 in -80.0..80.0f64, x2 in -80.0..80.0f64) {
        let (lo, hi) = (x1.min(x2), x1.max(x2));
        prop_assert!(d.cdf(lo) <= d.cdf(hi) + 1e-15);
    }

    #[test]
    fn h_func_respects_transition_bounds(
        t00 in 0.05..0.95f64, t01 in 0.05..0.95f64,
        t10 in 0.05..0.95f64, t11 in 0.05..0.95f64,
        theta in -30.0..30.0f64,
    ) {
        let g = GroupModel::new(
            FeatureDistribution::gaussian(-5.0, 5.0).unwrap(),
            FeatureDistribution::gaussian(5.0, 5.0).unwrap(),
            TransitionMatrix::new(t00, t01, t10, t11).unwrap(),
            0.5,
        ).unwrap();
        let h = equilibrium::h_func(&g, theta);
        let lo = (1.0 - t10.max(t11)) / t00.max(t01);
        let hi = (1.0 - t10.min(t11)) / t00.min(t01);
        prop_assert!(h >= lo - 1e-12 && h <= hi + 1e-12, "h = {h} outside [{lo}, {hi}]");
    }

    #[test]
    fn step_stays_in_unit_square(
        alpha_a in 0.0..1.0f64, alpha_b in 0.0..1.0f64,
        theta_a in -40.0..40.0f64, theta_b in -40.0..40.0f64,
    ) {
        let s = common::fig2_scenario();
        let pair = policy::ThresholdPair {
            theta_a, theta_b,
            constraint: FairnessConstraint::Unconstrained,
            fairness_residual: 0.0, boundary: false, flat_cdf: false, local_optima: 1,
        };
        let next = step(&s, &QualState::new(alpha_a, alpha_b).unwrap(), &pair);
        prop_assert!((0.0..=1.0).contains(&next.alpha_a));
        prop_assert!((0.0..=1.0).contains(&next.alpha_b));
    }
}

#[test]
fn cdf_monotone_bulk_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let dists = [
        FeatureDistribution::gaussian(1.0, 3.0).unwrap(),
        FeatureDistribution::beta(2.0, 5.0).unwrap(),
        FeatureDistribution::tabulated(vec![0.0, 1.0, 2.0, 5.0], vec![0.1, 1.0, 0.0, 0.4])
            .unwrap(),
    ];
    for d in &dists {
        let (lo, hi) = d.support();
        for _ in 0..10_000 {
            let a = lo - 1.0 + (hi - lo + 2.0) * rng.random::<f64>();
            let b = lo - 1.0 + (hi - lo + 2.0) * rng.random::<f64>();
            let (a, b) = (a.min(b), a.max(b));
            assert!(d.cdf(a) <= d.cdf(b) + 1e-15);
        }
    }
}

#[test]
fn gaussian_cdf_matches_quadrature() {
    let d = FeatureDistribution::gaussian(1.5, 2.5).unwrap();
    let (lo, _) = d.support();
    for k in 0..=20 {
        let x = 1.5 - 25.0 + 50.0 * k as f64 / 20.0; // spans ±10 sigma
        let quad = common::integrate(&|t| d.pdf(t), lo, x.max(lo), 1e-12);
        assert!(
            (d.cdf(x) - quad).abs() < 1e-8,
            "x = {x}: cdf {} vs quadrature {quad}",
            d.cdf(x)
        );
    }
}

#[test]
fn densities_integrate_to_one() {
    let dists = [
        FeatureDistribution::gaussian(-2.0, 4.0).unwrap(),
        FeatureDistribution::beta(2.0, 5.0).unwrap(),
        FeatureDistribution::tabulated(vec![0.0, 0.5, 2.0], vec![0.3, 1.1, 0.2]).unwrap(),
    ];
    for d in dists {
        let (lo, hi) = d.support();
        let mass = common::integrate(&|x| d.pdf(x), lo, hi, 1e-12);
        assert!((mass - 1.0).abs() < 1e-9, "{d:?} integrates to {mass}");
    }
}

#[test]
fn dp_constraint_density_integrates_to_one() {
    let s = common::fig2_scenario();
    for alpha in [0.0, 0.21, 0.5, 0.87, 1.0] {
        let (lo, hi) = s.group_a().support();
        let mass = common::integrate(
            &|x| {
                constraint_density(s.group_a(), alpha, FairnessConstraint::DemographicParity, x)
                    .unwrap()
            },
            lo,
            hi,
            1e-12,
        );
        assert!((mass - 1.0).abs() < 1e-9, "alpha = {alpha}: mass {mass}");
    }
}

#[test]
fn qualification_profile_monotone_in_x_and_alpha() {
    let s = common::fig2_scenario();
    let g = s.group_a();
    let (lo, hi) = g.support();
    let mut prev = -1.0;
    for i in 0..1024 {
        let x = lo + (hi - lo) * i as f64 / 1023.0;
        let gamma = qualification_profile(g, 0.37, x).unwrap();
        assert!(gamma >= prev - 1e-12);
        prev = gamma;
    }
    // Strict increase in x where both densities carry mass.
    let g1 = qualification_profile(g, 0.37, -1.0).unwrap();
    let g2 = qualification_profile(g, 0.37, 1.0).unwrap();
    assert!(g2 > g1);
    // Strict increase in alpha at a fixed interior point.
    let mut prev = 0.0;
    for k in 1..50 {
        let alpha = k as f64 / 50.0;
        let gamma = qualification_profile(g, alpha, 0.7).unwrap();
        assert!(gamma > prev);
        prev = gamma;
    }
}

#[test]
fn thresholds_non_increasing_in_rates() {
    // Componentwise-larger states never raise either threshold.
    let s = common::fig2_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for constraint in FairnessConstraint::ALL {
        let map = threshold_map(&s, constraint).unwrap();
        for _ in 0..200 {
            let a1 = 0.02 + 0.9 * rng.random::<f64>();
            let b1 = 0.02 + 0.9 * rng.random::<f64>();
            let a2 = a1 + (0.98 - a1) * rng.random::<f64>();
            let b2 = b1 + (0.98 - b1) * rng.random::<f64>();
            let p1 = map.thresholds(&QualState::new(a1, b1).unwrap()).unwrap();
            let p2 = map.thresholds(&QualState::new(a2, b2).unwrap()).unwrap();
            assert!(
                p2.theta_a <= p1.theta_a + 1e-6,
                "{constraint}: ({a1},{b1})->({a2},{b2}) raised theta_a {} -> {}",
                p1.theta_a,
                p2.theta_a
            );
            assert!(
                p2.theta_b <= p1.theta_b + 1e-6,
                "{constraint}: ({a1},{b1})->({a2},{b2}) raised theta_b {} -> {}",
                p1.theta_b,
                p2.theta_b
            );
        }
    }
}

#[test]
fn fair_rates_equalized_exactly() {
    let s = common::fig2_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for constraint in [
        FairnessConstraint::DemographicParity,
        FairnessConstraint::EqualOpportunity,
    ] {
        for _ in 0..25 {
            let state = QualState::new(
                0.05 + 0.9 * rng.random::<f64>(),
                0.05 + 0.9 * rng.random::<f64>(),
            )
            .unwrap();
            let pair = fair_thresholds(&s, &state, constraint).unwrap();
            let rate = |group: &GroupModel, alpha: f64, theta: f64| {
                1.0 - model::constraint_cdf(group, alpha, constraint, theta).unwrap()
            };
            let ra = rate(s.group_a(), state.alpha_a, pair.theta_a);
            let rb = rate(s.group_b(), state.alpha_b, pair.theta_b);
            assert!(
                (ra - rb).abs() <= 1e-7,
                "{constraint} at {state:?}: rates {ra} vs {rb}"
            );
        }
    }
}

#[test]
fn solver_utility_beats_dense_grid() {
    // Ties within 1e-6 against a fairness-feasible grid oracle.
    let s = common::fig2_scenario();
    let state = QualState::new(0.5, 0.5).unwrap();
    for constraint in [
        FairnessConstraint::DemographicParity,
        FairnessConstraint::EqualOpportunity,
    ] {
        let pair = fair_thresholds(&s, &state, constraint).unwrap();
        let solver = expected_utility(&s, &state, pair.thetas());
        let grid = common::fair_grid_max(&s, &state, constraint, 401);
        assert!(
            solver >= grid - 1e-6,
            "{constraint}: solver {solver} vs grid {grid}"
        );
    }
    // Unconstrained: per-group grid oracle, matching within 1e-6.
    let map = threshold_map(&s, FairnessConstraint::Unconstrained).unwrap();
    let pair = map.thresholds(&state).unwrap();
    let solver = expected_utility(&s, &state, pair.thetas());
    let grid = common::unconstrained_grid_max(&s, &state, 2001);
    assert!((solver - grid).abs() < 1e-6, "solver {solver} vs grid {grid}");
}

#[test]
fn deterministic_step_matches_agent_simulation_smoke() {
    let s = common::fig2_scenario();
    let state = QualState::new(0.5, 0.5).unwrap();
    let map = threshold_map(&s, FairnessConstraint::Unconstrained).unwrap();
    let pair = map.thresholds(&state).unwrap();
    let exact = step(&s, &state, &pair);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mc = common::mc_step(&s, &state, pair.thetas(), 200_000, &mut rng);
    assert!((exact.alpha_a - mc[0].0).abs() < 3.0 * mc[0].1);
    assert!((exact.alpha_b - mc[1].0).abs() < 3.0 * mc[1].1);
}

#[test]
fn h_composition_monotone_direction_by_class() {
    // Encouraging transitions: h∘θ falls as rates rise; discouraging: it
    // rises.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for class in [TransitionClass::A, TransitionClass::B] {
        let s = random_shared_dist_scenario(&mut rng, class);
        let map = threshold_map(&s, FairnessConstraint::DemographicParity).unwrap();
        let h_at = |aa: f64, ab: f64| {
            let pair = map.thresholds(&QualState::new(aa, ab).unwrap()).unwrap();
            (
                equilibrium::h_func(s.group_a(), pair.theta_a),
                equilibrium::h_func(s.group_b(), pair.theta_b),
            )
        };
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..9 {
            let a = 0.1 + 0.8 * k as f64 / 8.0;
            let cur = h_at(a, a);
            if let Some(p) = prev {
                match class {
                    TransitionClass::B => {
                        assert!(cur.0 <= p.0 + 1e-6 && cur.1 <= p.1 + 1e-6, "{class}: {p:?} -> {cur:?}");
                    }
                    _ => {
                        assert!(cur.0 >= p.0 - 1e-6 && cur.1 >= p.1 - 1e-6, "{class}: {p:?} -> {cur:?}");
                    }
                }
            }
            prev = Some(cur);
        }
    }
}

#[test]
fn unique_equilibrium_reached_from_grid_of_starts() {
    // Near-policy-independent transitions: the sufficient uniqueness
    // condition and the contraction both hold, and a 5x5 grid of starts
    // lands on the single equilibrium.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut t_near = |base: f64, gap: f64| {
        let lo = base;
        let hi = (base + gap).min(0.95);
        (lo, hi)
    };
    let (t00, t01) = t_near(0.3 + 0.2 * rng.random::<f64>(), 0.02);
    let (t10, t11) = t_near(0.5 + 0.2 * rng.random::<f64>(), 0.02);
    let g = GroupModel::new(
        FeatureDistribution::gaussian(-4.0, 4.0).unwrap(),
        FeatureDistribution::gaussian(4.0, 4.0).unwrap(),
        TransitionMatrix::new(t00, t01, t10, t11).unwrap(),
        0.5,
    )
    .unwrap();
    let s = Scenario::new(g.clone(), g, 1.0, 1.0).unwrap();
    for constraint in FairnessConstraint::ALL {
        let check = check_uniqueness(&s, constraint).unwrap();
        assert!(check.unique, "{constraint}: {check:?}");
        let report = find_equilibria(&s, constraint).unwrap();
        assert_eq!(report.equilibria.len(), 1);
        let lip = report.lipschitz_estimate.unwrap();
        assert!(lip < 1.0, "{constraint}: lipschitz {lip}");
        let eq = report.equilibria[0].state;
        for i in 0..5 {
            for j in 0..5 {
                let start = QualState::new(
                    0.05 + 0.9 * i as f64 / 4.0,
                    0.05 + 0.9 * j as f64 / 4.0,
                )
                .unwrap();
                let traj = simulate(&s, constraint, start, 10_000, 1e-10).unwrap();
                assert!(
                    traj.last_state().dist(&eq) < 1e-6,
                    "{constraint} from {start:?} ended at {:?}, eq {eq:?}",
                    traj.last_state()
                );
            }
        }
    }
}

#[test]
fn equilibria_verify_balanced_equations_on_random_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..6 {
        let class = if rng.random::<bool>() {
            TransitionClass::A
        } else {
            TransitionClass::B
        };
        let s = random_shared_dist_scenario(&mut rng, class);
        for constraint in FairnessConstraint::ALL {
            let report = match find_equilibria(&s, constraint) {
                Ok(r) => r,
                Err(Error::MultipleEquilibria(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            let policy = threshold_map(&s, constraint).unwrap();
            for eq in &report.equilibria {
                assert!(eq.residual_a.abs() <= 1e-7 && eq.residual_b.abs() <= 1e-7);
                let pair = policy.thresholds(&eq.state).unwrap();
                let next = step(&s, &eq.state, &pair);
                assert!(next.dist(&eq.state) <= 1e-7);
            }
        }
    }
}

#[test]
fn condition_c_transitions_reject_uniqueness_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let tc = random_transitions(&mut rng, TransitionClass::C);
    let td = random_transitions(&mut rng, TransitionClass::D);
    let g = |t| {
        GroupModel::new(
            FeatureDistribution::gaussian(-5.0, 5.0).unwrap(),
            FeatureDistribution::gaussian(5.0, 5.0).unwrap(),
            t,
            0.5,
        )
        .unwrap()
    };
    let s = Scenario::new(g(tc), g(td), 1.0, 1.0).unwrap();
    assert!(matches!(
        check_uniqueness(&s, FairnessConstraint::Unconstrained),
        Err(Error::UniquenessInapplicable(..))
    ));
}

#[test]
fn score_acceptance_regions_nest() {
    // Raising the score threshold can only shrink the acceptance region.
    use qualdyn::highdim::*;
    let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let g = ExpFamilyGroup::new(
        FeatureClasses::Gaussian {
            class0: GaussianClass::new(vec![-1.0, -1.0], eye.clone()).unwrap(),
            class1: GaussianClass::new(vec![1.0, 1.0], eye).unwrap(),
        },
        TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
        0.5,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let samples = g.sample_class(0, 500, &mut rng).unwrap();
    let (lo_t, hi_t) = (-1.0, 1.5);
    for x in &samples {
        let t = g.score(x).unwrap();
        let in_hi = t >= hi_t;
        let in_lo = t >= lo_t;
        assert!(!in_hi || in_lo, "x accepted at the higher cut but not the lower");
    }
}

#[test]
fn score_space_profile_matches_raw_space() {
    use qualdyn::highdim::*;
    let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let g = ExpFamilyGroup::new(
        FeatureClasses::Gaussian {
            class0: GaussianClass::new(vec![-1.0, 0.0], eye.clone()).unwrap(),
            class1: GaussianClass::new(vec![1.0, 0.8], eye).unwrap(),
        },
        TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
        0.5,
    )
    .unwrap();
    let reduced = reduce_to_1d(&g, 200_000, 3).unwrap();
    let alpha = 0.4;
    let mvn_pdf = |mu: &[f64], x: &[f64]| {
        let d2: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
        (-0.5 * d2).exp() / std::f64::consts::TAU
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut max_err = 0.0f64;
    for x in g.sample_class(1, 400, &mut rng).unwrap() {
        let p1 = mvn_pdf(&[1.0, 0.8], &x);
        let p0 = mvn_pdf(&[-1.0, 0.0], &x);
        let gamma_raw = 1.0 / ((p0 / p1) * (1.0 / alpha - 1.0) + 1.0);
        let t = g.score(&x).unwrap();
        let (lo, hi) = reduced.support();
        if t <= lo || t >= hi {
            continue;
        }
        let gamma_score = qualification_profile(&reduced, alpha, t).unwrap();
        max_err = max_err.max((gamma_raw - gamma_score).abs());
    }
    assert!(max_err < 0.02, "max profile mismatch {max_err}");
}
